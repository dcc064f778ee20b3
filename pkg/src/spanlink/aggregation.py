"""Context-sensitive aggregation of subword scores into span annotations.

The decode path is a fixed composition: per-subword top-k, word-level
probability averaging, joining of consecutive words that agree on an entity,
candidate-set filtering of the joined phrases, and a post-processing pass
that rejects single punctuation / function-word annotations and drops O.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .candidates import CONTEXT_AWARE, CandidateStore
from .core import EntityVocabulary, O_LABEL, SpanAnnotation, SubwordToken
from .errors import ConfigError, ParseError, ShapeError
from .head import sigmoid

POLICY_NONE = "none"
POLICY_AGNOSTIC = "context_agnostic"
POLICY_AWARE = "context_aware"

PROB_SIGMOID = "sigmoid"
PROB_SOFTMAX = "softmax"

DEFAULT_TOP_K = 10


@dataclass(frozen=True)
class AggregationConfig:
    k: int = DEFAULT_TOP_K
    prob_mode: str = PROB_SIGMOID  # softmax kept for ablation
    candidate_policy: str = POLICY_NONE

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError(f"top-k must be >= 1, got {self.k}")
        if self.prob_mode not in (PROB_SIGMOID, PROB_SOFTMAX):
            raise ConfigError(f"unknown probability mode {self.prob_mode!r}")
        if self.candidate_policy not in (POLICY_NONE, POLICY_AGNOSTIC, POLICY_AWARE):
            raise ConfigError(f"unknown candidate policy {self.candidate_policy!r}")


@dataclass
class WordAnnotation:
    """Merged prediction distribution over all subwords of one word."""

    word_index: int
    char_start: int
    char_end: int
    scores: dict[int, float]  # head column -> averaged probability
    top: int
    lone_punctuation: bool
    is_function_word: bool


@dataclass
class SpanCandidate:
    """A joined phrase annotation, prior to filtering and post-processing."""

    char_start: int
    char_end: int
    scores: dict[int, float]
    top: int
    word_count: int
    lone_punctuation: bool
    is_function_word: bool


def topk(scores: np.ndarray, k: int, prob_mode: str = PROB_SIGMOID) -> list[list[tuple[int, float]]]:
    """Top-k (column, probability) per subword, descending, ties to lower column.

    Ranking happens on the raw unnormalized scores; probabilities come from
    the elementwise logistic map (or a full-row softmax in ablation mode).
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2:
        raise ShapeError(f"score matrix must be 2-D, got shape {scores.shape}")
    kb = scores.shape[1]
    if k > kb:
        raise ConfigError(f"top-k {k} exceeds vocabulary size {kb}")
    out = []
    for row in scores:
        if k < kb:
            # Selection must honor the tie rule, so boundary ties at the
            # k-th score are admitted in ascending column order.
            thresh = np.partition(row, kb - k)[kb - k]
            above = np.flatnonzero(row > thresh)
            ties = np.flatnonzero(row == thresh)
            part = np.concatenate([above, ties[: k - above.size]])
        else:
            part = np.arange(kb)
        cols = part[np.lexsort((part, -row[part]))]
        if prob_mode == PROB_SOFTMAX:
            shifted = row - row.max()
            probs_row = np.exp(shifted) / np.exp(shifted).sum()
            out.append([(int(j), float(probs_row[j])) for j in cols])
        else:
            out.append([(int(j), float(sigmoid(row[j]))) for j in cols])
    return out


def word_distribution(subword_topk: list[list[tuple[int, float]]]) -> dict[int, float]:
    """Average each entity's probability over the word's subwords.

    The union of the subwords' top-k entities is scored; an entity absent
    from a subword's top-k contributes probability 0 for that subword.
    """
    if not subword_topk:
        raise ShapeError("word has no subwords")
    totals: dict[int, float] = {}
    for entries in subword_topk:
        for col, prob in entries:
            totals[col] = totals.get(col, 0.0) + prob
    n = len(subword_topk)
    return {col: total / n for col, total in totals.items()}


def _argmax(scores: dict[int, float]) -> int:
    # Highest probability wins; ties break toward the lower head column.
    return min(scores, key=lambda col: (-scores[col], col))


def build_word_annotations(
    tokens: list[SubwordToken],
    subword_topk: list[list[tuple[int, float]]],
) -> list[WordAnnotation]:
    """Group contiguous same-word tokens and compute their distributions."""
    words: list[WordAnnotation] = []
    i = 0
    while i < len(tokens):
        j = i
        while j < len(tokens) and tokens[j].word_index == tokens[i].word_index:
            j += 1
        group = tokens[i:j]
        scores = word_distribution(subword_topk[i:j])
        words.append(
            WordAnnotation(
                word_index=group[0].word_index,
                char_start=group[0].start,
                char_end=group[-1].end,
                scores=scores,
                top=_argmax(scores),
                lone_punctuation=len(group) == 1 and group[0].is_punctuation,
                is_function_word=group[0].is_function_word,
            )
        )
        i = j
    return words


def join_spans(words: list[WordAnnotation]) -> list[SpanCandidate]:
    """Join maximal runs of consecutive words sharing the same top entity.

    Merged scores are the per-entity mean over the run's words, with absent
    entities contributing 0. Runs topped by O stay as O spans until
    post-processing removes them.
    """
    spans: list[SpanCandidate] = []
    i = 0
    while i < len(words):
        j = i
        while j < len(words) and words[j].top == words[i].top:
            j += 1
        run = words[i:j]
        merged: dict[int, float] = {}
        for w in run:
            for col, prob in w.scores.items():
                merged[col] = merged.get(col, 0.0) + prob
        merged = {col: total / len(run) for col, total in merged.items()}
        spans.append(
            SpanCandidate(
                char_start=run[0].char_start,
                char_end=run[-1].char_end,
                scores=merged,
                top=run[0].top,
                word_count=len(run),
                lone_punctuation=len(run) == 1 and run[0].lone_punctuation,
                is_function_word=len(run) == 1 and run[0].is_function_word,
            )
        )
        i = j
    return spans


def filter_by_candidates(
    span: SpanCandidate,
    mention_surface: str,
    store: CandidateStore,
    vocab: EntityVocabulary,
    context_key=None,
    o_column: int | None = None,
) -> SpanCandidate:
    """Prune entities absent from the mention's candidate list.

    Applies only when the surface form matches a store key; unknown surfaces
    pass through untouched. When every entity is pruned the span becomes O.
    """
    candidates = store.lookup(mention_surface.strip(), context_key)
    if candidates is None:
        return span
    allowed = {vocab.index_of(e) for e in candidates if e in vocab}
    kept = {col: p for col, p in span.scores.items() if col in allowed}
    if not kept:
        o_col = o_column if o_column is not None else vocab.o_index
        if o_col is None:
            raise ConfigError("candidate filtering emptied a span but the vocabulary has no O")
        return SpanCandidate(
            char_start=span.char_start,
            char_end=span.char_end,
            scores={},
            top=o_col,
            word_count=span.word_count,
            lone_punctuation=span.lone_punctuation,
            is_function_word=span.is_function_word,
        )
    return SpanCandidate(
        char_start=span.char_start,
        char_end=span.char_end,
        scores=kept,
        top=_argmax(kept),
        word_count=span.word_count,
        lone_punctuation=span.lone_punctuation,
        is_function_word=span.is_function_word,
    )


def postprocess(spans: list[SpanCandidate], o_column: int | None) -> list[SpanCandidate]:
    """Reject lone punctuation / function-word annotations; drop O spans."""
    kept = []
    for span in spans:
        if span.top == o_column:
            continue
        if span.lone_punctuation or span.is_function_word:
            continue
        kept.append(span)
    return kept


def aggregate(
    text: str,
    tokens: list[SubwordToken],
    logits: np.ndarray,
    vocab: EntityVocabulary,
    config: AggregationConfig = AggregationConfig(),
    store: CandidateStore | None = None,
    doc_id: str | None = None,
) -> list[SpanAnnotation]:
    """Decode document-level scores into final span annotations."""
    logits = np.asarray(logits)
    if logits.ndim != 2 or logits.shape[0] != len(tokens):
        raise ShapeError(
            f"logits shape {logits.shape} does not match token count {len(tokens)}"
        )
    if not tokens:
        return []
    if logits.shape[1] != len(vocab):
        raise ShapeError(f"logits have {logits.shape[1]} columns for vocabulary {len(vocab)}")

    per_subword = topk(logits, config.k, config.prob_mode)
    words = build_word_annotations(tokens, per_subword)
    spans = join_spans(words)

    o_col = vocab.o_index
    if store is not None and config.candidate_policy != POLICY_NONE:
        filtered = []
        for span in spans:
            if span.top == o_col:
                filtered.append(span)
                continue
            surface = text[span.char_start : span.char_end]
            context_key = None
            if config.candidate_policy == POLICY_AWARE and store.kind == CONTEXT_AWARE:
                context_key = (doc_id, span.char_start, span.char_end)
            filtered.append(
                filter_by_candidates(span, surface, store, vocab, context_key, o_col)
            )
        spans = filtered

    final = postprocess(spans, o_col)
    return [
        SpanAnnotation(
            start=s.char_start,
            end=s.char_end,
            entity=vocab.id_of(s.top),
            score=s.scores.get(s.top),
        )
        for s in final
    ]


def write_annotations(path: str | Path, per_document: dict[str, list[SpanAnnotation]]) -> None:
    """Line-delimited records {doc_id, start, end, entity, score}, stable order."""
    with open(path, "w", encoding="utf-8") as fh:
        for doc_id, spans in per_document.items():
            for s in sorted(spans, key=lambda a: (a.start, a.end)):
                record = {
                    "doc_id": doc_id,
                    "start": s.start,
                    "end": s.end,
                    "entity": s.entity,
                    "score": s.score,
                }
                fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def read_annotations(path: str | Path) -> dict[str, list[SpanAnnotation]]:
    per_document: dict[str, list[SpanAnnotation]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                span = SpanAnnotation(
                    int(record["start"]), int(record["end"]), record["entity"],
                    record.get("score"),
                )
                doc_id = str(record["doc_id"])
            except (KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"bad annotation record: {exc}", line=lineno) from None
            per_document.setdefault(doc_id, []).append(span)
    return per_document
