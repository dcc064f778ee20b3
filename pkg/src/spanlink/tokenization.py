"""Subword tokenization, sliding-window chunking, and chunk-score merging.

The reference tokenizer is deliberately simple and dependency-free:
whitespace-delimited words are split into consecutive pieces of at most
``max_piece`` characters, and punctuation characters are always singleton
tokens. Any callable ``text -> list[SubwordToken]`` satisfying the same
reconstruction and determinism contract can replace it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import (
    DEFAULT_FUNCTION_WORDS,
    AnnotatedDocument,
    SpanAnnotation,
    SubwordToken,
    is_punctuation_char,
)
from .errors import ConfigError, OffsetError, ParseError, ShapeError

MENTION_AWARE = "mention_aware"
MENTION_AGNOSTIC = "mention_agnostic"

DEFAULT_WINDOW = 254
DEFAULT_OVERLAP = 20
DEFAULT_MAX_PIECE = 4


def _word_ranges(text: str):
    """Yield (start, end) of maximal non-whitespace runs."""
    start = None
    for i, ch in enumerate(text):
        if ch.isspace():
            if start is not None:
                yield start, i
                start = None
        elif start is None:
            start = i
    if start is not None:
        yield start, len(text)


def tokenize(
    text: str,
    mode: str = MENTION_AGNOSTIC,
    mentions: list[SpanAnnotation] | None = None,
    max_piece: int = DEFAULT_MAX_PIECE,
    function_words: frozenset[str] = DEFAULT_FUNCTION_WORDS,
) -> list[SubwordToken]:
    """Tokenize ``text`` into subword tokens.

    ``mention_aware`` forces token boundaries exactly at every mention's
    start and end offsets; ``mention_agnostic`` ignores mentions entirely.
    Word indices follow whitespace segmentation in both modes.
    """
    if mode not in (MENTION_AWARE, MENTION_AGNOSTIC):
        raise ConfigError(f"unknown tokenization mode {mode!r}")
    boundaries: set[int] = set()
    if mode == MENTION_AWARE:
        if mentions is None:
            raise ConfigError("mention_aware tokenization requires mentions")
        for m in mentions:
            if m.end > len(text):
                raise OffsetError(f"mention [{m.start}, {m.end}) exceeds text length {len(text)}")
            boundaries.add(m.start)
            boundaries.add(m.end)

    tokens: list[SubwordToken] = []
    for word_index, (ws, we) in enumerate(_word_ranges(text)):
        cuts = {ws, we}
        for p in range(ws, we):
            if is_punctuation_char(text[p]):
                cuts.add(p)
                cuts.add(p + 1)
        cuts.update(b for b in boundaries if ws < b < we)
        edges = sorted(cuts)
        is_function = text[ws:we].lower() in function_words
        for a, b in zip(edges, edges[1:]):
            for off in range(a, b, max_piece):
                end = min(off + max_piece, b)
                surface = text[off:end]
                tokens.append(
                    SubwordToken(
                        surface=surface,
                        start=off,
                        end=end,
                        word_index=word_index,
                        is_punctuation=len(surface) == 1 and is_punctuation_char(surface),
                        is_function_word=is_function,
                    )
                )
    return tokens


@dataclass(frozen=True)
class Chunk:
    """A window of ``overlap``-overlapping document tokens: [token_start, token_end)."""

    token_start: int
    token_end: int
    tokens: tuple[SubwordToken, ...]

    def __len__(self) -> int:
        return self.token_end - self.token_start


def chunk(
    tokens: list[SubwordToken],
    window: int = DEFAULT_WINDOW,
    overlap: int = DEFAULT_OVERLAP,
) -> list[Chunk]:
    """Split tokens into windows of ``window`` tokens overlapping by ``overlap``.

    Chunk k starts at k * (window - overlap); the last chunk may be short.
    """
    if overlap < 0 or window <= overlap:
        raise ConfigError(f"need window > overlap >= 0, got window={window} overlap={overlap}")
    n = len(tokens)
    if n == 0:
        return []
    stride = window - overlap
    chunks = []
    start = 0
    while True:
        end = min(start + window, n)
        chunks.append(Chunk(start, end, tuple(tokens[start:end])))
        if end == n:
            break
        start += stride
    return chunks


def merge_chunk_scores(chunks: list[Chunk], per_chunk: list[np.ndarray]) -> np.ndarray:
    """Reassemble per-chunk score matrices into one document-level matrix.

    Rows of tokens covered by several chunks are the arithmetic mean of the
    covering rows; single-cover rows pass through unchanged.
    """
    if len(chunks) != len(per_chunk):
        raise ShapeError(f"{len(chunks)} chunks but {len(per_chunk)} score matrices")
    if not chunks:
        return np.zeros((0, 0))
    cols = per_chunk[0].shape[1]
    n = max(c.token_end for c in chunks)
    sums = np.zeros((n, cols))
    counts = np.zeros(n)
    for ch, scores in zip(chunks, per_chunk):
        if scores.shape != (len(ch), cols):
            raise ShapeError(
                f"chunk [{ch.token_start}, {ch.token_end}) expects scores "
                f"{(len(ch), cols)}, got {scores.shape}"
            )
        sums[ch.token_start : ch.token_end] += scores
        counts[ch.token_start : ch.token_end] += 1
    if np.any(counts == 0):
        raise ShapeError("chunks do not cover every token index")
    return sums / counts[:, None]


def write_corpus(docs: list[AnnotatedDocument], path: str | Path) -> None:
    """Write documents as line-delimited JSON records."""
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            record = {
                "id": doc.id,
                "text": doc.text,
                "tokens": [t.to_dict() for t in doc.tokens],
                "gold": [g.to_dict() for g in doc.gold],
            }
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def read_corpus(
    path: str | Path,
    function_words: frozenset[str] = DEFAULT_FUNCTION_WORDS,
) -> list[AnnotatedDocument]:
    """Read a line-delimited corpus file.

    Punctuation and function-word flags are not serialized; they are
    recomputed here from the token surfaces and the active stop list.
    """
    docs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                doc = _document_from_record(record, function_words)
            except ParseError:
                raise
            except (KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"bad corpus record: {exc}", line=lineno) from None
            docs.append(doc)
    return docs


def _document_from_record(record: dict, function_words: frozenset[str]) -> AnnotatedDocument:
    text = record["text"]
    tokens: list[SubwordToken] = []
    word_surfaces: dict[int, list[str]] = {}
    for t in record.get("tokens", []):
        word_surfaces.setdefault(int(t["word_index"]), []).append(t["surface"])
    function_word_indices = {
        wi for wi, parts in word_surfaces.items() if "".join(parts).lower() in function_words
    }
    for t in record.get("tokens", []):
        surface = t["surface"]
        tokens.append(
            SubwordToken(
                surface=surface,
                start=int(t["start"]),
                end=int(t["end"]),
                word_index=int(t["word_index"]),
                is_punctuation=len(surface) == 1 and is_punctuation_char(surface),
                is_function_word=int(t["word_index"]) in function_word_indices,
            )
        )
    gold = [SpanAnnotation.from_dict(g) for g in record.get("gold", [])]
    doc = AnnotatedDocument(id=str(record["id"]), text=text, tokens=tokens, gold=gold)
    doc.validate()
    return doc
