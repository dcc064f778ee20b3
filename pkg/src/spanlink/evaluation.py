"""Strong InKB annotation matching and micro-averaged precision/recall/F1.

A predicted span is a true positive only when its exact (start, end, entity)
triple exists in the gold annotations (entity ignored in mention-detection
mode). Gold spans labeled O or outside the active vocabulary are excluded
from the gold counts; counts are pooled over all documents before computing
micro scores.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .core import AnnotatedDocument, EntityVocabulary, O_LABEL, SpanAnnotation
from .errors import AlignmentError, ShapeError

MODE_EL = "el"
MODE_MD = "md"


@dataclass
class MatchReport:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    per_document: dict[str, tuple[int, int, int]] = field(default_factory=dict)

    @property
    def micro_p(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def micro_r(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def micro_f1(self) -> float:
        p, r = self.micro_p, self.micro_r
        return 2 * p * r / (p + r) if p + r else 0.0

    def to_dict(self) -> dict:
        return {
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "micro_p": self.micro_p,
            "micro_r": self.micro_r,
            "micro_f1": self.micro_f1,
        }


def _as_prediction_map(
    predicted: Mapping[str, Iterable[SpanAnnotation]] | Iterable[AnnotatedDocument],
) -> dict[str, list[SpanAnnotation]]:
    if isinstance(predicted, Mapping):
        return {doc_id: list(spans) for doc_id, spans in predicted.items()}
    return {doc.id: list(doc.predicted) for doc in predicted}


def _gold_keys(spans: Iterable[SpanAnnotation], vocab: EntityVocabulary | None, mode: str):
    keys = set()
    for s in spans:
        if s.entity == O_LABEL:
            continue
        if vocab is not None and s.entity not in vocab:
            continue
        keys.add((s.start, s.end) if mode == MODE_MD else (s.start, s.end, s.entity))
    return keys


def _predicted_keys(spans: Iterable[SpanAnnotation], mode: str):
    # Predicted O spans are explicit non-predictions; duplicates collapse.
    keys = set()
    for s in spans:
        if s.entity == O_LABEL:
            continue
        keys.add((s.start, s.end) if mode == MODE_MD else (s.start, s.end, s.entity))
    return keys


def score_annotations(
    gold_docs: Iterable[AnnotatedDocument],
    predicted: Mapping[str, Iterable[SpanAnnotation]] | Iterable[AnnotatedDocument],
    mode: str = MODE_EL,
    vocab: EntityVocabulary | None = None,
) -> MatchReport:
    """Pool per-document strong-match counts into one micro report."""
    if mode not in (MODE_EL, MODE_MD):
        raise ValueError(f"unknown scoring mode {mode!r}")
    gold_by_id = {doc.id: doc for doc in gold_docs}
    pred_map = _as_prediction_map(predicted)
    unmatched = sorted(set(pred_map) - set(gold_by_id))
    if unmatched:
        raise AlignmentError(f"predicted document ids without gold: {', '.join(unmatched)}")

    report = MatchReport()
    for doc_id, doc in gold_by_id.items():
        gold_keys = _gold_keys(doc.gold, vocab, mode)
        pred_keys = _predicted_keys(pred_map.get(doc_id, []), mode)
        tp = len(gold_keys & pred_keys)
        fp = len(pred_keys - gold_keys)
        fn = len(gold_keys - pred_keys)
        report.tp += tp
        report.fp += fp
        report.fn += fn
        report.per_document[doc_id] = (tp, fp, fn)
    return report


def score_el(gold_docs, predicted, vocab: EntityVocabulary | None = None) -> MatchReport:
    """Entity-linking scores: exact (start, end, entity) matching."""
    return score_annotations(gold_docs, predicted, MODE_EL, vocab)


def score_md(gold_docs, predicted, vocab: EntityVocabulary | None = None) -> MatchReport:
    """Mention-detection scores: exact (start, end) matching, entity ignored."""
    return score_annotations(gold_docs, predicted, MODE_MD, vocab)


def subword_f1(gold_labels: list[str], predicted_labels: list[str], o_label: str = O_LABEL) -> float:
    """Micro F1 over per-token non-O label matches."""
    if len(gold_labels) != len(predicted_labels):
        raise ShapeError(
            f"label sequences differ in length: {len(gold_labels)} != {len(predicted_labels)}"
        )
    tp = fp = fn = 0
    for g, p in zip(gold_labels, predicted_labels):
        if p != o_label and g == p:
            tp += 1
        else:
            if p != o_label:
                fp += 1
            if g != o_label:
                fn += 1
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return 2 * precision * recall / (precision + recall) if precision + recall else 0.0


def format_report(report: MatchReport, mode: str = MODE_EL) -> str:
    """Human-readable summary table."""
    lines = [
        f"mode        {mode}",
        f"tp/fp/fn    {report.tp}/{report.fp}/{report.fn}",
        f"micro P     {report.micro_p:.4f}",
        f"micro R     {report.micro_r:.4f}",
        f"micro F1    {report.micro_f1:.4f}",
        f"documents   {len(report.per_document)}",
    ]
    return "\n".join(lines)
