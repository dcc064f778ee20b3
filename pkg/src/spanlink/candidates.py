"""Mention-specific candidate stores and redirect normalization.

Two store kinds: context-agnostic (surface form -> entity list) and
context-aware (a specific mention occurrence -> entity list, with a
surface-level fallback aggregated at load time). File formats are
tab-separated; see load_store.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

from .core import EntityVocabulary, SpanAnnotation
from .errors import InputError, ParseError

CONTEXT_AGNOSTIC = "context_agnostic"
CONTEXT_AWARE = "context_aware"

ContextKey = tuple[str, int, int]


@dataclass
class CandidateStore:
    """Immutable-after-load candidate lists keyed by mention.

    Agnostic entries are keyed by surface form; aware entries by
    (document id, span start, span end) with ``surface_fallback`` holding the
    per-surface union of all occurrence lists in first-seen order.
    """

    kind: str
    entries: dict = field(default_factory=dict)
    surface_fallback: dict[str, list[str]] = field(default_factory=dict)
    occurrence_surfaces: dict[ContextKey, str] = field(default_factory=dict)
    case_insensitive: bool = False

    def __post_init__(self):
        if self.kind not in (CONTEXT_AGNOSTIC, CONTEXT_AWARE):
            raise InputError(f"unknown store kind {self.kind!r}")

    def _norm(self, surface: str) -> str:
        return surface.lower() if self.case_insensitive else surface

    def lookup(self, surface: str, context_key: ContextKey | None = None) -> list[str] | None:
        """Candidate list for a mention, or None when the store has no key.

        Context-aware stores consult the occurrence key first and fall back
        to the surface aggregation; agnostic stores use the surface only.
        """
        if self.kind == CONTEXT_AWARE:
            if context_key is not None and context_key in self.entries:
                return list(self.entries[context_key])
            hit = self.surface_fallback.get(self._norm(surface))
            return list(hit) if hit is not None else None
        hit = self.entries.get(self._norm(surface))
        return list(hit) if hit is not None else None

    @property
    def mention_count(self) -> int:
        return len(self.entries)

    @property
    def mean_list_length(self) -> float:
        if not self.entries:
            return 0.0
        return sum(len(v) for v in self.entries.values()) / len(self.entries)


def _parse_entities(raw: str, lineno: int) -> list[str]:
    entities = [e.strip() for e in raw.split(",")]
    if not all(entities) or not entities:
        raise ParseError("empty entity in candidate list", line=lineno)
    return entities


def load_store(path: str | Path, kind: str, case_insensitive: bool = False) -> CandidateStore:
    """Load a tab-separated candidate store.

    Agnostic lines: ``surface<TAB>entity1,entity2,...``
    Aware lines:    ``doc_id<TAB>start<TAB>end<TAB>surface<TAB>entity1,...``
    Duplicate keys and empty lists are rejected with the offending line number.
    """
    store = CandidateStore(kind=kind, case_insensitive=case_insensitive)
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if kind == CONTEXT_AGNOSTIC:
                if len(fields) != 2:
                    raise ParseError(f"expected 2 tab-separated fields, got {len(fields)}", lineno)
                surface, raw = fields
                key = surface.lower() if case_insensitive else surface
                if key in store.entries:
                    raise ParseError(f"duplicate mention key {surface!r}", lineno)
                store.entries[key] = _parse_entities(raw, lineno)
            else:
                if len(fields) != 5:
                    raise ParseError(f"expected 5 tab-separated fields, got {len(fields)}", lineno)
                doc_id, start, end, surface, raw = fields
                try:
                    key = (doc_id, int(start), int(end))
                except ValueError:
                    raise ParseError(f"non-integer span offsets {start!r}/{end!r}", lineno) from None
                if key in store.entries:
                    raise ParseError(f"duplicate occurrence key {key!r}", lineno)
                entities = _parse_entities(raw, lineno)
                store.entries[key] = entities
                store.occurrence_surfaces[key] = surface
                fallback = store.surface_fallback.setdefault(
                    surface.lower() if case_insensitive else surface, []
                )
                for e in entities:
                    if e not in fallback:
                        fallback.append(e)
    return store


def save_store(store: CandidateStore, path: str | Path) -> None:
    lines = []
    if store.kind == CONTEXT_AGNOSTIC:
        for surface, entities in store.entries.items():
            lines.append(f"{surface}\t{','.join(entities)}")
    else:
        for key, entities in store.entries.items():
            doc_id, start, end = key
            surface = store.occurrence_surfaces.get(key, "")
            lines.append(f"{doc_id}\t{start}\t{end}\t{surface}\t{','.join(entities)}")
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def project_context_agnostic(store: CandidateStore) -> CandidateStore:
    """Collapse an aware store to surface keys, preserving first-seen order."""
    if store.kind != CONTEXT_AWARE:
        raise InputError("projection requires a context-aware store")
    return CandidateStore(
        kind=CONTEXT_AGNOSTIC,
        entries={s: list(ents) for s, ents in store.surface_fallback.items()},
        case_insensitive=store.case_insensitive,
    )


RedirectTable = dict[str, str]


def load_redirects(path: str | Path) -> RedirectTable:
    """Load ``u<TAB>v`` redirect pairs; duplicate sources are rejected."""
    table: RedirectTable = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 2 or not fields[0] or not fields[1]:
                raise ParseError("expected `source<TAB>target`", lineno)
            u, v = fields
            if u in table:
                raise ParseError(f"duplicate redirect source {u!r}", lineno)
            table[u] = v
    return table


def validate_redirects(table: RedirectTable, vocab: EntityVocabulary) -> None:
    """Enforce the single-hop invariant: u outside the vocabulary, v inside."""
    for u, v in table.items():
        if u in vocab:
            raise InputError(f"redirect source {u!r} is already in the vocabulary")
        if v not in vocab:
            raise InputError(f"redirect target {v!r} is not in the vocabulary")


def normalize_redirects(
    annotations: Iterable[SpanAnnotation], table: RedirectTable
) -> list[SpanAnnotation]:
    """Replace redirected entity identifiers; spans and scores untouched.

    Idempotent as long as the table's targets never appear as sources.
    """
    return [replace(a, entity=table.get(a.entity, a.entity)) for a in annotations]
