"""Seeded synthetic corpora for end-to-end tests, demos, and benchmarks.

Documents are filler words interleaved with gazetteer mentions; every
mention's gold span is recorded at generation time, so a mock provider can
reproduce the annotations and the pipeline output can be scored exactly.
"""

from __future__ import annotations

import numpy as np

from .candidates import CONTEXT_AGNOSTIC, CandidateStore
from .core import AnnotatedDocument, EntityVocabulary, SpanAnnotation, build_vocabulary
from .tokenization import tokenize

# Deliberately outside the default function-word stop list.
FILLER_WORDS = [
    "market", "report", "opened", "sharply", "higher", "today", "while",
    "analysts", "watched", "quarterly", "figures", "closely", "despite",
    "renewed", "pressure", "across", "several", "sectors", "trading",
    "volume", "climbed", "again",
]


def synthetic_entities(count: int) -> tuple[EntityVocabulary, dict[str, str]]:
    """Entity identifiers plus a surface gazetteer; every third surface is two words."""
    ids = [f"Concept_{i:04d}" for i in range(count)]
    gazetteer = {}
    for i, entity in enumerate(ids):
        surface = f"Xq{i:04d}" if i % 3 else f"Xq{i:04d} Zt{i:04d}"
        gazetteer[surface] = entity
    vocab = build_vocabulary(ids, include_o=True)
    return vocab, gazetteer


def synthetic_corpus(
    n_docs: int,
    gazetteer: dict[str, str],
    seed: int = 0,
    mentions_per_doc: tuple[int, int] = (2, 4),
    filler_between: tuple[int, int] = (1, 4),
) -> list[AnnotatedDocument]:
    """Generate tokenized documents with gold spans at known offsets."""
    rng = np.random.default_rng(seed)
    surfaces = sorted(gazetteer)
    docs = []
    for d in range(n_docs):
        words: list[str] = []
        gold: list[tuple[int, str]] = []  # (word position, surface)
        n_mentions = int(rng.integers(mentions_per_doc[0], mentions_per_doc[1] + 1))
        for _ in range(n_mentions):
            words.extend(
                rng.choice(FILLER_WORDS)
                for _ in range(int(rng.integers(filler_between[0], filler_between[1] + 1)))
            )
            surface = surfaces[int(rng.integers(len(surfaces)))]
            gold.append((len(words), surface))
            words.extend(surface.split())
        words.append(str(rng.choice(FILLER_WORDS)))

        offsets = []
        pos = 0
        for w in words:
            offsets.append(pos)
            pos += len(w) + 1
        text = " ".join(words)
        spans = []
        for word_pos, surface in gold:
            start = offsets[word_pos]
            spans.append(SpanAnnotation(start, start + len(surface), gazetteer[surface]))
        doc = AnnotatedDocument(
            id=f"doc-{d:04d}", text=text, tokens=tokenize(text), gold=spans
        )
        doc.validate()
        docs.append(doc)
    return docs


def synthetic_candidate_store(
    gazetteer: dict[str, str],
    vocab: EntityVocabulary,
    decoys: int = 2,
    seed: int = 0,
) -> CandidateStore:
    """Agnostic store mapping each surface to its gold entity plus decoys."""
    rng = np.random.default_rng(seed)
    entity_ids = [e for e in vocab.entries if e != "O"]
    entries = {}
    for surface in sorted(gazetteer):
        gold = gazetteer[surface]
        pool = [e for e in entity_ids if e != gold]
        picked = list(rng.choice(pool, size=min(decoys, len(pool)), replace=False))
        entries[surface] = [gold, *picked]
    return CandidateStore(kind=CONTEXT_AGNOSTIC, entries=entries)
