"""Pluggable score and feature providers.

A score provider maps a document chunk to an unnormalized score matrix with
one row per chunk token and one column per vocabulary entity. All providers
are deterministic and safe for concurrent read-only use.
"""

from __future__ import annotations

import threading
import zlib
from pathlib import Path

import numpy as np

from .core import AnnotatedDocument, EntityVocabulary, SpanAnnotation, gold_token_labels
from .errors import InputError, ShapeError
from .head import logit, project
from .matrixio import load_matrix
from .tokenization import Chunk


def _stable_rng(seed: int, doc_id: str, token_start: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence([seed, zlib.crc32(doc_id.encode("utf-8")), token_start])
    )


class MockScoreProvider:
    """Synthesizes scores from gold annotations.

    The gold entity of each token receives the logit of probability ``q``;
    every other column shares the remaining mass uniformly. Optional seeded
    Gaussian noise perturbs the scores reproducibly per (document, chunk).
    For documents without gold spans, mentions are synthesized by matching a
    surface gazetteer against whole-word sequences.
    """

    def __init__(
        self,
        vocab: EntityVocabulary,
        q: float = 0.9,
        noise: float = 0.0,
        seed: int = 0,
        gazetteer: dict[str, str] | None = None,
    ):
        if len(vocab) < 2:
            raise InputError("mock provider needs a vocabulary of at least 2 entries")
        self.vocab = vocab
        self.q = q
        self.noise = noise
        self.seed = seed
        self.gazetteer = dict(gazetteer) if gazetteer else {}
        self._hit = logit(q)
        self._miss = logit((1.0 - q) / (len(vocab) - 1))

    def synthesize_gold(self, doc: AnnotatedDocument) -> list[SpanAnnotation]:
        """Greedy longest-match of gazetteer surfaces over whole words."""
        if not self.gazetteer:
            return []
        words = []
        for tok in doc.tokens:
            if not words or tok.word_index != words[-1][2]:
                words.append([tok.start, tok.end, tok.word_index])
            else:
                words[-1][1] = tok.end
        spans = []
        i = 0
        while i < len(words):
            match = None
            for j in range(len(words) - 1, i - 1, -1):
                surface = doc.text[words[i][0] : words[j][1]]
                entity = self.gazetteer.get(surface)
                if entity is not None:
                    match = SpanAnnotation(words[i][0], words[j][1], entity)
                    i = j
                    break
            if match is not None:
                spans.append(match)
            i += 1
        return spans

    def score_chunk(self, doc: AnnotatedDocument, chunk: Chunk) -> np.ndarray:
        gold = doc.gold
        if not gold and self.gazetteer:
            doc = AnnotatedDocument(
                id=doc.id, text=doc.text, tokens=doc.tokens, gold=self.synthesize_gold(doc)
            )
        labels = gold_token_labels(doc)[chunk.token_start : chunk.token_end]
        scores = np.full((len(chunk), len(self.vocab)), self._miss)
        for row, label in enumerate(labels):
            if label in self.vocab:
                col = self.vocab.index_of(label)
            elif self.vocab.o_index is not None:
                col = self.vocab.o_index
            else:
                raise InputError(f"label {label!r} not in vocabulary and no O index")
            scores[row, col] = self._hit
        if self.noise > 0:
            rng = _stable_rng(self.seed, doc.id, chunk.token_start)
            scores += rng.normal(0.0, self.noise, size=scores.shape)
        return scores


class _FileMatrixCache:
    """Per-document matrices stored as SPLM files named ``<doc_id>.mat``."""

    def __init__(self, directory: str | Path, cache_size: int = 8):
        self.directory = Path(directory)
        if not self.directory.is_dir():
            raise InputError(f"matrix directory not found: {self.directory}")
        self._cache: dict[str, np.ndarray] = {}
        self._cache_size = cache_size
        self._lock = threading.Lock()

    def matrix_for(self, doc_id: str) -> np.ndarray:
        with self._lock:
            if doc_id in self._cache:
                return self._cache[doc_id]
        path = self.directory / f"{doc_id}.mat"
        if not path.is_file():
            raise InputError(f"no matrix file for document {doc_id!r} at {path}")
        values = load_matrix(path)
        with self._lock:
            if len(self._cache) >= self._cache_size:
                self._cache.pop(next(iter(self._cache)))
            self._cache[doc_id] = values
        return values

    def _slice(self, doc: AnnotatedDocument, chunk: Chunk) -> np.ndarray:
        values = self.matrix_for(doc.id)
        if values.shape[0] != len(doc.tokens):
            raise ShapeError(
                f"{doc.id}: matrix has {values.shape[0]} rows for {len(doc.tokens)} tokens"
            )
        return values[chunk.token_start : chunk.token_end]


class FileScoreProvider(_FileMatrixCache):
    """Precomputed document-level score matrices sliced per chunk."""

    def score_chunk(self, doc: AnnotatedDocument, chunk: Chunk) -> np.ndarray:
        return self._slice(doc, chunk)


class FileFeatureProvider(_FileMatrixCache):
    """Precomputed document-level feature matrices sliced per chunk."""

    def features(self, doc: AnnotatedDocument, chunk: Chunk) -> np.ndarray:
        return self._slice(doc, chunk)


class InMemoryFeatureProvider:
    """Features held in a dict keyed by document id; handy for toy training."""

    def __init__(self, matrices: dict[str, np.ndarray]):
        self.matrices = {k: np.asarray(v) for k, v in matrices.items()}

    def features(self, doc: AnnotatedDocument, chunk: Chunk) -> np.ndarray:
        try:
            values = self.matrices[doc.id]
        except KeyError:
            raise InputError(f"no features for document {doc.id!r}") from None
        return values[chunk.token_start : chunk.token_end]


class HeadScoreProvider:
    """Feature provider composed with trained head weights."""

    def __init__(self, feature_provider, weights: np.ndarray):
        self.feature_provider = feature_provider
        self.weights = np.asarray(weights)

    def score_chunk(self, doc: AnnotatedDocument, chunk: Chunk) -> np.ndarray:
        return project(self.feature_provider.features(doc, chunk), self.weights)
