"""Pipeline configuration and the end-to-end linker.

A Linker owns the immutable pieces (vocabulary, provider, candidate store,
redirect table, aggregation settings) and runs the full decode for one
document: tokenize, chunk, score, merge, aggregate, normalize redirects.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from .aggregation import AggregationConfig, aggregate
from .candidates import (
    CONTEXT_AGNOSTIC,
    CONTEXT_AWARE,
    CandidateStore,
    load_redirects,
    load_store,
    normalize_redirects,
)
from .core import (
    DEFAULT_FUNCTION_WORDS,
    AnnotatedDocument,
    EntityVocabulary,
    SpanAnnotation,
    load_function_words,
)
from .errors import ConfigError
from .matrixio import load_matrix
from .nif import DEFAULT_KB_PREFIX
from .providers import (
    FileFeatureProvider,
    FileScoreProvider,
    HeadScoreProvider,
    MockScoreProvider,
)
from .tokenization import (
    DEFAULT_OVERLAP,
    DEFAULT_WINDOW,
    MENTION_AGNOSTIC,
    MENTION_AWARE,
    chunk,
    merge_chunk_scores,
    tokenize,
)


@dataclass
class ProviderConfig:
    kind: str = "mock"  # mock | file | head
    q: float = 0.9
    noise: float = 0.0
    gazetteer: dict[str, str] = field(default_factory=dict)
    logits_dir: str | None = None
    features_dir: str | None = None
    weights: str | None = None


@dataclass
class PipelineConfig:
    """Everything the linker needs, loadable from one YAML file."""

    vocabulary: str = ""
    provider: ProviderConfig = field(default_factory=ProviderConfig)
    tokenizer_mode: str = MENTION_AGNOSTIC
    window: int = DEFAULT_WINDOW
    overlap: int = DEFAULT_OVERLAP
    k: int = 10
    prob_mode: str = "sigmoid"
    candidate_policy: str = "none"
    candidate_store: str | None = None
    candidate_store_kind: str = CONTEXT_AGNOSTIC
    case_insensitive_candidates: bool = False
    redirects: str | None = None
    function_words: str | None = None
    kb_prefix: str = DEFAULT_KB_PREFIX
    seed: int = 0


def load_config(path: str | Path) -> PipelineConfig:
    raw = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a mapping")
    known = {f.name for f in fields(PipelineConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"{path}: unknown config keys: {', '.join(sorted(unknown))}")
    provider_raw = raw.pop("provider", {}) or {}
    provider_known = {f.name for f in fields(ProviderConfig)}
    provider_unknown = set(provider_raw) - provider_known
    if provider_unknown:
        raise ConfigError(f"{path}: unknown provider keys: {', '.join(sorted(provider_unknown))}")
    return PipelineConfig(provider=ProviderConfig(**provider_raw), **raw)


def _require_file(path: str | None, what: str) -> str:
    if not path:
        raise ConfigError(f"missing {what} path in config")
    if not Path(path).exists():
        raise ConfigError(f"{what} not found: {path}")
    return path


class Linker:
    """Immutable pipeline ready to annotate documents concurrently."""

    def __init__(
        self,
        vocab: EntityVocabulary,
        provider,
        aggregation: AggregationConfig = AggregationConfig(),
        store: CandidateStore | None = None,
        redirects: dict[str, str] | None = None,
        tokenizer_mode: str = MENTION_AGNOSTIC,
        window: int = DEFAULT_WINDOW,
        overlap: int = DEFAULT_OVERLAP,
        function_words: frozenset[str] = DEFAULT_FUNCTION_WORDS,
    ):
        if window <= overlap:
            raise ConfigError(f"window {window} must exceed overlap {overlap}")
        self.vocab = vocab
        self.provider = provider
        self.aggregation = aggregation
        self.store = store
        self.redirects = redirects or {}
        self.tokenizer_mode = tokenizer_mode
        self.window = window
        self.overlap = overlap
        self.function_words = function_words

    @classmethod
    def from_config(cls, config: PipelineConfig) -> "Linker":
        vocab = EntityVocabulary.load(_require_file(config.vocabulary, "vocabulary file"))
        provider = _build_provider(config, vocab)
        store = None
        if config.candidate_store:
            store = load_store(
                _require_file(config.candidate_store, "candidate store"),
                config.candidate_store_kind,
                config.case_insensitive_candidates,
            )
        elif config.candidate_policy != "none":
            raise ConfigError("candidate_policy set but no candidate_store given")
        redirects = {}
        if config.redirects:
            redirects = load_redirects(_require_file(config.redirects, "redirect table"))
        function_words = DEFAULT_FUNCTION_WORDS
        if config.function_words:
            function_words = load_function_words(
                _require_file(config.function_words, "function-word list")
            )
        return cls(
            vocab=vocab,
            provider=provider,
            aggregation=AggregationConfig(
                k=config.k,
                prob_mode=config.prob_mode,
                candidate_policy=config.candidate_policy,
            ),
            store=store,
            redirects=redirects,
            tokenizer_mode=config.tokenizer_mode,
            window=config.window,
            overlap=config.overlap,
            function_words=function_words,
        )

    def annotate_document(self, doc: AnnotatedDocument) -> list[SpanAnnotation]:
        """Full decode for one document; tokenizes when tokens are absent."""
        if not doc.tokens:
            mentions = doc.gold if self.tokenizer_mode == MENTION_AWARE and doc.gold else None
            mode = MENTION_AWARE if mentions else MENTION_AGNOSTIC
            doc = AnnotatedDocument(
                id=doc.id,
                text=doc.text,
                tokens=tokenize(doc.text, mode, mentions, function_words=self.function_words),
                gold=doc.gold,
            )
        if not doc.tokens:
            return []
        chunks = chunk(doc.tokens, self.window, self.overlap)
        per_chunk = [self.provider.score_chunk(doc, ch) for ch in chunks]
        merged = merge_chunk_scores(chunks, per_chunk)
        spans = aggregate(
            doc.text,
            doc.tokens,
            merged,
            self.vocab,
            self.aggregation,
            store=self.store,
            doc_id=doc.id,
        )
        if self.redirects:
            spans = normalize_redirects(spans, self.redirects)
        return spans

    def annotate_text(self, text: str, doc_id: str = "request") -> list[SpanAnnotation]:
        return self.annotate_document(AnnotatedDocument(id=doc_id, text=text))

    def link_corpus(
        self, docs: list[AnnotatedDocument], workers: int = 1
    ) -> list[list[SpanAnnotation]]:
        """Annotate documents, preserving input order; bounded worker pool."""
        if workers <= 1 or len(docs) <= 1:
            return [self.annotate_document(doc) for doc in docs]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(self.annotate_document, docs))


def _build_provider(config: PipelineConfig, vocab: EntityVocabulary):
    p = config.provider
    if p.kind == "mock":
        return MockScoreProvider(
            vocab, q=p.q, noise=p.noise, seed=config.seed, gazetteer=p.gazetteer
        )
    if p.kind == "file":
        return FileScoreProvider(_require_file(p.logits_dir, "logits directory"))
    if p.kind == "head":
        weights = load_matrix(_require_file(p.weights, "head weights"))
        features = FileFeatureProvider(_require_file(p.features_dir, "features directory"))
        return HeadScoreProvider(features, weights)
    raise ConfigError(f"unknown provider kind {p.kind!r}")
