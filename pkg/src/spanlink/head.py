"""Classification head: projection, hard-negative loss, training, shrinking.

Per-subword scores are the plain matrix product of encoder features with the
head weights; they are deliberately left unnormalized. The loss is binary
cross-entropy with logits computed over a selected example set that pools the
batch's gold entities with mined negative entities.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import EntityVocabulary, O_LABEL, gold_token_labels
from .errors import (
    DegenerateBatchError,
    DivergenceError,
    QuotaError,
    ShapeError,
)
from .evaluation import subword_f1
from .tokenization import DEFAULT_OVERLAP, DEFAULT_WINDOW, chunk, merge_chunk_scores

# Negative-example quotas per batch: in-domain fine-tuning vs. the larger
# general fine-tuning runs.
AIDA_NEGATIVE_QUOTA = 5000
GENERAL_NEGATIVE_QUOTA = 10000

DEFAULT_HEAD_LR = 0.01


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically stable elementwise logistic map."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def log_sigmoid(x: np.ndarray) -> np.ndarray:
    """log(sigmoid(x)) computed as -softplus(-x)."""
    return -np.logaddexp(0.0, -np.asarray(x, dtype=np.float64))


def logit(p: float) -> float:
    """Inverse of the logistic map."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability {p} outside (0, 1)")
    return float(np.log(p / (1.0 - p)))


def project(features: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Score matrix = features @ weights, row-major, no normalization."""
    features = np.asarray(features)
    weights = np.asarray(weights)
    if features.ndim != 2 or weights.ndim != 2:
        raise ShapeError("project expects 2-D features and weights")
    if features.shape[1] != weights.shape[0]:
        raise ShapeError(
            f"feature dim {features.shape[1]} does not match weight dim {weights.shape[0]}"
        )
    return features @ weights


def mine_hard_negatives(
    batch_scores: np.ndarray,
    gold_indices: np.ndarray | list[int],
    quota: int,
    rng: np.random.Generator | int | None = None,
) -> np.ndarray:
    """Select the example set: batch gold indices plus exactly ``quota`` negatives.

    Negatives are the incorrect head columns ranked by their best score
    anywhere in the batch (shared pool), ties broken by lower column index.
    Columns without a finite score are only eligible for the uniform-random
    fill that tops the set up to the quota. Deterministic given ``rng``.

    Returns the sorted array of selected column indices.
    """
    scores = np.asarray(batch_scores)
    if scores.ndim != 2 or scores.shape[0] == 0:
        raise ShapeError(f"batch scores must be a non-empty 2-D matrix, got {scores.shape}")
    kb = scores.shape[1]
    gold = np.unique(np.asarray(gold_indices, dtype=np.int64))
    if gold.size == 0:
        raise ShapeError("batch has no gold indices")
    if gold.min() < 0 or gold.max() >= kb:
        raise ShapeError("gold index out of vocabulary range")
    available = kb - gold.size
    if quota < 0 or quota > available:
        raise QuotaError(f"quota {quota} infeasible with {available} non-gold columns")

    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)

    gold_mask = np.zeros(kb, dtype=bool)
    gold_mask[gold] = True
    column_best = scores.max(axis=0)
    candidates = np.flatnonzero(~gold_mask & np.isfinite(column_best))
    # Stable sort on descending score keeps the lower column index on ties.
    order = candidates[np.argsort(-column_best[candidates], kind="stable")]
    negatives = list(order[:quota])
    if len(negatives) < quota:
        pool = np.flatnonzero(~gold_mask & ~np.isfinite(column_best))
        fill = rng.choice(pool, size=quota - len(negatives), replace=False)
        negatives.extend(int(i) for i in fill)
    return np.sort(np.concatenate([gold, np.asarray(negatives, dtype=np.int64)]))


@dataclass
class TrainingBatch:
    """One loss evaluation: fixed features, per-row gold columns, selected set."""

    gold_indices: np.ndarray
    psi: np.ndarray
    features: np.ndarray | None = None

    @property
    def n_selected(self) -> int:
        return len(self.psi)


@dataclass
class LossReport:
    value: float
    per_row: np.ndarray
    gradient: np.ndarray | None = None


def eq1_loss(batch: TrainingBatch, scores: np.ndarray, vocab_size: int | None = None) -> LossReport:
    """Binary cross-entropy with logits over the selected example set.

    Row i averages, over the selected columns, the positive term for the
    row's gold column and negative terms for everything else. Stabilized via
    log(sigmoid(p)) = -softplus(-p). When features are attached, the closed
    form gradient of the mean loss with respect to the head weights is
    returned (zeros outside the selected columns).
    """
    psi = np.asarray(batch.psi, dtype=np.int64)
    if psi.size == 0:
        raise DegenerateBatchError("selected example set is empty")
    if len(np.unique(psi)) != psi.size:
        raise ValueError("selected example set contains duplicates")
    gold = np.asarray(batch.gold_indices, dtype=np.int64)
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2 or scores.shape[0] != gold.shape[0]:
        raise ShapeError(f"scores shape {scores.shape} does not match {gold.shape[0]} rows")
    if not np.isin(gold, psi).all():
        raise ValueError("every row's gold index must be in the selected set")

    n_rows = scores.shape[0]
    n_sel = psi.size
    selected = scores[:, psi]
    targets = (psi[None, :] == gold[:, None]).astype(np.float64)
    # -[a log sigma(p) + (1 - a) log(1 - sigma(p))] via softplus.
    terms = targets * np.logaddexp(0.0, -selected) + (1.0 - targets) * np.logaddexp(0.0, selected)
    per_row = terms.sum(axis=1) / n_sel
    value = float(per_row.mean())
    if not np.isfinite(value):
        raise DivergenceError("loss is non-finite")

    gradient = None
    if batch.features is not None:
        features = np.asarray(batch.features, dtype=np.float64)
        if features.shape[0] != n_rows:
            raise ShapeError("feature rows do not match score rows")
        d_scores = (sigmoid(selected) - targets) / (n_sel * n_rows)
        kb = vocab_size if vocab_size is not None else scores.shape[1]
        gradient = np.zeros((features.shape[1], kb))
        gradient[:, psi] = features.T @ d_scores
    return LossReport(value=value, per_row=per_row, gradient=gradient)


def shrink_head(
    weights: np.ndarray, vocab: EntityVocabulary, subset: EntityVocabulary
) -> np.ndarray:
    """Keep only the columns of ``subset``'s entities, in subset order."""
    weights = np.asarray(weights)
    if weights.ndim != 2 or weights.shape[1] != len(vocab):
        raise ShapeError(f"weights shape {weights.shape} does not match vocabulary {len(vocab)}")
    columns = [vocab.index_of(e) for e in subset.entries]
    return weights[:, columns]


def mask_scores(
    scores: np.ndarray, vocab: EntityVocabulary, subset: EntityVocabulary
) -> np.ndarray:
    """Alternative to shrinking: -inf out every column not in ``subset``.

    Argmax over the surviving columns matches projecting with a shrunk head.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2 or scores.shape[1] != len(vocab):
        raise ShapeError(f"scores shape {scores.shape} does not match vocabulary {len(vocab)}")
    keep = np.array([vocab.index_of(e) for e in subset.entries])
    masked = np.full_like(scores, -np.inf)
    masked[:, keep] = scores[:, keep]
    return masked


@dataclass
class TrainConfig:
    """Head-only training settings; encoder fine-tuning stays configuration metadata."""

    lr_head: float = DEFAULT_HEAD_LR
    epochs: int = 10
    quota: int = AIDA_NEGATIVE_QUOTA
    seed: int = 0
    patience: int = 2  # early stop after this many non-improving epochs


@dataclass
class EpochStats:
    epoch: int
    mean_loss: float
    val_f1: float


@dataclass
class TrainReport:
    history: list[EpochStats] = field(default_factory=list)
    steps: int = 0
    stopped_early: bool = False


def train_head(
    feature_provider,
    corpus,
    vocab: EntityVocabulary,
    config: TrainConfig,
    val_corpus=None,
    window: int = DEFAULT_WINDOW,
    overlap: int = DEFAULT_OVERLAP,
) -> tuple[np.ndarray, TrainReport]:
    """Gradient descent on the hard-negative loss, head weights only.

    Features are fixed by the provider; every step mines a fresh negative set.
    Stops early once validation subword F1 has not improved for
    ``config.patience`` consecutive epochs. Deterministic for a fixed seed.
    """
    docs = list(corpus)
    if not docs:
        raise ShapeError("training corpus is empty")
    batches = []
    dim = None
    for doc in docs:
        labels = gold_token_labels(doc)
        for ch in chunk(doc.tokens, window, overlap):
            feats = np.asarray(feature_provider.features(doc, ch), dtype=np.float64)
            if feats.shape[0] != len(ch):
                raise ShapeError(f"{doc.id}: feature rows do not match chunk size")
            if dim is None:
                dim = feats.shape[1]
            elif feats.shape[1] != dim:
                raise ShapeError(f"{doc.id}: inconsistent feature dim {feats.shape[1]} != {dim}")
            gold = np.array(
                [vocab.index_of(labels[i]) for i in range(ch.token_start, ch.token_end)],
                dtype=np.int64,
            )
            batches.append((doc.id, feats, gold))

    weights = np.zeros((dim, len(vocab)))
    report = TrainReport()
    rng = np.random.default_rng(config.seed)
    best_f1 = -1.0
    bad_epochs = 0
    for epoch in range(1, config.epochs + 1):
        losses = []
        for doc_id, feats, gold in batches:
            report.steps += 1
            scores = project(feats, weights)
            psi = mine_hard_negatives(scores, gold, config.quota, rng)
            batch = TrainingBatch(gold_indices=gold, psi=psi, features=feats)
            loss = eq1_loss(batch, scores, vocab_size=len(vocab))
            if not np.isfinite(loss.value):
                raise DivergenceError(f"non-finite loss at step {report.steps} ({doc_id})")
            weights -= config.lr_head * loss.gradient
            losses.append(loss.value)
        val_f1 = validation_subword_f1(
            feature_provider, val_corpus or docs, vocab, weights, window, overlap
        )
        report.history.append(EpochStats(epoch, float(np.mean(losses)), val_f1))
        if val_f1 > best_f1:
            best_f1 = val_f1
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= config.patience:
                report.stopped_early = True
                break
    return weights, report


def validation_subword_f1(
    feature_provider,
    corpus,
    vocab: EntityVocabulary,
    weights: np.ndarray,
    window: int = DEFAULT_WINDOW,
    overlap: int = DEFAULT_OVERLAP,
) -> float:
    """Micro subword F1 of per-token argmax predictions against gold labels."""
    gold_all: list[str] = []
    pred_all: list[str] = []
    for doc in corpus:
        if not doc.tokens:
            continue
        chunks = chunk(doc.tokens, window, overlap)
        per_chunk = [
            project(np.asarray(feature_provider.features(doc, ch), dtype=np.float64), weights)
            for ch in chunks
        ]
        merged = merge_chunk_scores(chunks, per_chunk)
        pred_all.extend(vocab.id_of(int(j)) for j in merged.argmax(axis=1))
        gold_all.extend(gold_token_labels(doc))
    if not gold_all:
        return 0.0
    return subword_f1(gold_all, pred_all, o_label=O_LABEL)
