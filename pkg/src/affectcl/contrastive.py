"""Supervised contrastive objective over a labeled batch of representations.

Each sample in the batch acts as an anchor. Positives are the other samples
sharing the anchor's binary category; every non-anchor sample appears in the
denominator. Similarities are dot products of L2-normalized representations
divided by a temperature, and the per-anchor terms are averaged over the
anchor's positives and summed over anchors. Anchors without positives are
skipped. The log-sum-exp in each term is evaluated with max subtraction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DegenerateInputError


@dataclass
class ContrastiveBatch:
    """A batch of representations with binary categories and a temperature."""

    representations: np.ndarray  # (n, dim)
    labels: np.ndarray  # (n,) integer categories
    temperature: float

    def __post_init__(self) -> None:
        self.representations = np.asarray(self.representations, dtype=np.float64)
        self.labels = np.asarray(self.labels)
        if self.representations.ndim != 2:
            raise ConfigurationError(
                f"representations must be (n, dim), got shape {self.representations.shape}"
            )
        n = self.representations.shape[0]
        if self.labels.shape != (n,):
            raise ConfigurationError(
                f"labels shape {self.labels.shape} does not match batch size {n}"
            )
        if n < 2:
            raise ConfigurationError("contrastive batch needs at least 2 samples")
        if not self.temperature > 0:
            raise ConfigurationError("temperature must be > 0")
        if not np.all(np.isfinite(self.representations)):
            raise ConfigurationError("representations must be finite")

    @property
    def size(self) -> int:
        return self.representations.shape[0]


def l2_normalize(r: np.ndarray) -> np.ndarray:
    """Scale a vector to unit Euclidean norm."""
    r = np.asarray(r, dtype=np.float64)
    norm = np.linalg.norm(r)
    if norm == 0.0:
        raise DegenerateInputError("cannot normalize the zero vector")
    return r / norm


def l2_normalize_rows(mat: np.ndarray) -> np.ndarray:
    """Row-wise unit normalization of a (n, dim) matrix."""
    mat = np.asarray(mat, dtype=np.float64)
    norms = np.linalg.norm(mat, axis=1)
    if np.any(norms == 0.0):
        raise DegenerateInputError("cannot normalize a zero row")
    return mat / norms[:, None]


def positive_sets(labels: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Per-anchor index sets (positives, candidates).

    For anchor s, candidates are all indices except s and positives are the
    candidates whose label equals label(s).
    """
    labels = np.asarray(labels)
    n = labels.shape[0]
    if n < 2:
        raise ConfigurationError("need at least 2 labels")
    sets: list[tuple[np.ndarray, np.ndarray]] = []
    idx = np.arange(n)
    for s in range(n):
        others = idx[idx != s]
        positives = others[labels[others] == labels[s]]
        sets.append((positives, others))
    return sets


def contributing_anchors(labels: np.ndarray) -> int:
    """Number of anchors with at least one positive."""
    labels = np.asarray(labels)
    if labels.shape[0] < 2:
        raise ConfigurationError("need at least 2 labels")
    same = labels[:, None] == labels[None, :]
    np.fill_diagonal(same, False)
    return int(np.count_nonzero(same.any(axis=1)))


def _pairwise(batch: ContrastiveBatch):
    """Normalized rows, scaled similarities, positive mask and counts."""
    unit = l2_normalize_rows(batch.representations)
    sims = (unit @ unit.T) / batch.temperature
    pos_mask = (batch.labels[:, None] == batch.labels[None, :]).astype(np.float64)
    np.fill_diagonal(pos_mask, 0.0)
    pos_counts = pos_mask.sum(axis=1)
    return unit, sims, pos_mask, pos_counts


def _stabilized_rows(sims: np.ndarray):
    """Row-wise log-sum-exp and softmax over the self-masked candidates."""
    masked = sims.copy()
    np.fill_diagonal(masked, -np.inf)
    row_max = masked.max(axis=1)
    shifted = np.exp(masked - row_max[:, None])  # zero on the diagonal
    denom = shifted.sum(axis=1)
    lse = row_max + np.log(denom)
    soft = shifted / denom[:, None]
    return lse, soft


def _terms(sims, pos_mask, pos_counts, lse) -> np.ndarray:
    n = sims.shape[0]
    active = pos_counts > 0
    pos_mean_sim = np.divide(
        (pos_mask * sims).sum(axis=1), pos_counts, out=np.zeros(n), where=active
    )
    terms = np.zeros(n)
    terms[active] = lse[active] - pos_mean_sim[active]
    return terms


def _grad(batch, unit, pos_mask, pos_counts, soft) -> np.ndarray:
    active = (pos_counts > 0).astype(np.float64)
    safe_counts = np.maximum(pos_counts, 1.0)
    # dL/d(sims): softmax weight minus the positive indicator share, per anchor row
    coeff = active[:, None] * (soft - pos_mask / safe_counts[:, None])
    grad_unit = (coeff + coeff.T) @ unit / batch.temperature
    norms = np.linalg.norm(batch.representations, axis=1)
    inner = np.sum(grad_unit * unit, axis=1, keepdims=True)
    return (grad_unit - inner * unit) / norms[:, None]


def supcon_loss_terms(batch: ContrastiveBatch) -> np.ndarray:
    """Per-anchor loss terms; anchors without positives contribute 0."""
    _, sims, pos_mask, pos_counts = _pairwise(batch)
    lse, _ = _stabilized_rows(sims)
    return _terms(sims, pos_mask, pos_counts, lse)


def supcon_loss(batch: ContrastiveBatch) -> float:
    """Loss value: sum of per-anchor terms (no division by batch size)."""
    return float(supcon_loss_terms(batch).sum())


def supcon_loss_mean(batch: ContrastiveBatch) -> float:
    """Per-anchor mean of the loss, 0.0 when every anchor is skipped.

    Derived convenience for logging across batch sizes; the headline value
    is the plain sum from supcon_loss().
    """
    terms = supcon_loss_terms(batch)
    n_active = contributing_anchors(batch.labels)
    if n_active == 0:
        return 0.0
    return float(terms.sum() / n_active)


def supcon_grad(batch: ContrastiveBatch) -> np.ndarray:
    """dL/d(representation) for every sample, including the chain through
    the L2 normalization. Shape matches batch.representations."""
    unit, sims, pos_mask, pos_counts = _pairwise(batch)
    _, soft = _stabilized_rows(sims)
    return _grad(batch, unit, pos_mask, pos_counts, soft)


def supcon_loss_grad_stats(batch: ContrastiveBatch) -> tuple[float, float, int, np.ndarray]:
    """One-pass (loss_sum, loss_per_anchor_mean, contributing_anchors, grad).

    The training loop calls this once per minibatch instead of paying for
    the pairwise similarity work three times.
    """
    unit, sims, pos_mask, pos_counts = _pairwise(batch)
    lse, soft = _stabilized_rows(sims)
    terms = _terms(sims, pos_mask, pos_counts, lse)
    grad = _grad(batch, unit, pos_mask, pos_counts, soft)
    n_active = int(np.count_nonzero(pos_counts > 0))
    loss_sum = float(terms.sum())
    loss_mean = loss_sum / n_active if n_active else 0.0
    return loss_sum, loss_mean, n_active, grad
