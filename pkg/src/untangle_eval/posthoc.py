"""Post-hoc scorers on exported embeddings and logits.

Latent Gaussian density with tied covariance plus a logistic OOD head
(Mahalanobis), per-class Gaussian mixture density (DDU), and temperature
scaling by NLL grid search.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from scipy.linalg import cholesky, solve_triangular

from .core import softmax
from .errors import InvalidInput, MissingClass, ShapeError, SingularCovariance

#: NLL grid for temperature scaling: {0.1, 0.2, ..., 10.1}.
TEMPERATURE_GRID = tuple(round(0.1 * i, 1) for i in range(1, 102))

_L2_PENALTY = 1e-4
_IRLS_TOL = 1e-8
_MAX_JITTER_DOUBLINGS = 10


@dataclass
class EmbeddingRecord:
    """Per-layer embeddings for one sample."""

    id: str
    layers: List[np.ndarray]
    label: int = -1
    ood: bool = False


def _jittered_cholesky(cov: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor; adds doubling trace-scaled jitter until SPD."""
    d = cov.shape[0]
    base = 1e-6 * max(float(np.trace(cov)) / d, 1e-12)
    jitter = 0.0
    for attempt in range(_MAX_JITTER_DOUBLINGS + 1):
        try:
            return cholesky(cov + jitter * np.eye(d), lower=True)
        except np.linalg.LinAlgError:
            pass
        jitter = base if jitter == 0.0 else 2.0 * jitter
    raise SingularCovariance("covariance not SPD after maximal jitter")


def _solve_lower(chol_lower: np.ndarray, v: np.ndarray) -> np.ndarray:
    return solve_triangular(chol_lower, v, lower=True)


@dataclass
class _LayerDensity:
    means: np.ndarray  # C x D class means
    chol: np.ndarray  # lower Cholesky factor of the tied covariance

    def max_score(self, x: np.ndarray) -> float:
        """Maximal (negative squared Mahalanobis distance) over classes."""
        if x.shape[0] != self.means.shape[1]:
            raise ShapeError("embedding dimension mismatch")
        best = -np.inf
        for mean in self.means:
            z = _solve_lower(self.chol, x - mean)
            best = max(best, -float(z @ z))
        return best


@dataclass
class MahalanobisModel:
    layers: List[_LayerDensity]
    weights: np.ndarray  # logistic weights, one per layer
    intercept: float


def _fit_logistic(features: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """L2-regularized logistic regression by Newton/IRLS to 1e-8 loss tolerance."""
    n, d = features.shape
    x = np.hstack((features, np.ones((n, 1))))
    y = targets.astype(np.float64)
    w = np.zeros(d + 1)
    reg = np.full(d + 1, _L2_PENALTY)
    reg[-1] = 0.0  # intercept not penalized
    prev_loss = np.inf
    for _ in range(200):
        logits = x @ w
        p = 1.0 / (1.0 + np.exp(-logits))
        loss = float(-np.mean(y * np.log(np.clip(p, 1e-300, 1)) + (1 - y) * np.log(np.clip(1 - p, 1e-300, 1))))
        loss += 0.5 * float(reg @ (w * w)) / n
        if abs(prev_loss - loss) < _IRLS_TOL:
            break
        prev_loss = loss
        grad = x.T @ (p - y) / n + reg * w / n
        s = np.clip(p * (1 - p), 1e-10, None)
        hess = (x.T * s) @ x / n + np.diag(reg / n)
        w = w - np.linalg.solve(hess, grad)
    return w


def _check_layers(records: Sequence[EmbeddingRecord]) -> int:
    if not records:
        raise InvalidInput("need at least one embedding record")
    n_layers = len(records[0].layers)
    dims = [layer.shape[0] for layer in records[0].layers]
    for r in records:
        if len(r.layers) != n_layers or [l.shape[0] for l in r.layers] != dims:
            raise ShapeError(f"record {r.id}: inconsistent layer dimensions")
    return n_layers


def _class_means_tied_cov(vectors: np.ndarray, labels: np.ndarray, n_classes: int):
    d = vectors.shape[1]
    means = np.empty((n_classes, d))
    scatter = np.zeros((d, d))
    for c in range(n_classes):
        mask = labels == c
        if not np.any(mask):
            raise MissingClass(f"class {c} absent from training embeddings")
        means[c] = vectors[mask].mean(axis=0)
        centered = vectors[mask] - means[c]
        scatter += centered.T @ centered
    return means, scatter / vectors.shape[0]


def fit_mahalanobis(
    train: Sequence[EmbeddingRecord],
    val_mix: Sequence[EmbeddingRecord],
    n_classes: Optional[int] = None,
) -> MahalanobisModel:
    """Per-layer class means + tied covariance, then a logistic OOD head.

    The logistic regression consumes the per-layer maximal scores on the
    mixed validation set (ood flags as targets).
    """
    n_layers = _check_layers(train)
    _check_layers(val_mix)
    labels = np.asarray([r.label for r in train], dtype=np.int64)
    if n_classes is None:
        n_classes = int(labels.max()) + 1
    layers: List[_LayerDensity] = []
    for ell in range(n_layers):
        vectors = np.asarray([r.layers[ell] for r in train], dtype=np.float64)
        means, cov = _class_means_tied_cov(vectors, labels, n_classes)
        layers.append(_LayerDensity(means=means, chol=_jittered_cholesky(cov)))

    flags = np.asarray([r.ood for r in val_mix], dtype=bool)
    if not (flags.any() and (~flags).any()):
        raise InvalidInput("validation mix needs both ID and OOD records")
    features = np.asarray(
        [[layers[ell].max_score(r.layers[ell]) for ell in range(n_layers)] for r in val_mix],
        dtype=np.float64,
    )
    w = _fit_logistic(features, flags)
    return MahalanobisModel(layers=layers, weights=w[:-1], intercept=float(w[-1]))


def score_mahalanobis(model: MahalanobisModel, record: EmbeddingRecord) -> float:
    """Logistic-combined layer scores; higher means more out-of-distribution."""
    if len(record.layers) != len(model.layers):
        raise ShapeError(f"record {record.id}: expected {len(model.layers)} layers")
    scores = np.array([layer.max_score(x) for layer, x in zip(model.layers, record.layers)])
    return float(model.weights @ scores + model.intercept)


@dataclass
class DduModel:
    weights: np.ndarray  # C mixture weights n_c / n
    means: np.ndarray  # C x D
    chols: List[np.ndarray]  # per-class lower Cholesky factors
    temperature: float


def fit_ddu(
    train: Sequence[EmbeddingRecord],
    val_logits: Optional[np.ndarray] = None,
    val_labels: Optional[np.ndarray] = None,
    n_classes: Optional[int] = None,
) -> DduModel:
    """Per-class Gaussian mixture on the last layer, unbiased covariances.

    Temperature is fitted on held-out ID logits when provided, else 1.0.
    """
    _check_layers(train)
    vectors = np.asarray([r.layers[-1] for r in train], dtype=np.float64)
    labels = np.asarray([r.label for r in train], dtype=np.int64)
    if n_classes is None:
        n_classes = int(labels.max()) + 1
    n, d = vectors.shape
    weights = np.empty(n_classes)
    means = np.empty((n_classes, d))
    chols: List[np.ndarray] = []
    for c in range(n_classes):
        mask = labels == c
        n_c = int(mask.sum())
        if n_c == 0:
            raise MissingClass(f"class {c} absent from training embeddings")
        weights[c] = n_c / n
        means[c] = vectors[mask].mean(axis=0)
        centered = vectors[mask] - means[c]
        cov = centered.T @ centered / (n_c - 1) if n_c >= 2 else np.zeros((d, d))
        chols.append(_jittered_cholesky(cov))
    tau = 1.0
    if val_logits is not None and val_labels is not None:
        tau = temperature_scale(val_logits, val_labels)
    return DduModel(weights=weights, means=means, chols=chols, temperature=tau)


def _gaussian_log_density(x: np.ndarray, mean: np.ndarray, chol_lower: np.ndarray) -> float:
    d = mean.shape[0]
    z = _solve_lower(chol_lower, x - mean)
    log_det = 2.0 * float(np.sum(np.log(np.diag(chol_lower))))
    return -0.5 * (d * np.log(2.0 * np.pi) + log_det + float(z @ z))


def score_ddu(model: DduModel, embedding: np.ndarray) -> float:
    """Negative log mixture density via log-sum-exp; higher = more OOD."""
    embedding = np.asarray(embedding, dtype=np.float64)
    if embedding.shape[0] != model.means.shape[1]:
        raise ShapeError("embedding dimension mismatch")
    log_terms = np.array(
        [
            np.log(model.weights[c]) + _gaussian_log_density(embedding, model.means[c], model.chols[c])
            for c in range(model.means.shape[0])
        ]
    )
    peak = np.max(log_terms)
    return float(-(peak + np.log(np.sum(np.exp(log_terms - peak)))))


def temperature_scale(val_logits: np.ndarray, val_labels: np.ndarray) -> float:
    """Grid-search temperature with the lowest validation NLL.

    Ties prefer the temperature nearest 1.0, then the smaller value.
    """
    val_logits = np.asarray(val_logits, dtype=np.float64)
    val_labels = np.asarray(val_labels, dtype=np.int64)
    if val_logits.ndim != 2 or val_logits.shape[0] == 0:
        raise InvalidInput("temperature scaling needs a nonempty n x C logit matrix")
    if val_labels.shape[0] != val_logits.shape[0]:
        raise ShapeError("labels must align with logits")
    best = None
    rows = np.arange(val_logits.shape[0])
    for tau in TEMPERATURE_GRID:
        probs = softmax(val_logits / tau)
        nll = float(-np.mean(np.log(np.clip(probs[rows, val_labels], 1e-300, 1.0))))
        key = (nll, abs(tau - 1.0), tau)
        if best is None or key < best:
            best = key
    return best[2]
