"""Simplex-safe numeric primitives and the domain types shared by all modules.

All entropies and divergences are in nats. Probabilities are always derived
from stored logits (or parameters), never stored independently, so the
softmax invariant is structural. All functions are pure and operate on
float64 arrays; they are safe for concurrent use.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import InvalidInput, ShapeError

# Probabilities are clamped to [EPS, 1] and renormalized before any logarithm.
EPS = 1e-12


def softmax(logits: np.ndarray) -> np.ndarray:
    """Numerically stable softmax (max-subtraction) along the last axis."""
    logits = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise InvalidInput("softmax requires finite logits")
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


def clamp_probs(p: np.ndarray, eps: float = EPS) -> np.ndarray:
    """Clamp probabilities to [eps, 1] and renormalize along the last axis."""
    p = np.clip(np.asarray(p, dtype=np.float64), eps, 1.0)
    return p / np.sum(p, axis=-1, keepdims=True)


def entropy(p: np.ndarray) -> float | np.ndarray:
    """Shannon entropy in nats along the last axis, with 0*ln(0) := 0."""
    p = np.asarray(p, dtype=np.float64)
    terms = np.where(p > 0.0, p * np.log(np.where(p > 0.0, p, 1.0)), 0.0)
    h = -np.sum(terms, axis=-1)
    return float(h) if h.ndim == 0 else h


def kl_divergence(p: np.ndarray, q: np.ndarray, eps: float = EPS) -> float:
    """KL(p || q) in nats; q is clamped and renormalized, p zeros contribute 0."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ShapeError(f"KL divergence shape mismatch: {p.shape} vs {q.shape}")
    q = clamp_probs(q, eps)
    terms = np.where(p > 0.0, p * (np.log(np.where(p > 0.0, p, 1.0)) - np.log(q)), 0.0)
    return float(np.sum(terms, axis=-1))


def _check_prob_vector(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1 or values.shape[0] < 2:
        raise ShapeError("probability vector needs length >= 2")
    if np.any(values < 0.0) or np.any(values > 1.0):
        raise InvalidInput("probabilities must lie in [0, 1]")
    if abs(float(values.sum()) - 1.0) > 1e-9:
        raise InvalidInput("probabilities must sum to 1 within 1e-9")
    return values


@dataclass(frozen=True)
class PredictionSet:
    """Discrete second-order distribution: M logit vectors for one sample."""

    logits: np.ndarray

    def __post_init__(self):
        logits = np.asarray(self.logits, dtype=np.float64)
        if logits.ndim != 2 or logits.shape[0] < 1 or logits.shape[1] < 2:
            raise ShapeError("PredictionSet needs an M x C logit matrix with M >= 1, C >= 2")
        if not np.all(np.isfinite(logits)):
            raise InvalidInput("PredictionSet logits must be finite")
        object.__setattr__(self, "logits", logits)

    @property
    def n_members(self) -> int:
        return self.logits.shape[0]

    @property
    def n_classes(self) -> int:
        return self.logits.shape[1]

    @property
    def probs(self) -> np.ndarray:
        """Row-stochastic M x C matrix: softmax applied per member."""
        return softmax(self.logits)


@dataclass(frozen=True)
class DirichletPrediction:
    """Dirichlet second-order distribution with parameter vector beta."""

    beta: np.ndarray

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=np.float64)
        if beta.ndim != 1 or beta.shape[0] < 2:
            raise ShapeError("DirichletPrediction needs a beta vector of length >= 2")
        if not np.all(np.isfinite(beta)) or np.any(beta <= 0.0):
            raise InvalidInput("Dirichlet parameters must be finite and positive")
        object.__setattr__(self, "beta", beta)

    @property
    def n_classes(self) -> int:
        return self.beta.shape[0]

    @property
    def strength(self) -> float:
        return float(self.beta.sum())

    @property
    def mean(self) -> np.ndarray:
        return self.beta / self.beta.sum()


@dataclass(frozen=True)
class SoftLabel:
    """Annotator vote counts; normalized votes are the Bayes predictor."""

    votes: np.ndarray

    def __post_init__(self):
        votes = np.asarray(self.votes)
        if votes.ndim != 1 or votes.shape[0] < 2:
            raise ShapeError("SoftLabel needs a vote vector of length >= 2")
        if np.any(votes < 0) or not np.all(votes == np.floor(votes)):
            raise InvalidInput("votes must be non-negative integers")
        if votes.sum() < 1:
            raise InvalidInput("SoftLabel needs at least one vote")
        object.__setattr__(self, "votes", votes.astype(np.int64))

    @property
    def pi_star(self) -> np.ndarray:
        return self.votes / self.votes.sum()


Prediction = Union[PredictionSet, DirichletPrediction]


@dataclass
class SampleRecord:
    """One evaluated sample: prediction, hard label, and optional ground truth."""

    id: str
    prediction: Prediction
    label: int
    soft_label: Optional[SoftLabel] = None
    ood: bool = False
    severity: int = 0

    def __post_init__(self):
        c = self.prediction.n_classes
        if not 0 <= self.label < c:
            raise InvalidInput(f"sample {self.id}: label {self.label} out of range for C={c}")
        if not 0 <= self.severity <= 5:
            raise InvalidInput(f"sample {self.id}: severity must be in [0, 5]")
        if (self.severity == 0) == self.ood:
            raise InvalidInput(f"sample {self.id}: severity 0 must coincide with ood=False")
        if self.soft_label is not None and self.soft_label.votes.shape[0] != c:
            raise ShapeError(f"sample {self.id}: votes length != C")

    @property
    def n_classes(self) -> int:
        return self.prediction.n_classes
