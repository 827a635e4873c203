"""Seeded generators of synthetic second-order predictions and ground truth.

All randomness flows through Philox counter-based bit generators keyed by
(seed, stream ids) through NumPy's SeedSequence, so identical configs yield
byte-identical datasets regardless of generation order or worker count.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .core import DirichletPrediction, PredictionSet, SampleRecord, SoftLabel, clamp_probs, softmax
from .errors import InvalidInput

FAMILIES = ("dirichlet", "gaussian_logits", "dirac_ensemble")


def philox_rng(seed, *stream: int) -> np.random.Generator:
    """Deterministic per-stream generator derived from (seed, stream ids)."""
    mask = (1 << 64) - 1
    if isinstance(seed, (tuple, list)):
        entropy = [int(s) & mask for s in seed]
    else:
        entropy = int(seed) & mask
    ss = np.random.SeedSequence(entropy=entropy, spawn_key=tuple(int(s) & mask for s in stream))
    return np.random.Generator(np.random.Philox(ss))


def dirichlet_sample(beta: np.ndarray, m: int, seed, *stream: int) -> PredictionSet:
    """Draw M probability vectors from Dir(beta) via normalized Gamma draws."""
    beta = np.asarray(beta, dtype=np.float64)
    rng = philox_rng(seed, *stream)
    gammas = rng.standard_gamma(beta, size=(m, beta.shape[0]))
    probs = clamp_probs(gammas / np.sum(gammas, axis=-1, keepdims=True))
    return PredictionSet(np.log(probs))


def gaussian_logit_sample(mean: np.ndarray, stddev, m: int, seed, *stream: int) -> PredictionSet:
    """Draw M logit vectors from N(mean, diag(stddev^2))."""
    mean = np.asarray(mean, dtype=np.float64)
    rng = philox_rng(seed, *stream)
    noise = rng.standard_normal(size=(m, mean.shape[0]))
    return PredictionSet(mean + np.asarray(stddev, dtype=np.float64) * noise)


@dataclass
class SimConfig:
    n: int
    n_classes: int
    n_members: int
    family: str = "gaussian_logits"
    aleatoric_scale: float = 0.5
    epistemic_scale: float = 0.5
    severity_levels: Sequence[int] = (0,)
    seed: int = 0
    votes_per_sample: int = 10

    def __post_init__(self):
        if self.n < 1 or self.n_classes < 2 or self.n_members < 1:
            raise InvalidInput("SimConfig needs n >= 1, C >= 2, M >= 1")
        if self.family not in FAMILIES:
            raise InvalidInput(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if not (np.isfinite(self.aleatoric_scale) and self.aleatoric_scale >= 0):
            raise InvalidInput("aleatoric_scale must be finite and >= 0")
        if not (np.isfinite(self.epistemic_scale) and self.epistemic_scale >= 0):
            raise InvalidInput("epistemic_scale must be finite and >= 0")
        if self.votes_per_sample < 1:
            raise InvalidInput("votes_per_sample must be positive")
        for s in self.severity_levels:
            if not 0 <= int(s) <= 5:
                raise InvalidInput("severity levels must lie in [0, 5]")


@dataclass
class SimDataset:
    samples: List[SampleRecord]
    embeddings: np.ndarray  # n x D pre-logit style embeddings for post-hoc tests
    config: SimConfig


def _true_pi(rng: np.random.Generator, c: int, aleatoric_scale: float) -> np.ndarray:
    """Bayes predictor for one sample.

    A target class is concentrated on with Dirichlet weight 1/aleatoric_scale;
    scale 0 gives an exact one-hot, large scales approach uniform votes.
    """
    k = int(rng.integers(c))
    if aleatoric_scale == 0.0:
        pi = np.zeros(c)
        pi[k] = 1.0
        return pi
    conc = np.ones(c)
    conc[k] += 1.0 / aleatoric_scale
    gammas = rng.standard_gamma(conc)
    return gammas / gammas.sum()


def _severity_direction(seed: int, severity: int, c: int) -> np.ndarray:
    return philox_rng(seed, 1_000_000 + severity).standard_normal(c)


def simulate(cfg: SimConfig) -> SimDataset:
    """Generate n SampleRecords (and embeddings) with controllable structure.

    Per sample i, the stream (seed, i) drives: the Bayes predictor pi*, the
    hard label and votes drawn from pi*, the second-order prediction around
    logits ln(pi*) shifted by severity * direction(severity), and the
    embedding. ood is True iff severity > 0.
    """
    samples: List[SampleRecord] = []
    embeddings = np.empty((cfg.n, cfg.n_classes), dtype=np.float64)
    levels = list(cfg.severity_levels)
    for i in range(cfg.n):
        rng = philox_rng(cfg.seed, i)
        severity = int(levels[i % len(levels)])
        pi_star = _true_pi(rng, cfg.n_classes, cfg.aleatoric_scale)
        label = int(rng.choice(cfg.n_classes, p=pi_star))
        votes = rng.multinomial(cfg.votes_per_sample, pi_star)

        mean_logits = np.log(clamp_probs(pi_star, 1e-12))
        if severity > 0:
            mean_logits = mean_logits + severity * _severity_direction(cfg.seed, severity, cfg.n_classes)

        if cfg.family == "dirichlet":
            # Strength shrinks as the epistemic spread grows.
            strength = 1.0 / (cfg.epistemic_scale + 1e-4)
            beta = 1.0 + strength * softmax(mean_logits)
            prediction = DirichletPrediction(beta)
        elif cfg.family == "gaussian_logits":
            prediction = gaussian_logit_sample(mean_logits, cfg.epistemic_scale, cfg.n_members, cfg.seed, i, 1)
        else:  # dirac_ensemble: M fixed member offsets, one Dirac per member
            offsets = philox_rng(cfg.seed, i, 2).standard_normal((cfg.n_members, cfg.n_classes))
            prediction = PredictionSet(mean_logits + cfg.epistemic_scale * offsets)

        samples.append(
            SampleRecord(
                id=str(i),  # matches the binary format's implicit ids
                prediction=prediction,
                label=label,
                soft_label=SoftLabel(votes),
                ood=severity > 0,
                severity=severity,
            )
        )
        embeddings[i] = 2.0 * np.eye(cfg.n_classes)[label] + 0.3 * rng.standard_normal(cfg.n_classes)
        if severity > 0:
            embeddings[i] += severity * _severity_direction(cfg.seed, severity, cfg.n_classes)
    return SimDataset(samples=samples, embeddings=embeddings, config=cfg)
