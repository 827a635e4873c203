"""Scalar uncertainty aggregators over second-order predictions.

Fourteen aggregators compress a set of member probability vectors (or a
Dirichlet parameter vector) into one scalar. Three of them (PU_B, AU_B,
BIAS_B) need the ground-truth vote distribution and are only available when
a soft label is supplied.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from .core import EPS, DirichletPrediction, Prediction, PredictionSet, SampleRecord, SoftLabel, entropy
from .decompose import bregman_decompose, dual_centroid_from_logmean, it_decompose, it_decompose_dirichlet, mean_log_probs
from .errors import InvalidInput, MissingSoftLabel, UnknownKind
from .synth import dirichlet_sample

#: Members drawn when a Dirichlet prediction has to be materialized into samples.
MC_MEMBERS = 1000

_BATCH_CHUNK = 256


class AggregatorKind(str, Enum):
    PU_IT = "pu_it"
    AU_IT = "au_it"
    EU_IT = "eu_it"
    PU_B = "pu_b"
    AU_B = "au_b"
    EU_B = "eu_b"
    BIAS_B = "bias_b"
    ENTROPY_DUAL = "entropy_dual"
    ONE_MINUS_EXP_MAX = "one_minus_exp_max"
    ONE_MINUS_MAX_BMA = "one_minus_max_bma"
    ONE_MINUS_MAX_DUAL = "one_minus_max_dual"
    DEMPSTER_SHAFER = "dempster_shafer"
    EXP_VAR_LOGIT = "exp_var_logit"
    EXP_VAR_PROB = "exp_var_prob"


#: Aggregators that require a ground-truth soft label.
GT_KINDS = frozenset({AggregatorKind.PU_B, AggregatorKind.AU_B, AggregatorKind.BIAS_B})

#: Aggregators restricted to [0, 1]; the only ones usable as confidences
#: for calibration metrics and proper scoring rules.
BOUNDED_KINDS = frozenset(
    {
        AggregatorKind.ONE_MINUS_EXP_MAX,
        AggregatorKind.ONE_MINUS_MAX_BMA,
        AggregatorKind.ONE_MINUS_MAX_DUAL,
    }
)


def bma(pred: PredictionSet) -> np.ndarray:
    """Bayesian model average: arithmetic mean of member probability rows."""
    return np.mean(pred.probs, axis=0)


def dual_centroid(pred: PredictionSet, eps: float = EPS) -> np.ndarray:
    """Log-space centroid: normalized exponentials of mean log-probabilities."""
    return dual_centroid_from_logmean(mean_log_probs(pred, eps))


def _dempster_shafer_beta(pred: Prediction) -> np.ndarray:
    if isinstance(pred, DirichletPrediction):
        return pred.beta
    # Pseudo-count extension: exponentiate the member-averaged logit vector.
    with np.errstate(over="ignore"):
        return np.exp(np.mean(pred.logits, axis=0)) + 1.0


_BREGMAN_KINDS = (AggregatorKind.PU_B, AggregatorKind.AU_B, AggregatorKind.BIAS_B, AggregatorKind.EU_B)
_IT_KINDS = (AggregatorKind.PU_IT, AggregatorKind.AU_IT, AggregatorKind.EU_IT)


def _aggregate_many(
    pred: Prediction,
    kinds: Sequence[AggregatorKind],
    soft: Optional[SoftLabel],
    eps: float,
    mc_members: int,
    mc_seed,
) -> List[float]:
    """Evaluate several aggregators on one prediction, sharing decompositions."""
    for kind in kinds:
        if kind in GT_KINDS and soft is None:
            raise MissingSoftLabel(f"aggregator {kind.value} needs a soft label")
    if soft is not None and not isinstance(soft, SoftLabel):
        raise InvalidInput("soft must be a SoftLabel")

    dirichlet = pred if isinstance(pred, DirichletPrediction) else None
    materialized: Optional[PredictionSet] = None if dirichlet is not None else pred

    def members() -> PredictionSet:
        nonlocal materialized
        if materialized is None:
            materialized = dirichlet_sample(dirichlet.beta, mc_members, mc_seed)
        return materialized

    cache: dict = {}

    def it():
        if "it" not in cache:
            cache["it"] = it_decompose_dirichlet(dirichlet) if dirichlet is not None else it_decompose(pred)
        return cache["it"]

    def bregman(with_soft: bool):
        key = ("bregman", with_soft)
        if key not in cache:
            cache[key] = bregman_decompose(members(), soft if with_soft else None, eps)
        return cache[key]

    def centroid() -> np.ndarray:
        if "centroid" not in cache:
            cache["centroid"] = dual_centroid(members(), eps)
        return cache["centroid"]

    out: List[float] = []
    for kind in kinds:
        if kind is AggregatorKind.DEMPSTER_SHAFER:
            beta = _dempster_shafer_beta(pred)
            out.append(float(pred.n_classes / beta.sum()))
        elif kind in _IT_KINDS:
            dec = it()
            out.append({AggregatorKind.PU_IT: dec.predictive, AggregatorKind.AU_IT: dec.aleatoric, AggregatorKind.EU_IT: dec.epistemic}[kind])
        elif kind in _BREGMAN_KINDS:
            dec = bregman(kind in GT_KINDS)
            if kind is AggregatorKind.EU_B:
                out.append(dec.epistemic)
            elif kind is AggregatorKind.PU_B:
                out.append(dec.predictive)
            elif kind is AggregatorKind.AU_B:
                out.append(dec.aleatoric_gt)
            else:
                out.append(dec.bias)
        elif kind is AggregatorKind.ENTROPY_DUAL:
            out.append(float(entropy(centroid())))
        elif kind is AggregatorKind.ONE_MINUS_MAX_BMA:
            out.append(float(1.0 - np.max(bma(members()))))
        elif kind is AggregatorKind.ONE_MINUS_MAX_DUAL:
            out.append(float(1.0 - np.max(centroid())))
        elif kind is AggregatorKind.ONE_MINUS_EXP_MAX:
            out.append(float(1.0 - np.mean(np.max(members().probs, axis=1))))
        elif kind is AggregatorKind.EXP_VAR_LOGIT:
            out.append(float(np.mean(np.var(members().logits, axis=0))))
        elif kind is AggregatorKind.EXP_VAR_PROB:
            out.append(float(np.mean(np.var(members().probs, axis=0))))
        else:
            raise UnknownKind(f"unknown aggregator kind {kind!r}")
    return out


def aggregate(
    pred: Prediction,
    kind: AggregatorKind,
    soft: Optional[SoftLabel] = None,
    eps: float = EPS,
    mc_members: int = MC_MEMBERS,
    mc_seed=0,
) -> float:
    """Evaluate one aggregator on one prediction.

    Dirichlet predictions are handled in closed form for the IT terms and
    the Dempster-Shafer value; every other aggregator sees a seeded
    materialization of ``mc_members`` Monte-Carlo members.
    """
    kind = AggregatorKind(kind)
    return _aggregate_many(pred, [kind], soft, eps, mc_members, mc_seed)[0]


def _score_chunk(
    samples: Sequence[SampleRecord],
    offset: int,
    kinds: Sequence[AggregatorKind],
    eps: float,
    mc_members: int,
    mc_seed: int,
) -> List[List[float]]:
    rows = []
    for j, sample in enumerate(samples):
        try:
            rows.append(_aggregate_many(sample.prediction, kinds, sample.soft_label, eps, mc_members, (mc_seed, offset + j)))
        except Exception as exc:
            exc.args = (f"sample {sample.id}: {exc}",)
            raise
    return rows


def resolve_workers(workers: Optional[int] = None) -> int:
    if workers is None:
        workers = int(os.environ.get("UNTANGLE_THREADS", "1"))
    return max(1, workers)


def aggregate_batch(
    samples: Sequence[SampleRecord],
    kinds: Iterable[AggregatorKind],
    eps: float = EPS,
    mc_members: int = MC_MEMBERS,
    mc_seed: int = 0,
    workers: Optional[int] = None,
) -> Dict[AggregatorKind, np.ndarray]:
    """One score per (sample, kind).

    Fan-out happens over fixed-size chunks with ordered reduction, so the
    result is bit-identical for any worker count.
    """
    kinds = [AggregatorKind(k) for k in kinds]
    samples = list(samples)
    if samples:
        n_classes = samples[0].n_classes
        for s in samples:
            if s.n_classes != n_classes:
                raise InvalidInput(f"sample {s.id}: inconsistent class count")
    if any(k in GT_KINDS for k in kinds) and any(s.soft_label is None for s in samples):
        missing = next(s.id for s in samples if s.soft_label is None)
        raise MissingSoftLabel(f"sample {missing}: GT aggregators need soft labels for all samples")

    chunks = [(i, samples[i : i + _BATCH_CHUNK]) for i in range(0, len(samples), _BATCH_CHUNK)]
    workers = resolve_workers(workers)
    if workers == 1 or len(chunks) <= 1:
        results = [_score_chunk(chunk, off, kinds, eps, mc_members, mc_seed) for off, chunk in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_score_chunk, chunk, off, kinds, eps, mc_members, mc_seed) for off, chunk in chunks]
            results = [f.result() for f in futures]

    table = np.array([row for rows in results for row in rows], dtype=np.float64).reshape(len(samples), len(kinds))
    return {kind: table[:, j].copy() for j, kind in enumerate(kinds)}
