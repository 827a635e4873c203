"""Ground-truth scoring of uncertainty estimates.

Ranking (AUROC), selective prediction (accuracy-coverage curve and its
normalized variants), calibration (ECE), proper scoring rules, correlation
coefficients, and random-baseline normalization.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List

import numpy as np
from scipy.stats import rankdata

from .core import EPS
from .errors import ConstantInput, DegenerateDataset, DegenerateTargets, InvalidBaseline, InvalidInput, ShapeError


def auroc(scores: np.ndarray, targets: np.ndarray) -> float:
    """Mann-Whitney AUROC: P(random positive outranks random negative), ties 1/2."""
    scores = np.asarray(scores, dtype=np.float64)
    targets = np.asarray(targets, dtype=bool)
    if scores.shape != targets.shape:
        raise ShapeError("scores and targets must have equal length")
    n_pos = int(targets.sum())
    n_neg = int((~targets).sum())
    if n_pos == 0 or n_neg == 0:
        raise DegenerateTargets("AUROC needs at least one positive and one negative target")
    ranks = rankdata(scores, method="average")
    u = float(ranks[targets].sum()) - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


@dataclass(frozen=True)
class CurvePoints:
    """Accuracy-coverage curve sampled at coverages k/n for k = 1..n."""

    coverage: np.ndarray
    accuracy: np.ndarray
    area: float


def _expected_prefix_correct(u: np.ndarray, correct: np.ndarray) -> np.ndarray:
    """Cumulative correct counts at each prefix size, sorted by ascending
    uncertainty, with tied uncertainties averaged over their orderings
    (linear interpolation of the cumulative count across each tie block)."""
    order = np.argsort(u, kind="stable")
    u_sorted = u[order]
    c_sorted = correct[order].astype(np.float64)
    cum = np.cumsum(c_sorted)
    n = len(u)
    out = cum.copy()
    start = 0
    while start < n:
        end = start
        while end + 1 < n and u_sorted[end + 1] == u_sorted[start]:
            end += 1
        if end > start:
            base = cum[start - 1] if start > 0 else 0.0
            block_total = cum[end] - base
            size = end - start + 1
            for j in range(start, end + 1):
                out[j] = base + block_total * (j - start + 1) / size
        start = end + 1
    return out


def accuracy_coverage(u: np.ndarray, correct: np.ndarray) -> CurvePoints:
    """Accuracy of the k most-certain samples at each coverage k/n.

    Ties in uncertainty are averaged over their possible orderings, so a
    constant uncertainty vector yields the flat random-baseline curve. The
    area integrates the curve by the trapezoidal rule over (0, 1], taking
    the coverage -> 0 limit as the first point's accuracy.
    """
    u = np.asarray(u, dtype=np.float64)
    correct = np.asarray(correct, dtype=bool)
    if u.shape != correct.shape or u.ndim != 1:
        raise ShapeError("uncertainty and correctness vectors must be aligned 1-D")
    n = len(u)
    if n == 0:
        raise InvalidInput("accuracy_coverage needs a nonempty dataset")
    if not np.all(np.isfinite(u)):
        raise InvalidInput("uncertainties must be finite")
    ks = np.arange(1, n + 1, dtype=np.float64)
    acc = _expected_prefix_correct(u, correct) / ks
    coverage = ks / n
    area = float(np.trapezoid(np.concatenate(([acc[0]], acc)), np.concatenate(([0.0], coverage))))
    return CurvePoints(coverage=coverage, accuracy=acc, area=area)


def _oracle_curve(n: int, n_correct: int) -> CurvePoints:
    correct = np.concatenate((np.ones(n_correct, dtype=bool), np.zeros(n - n_correct, dtype=bool)))
    return accuracy_coverage(np.arange(n, dtype=np.float64), correct)


def raulc(curve: CurvePoints, accuracy: float) -> float:
    """(AUAC - AUAC_random) / (AUAC_oracle - AUAC_random), random = flat curve."""
    n = len(curve.coverage)
    n_correct = int(round(accuracy * n))
    if n_correct in (0, n):
        raise DegenerateDataset("rAULC undefined at accuracy 0 or 1")
    oracle = _oracle_curve(n, n_correct).area
    return (curve.area - accuracy) / (oracle - accuracy)


def e_aurc(u: np.ndarray, correct: np.ndarray) -> float:
    """Excess area under the risk-coverage curve over the oracle ordering."""
    curve = accuracy_coverage(u, correct)
    correct = np.asarray(correct, dtype=bool)
    oracle = _oracle_curve(len(correct), int(correct.sum())).area
    return oracle - curve.area


def ece(confidence: np.ndarray, correct: np.ndarray, bins: int = 15) -> float:
    """Expected calibration error over equal-width confidence bins."""
    confidence = np.asarray(confidence, dtype=np.float64)
    correct = np.asarray(correct, dtype=bool)
    if confidence.shape != correct.shape:
        raise ShapeError("confidence and correctness vectors must be aligned")
    if bins < 1:
        raise InvalidInput("bins must be >= 1")
    if np.any(confidence < 0.0) or np.any(confidence > 1.0):
        raise InvalidInput("confidences must lie in [0, 1]")
    idx = np.minimum((confidence * bins).astype(np.int64), bins - 1)
    n = len(confidence)
    total = 0.0
    for b in range(bins):
        mask = idx == b
        n_b = int(mask.sum())
        if n_b == 0:
            continue
        gap = abs(float(confidence[mask].mean()) - float(correct[mask].mean()))
        total += n_b / n * gap
    return total


def ece_bin_table(confidence: np.ndarray, correct: np.ndarray, bins: int = 15) -> List[Dict]:
    """Per-bin reliability table (count, mean confidence, accuracy)."""
    confidence = np.asarray(confidence, dtype=np.float64)
    correct = np.asarray(correct, dtype=bool)
    idx = np.minimum((confidence * bins).astype(np.int64), bins - 1)
    rows = []
    for b in range(bins):
        mask = idx == b
        n_b = int(mask.sum())
        rows.append(
            {
                "bin_lower": b / bins,
                "bin_upper": (b + 1) / bins,
                "count": n_b,
                "mean_confidence": float(confidence[mask].mean()) if n_b else None,
                "accuracy": float(correct[mask].mean()) if n_b else None,
            }
        )
    return rows


def scoring_rules(confidence: np.ndarray, correct: np.ndarray, eps: float = EPS) -> Dict[str, float]:
    """Brier score and mean log probability of the correctness indicator."""
    confidence = np.asarray(confidence, dtype=np.float64)
    correct = np.asarray(correct, dtype=bool)
    if confidence.shape != correct.shape:
        raise ShapeError("confidence and correctness vectors must be aligned")
    y = correct.astype(np.float64)
    brier = float(np.mean((confidence - y) ** 2))
    p_outcome = np.clip(np.where(correct, confidence, 1.0 - confidence), eps, 1.0)
    log_prob = float(np.mean(np.log(p_outcome)))
    return {"brier": brier, "log_prob": log_prob}


def pearson(x: np.ndarray, y: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ShapeError("correlation inputs must be aligned 1-D vectors")
    if len(x) < 2:
        raise InvalidInput("correlation needs length >= 2")
    xc = x - x.mean()
    yc = y - y.mean()
    denom = float(np.sqrt(np.sum(xc**2) * np.sum(yc**2)))
    if denom == 0.0:
        raise ConstantInput("correlation undefined for constant input")
    return float(np.sum(xc * yc) / denom)


def spearman(x: np.ndarray, y: np.ndarray) -> float:
    """Pearson correlation of average-ranked data (ties get average ranks)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ShapeError("correlation inputs must be aligned 1-D vectors")
    return pearson(rankdata(x, method="average"), rankdata(y, method="average"))


def normalize_metric(value: float, random_baseline: float) -> float:
    """(metric - rnd) / (1 - rnd) normalization against a random predictor."""
    if random_baseline >= 1.0:
        raise InvalidBaseline("random baseline must be < 1")
    return (value - random_baseline) / (1.0 - random_baseline)
