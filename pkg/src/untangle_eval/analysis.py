"""Dataset-level analyses.

OOD-mixture construction, ambiguity targets from soft labels,
disentanglement correlation reports, per-severity metric sweeps with
random-predictor normalization, and metric-correlation matrices over
(method, aggregator) results tables.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .aggregate import BOUNDED_KINDS, AggregatorKind
from .core import SampleRecord
from .errors import ConstantInput, DegenerateTargets, EmptyInput, InvalidInput, MissingSoftLabel
from .metrics import accuracy_coverage, auroc, ece, normalize_metric, pearson, spearman
from .synth import philox_rng

#: Metrics that need a [0, 1]-bounded confidence; only rows whose aggregator
#: is bounded may fill these columns.
CALIBRATION_METRICS = frozenset({"ece", "brier", "log_prob"})


def build_ood_mixture(
    id_set: Sequence[SampleRecord], ood_set: Sequence[SampleRecord], seed: int
) -> Tuple[List[SampleRecord], np.ndarray]:
    """Balanced ID/OOD mixture: the larger side is subsampled by seed.

    Returns the mixed samples (ID block first) and their binary targets
    (False = in-distribution, True = out-of-distribution).
    """
    id_set = list(id_set)
    ood_set = list(ood_set)
    if not id_set or not ood_set:
        raise EmptyInput("OOD mixture needs nonempty ID and OOD sets")
    if id_set[0].n_classes != ood_set[0].n_classes:
        raise InvalidInput("ID and OOD sets must share the class count")
    k = min(len(id_set), len(ood_set))

    def subsample(samples: List[SampleRecord], stream: int) -> List[SampleRecord]:
        if len(samples) == k:
            return samples
        idx = philox_rng(seed, stream).choice(len(samples), size=k, replace=False)
        return [samples[i] for i in np.sort(idx)]

    mixed = subsample(id_set, 0) + subsample(ood_set, 1)
    targets = np.concatenate((np.zeros(k, dtype=bool), np.ones(k, dtype=bool)))
    return mixed, targets


def ambiguity_targets(samples: Sequence[SampleRecord]) -> np.ndarray:
    """True where the soft label spreads votes over more than one class."""
    targets = np.empty(len(samples), dtype=bool)
    for i, sample in enumerate(samples):
        if sample.soft_label is None:
            raise MissingSoftLabel(f"sample {sample.id}: ambiguity targets need soft labels")
        targets[i] = int(np.count_nonzero(sample.soft_label.votes)) > 1
    return targets


@dataclass(frozen=True)
class DisentanglementReport:
    """Five Spearman correlations; None marks a constant-input cell."""

    corr_ua_ue: Optional[float]
    corr_ua_gt_a: Optional[float]
    corr_ue_proxy_e: Optional[float]
    corr_ua_proxy_e: Optional[float]
    corr_ue_gt_a: Optional[float]


def _spearman_or_none(x: np.ndarray, y: np.ndarray) -> Optional[float]:
    try:
        return spearman(x, y)
    except ConstantInput:
        return None


def disentanglement(
    u_a: np.ndarray,
    u_e: np.ndarray,
    gt_a: np.ndarray,
    proxy_e_targets: np.ndarray,
) -> DisentanglementReport:
    """Correlation report for an (aleatoric, epistemic) estimator pair.

    The epistemic ground-truth proxy is the binary OOD target vector; no
    pass/fail verdict is baked in, thresholds are report-consumer policy.
    """
    u_a = np.asarray(u_a, dtype=np.float64)
    u_e = np.asarray(u_e, dtype=np.float64)
    gt_a = np.asarray(gt_a, dtype=np.float64)
    proxy = np.asarray(proxy_e_targets, dtype=np.float64)
    if not (len(u_a) == len(u_e) == len(gt_a) == len(proxy)):
        raise InvalidInput("disentanglement inputs must be aligned")
    return DisentanglementReport(
        corr_ua_ue=_spearman_or_none(u_a, u_e),
        corr_ua_gt_a=_spearman_or_none(u_a, gt_a),
        corr_ue_proxy_e=_spearman_or_none(u_e, proxy),
        corr_ua_proxy_e=_spearman_or_none(u_a, proxy),
        corr_ue_gt_a=_spearman_or_none(u_e, gt_a),
    )


def severity_sweep(
    severities: np.ndarray,
    uncertainty: np.ndarray,
    correct: np.ndarray,
    confidence: np.ndarray,
    n_classes: int,
    bins: int = 15,
    levels: Optional[Sequence[int]] = None,
) -> List[Dict]:
    """Per-severity metric rows, raw and random-predictor normalized.

    AUROC normalizes against 0.5; accuracy-flavored metrics (accuracy, AUAC)
    against 1/C. Empty buckets and degenerate metrics yield None cells.
    """
    severities = np.asarray(severities, dtype=np.int64)
    uncertainty = np.asarray(uncertainty, dtype=np.float64)
    correct = np.asarray(correct, dtype=bool)
    confidence = np.asarray(confidence, dtype=np.float64)
    if levels is None:
        levels = sorted(int(s) for s in np.unique(severities))
    rows = []
    for level in levels:
        mask = severities == level
        n = int(mask.sum())
        row: Dict = {"severity": int(level), "n": n}
        metric_names = ("accuracy", "auroc_correctness", "auac", "ece", "accuracy_norm", "auroc_norm", "auac_norm")
        if n == 0:
            row.update({name: None for name in metric_names})
            rows.append(row)
            continue
        acc = float(correct[mask].mean())
        row["accuracy"] = acc
        try:
            auroc_val = auroc(uncertainty[mask], ~correct[mask])
        except DegenerateTargets:
            auroc_val = None
        row["auroc_correctness"] = auroc_val
        auac = accuracy_coverage(uncertainty[mask], correct[mask]).area
        row["auac"] = auac
        row["ece"] = ece(confidence[mask], correct[mask], bins)
        rnd = 1.0 / n_classes
        row["accuracy_norm"] = normalize_metric(acc, rnd)
        row["auroc_norm"] = normalize_metric(auroc_val, 0.5) if auroc_val is not None else None
        row["auac_norm"] = normalize_metric(auac, rnd)
        rows.append(row)
    return rows


class ResultsTable:
    """Rectangular table of metric values keyed by (method, aggregator) rows.

    Calibration-style columns may only be filled for rows whose aggregator is
    restricted to [0, 1]; the builder rejects incompatible cells.
    """

    def __init__(self, columns: Sequence[str]):
        self.columns = list(columns)
        self._rows: Dict[Tuple[str, str], List[Optional[float]]] = {}

    def set_cell(self, method: str, aggregator: AggregatorKind, column: str, value: Optional[float]) -> None:
        aggregator = AggregatorKind(aggregator)
        if column not in self.columns:
            raise InvalidInput(f"unknown column {column!r}")
        if column in CALIBRATION_METRICS and aggregator not in BOUNDED_KINDS and value is not None:
            raise InvalidInput(
                f"column {column!r} needs a [0, 1]-bounded aggregator, got {aggregator.value}"
            )
        key = (method, aggregator.value)
        if key not in self._rows:
            self._rows[key] = [None] * len(self.columns)
        self._rows[key][self.columns.index(column)] = value

    @property
    def row_keys(self) -> List[Tuple[str, str]]:
        return list(self._rows.keys())

    def column_values(self, column: str, row_keys: Optional[Sequence[Tuple[str, str]]] = None) -> List[Optional[float]]:
        j = self.columns.index(column)
        keys = self.row_keys if row_keys is None else list(row_keys)
        return [self._rows[k][j] for k in keys]

    def rows_complete_for(self, columns: Sequence[str]) -> List[Tuple[str, str]]:
        idx = [self.columns.index(c) for c in columns]
        return [k for k, row in self._rows.items() if all(row[j] is not None for j in idx)]


def metric_correlation_matrix(
    table: ResultsTable, mode: str = "pearson", columns: Optional[Sequence[str]] = None
) -> Dict:
    """Symmetric unit-diagonal correlation matrix of metric columns over rows."""
    if mode not in ("pearson", "spearman"):
        raise InvalidInput("mode must be 'pearson' or 'spearman'")
    columns = list(columns) if columns is not None else list(table.columns)
    keys = table.row_keys
    if len(keys) < 3:
        raise InvalidInput("correlation matrix needs at least 3 rows")
    data = {}
    for c in columns:
        values = table.column_values(c, keys)
        if any(v is None for v in values):
            raise InvalidInput(f"column {c!r} has missing cells")
        data[c] = np.asarray(values, dtype=np.float64)
    corr = pearson if mode == "pearson" else spearman
    k = len(columns)
    values: List[List[Optional[float]]] = [[None] * k for _ in range(k)]
    for i in range(k):
        values[i][i] = 1.0
        for j in range(i + 1, k):
            try:
                cell = corr(data[columns[i]], data[columns[j]])
            except ConstantInput:
                cell = None
            values[i][j] = cell
            values[j][i] = cell
    return {"metrics": columns, "values": values}
