"""Evaluation toolkit for second-order predictive uncertainty.

Aggregates ensembles or Dirichlet second-order distributions into scalar
uncertainties, computes information-theoretical and Bregman decompositions,
fits post-hoc density and calibration scorers, and scores everything against
ground truth (correctness, OOD detection, annotator disagreement).
"""

__version__ = "0.1.0"

from .aggregate import (
    BOUNDED_KINDS,
    GT_KINDS,
    MC_MEMBERS,
    AggregatorKind,
    aggregate,
    aggregate_batch,
    bma,
    dual_centroid,
)
from .analysis import (
    DisentanglementReport,
    ResultsTable,
    ambiguity_targets,
    build_ood_mixture,
    disentanglement,
    metric_correlation_matrix,
    severity_sweep,
)
from .core import (
    EPS,
    DirichletPrediction,
    Prediction,
    PredictionSet,
    SampleRecord,
    SoftLabel,
    clamp_probs,
    entropy,
    kl_divergence,
    softmax,
)
from .decompose import (
    BregmanDecomposition,
    ItDecomposition,
    bregman_decompose,
    gt_aleatoric,
    it_decompose,
    it_decompose_dirichlet,
)
from .errors import UntangleError
from .metrics import (
    CurvePoints,
    accuracy_coverage,
    auroc,
    e_aurc,
    ece,
    ece_bin_table,
    normalize_metric,
    pearson,
    raulc,
    scoring_rules,
    spearman,
)
from .posthoc import (
    TEMPERATURE_GRID,
    DduModel,
    EmbeddingRecord,
    MahalanobisModel,
    fit_ddu,
    fit_mahalanobis,
    score_ddu,
    score_mahalanobis,
    temperature_scale,
)
from .synth import FAMILIES, SimConfig, SimDataset, dirichlet_sample, gaussian_logit_sample, philox_rng, simulate

__all__ = [name for name in dir() if not name.startswith("_")]
