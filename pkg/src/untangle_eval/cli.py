"""Command-line surface composing the library into an evaluation pipeline.

Every subcommand reads the file formats from :mod:`untangle_eval.dataio`,
writes one schema-versioned report to --output (or stdout), and exits
nonzero with a single machine-parsable ``Category: message`` line on
failure. Identical inputs and seed produce byte-identical reports for any
worker count (UNTANGLE_THREADS).
"""

from __future__ import annotations

import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import click
import numpy as np

from . import __version__
from .aggregate import BOUNDED_KINDS, GT_KINDS, AggregatorKind, aggregate_batch
from .analysis import (
    ambiguity_targets,
    build_ood_mixture,
    disentanglement,
    metric_correlation_matrix,
    ResultsTable,
    severity_sweep,
)
from .core import EPS, DirichletPrediction, SampleRecord
from .decompose import bregman_decompose, gt_aleatoric, it_decompose, it_decompose_dirichlet
from .dataio import (
    LabelRecord,
    PredictionBatch,
    join_dataset,
    read_embeddings,
    read_labels,
    read_predictions,
    write_embeddings,
    write_labels,
    write_predictions,
)
from .errors import (
    ConstantInput,
    DegenerateDataset,
    DegenerateTargets,
    EmptyInput,
    MissingInput,
    MissingSoftLabel,
    UnknownKind,
    UntangleError,
)
from .metrics import accuracy_coverage, auroc, e_aurc, ece, ece_bin_table, raulc, scoring_rules, spearman
from .posthoc import EmbeddingRecord, fit_ddu, fit_mahalanobis, score_ddu, score_mahalanobis
from .report import dumps, dumps_csv, new_report, write_report, write_report_csv
from .synth import FAMILIES, SimConfig, simulate as run_simulation


# ---------------------------------------------------------------------------
# shared option groups and helpers


def _io_options(f):
    f = click.option("--output", type=click.Path(dir_okay=False), default=None, help="Report path (stdout if omitted).")(f)
    f = click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json", show_default=True)(f)
    f = click.option("--figures", is_flag=True, default=False, help="Also render figures next to --output.")(f)
    f = click.option("--seed", type=int, default=0, show_default=True)(f)
    return f


def _aggregate_options(f):
    f = click.option(
        "--aggregator",
        "aggregators",
        multiple=True,
        default=("all",),
        show_default=True,
        help="Aggregator name; repeatable, or 'all'.",
    )(f)
    f = click.option("--epsilon", type=float, default=EPS, show_default=True)(f)
    return f


def _require(value, flag: str):
    if value is None:
        raise MissingInput(f"required flag {flag} is missing")
    return value


def _load_samples(predictions: Optional[str], labels: Optional[str]) -> List[SampleRecord]:
    batch = read_predictions(_require(predictions, "--predictions"))
    records = read_labels(_require(labels, "--labels"))
    return join_dataset(batch, records)


def _resolve_kinds(names: Sequence[str], samples: Sequence[SampleRecord]) -> List[AggregatorKind]:
    have_soft = bool(samples) and all(s.soft_label is not None for s in samples)
    if any(n == "all" for n in names):
        kinds = list(AggregatorKind)
        if not have_soft:
            excluded = sorted(k.value for k in GT_KINDS)
            click.echo(f"warning: excluding aggregators that need soft labels: {', '.join(excluded)}", err=True)
            kinds = [k for k in kinds if k not in GT_KINDS]
        return kinds
    kinds = []
    for name in names:
        try:
            kinds.append(AggregatorKind(name))
        except ValueError:
            raise UnknownKind(f"unknown aggregator {name!r}")
    return kinds


def _bma_matrix(samples: Sequence[SampleRecord]) -> np.ndarray:
    rows = np.empty((len(samples), samples[0].n_classes))
    for i, s in enumerate(samples):
        p = s.prediction
        rows[i] = p.mean if isinstance(p, DirichletPrediction) else np.mean(p.probs, axis=0)
    return rows


def _correct_and_confidence(samples: Sequence[SampleRecord]):
    if not samples:
        raise EmptyInput("no samples to evaluate")
    bma = _bma_matrix(samples)
    labels = np.asarray([s.label for s in samples], dtype=np.int64)
    correct = np.argmax(bma, axis=1) == labels
    confidence = np.max(bma, axis=1)
    return correct, confidence


def _emit(report: Dict, output: Optional[str], fmt: str) -> None:
    if output is None:
        click.echo(dumps(report) if fmt == "json" else dumps_csv(report), nl=False)
    elif fmt == "json":
        write_report(output, report)
    else:
        write_report_csv(output, report)


def _figure_path(output: Optional[str], suffix: str) -> Optional[Path]:
    if output is None:
        return None
    out = Path(output)
    return out.with_name(f"{out.stem}_{suffix}.png")


# ---------------------------------------------------------------------------
# command group


@click.group()
@click.version_option(__version__)
def cli() -> None:
    """Evaluate second-order predictive uncertainty against ground truth."""


@cli.command()
@click.option("--n", type=int, required=True, help="Number of samples.")
@click.option("--classes", "n_classes", type=int, default=10, show_default=True)
@click.option("--members", "n_members", type=int, default=8, show_default=True)
@click.option("--family", type=click.Choice(FAMILIES), default="gaussian_logits", show_default=True)
@click.option("--aleatoric-scale", type=float, default=0.5, show_default=True)
@click.option("--epistemic-scale", type=float, default=0.5, show_default=True)
@click.option("--severity-levels", default="0", show_default=True, help="Comma-separated severities in [0, 5].")
@click.option("--votes", type=int, default=10, show_default=True, help="Annotator votes per sample.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--predictions", type=click.Path(dir_okay=False), required=True)
@click.option("--labels", type=click.Path(dir_okay=False), required=True)
@click.option("--embeddings", type=click.Path(dir_okay=False), default=None)
@click.option("--text", is_flag=True, default=False, help="Write predictions as JSON lines instead of binary.")
def simulate(n, n_classes, n_members, family, aleatoric_scale, epistemic_scale, severity_levels, votes, seed, predictions, labels, embeddings, text):
    """Generate a synthetic dataset and write prediction/label files."""
    levels = tuple(int(s) for s in severity_levels.split(","))
    cfg = SimConfig(
        n=n,
        n_classes=n_classes,
        n_members=n_members,
        family=family,
        aleatoric_scale=aleatoric_scale,
        epistemic_scale=epistemic_scale,
        severity_levels=levels,
        seed=seed,
        votes_per_sample=votes,
    )
    dataset = run_simulation(cfg)
    ids = [s.id for s in dataset.samples]
    if family == "dirichlet":
        batch = PredictionBatch(ids=ids, dirichlet=np.stack([s.prediction.beta for s in dataset.samples]))
    else:
        batch = PredictionBatch(ids=ids, logits=np.stack([s.prediction.logits for s in dataset.samples]))
    write_predictions(predictions, batch, binary=not text)
    write_labels(
        labels,
        [
            LabelRecord(id=s.id, label=s.label, votes=s.soft_label.votes, ood=s.ood, severity=s.severity)
            for s in dataset.samples
        ],
    )
    if embeddings is not None:
        write_embeddings(
            embeddings,
            [EmbeddingRecord(id=s.id, layers=[dataset.embeddings[i]]) for i, s in enumerate(dataset.samples)],
        )


@cli.command("aggregate")
@click.option("--predictions", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--labels", type=click.Path(exists=True, dir_okay=False), default=None)
@_aggregate_options
@_io_options
def aggregate_cmd(predictions, labels, aggregators, epsilon, output, fmt, figures, seed):
    """Score every sample with the selected aggregators."""
    samples = _load_samples(predictions, labels)
    kinds = _resolve_kinds(aggregators, samples)
    scores = aggregate_batch(samples, kinds, eps=epsilon, mc_seed=seed)
    report = new_report(sys.argv[1:], seed, __version__)
    report["per_sample"] = [
        {
            "id": s.id,
            "ood": s.ood,
            "severity": s.severity,
            "scores": {k.value: float(scores[k][i]) for k in kinds},
        }
        for i, s in enumerate(samples)
    ]
    _emit(report, output, fmt)


@cli.command()
@click.option("--predictions", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--labels", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--epsilon", type=float, default=EPS, show_default=True)
@_io_options
def decompose(predictions, labels, epsilon, output, fmt, figures, seed):
    """Per-sample information-theoretical and Bregman decompositions."""
    samples = _load_samples(predictions, labels)
    report = new_report(sys.argv[1:], seed, __version__)
    rows = []
    for s in samples:
        pred = s.prediction
        if isinstance(pred, DirichletPrediction):
            it = it_decompose_dirichlet(pred)
            breg = None
        else:
            it = it_decompose(pred)
            breg = bregman_decompose(pred, s.soft_label, epsilon)
        row = {
            "id": s.id,
            "it": {"predictive": it.predictive, "aleatoric": it.aleatoric, "epistemic": it.epistemic},
            "bregman": None
            if breg is None
            else {
                "aleatoric_est": breg.aleatoric_est,
                "epistemic": breg.epistemic,
                "predictive": breg.predictive,
                "aleatoric_gt": breg.aleatoric_gt,
                "bias": breg.bias,
            },
        }
        rows.append(row)
    report["per_sample"] = rows
    _emit(report, output, fmt)


@cli.command("eval")
@click.option("--predictions", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--labels", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--bins", type=int, default=15, show_default=True)
@_aggregate_options
@_io_options
def eval_cmd(predictions, labels, bins, aggregators, epsilon, output, fmt, figures, seed):
    """Correctness-prediction metrics: AUROC, AUAC, rAULC, E-AURC, ECE, scoring rules."""
    samples = _load_samples(predictions, labels)
    kinds = _resolve_kinds(aggregators, samples)
    correct, _ = _correct_and_confidence(samples)
    scores = aggregate_batch(samples, kinds, eps=epsilon, mc_seed=seed)

    per_aggregator: Dict[str, Dict] = {}
    for kind in kinds:
        u = scores[kind]
        curve = accuracy_coverage(u, correct)
        try:
            auroc_val = auroc(u, ~correct)
        except DegenerateTargets:
            auroc_val = None
        try:
            raulc_val = raulc(curve, float(correct.mean()))
        except DegenerateDataset:
            raulc_val = None
        entry: Dict = {
            "auroc_correctness": auroc_val,
            "auac": curve.area,
            "raulc": raulc_val,
            "e_aurc": e_aurc(u, correct),
            "ece": None,
            "brier": None,
            "log_prob": None,
            "reliability": None,
            "curve": {"coverage": curve.coverage.tolist(), "accuracy": curve.accuracy.tolist()},
        }
        if kind in BOUNDED_KINDS:
            conf = 1.0 - u
            entry["ece"] = ece(conf, correct, bins)
            entry.update(scoring_rules(conf, correct, epsilon))
            entry["reliability"] = ece_bin_table(conf, correct, bins)
        per_aggregator[kind.value] = entry
    report = new_report(sys.argv[1:], seed, __version__)
    report["metrics"] = {"accuracy": float(correct.mean()), "per_aggregator": per_aggregator}
    _emit(report, output, fmt)
    if figures and output is not None:
        from . import plots

        for kind in kinds:
            entry = per_aggregator[kind.value]
            plots.accuracy_coverage_figure(
                entry["curve"]["coverage"], entry["curve"]["accuracy"], _figure_path(output, f"coverage_{kind.value}")
            )
            if entry["reliability"] is not None:
                plots.reliability_figure(entry["reliability"], _figure_path(output, f"reliability_{kind.value}"))


@cli.command()
@click.option("--predictions", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--labels", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--ood-predictions", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--ood-labels", type=click.Path(exists=True, dir_okay=False), default=None)
@_aggregate_options
@_io_options
def ood(predictions, labels, ood_predictions, ood_labels, aggregators, epsilon, output, fmt, figures, seed):
    """OOD-detection AUROC on a balanced ID/OOD mixture.

    With --ood-predictions/--ood-labels the second dataset is the OOD side;
    otherwise the one dataset is split by its own ood flags.
    """
    samples = _load_samples(predictions, labels)
    if ood_predictions is not None or ood_labels is not None:
        ood_side = _load_samples(_require(ood_predictions, "--ood-predictions"), _require(ood_labels, "--ood-labels"))
        id_side = samples
    else:
        id_side = [s for s in samples if not s.ood]
        ood_side = [s for s in samples if s.ood]
    mixed, targets = build_ood_mixture(id_side, ood_side, seed)
    kinds = _resolve_kinds(aggregators, mixed)
    scores = aggregate_batch(mixed, kinds, eps=epsilon, mc_seed=seed)
    per_kind = {}
    for kind in kinds:
        try:
            per_kind[kind.value] = auroc(scores[kind], targets)
        except DegenerateTargets:
            per_kind[kind.value] = None
    report = new_report(sys.argv[1:], seed, __version__)
    report["metrics"] = {"n_id": int((~targets).sum()), "n_ood": int(targets.sum()), "ood_auroc": per_kind}
    _emit(report, output, fmt)


@cli.command()
@click.option("--predictions", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--labels", type=click.Path(exists=True, dir_okay=False), default=None)
@_aggregate_options
@_io_options
def aleatoric(predictions, labels, aggregators, epsilon, output, fmt, figures, seed):
    """Rank correlation with ground-truth aleatoric uncertainty, plus ambiguity AUROC."""
    samples = _load_samples(predictions, labels)
    if any(s.soft_label is None for s in samples):
        missing = next(s.id for s in samples if s.soft_label is None)
        raise MissingSoftLabel(f"sample {missing}: aleatoric evaluation needs soft labels for all samples")
    kinds = _resolve_kinds(aggregators, samples)
    gt = np.asarray([gt_aleatoric(s.soft_label) for s in samples])
    ambiguous = ambiguity_targets(samples)
    scores = aggregate_batch(samples, kinds, eps=epsilon, mc_seed=seed)
    spearman_cells = {}
    ambiguity_cells = {}
    for kind in kinds:
        try:
            spearman_cells[kind.value] = spearman(scores[kind], gt)
        except ConstantInput:
            spearman_cells[kind.value] = None
        try:
            ambiguity_cells[kind.value] = auroc(scores[kind], ambiguous)
        except DegenerateTargets:
            ambiguity_cells[kind.value] = None
    report = new_report(sys.argv[1:], seed, __version__)
    report["metrics"] = {"spearman_gt_aleatoric": spearman_cells, "ambiguity_auroc": ambiguity_cells}
    _emit(report, output, fmt)


@cli.command()
@click.option("--predictions", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--labels", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--aleatoric-aggregator", default=AggregatorKind.AU_IT.value, show_default=True)
@click.option("--epistemic-aggregator", default=AggregatorKind.EU_IT.value, show_default=True)
@click.option("--low-threshold", type=float, default=0.3, show_default=True, help="Cross-correlation ceiling (policy, not a paper claim).")
@click.option("--high-threshold", type=float, default=0.7, show_default=True, help="Own-ground-truth correlation floor (policy).")
@click.option("--epsilon", type=float, default=EPS, show_default=True)
@_io_options
def disentangle(predictions, labels, aleatoric_aggregator, epistemic_aggregator, low_threshold, high_threshold, epsilon, output, fmt, figures, seed):
    """Appendix-style disentanglement report for an estimator pair."""
    samples = _load_samples(predictions, labels)
    if any(s.soft_label is None for s in samples):
        missing = next(s.id for s in samples if s.soft_label is None)
        raise MissingSoftLabel(f"sample {missing}: disentanglement needs soft labels for all samples")
    kinds = _resolve_kinds([aleatoric_aggregator, epistemic_aggregator], samples)
    scores = aggregate_batch(samples, kinds, eps=epsilon, mc_seed=seed)
    gt_a = np.asarray([gt_aleatoric(s.soft_label) for s in samples])
    proxy = np.asarray([s.ood for s in samples], dtype=np.float64)
    rep = disentanglement(scores[kinds[0]], scores[kinds[1]], gt_a, proxy)
    cells = {
        "corr_ua_ue": rep.corr_ua_ue,
        "corr_ua_gt_a": rep.corr_ua_gt_a,
        "corr_ue_proxy_e": rep.corr_ue_proxy_e,
        "corr_ua_proxy_e": rep.corr_ua_proxy_e,
        "corr_ue_gt_a": rep.corr_ue_gt_a,
    }
    verdict = None
    if all(v is not None for v in cells.values()):
        verdict = (
            cells["corr_ua_gt_a"] >= high_threshold
            and cells["corr_ue_proxy_e"] >= high_threshold
            and abs(cells["corr_ua_ue"]) <= low_threshold
            and abs(cells["corr_ua_proxy_e"]) <= low_threshold
            and abs(cells["corr_ue_gt_a"]) <= low_threshold
        )
    report = new_report(sys.argv[1:], seed, __version__)
    report["disentanglement"] = {
        "aleatoric_aggregator": kinds[0].value,
        "epistemic_aggregator": kinds[1].value,
        "cells": cells,
        "thresholds": {"low": low_threshold, "high": high_threshold},
        "disentangled": verdict,
    }
    _emit(report, output, fmt)
    if figures and output is not None:
        from . import plots

        plots.disentanglement_figure(cells, _figure_path(output, "disentanglement"))


@cli.command()
@click.option("--predictions", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--labels", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--bins", type=int, default=15, show_default=True)
@_aggregate_options
@_io_options
def sweep(predictions, labels, bins, aggregators, epsilon, output, fmt, figures, seed):
    """Per-severity metric rows (raw and random-predictor normalized)."""
    samples = _load_samples(predictions, labels)
    kinds = _resolve_kinds(aggregators, samples)
    correct, confidence = _correct_and_confidence(samples)
    severities = np.asarray([s.severity for s in samples], dtype=np.int64)
    scores = aggregate_batch(samples, kinds, eps=epsilon, mc_seed=seed)
    per_severity = {
        kind.value: severity_sweep(severities, scores[kind], correct, confidence, samples[0].n_classes, bins)
        for kind in kinds
    }
    report = new_report(sys.argv[1:], seed, __version__)
    report["per_severity"] = per_severity
    _emit(report, output, fmt)
    if figures and output is not None:
        from . import plots

        for kind in kinds:
            plots.severity_figure(per_severity[kind.value], _figure_path(output, f"severity_{kind.value}"))


_CORRELATE_COLUMNS = ("auroc_correctness", "auac", "e_aurc", "ece", "brier", "log_prob")


@cli.command()
@click.option("--predictions", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--labels", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--bins", type=int, default=15, show_default=True)
@click.option("--method", default="ensemble", show_default=True, help="Row label for this prediction source.")
@_aggregate_options
@_io_options
def correlate(predictions, labels, bins, method, aggregators, epsilon, output, fmt, figures, seed):
    """Metric-correlation matrices over a (method, aggregator) results table."""
    samples = _load_samples(predictions, labels)
    kinds = _resolve_kinds(aggregators, samples)
    correct, _ = _correct_and_confidence(samples)
    scores = aggregate_batch(samples, kinds, eps=epsilon, mc_seed=seed)
    table = ResultsTable(_CORRELATE_COLUMNS)
    for kind in kinds:
        u = scores[kind]
        curve = accuracy_coverage(u, correct)
        try:
            auroc_val = auroc(u, ~correct)
        except DegenerateTargets:
            auroc_val = None
        table.set_cell(method, kind, "auroc_correctness", auroc_val)
        table.set_cell(method, kind, "auac", curve.area)
        table.set_cell(method, kind, "e_aurc", e_aurc(u, correct))
        if kind in BOUNDED_KINDS:
            conf = 1.0 - u
            table.set_cell(method, kind, "ece", ece(conf, correct, bins))
            rules = scoring_rules(conf, correct, epsilon)
            table.set_cell(method, kind, "brier", rules["brier"])
            table.set_cell(method, kind, "log_prob", rules["log_prob"])
    core_columns = ["auroc_correctness", "auac", "e_aurc"]
    matrices = {
        "pearson": metric_correlation_matrix(table, "pearson", core_columns),
        "spearman": metric_correlation_matrix(table, "spearman", core_columns),
    }
    report = new_report(sys.argv[1:], seed, __version__)
    report["correlations"] = matrices
    _emit(report, output, fmt)
    if figures and output is not None:
        from . import plots

        for mode, matrix in matrices.items():
            plots.correlation_matrix_figure(matrix, _figure_path(output, f"correlation_{mode}"), title=mode)


@cli.command()
@click.option("--embeddings", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--labels", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--predictions", type=click.Path(exists=True, dir_okay=False), default=None, help="ID logits for temperature scaling (optional).")
@click.option("--classes", "n_classes", type=int, default=None, help="Class count (inferred from labels if omitted).")
@_io_options
def posthoc(embeddings, labels, predictions, n_classes, output, fmt, figures, seed):
    """Fit and score Mahalanobis and DDU densities; fit a temperature."""
    records = read_embeddings(_require(embeddings, "--embeddings"))
    label_records = read_labels(_require(labels, "--labels"))
    by_id = {r.id: r for r in label_records}
    for rec in records:
        if rec.id not in by_id:
            raise MissingInput(f"embedding id {rec.id} has no label record")
        rec.label = by_id[rec.id].label
        rec.ood = by_id[rec.id].ood
    id_records = [r for r in records if not r.ood]
    if not id_records:
        raise EmptyInput("no in-distribution embeddings to train on")
    flags = np.asarray([r.ood for r in records], dtype=bool)

    val_logits = val_labels = None
    if predictions is not None:
        batch = read_predictions(predictions)
        id_rows = [i for i, sid in enumerate(batch.ids) if sid in by_id and not by_id[sid].ood]
        if batch.logits is None:
            raise MissingInput("temperature scaling needs logit predictions, not dirichlet")
        val_logits = np.mean(batch.logits[id_rows], axis=1)
        val_labels = np.asarray([by_id[batch.ids[i]].label for i in id_rows], dtype=np.int64)

    metrics: Dict = {"mahalanobis_ood_auroc": None, "ddu_ood_auroc": None, "temperature": None}
    if flags.any():
        maha = fit_mahalanobis(id_records, records, n_classes)
        maha_scores = np.asarray([score_mahalanobis(maha, r) for r in records])
        metrics["mahalanobis_ood_auroc"] = auroc(maha_scores, flags)
        ddu = fit_ddu(id_records, val_logits, val_labels, n_classes)
        ddu_scores = np.asarray([score_ddu(ddu, r.layers[-1]) for r in records])
        metrics["ddu_ood_auroc"] = auroc(ddu_scores, flags)
        metrics["temperature"] = ddu.temperature
    else:
        ddu = fit_ddu(id_records, val_logits, val_labels, n_classes)
        metrics["temperature"] = ddu.temperature
    report = new_report(sys.argv[1:], seed, __version__)
    report["metrics"] = metrics
    _emit(report, output, fmt)


def main(argv: Optional[Sequence[str]] = None) -> None:
    try:
        cli.main(args=argv, standalone_mode=False)
    except UntangleError as exc:
        click.echo(f"{type(exc).__name__}: {exc}", err=True)
        sys.exit(exc.exit_code)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except click.ClickException as exc:
        click.echo(f"UsageError: {exc.format_message()}", err=True)
        sys.exit(MissingInput.exit_code)
    except click.exceptions.Abort:
        sys.exit(130)


if __name__ == "__main__":
    main()
