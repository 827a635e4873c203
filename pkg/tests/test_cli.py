import json
import subprocess

import pytest

CLI = "untangle-eval"


def run(*args, cwd=None, env=None):
    return subprocess.run([CLI, *map(str, args)], capture_output=True, text=True, cwd=cwd, env=env)


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli_data")
    res = run(
        "simulate",
        "--n", 300, "--classes", 5, "--members", 4,
        "--severity-levels", "0,2",
        "--seed", 11,
        "--predictions", root / "p.bin",
        "--labels", root / "l.jsonl",
        "--embeddings", root / "e.bin",
    )
    assert res.returncode == 0, res.stderr
    return root


def _load(path):
    return json.loads(path.read_text())


def test_eval_report_schema(dataset, tmp_path):
    out = tmp_path / "rep.json"
    res = run("eval", "--predictions", dataset / "p.bin", "--labels", dataset / "l.jsonl", "--output", out)
    assert res.returncode == 0, res.stderr
    report = _load(out)
    assert report["schema_version"] == 1
    assert report["config"]["invocation"][0] == "eval"
    assert 0.0 <= report["metrics"]["accuracy"] <= 1.0
    per_agg = report["metrics"]["per_aggregator"]
    assert "pu_it" in per_agg and "au_b" in per_agg
    assert per_agg["one_minus_max_bma"]["ece"] is not None
    assert per_agg["pu_it"]["ece"] is None  # unbounded aggregator: no calibration metrics


def test_eval_stdout_when_no_output(dataset):
    res = run("eval", "--predictions", dataset / "p.bin", "--labels", dataset / "l.jsonl")
    assert res.returncode == 0
    assert json.loads(res.stdout)["schema_version"] == 1


def test_missing_labels_is_usage_error(dataset):
    res = run("eval", "--predictions", dataset / "p.bin")
    assert res.returncode == 2
    assert res.stderr.strip().splitlines()[-1].startswith("MissingInput:")


def test_unknown_aggregator_exit_code(dataset):
    res = run("eval", "--predictions", dataset / "p.bin", "--labels", dataset / "l.jsonl", "--aggregator", "bogus")
    assert res.returncode == 13
    assert res.stderr.strip().startswith("UnknownKind:")


def test_bad_file_exit_code(dataset, tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"id": "0", "logits": [[0.0, 1.0]], "dirichlet": [1.0, 1.0]}\n')
    res = run("eval", "--predictions", bad, "--labels", dataset / "l.jsonl")
    assert res.returncode == 23


def test_aggregate_per_sample_scores(dataset, tmp_path):
    out = tmp_path / "agg.json"
    res = run(
        "aggregate", "--predictions", dataset / "p.bin", "--labels", dataset / "l.jsonl",
        "--aggregator", "pu_it", "--aggregator", "eu_b", "--output", out,
    )
    assert res.returncode == 0
    rows = _load(out)["per_sample"]
    assert len(rows) == 300
    assert set(rows[0]["scores"]) == {"pu_it", "eu_b"}


def test_gt_aggregators_excluded_with_warning(tmp_path):
    res = run(
        "simulate", "--n", 20, "--classes", 3, "--members", 2, "--seed", 1,
        "--predictions", tmp_path / "p.bin", "--labels", tmp_path / "l.jsonl",
    )
    assert res.returncode == 0
    # Strip votes so no soft labels are available.
    lines = [json.loads(l) for l in (tmp_path / "l.jsonl").read_text().splitlines()]
    for obj in lines:
        obj.pop("votes")
    (tmp_path / "l.jsonl").write_text("\n".join(json.dumps(o) for o in lines) + "\n")
    out = tmp_path / "agg.json"
    res = run("aggregate", "--predictions", tmp_path / "p.bin", "--labels", tmp_path / "l.jsonl", "--output", out)
    assert res.returncode == 0
    assert "excluding aggregators" in res.stderr
    scores = _load(out)["per_sample"][0]["scores"]
    assert "pu_b" not in scores and "pu_it" in scores


def test_decompose_sections(dataset, tmp_path):
    out = tmp_path / "dec.json"
    res = run("decompose", "--predictions", dataset / "p.bin", "--labels", dataset / "l.jsonl", "--output", out)
    assert res.returncode == 0
    row = _load(out)["per_sample"][0]
    assert set(row["it"]) == {"predictive", "aleatoric", "epistemic"}
    assert row["bregman"]["aleatoric_gt"] is not None


def test_ood_split_by_flags(dataset, tmp_path):
    out = tmp_path / "ood.json"
    res = run("ood", "--predictions", dataset / "p.bin", "--labels", dataset / "l.jsonl", "--output", out)
    assert res.returncode == 0
    metrics = _load(out)["metrics"]
    assert metrics["n_id"] == metrics["n_ood"] > 0
    assert all(v is None or 0.0 <= v <= 1.0 for v in metrics["ood_auroc"].values())


def test_aleatoric_metrics(dataset, tmp_path):
    out = tmp_path / "alea.json"
    res = run("aleatoric", "--predictions", dataset / "p.bin", "--labels", dataset / "l.jsonl", "--output", out)
    assert res.returncode == 0
    metrics = _load(out)["metrics"]
    assert set(metrics) == {"spearman_gt_aleatoric", "ambiguity_auroc"}


def test_disentangle_section(dataset, tmp_path):
    out = tmp_path / "dis.json"
    res = run("disentangle", "--predictions", dataset / "p.bin", "--labels", dataset / "l.jsonl", "--output", out)
    assert res.returncode == 0
    section = _load(out)["disentanglement"]
    assert set(section["cells"]) == {"corr_ua_ue", "corr_ua_gt_a", "corr_ue_proxy_e", "corr_ua_proxy_e", "corr_ue_gt_a"}
    assert section["thresholds"] == {"low": 0.3, "high": 0.7}
    assert section["disentangled"] in (True, False, None)


def test_sweep_rows_per_severity(dataset, tmp_path):
    out = tmp_path / "sweep.json"
    res = run(
        "sweep", "--predictions", dataset / "p.bin", "--labels", dataset / "l.jsonl",
        "--aggregator", "pu_it", "--output", out,
    )
    assert res.returncode == 0
    rows = _load(out)["per_severity"]["pu_it"]
    assert [r["severity"] for r in rows] == [0, 2]


def test_correlate_matrices(dataset, tmp_path):
    out = tmp_path / "corr.json"
    res = run("correlate", "--predictions", dataset / "p.bin", "--labels", dataset / "l.jsonl", "--output", out)
    assert res.returncode == 0
    matrices = _load(out)["correlations"]
    for mode in ("pearson", "spearman"):
        assert matrices[mode]["metrics"] == ["auroc_correctness", "auac", "e_aurc"]
        assert matrices[mode]["values"][0][0] == 1.0


def test_posthoc_metrics(dataset, tmp_path):
    out = tmp_path / "ph.json"
    res = run(
        "posthoc", "--embeddings", dataset / "e.bin", "--labels", dataset / "l.jsonl",
        "--predictions", dataset / "p.bin", "--output", out,
    )
    assert res.returncode == 0
    metrics = _load(out)["metrics"]
    assert metrics["mahalanobis_ood_auroc"] is not None
    assert metrics["ddu_ood_auroc"] is not None
    assert 0.1 <= metrics["temperature"] <= 10.1


def test_csv_format(dataset, tmp_path):
    out = tmp_path / "rep.csv"
    res = run("eval", "--predictions", dataset / "p.bin", "--labels", dataset / "l.jsonl",
              "--aggregator", "pu_it", "--format", "csv", "--output", out)
    assert res.returncode == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "key,value"
    assert any(line.startswith("metrics.accuracy,") for line in lines)


def test_figures_rendered_next_to_output(dataset, tmp_path):
    out = tmp_path / "rep.json"
    res = run("eval", "--predictions", dataset / "p.bin", "--labels", dataset / "l.jsonl",
              "--aggregator", "one_minus_max_bma", "--figures", "--output", out)
    assert res.returncode == 0
    assert (tmp_path / "rep_coverage_one_minus_max_bma.png").exists()
    assert (tmp_path / "rep_reliability_one_minus_max_bma.png").exists()


def test_reports_byte_identical_across_runs(dataset, tmp_path):
    out = tmp_path / "rep.json"
    args = ("eval", "--predictions", dataset / "p.bin", "--labels", dataset / "l.jsonl",
            "--aggregator", "eu_it", "--seed", 4, "--output", out)
    assert run(*args).returncode == 0
    first = out.read_bytes()
    assert run(*args).returncode == 0
    assert out.read_bytes() == first
