import csv
import json
import math

import numpy as np
import pytest

from gdr2.dataset import Dataset, write_dataset_csv
from gdr2.errors import ConfigurationError
from gdr2.harness.cli import main
from gdr2.harness.config import (
    build_prior,
    config_hash,
    load_config,
    normalized_dump,
    parse_config,
    prior_alpha,
)
from gdr2.harness.study import METRIC_COLUMNS, elpd_table, run_case_study, run_simulation_study
from gdr2.matching import kl_match
from gdr2.simplex import Dirichlet

TINY_SAMPLER = {"n_warmup": 150, "n_draws": 30, "n_chains": 1}
TINY_GRID = {"N": [20], "K": [3], "regime": [{"kind": "fixed", "signal": 2.0, "n_head": 1, "n_tail": 0}]}


def tiny(**extra):
    doc = {"scenarios": TINY_GRID, "priors": [{"label": "LNS"}], "n_test": 10, "sampler": TINY_SAMPLER}
    doc.update(extra)
    return doc


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# config -----------------------------------------------------------------------


def test_minimal_config_defaults():
    cfg = load_config({"priors": [{"label": "Dir"}]})
    spec = cfg.priors[0]
    assert (spec.r2_mean, spec.r2_precision) == (0.5, 1.0)
    assert spec.a_pi == 0.5 and spec.name == "Dir"
    assert cfg.sampler.n_chains == 4 and cfg.rhat_threshold == 1.05


def test_config_round_trip(tmp_path):
    cfg = load_config(tiny(priors=[{"label": "Dir", "alpha": "informative"}, {"label": "LNF", "name": "full"}]))
    path = tmp_path / "c.json"
    path.write_text(normalized_dump(cfg))
    again = parse_config(path)
    assert again == cfg
    assert normalized_dump(again) == normalized_dump(cfg)
    assert config_hash(again) == config_hash(cfg)


def test_config_rejections(tmp_path):
    with pytest.raises(ConfigurationError, match="a_pi"):
        load_config({"priors": [{"label": "Dir", "a_pi": 0}]})
    with pytest.raises(ConfigurationError, match="unknown keys: priors.0.colour, typo"):
        load_config({"priors": [{"label": "Dir", "colour": 1}], "typo": 2})
    with pytest.raises(ConfigurationError, match="unique"):
        load_config({"priors": [{"label": "Dir"}, {"label": "Dir"}]})
    with pytest.raises(ConfigurationError):
        load_config({"priors": []})
    with pytest.raises(ConfigurationError, match="n_warmup"):
        load_config({"priors": [{"label": "Dir"}], "sampler": {"n_warmup": 50}})
    (tmp_path / "bad.json").write_text("{\n  'x': 1\n}")
    with pytest.raises(ConfigurationError, match="bad.json:2"):
        parse_config(tmp_path / "bad.json")


def test_config_hash_ignores_output_dir():
    a = load_config(tiny(output_dir="one"))
    b = load_config(tiny(output_dir="two"))
    assert config_hash(a) == config_hash(b)
    assert config_hash(a) != config_hash(load_config(tiny(seed=1)))


def test_build_prior_examples():
    lns = build_prior("LNS", np.full(3, 0.5), 3)
    np.testing.assert_allclose(np.diag(lns.sigma), np.pi**2, rtol=1e-12)
    np.testing.assert_array_equal(lns.sigma - np.diag(np.diag(lns.sigma)), 0.0)
    alpha = np.array([0.3, 2.0, 7.0])
    d = build_prior("Dir", alpha, 3)
    assert isinstance(d, Dirichlet) and np.array_equal(d.alpha, alpha)
    with pytest.raises(ConfigurationError):
        build_prior("Horseshoe", alpha, 3)


def test_informative_alpha_orders_mu():
    cfg = load_config({"priors": [{"label": "LNF", "alpha": "informative"}]})
    truth = np.array([3.0, 0.0, 0.0, 3.0, 0.0])
    alpha = prior_alpha(cfg.priors[0], 5, truth)
    np.testing.assert_array_equal(alpha, [10.0, 0.5, 0.5, 10.0, 0.5])
    mu = kl_match(alpha).mu_star
    # reference is the last (noise) component; signal log-ratios are positive
    assert mu[0] > 0 and mu[3] > 0 and mu[0] == pytest.approx(mu[3])
    assert mu[1] == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ConfigurationError):
        prior_alpha(cfg.priors[0], 5)


# studies ---------------------------------------------------------------------


def test_single_fit_study(tmp_path):
    manifest = run_simulation_study(load_config(tiny()), out_dir=tmp_path)
    rows = read_csv(tmp_path / "metrics.csv")
    assert len(rows) == 1
    assert list(rows[0]) == METRIC_COLUMNS
    assert float(rows[0]["delta_elpd"]) == 0.0
    assert manifest["n_fits"] == 1
    on_disk = json.loads((tmp_path / "manifest.json").read_text())
    assert on_disk["config_hash"] == manifest["config_hash"]
    assert (tmp_path / "summary.csv").exists() and (tmp_path / "config.normalized.json").exists()


def test_study_deltas_and_determinism(tmp_path):
    doc = tiny(priors=[{"label": "Dir"}, {"label": "LNS"}], replications=2, save_draws=True)
    run_simulation_study(load_config(doc), out_dir=tmp_path / "a")
    run_simulation_study(load_config(doc), out_dir=tmp_path / "b", threads=2)
    a = (tmp_path / "a" / "metrics.csv").read_bytes()
    assert a == (tmp_path / "b" / "metrics.csv").read_bytes()
    assert (tmp_path / "a" / "summary.csv").read_bytes() == (tmp_path / "b" / "summary.csv").read_bytes()
    rows = read_csv(tmp_path / "a" / "metrics.csv")
    assert len(rows) == 4
    for rep in ("0", "1"):
        grp = [r for r in rows if r["replication"] == rep]
        for metric in ("elpd", "rmse_all", "rmse_zero", "rmse_nonzero"):
            deltas = [float(r[f"delta_{metric}"]) for r in grp]
            assert 0.0 in deltas
            values = [float(r[metric]) for r in grp]
            best = max(values) if metric == "elpd" else min(values)
            for v, d in zip(values, deltas):
                assert d == pytest.approx(v - best, abs=1e-12)
    assert len(list((tmp_path / "a" / "draws").glob("*.csv"))) == 4


@pytest.fixture(scope="module")
def case_csv(tmp_path_factory):
    rng = np.random.default_rng(4)
    X = rng.standard_normal((24, 3))
    X[:3, 2] = 0.0
    X[3:, 2] = 0.0
    X[0, 2] = 1.0  # constant except for one row: sometimes constant in training
    y = 1.0 + X[:, 0] + 0.3 * rng.standard_normal(24)
    path = tmp_path_factory.mktemp("case") / "data.csv"
    write_dataset_csv(Dataset(X[:, :3], y), path)
    return path


def test_case_study_identical_priors(case_csv, tmp_path):
    doc = tiny(priors=[{"label": "Dir", "name": "a"}, {"label": "Dir", "name": "b"}])
    doc["case_study"] = {"n_splits": 3}
    manifest = run_case_study(case_csv, load_config(doc), out_dir=tmp_path)
    per_split = read_csv(tmp_path / "case_elpd.csv")
    assert len(per_split) == 6
    assert sum(r["prior"] == "a" for r in per_split) == 3
    table = read_csv(tmp_path / "case_table.csv")
    for row in table:
        assert float(row["elpd_diff"]) == 0.0 and float(row["se_diff"]) == 0.0
        assert row["n_splits"] == "3"
    assert manifest["n_splits"] == 3


def test_elpd_table_orders_best_first():
    table = elpd_table({"x": np.array([1.0, 2.0]), "y": np.array([3.0, 2.5])})
    assert [r["prior"] for r in table] == ["y", "x"]
    assert table[0]["elpd_diff"] == 0.0
    assert table[1]["elpd_diff"] == pytest.approx(-2.5)
    assert table[1]["se_diff"] == pytest.approx(math.sqrt(2 * np.var([-2.0, -0.5], ddof=1)))


# command line --------------------------------------------------------------------


def test_cli_usage_errors(capsys):
    assert main([]) == 1
    assert main(["simulate"]) == 1
    assert main(["bogus"]) == 1
    assert main(["match", "--alpha", "1,x"]) == 1
    assert main(["match", "--a-pi", "0.5"]) == 1
    assert main(["report", "x", "--threads", "0"]) == 1


def test_cli_match(tmp_path, capsys):
    assert main(["match", "--a-pi", "1", "-K", "3", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "match.json").read_text())
    assert doc["alpha"] == [1.0, 1.0, 1.0]
    np.testing.assert_allclose(doc["mu_star"], 0.0, atol=1e-12)
    printed = json.loads(capsys.readouterr().out)
    assert printed == doc
    assert main(["match", "--alpha", "1,-1"]) == 1


def test_cli_data_errors(tmp_path):
    (tmp_path / "bad.csv").write_text("y,x1,x2\n1,2\n")
    assert main(["fit", str(tmp_path / "bad.csv"), "--out", str(tmp_path / "o")]) == 2
    assert main(["fit", str(tmp_path / "missing.csv")]) == 2
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"priors": [{"label": "Dir", "a_pi": -1}]}))
    assert main(["simulate", "--config", str(cfg)]) == 1


def test_cli_end_to_end(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(tiny(output_dir=str(tmp_path / "run"), save_draws=True)))
    assert main(["simulate", "--config", str(cfg), "--seed", "3"]) == 0
    run = tmp_path / "run"
    assert json.loads((run / "manifest.json").read_text())["seed"] == 3
    assert main(["report", str(run), "--out", str(tmp_path / "rep")]) == 0
    assert (tmp_path / "rep" / "summary.csv").exists()

    rng = np.random.default_rng(0)
    X = rng.standard_normal((20, 3))
    write_dataset_csv(Dataset(X, X[:, 0] + rng.standard_normal(20)), tmp_path / "d.csv")
    assert main(["fit", str(tmp_path / "d.csv"), "--config", str(cfg), "--prior", "Dir", "--out", str(tmp_path / "fit")]) == 0
    fit = tmp_path / "fit"
    for name in ("draws.csv", "fit_summary.json", "config.normalized.json", "manifest.json"):
        assert (fit / name).exists()
    assert json.loads((fit / "fit_summary.json").read_text())["prior"] == "Dir"
    args = ["metrics", "--draws", str(fit / "draws.csv"), "--test", str(tmp_path / "d.csv"), "--out", str(tmp_path / "m")]
    assert main(args) == 0
    lines = (tmp_path / "m" / "metrics.csv").read_text().splitlines()
    assert lines[0] == "metric,value" and lines[1].startswith("elpd,")
    case = tmp_path / "case.json"
    case.write_text(json.dumps(tiny(case_study={"n_splits": 2})))
    assert main(["case-study", str(tmp_path / "d.csv"), "--config", str(case), "--out", str(tmp_path / "cs")]) == 0
    assert len(read_csv(tmp_path / "cs" / "case_elpd.csv")) == 2
