"""Simulation-study and case-study orchestration with CSV/JSON reports."""
from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .. import __version__
from ..dataset import Dataset, read_dataset_csv
from ..datagen import FixedCoefficients, SimScenario, gen_dataset
from ..draws import write_draws
from ..errors import ConfigurationError, DataError, SamplingError
from ..metrics import delta_metric, elpd_diff_se, metric_report
from .config import StudyConfig, config_hash, load_config, make_regressor, normalized_dump, prior_alpha

__all__ = [
    "METRIC_COLUMNS",
    "METRIC_DIRECTIONS",
    "run_simulation_study",
    "run_case_study",
    "write_report",
    "prepare_output_dir",
]

logger = logging.getLogger(__name__)

METRIC_DIRECTIONS = {"elpd": "higher", "rmse_all": "lower", "rmse_zero": "lower", "rmse_nonzero": "lower"}
METRIC_COLUMNS = [
    "config_hash",
    "scenario",
    "N",
    "K",
    "rho_x",
    "regime",
    "target_r2",
    "replication",
    "prior",
    *METRIC_DIRECTIONS,
    *(f"delta_{m}" for m in METRIC_DIRECTIONS),
    "max_rhat",
    "min_ess",
    "n_divergent",
    "flagged",
    "status",
]
CASE_COLUMNS = ["config_hash", "split", "prior", "elpd", "max_rhat", "n_divergent", "flagged", "status", "n_dropped"]


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def _write_csv(path: Path, columns, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])


def _derived_seed(*words) -> int:
    return int(np.random.SeedSequence([int(w) for w in words]).generate_state(1, np.uint64)[0] >> np.uint64(1))


def prepare_output_dir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".gdr2_write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ConfigurationError(f"output directory {out} is not writable: {exc.strerror}") from None
    return out


def _regime_label(regime) -> str:
    if isinstance(regime, FixedCoefficients):
        return f"fixed(b={regime.signal:g},head={regime.n_head},tail={regime.n_tail})"
    return f"simulated({regime.cov_kind},sd={regime.sd_b:g},v={regime.sparsity:g})"


def _fit_one(model, train: Dataset, rhat_threshold: float):
    try:
        model.fit(train.X, train.y)
    except SamplingError as exc:
        logger.error("fit failed: %s", exc)
        return None, {"max_rhat": math.nan, "min_ess": math.nan, "n_divergent": -1, "flagged": True, "status": "failed"}
    d = model.diagnostics_
    flagged = bool(d["n_divergent"] > 0 or not d["max_rhat"] <= rhat_threshold)
    if flagged:
        logger.info("fit flagged: %d divergences, max R-hat %.4f", d["n_divergent"], d["max_rhat"])
    return model, {
        "max_rhat": d["max_rhat"],
        "min_ess": d["min_ess"],
        "n_divergent": d["n_divergent"],
        "flagged": flagged,
        "status": "flagged" if flagged else "ok",
    }


# simulation study ---------------------------------------------------------


def _simulation_task(args):
    doc, scen_idx, rep, out_dir = args
    config = load_config(doc)
    scenario: SimScenario = config.scenarios.expand()[scen_idx]
    started = time.perf_counter()
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, scen_idx, rep]))
    train, test, truth = gen_dataset(scenario, config.n_test, rng)
    fit_seed = _derived_seed(config.seed, scen_idx, rep, 1)
    chash = config_hash(config)
    base = {
        "config_hash": chash,
        "scenario": scen_idx,
        "N": scenario.N,
        "K": scenario.K,
        "rho_x": scenario.rho_x,
        "regime": _regime_label(scenario.regime),
        "target_r2": scenario.target_r2,
        "replication": rep,
    }
    per_prior = {}
    for spec in config.priors:
        alpha = prior_alpha(spec, scenario.K, truth.b)
        model, diag = _fit_one(make_regressor(spec, config.sampler, alpha, fit_seed), train, config.rhat_threshold)
        if model is None:
            values = {m: math.nan for m in METRIC_DIRECTIONS}
        else:
            rep_ = metric_report(test, model.draws_, truth.b)
            values = {m: rep_[m] for m in METRIC_DIRECTIONS}
            if out_dir is not None:
                write_draws(model.draws_, Path(out_dir) / f"draws_s{scen_idx}_r{rep}_{spec.name}.csv")
        per_prior[spec.name] = (values, diag)
    deltas = {}
    for metric, better in METRIC_DIRECTIONS.items():
        usable = {
            name: vals[metric]
            for name, (vals, diag) in per_prior.items()
            if diag["status"] != "failed" and np.isfinite(vals[metric])
        }
        deltas[metric] = delta_metric(usable, better) if usable else {}
    rows = []
    for name, (vals, diag) in per_prior.items():
        row = {**base, "prior": name, **vals}
        row.update({f"delta_{m}": deltas[m].get(name, math.nan) for m in METRIC_DIRECTIONS})
        rows.append({**row, **diag})
    return rows, time.perf_counter() - started


def _run_tasks(fn, tasks, threads: int):
    if threads <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, tasks))


def run_simulation_study(config: StudyConfig, threads: int = 1, out_dir=None) -> dict:
    """Generate data, fit every prior, and write metrics, summary and manifest files.

    Returns the manifest. Output files are a deterministic function of the
    config (the manifest's timings excepted) regardless of ``threads``.
    """
    out = prepare_output_dir(out_dir if out_dir is not None else config.output_dir)
    chash = config_hash(config)
    (out / "config.normalized.json").write_text(normalized_dump(config))
    draws_dir = None
    if config.save_draws:
        draws_dir = out / "draws"
        draws_dir.mkdir(exist_ok=True)
    doc = config.model_dump(mode="json")
    n_scen = len(config.scenarios.expand())
    tasks = [
        (doc, s, r, None if draws_dir is None else str(draws_dir))
        for s in range(n_scen)
        for r in range(config.replications)
    ]
    started = time.perf_counter()
    results = _run_tasks(_simulation_task, tasks, threads)
    rows = [row for task_rows, _ in results for row in task_rows]
    _write_csv(out / "metrics.csv", METRIC_COLUMNS, rows)
    summary_path = write_report(out / "metrics.csv", out)
    fits = rows
    manifest = {
        "config_hash": chash,
        "seed": config.seed,
        "software_version": __version__,
        "command": "simulate",
        "n_tasks": len(tasks),
        "n_fits": len(fits),
        "n_flagged": sum(r["status"] == "flagged" for r in fits),
        "n_failed": sum(r["status"] == "failed" for r in fits),
        "artifacts": {
            "config": "config.normalized.json",
            "metrics": "metrics.csv",
            "summary": summary_path.name,
            "draws": None if draws_dir is None else "draws",
        },
        "timings": {
            "total_seconds": time.perf_counter() - started,
            "task_seconds": [t for _, t in results],
        },
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest


def _read_rows(path: Path):
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            rows = list(reader)
            header = reader.fieldnames or []
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    missing = {"scenario", "prior", "status", *METRIC_DIRECTIONS} - set(header)
    if missing:
        raise DataError(f"{path}: not a metrics file (missing {sorted(missing)})")
    return rows


SUMMARY_COLUMNS = [
    "scenario",
    "prior",
    "metric",
    "n",
    "n_flagged",
    "value_median",
    "delta_q25",
    "delta_median",
    "delta_q75",
    "delta_mean",
]


def write_report(metrics_path, out_dir) -> Path:
    """Per scenario, prior and metric quantiles of the values and Δ-metrics.

    Flagged fits are included; failed fits are not.
    """
    rows = _read_rows(Path(metrics_path))
    groups: dict = {}
    for row in rows:
        groups.setdefault((int(row["scenario"]), row["prior"]), []).append(row)
    summary = []
    for (scen, prior), grp in groups.items():
        ok = [r for r in grp if r["status"] != "failed"]
        for metric in METRIC_DIRECTIONS:
            values = np.array([float(r[metric]) for r in ok])
            deltas = np.array([float(r[f"delta_{metric}"]) for r in ok])
            values, deltas = values[np.isfinite(values)], deltas[np.isfinite(deltas)]
            q = np.quantile(deltas, [0.25, 0.5, 0.75]) if deltas.size else [math.nan] * 3
            summary.append(
                {
                    "scenario": scen,
                    "prior": prior,
                    "metric": metric,
                    "n": len(ok),
                    "n_flagged": sum(r["status"] == "flagged" for r in grp),
                    "value_median": float(np.median(values)) if values.size else math.nan,
                    "delta_q25": float(q[0]),
                    "delta_median": float(q[1]),
                    "delta_q75": float(q[2]),
                    "delta_mean": float(deltas.mean()) if deltas.size else math.nan,
                }
            )
    path = Path(out_dir) / "summary.csv"
    _write_csv(path, SUMMARY_COLUMNS, summary)
    return path


# case study ---------------------------------------------------------------


def _case_task(args):
    doc, dataset_doc, split = args
    config = load_config(doc)
    X = np.asarray(dataset_doc["X"])
    y = np.asarray(dataset_doc["y"])
    names = dataset_doc["names"]
    cs = config.case_study
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, split]))
    perm = rng.permutation(len(y))
    n_train = int(round(cs.train_fraction * len(y)))
    if not 2 <= n_train < len(y):
        raise DataError(f"train fraction {cs.train_fraction} leaves no usable train/test split for N={len(y)}")
    tr, te = perm[:n_train], perm[n_train:]
    # drop covariates that are constant in this training split
    keep = np.flatnonzero(X[tr].std(axis=0) > 0.0)
    dropped = [names[k] for k in range(X.shape[1]) if k not in set(keep.tolist())]
    if dropped:
        logger.info("split %d: dropping constant training column(s) %s", split, ", ".join(dropped))
    K = keep.size
    if K < 2:
        raise DataError(f"split {split}: fewer than two non-constant covariates")
    X_tr, X_te = X[np.ix_(tr, keep)], X[np.ix_(te, keep)]
    fit_seed = _derived_seed(config.seed, split, 1)
    chash = config_hash(config)
    rows = []
    for spec in config.priors:
        alpha = prior_alpha(spec, K)
        model, diag = _fit_one(make_regressor(spec, config.sampler, alpha, fit_seed), Dataset(X_tr, y[tr]), config.rhat_threshold)
        value = math.nan if model is None else float(np.sum(model.log_predictive_density(X_te, y[te])))
        rows.append(
            {
                "config_hash": chash,
                "split": split,
                "prior": spec.name,
                "elpd": value,
                "max_rhat": diag["max_rhat"],
                "n_divergent": diag["n_divergent"],
                "flagged": diag["flagged"],
                "status": diag["status"],
                "n_dropped": len(dropped),
            }
        )
    return rows


TABLE_COLUMNS = ["prior", "elpd_total", "elpd_diff", "se_diff", "n_splits"]


def elpd_table(per_split: dict) -> list[dict]:
    """Totals and pairwise differences against the best prior, best first.

    ``per_split`` maps prior name to its vector of per-split ELPD values.
    """
    totals = {name: float(np.sum(v)) for name, v in per_split.items()}
    order = sorted(totals, key=lambda n: -totals[n])
    best = order[0]
    table = []
    for name in order:
        diff, se = elpd_diff_se(per_split[name], per_split[best])
        table.append({"prior": name, "elpd_total": totals[name], "elpd_diff": diff, "se_diff": se, "n_splits": len(per_split[name])})
    return table


def run_case_study(dataset_path, config: StudyConfig, threads: int = 1, out_dir=None) -> dict:
    """Repeated random train/test splits of a CSV dataset; per-split ELPD of every prior."""
    out = prepare_output_dir(out_dir if out_dir is not None else config.output_dir)
    data = read_dataset_csv(dataset_path, response=config.case_study.response)
    for spec in config.priors:
        if spec.alpha == "informative":
            raise ConfigurationError(f"prior {spec.name!r}: informative alpha needs simulated ground truth")
    chash = config_hash(config)
    (out / "config.normalized.json").write_text(normalized_dump(config))
    doc = config.model_dump(mode="json")
    dataset_doc = {"X": data.X.tolist(), "y": data.y.tolist(), "names": list(data.feature_names)}
    tasks = [(doc, dataset_doc, r) for r in range(config.case_study.n_splits)]
    started = time.perf_counter()
    rows = [row for task_rows in _run_tasks(_case_task, tasks, threads) for row in task_rows]
    _write_csv(out / "case_elpd.csv", CASE_COLUMNS, rows)
    failed_splits = {r["split"] for r in rows if r["status"] == "failed"}
    per_split = {}
    for spec in config.priors:
        per_split[spec.name] = np.array(
            [r["elpd"] for r in rows if r["prior"] == spec.name and r["split"] not in failed_splits]
        )
    table = elpd_table(per_split) if all(v.size for v in per_split.values()) else []
    _write_csv(out / "case_table.csv", TABLE_COLUMNS, table)
    manifest = {
        "config_hash": chash,
        "seed": config.seed,
        "software_version": __version__,
        "command": "case-study",
        "dataset": str(dataset_path),
        "n_splits": config.case_study.n_splits,
        "n_failed_splits": len(failed_splits),
        "n_flagged": sum(r["status"] == "flagged" for r in rows),
        "artifacts": {"config": "config.normalized.json", "per_split": "case_elpd.csv", "table": "case_table.csv"},
        "timings": {"total_seconds": time.perf_counter() - started},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest
