"""``gdr2`` command line tool.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 sampling failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .. import __version__
from ..dataset import GroundTruth, read_dataset_csv
from ..draws import read_draws, write_draws
from ..errors import DataError, DegenerateError, DomainError, NumericalError, ParameterError, SamplingError
from ..matching import kl_match
from ..metrics import metric_report
from .config import PriorSpec, SamplerSettings, StudyConfig, load_config, make_regressor, normalized_dump, parse_config, prior_alpha
from .study import prepare_output_dir, run_case_study, run_simulation_study, write_report

__all__ = ["main", "build_parser", "EXIT_OK", "EXIT_USAGE", "EXIT_DATA", "EXIT_SAMPLING"]

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_SAMPLING = 0, 1, 2, 3

logger = logging.getLogger("gdr2")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="study configuration (JSON)")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--out", help="output directory")
    common.add_argument("--threads", type=int, default=1, help="worker processes (default 1)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="gdr2", description="GDR2 shrinkage-prior regression tools.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("simulate", parents=[common], help="run a simulation study")

    p = sub.add_parser("fit", parents=[common], help="fit one prior to a CSV dataset and write draws")
    p.add_argument("data", help="CSV with a response column and numeric covariates")
    p.add_argument("--prior", choices=["Dir", "LNF", "LNS"], help="decomposition (default: first configured prior)")
    p.add_argument("--a-pi", type=float, help="symmetric concentration")

    p = sub.add_parser("match", parents=[common], help="logistic-normal parameters matched to a Dirichlet")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--alpha", help="comma separated concentration vector")
    group.add_argument("--a-pi", type=float, help="symmetric concentration (requires -K)")
    p.add_argument("-K", type=int, help="number of components for --a-pi")

    p = sub.add_parser("case-study", parents=[common], help="repeated train/test splits of a CSV dataset")
    p.add_argument("data", help="CSV dataset")

    p = sub.add_parser("metrics", parents=[common], help="ELPD and RMSE of saved draws on a test set")
    p.add_argument("--draws", required=True, help="draws CSV")
    p.add_argument("--test", required=True, help="test dataset CSV")
    p.add_argument("--truth", help="ground-truth JSON (enables RMSE)")
    p.add_argument("--response", default="y")

    p = sub.add_parser("report", parents=[common], help="summary CSVs from a study directory")
    p.add_argument("run_dir", help="directory holding metrics.csv")
    return parser


def _config(args, required=True) -> StudyConfig:
    if args.config is None:
        if required:
            raise _UsageError(f"gdr2 {args.command}: --config is required")
        config = load_config({"priors": [{"label": "LNS"}]})
    else:
        config = parse_config(args.config)
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.out is not None:
        updates["output_dir"] = args.out
    if updates:
        config = load_config({**config.model_dump(mode="json"), **updates})
    return config


def _cmd_simulate(args) -> int:
    manifest = run_simulation_study(_config(args), threads=args.threads)
    print(json.dumps({k: manifest[k] for k in ("config_hash", "n_fits", "n_flagged", "n_failed")}))
    return EXIT_SAMPLING if manifest["n_failed"] else EXIT_OK


def _cmd_case_study(args) -> int:
    manifest = run_case_study(args.data, _config(args), threads=args.threads)
    print(json.dumps({k: manifest[k] for k in ("config_hash", "n_splits", "n_failed_splits", "n_flagged")}))
    return EXIT_SAMPLING if manifest["n_failed_splits"] else EXIT_OK


def _cmd_fit(args) -> int:
    config = _config(args, required=False)
    spec = config.priors[0]
    update = {}
    if args.prior is not None:
        update["label"], update["name"] = args.prior, args.prior
    if args.a_pi is not None:
        update["a_pi"], update["alpha"] = args.a_pi, "symmetric"
    if update:
        spec = PriorSpec.model_validate({**spec.model_dump(), **update})
    data = read_dataset_csv(args.data, response=config.case_study.response)
    out = prepare_output_dir(config.output_dir)
    model = make_regressor(spec, config.sampler, prior_alpha(spec, data.K), config.seed)
    model.fit(data.X, data.y)
    write_draws(model.draws_, out / "draws.csv")
    (out / "config.normalized.json").write_text(normalized_dump(config))
    d = model.diagnostics_
    summary = {
        "prior": spec.name,
        "seed": config.seed,
        "feature_names": list(data.feature_names),
        "intercept": model.intercept_,
        "coef": model.coef_.tolist(),
        "max_rhat": d["max_rhat"],
        "min_ess": d["min_ess"],
        "n_divergent": d["n_divergent"],
        "step_size": [float(e) for e in model.adaptation_.step_size],
    }
    (out / "fit_summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    manifest = {
        "command": "fit",
        "software_version": __version__,
        "seed": config.seed,
        "dataset": str(args.data),
        "artifacts": {"draws": "draws.csv", "summary": "fit_summary.json", "config": "config.normalized.json"},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(json.dumps({k: summary[k] for k in ("prior", "max_rhat", "n_divergent")}))
    return EXIT_OK


def _cmd_match(args) -> int:
    if args.alpha is not None:
        try:
            alpha = np.array([float(v) for v in args.alpha.split(",")])
        except ValueError:
            raise _UsageError("gdr2 match: --alpha must be comma separated numbers") from None
    else:
        if args.K is None:
            raise _UsageError("gdr2 match: --a-pi needs -K")
        alpha = np.full(args.K, args.a_pi)
    doc = {"alpha": alpha.tolist(), **kl_match(alpha).to_dict()}
    text = json.dumps(doc, indent=2) + "\n"
    if args.out is not None:
        (prepare_output_dir(args.out) / "match.json").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def _cmd_metrics(args) -> int:
    draws = read_draws(args.draws)
    test = read_dataset_csv(args.test, response=args.response)
    truth = GroundTruth.from_json(args.truth).b if args.truth else None
    rep = metric_report(test, draws, truth)
    values = {k: v for k, v in rep.items() if k != "elpd_pointwise"}
    if args.out is not None:
        out = prepare_output_dir(args.out)
        with open(out / "metrics.csv", "w") as fh:
            fh.write("metric,value\n")
            for k, v in values.items():
                fh.write(f"{k},{format(float(v), '.17g')}\n")
    print(json.dumps(values))
    return EXIT_OK


def _cmd_report(args) -> int:
    run_dir = Path(args.run_dir)
    out = prepare_output_dir(args.out if args.out is not None else run_dir)
    path = write_report(run_dir / "metrics.csv", out)
    print(str(path))
    return EXIT_OK


_COMMANDS = {
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "match": _cmd_match,
    "case-study": _cmd_case_study,
    "metrics": _cmd_metrics,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(
            level=logging.INFO if args.verbose else logging.WARNING,
            format="%(levelname)s %(name)s: %(message)s",
        )
        if args.threads < 1:
            raise _UsageError("--threads must be >= 1")
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParameterError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, DomainError, DegenerateError, NumericalError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as exc:
        print(f"data error: {exc.filename}: no such file", file=sys.stderr)
        return EXIT_DATA
    except SamplingError as exc:
        print(f"sampling failure: {exc}", file=sys.stderr)
        return EXIT_SAMPLING


if __name__ == "__main__":
    sys.exit(main())
