"""``sobol-mirror`` command line.

Commands: ``estimate``, ``bench``, ``oracle``, ``baseline``, ``validate``.
A JSON config (``--config``) supplies defaults; explicit flags override it.

Exit codes: 0 success, 1 validation failure, 2 invalid configuration,
3 model evaluation error, 4 no oracle for the model.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import EvaluationError, UnsupportedModelError
from .experiments import BenchConfig, ConfigError, baseline, estimate, mse_study, write_csv, write_estimate, write_mse_report
from .oracle import reference

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_EVAL, EXIT_ORACLE = 0, 1, 2, 3, 4


def _add_model_args(sp):
    sp.add_argument("--config", help="JSON config file; flags override its fields")
    sp.add_argument("--model", help="bratley | disc | disc2 | linear, or a label for --command")
    sp.add_argument("--p", type=int)
    sp.add_argument("--coef", type=float, nargs="+", help="coefficients of the linear model")
    sp.add_argument("--laws", nargs="+", help="input laws, e.g. 'uniform(0,1)' 'gaussian(0,1)'")
    sp.add_argument("--command", help="external model command (line protocol)")
    sp.add_argument("--output", "-o", help="output directory")
    sp.add_argument("--resolution", type=int, help="quadrature nodes per axis")


def _add_run_args(sp):
    sp.add_argument("--seed", type=int, dest="master_seed")
    sp.add_argument("--replicates", type=int)
    sp.add_argument("--jobs", type=int)
    sp.add_argument("--eta0", type=float)
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--schedule", choices=["power", "theorem_constant"])
    sp.add_argument("--strategy", dest="strategies", nargs="+", help="unif | S | 1/S | avg")
    sp.add_argument("--exclude-empty", dest="exclude_empty", action="store_const", const=True)
    sp.add_argument("--no-averaging", dest="averaging", action="store_const", const=False)
    sp.add_argument("--averaging", dest="averaging", action="store_const", const=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sobol-mirror", description="Online estimation of all Sobol' indices.")
    sub = parser.add_subparsers(dest="command_name", required=True)

    sp = sub.add_parser("estimate", help="run the mirror estimator")
    _add_model_args(sp)
    _add_run_args(sp)
    sp.add_argument("--horizon", type=int)

    sp = sub.add_parser("bench", help="MSE study against the quadrature oracle")
    _add_model_args(sp)
    _add_run_args(sp)
    sp.add_argument("--horizons", type=int, nargs="+")
    sp.add_argument("--methods", nargs="+", choices=["mirror", "pf1"])
    sp.add_argument("--pf-budget", dest="pf_budget", choices=["evals", "iterations"])

    sp = sub.add_parser("oracle", help="reference indices by quadrature")
    _add_model_args(sp)
    sp.add_argument("--no-cache", action="store_true")

    sp = sub.add_parser("baseline", help="PF1 Pick-Freeze estimates")
    _add_model_args(sp)
    _add_run_args(sp)
    sp.add_argument("--N", type=int, dest="n_samples", required=False, default=None)

    sp = sub.add_parser("validate", help="run numerical self-checks")
    sp.add_argument("--suite", nargs="+", default=["all"])
    sp.add_argument("--p", type=int)
    return parser


_CONFIG_KEYS = set(BenchConfig.__dataclass_fields__)


def _config(args) -> BenchConfig:
    data = {}
    if getattr(args, "config", None):
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
    for key, value in vars(args).items():
        if value is None or key not in _CONFIG_KEYS:
            continue
        data[key] = value
    if getattr(args, "coef", None):
        data.setdefault("params", {})
        data["params"] = {**data["params"], "coefficients": args.coef}
    if data.get("command") and "model" not in data:
        data["model"] = "external"
    return BenchConfig.from_dict(data)


def _cmd_estimate(args) -> int:
    cfg = _config(args)
    summary = estimate(cfg)
    files = write_estimate(summary, cfg.output, cfg.averaging)
    print(f"n = {summary['n']}, evals = {summary['evals']}, m_hat = {summary['m_hat']:.6g}")
    for f in files:
        print(f"wrote {f}")
    return EXIT_OK


def _cmd_bench(args) -> int:
    cfg = _config(args)
    try:
        truth = reference(cfg.build_model(), cfg.resolution).closed
    except UnsupportedModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    report = mse_study(cfg, truth=truth)
    for f in write_mse_report(report, cfg.output):
        print(f"wrote {f}")
    for m, s, h, e, v in report.aggregate:
        print(f"{m:7s} {s:20s} n={h:<8d} evals={e:<9d} mse={v:.4e}")
    return EXIT_OK


def _cmd_oracle(args) -> int:
    cfg = _config(args)
    try:
        table = reference(cfg.build_model(), cfg.resolution, use_cache=not args.no_cache)
    except UnsupportedModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    text = json.dumps(table.to_dict(), indent=1) + "\n"
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    (out / "oracle.json").write_text(text)
    print(text, end="")
    return EXIT_OK


def _cmd_baseline(args) -> int:
    cfg = _config(args)
    n = args.n_samples or 1000
    if n < 2:
        raise ConfigError("--N must be >= 2")
    results, rows = baseline(cfg, n)
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "estimates.csv", ["replicate", "n", "subset_mask", "subset", "sobol_estimate", "closed_estimate"], rows)
    print(f"N = {n}, evals per replicate = {results[0][0].evals}")
    print(f"wrote {out / 'estimates.csv'}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    from .validate import SUITES, run_suites

    names = args.suite
    for name in names:
        if name != "all" and name not in SUITES:
            raise ConfigError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    results = run_suites(names, p=args.p)
    for res in results:
        print(res.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


COMMANDS = {
    "estimate": _cmd_estimate,
    "bench": _cmd_bench,
    "oracle": _cmd_oracle,
    "baseline": _cmd_baseline,
    "validate": _cmd_validate,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command_name](args)
    except ConfigError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EvaluationError as exc:
        print(f"evaluation error: {exc}", file=sys.stderr)
        return EXIT_EVAL


if __name__ == "__main__":
    sys.exit(main())
