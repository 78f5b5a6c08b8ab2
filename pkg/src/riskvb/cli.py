"""Command-line frontend: simulate, fit, oracle, bounds, experiment.

Exit codes: 0 success, 2 validation failure, 1 runtime failure. Errors are
printed to stderr as single lines prefixed ``error:``. Sweep configuration
comes from a strict TOML file; flags override file values.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, replace

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .bayes import (
    GammaPrior,
    InverseGammaPrior,
    bayes_decision,
    build_posterior_oracle,
    logexp_risk,
    posterior_risk,
    read_demand_csv,
    sample_demand,
    size_biased_risk,
    write_demand_csv,
)
from .bounds import BoundConstants, c9
from .experiments import (
    ExperimentConfig,
    MethodSpec,
    bound_components,
    compare_with_bounds,
    emit_csv,
    run_sweep,
    COMPARISON_COLUMNS,
)
from .newsvendor import DecisionInterval, NewsvendorParams, make_risk
from .variational import RiskSpec, decide, fit_lcvb, fit_nvb, fit_rsvb

__all__ = ["main"]


class ValidationError(ValueError):
    """Bad user input detected before any computation."""


@dataclass(frozen=True)
class _BoundRow:
    n: int
    epsilon_sq: float
    rate_term: float
    bound: float
    prob_level: float
    method: str


_CONFIG_KEYS = {
    "theta0",
    "b",
    "h",
    "a_min",
    "a_max",
    "n_grid",
    "paths",
    "quantile",
    "seed",
    "methods",
    "prior",
    "bound",
    "rsvb",
}
_PRIOR_KEYS = {"alpha", "beta"}
_BOUND_KEYS = {"M", "tau", "delta", "C1_growth", "Clog_growth", "C9", "C8"}
_RSVB_KEYS = {"gamma_bar", "F", "f"}


def _reject_unknown(table: dict, allowed: set, where: str) -> None:
    unknown = set(table) - allowed
    if unknown:
        raise ValidationError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")


def load_config(path: str) -> ExperimentConfig:
    """Parse a TOML sweep configuration, rejecting unknown keys."""
    try:
        with open(path, "rb") as handle:
            raw = tomllib.load(handle)
    except FileNotFoundError:
        raise ValidationError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError(f"config file {path} is not valid TOML: {exc}") from None

    _reject_unknown(raw, _CONFIG_KEYS, "config")
    prior_tab = raw.get("prior", {})
    _reject_unknown(prior_tab, _PRIOR_KEYS, "[prior]")
    bound_tab = raw.get("bound", {})
    _reject_unknown(bound_tab, _BOUND_KEYS, "[bound]")
    rsvb_tab = raw.get("rsvb", {})
    _reject_unknown(rsvb_tab, _RSVB_KEYS, "[rsvb]")

    try:
        return _config_from_tables(raw, prior_tab, bound_tab, rsvb_tab)
    except (ValueError, TypeError) as exc:
        raise ValidationError(str(exc)) from None


def _config_from_tables(raw: dict, prior_tab: dict, bound_tab: dict, rsvb_tab: dict) -> ExperimentConfig:
    kwargs = {}
    if "theta0" in raw:
        kwargs["theta0"] = float(raw["theta0"])
    if "b" in raw:
        kwargs["b"] = float(raw["b"])
    if "h" in raw:
        h = raw["h"]
        kwargs["h_values"] = tuple(float(v) for v in h) if isinstance(h, list) else (float(h),)
    if "a_min" in raw or "a_max" in raw:
        kwargs["dom"] = DecisionInterval(float(raw.get("a_min", 0.001)), float(raw.get("a_max", 75.0)))
    if "n_grid" in raw:
        kwargs["n_grid"] = tuple(int(n) for n in raw["n_grid"])
    if "paths" in raw:
        kwargs["paths"] = int(raw["paths"])
    if "quantile" in raw:
        kwargs["quantile"] = float(raw["quantile"])
    if "seed" in raw:
        kwargs["seed"] = int(raw["seed"])
    if prior_tab:
        kwargs["prior"] = InverseGammaPrior(float(prior_tab["alpha"]), float(prior_tab["beta"]))
    if bound_tab:
        kwargs["bound"] = BoundConstants(
            M=float(bound_tab.get("M", 1.0)),
            tau=float(bound_tab.get("tau", 10.0)),
            delta=float(bound_tab.get("delta", 2.0)),
            C1_growth=bound_tab.get("C1_growth"),
            Clog_growth=bound_tab.get("Clog_growth"),
            C9=bound_tab.get("C9"),
            C8=bound_tab.get("C8"),
        )
    if "methods" in raw:
        methods = []
        for name in raw["methods"]:
            if name == "rsvb":
                spec = RiskSpec(
                    gamma_bar=float(rsvb_tab.get("gamma_bar", 1.0)),
                    F=rsvb_tab.get("F", "identity"),
                    f=rsvb_tab.get("f", "identity"),
                )
                methods.append(MethodSpec("rsvb", spec))
            else:
                methods.append(MethodSpec(name))
        kwargs["methods"] = tuple(methods)
    return ExperimentConfig(**kwargs)


def _default_workers() -> int:
    env = os.environ.get("RSVB_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValidationError(f"RSVB_WORKERS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def _positive(value: float, name: str) -> float:
    if not math.isfinite(value) or value <= 0.0:
        raise ValidationError(f"{name} must be positive, got {value!r}")
    return value


def _load_dataset(path: str):
    try:
        with open(path, "r", newline="") as handle:
            return read_demand_csv(handle)
    except FileNotFoundError:
        raise ValidationError(f"data file not found: {path}") from None
    except ValueError as exc:
        raise ValidationError(f"{path}: {exc}") from None


def _print_json(payload: dict) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True))


def cmd_simulate(args) -> int:
    _positive(args.theta0, "--theta0")
    if args.n < 1:
        raise ValidationError(f"--n must be at least 1, got {args.n}")
    data = sample_demand(args.theta0, args.n, args.seed)
    if args.out:
        write_demand_csv(data, args.out)
    else:
        write_demand_csv(data, sys.stdout)
    return 0


def _interval(args) -> DecisionInterval:
    try:
        return DecisionInterval(args.amin, args.amax)
    except ValueError as exc:
        raise ValidationError(str(exc)) from None


def _params(args) -> NewsvendorParams:
    try:
        return NewsvendorParams(h=args.h, b=args.b)
    except ValueError as exc:
        raise ValidationError(str(exc)) from None


def cmd_fit(args) -> int:
    p = _params(args)
    dom = _interval(args)
    alpha, beta = args.prior
    _positive(alpha, "prior shape")
    _positive(beta, "prior rate")
    prior = InverseGammaPrior(alpha, beta)
    data = _load_dataset(args.data)

    if args.method == "nvb":
        fit = fit_nvb(data, prior)
        decision = decide(fit.q, RiskSpec(1.0, "constant", "identity"), p, dom)
    elif args.method == "lcvb":
        decision, fit = fit_lcvb(data, prior, p, dom)
    else:
        spec = RiskSpec(gamma_bar=args.gamma_bar, F=args.risk, f=args.f)
        decision, fit = fit_rsvb(data, prior, spec, p, dom)

    payload = fit.to_json_dict()
    payload["decision"] = decision
    payload["method"] = args.method
    _print_json(payload)
    return 0


def cmd_oracle(args) -> int:
    p = _params(args)
    dom = _interval(args)
    alpha, beta = args.prior
    _positive(alpha, "prior shape")
    _positive(beta, "prior rate")
    if not (dom.a_min <= args.a <= dom.a_max):
        raise ValidationError(
            f"--a {args.a} lies outside the decision interval [{dom.a_min}, {dom.a_max}]"
        )
    prior = GammaPrior(alpha, beta) if args.gamma_prior else InverseGammaPrior(alpha, beta)
    data = _load_dataset(args.data)

    oracle = build_posterior_oracle(data, prior, args.quad_order)
    payload = {
        "log_evidence": oracle.log_evidence,
        "posterior_risk": posterior_risk(oracle, args.a, p),
        "bayes_decision": bayes_decision(oracle, p, dom),
        "logexp_risk": logexp_risk(oracle, args.a, args.gamma_bar, make_risk(args.risk, p)),
        "size_biased_risk": size_biased_risk(oracle, args.a, p),
    }
    _print_json(payload)
    return 0


def cmd_bounds(args) -> int:
    cfg = load_config(args.config)
    if args.h is not None:
        h = args.h
        if h not in cfg.h_values:
            raise ValidationError(f"--h {h} is not in the configured sweep {cfg.h_values}")
    elif len(cfg.h_values) == 1:
        h = cfg.h_values[0]
    else:
        raise ValidationError("config sweeps several holding costs; pick one with --h")

    rows = []
    C9_val = cfg.bound.C9 if cfg.bound.C9 is not None else c9(
        cfg.prior.alpha, cfg.prior.beta, cfg.theta0
    )
    prob_level = 1.0 - 1.0 / cfg.bound.tau
    for method in cfg.methods:
        for n in cfg.n_grid:
            eps, rate, _, bound = bound_components(cfg, method, h, int(n))
            rows.append(
                _BoundRow(
                    n=int(n),
                    epsilon_sq=eps,
                    rate_term=rate,
                    bound=bound,
                    prob_level=prob_level,
                    method=method.label,
                )
            )
    emit_csv(
        rows,
        args.out,
        config=cfg,
        columns=("n", "epsilon_sq", "rate_term", "bound", "prob_level", "method"),
        extra_meta={"C9": C9_val, "h": h},
    )
    return 0


def cmd_experiment(args) -> int:
    cfg = load_config(args.config)
    overrides = {}
    if args.paths is not None:
        overrides["paths"] = args.paths
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        try:
            cfg = replace(cfg, **overrides)
        except ValueError as exc:
            raise ValidationError(str(exc)) from None
    workers = args.workers if args.workers is not None else _default_workers()
    if workers < 1:
        raise ValidationError(f"--workers must be at least 1, got {workers}")
    os.makedirs(args.outdir, exist_ok=True)

    records = run_sweep(cfg, workers=workers)
    comparison = compare_with_bounds(cfg, records)
    emit_csv(records, os.path.join(args.outdir, "records.csv"), config=cfg)
    emit_csv(
        comparison,
        os.path.join(args.outdir, "comparison.csv"),
        config=cfg,
        columns=COMPARISON_COLUMNS,
    )
    if args.verbose:
        dominated = sum(1 for row in comparison if row.dominates)
        print(f"{len(records)} records; bound dominates at {dominated}/{len(comparison)} cells")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="riskvb",
        description="Variational Bayes decision-making for the exponential-demand newsvendor",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="draw a demand dataset and write it as CSV")
    sim.add_argument("--theta0", type=float, required=True, help="true demand rate")
    sim.add_argument("--n", type=int, required=True, help="number of observations")
    sim.add_argument("--seed", type=int, required=True, help="stream seed")
    sim.add_argument("--out", help="output CSV path (default: stdout)")
    sim.set_defaults(func=cmd_simulate)

    fit = sub.add_parser("fit", help="fit a variational posterior and report its decision")
    fit.add_argument("--method", choices=["nvb", "lcvb", "rsvb"], required=True)
    fit.add_argument("--data", required=True, help="demand CSV (header 'xi')")
    fit.add_argument("--prior", type=float, nargs=2, metavar=("ALPHA", "BETA"), required=True)
    fit.add_argument("--gamma-bar", type=float, default=1.0, dest="gamma_bar")
    fit.add_argument("--risk", choices=["identity", "log", "constant"], default="identity")
    fit.add_argument("--f", choices=["identity", "log"], default="identity")
    fit.add_argument("--h", type=float, required=True)
    fit.add_argument("--b", type=float, required=True)
    fit.add_argument("--amin", type=float, default=0.001)
    fit.add_argument("--amax", type=float, default=75.0)
    fit.set_defaults(func=cmd_fit)

    oracle = sub.add_parser("oracle", help="exact-posterior risks at a given decision")
    oracle.add_argument("--data", required=True)
    oracle.add_argument("--prior", type=float, nargs=2, metavar=("ALPHA", "BETA"), required=True)
    oracle.add_argument("--a", type=float, required=True)
    oracle.add_argument("--gamma-bar", type=float, default=1.0, dest="gamma_bar")
    oracle.add_argument("--risk", choices=["identity", "log", "constant"], default="identity")
    oracle.add_argument("--h", type=float, required=True)
    oracle.add_argument("--b", type=float, required=True)
    oracle.add_argument("--amin", type=float, default=0.001)
    oracle.add_argument("--amax", type=float, default=75.0)
    oracle.add_argument("--quad-order", type=int, default=256, dest="quad_order")
    oracle.add_argument(
        "--gamma-prior",
        action="store_true",
        dest="gamma_prior",
        help="conjugate sanity mode: treat the prior parameters as a gamma prior",
    )
    oracle.set_defaults(func=cmd_oracle)

    bounds = sub.add_parser("bounds", help="emit the bound curves for a configuration")
    bounds.add_argument("--config", required=True, help="TOML sweep configuration")
    bounds.add_argument("--h", type=float, help="holding cost to evaluate (required for sweeps)")
    bounds.add_argument("--out", required=True, help="output CSV path")
    bounds.set_defaults(func=cmd_bounds)

    exp = sub.add_parser("experiment", help="run the full sweep and bound comparison")
    exp.add_argument("--config", required=True, help="TOML sweep configuration")
    exp.add_argument("--workers", type=int, default=None, help="worker processes (default: RSVB_WORKERS or CPU count)")
    exp.add_argument("--outdir", required=True, help="directory for records/comparison CSVs")
    exp.add_argument("--paths", type=int, default=None, help="override the configured path count (e.g. 1000 for a full run)")
    exp.add_argument("--seed", type=int, default=None, help="override the configured base seed")
    exp.add_argument("--verbose", action="store_true")
    exp.set_defaults(func=cmd_experiment)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failures
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
