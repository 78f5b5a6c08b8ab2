"""Monte-Carlo sweep over sample paths, quantile aggregation and bound comparison.

Every cell (method, holding cost, sample size, path) gets its own derived
seed, so the sweep is a pure function of the configuration: worker count and
completion order never change the output. Results are emitted as CSV with a
sibling metadata JSON capturing the full configuration.
"""
from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from time import perf_counter

from . import __version__
from .bayes import InverseGammaPrior, derive_seed, sample_demand
from .bounds import BoundConstants, c9, decision_gap_bound, epsilon_sq, eta_log_bound, kappa_sq
from .newsvendor import (
    DecisionInterval,
    NewsvendorParams,
    growth_constants,
    log_risk_floor,
    true_optimal_decision,
)
from .variational import OptimizerConfig, RiskSpec, fit_lcvb, fit_nvb, fit_rsvb, decide

__all__ = [
    "MethodSpec",
    "ExperimentConfig",
    "RunRecord",
    "ComparisonRow",
    "default_config",
    "run_path",
    "run_sweep",
    "quantile_gap",
    "compare_with_bounds",
    "emit_csv",
    "RECORD_COLUMNS",
    "COMPARISON_COLUMNS",
]

_METHOD_KINDS = ("nvb", "lcvb", "rsvb")


@dataclass(frozen=True)
class MethodSpec:
    """A fitting method to run: plain, loss-calibrated, or generic tilted."""

    kind: str
    risk: RiskSpec | None = None

    def __post_init__(self):
        if self.kind not in _METHOD_KINDS:
            raise ValueError(f"method must be one of {_METHOD_KINDS}, got {self.kind!r}")
        if self.kind == "rsvb" and self.risk is None:
            raise ValueError("rsvb method needs a RiskSpec")

    @property
    def label(self) -> str:
        if self.kind == "rsvb":
            r = self.risk
            return f"rsvb({r.gamma_bar:g},{r.F},{r.f})"
        return self.kind


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of a sweep; the sweep output is a pure function of this."""

    theta0: float = 0.68
    b: float = 0.1
    h_values: tuple = (0.001, 0.002, 0.003, 0.004, 0.005, 0.006, 0.007, 0.008, 0.009)
    dom: DecisionInterval = field(default_factory=lambda: DecisionInterval(0.001, 75.0))
    prior: InverseGammaPrior = field(default_factory=lambda: InverseGammaPrior(1.0, 4.1))
    n_grid: tuple = (50, 100, 200, 500, 1000, 2000, 5000)
    paths: int = 200
    quantile: float = 0.9
    seed: int = 20260810
    methods: tuple = (MethodSpec("nvb"), MethodSpec("lcvb"))
    bound: BoundConstants = field(default_factory=BoundConstants)
    opt: OptimizerConfig = field(default_factory=OptimizerConfig)

    def __post_init__(self):
        if self.theta0 <= 0.0 or not math.isfinite(self.theta0):
            raise ValueError(f"theta0 must be positive, got {self.theta0!r}")
        if self.b <= 0.0:
            raise ValueError(f"backorder cost must be positive, got {self.b!r}")
        if not self.h_values or any(h <= 0.0 for h in self.h_values):
            raise ValueError("holding-cost sweep must be nonempty and positive")
        if int(self.paths) < 1:
            raise ValueError(f"need at least one path, got {self.paths!r}")
        if not (0.0 < self.quantile < 1.0):
            raise ValueError(f"quantile level must lie in (0, 1), got {self.quantile!r}")
        if list(self.n_grid) != sorted(set(int(n) for n in self.n_grid)) or any(
            int(n) < 2 for n in self.n_grid
        ):
            raise ValueError("n_grid must be strictly increasing integers >= 2")
        if not self.methods:
            raise ValueError("at least one method required")


def default_config(**overrides) -> ExperimentConfig:
    """Desk-scale configuration: the reference problem at 200 paths."""
    return ExperimentConfig(**overrides)


@dataclass(frozen=True)
class RunRecord:
    """One fitted path: the decision it produced and its optimality gap."""

    method: str
    h: float
    n: int
    path: int
    decision: float
    gap: float
    converged: bool
    elapsed_ms: float

    def __post_init__(self):
        if self.gap < 0.0:
            raise ValueError(f"gap must be nonnegative, got {self.gap!r}")


@dataclass(frozen=True)
class ComparisonRow:
    method: str
    h: float
    n: int
    empirical_q: float
    bound: float
    prob_level: float
    dominates: bool


RECORD_COLUMNS = ("method", "h", "n", "path", "decision", "gap", "converged", "elapsed_ms")
COMPARISON_COLUMNS = ("method", "h", "n", "empirical_q", "bound", "prob_level", "dominates")


def run_path(cfg: ExperimentConfig, method: MethodSpec, h: float, n: int, path_index: int) -> RunRecord:
    """Sample one dataset, fit one method, and record the gap.

    Deterministic given (cfg.seed, method, h, n, path_index); fit
    non-convergence is recorded, not raised.
    """
    h_index = cfg.h_values.index(h)
    n_index = cfg.n_grid.index(n)
    seed = derive_seed(cfg.seed, method.label, h_index, n_index, path_index)
    data = sample_demand(cfg.theta0, int(n), seed)
    p = NewsvendorParams(h=h, b=cfg.b)

    start = perf_counter()
    if method.kind == "nvb":
        fit = fit_nvb(data, cfg.prior, cfg.opt)
        decision = decide(fit.q, RiskSpec(1.0, "constant", "identity"), p, cfg.dom)
    elif method.kind == "lcvb":
        decision, fit = fit_lcvb(data, cfg.prior, p, cfg.dom, cfg.opt)
    else:
        decision, fit = fit_rsvb(data, cfg.prior, method.risk, p, cfg.dom, cfg.opt)
    elapsed_ms = (perf_counter() - start) * 1e3

    target = true_optimal_decision(cfg.theta0, p, cfg.dom)
    return RunRecord(
        method=method.label,
        h=h,
        n=int(n),
        path=int(path_index),
        decision=decision,
        gap=abs(decision - target),
        converged=fit.converged,
        elapsed_ms=elapsed_ms,
    )


def _run_block(cfg: ExperimentConfig, method_index: int, h_index: int, n_index: int,
               path_lo: int, path_hi: int) -> list:
    method = cfg.methods[method_index]
    h = cfg.h_values[h_index]
    n = cfg.n_grid[n_index]
    return [run_path(cfg, method, h, n, path) for path in range(path_lo, path_hi)]


def _record_sort_key(record: RunRecord):
    return (record.method, record.h, record.n, record.path)


def run_sweep(cfg: ExperimentConfig, workers: int = 1, block: int = 25) -> list:
    """All (method, h, n, path) cells, optionally across a process pool.

    The output is sorted canonically so it does not depend on completion
    order; per-cell seeds make it independent of the worker count too.
    """
    tasks = []
    for mi in range(len(cfg.methods)):
        for hi in range(len(cfg.h_values)):
            for ni in range(len(cfg.n_grid)):
                for lo in range(0, cfg.paths, block):
                    tasks.append((mi, hi, ni, lo, min(lo + block, cfg.paths)))

    records: list = []
    if workers <= 1:
        for task in tasks:
            records.extend(_run_block(cfg, *task))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_block, cfg, *task) for task in tasks]
            for future in futures:
                records.extend(future.result())
    records.sort(key=_record_sort_key)
    return records


def quantile_gap(records, method: str, h: float, n: int, level: float) -> float:
    """Nearest-rank quantile of the gaps in the selected cell.

    The ceil(level*k)-th smallest of the k matching gaps; level may be 1.0
    (the maximum).
    """
    if not (0.0 < level <= 1.0):
        raise ValueError(f"quantile level must lie in (0, 1], got {level!r}")
    gaps = sorted(r.gap for r in records if r.method == method and r.h == h and r.n == n)
    if not gaps:
        raise ValueError(f"no records match method={method!r}, h={h!r}, n={n!r}")
    rank = math.ceil(level * len(gaps))
    return gaps[rank - 1]


def _rate_constant(cfg: ExperimentConfig) -> float:
    if cfg.bound.C9 is not None:
        return cfg.bound.C9
    return c9(cfg.prior.alpha, cfg.prior.beta, cfg.theta0)


def bound_components(cfg: ExperimentConfig, method: MethodSpec, h: float, n: int) -> tuple:
    """(epsilon_sq, rate_term, growth constant, bound) for one grid cell.

    Growth constants derive from the loss curvature at the true optimum and
    the rate constants from the prior, unless pinned in cfg.bound. The rate
    term uses the log-risk branch whenever the fit is tilted by a log risk.
    """
    p = NewsvendorParams(h=h, b=cfg.b)
    C1, Clog = growth_constants(cfg.theta0, p, cfg.dom)
    if cfg.bound.C1_growth is not None:
        C1 = cfg.bound.C1_growth
    if cfg.bound.Clog_growth is not None:
        Clog = cfg.bound.Clog_growth
    C9_val = _rate_constant(cfg)
    eps = epsilon_sq(n)

    log_tilted = method.kind == "lcvb" or (method.kind == "rsvb" and method.risk.F == "log")
    if log_tilted:
        c8_prime = -cfg.bound.C8 if cfg.bound.C8 is not None else log_risk_floor(p, cfg.dom)
        rate = eps + eta_log_bound(n, C9_val, c8_prime)
    else:
        rate = eps + kappa_sq(n, C9_val)

    if method.kind == "nvb" or (method.kind == "rsvb" and method.risk.f == "identity"):
        growth = C1
    else:
        growth = Clog
    return eps, rate, growth, decision_gap_bound(n, rate, growth, cfg.bound)


def theoretical_bound(cfg: ExperimentConfig, method: MethodSpec, h: float, n: int) -> float:
    """Decision-gap bound for one cell, deriving any unpinned constants."""
    return bound_components(cfg, method, h, n)[3]


def compare_with_bounds(cfg: ExperimentConfig, records) -> list:
    """Empirical quantile next to the theoretical bound for every grid cell."""
    rows = []
    prob_level = 1.0 - 1.0 / cfg.bound.tau
    for method in cfg.methods:
        for h in cfg.h_values:
            for n in cfg.n_grid:
                empirical = quantile_gap(records, method.label, h, n, cfg.quantile)
                bound = theoretical_bound(cfg, method, h, int(n))
                rows.append(
                    ComparisonRow(
                        method=method.label,
                        h=h,
                        n=int(n),
                        empirical_q=empirical,
                        bound=bound,
                        prob_level=prob_level,
                        dominates=bound >= empirical,
                    )
                )
    return rows


def _format_cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """JSON-ready view of the configuration (for run metadata)."""
    raw = asdict(cfg)
    raw["methods"] = [asdict(m) for m in cfg.methods]
    return raw


def emit_csv(rows, path, config: ExperimentConfig | None = None, columns=None, extra_meta=None) -> None:
    """Write rows as CSV (atomically) plus a sibling metadata JSON.

    Header comes from the row type; an empty list writes the record header.
    Floats are written with 17 significant digits so they round-trip.
    extra_meta (a dict) lands under the metadata key "derived".
    """
    if columns is None:
        columns = RECORD_COLUMNS if not rows else tuple(asdict(rows[0]).keys())
    tmp_path = f"{path}.tmp"
    try:
        with open(tmp_path, "w", newline="") as handle:
            handle.write(",".join(columns) + "\r\n")
            for row in rows:
                data = asdict(row)
                handle.write(",".join(_format_cell(data[c]) for c in columns) + "\r\n")
        os.replace(tmp_path, path)
    except OSError as exc:
        raise OSError(f"failed writing CSV to {path}: {exc}") from exc
    finally:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)

    if config is not None:
        base, _ = os.path.splitext(str(path))
        meta_path = base + ".meta.json"
        meta = {
            "config": config_to_dict(config),
            "seed": config.seed,
            "code_version": __version__,
        }
        if extra_meta:
            meta["derived"] = dict(extra_meta)
        tmp_meta = meta_path + ".tmp"
        with open(tmp_meta, "w") as handle:
            json.dump(meta, handle, indent=2, sort_keys=True)
            handle.write("\n")
        os.replace(tmp_meta, meta_path)
