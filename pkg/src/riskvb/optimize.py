"""Derivative-free optimizers: Nelder-Mead simplex and golden-section search.

Both are deterministic given their inputs, which the experiment harness
relies on for reproducibility.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = ["NelderMeadResult", "nelder_mead", "golden_section"]

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0  # 1/phi


@dataclass(frozen=True)
class NelderMeadResult:
    x: np.ndarray
    fun: float
    iterations: int
    converged: bool
    trace: tuple = field(default=())


def nelder_mead(f, x0, step=0.25, max_iters=500, diameter_tol=1e-9) -> NelderMeadResult:
    """Minimize f over R^d with the Nelder-Mead simplex.

    Coefficients: reflection 1, expansion 2, contraction 0.5, shrink 0.5.
    Stops when the simplex diameter falls below diameter_tol; otherwise
    returns the best vertex with converged=False. The trace records the
    best objective value after every iteration (monotone nonincreasing).
    """
    x0 = np.asarray(x0, dtype=float)
    d = x0.size
    steps = np.broadcast_to(np.asarray(step, dtype=float), (d,))

    simplex = np.empty((d + 1, d))
    simplex[0] = x0
    for i in range(d):
        simplex[i + 1] = x0
        simplex[i + 1, i] += steps[i]
    values = np.array([f(v) for v in simplex], dtype=float)

    trace = []
    converged = False
    iterations = 0
    for iterations in range(1, max_iters + 1):
        order = np.argsort(values, kind="stable")
        simplex = simplex[order]
        values = values[order]

        diameter = max(np.linalg.norm(simplex[i] - simplex[0]) for i in range(1, d + 1))
        if diameter < diameter_tol:
            converged = True
            trace.append(values[0])
            break

        centroid = simplex[:-1].mean(axis=0)
        reflected = centroid + (centroid - simplex[-1])
        f_reflected = f(reflected)
        if f_reflected < values[0]:
            expanded = centroid + 2.0 * (centroid - simplex[-1])
            f_expanded = f(expanded)
            if f_expanded < f_reflected:
                simplex[-1], values[-1] = expanded, f_expanded
            else:
                simplex[-1], values[-1] = reflected, f_reflected
        elif f_reflected < values[-2]:
            simplex[-1], values[-1] = reflected, f_reflected
        else:
            if f_reflected < values[-1]:
                contracted = centroid + 0.5 * (reflected - centroid)
            else:
                contracted = centroid + 0.5 * (simplex[-1] - centroid)
            f_contracted = f(contracted)
            if f_contracted < min(f_reflected, values[-1]):
                simplex[-1], values[-1] = contracted, f_contracted
            else:
                # Shrink toward the best vertex.
                for i in range(1, d + 1):
                    simplex[i] = simplex[0] + 0.5 * (simplex[i] - simplex[0])
                    values[i] = f(simplex[i])
        trace.append(values.min())

    best = int(np.argmin(values))
    return NelderMeadResult(
        x=simplex[best].copy(),
        fun=float(values[best]),
        iterations=iterations,
        converged=converged,
        trace=tuple(float(v) for v in trace),
    )


def golden_section(f, lo: float, hi: float, tol: float = 1e-8) -> float:
    """Minimize a unimodal scalar function on [lo, hi].

    Ties are broken toward lo so results are deterministic.
    """
    lo = float(lo)
    hi = float(hi)
    if not lo < hi:
        raise ValueError(f"need lo < hi, got [{lo!r}, {hi!r}]")
    x1 = hi - _INV_PHI * (hi - lo)
    x2 = lo + _INV_PHI * (hi - lo)
    f1 = f(x1)
    f2 = f(x2)
    while hi - lo > tol:
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _INV_PHI * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _INV_PHI * (hi - lo)
            f2 = f(x2)
    return 0.5 * (lo + hi)
