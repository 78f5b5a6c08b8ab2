"""Independent oracles shared by the test modules.

Everything here deliberately avoids the code paths under test: expectations
come from Monte Carlo or brute-force quadrature, special values from mpmath
or explicit series, optima from grid search.
"""
from __future__ import annotations

import math

import numpy as np
from mpmath import mp

mp.dps = 40


def mp_ln_gamma(x: float) -> float:
    return float(mp.loggamma(mp.mpf(float(x))))


def mp_digamma(x: float) -> float:
    return float(mp.digamma(mp.mpf(float(x))))


def mp_trigamma(x: float) -> float:
    return float(mp.polygamma(1, mp.mpf(float(x))))


def euler_mascheroni_series(terms: int = 1_000_000) -> float:
    """gamma = lim (sum 1/k - log N), accelerated with the Euler-Maclaurin tail."""
    k = np.arange(1, terms + 1, dtype=float)
    partial = float(np.sum(1.0 / k))
    n = float(terms)
    return partial - math.log(n) - 0.5 / n + 1.0 / (12.0 * n * n)


def zeta2_series(terms: int = 1_000_000) -> float:
    """pi^2/6 = sum 1/k^2, accelerated with the integral tail 1/N - 1/(2N^2) + 1/(6N^3)."""
    k = np.arange(1, terms + 1, dtype=float)
    partial = float(np.sum(1.0 / (k * k)))
    n = float(terms)
    return partial + 1.0 / n - 0.5 / (n * n) + 1.0 / (6.0 * n ** 3)


def central_difference(f, x: float, step: float) -> float:
    return (f(x + step) - f(x - step)) / (2.0 * step)


def mc_expected_loss(a: float, theta: float, h: float, b: float, draws: int, seed: int):
    """Monte Carlo estimate of the newsvendor expected loss plus its standard error."""
    rng = np.random.default_rng(seed)
    xi = rng.exponential(1.0 / theta, size=draws)
    losses = h * np.maximum(a - xi, 0.0) + b * np.maximum(xi - a, 0.0)
    return float(np.mean(losses)), float(np.std(losses, ddof=1) / math.sqrt(draws))


def mc_gamma_expectation(f, shape: float, rate: float, draws: int, seed: int):
    """Monte Carlo estimate of E[f(theta)] for theta ~ Gamma(shape, rate), with SE."""
    rng = np.random.default_rng(seed)
    theta = rng.gamma(shape, 1.0 / rate, size=draws)
    values = f(theta)
    return float(np.mean(values)), float(np.std(values, ddof=1) / math.sqrt(draws))


def grid_minimum(f, lo: float, hi: float, points: int):
    """Brute-force minimizer over an even grid; returns (argmin, spacing)."""
    grid = np.linspace(lo, hi, points)
    values = f(grid)
    return float(grid[int(np.argmin(values))]), float(grid[1] - grid[0])


def conjugate_log_evidence(n: int, total: float, alpha0: float, beta0: float) -> float:
    """Closed-form log evidence for exponential data under a gamma(alpha0, beta0) prior.

    beta0^alpha0 * Gamma(alpha0 + n) / (Gamma(alpha0) * (beta0 + total)^(alpha0 + n)),
    in logs via mpmath.
    """
    return (
        alpha0 * math.log(beta0)
        + mp_ln_gamma(alpha0 + n)
        - mp_ln_gamma(alpha0)
        - (alpha0 + n) * math.log(beta0 + total)
    )


def quadrature_expectation(f, log_density, lo: float, hi: float, points: int = 20001) -> float:
    """Trapezoid-rule expectation of f under an (already normalized) log density."""
    theta = np.linspace(lo, hi, points)
    dens = np.exp(log_density(theta))
    return float(np.trapz(f(theta) * dens, theta))


def spearman(x, y) -> float:
    """Spearman rank correlation (no ties expected in our use)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    rx = np.argsort(np.argsort(x)).astype(float)
    ry = np.argsort(np.argsort(y)).astype(float)
    rx -= rx.mean()
    ry -= ry.mean()
    return float(np.sum(rx * ry) / math.sqrt(np.sum(rx * rx) * np.sum(ry * ry)))
