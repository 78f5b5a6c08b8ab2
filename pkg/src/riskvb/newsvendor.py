"""Newsvendor decision problem with exponential demand.

Piecewise-linear overage/underage loss, its closed-form expected loss under
an exponential demand with rate theta, the true optimal order quantity, and
the curvature constants that feed the optimality-gap bound evaluators.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "NewsvendorParams",
    "DecisionInterval",
    "loss",
    "model_risk",
    "true_optimal_decision",
    "critical_theta",
    "risk_floor",
    "log_risk_floor",
    "growth_constants",
    "risk_transform",
    "make_risk",
]


@dataclass(frozen=True)
class NewsvendorParams:
    """Unit holding cost h and unit backorder cost b, both positive."""

    h: float
    b: float

    def __post_init__(self):
        if not (math.isfinite(self.h) and self.h > 0.0):
            raise ValueError(f"holding cost h must be positive, got {self.h!r}")
        if not (math.isfinite(self.b) and self.b > 0.0):
            raise ValueError(f"backorder cost b must be positive, got {self.b!r}")


@dataclass(frozen=True)
class DecisionInterval:
    """Compact order-quantity interval [a_min, a_max] with 0 < a_min < a_max."""

    a_min: float
    a_max: float

    def __post_init__(self):
        if not (0.0 < self.a_min < self.a_max) or not math.isfinite(self.a_max):
            raise ValueError(
                f"need 0 < a_min < a_max finite, got [{self.a_min!r}, {self.a_max!r}]"
            )

    def clamp(self, a: float) -> float:
        return min(max(a, self.a_min), self.a_max)


def loss(a: float, xi: float, p: NewsvendorParams) -> float:
    """h*(a - xi)^+ + b*(xi - a)^+ for order a and realized demand xi."""
    if a < 0.0 or xi < 0.0:
        raise ValueError(f"order and demand must be nonnegative, got a={a!r}, xi={xi!r}")
    return p.h * max(a - xi, 0.0) + p.b * max(xi - a, 0.0)


def model_risk(a: float, theta, p: NewsvendorParams):
    """Expected newsvendor loss under exponential demand with rate theta.

    Closed form h*a - h/theta + (b+h)*exp(-a*theta)/theta; convex in a.
    Accepts a scalar or array of rates.
    """
    theta_arr = np.asarray(theta, dtype=float)
    if np.any(theta_arr <= 0.0) or not np.all(np.isfinite(theta_arr)):
        raise ValueError("demand rate theta must be positive and finite")
    if a < 0.0:
        raise ValueError(f"order quantity must be nonnegative, got {a!r}")
    out = p.h * a - p.h / theta_arr + (p.b + p.h) * np.exp(-a * theta_arr) / theta_arr
    return float(out) if np.isscalar(theta) or theta_arr.ndim == 0 else out


def true_optimal_decision(theta0: float, p: NewsvendorParams, dom: DecisionInterval) -> float:
    """Minimizer of the expected loss at the true rate, clamped to dom.

    The unclamped stationary point is ln((b+h)/h)/theta0.
    """
    if theta0 <= 0.0 or not math.isfinite(theta0):
        raise ValueError(f"theta0 must be positive and finite, got {theta0!r}")
    return dom.clamp(math.log((p.b + p.h) / p.h) / theta0)


def critical_theta(a: float, p: NewsvendorParams, tol: float = 1e-12) -> float:
    """Rate theta* at which the expected loss is stationary in theta.

    Solves h - (b+h)*exp(-a*theta)*(1 + a*theta) = 0 by bisection; the left
    side is strictly increasing in theta, from -b at 0 toward h.
    """
    if a <= 0.0:
        raise ValueError(f"order quantity must be positive, got {a!r}")

    def g(theta: float) -> float:
        x = a * theta
        return p.h - (p.b + p.h) * math.exp(-x) * (1.0 + x)

    lo, hi = 0.0, 1.0 / a
    while g(hi) <= 0.0:
        hi *= 2.0
        if hi > 1e300:
            raise RuntimeError("failed to bracket the stationary rate")
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if g(mid) <= 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def risk_floor(a: float, p: NewsvendorParams, a_min: float) -> float:
    """Positive lower bound h*a_min^2*theta*/(1 + a*theta*) on the expected loss.

    theta* is the stationary rate of theta -> expected loss at this a.
    """
    theta_star = critical_theta(a, p)
    return p.h * a_min * a_min * theta_star / (1.0 + a * theta_star)


def log_risk_floor(p: NewsvendorParams, dom: DecisionInterval) -> float:
    """Log of the uniform risk floor over the decision interval.

    The floor is smallest at a_max, so this is
    log(h * a_min^2 * theta* / (1 + a_max * theta*)) with theta* the
    stationary rate at a_max. Feeds the log-risk rate-term bound.
    """
    return math.log(risk_floor(dom.a_max, p, dom.a_min))


def growth_constants(theta0: float, p: NewsvendorParams, dom: DecisionInterval) -> tuple[float, float]:
    """Curvature of the expected loss and of its log at the true optimum.

    Returns (C1, Clog) = (h*theta0, theta0/a_star): the second derivative of
    the expected loss at its stationary point, and of the log expected loss
    (the loss there equals h*a_star, so the log curvature is theta0/a_star).
    Requires the unclamped optimum to be interior to dom.
    """
    if theta0 <= 0.0 or not math.isfinite(theta0):
        raise ValueError(f"theta0 must be positive and finite, got {theta0!r}")
    a_star = math.log((p.b + p.h) / p.h) / theta0
    if not (dom.a_min < a_star < dom.a_max):
        raise ValueError(
            "growth constants invalid; supply manually "
            f"(stationary decision {a_star!r} is not interior to "
            f"[{dom.a_min!r}, {dom.a_max!r}])"
        )
    return p.h * theta0, theta0 / a_star


def risk_transform(kind: str, g_value: float) -> float:
    """Apply the monotone transform 'identity' or 'log' to a risk value."""
    if kind == "identity":
        return float(g_value)
    if kind == "log":
        if g_value <= 0.0:
            raise ValueError(f"log transform needs a positive risk value, got {g_value!r}")
        return math.log(g_value)
    raise ValueError(f"unknown risk transform {kind!r}")


def make_risk(kind: str, p: NewsvendorParams):
    """Risk function (a, theta) -> transformed expected loss.

    'identity' returns the expected loss itself, 'log' its logarithm and
    'constant' the zero function (which decouples the posterior fit from
    the decision).
    """
    if kind == "identity":
        return lambda a, theta: model_risk(a, theta, p)
    if kind == "log":
        return lambda a, theta: np.log(model_risk(a, theta, p))
    if kind == "constant":
        return lambda a, theta: np.zeros_like(np.asarray(theta, dtype=float))
    raise ValueError(f"unknown risk transform {kind!r}")
