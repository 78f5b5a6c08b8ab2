"""Finite-sample optimality-gap bound evaluators.

Control sequence, the prior-dependent rate constant, the variational rate
terms, and the decision/value gap bounds they feed. All formulas are simple
closed forms; the constant M is a configuration input because only its
existence is established, never a numeric value.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .special_math import ln_gamma

__all__ = [
    "BoundConstants",
    "epsilon_sq",
    "c9",
    "kappa_sq",
    "eta_log_bound",
    "decision_gap_bound",
    "value_gap_bound",
    "combined_gap_bound",
]


@dataclass(frozen=True)
class BoundConstants:
    """Constants entering the gap bounds.

    M scales every bound and defaults to 1; tau sets the probability level
    1 - 1/tau (1 - 2/tau for the combined bound); delta is the growth
    exponent. The remaining constants may be pinned here or left None to be
    derived from the model (curvatures from the loss, C9/C8 from the prior).
    """

    M: float = 1.0
    tau: float = 10.0
    delta: float = 2.0
    C1_growth: float | None = None
    Clog_growth: float | None = None
    C9: float | None = None
    C8: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.M) and self.M > 0.0):
            raise ValueError(f"M must be positive, got {self.M!r}")
        if not (math.isfinite(self.tau) and self.tau > 1.0):
            raise ValueError(f"tau must exceed 1 for a meaningful level, got {self.tau!r}")
        if not (math.isfinite(self.delta) and self.delta > 0.0):
            raise ValueError(f"delta must be positive, got {self.delta!r}")
        for name in ("C1_growth", "Clog_growth", "C9"):
            value = getattr(self, name)
            if value is not None and not (math.isfinite(value) and value > 0.0):
                raise ValueError(f"{name} must be positive when given, got {value!r}")
        if self.C8 is not None and not (math.isfinite(self.C8) and self.C8 >= 0.0):
            raise ValueError(f"C8 must be nonnegative when given, got {self.C8!r}")


def epsilon_sq(n: int) -> float:
    """Squared control sequence 1/n (the rate epsilon_n = 1/sqrt(n))."""
    if int(n) < 1:
        raise ValueError(f"sample size must be >= 1, got {n!r}")
    return 1.0 / float(n)


def c9(alpha: float, beta: float, theta0: float) -> float:
    """Prior-dependent rate constant for the inverse-gamma prior.

    1/2 + max(0, 2 + 2*beta/theta0 - log(sqrt(2*pi)) - log(beta^alpha/Gamma(alpha))
    + alpha*log(theta0)); the prior parameters must make it positive.
    """
    if alpha <= 0.0 or beta <= 0.0 or theta0 <= 0.0:
        raise ValueError("alpha, beta and theta0 must all be positive")
    inner = (
        2.0
        + 2.0 * beta / theta0
        - 0.5 * math.log(2.0 * math.pi)
        - (alpha * math.log(beta) - ln_gamma(alpha))
        + alpha * math.log(theta0)
    )
    value = 0.5 + max(0.0, inner)
    if value <= 0.0:
        raise ValueError(f"rate constant must be positive, got {value!r}")
    return value


def kappa_sq(n: int, C9: float) -> float:
    """Plain posterior-fit rate term C9 * log(n)/n; needs n >= 2."""
    if int(n) < 2:
        raise ValueError(f"sample size must be >= 2 (log 1 degenerates the rate), got {n!r}")
    if C9 <= 0.0:
        raise ValueError(f"C9 must be positive, got {C9!r}")
    return C9 * math.log(n) / float(n)


def eta_log_bound(n: int, C9: float, C8_prime: float) -> float:
    """Log-risk rate term: C9*log(n)/n, plus (-C8')*log(n)/n when the floor log is negative."""
    base = kappa_sq(n, C9)
    if not math.isfinite(C8_prime):
        raise ValueError(f"C8_prime must be finite, got {C8_prime!r}")
    if C8_prime >= 0.0:
        return base
    return (-C8_prime + C9) * math.log(n) / float(n)


def decision_gap_bound(n: int, rate_term: float, growth_C: float, consts: BoundConstants) -> float:
    """[2*tau*sqrt(M*rate_term)/growth_C]^(1/delta), holding with probability 1 - 1/tau."""
    if int(n) < 1:
        raise ValueError(f"sample size must be >= 1, got {n!r}")
    if rate_term <= 0.0 or not math.isfinite(rate_term):
        raise ValueError(f"rate term must be positive, got {rate_term!r}")
    if growth_C <= 0.0 or not math.isfinite(growth_C):
        raise ValueError(f"growth constant must be positive, got {growth_C!r}")
    return (2.0 * consts.tau * math.sqrt(consts.M * rate_term) / growth_C) ** (1.0 / consts.delta)


def value_gap_bound(n: int, rate_term: float, consts: BoundConstants) -> float:
    """sqrt(M * rate_term): bound on the expected optimal-value gap."""
    if int(n) < 1:
        raise ValueError(f"sample size must be >= 1, got {n!r}")
    if rate_term <= 0.0 or not math.isfinite(rate_term):
        raise ValueError(f"rate term must be positive, got {rate_term!r}")
    return math.sqrt(consts.M * rate_term)


def combined_gap_bound(
    n: int,
    consts: BoundConstants,
    eta: float | None = None,
    C1_growth: float | None = None,
    Cf_growth: float | None = None,
) -> float:
    """Bound on the distance between the exact-posterior and tilted decisions.

    2*[2*tau*sqrt(M*eps^2)/C1]^(1/delta) + 2*[2*tau*sqrt(M*(eps^2+eta))/Cf]^(1/delta),
    holding with probability 1 - 2/tau. eta and the growth constants default
    to the values pinned in consts.
    """
    eps = epsilon_sq(n)
    if eta is None:
        if consts.C9 is None:
            raise ValueError("eta not given and consts.C9 unset")
        eta = eta_log_bound(n, consts.C9, -(consts.C8 or 0.0))
    if eta < 0.0 or not math.isfinite(eta):
        raise ValueError(f"eta must be nonnegative, got {eta!r}")
    C1 = C1_growth if C1_growth is not None else consts.C1_growth
    Cf = Cf_growth if Cf_growth is not None else consts.Clog_growth
    if C1 is None or Cf is None:
        raise ValueError("growth constants must be given or pinned in consts")
    exact_part = decision_gap_bound(n, eps, C1, consts)
    tilted_part = decision_gap_bound(n, eps + eta, Cf, consts)
    return 2.0 * exact_part + 2.0 * tilted_part
