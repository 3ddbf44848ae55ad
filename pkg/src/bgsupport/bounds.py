"""Closed-form constants and probability lower bounds for support recovery.

``Np`` is treated as a real number throughout; only cardinality caps are
floored.  Probability lower bounds can go negative when ``Np`` is small.
They are clamped to [0, 1], and the raw value is kept next to a
``vacuous`` flag.
"""

import math
from dataclasses import dataclass

from .errors import DomainError

LN2_TERM = 2.0 * math.log(2.0) - 1.0


@dataclass(frozen=True)
class BoundParams:
    beta: float = 2.0
    beta_bar: float = 25.0

    def __post_init__(self):
        if not self.beta > 1:
            raise DomainError(f"beta must exceed 1, got {self.beta}")
        if not self.beta_bar > 1:
            raise DomainError(f"beta_bar must exceed 1, got {self.beta_bar}")


@dataclass(frozen=True)
class Theorem1Result:
    C: float
    K1: float
    energy_bound: float
    norm_bound: float
    prob_lower: float
    prob_lower_unclamped: float
    vacuous: bool


@dataclass(frozen=True)
class Theorem2Result:
    K1: float
    K2: float
    K3: float
    K4: float
    mu_threshold_no_miss: float
    mu_threshold_perfect: float
    prob_no_miss: float
    prob_perfect: float
    prob_unclamped: float
    vacuous: bool


def _clamp(v):
    return min(1.0, max(0.0, v))


def _rate(beta):
    # exponent rate beta - 1 - ln beta, positive for beta > 1
    return beta - 1.0 - math.log(beta)


def constant_C(params):
    """``ln(1 + 4 sigma1^2 / (3 sigma_e^2)) + 2 ln((1-p)/p)``.

    Returns ``inf`` in the degenerate limit ``p == 0``.
    """
    p = params.p
    if not 0 <= p < 0.5:
        raise DomainError(f"need 0 < p < 1/2, got {p}")
    snr_term = math.log1p(4.0 * params.snr_ratio / 3.0)
    if p == 0:
        return math.inf
    return snr_term + 2.0 * math.log((1.0 - p) / p)


def k1_constant(C, beta):
    return 2.0 * (math.sqrt(7.0 * beta + C) + math.sqrt(beta))


def event_E_prob_lower(params):
    """Chernoff lower bound on ``P[|S| <= 2Np]``: ``1 - exp(-Np (2 ln 2 - 1))``."""
    return 1.0 - math.exp(-params.Np * LN2_TERM)


def chi_sq_tail_bound(n, beta):
    """Upper bound ``exp(-(n/2)(beta - 1 - ln beta))`` on ``P[Z > beta n sigma^2]``
    for a sum ``Z`` of ``n`` squared N(0, sigma^2) variables."""
    if not beta > 1:
        raise DomainError(f"beta must exceed 1, got {beta}")
    if n < 1:
        raise DomainError(f"n must be at least 1, got {n}")
    return math.exp(-0.5 * n * _rate(beta))


def theorem1_prob_unclamped(params, beta):
    return event_E_prob_lower(params) * (1.0 - 3.0 * math.exp(-params.Np * _rate(beta)))


def theorem1(params, bounds):
    """Missed-support energy bound: ``||x_missed|| <= K1 sqrt(Np) sigma_e``."""
    if not isinstance(bounds, BoundParams):
        bounds = BoundParams(beta=bounds)
    beta = bounds.beta
    C = constant_C(params)
    K1 = k1_constant(C, beta)
    root_np = math.sqrt(params.Np)
    raw = theorem1_prob_unclamped(params, beta)
    return Theorem1Result(
        C=C,
        K1=K1,
        energy_bound=K1**2 * params.Np * params.sigma_e**2,
        norm_bound=K1 * root_np * params.sigma_e,
        prob_lower=_clamp(raw),
        prob_lower_unclamped=raw,
        vacuous=raw <= 0.0,
    )


def theorem2(params, bounds):
    """Mean-magnitude thresholds for no missed coefficient and for perfect
    recovery, with the shared probability lower bound."""
    beta, beta_bar = bounds.beta, bounds.beta_bar
    C = constant_C(params)
    K1 = k1_constant(C, beta)
    K2 = math.sqrt(beta_bar)
    Np = params.Np
    K3 = max(K2, 6.0 * math.sqrt(2.0 * beta * Np))
    K4 = max(K1, 3.0 * (0.5 + math.sqrt(3.0)) * math.sqrt(2.0 * beta))
    root_np = math.sqrt(Np)
    raw = event_E_prob_lower(params) * (
        1.0 - 3.0 * math.exp(-Np * _rate(beta)) - math.exp(-0.5 * _rate(beta_bar))
    )
    prob = _clamp(raw)
    return Theorem2Result(
        K1=K1,
        K2=K2,
        K3=K3,
        K4=K4,
        mu_threshold_no_miss=K2 * params.sigma1 + K1 * root_np * params.sigma_e,
        mu_threshold_perfect=K3 * params.sigma1 + K4 * root_np * params.sigma_e,
        prob_no_miss=prob,
        prob_perfect=prob,
        prob_unclamped=raw,
        vacuous=raw <= 0.0,
    )


def regression_error_bound(params, bounds, epsilon, *, strict=True):
    """Bound on ``||x_hat - x||`` for least squares on the estimated support:
    ``(K1 / (1-eps) + sqrt(beta / (1-eps))) sqrt(Np) sigma_e``.

    With ``strict`` (the default) ``epsilon`` must lie in [0, 1/3], the range
    under which K1 was derived.  ``strict=False`` admits any ``epsilon`` in
    [0, 1); that is only meaningful when the missed-energy bound is known to
    hold for the instance at hand.
    """
    upper = 1.0 / 3.0 if strict else 1.0
    ok = 0.0 <= epsilon <= upper if strict else 0.0 <= epsilon < upper
    if not ok:
        raise DomainError(f"epsilon={epsilon} outside the admissible range (upper {upper:.4g})")
    beta = bounds.beta
    K1 = k1_constant(constant_C(params), beta)
    scale = 1.0 - epsilon
    return (K1 / scale + math.sqrt(beta / scale)) * math.sqrt(params.Np) * params.sigma_e


def fig1_sweep(params, beta_grid):
    """Rows ``(beta, K1, prob_lower)`` for each beta in grid order."""
    rows = []
    for beta in beta_grid:
        res = theorem1(params, BoundParams(beta=float(beta)))
        rows.append((float(beta), res.K1, res.prob_lower))
    return rows
