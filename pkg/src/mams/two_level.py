"""Closed forms for the two-level arrival system with exponential service.

Arrivals alternate between a high rate and a low rate; switching is
exponential with rates alpha_h (high -> low) and alpha_l (low -> high),
and service is a single exponential rate mu. Everything here is explicit
algebra; the generic pipeline (chain -> relative -> bounds) reproduces
these numbers through ``to_mams``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .chain import MarkedChain
from .errors import DomainError, InstabilityError


@dataclass(frozen=True)
class TwoLevelParams:
    """Rates of the two-level system. Labels are normalized so lambda_h >= lambda_l."""

    lambda_h: float
    lambda_l: float
    alpha_h: float
    alpha_l: float
    mu: float

    def __post_init__(self):
        for name in ("lambda_h", "lambda_l", "alpha_h", "alpha_l", "mu"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0.0):
                raise DomainError(f"{name} must be a positive finite rate, got {value!r}")
            object.__setattr__(self, name, float(value))
        if self.lambda_h < self.lambda_l:
            # Swap labels (and the matching switching rates) to keep the
            # convention that H is the higher arrival rate.
            lam_h, lam_l = self.lambda_l, self.lambda_h
            a_h, a_l = self.alpha_l, self.alpha_h
            object.__setattr__(self, "lambda_h", lam_h)
            object.__setattr__(self, "lambda_l", lam_l)
            object.__setattr__(self, "alpha_h", a_h)
            object.__setattr__(self, "alpha_l", a_l)

    @property
    def long_run_rate(self) -> float:
        a = self.alpha_h + self.alpha_l
        return (self.lambda_h * self.alpha_l + self.lambda_l * self.alpha_h) / a

    @property
    def intermittently_overloaded(self) -> bool:
        return self.lambda_h > self.mu


@dataclass(frozen=True)
class TwoLevelAnalysis:
    """Derived quantities of a stable two-level system."""

    params: TwoLevelParams
    lam: float
    rho: float
    delta_h: float
    delta_l: float
    e_delta_arrival: float
    p_h: float
    heavy_traffic_constant: float


@dataclass(frozen=True)
class EmptyProbBounds:
    """Bounds on P(high state | empty queue); slow bound needs lambda_h > mu."""

    lower: float
    upper_fast: float
    upper_slow: float | None


@dataclass(frozen=True)
class TwoLevelQueueBounds:
    lower: float
    upper_fast: float
    upper_slow: float | None
    upper: float


def analyze_two_level(params: TwoLevelParams) -> TwoLevelAnalysis:
    """Closed-form relative arrivals and weighted expectation.

    Raises InstabilityError when the long-run arrival rate reaches mu.
    """
    lam = params.long_run_rate
    if lam >= params.mu:
        raise InstabilityError(
            f"unstable two-level system: lambda = {lam:.12g} >= mu = {params.mu:.12g}"
        )
    a_sum = params.alpha_h + params.alpha_l
    gap = params.lambda_h - params.lambda_l
    delta_h = params.alpha_h * gap / a_sum**2
    delta_l = -params.alpha_l * gap / a_sum**2
    e_delta_arrival = gap**2 * params.alpha_l * params.alpha_h / (lam * a_sum**3)
    return TwoLevelAnalysis(
        params=params,
        lam=lam,
        rho=lam / params.mu,
        delta_h=delta_h,
        delta_l=delta_l,
        e_delta_arrival=e_delta_arrival,
        p_h=params.alpha_l / a_sum,
        heavy_traffic_constant=e_delta_arrival + 1.0,
    )


def mean_q_given_empty_prob(analysis: TwoLevelAnalysis, p_h_given_empty: float) -> float:
    """Exact mean queue length as a function of P(high state | empty queue).

    E[Q] = rho * (E[delta(weighted)] + 1) / (1 - rho)
           + slope * (p_h_given_empty - P(high state)),
    with slope = (lambda_h - lambda_l) / (alpha_h + alpha_l).
    """
    if not (0.0 <= p_h_given_empty <= 1.0):
        raise DomainError(f"p_h_given_empty must lie in [0, 1], got {p_h_given_empty}")
    p = analysis.params
    slope = (p.lambda_h - p.lambda_l) / (p.alpha_h + p.alpha_l)
    main = analysis.rho * (analysis.e_delta_arrival + 1.0) / (1.0 - analysis.rho)
    return main + slope * (p_h_given_empty - analysis.p_h)


def empty_prob_bounds(params: TwoLevelParams, analysis: TwoLevelAnalysis) -> EmptyProbBounds:
    """Bounds on P(high state | empty queue), clamped to [0, 1].

    The fast-switching bound is P(high state) itself. The slow-switching
    bound exists only under intermittent overload (lambda_h > mu).
    """
    upper_fast = min(analysis.p_h, 1.0)
    upper_slow = None
    if params.intermittently_overloaded:
        raw = (
            1.0
            / (1.0 - analysis.rho)
            / (params.lambda_h - params.mu)
            * (params.alpha_h * params.alpha_l / (params.alpha_h + params.alpha_l))
        )
        upper_slow = min(max(raw, 0.0), 1.0)
    return EmptyProbBounds(lower=0.0, upper_fast=upper_fast, upper_slow=upper_slow)


def e_q_bounds(params: TwoLevelParams, analysis: TwoLevelAnalysis) -> TwoLevelQueueBounds:
    """Mean queue length bounds specialized to the two-level system.

    lower plugs P(high | empty) = 0 into the exact characterization,
    upper_fast plugs in P(high state), and upper_slow (intermittent
    overload only) plugs in the slow-switching probability bound. The
    reported upper is the minimum of the available uppers.
    """
    p = params
    x = analysis.rho * (analysis.e_delta_arrival + 1.0) / (1.0 - analysis.rho)
    a_sum = p.alpha_h + p.alpha_l
    d = (p.lambda_h - p.lambda_l) / a_sum * analysis.p_h
    lower = x - d
    upper_fast = x
    upper_slow = None
    if p.intermittently_overloaded:
        upper_slow = x - d * (1.0 - p.alpha_h / ((1.0 - analysis.rho) * (p.lambda_h - p.mu)))
    upper = upper_fast if upper_slow is None else min(upper_fast, upper_slow)
    return TwoLevelQueueBounds(lower=lower, upper_fast=upper_fast, upper_slow=upper_slow, upper=upper)


def to_mams(params: TwoLevelParams) -> tuple[MarkedChain, MarkedChain]:
    """Embed the two-level system as a pair of marked chains.

    Arrival chain: states H, L with mark-1 self-loops at the level rates
    and mark-0 switching transitions. Completion chain: one state with a
    mark-1 self-loop at rate mu.
    """
    arrival = MarkedChain(
        states=("H", "L"),
        transitions=(
            (0, 0, 1, params.lambda_h),
            (1, 1, 1, params.lambda_l),
            (0, 1, 0, params.alpha_h),
            (1, 0, 0, params.alpha_l),
        ),
    )
    completion = MarkedChain(states=("X",), transitions=((0, 0, 1, params.mu),))
    return arrival, completion
