"""Mean queue length bounds for a queue driven by two marked chains.

Given an arrival chain and a completion chain, the mean queue length
decomposes into a fully explicit term plus an empty-queue correction that
is sandwiched by the extreme relative values of the two chains:

    explicit = (rho * E[dA(weighted arrival state)]
                + E[dC(weighted completion state)] + rho) / (1 - rho)

    explicit + dA_min - dC_max  <=  E[Q]  <=  explicit + dA_max - dC_min

and (1 - rho) * E[Q] converges to the heavy-traffic constant
E[dA(weighted)] + E[dC(weighted)] + 1 as rho -> 1.

``drift_self_check`` evaluates the closed-form drift of the quadratic
test function q * (q + 2*dA - 2*dC) and verifies it against the raw
per-transition sums, cross-validating the delta solutions end to end.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chain import ChainAnalysis, MarkedChain, analyze, validate
from .errors import DomainError, InstabilityError, SelfCheckError, StructuralError
from .relative import RelativeValues, solve_relative

_DRIFT_RTOL = 1e-10


@dataclass(frozen=True)
class AnalyzedChain:
    """A marked chain bundled with its stationary analysis and relative values."""

    chain: MarkedChain
    analysis: ChainAnalysis
    relative: RelativeValues

    @property
    def event_rate(self) -> float:
        return self.analysis.event_rate


@dataclass(frozen=True)
class MamsSystem:
    """An arrival chain and a completion chain forming one stable queue."""

    arrival: AnalyzedChain
    completion: AnalyzedChain
    rho: float

    @property
    def lam(self) -> float:
        return self.arrival.event_rate

    @property
    def mu(self) -> float:
        return self.completion.event_rate


@dataclass(frozen=True)
class QueueLengthBounds:
    explicit_term: float
    lower: float
    upper: float
    heavy_traffic_constant: float
    e_delta_arrival_weighted: float
    e_delta_comp_weighted: float


def analyze_chain(chain: MarkedChain) -> AnalyzedChain:
    """Validate, analyze and solve relative values for one chain."""
    report = validate(chain)
    if not report.ok:
        raise StructuralError(
            "chain failed validation: " + "; ".join(report.violations),
            violations=report.violations,
        )
    analysis = analyze(chain)
    return AnalyzedChain(chain, analysis, solve_relative(chain, analysis))


def build_system(
    arrival_chain: MarkedChain,
    completion_chain: MarkedChain,
    allow_unstable: bool = False,
) -> MamsSystem:
    """Assemble a system from its two chains, checking stability.

    rho >= 1 raises InstabilityError unless allow_unstable is set (used
    for exploratory simulation only; bound computations still refuse).
    """
    arrival = analyze_chain(arrival_chain)
    completion = analyze_chain(completion_chain)
    if arrival.event_rate <= 0.0:
        raise DomainError("arrival chain has zero event rate (no mark-1 transitions)")
    if completion.event_rate <= 0.0:
        raise DomainError("completion chain has zero event rate (no mark-1 transitions)")
    rho = arrival.event_rate / completion.event_rate
    if rho >= 1.0 and not allow_unstable:
        raise InstabilityError(
            f"unstable system: lambda = {arrival.event_rate:.12g} >= mu = {completion.event_rate:.12g}"
        )
    return MamsSystem(arrival, completion, rho)


def bounds(system: MamsSystem) -> QueueLengthBounds:
    """Explicit term, sandwich bounds and heavy-traffic constant."""
    if system.rho >= 1.0:
        raise InstabilityError(
            f"bounds require rho < 1: lambda = {system.lam:.12g}, mu = {system.mu:.12g}"
        )
    e_da = float(system.arrival.analysis.event_weighted_dist @ system.arrival.relative.delta)
    e_dc = float(
        system.completion.analysis.event_weighted_dist @ system.completion.relative.delta
    )
    rho = system.rho
    explicit = (rho * e_da + e_dc + rho) / (1.0 - rho)
    lower = explicit + system.arrival.relative.min_value - system.completion.relative.max_value
    upper = explicit + system.arrival.relative.max_value - system.completion.relative.min_value
    return QueueLengthBounds(
        explicit_term=explicit,
        lower=lower,
        upper=upper,
        heavy_traffic_constant=e_da + e_dc + 1.0,
        e_delta_arrival_weighted=e_da,
        e_delta_comp_weighted=e_dc,
    )


@dataclass(frozen=True)
class DriftTables:
    """Per-state constants of the closed-form drift of the test function.

    drift(q, ia, ic) = (q_coef_arrival + q_coef_completion) * q
                       + arrival_const[ia, ic]
                       + completion_pos_const[ia, ic] * 1{q > 0}
    """

    q_coef_arrival: float
    q_coef_completion: float
    arrival_const: np.ndarray
    completion_pos_const: np.ndarray


def drift_tables(system: MamsSystem) -> DriftTables:
    arr, comp = system.arrival, system.completion
    da, dc = arr.relative.delta, comp.relative.delta
    lam_vec = arr.analysis.per_state_event_rate
    mu_vec = comp.analysis.per_state_event_rate
    # ra[i] = sum_j rate(i->j, mark 1) * dA(j); sc analogous for completions.
    ra = arr.chain.rate_matrix(mark=1) @ da
    sc = comp.chain.rate_matrix(mark=1) @ dc
    arrival_const = np.outer(lam_vec, 1.0 - 2.0 * dc) + 2.0 * ra[:, None]
    completion_pos_const = np.outer(1.0 - 2.0 * da, mu_vec) + 2.0 * sc[None, :]
    return DriftTables(
        q_coef_arrival=2.0 * system.lam,
        q_coef_completion=-2.0 * system.mu,
        arrival_const=arrival_const,
        completion_pos_const=completion_pos_const,
    )


def _test_function(q: float, da: float, dc: float) -> float:
    return q * (q + 2.0 * da - 2.0 * dc)


def drift_terms_from_definition(
    system: MamsSystem, state: tuple[int, int, int]
) -> tuple[float, float]:
    """Arrival and completion drift terms evaluated from raw transition sums."""
    q, ia, ic = state
    da = system.arrival.relative.delta
    dc = system.completion.relative.delta
    base = _test_function(q, da[ia], dc[ic])
    g_a = 0.0
    for t in system.arrival.chain.transitions:
        if t.source == ia:
            g_a += t.rate * (_test_function(q + t.mark, da[t.target], dc[ic]) - base)
    g_c = 0.0
    for t in system.completion.chain.transitions:
        if t.source == ic:
            unused = max(t.mark - q, 0)
            g_c += t.rate * (_test_function(q - t.mark + unused, da[ia], dc[t.target]) - base)
    return g_a, g_c


def drift_self_check(system: MamsSystem, state: tuple[int, int, int]) -> tuple[float, float]:
    """Closed-form drift terms at one state, verified against the definition.

    Returns (g_arrival, g_completion). Raises SelfCheckError if the closed
    forms disagree with the definitional sums, which would indicate an
    inconsistent delta solution.
    """
    q, ia, ic = state
    if q < 0 or q != int(q):
        raise DomainError(f"queue length must be a nonnegative integer, got {q}")
    tables = drift_tables(system)
    g_a = tables.q_coef_arrival * q + tables.arrival_const[ia, ic]
    g_c = tables.q_coef_completion * q + (
        tables.completion_pos_const[ia, ic] if q > 0 else 0.0
    )
    g_a_def, g_c_def = drift_terms_from_definition(system, state)
    tol = _DRIFT_RTOL * max(1.0, abs(g_a_def), abs(g_c_def))
    if abs(g_a - g_a_def) > tol or abs(g_c - g_c_def) > tol:
        raise SelfCheckError(
            f"drift closed form disagrees with definition at state {state}: "
            f"({g_a:.12g}, {g_c:.12g}) vs ({g_a_def:.12g}, {g_c_def:.12g})"
        )
    return g_a, g_c
