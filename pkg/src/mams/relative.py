"""Relative arrivals / relative completions of a marked chain.

For a chain with long-run event rate ``lam``, the relative value of state
``i`` is the limiting excess expected event count when starting from
``i``::

    delta(i) = lim_{t -> inf}  E[events by t | start in i] - lam * t

``solve_relative`` obtains delta by solving the Poisson equations of the
underlying Markov reward process, pinned down by the zero-stationary-mean
normalization. ``transient_oracle`` approximates the defining limit
directly by uniformization and is kept independent of the linear solve so
the two can cross-validate each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy import stats

from .chain import ChainAnalysis, MarkedChain, analyze, validate
from .errors import DomainError, NumericalError, OracleBudgetError, StructuralError

# Residual tolerances, relative to the largest transition rate (Poisson
# system) and to the magnitude of delta (normalization).
POISSON_RTOL = 1e-10
MEAN_ZERO_RTOL = 1e-12

# Default truncation error target for the uniformization oracle.
ORACLE_TRUNCATION_TOL = 1e-9

_CHUNK = 1 << 16


@dataclass(frozen=True)
class RelativeValues:
    """The vector delta over chain states, normalized to zero stationary mean."""

    delta: np.ndarray
    max_value: float
    min_value: float
    stationary_mean_residual: float

    def __post_init__(self):
        d = np.ascontiguousarray(self.delta, dtype=float)
        d.setflags(write=False)
        object.__setattr__(self, "delta", d)


def poisson_system(chain: MarkedChain, analysis: ChainAnalysis) -> tuple[np.ndarray, np.ndarray]:
    """Left-hand matrix and right-hand side of the Poisson equations.

    Row i reads:  exit_rate_i * delta_i - sum_j rate(i->j) * delta_j
                  = event_rate_i - event_rate.
    Self-loop rates appear on both sides of the row and cancel.
    """
    rall = chain.rate_matrix()
    m = np.diag(chain.exit_rates()) - rall
    rhs = analysis.per_state_event_rate - analysis.event_rate
    return m, rhs


def solve_relative(chain: MarkedChain, analysis: ChainAnalysis) -> RelativeValues:
    """Solve for delta with the stationary-mean-zero normalization.

    The Poisson system has a one-dimensional null space (the all-ones
    vector), so the pi-weighted normalization row is appended and the
    augmented (n+1) x n system is solved by least squares. Residuals are
    verified afterwards; failure raises NumericalError.
    """
    n = chain.n
    m, rhs = poisson_system(chain, analysis)
    a = np.vstack([m, analysis.pi])
    b = np.append(rhs, 0.0)
    delta, _, rank, _ = np.linalg.lstsq(a, b, rcond=None)
    delta = delta + 0.0  # normalize negative zeros
    if rank < n:
        raise NumericalError(f"augmented Poisson system is rank deficient (rank {rank} < {n})")

    scale = max(chain.max_rate(), 1.0)
    poisson_res = float(np.max(np.abs(m @ delta - rhs))) if n else 0.0
    mean_res = float(analysis.pi @ delta)
    if poisson_res > POISSON_RTOL * scale:
        raise NumericalError(
            f"Poisson residual {poisson_res:.3e} exceeds {POISSON_RTOL * scale:.3e}"
        )
    if abs(mean_res) > MEAN_ZERO_RTOL * max(1.0, float(np.max(np.abs(delta)))):
        raise NumericalError(f"stationary mean of delta is {mean_res:.3e}, expected 0")

    return RelativeValues(
        delta=delta,
        max_value=float(np.max(delta)),
        min_value=float(np.min(delta)),
        stationary_mean_residual=mean_res,
    )


def drift_residuals(
    chain: MarkedChain, analysis: ChainAnalysis, rel: RelativeValues
) -> np.ndarray:
    """Per-state residual of the one-transition identity for delta.

    Entry i is  sum_{j,mark} rate(i->j,mark) * (delta_j - delta_i + mark)
    minus the long-run event rate; all entries vanish for a correct delta.
    """
    res = np.full(chain.n, -analysis.event_rate)
    d = rel.delta
    for t in chain.transitions:
        res[t.source] += t.rate * (d[t.target] - d[t.source] + t.mark)
    return res


def default_oracle_horizon(chain: MarkedChain) -> float:
    """Test horizon heuristic: 50 over the slowest state-changing outflow.

    A conservative multiple of the chain's slowest switching timescale.
    Callers may pass any other horizon to ``transient_oracle``.
    """
    out = chain.state_change_rates()
    positive = out[out > 0]
    if positive.size == 0:
        return 1.0
    return 50.0 / float(np.min(positive))


@njit(cache=True)
def _uniformization_sum(p, v, lam_vec, lam, tau, eps_v):
    """Accumulate sum_k tau_k * (v_k . lam_vec - lam) over one weight chunk.

    v is advanced in place through v_{k+1} = v_k P. Returns the partial
    sum, the consumed time mass, steps done, and a convergence flag set
    once successive v iterates differ by less than eps_v in L1.
    """
    n = v.shape[0]
    acc = 0.0
    tmass = 0.0
    w = np.empty(n)
    for k in range(tau.shape[0]):
        phi = -lam
        for i in range(n):
            phi += v[i] * lam_vec[i]
        acc += tau[k] * phi
        tmass += tau[k]
        diff = 0.0
        for j in range(n):
            s = 0.0
            for i in range(n):
                s += v[i] * p[i, j]
            w[j] = s
            diff += abs(s - v[j])
        for j in range(n):
            v[j] = w[j]
        if diff <= eps_v:
            return acc, tmass, k + 1, True
    return acc, tmass, tau.shape[0], False


def transient_oracle(
    chain: MarkedChain,
    start_state: int,
    horizon: float,
    step_budget: int | None = None,
) -> float:
    """Expected excess event count by ``horizon`` when starting in ``start_state``.

    Computes E[events by horizon] - event_rate * horizon by uniformizing
    the state process and integrating the event intensity along the
    transient distribution:

        result = sum_k tau_k * (v_k . lam_vec - lam),
        tau_k  = P(Poisson(Lambda * horizon) > k) / Lambda,
        v_k    = start distribution advanced k uniformized steps.

    As the horizon grows the result converges geometrically (at the
    chain's mixing rate) to delta(start_state). The summation stops early
    once v_k has numerically reached stationarity, adding the remaining
    time mass against the final intensity. If ``step_budget`` terms are
    exhausted first and the remaining truncation error bound exceeds the
    target, OracleBudgetError carries the partial estimate and the bound.
    """
    report = validate(chain)
    if not report.ok:
        raise StructuralError(
            "chain failed validation: " + "; ".join(report.violations),
            violations=report.violations,
        )
    if not (0 <= start_state < chain.n):
        raise DomainError(f"start_state {start_state} out of range for {chain.n} states")
    if not (horizon > 0.0 and np.isfinite(horizon)):
        raise DomainError(f"horizon must be positive and finite, got {horizon}")

    analysis = analyze(chain)
    lam = analysis.event_rate
    lam_vec = analysis.per_state_event_rate
    q = chain.generator()
    rate_out = -np.diag(q)
    big = float(np.max(rate_out))
    if big == 0.0:
        # No state changes: the event intensity never deviates from lam.
        return 0.0

    p = np.eye(chain.n) + q / big
    a = big * horizon
    # Enough terms that the untouched Poisson tail is negligible.
    k_full = int(math.ceil(a + 12.0 * math.sqrt(a + 25.0) + 30.0))
    k_cap = k_full if step_budget is None else min(k_full, int(step_budget))

    v = np.zeros(chain.n)
    v[start_state] = 1.0
    dev_scale = float(np.max(np.abs(lam_vec - lam)))
    eps_v = 1e-14

    acc = 0.0
    tmass = 0.0
    done = 0
    converged = False
    while done < k_cap and not converged:
        hi = min(done + _CHUNK, k_cap)
        tau = stats.poisson.sf(np.arange(done, hi), a) / big
        part, mass, steps, converged = _uniformization_sum(p, v, lam_vec, lam, tau, eps_v)
        acc += part
        tmass += mass
        done += steps

    remaining = max(horizon - tmass, 0.0)
    if converged or done >= k_full:
        # Remaining mass contributes the (numerically stationary) intensity.
        phi = float(v @ lam_vec - lam)
        return acc + remaining * phi

    bound = remaining * dev_scale
    if bound > ORACLE_TRUNCATION_TOL:
        raise OracleBudgetError(
            f"step budget {step_budget} exhausted with truncation bound {bound:.3e}",
            partial=acc,
            error_bound=bound,
        )
    return acc
