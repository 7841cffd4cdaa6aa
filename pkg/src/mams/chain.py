"""Finite-state marked continuous-time Markov chains.

A marked chain is the modulating process on one side of the queue. Each
transition carries a 0/1 mark recording whether the transition is
accompanied by an event: an arrival for the arrival chain, a (potential)
completion for the completion chain. Self-transitions are only meaningful
with mark 1; a mark-0 self-loop would be unobservable and is rejected.

State identifiers are opaque labels mapped to dense indices at
construction time; all internal math is index-based.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import NumericalError, StructuralError

# Tolerance for the stationary balance residual, relative to the largest
# transition rate.
BALANCE_RTOL = 1e-12

# Condition numbers beyond this make the balance solve untrustworthy.
_COND_LIMIT = 1e14


@dataclass(frozen=True)
class Transition:
    """One transition ``source -> target`` with an event mark and a rate (1/time)."""

    source: int
    target: int
    mark: int
    rate: float


@dataclass(frozen=True)
class MarkedChain:
    """A finite-state CTMC whose transitions carry a 0/1 event mark.

    Instances are immutable; helper methods return fresh arrays.
    """

    states: tuple[str, ...]
    transitions: tuple[Transition, ...]

    def __init__(self, states: Sequence[str], transitions: Iterable):
        object.__setattr__(self, "states", tuple(str(s) for s in states))
        object.__setattr__(
            self,
            "transitions",
            tuple(
                t if isinstance(t, Transition) else Transition(int(t[0]), int(t[1]), int(t[2]), float(t[3]))
                for t in transitions
            ),
        )

    @property
    def n(self) -> int:
        return len(self.states)

    def rate_matrix(self, mark: int | None = None) -> np.ndarray:
        """Matrix of total rates i -> j, optionally restricted to one mark.

        Self-loop rates land on the diagonal.
        """
        r = np.zeros((self.n, self.n))
        for t in self.transitions:
            if mark is None or t.mark == mark:
                r[t.source, t.target] += t.rate
        return r

    def generator(self) -> np.ndarray:
        """Generator of the state process (self-loops cancel and are omitted)."""
        q = self.rate_matrix()
        np.fill_diagonal(q, 0.0)
        np.fill_diagonal(q, -q.sum(axis=1))
        return q

    def exit_rates(self) -> np.ndarray:
        """Total outflow per state, self-loops included."""
        out = np.zeros(self.n)
        for t in self.transitions:
            out[t.source] += t.rate
        return out

    def state_change_rates(self) -> np.ndarray:
        """Total state-changing (off-diagonal) outflow per state."""
        out = np.zeros(self.n)
        for t in self.transitions:
            if t.source != t.target:
                out[t.source] += t.rate
        return out

    def event_rates(self) -> np.ndarray:
        """Per-state total mark-1 rate (lambda_i or mu_i)."""
        out = np.zeros(self.n)
        for t in self.transitions:
            if t.mark == 1:
                out[t.source] += t.rate
        return out

    def max_rate(self) -> float:
        return max((t.rate for t in self.transitions), default=0.0)


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ChainAnalysis:
    """Stationary quantities of a marked chain.

    pi: stationary distribution of the state process.
    event_rate: long-run mark-1 event rate (lambda or mu).
    per_state_event_rate: total mark-1 rate out of each state.
    event_weighted_dist: state distribution reweighted by event intensity
        (all zeros when event_rate is 0).
    """

    pi: np.ndarray
    event_rate: float
    per_state_event_rate: np.ndarray
    event_weighted_dist: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "pi", _frozen(self.pi))
        object.__setattr__(self, "per_state_event_rate", _frozen(self.per_state_event_rate))
        object.__setattr__(self, "event_weighted_dist", _frozen(self.event_weighted_dist))


def _strongly_connected(n: int, edges: list[tuple[int, int]]) -> bool:
    if n <= 1:
        return True
    fwd = [[] for _ in range(n)]
    rev = [[] for _ in range(n)]
    for i, j in edges:
        if i != j:
            fwd[i].append(j)
            rev[j].append(i)

    def reaches_all(adj):
        seen = [False] * n
        seen[0] = True
        stack = [0]
        while stack:
            i = stack.pop()
            for j in adj[i]:
                if not seen[j]:
                    seen[j] = True
                    stack.append(j)
        return all(seen)

    return reaches_all(fwd) and reaches_all(rev)


def validate(chain: MarkedChain) -> ValidationReport:
    """Check all structural invariants; violations are returned, not raised."""
    v: list[str] = []
    n = chain.n
    if n < 1:
        v.append("chain must have at least one state")
    if len(set(chain.states)) != n:
        v.append("duplicate state labels")

    seen: set[tuple[int, int, int]] = set()
    edges: list[tuple[int, int]] = []
    indices_ok = True
    for k, t in enumerate(chain.transitions):
        if not (0 <= t.source < n and 0 <= t.target < n):
            v.append(f"transition {k}: state index out of range")
            indices_ok = False
            continue
        if t.mark not in (0, 1):
            v.append(f"transition {k}: mark must be 0 or 1, got {t.mark}")
        if not (t.rate > 0.0 and np.isfinite(t.rate)):
            v.append(f"transition {k}: rate must be positive and finite, got {t.rate}")
        if t.source == t.target and t.mark == 0:
            v.append(f"transition {k}: mark-0 self-loop on state {chain.states[t.source]}")
        key = (t.source, t.target, t.mark)
        if key in seen:
            v.append(
                f"duplicate transition {chain.states[t.source]}->{chain.states[t.target]} mark {t.mark}"
            )
        seen.add(key)
        edges.append((t.source, t.target))

    if indices_ok and n >= 1 and not _strongly_connected(n, edges):
        v.append("chain is not irreducible (state graph is not strongly connected)")

    return ValidationReport(tuple(v))


def analyze(chain: MarkedChain) -> ChainAnalysis:
    """Stationary distribution, event rates and the event-weighted state law.

    Solves global balance with one equation replaced by normalization,
    followed by one step of iterative refinement. Raises StructuralError
    for invalid chains and NumericalError when the balance system is
    singular or leaves residuals above tolerance.
    """
    report = validate(chain)
    if not report.ok:
        raise StructuralError(
            "chain failed validation: " + "; ".join(report.violations),
            violations=report.violations,
        )

    n = chain.n
    q = chain.generator()
    scale = max(chain.max_rate(), 1.0)

    if n == 1:
        pi = np.ones(1)
    else:
        a = q.T.copy()
        a[-1, :] = 1.0
        b = np.zeros(n)
        b[-1] = 1.0
        try:
            pi = np.linalg.solve(a, b)
            pi += np.linalg.solve(a, b - a @ pi)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(
                f"balance system is singular: {exc}",
                condition_estimate=float("inf"),
            ) from exc
        cond = float(np.linalg.cond(a))
        residual = float(np.max(np.abs(pi @ q)))
        if not np.isfinite(pi).all() or residual > BALANCE_RTOL * scale or cond > _COND_LIMIT:
            raise NumericalError(
                f"balance solve residual {residual:.3e} exceeds {BALANCE_RTOL * scale:.3e}",
                condition_estimate=cond,
            )

    lam_vec = chain.event_rates()
    lam = float(pi @ lam_vec)
    if lam > 0.0:
        weighted = (pi @ chain.rate_matrix(mark=1)) / lam
    else:
        weighted = np.zeros(n)
    return ChainAnalysis(pi, lam, lam_vec, weighted)
