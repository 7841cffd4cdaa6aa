"""Event-driven simulation of the joint (queue, arrival state, completion state) process.

The trajectory is a CTMC: in state (q, ia, ic) the total rate is the sum
of both chains' exit rates; the holding time is exponential and the next
transition is chosen proportionally to rate. A mark-1 arrival transition
increments the queue; a mark-1 completion transition decrements it, or is
recorded as unused service when the queue is already empty.

All estimators are time-weighted averages over the post-warmup horizon,
with batch-means confidence intervals over equal-time batches. The run is
bit-reproducible from (system, config): a first pass measures the total
simulated time, then an identical second pass accumulates per-batch
integrals of q and of the joint state occupancies, from which every
reported statistic is derived.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .bounds import MamsSystem, drift_tables
from .chain import MarkedChain
from .errors import ConfigError, EstimationError

# 97.5% normal quantile; batch-means CIs are approximate by construction.
Z95 = 1.959963984540054


@dataclass(frozen=True)
class SimConfig:
    """Run length, warmup, batching and seeding of one simulation."""

    seed: int
    num_events: int
    warmup_fraction: float = 0.05
    num_batches: int = 20
    initial_state: tuple[int, int, int] = (0, 0, 0)


@dataclass(frozen=True)
class SimEstimate:
    """Point estimate with a 95% batch-means confidence half-width."""

    mean: float
    ci_half_width: float
    batches_used: int


@dataclass(frozen=True)
class SimReport:
    """Estimates and exact event counts from one trajectory."""

    e_q: SimEstimate
    p_empty: SimEstimate
    p_joint_empty: tuple[SimEstimate, ...]
    unused_rate: SimEstimate
    e_u_term: SimEstimate
    drift_avg: SimEstimate
    total_arrivals: int
    total_completions: int
    unused_completions: int
    initial_q: int
    final_q: int
    total_time: float
    measured_time: float
    stable: bool


def derive_run_seed(root_seed: int, run_index: int) -> int:
    """Independent stream seed for run ``run_index`` of a sweep rooted at ``root_seed``."""
    ss = np.random.SeedSequence(entropy=(int(root_seed), int(run_index)))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> 1)


def _flatten(chain: MarkedChain):
    """CSR-style per-state transition tables for the event loop."""
    n = chain.n
    by_state: list[list] = [[] for _ in range(n)]
    for t in chain.transitions:
        by_state[t.source].append(t)
    offsets = np.zeros(n + 1, dtype=np.int64)
    for i in range(n):
        offsets[i + 1] = offsets[i] + len(by_state[i])
    m = int(offsets[-1])
    target = np.zeros(m, dtype=np.int64)
    mark = np.zeros(m, dtype=np.int64)
    rate = np.zeros(m, dtype=np.float64)
    out = np.zeros(n, dtype=np.float64)
    k = 0
    for i in range(n):
        for t in by_state[i]:
            target[k] = t.target
            mark[k] = t.mark
            rate[k] = t.rate
            out[i] += t.rate
            k += 1
    return offsets, target, mark, rate, out


@njit(cache=True)
def _run(
    seed,
    num_events,
    a_off,
    a_tgt,
    a_mark,
    a_rate,
    a_out,
    c_off,
    c_tgt,
    c_mark,
    c_rate,
    c_out,
    q0,
    ia0,
    ic0,
    warmup,
    batch_len,
    nb,
    record,
    b_time,
    b_intq,
    b_occ,
    b_occ0,
):
    np.random.seed(seed)
    t = 0.0
    q = q0
    ia = ia0
    ic = ic0
    arrivals = 0
    used = 0
    unused = 0
    for _ in range(num_events):
        ra = a_out[ia]
        total = ra + c_out[ic]
        dt = -math.log(1.0 - np.random.random()) / total

        if record and t + dt > warmup:
            lo = t if t > warmup else warmup
            hi = t + dt
            while lo < hi:
                b = int((lo - warmup) / batch_len)
                if b > nb - 1:
                    b = nb - 1
                edge = warmup + (b + 1.0) * batch_len
                if hi < edge or b == nb - 1:
                    seg_end = hi
                else:
                    seg_end = edge
                seg = seg_end - lo
                b_time[b] += seg
                b_intq[b] += q * seg
                b_occ[b, ia, ic] += seg
                if q == 0:
                    b_occ0[b, ia, ic] += seg
                lo = seg_end

        t += dt
        u = np.random.random() * total
        if u < ra:
            j = a_off[ia]
            last = a_off[ia + 1] - 1
            acc = a_rate[j]
            while acc < u and j < last:
                j += 1
                acc += a_rate[j]
            if a_mark[j] == 1:
                q += 1
                arrivals += 1
            ia = a_tgt[j]
        else:
            v = u - ra
            j = c_off[ic]
            last = c_off[ic + 1] - 1
            acc = c_rate[j]
            while acc < v and j < last:
                j += 1
                acc += c_rate[j]
            if c_mark[j] == 1:
                if q > 0:
                    q -= 1
                    used += 1
                else:
                    unused += 1
            ic = c_tgt[j]
    return t, q, arrivals, used, unused


def _validate_config(system: MamsSystem, config: SimConfig) -> None:
    problems = []
    if not isinstance(config.seed, int) or config.seed < 0:
        problems.append(f"seed must be a nonnegative integer, got {config.seed!r}")
    if config.num_batches < 10:
        problems.append(f"num_batches must be at least 10, got {config.num_batches}")
    if config.num_events < 10 * config.num_batches:
        problems.append(
            f"num_events must be at least 10 * num_batches, got {config.num_events}"
        )
    if not (0.0 <= config.warmup_fraction < 0.5):
        problems.append(
            f"warmup_fraction must lie in [0, 0.5), got {config.warmup_fraction}"
        )
    q0, ia0, ic0 = config.initial_state
    if q0 < 0:
        problems.append(f"initial queue length must be nonnegative, got {q0}")
    if not (0 <= ia0 < system.arrival.chain.n):
        problems.append(f"initial arrival state {ia0} out of range")
    if not (0 <= ic0 < system.completion.chain.n):
        problems.append(f"initial completion state {ic0} out of range")
    if problems:
        raise ConfigError("; ".join(problems))


def _estimate(integrals: np.ndarray, batch_time: np.ndarray) -> SimEstimate:
    nb = len(batch_time)
    means = integrals / batch_time
    mean = float(integrals.sum() / batch_time.sum())
    sd = float(np.std(means, ddof=1))
    return SimEstimate(mean, Z95 * sd / math.sqrt(nb), nb)


def simulate(system: MamsSystem, config: SimConfig) -> SimReport:
    """Run one seeded trajectory and report time-average estimates.

    Works for unstable systems too (report.stable is False and the
    unused-service functional is not formed), so overload can be explored.
    """
    _validate_config(system, config)
    a_off, a_tgt, a_mark, a_rate, a_out = _flatten(system.arrival.chain)
    c_off, c_tgt, c_mark, c_rate, c_out = _flatten(system.completion.chain)
    na = system.arrival.chain.n
    nc = system.completion.chain.n
    q0, ia0, ic0 = config.initial_state
    nb = config.num_batches
    seed32 = int(np.random.SeedSequence(int(config.seed)).generate_state(1)[0])

    dummy_t = np.zeros(1)
    dummy_q = np.zeros(1)
    dummy_occ = np.zeros((1, na, nc))
    dummy_occ0 = np.zeros((1, na, nc))
    total_time, _, _, _, _ = _run(
        seed32, config.num_events,
        a_off, a_tgt, a_mark, a_rate, a_out,
        c_off, c_tgt, c_mark, c_rate, c_out,
        q0, ia0, ic0,
        np.inf, 1.0, 1, False,
        dummy_t, dummy_q, dummy_occ, dummy_occ0,
    )

    warmup = config.warmup_fraction * total_time
    batch_len = (total_time - warmup) / nb
    b_time = np.zeros(nb)
    b_intq = np.zeros(nb)
    b_occ = np.zeros((nb, na, nc))
    b_occ0 = np.zeros((nb, na, nc))
    total_time2, q_final, arrivals, used, unused = _run(
        seed32, config.num_events,
        a_off, a_tgt, a_mark, a_rate, a_out,
        c_off, c_tgt, c_mark, c_rate, c_out,
        q0, ia0, ic0,
        warmup, batch_len, nb, True,
        b_time, b_intq, b_occ, b_occ0,
    )
    assert total_time2 == total_time

    mu_vec = system.completion.analysis.per_state_event_rate
    da = system.arrival.relative.delta
    dc = system.completion.relative.delta
    lam = system.lam
    mu = system.mu

    empty_by_batch = b_occ0.sum(axis=(1, 2))
    e_q = _estimate(b_intq, b_time)
    p_empty = _estimate(empty_by_batch, b_time)
    p_joint_empty = tuple(
        _estimate(b_occ0[:, i, :].sum(axis=1), b_time) for i in range(na)
    )
    unused_rate = _estimate(np.einsum("bac,c->b", b_occ0, mu_vec), b_time)

    # h0[ia, ic] integrated over empty-queue time, divided by mu - lam,
    # estimates the empty-queue correction of the exact mean formula.
    sc = system.completion.chain.rate_matrix(mark=1) @ dc
    h0 = np.outer(da, mu_vec) - sc[None, :]
    if mu > lam:
        numer = _estimate(np.einsum("bac,ac->b", b_occ0, h0), b_time)
        e_u_term = SimEstimate(
            numer.mean / (mu - lam), numer.ci_half_width / (mu - lam), nb
        )
    else:
        e_u_term = SimEstimate(float("nan"), float("inf"), nb)

    tables = drift_tables(system)
    q_coef = tables.q_coef_arrival + tables.q_coef_completion
    drift_int = (
        q_coef * b_intq
        + np.einsum("bac,ac->b", b_occ, tables.arrival_const)
        + np.einsum("bac,ac->b", b_occ - b_occ0, tables.completion_pos_const)
    )
    drift_avg = _estimate(drift_int, b_time)

    return SimReport(
        e_q=e_q,
        p_empty=p_empty,
        p_joint_empty=p_joint_empty,
        unused_rate=unused_rate,
        e_u_term=e_u_term,
        drift_avg=drift_avg,
        total_arrivals=int(arrivals),
        total_completions=int(used),
        unused_completions=int(unused),
        initial_q=int(q0),
        final_q=int(q_final),
        total_time=float(total_time),
        measured_time=float(b_time.sum()),
        stable=system.rho < 1.0,
    )


def estimate_empty_conditional(
    system: MamsSystem, report: SimReport
) -> tuple[SimEstimate, ...]:
    """Per-arrival-state P(arrival state | empty queue) with propagated CI.

    The half-width is conservative: the ratio times the sum of the two
    relative half-widths. Raises EstimationError when no empty-queue time
    was observed.
    """
    pe = report.p_empty
    if not (pe.mean > 0.0):
        raise EstimationError("no empty-queue time observed; run longer or reduce load")
    out = []
    for est in report.p_joint_empty:
        ratio = est.mean / pe.mean
        if est.mean > 0.0:
            rel = est.ci_half_width / est.mean + pe.ci_half_width / pe.mean
            ci = ratio * rel
        else:
            ci = est.ci_half_width / pe.mean
        out.append(SimEstimate(ratio, ci, min(est.batches_used, pe.batches_used)))
    return tuple(out)
