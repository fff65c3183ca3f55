"""Association policies: learning baselines and CSI-oracle benchmarks.

The oracle-CSI policies (max-SINR, WCS, exhaustive search) operate on a
frozen per-period channel realization; they are granted the full gain matrix
the learning policies never see.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .channel import PeriodChannel
from .errors import InfeasibleScaleError


class PolicyKind(str, Enum):
    SD_CC_UCB = "sd_cc_ucb"
    SD_CC_UCB_NO_HANDOVER = "sd_cc_ucb_no_handover"
    CC_UCB_ONLY = "cc_ucb_only"
    CUCB = "cucb"
    PLAIN_TS = "plain_ts"
    MAX_SINR = "max_sinr"
    WCS = "wcs"
    EXHAUSTIVE_ORACLE = "exhaustive_oracle"
    RANDOM = "random"


LEARNER_POLICIES = {PolicyKind.SD_CC_UCB, PolicyKind.SD_CC_UCB_NO_HANDOVER, PolicyKind.CC_UCB_ONLY}
ORACLE_CSI_POLICIES = {PolicyKind.MAX_SINR, PolicyKind.WCS, PolicyKind.EXHAUSTIVE_ORACLE}


@dataclass
class AssociationVector:
    """One serving BS per active vehicle."""

    by_vehicle: dict[int, int] = field(default_factory=dict)

    def as_array(self, ids: list[int]) -> np.ndarray:
        return np.array([self.by_vehicle.get(i, -1) for i in ids], dtype=np.int64)


def total_rate(chan: PeriodChannel, assoc: np.ndarray, prev: np.ndarray) -> float:
    if chan.n == 0:
        return 0.0
    return float(chan.rates(assoc, prev).sum())


def max_sinr_associate(chan: PeriodChannel, prev: np.ndarray) -> np.ndarray:
    """Each vehicle independently takes the BS with the highest SINR, with
    interference priced from the previous period's association."""
    if chan.n == 0:
        return np.zeros(0, dtype=np.int64)
    interf = chan.interference_matrix(prev)
    sinr = chan.params.tx_power_w * chan.signal_gain / interf
    return np.argmax(sinr, axis=1).astype(np.int64)


def _move_totals(chan: PeriodChannel, assoc: np.ndarray, prev: np.ndarray) -> np.ndarray:
    """(N, A) table: total network rate after reassigning vehicle v to BS l,
    holding all other vehicles fixed. Vectorized over (v, l); tensor axes are
    (v: moved vehicle, l: target BS, i: receiver vehicle)."""
    p = chan.params
    n, a = chan.n, chan.n_arms
    rows = np.arange(n)
    ar = np.arange(a)
    zf = p.mu_mimo_suppression
    co_cur = assoc[None, :] == assoc[:, None]  # (i, k) co-served pairs now
    co_new = ar[None, None, :] == assoc[None, :, None]  # (1, i, l): v lands on i's BS
    # moving v only swaps v's term inside each other receiver's sum
    if chan.coherent:
        m = chan.amp0 * np.sqrt(chan._tx_row_pf(assoc))  # (k, j)
        rx_cur = np.sqrt(np.where(co_cur, zf, chan.rx_pf[rows, :, assoc]))  # (i, k)
        t_cur = m[:, assoc].T * rx_cur
        cur = t_cur.sum(axis=1) - t_cur[rows, rows]  # (i,) complex sums
        tx_n = np.sqrt(chan.tx_pf[rows[:, None, None], assoc[None, :, None], ar[None, None, :]])
        rx_n = np.sqrt(
            np.where(co_new, zf, chan.rx_pf[rows, :, assoc].T[:, :, None])
        )  # (v, i, l)
        w_new = chan.amp0[:, assoc][:, :, None] * tx_n * rx_n  # (v, i, l)
        cur_new = (
            cur[None, None, :]
            - t_cur.T[:, None, :]
            + w_new.transpose(0, 2, 1)
        )  # (v, l, i)
        interf_i = np.abs(cur_new) ** 2 + p.noise_w
    else:
        m = chan.pw0 * chan._tx_row_pf(assoc)  # (k, j) powers
        rx_cur = np.where(co_cur, zf, chan.rx_pf[rows, :, assoc])
        t_cur = m[:, assoc].T * rx_cur
        cur = t_cur.sum(axis=1) - t_cur[rows, rows]  # (i,) power sums
        tx_n = chan.tx_pf[rows[:, None, None], assoc[None, :, None], ar[None, None, :]]
        rx_n = np.where(co_new, zf, chan.rx_pf[rows, :, assoc].T[:, :, None])  # (v, i, l)
        w_new = chan.pw0[:, assoc][:, :, None] * tx_n * rx_n  # (v, i, l)
        residual = np.maximum(
            cur[None, None, :] - t_cur.T[:, None, :] + w_new.transpose(0, 2, 1),
            0.0,
        )  # (v, l, i); clamp the cancellation roundoff
        interf_i = residual + p.noise_w

    sg = chan.signal_gain[rows, assoc]
    derate = 1.0 - p.handover_cost * ((prev >= 0) & (prev != assoc))
    sinr_i = p.tx_power_w * sg[None, None, :] / interf_i
    r_i = derate[None, None, :] * p.bandwidth_hz * np.log2(1.0 + sinr_i)  # (v, l, i)

    # the moved vehicle itself, served at l with the receive beam on it
    im = chan.interference_matrix(assoc)  # (v, l), excludes v's own term
    sinr_v = p.tx_power_w * chan.signal_gain / im
    ho_v = (prev[:, None] >= 0) & (ar[None, :] != prev[:, None])
    r_v = (1.0 - p.handover_cost * ho_v) * p.bandwidth_hz * np.log2(1.0 + sinr_v)

    totals = r_i.sum(axis=2) - r_i[rows, :, rows] + r_v
    # keep the no-move column exact
    totals[rows, assoc] = float(chan.rates(assoc, prev).sum())
    return totals


def _local_search(
    chan: PeriodChannel, start: np.ndarray, prev: np.ndarray, max_iters: int
) -> tuple[np.ndarray, bool]:
    """Worst-first improving single-vehicle swaps until a local optimum."""
    assoc = start
    eps = 1e-9
    for _ in range(max_iters):
        rates = chan.rates(assoc, prev)
        current_total = float(rates.sum())
        totals = _move_totals(chan, assoc, prev)
        improved = False
        for v in np.argsort(rates, kind="stable"):
            best_j = int(np.argmax(totals[v]))
            if totals[v, best_j] > current_total * (1 + eps) + eps:
                assoc = assoc.copy()
                assoc[v] = best_j
                improved = True
                break
        if not improved:
            return assoc, True
    return assoc, False


def wcs_associate(
    chan: PeriodChannel, prev: np.ndarray, max_iters: int | None = None
) -> tuple[np.ndarray, bool]:
    """Worst-connection swapping: repeatedly move the worst-served improvable
    vehicle to its network-rate-maximizing BS, starting from the current
    (previous-period) association; vehicles without one start at max-SINR.
    Falls back to a max-SINR restart if the warm-started optimum undershoots
    the plain max-SINR total, so WCS >= max-SINR on every instance. Returns
    (assoc, converged flag)."""
    n = chan.n
    if n == 0:
        return np.zeros(0, dtype=np.int64), True
    if max_iters is None:
        max_iters = 10 * n
    ms = max_sinr_associate(chan, prev)
    start = np.where(prev >= 0, prev, ms)
    assoc, converged = _local_search(chan, start, prev, max_iters)
    ms_total = float(chan.rates(ms, prev).sum())
    if float(chan.rates(assoc, prev).sum()) < ms_total:
        assoc2, conv2 = _local_search(chan, ms, prev, max_iters)
        if float(chan.rates(assoc2, prev).sum()) >= float(chan.rates(assoc, prev).sum()):
            assoc, converged = assoc2, conv2
    return assoc, converged


def exhaustive_oracle(
    chan: PeriodChannel, prev: np.ndarray, guard: int = 10**6, block: int = 1024
) -> np.ndarray:
    """Exact argmax of the total rate over all association vectors, handover
    costs included. Guarded against combinatorial blow-up."""
    n, a = chan.n, chan.n_arms
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    if a**n > guard:
        raise InfeasibleScaleError(f"{a}**{n} association vectors exceed guard {guard}")
    p = chan.params
    rows = np.arange(n)
    best_total = -math.inf
    best = None
    it = itertools.product(range(a), repeat=n)
    while True:
        chunk = np.array(list(itertools.islice(it, block)), dtype=np.int64)
        if chunk.size == 0:
            break
        kk = len(chunk)
        # t[c, i, k] = term of interferer k at receiver (i, beta_ci) under chunk c
        tx = chan.tx_pf[rows[None, None, :], chunk[:, :, None], chunk[:, None, :]]
        rx = chan.rx_pf[rows[None, :, None], rows[None, None, :], chunk[:, :, None]]
        co = chunk[:, None, :] == chunk[:, :, None]  # (kk, i, k) co-served pairs
        rx = np.where(co, p.mu_mimo_suppression, rx)
        if chan.coherent:
            t0 = chan.amp0[rows[None, None, :], chunk[:, :, None]]  # (kk, i, k)
            t = t0 * np.sqrt(tx * rx)
            coh = t.sum(axis=2) - t[np.arange(kk)[:, None], rows[None, :], rows[None, :]]
            interf = np.abs(coh) ** 2 + p.noise_w
        else:
            t0 = chan.pw0[rows[None, None, :], chunk[:, :, None]]
            t = t0 * tx * rx
            interf = (
                t.sum(axis=2)
                - t[np.arange(kk)[:, None], rows[None, :], rows[None, :]]
                + p.noise_w
            )
        sig = chan.signal_gain[rows[None, :], chunk]
        sinr = p.tx_power_w * sig / interf
        ho = (prev[None, :] >= 0) & (prev[None, :] != chunk)
        totals = (
            (1.0 - p.handover_cost * ho) * p.bandwidth_hz * np.log2(1.0 + sinr)
        ).sum(axis=1)
        i = int(np.argmax(totals))
        if totals[i] > best_total:
            best_total = float(totals[i])
            best = chunk[i].copy()
    return best


def cucb_decide(mu_row: np.ndarray, n_row: np.ndarray, alpha: float) -> int:
    """Plain contextual UCB: argmax of the index over all arms, no pruning."""
    n_d = int(n_row.sum())
    with np.errstate(divide="ignore", invalid="ignore"):
        bonus = alpha * np.sqrt(2.0 * math.log(max(n_d, 1)) / n_row)
    idx = np.where(n_row > 0, mu_row + bonus, np.inf)
    return int(np.argmax(idx))


@dataclass
class PlainTsState:
    """Context-free per-vehicle TS over raw empirical rates."""

    n_arms: int
    alpha_ts: float = 1.0
    mu: np.ndarray = field(init=False)
    n: np.ndarray = field(init=False)

    def __post_init__(self):
        self.mu = np.zeros(self.n_arms)
        self.n = np.zeros(self.n_arms, dtype=np.int64)


def plain_ts_decide(state: PlainTsState, rng: np.random.Generator) -> int:
    sigma = state.alpha_ts / (state.n + 1.0)
    z = rng.normal(state.mu, sigma)
    return int(np.argmax(z))


def plain_ts_update(state: PlainTsState, arm: int, reward: float) -> None:
    state.n[arm] += 1
    state.mu[arm] += (reward - state.mu[arm]) / state.n[arm]
