"""Correlated contextual UCB learner.

The learner keeps per-(context, arm) empirical rewards and counters, a sparse
table of contextual pseudo-rewards keyed by (arm, source context), and the
dense floor matrix of lowest pseudo-rewards used for competitive-set pruning.
The floor equals the minimum over recorded sources' current means at all
times: lowering is the O(1) fast path, and a mean rising off the stored floor
triggers an exact per-entry refresh (counted as a staleness diagnostic).
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .contexts import ContextGrid, ContextId, spatial_cells_in_polygon
from .errors import InvalidGeometryError
from .geometry import Location, beam_region

log = logging.getLogger(__name__)

SNAPSHOT_VERSION = 1


def ucb_index(mu: float, n_d: int, n_dj: int, alpha: float) -> float:
    """UCB score of one arm; unsampled arms get the +inf sentinel."""
    if n_dj == 0:
        return math.inf
    return mu + alpha * math.sqrt(2.0 * math.log(n_d) / n_dj)


def pseudo_reward(r: float, in_omega: bool, p: float, r_max: float) -> float:
    """Upper bound on another context's reward inferred from a sample r."""
    if not in_omega:
        return r_max
    if r > r_max:
        log.warning("reward %.4g exceeds R_max %.4g; clamping", r, r_max)
        r = r_max
    return (1.0 - p) * r + p * r_max


def competitive_mask(phi_inf_row: np.ndarray, j_e: int, mu_je: float) -> np.ndarray:
    """Boolean mask of competitive arms from the floor row alone: the best
    empirical arm, arms whose floor meets it, and arms with no recorded
    source (the +inf sentinel)."""
    mask = (phi_inf_row >= mu_je) | np.isinf(phi_inf_row)
    mask[j_e] = True
    return mask


@dataclass
class EstimateDecision:
    estimated_bs: int
    mu_row: np.ndarray
    competitive: np.ndarray  # bool mask over arms

    @property
    def competitive_ids(self) -> set[int]:
        return set(int(j) for j in np.flatnonzero(self.competitive))


@dataclass
class _PhiRow:
    """Pseudo-reward running means from one (arm, source context) to every
    destination context."""

    mean: np.ndarray
    count: np.ndarray


@dataclass
class ClubSample:
    vehicle_id: int
    ctx: ContextId
    arm: int
    reward: float
    l_start: Location
    l_end: Location
    velocity: float


class CcUcbLearner:
    """Centralized CC-UCB state plus the estimating/updating phase logic."""

    def __init__(
        self,
        grid: ContextGrid,
        sites: list,
        alpha: float,
        p: float,
        r_max: float,
        theta_beam: float,
        d_max: float,
    ):
        self.grid = grid
        self.sites = sites
        self.n_arms = len(sites)
        self.alpha = alpha
        self.p = p
        self.r_max = r_max
        self.theta_beam = theta_beam
        self.d_max = d_max
        nc = grid.n_contexts
        self.mu_hat = np.zeros((nc, self.n_arms))
        self.n = np.zeros((nc, self.n_arms), dtype=np.int64)
        self.phi_inf = np.full((nc, self.n_arms), np.inf)
        self._phi: dict[tuple[int, int], _PhiRow] = {}
        self._phi_by_arm: dict[int, list[_PhiRow]] = {}
        self.stale_floor_events = 0
        self.skipped_club_updates = 0
        self._clamped = 0

    # -- estimating phase ----------------------------------------------------

    def estimate_phase(self, ctx: ContextId) -> EstimateDecision:
        d = self.grid.flat(ctx)
        n_row = self.n[d]
        mu_row = self.mu_hat[d]
        n_d = int(n_row.sum())
        thresh = n_d // self.n_arms
        sampled_enough = n_row >= thresh
        # argmax over the adequately-sampled set, ties to the lowest id
        masked = np.where(sampled_enough, mu_row, -np.inf)
        j_e = int(np.argmax(masked))
        mu_je = float(mu_row[j_e])
        mask = competitive_mask(self.phi_inf[d], j_e, mu_je)
        with np.errstate(divide="ignore", invalid="ignore"):
            bonus = self.alpha * np.sqrt(2.0 * math.log(max(n_d, 1)) / n_row)
        idx = np.where(n_row > 0, mu_row + bonus, np.inf)
        idx = np.where(mask, idx, -np.inf)
        est = int(np.argmax(idx))
        return EstimateDecision(estimated_bs=est, mu_row=mu_row.copy(), competitive=mask)

    def estimate_batch(self, ctx_flats: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Vectorized estimating phase for a batch of flat context ids.
        Returns (estimated arms, mu rows, competitive masks); must agree with
        estimate_phase row by row."""
        n_rows = self.n[ctx_flats]  # (B, A)
        mu_rows = self.mu_hat[ctx_flats]
        n_d = n_rows.sum(axis=1)
        thresh = n_d // self.n_arms
        sampled_enough = n_rows >= thresh[:, None]
        masked = np.where(sampled_enough, mu_rows, -np.inf)
        j_e = np.argmax(masked, axis=1)
        rows = np.arange(len(ctx_flats))
        mu_je = mu_rows[rows, j_e]
        phi_rows = self.phi_inf[ctx_flats]
        masks = (phi_rows >= mu_je[:, None]) | np.isinf(phi_rows)
        masks[rows, j_e] = True
        with np.errstate(divide="ignore", invalid="ignore"):
            bonus = self.alpha * np.sqrt(
                2.0 * np.log(np.maximum(n_d, 1))[:, None] / n_rows
            )
        idx = np.where(n_rows > 0, mu_rows + bonus, np.inf)
        idx = np.where(masks, idx, -np.inf)
        est = np.argmax(idx, axis=1)
        return est, mu_rows.copy(), masks

    # -- updating phase ------------------------------------------------------

    def record_reward(self, ctx: ContextId, arm: int, reward: float) -> None:
        """Empirical-reward running mean for one (context, arm) sample."""
        d = self.grid.flat(ctx)
        reward = self._clamp(reward)
        self.n[d, arm] += 1
        self.mu_hat[d, arm] += (reward - self.mu_hat[d, arm]) / self.n[d, arm]

    def club_update(self, sample: ClubSample) -> None:
        """Propagate one sample's pseudo-reward to every context inside the
        beam-extension region at comparable velocity.

        The region always extends outward past the sample's own radius even
        when the vehicle sits beyond d_max: out-of-range samples carry
        near-zero rates, and propagating them is what eventually marks
        out-of-range BSs non-competitive."""
        site = self.sites[sample.arm]
        r_min = max(sample.l_start.dist(site.location), sample.l_end.dist(site.location))
        # the region spans the whole outward strip inside the world even for
        # out-of-range samples; d_max only matters beyond the world scale
        outer = max(self.d_max, r_min + math.hypot(self.grid.world_w, self.grid.world_h))
        try:
            omega = beam_region(
                sample.l_start, site.location, sample.l_end, self.theta_beam, outer
            )
        except InvalidGeometryError:
            # degenerate geometry (vehicle exactly at the BS site)
            self.skipped_club_updates += 1
            return
        cells = spatial_cells_in_polygon(omega, self.grid)
        if cells.size == 0:
            return
        iv = self.grid.velocity_bin(sample.velocity)
        dst = iv * self.grid.n_spatial + cells
        dst = dst[dst != self.grid.flat(sample.ctx)]
        if dst.size == 0:
            return
        s = pseudo_reward(self._clamp(sample.reward), True, self.p, self.r_max)
        src = self.grid.flat(sample.ctx)
        row = self._phi_row(sample.arm, src)
        fresh = row.count[dst] == 0
        row.count[dst] += 1
        old = row.mean[dst]
        new = old + (s - old) / row.count[dst]
        row.mean[dst] = new
        floor = self.phi_inf[dst, sample.arm]
        # a mean rising off the stored floor leaves the cache stale; refresh
        # those entries so the floor stays the exact minimum over current
        # means (the cheap lowering path covers every other case)
        stale = (~fresh) & (new > old) & (old == floor)
        if stale.any():
            self.stale_floor_events += int(np.count_nonzero(stale))
            self._refresh_floor(sample.arm, dst[stale])
        self.phi_inf[dst, sample.arm] = np.minimum(self.phi_inf[dst, sample.arm], new)

    def update_phase(self, batch: list[ClubSample]) -> None:
        """Updating phase over a batch: record each reward and propagate its
        pseudo-reward, processed in ascending vehicle id."""
        for sample in sorted(batch, key=lambda s: s.vehicle_id):
            self.record_reward(sample.ctx, sample.arm, sample.reward)
            self.club_update(sample)

    # -- internals -----------------------------------------------------------

    def _phi_row(self, arm: int, src_flat: int) -> _PhiRow:
        key = (arm, src_flat)
        row = self._phi.get(key)
        if row is None:
            nc = self.grid.n_contexts
            row = _PhiRow(mean=np.zeros(nc), count=np.zeros(nc, dtype=np.int64))
            self._phi[key] = row
            self._phi_by_arm.setdefault(arm, []).append(row)
        return row

    def _refresh_floor(self, arm: int, dsts: np.ndarray) -> None:
        """Recompute phi_inf for the given destination contexts of one arm as
        the minimum over all recorded sources' current means."""
        floor = np.full(len(dsts), np.inf)
        for row in self._phi_by_arm.get(arm, ()):
            have = row.count[dsts] > 0
            floor[have] = np.minimum(floor[have], row.mean[dsts][have])
        self.phi_inf[dsts, arm] = floor

    def _clamp(self, r: float) -> float:
        if r > self.r_max:
            self._clamped += 1
            if self._clamped == 1:
                log.warning("reward %.4g exceeds R_max %.4g; clamping", r, self.r_max)
            return self.r_max
        return max(r, 0.0)

    def phi_entries(self):
        """Iterate sparse (arm, src, dst, count, mean) pseudo-reward entries."""
        for (arm, src), row in sorted(self._phi.items()):
            for dst in np.flatnonzero(row.count):
                yield arm, src, int(dst), int(row.count[dst]), float(row.mean[dst])

    # -- snapshot ------------------------------------------------------------

    def to_snapshot(self) -> dict:
        nz = np.nonzero(self.n)
        finite = np.isfinite(self.phi_inf)
        fz = np.nonzero(finite)
        return {
            "version": SNAPSHOT_VERSION,
            "grid": [self.grid.n_v, self.grid.n_x, self.grid.n_y],
            "n_arms": self.n_arms,
            "alpha": self.alpha,
            "p": self.p,
            "r_max": self.r_max,
            "mu": [
                [int(d), int(j), int(self.n[d, j]), float(self.mu_hat[d, j])]
                for d, j in zip(*nz)
            ],
            "phi": [list(e) for e in self.phi_entries()],
            "phi_inf": [
                [int(d), int(j), float(self.phi_inf[d, j])] for d, j in zip(*fz)
            ],
        }

    def load_snapshot(self, snap: dict) -> None:
        if snap.get("version") != SNAPSHOT_VERSION:
            raise ValueError(f"unsupported snapshot version {snap.get('version')!r}")
        if snap["grid"] != [self.grid.n_v, self.grid.n_x, self.grid.n_y]:
            raise ValueError("snapshot grid does not match learner grid")
        if snap["n_arms"] != self.n_arms:
            raise ValueError("snapshot arm count does not match learner")
        self.mu_hat[:] = 0.0
        self.n[:] = 0
        self.phi_inf[:] = np.inf
        self._phi.clear()
        self._phi_by_arm.clear()
        for d, j, cnt, mu in snap["mu"]:
            self.n[d, j] = cnt
            self.mu_hat[d, j] = mu
        for arm, src, dst, cnt, mean in snap["phi"]:
            row = self._phi_row(arm, src)
            row.count[dst] = cnt
            row.mean[dst] = mean
        for d, j, v in snap["phi_inf"]:
            self.phi_inf[d, j] = v

    def snapshot_json(self) -> str:
        return json.dumps(self.to_snapshot(), separators=(",", ":"))
