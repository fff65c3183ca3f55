import json
import math

import numpy as np
import pytest

from mmwave_assoc.ccucb import (
    CcUcbLearner,
    ClubSample,
    competitive_mask,
    pseudo_reward,
    ucb_index,
)
from mmwave_assoc.contexts import ContextGrid, ContextId
from mmwave_assoc.geometry import BaseStationSite, Location


def make_learner(n_v=1, n_x=6, n_y=6, n_arms=3, world=60.0, p=0.1, r_max=1000.0,
                 theta=0.26, d_max=500.0, alpha=1.0):
    grid = ContextGrid(n_v=n_v, n_x=n_x, n_y=n_y, v_min=0, v_max=10, world_w=world, world_h=world)
    sites = [BaseStationSite(j, Location(10.0 + 15.0 * j, 5.0), 10.0) for j in range(n_arms)]
    return CcUcbLearner(grid=grid, sites=sites, alpha=alpha, p=p, r_max=r_max,
                        theta_beam=theta, d_max=d_max)


class TestUcbIndex:
    def test_direct_evaluation(self):
        assert ucb_index(5.0, 8, 2, 1.0) == pytest.approx(5 + math.sqrt(math.log(8)), rel=1e-9)

    def test_alpha_zero_is_pure_exploitation(self):
        assert ucb_index(7.5, 100, 3, 0.0) == 7.5

    def test_single_sample_no_bonus(self):
        assert ucb_index(4.2, 1, 1, 1.0) == pytest.approx(4.2, rel=1e-12)

    def test_unsampled_arm_is_infinite(self):
        assert ucb_index(0.0, 5, 0, 1.0) == math.inf


class TestPseudoReward:
    def test_inside_region(self):
        assert pseudo_reward(200e6, True, 0.1, 1000e6) == pytest.approx(280e6, rel=1e-9)

    def test_outside_region_is_r_max(self):
        assert pseudo_reward(200e6, False, 0.1, 1000e6) == 1000e6

    def test_zero_infraction_probability(self):
        assert pseudo_reward(123.4, True, 0.0, 1000.0) == pytest.approx(123.4, rel=1e-12)

    def test_reward_above_r_max_clamped(self):
        assert pseudo_reward(1500.0, True, 0.1, 1000.0) == pytest.approx(0.9 * 1000 + 0.1 * 1000)


class TestCompetitiveMask:
    def test_low_floor_is_noncompetitive(self):
        mask = competitive_mask(np.array([150.0, np.inf, 250.0]), 2, 200.0)
        assert list(mask) == [False, True, True]

    def test_sentinel_is_competitive(self):
        mask = competitive_mask(np.array([np.inf, np.inf]), 0, 500.0)
        assert mask.all()

    def test_best_arm_always_included(self):
        mask = competitive_mask(np.array([10.0, 10.0]), 1, 999.0)
        assert mask[1]

    def test_reads_only_the_floor_row(self):
        # the pruning decision must touch nothing but phi_inf[D][.]
        learner = make_learner()
        learner._phi = PoisonedDict()
        ctx = ContextId(0, 0, 0)
        learner.n[learner.grid.flat(ctx)] = [3, 2, 1]
        learner.mu_hat[learner.grid.flat(ctx)] = [10.0, 12.0, 20.0]
        decision = learner.estimate_phase(ctx)
        assert decision.competitive.any()


class PoisonedDict(dict):
    def __getitem__(self, key):
        raise AssertionError("estimate must not read the sparse pseudo-reward table")

    def get(self, *a, **k):
        raise AssertionError("estimate must not read the sparse pseudo-reward table")


class TestEstimatePhase:
    def test_hand_traced_example(self):
        # counts (3,2,1), means (10,12,20), n_D=6 -> adequately sampled set
        # {arm0, arm1}, best empirical arm1 (mu 12); arm0 floor 11 -> pruned,
        # arm2 no source -> competitive; UCB picks arm2 via the bigger bonus
        learner = make_learner(r_max=1000.0)
        d = learner.grid.flat(ContextId(0, 0, 0))
        learner.n[d] = [3, 2, 1]
        learner.mu_hat[d] = [10.0, 12.0, 20.0]
        learner.phi_inf[d, 0] = 11.0
        dec = learner.estimate_phase(ContextId(0, 0, 0))
        assert dec.competitive_ids == {1, 2}
        idx1 = 12 + math.sqrt(2 * math.log(6) / 2)
        idx2 = 20 + math.sqrt(2 * math.log(6) / 1)
        assert idx1 == pytest.approx(13.3385662, abs=1e-6)
        assert idx2 == pytest.approx(21.8930185, abs=1e-6)
        assert dec.estimated_bs == 2

    def test_hand_traced_example_against_straight_line_reimplementation(self):
        rng = np.random.default_rng(0)
        learner = make_learner(r_max=100.0)
        for _ in range(300):
            d = int(rng.integers(learner.grid.n_contexts))
            learner.n[d] = rng.integers(0, 6, size=3)
            learner.mu_hat[d] = np.where(learner.n[d] > 0, rng.uniform(0, 90, 3), 0.0)
            learner.phi_inf[d] = np.where(rng.uniform(size=3) < 0.5, rng.uniform(0, 100, 3), np.inf)
            ctx = learner.grid.unflat(d)
            dec = learner.estimate_phase(ctx)
            # independent slow reimplementation of the estimating phase
            n_row, mu_row, floor = learner.n[d], learner.mu_hat[d], learner.phi_inf[d]
            n_d = int(n_row.sum())
            sampled = [j for j in range(3) if n_row[j] >= n_d // 3]
            j_e = max(sampled, key=lambda j: (mu_row[j], -j))
            comp = {j_e} | {
                j for j in range(3) if math.isinf(floor[j]) or floor[j] >= mu_row[j_e]
            }
            best, best_idx = None, -math.inf
            for j in sorted(comp):
                idx = ucb_index(mu_row[j], max(n_d, 1), int(n_row[j]), learner.alpha)
                if idx > best_idx:
                    best, best_idx = j, idx
            assert dec.competitive_ids == comp
            assert dec.estimated_bs == best

    def test_cold_start(self):
        learner = make_learner()
        dec = learner.estimate_phase(ContextId(0, 3, 3))
        assert dec.estimated_bs == 0
        assert dec.competitive_ids == {0, 1, 2}

    def test_single_arm(self):
        learner = make_learner(n_arms=1)
        dec = learner.estimate_phase(ContextId(0, 1, 1))
        assert dec.estimated_bs == 0
        assert dec.competitive_ids == {0}

    def test_batch_agrees_with_single(self):
        rng = np.random.default_rng(5)
        learner = make_learner()
        learner.n[:] = rng.integers(0, 9, size=learner.n.shape)
        learner.mu_hat[:] = rng.uniform(0, 900, size=learner.mu_hat.shape)
        learner.phi_inf[:] = np.where(
            rng.uniform(size=learner.phi_inf.shape) < 0.4,
            rng.uniform(0, 1000, size=learner.phi_inf.shape),
            np.inf,
        )
        flats = rng.integers(0, learner.grid.n_contexts, size=40)
        est, mu_rows, masks = learner.estimate_batch(flats)
        for row, f in enumerate(flats):
            dec = learner.estimate_phase(learner.grid.unflat(int(f)))
            assert est[row] == dec.estimated_bs
            np.testing.assert_array_equal(masks[row], dec.competitive)
            np.testing.assert_array_equal(mu_rows[row], dec.mu_row)

    def test_never_returns_arm_outside_competitive_set(self):
        rng = np.random.default_rng(6)
        learner = make_learner()
        for _ in range(300):
            d = int(rng.integers(learner.grid.n_contexts))
            learner.n[d] = rng.integers(0, 12, size=3)
            learner.mu_hat[d] = rng.uniform(0, 900, 3)
            learner.phi_inf[d] = np.where(rng.uniform(size=3) < 0.7, rng.uniform(0, 1000, 3), np.inf)
            dec = learner.estimate_phase(learner.grid.unflat(d))
            assert dec.estimated_bs in dec.competitive_ids


def sample_for(learner, ctx, arm, reward, vid=0, heading=(1.0, 0.0), velocity=5.0):
    cx, cy = learner.grid.spatial_cell_center(ctx.ix, ctx.iy)
    start = Location(cx, cy)
    end = Location(cx + heading[0], cy + heading[1])
    return ClubSample(
        vehicle_id=vid, ctx=ctx, arm=arm, reward=reward,
        l_start=start, l_end=end, velocity=velocity,
    )


class TestClubUpdate:
    def test_first_update_running_mean_and_floor(self):
        learner = make_learner(p=0.1, r_max=1000.0)
        ctx = ContextId(0, 1, 0)
        learner.club_update(sample_for(learner, ctx, 0, 200.0))
        # s = 0.9*200 + 0.1*1000 = 280
        src = learner.grid.flat(ctx)
        row = learner._phi[(0, src)]
        touched = np.flatnonzero(row.count)
        assert touched.size > 0
        assert np.allclose(row.mean[touched], 280.0)
        assert np.all(learner.phi_inf[touched, 0] == 280.0)

    def test_second_update_same_source(self):
        learner = make_learner(p=0.1, r_max=1000.0)
        ctx = ContextId(0, 1, 0)
        learner.club_update(sample_for(learner, ctx, 0, 200.0))
        learner.club_update(sample_for(learner, ctx, 0, 244.444444444))
        # s2 = 0.9*244.44 + 100 = 320; running mean (280+320)/2 = 300
        src = learner.grid.flat(ctx)
        row = learner._phi[(0, src)]
        touched = np.flatnonzero(row.count)
        assert np.allclose(row.mean[touched], 300.0)
        # the floor is the exact min over current means: risen means refresh it
        assert np.allclose(learner.phi_inf[touched, 0], 300.0)
        assert learner.stale_floor_events > 0

    def test_floor_keeps_minimum_across_sources(self):
        learner = make_learner(p=0.1, r_max=1000.0)
        a = ContextId(0, 1, 0)
        b = ContextId(0, 2, 0)
        learner.club_update(sample_for(learner, a, 0, 200.0))  # s=280
        learner.club_update(sample_for(learner, b, 0, 100.0))  # s=190
        fa = learner.grid.flat(a)
        row_b = learner._phi[(0, learner.grid.flat(b))]
        shared = [d for d in np.flatnonzero(row_b.count) if learner._phi[(0, fa)].count[d] > 0]
        for d in shared:
            assert learner.phi_inf[d, 0] == pytest.approx(190.0)

    def test_region_outside_world_leaves_tables_unchanged(self):
        # the beam extension points away from every other cell: no targets
        learner = make_learner()
        ctx = ContextId(0, 0, 5)
        # heading straight out of the world away from arm 0's site
        cx, cy = learner.grid.spatial_cell_center(0, 5)
        s = ClubSample(vehicle_id=0, ctx=ctx, arm=0, reward=100.0,
                       l_start=Location(cx, cy), l_end=Location(cx - 1.0, cy + 1.5),
                       velocity=5.0)
        before = learner.phi_inf.copy()
        learner.club_update(s)
        row = learner._phi.get((0, learner.grid.flat(ctx)))
        # either no row at all, or only cells strictly farther than the vehicle
        if row is not None:
            assert row.count[learner.grid.flat(ctx)] == 0
        np.testing.assert_array_equal(
            np.isinf(learner.phi_inf).sum(), np.isinf(before).sum() - (0 if row is None else np.count_nonzero(row.count))
        )

    def test_out_of_range_sample_still_propagates_outward(self):
        # a sample taken beyond d_max keeps extending outward, so distant BSs
        # can still be ruled out
        learner = make_learner(d_max=5.0)
        ctx = ContextId(0, 5, 5)
        learner.club_update(sample_for(learner, ctx, 0, 1.0))
        assert learner.skipped_club_updates == 0
        assert any(np.isfinite(learner.phi_inf[:, 0]))

    def test_vehicle_at_bs_site_skipped(self):
        learner = make_learner()
        site = learner.sites[0].location
        s = ClubSample(vehicle_id=0, ctx=ContextId(0, 1, 0), arm=0, reward=10.0,
                       l_start=Location(site.x, site.y), l_end=Location(site.x, site.y),
                       velocity=5.0)
        learner.club_update(s)
        assert learner.skipped_club_updates == 1

    def test_own_context_excluded(self):
        learner = make_learner()
        ctx = ContextId(0, 1, 0)
        learner.club_update(sample_for(learner, ctx, 0, 200.0))
        src = learner.grid.flat(ctx)
        assert learner._phi[(0, src)].count[src] == 0


class TestUpdatePhase:
    def test_single_sample_sets_mean(self):
        learner = make_learner()
        ctx = ContextId(0, 2, 2)
        learner.update_phase([sample_for(learner, ctx, 1, 500.0)])
        d = learner.grid.flat(ctx)
        assert learner.mu_hat[d, 1] == 500.0
        assert learner.n[d, 1] == 1

    def test_running_mean_two_samples(self):
        learner = make_learner()
        ctx = ContextId(0, 2, 2)
        learner.update_phase([sample_for(learner, ctx, 1, 100.0)])
        learner.update_phase([sample_for(learner, ctx, 1, 200.0)])
        d = learner.grid.flat(ctx)
        assert learner.mu_hat[d, 1] == pytest.approx(150.0)
        assert learner.n[d, 1] == 2

    def test_batch_equals_one_by_one(self):
        rng = np.random.default_rng(8)
        batch = []
        l1 = make_learner()
        l2 = make_learner()
        for vid in range(20):
            ctx = ContextId(0, int(rng.integers(6)), int(rng.integers(6)))
            batch.append(sample_for(l1, ctx, int(rng.integers(3)), float(rng.uniform(0, 900)), vid=vid))
        l1.update_phase(batch)
        for s in sorted(batch, key=lambda s: s.vehicle_id):
            l2.update_phase([s])
        np.testing.assert_array_equal(l1.n, l2.n)
        np.testing.assert_allclose(l1.mu_hat, l2.mu_hat, rtol=1e-12)
        np.testing.assert_allclose(l1.phi_inf, l2.phi_inf, rtol=1e-12)

    def test_running_mean_exactness(self):
        # after any update sequence the stored mean equals the arithmetic mean
        rng = np.random.default_rng(9)
        learner = make_learner()
        ctx = ContextId(0, 3, 1)
        rewards = rng.uniform(0, 999, 500)
        for r in rewards:
            learner.update_phase([sample_for(learner, ctx, 2, float(r))])
        d = learner.grid.flat(ctx)
        assert learner.mu_hat[d, 2] == pytest.approx(float(np.mean(rewards)), rel=1e-9)


class ReplayOracle:
    """Straight-line reimplementation: full sample lists, means from scratch,
    floors as the min over current means."""

    def __init__(self, n_contexts, n_arms, p, r_max):
        self.samples = {}
        self.p = p
        self.r_max = r_max
        self.n_contexts = n_contexts
        self.n_arms = n_arms

    def add(self, arm, src, dsts, reward):
        s = (1 - self.p) * min(reward, self.r_max) + self.p * self.r_max
        for d in dsts:
            self.samples.setdefault((arm, src, int(d)), []).append(s)

    def floor(self, dst, arm):
        vals = [
            sum(v) / len(v)
            for (a, s, d), v in self.samples.items()
            if a == arm and d == dst
        ]
        return min(vals) if vals else math.inf

    def mean(self, arm, src, dst):
        v = self.samples.get((arm, src, dst), [])
        return sum(v) / len(v) if v else 0.0


class TestFloorCorrectness:
    def test_bruteforce_floor_oracle(self):
        # random update sequences: stored floors match a from-scratch replay
        rng = np.random.default_rng(10)
        for trial in range(60):
            learner = make_learner(n_x=4, n_y=4, world=40.0, d_max=200.0)
            oracle = ReplayOracle(learner.grid.n_contexts, 3, learner.p, learner.r_max)
            for _ in range(int(rng.integers(3, 40))):
                ctx = ContextId(0, int(rng.integers(4)), int(rng.integers(4)))
                arm = int(rng.integers(3))
                reward = float(rng.uniform(0, 1200))
                heading = rng.normal(size=2)
                heading /= np.linalg.norm(heading)
                s = sample_for(learner, ctx, arm, reward, heading=tuple(heading))
                before = {k: r.count.copy() for k, r in learner._phi.items()}
                learner.club_update(s)
                src = learner.grid.flat(ctx)
                row = learner._phi.get((arm, src))
                if row is None:
                    continue
                prev = before.get((arm, src))
                new_counts = row.count.copy()
                if prev is not None:
                    dsts = np.flatnonzero(new_counts != prev)
                else:
                    dsts = np.flatnonzero(new_counts)
                oracle.add(arm, src, dsts, reward)
            for (arm, src), row in learner._phi.items():
                for d in np.flatnonzero(row.count):
                    assert row.mean[d] == pytest.approx(oracle.mean(arm, src, int(d)), rel=1e-9)
            finite = np.argwhere(np.isfinite(learner.phi_inf))
            for d, arm in finite:
                assert learner.phi_inf[d, arm] == pytest.approx(
                    oracle.floor(int(d), int(arm)), rel=1e-9
                )


class TestSnapshot:
    def test_roundtrip(self):
        rng = np.random.default_rng(11)
        learner = make_learner()
        for _ in range(60):
            ctx = ContextId(0, int(rng.integers(6)), int(rng.integers(6)))
            learner.update_phase([sample_for(learner, ctx, int(rng.integers(3)), float(rng.uniform(0, 900)))])
        blob = learner.snapshot_json()
        other = make_learner()
        other.load_snapshot(json.loads(blob))
        np.testing.assert_array_equal(learner.n, other.n)
        np.testing.assert_allclose(learner.mu_hat, other.mu_hat, rtol=0)
        np.testing.assert_allclose(learner.phi_inf, other.phi_inf, rtol=0)
        assert learner.snapshot_json() == other.snapshot_json()

    def test_version_check(self):
        learner = make_learner()
        snap = learner.to_snapshot()
        snap["version"] = 99
        with pytest.raises(ValueError):
            learner.load_snapshot(snap)
