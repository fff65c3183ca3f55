import math

import numpy as np
import pytest

from mmwave_assoc.channel import (
    FadingState,
    PeriodChannel,
    RadioParams,
    data_rate,
    doppler_rho,
    estimation_interference,
    estimation_rate,
    evolve_fading,
    interference_at,
    link_gain,
    pathloss_db,
)

PARAMS = RadioParams()


class TestPathLoss:
    def test_umi_los_at_100m_28ghz(self):
        # independent dB computation of the street-canyon LOS formula
        expected = 32.4 + 21 * math.log10(100) + 20 * math.log10(28)
        got = float(pathloss_db(100.0, 28.0, True))
        assert got == pytest.approx(expected, rel=1e-9)
        assert expected == pytest.approx(103.34316062684438, rel=1e-9)

    def test_nlos_never_below_los_loss(self):
        d = np.linspace(1, 500, 200)
        assert np.all(pathloss_db(d, 28.0, False) >= pathloss_db(d, 28.0, True))

    def test_link_gain_zero_fading(self):
        st = FadingState(scatter=0j, los_phase=0.0, los=False)
        assert link_gain(st, 100.0, PARAMS) == 0.0

    def test_distance_clamped_to_reference(self):
        st = FadingState(scatter=1 + 0j, los_phase=0.0, los=False)
        assert link_gain(st, 0.0, PARAMS) == link_gain(st, 1.0, PARAMS)

    def test_radial_monotonicity_los(self):
        st = FadingState(scatter=0.3 + 0.4j, los_phase=1.0, los=True)
        gains = [link_gain(st, d, PARAMS) for d in np.linspace(5, 400, 80)]
        assert all(a >= b for a, b in zip(gains, gains[1:]))


class TestFading:
    def test_zero_velocity_keeps_scatter(self):
        st = FadingState(scatter=0.5 - 0.2j, los_phase=0.3, los=True)
        out = evolve_fading(st, 0.0, 0.1, np.random.default_rng(0))
        assert out.scatter == st.scatter

    def test_rho_monotone_on_first_lobe(self):
        # velocities small enough that 2 pi f_D dt stays within J0's first lobe
        dt, fc = 1e-4, 28e9
        vs = np.linspace(0, 3.8 / (2 * math.pi * dt * fc / 3e8), 30)
        rhos = [doppler_rho(v, fc, dt) for v in vs]
        assert all(a > b for a, b in zip(rhos, rhos[1:]))

    def test_rayleigh_branch_unit_power(self):
        # stationary |c|^2 has mean 1 on the Rayleigh (NLOS) branch
        rng = np.random.default_rng(42)
        st = FadingState(scatter=complex(rng.standard_normal(), rng.standard_normal()) / math.sqrt(2),
                         los_phase=0.0, los=False)
        total, n = 0.0, 100_000
        for _ in range(n):
            st = evolve_fading(st, 10.0, 1e-3, rng)
            c = st.coefficient(PARAMS.rician_k)
            total += abs(c) ** 2
        assert total / n == pytest.approx(1.0, abs=0.03)

    def test_rician_branch_unit_power(self):
        rng = np.random.default_rng(43)
        st = FadingState(scatter=0j, los_phase=1.2, los=True)
        total, n = 0.0, 100_000
        for _ in range(n):
            st = evolve_fading(st, 10.0, 1e-3, rng)
            total += abs(st.coefficient(PARAMS.rician_k)) ** 2
        assert total / n == pytest.approx(1.0, abs=0.03)


class TestInterference:
    def test_no_other_vehicles_gives_noise_exactly(self):
        got = interference_at(0, 0, {0: 0}, lambda k, j, l, i: 1 + 0j, PARAMS)
        assert got == PARAMS.noise_w

    def test_single_interferer(self):
        g = 2.5e-12
        term = lambda k, j, l, i: complex(math.sqrt(PARAMS.tx_power_w * g), 0)
        got = interference_at(0, 0, {0: 0, 1: 1}, term, PARAMS)
        assert got == pytest.approx(PARAMS.noise_w + PARAMS.tx_power_w * g, rel=1e-12)

    def test_doubling_power_doubles_interference_term(self):
        g = 1e-12

        def term_for(p):
            return lambda k, j, l, i: complex(math.sqrt(p * g), 0)

        base = interference_at(0, 0, {0: 0, 1: 1}, term_for(1.0), PARAMS) - PARAMS.noise_w
        double = interference_at(0, 0, {0: 0, 1: 1}, term_for(2.0), PARAMS) - PARAMS.noise_w
        assert double == pytest.approx(2 * base, rel=1e-12)

    def test_estimation_interference_empty_prev(self):
        assert estimation_interference(0, 0, None, lambda *a: 1j) == 0.0
        assert estimation_interference(0, 0, {}, lambda *a: 1j) == 0.0

    def test_estimation_equals_data_interference_minus_noise(self):
        term = lambda k, j, l, i: complex(1e-7, 2e-7) * (k + 1)
        assoc = {0: 0, 1: 1, 2: 2}
        a = interference_at(0, 0, assoc, term, PARAMS)
        b = estimation_interference(0, 0, assoc, term)
        assert a - PARAMS.noise_w == pytest.approx(b, rel=1e-12)

    def test_single_prev_interferer(self):
        g = 3e-13
        term = lambda k, j, l, i: complex(math.sqrt(PARAMS.tx_power_w * g), 0)
        got = estimation_interference(0, 0, {0: 0, 5: 2}, term)
        assert got == pytest.approx(PARAMS.tx_power_w * g, rel=1e-12)


class TestRates:
    def test_estimation_rate_snr_15(self):
        # SINR 15 at 50 MHz -> 200 Mb/s
        p = RadioParams(bandwidth_hz=50e6)
        gain = 15.0 * p.noise_w / p.tx_power_w
        assert estimation_rate(gain, 0.0, p) == pytest.approx(200e6, rel=1e-9)

    def test_estimation_rate_zero_gain(self):
        assert estimation_rate(0.0, 0.0, PARAMS) == 0.0

    def test_estimation_rate_monotone_in_eta(self):
        gain = 1e-9
        etas = np.linspace(0, 1e-9, 50)
        rates = [estimation_rate(gain, e, PARAMS) for e in etas]
        assert all(a > b for a, b in zip(rates, rates[1:]))

    def test_data_rate_no_handover(self):
        p = RadioParams(bandwidth_hz=50e6)
        gain = 15.0 * p.noise_w / p.tx_power_w
        assert data_rate(gain, p.noise_w, False, p) == pytest.approx(200e6, rel=1e-9)

    def test_data_rate_handover_derates(self):
        p = RadioParams(bandwidth_hz=50e6, handover_cost=0.1)
        gain = 15.0 * p.noise_w / p.tx_power_w
        assert data_rate(gain, p.noise_w, True, p) == pytest.approx(180e6, rel=1e-9)

    def test_zeta_zero_makes_handover_irrelevant(self):
        p = RadioParams(bandwidth_hz=50e6, handover_cost=0.0)
        gain = 7.0 * p.noise_w / p.tx_power_w
        assert data_rate(gain, p.noise_w, True, p) == data_rate(gain, p.noise_w, False, p)


def tiny_channel(n=4, a=3, seed=0, coherent=False):
    rng = np.random.default_rng(seed)
    params = RadioParams(
        interference_model="coherent" if coherent else "ergodic",
    )
    positions = rng.uniform(5, 95, (n, 2))
    sites = rng.uniform(5, 95, (a, 2))
    coeffs = (rng.standard_normal((n, a)) + 1j * rng.standard_normal((n, a))) / math.sqrt(2)
    los = rng.uniform(size=(n, a)) < 0.6
    phases = rng.uniform(0, 2 * math.pi, (n, a))
    return PeriodChannel(positions, sites, coeffs, los, phases, 8.0, params)


class TestPeriodChannel:
    @pytest.mark.parametrize("coherent", [False, True])
    def test_data_rate_bounded_by_noise_only_shannon(self, coherent):
        # interference and handover cost only ever reduce the rate
        chan = tiny_channel(coherent=coherent)
        rng = np.random.default_rng(5)
        for _ in range(50):
            assoc = rng.integers(chan.n_arms, size=chan.n)
            prev = rng.integers(-1, chan.n_arms, size=chan.n)
            rates = chan.rates(assoc, prev)
            p = chan.params
            rows = np.arange(chan.n)
            bound = p.bandwidth_hz * np.log2(
                1 + p.tx_power_w * chan.signal_gain[rows, assoc] / p.noise_w
            )
            assert np.all(rates <= bound + 1e-9)

    @pytest.mark.parametrize("coherent", [False, True])
    def test_total_rate_equals_sum_of_rates(self, coherent):
        chan = tiny_channel(coherent=coherent, seed=3)
        rng = np.random.default_rng(6)
        assoc = rng.integers(chan.n_arms, size=chan.n)
        prev = rng.integers(-1, chan.n_arms, size=chan.n)
        rates = chan.rates(assoc, prev)
        assert float(rates.sum()) == pytest.approx(
            math.fsum(float(x) for x in rates), rel=1e-12
        )

    def test_permutation_symmetry(self):
        # relabeling vehicles permutes the per-vehicle rates identically
        rng = np.random.default_rng(7)
        n, a = 5, 3
        params = RadioParams()
        positions = rng.uniform(5, 95, (n, 2))
        sites = rng.uniform(5, 95, (a, 2))
        coeffs = (rng.standard_normal((n, a)) + 1j * rng.standard_normal((n, a))) / math.sqrt(2)
        los = rng.uniform(size=(n, a)) < 0.6
        chan = PeriodChannel(positions, sites, coeffs, los, None, 8.0, params)
        assoc = rng.integers(a, size=n)
        prev = rng.integers(-1, a, size=n)
        rates = chan.rates(assoc, prev)
        perm = rng.permutation(n)
        chan_p = PeriodChannel(positions[perm], sites, coeffs[perm], los[perm], None, 8.0, params)
        rates_p = chan_p.rates(assoc[perm], prev[perm])
        np.testing.assert_allclose(rates_p, rates[perm], rtol=1e-12)

    def test_estimation_eta_matches_contract_function(self):
        # the vectorized eta equals the accessor-based coherent sum
        chan = tiny_channel(coherent=True, seed=11)
        rng = np.random.default_rng(12)
        prev = rng.integers(-1, chan.n_arms, size=chan.n)
        pilot = rng.integers(chan.n_arms, size=chan.n)
        zf = math.sqrt(chan.params.mu_mimo_suppression)
        eta = chan.estimation_eta(pilot, prev)
        for i in range(chan.n):
            j = int(pilot[i])

            def term(k, jj, l, ii):
                rx = zf if l == jj else math.sqrt(chan.rx_pf[ii, k, jj])
                return chan.amp0[k, jj] * math.sqrt(chan.tx_pf[k, jj, l]) * rx

            prev_map = {k: int(prev[k]) for k in range(chan.n) if prev[k] >= 0}
            expect = estimation_interference(i, j, prev_map, lambda k, jj, l, ii=i: term(k, jj, l, ii))
            assert eta[i] == pytest.approx(expect, rel=1e-9, abs=1e-30)
