"""Simplified stochastic mmWave channel.

Path loss follows the 3GPP TR 38.901 UMi street-canyon closed forms with
LOS/NLOS switching from the 2-D building map. Small-scale fading is Rician
with AR(1) Jakes-coefficient temporal evolution; beamformed links harden, so
NLOS links carry a configurable pseudo-K (0 recovers pure Rayleigh).
Beamforming is abstracted to main-lobe/side-lobe power factors applied on
both link ends by angular alignment, with multi-user receive combining
suppressing co-served interferers at their shared BS.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import j0

from .errors import ConfigError

SPEED_OF_LIGHT = 299_792_458.0
D_REF_M = 1.0  # distances below this are clamped before the path-loss log


@dataclass(frozen=True)
class RadioParams:
    carrier_hz: float = 28e9
    bandwidth_hz: float = 50e6
    tx_power_w: float = 1.0  # 30 dBm
    noise_density_w_hz: float = 10 ** (-174 / 10) * 1e-3  # thermal, W/Hz
    handover_cost: float = 0.1  # zeta, fraction of the period lost on handover
    main_lobe_gain: float = 100.0  # +20 dB combined tx/rx
    side_lobe_gain: float = 0.001  # -30 dB combined when both ends misalign
    rician_k: float = 10 ** 1.8  # 18 dB; beamformed LOS links harden
    # hardened NLOS pseudo-K: the beamformed combination of a reflection
    # cluster concentrates around its mean power; 0 recovers pure Rayleigh
    nlos_k: float = 10 ** 0.7  # 7 dB
    theta_beam: float = math.radians(6.0)
    d_max_m: float = 0.0  # 0 -> derive from the link budget
    r_max_bps: float = 0.0  # 0 -> derive from the link budget
    r_max_headroom: float = 10.0  # fading headroom on top of the 10 m budget
    # multi-user receive combining: residual power factor of a co-served
    # vehicle's interference at its own serving BS (massive-array separation)
    mu_mimo_suppression: float = 0.01  # -20 dB
    # "ergodic": a period's interference is the Doppler average over the many
    # phase coherence intervals inside one data phase (power sum).
    # "coherent": one frozen phase draw per term per period (snapshot form).
    interference_model: str = "ergodic"

    def __post_init__(self):
        if not (0.0 <= self.handover_cost < 1.0):
            raise ConfigError("radio.handover_cost", "must lie in [0, 1)")
        if self.side_lobe_gain >= self.main_lobe_gain:
            raise ConfigError("radio.side_lobe_gain", "must be below main_lobe_gain")
        for key in ("carrier_hz", "bandwidth_hz", "tx_power_w", "noise_density_w_hz"):
            if getattr(self, key) <= 0:
                raise ConfigError(f"radio.{key}", "must be positive")
        if not (0.0 < self.theta_beam < math.pi / 2):
            raise ConfigError("radio.theta_beam", "must lie in (0, pi/2)")
        if self.interference_model not in ("ergodic", "coherent"):
            raise ConfigError("radio.interference_model", "must be 'ergodic' or 'coherent'")

    @property
    def noise_w(self) -> float:
        return self.noise_density_w_hz * self.bandwidth_hz

    def with_derived_defaults(self) -> "RadioParams":
        """Fill d_max / R_max from the link budget when left at 0."""
        out = self
        if out.r_max_bps <= 0:
            snr_ref = (
                out.tx_power_w
                * out.main_lobe_gain
                * pathloss_linear(10.0, out.carrier_hz / 1e9, True)
                * out.r_max_headroom
                / out.noise_w
            )
            out = replace(out, r_max_bps=out.bandwidth_hz * math.log2(1.0 + snr_ref))
        if out.d_max_m <= 0:
            budget_db = 10 * math.log10(out.tx_power_w * out.main_lobe_gain / out.noise_w)
            f_ghz = out.carrier_hz / 1e9
            d = 10 ** ((budget_db - 32.4 - 20 * math.log10(f_ghz)) / 21.0)
            out = replace(out, d_max_m=max(d, 2 * D_REF_M))
        return out


def pathloss_db(d3d_m, f_ghz: float, los) -> np.ndarray:
    """UMi street-canyon path loss. `los` may be a scalar or bool array."""
    d = np.maximum(np.asarray(d3d_m, dtype=float), D_REF_M)
    pl_los = 32.4 + 21.0 * np.log10(d) + 20.0 * math.log10(f_ghz)
    pl_nlos = 22.4 + 35.3 * np.log10(d) + 21.3 * math.log10(f_ghz)
    return np.where(np.asarray(los, dtype=bool), pl_los, np.maximum(pl_los, pl_nlos))


def pathloss_linear(d3d_m, f_ghz: float, los) -> np.ndarray:
    return 10.0 ** (-pathloss_db(d3d_m, f_ghz, los) / 10.0)


@dataclass
class FadingState:
    """Per-link small-scale state: an AR(1) scattered component of unit mean
    power, a fixed specular phase, and the current LOS snapshot."""

    scatter: complex
    los_phase: float
    los: bool

    def coefficient(self, rician_k: float, nlos_k: float = 0.0) -> complex:
        """Unit-mean-power coefficient: Rician with factor `rician_k` under
        LOS, `nlos_k` otherwise (0 recovers pure Rayleigh)."""
        k = rician_k if self.los else nlos_k
        if k <= 0.0:
            return self.scatter
        return math.sqrt(k / (k + 1.0)) * complex(
            math.cos(self.los_phase), math.sin(self.los_phase)
        ) + math.sqrt(1.0 / (k + 1.0)) * self.scatter


def doppler_rho(velocity: float, carrier_hz: float, dt: float) -> float:
    """Jakes AR(1) coefficient J0(2 pi f_D dt)."""
    f_d = velocity * carrier_hz / SPEED_OF_LIGHT
    return float(j0(2.0 * math.pi * f_d * dt))


def evolve_fading(
    state: FadingState,
    velocity: float,
    dt: float,
    rng: np.random.Generator,
    carrier_hz: float = 28e9,
) -> FadingState:
    """AR(1) step of the scattered component; the LOS flag is a snapshot the
    caller refreshes from geometry."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    rho = doppler_rho(velocity, carrier_hz, dt)
    w = complex(rng.standard_normal(), rng.standard_normal()) / math.sqrt(2.0)
    scatter = rho * state.scatter + math.sqrt(max(0.0, 1.0 - rho * rho)) * w
    return FadingState(scatter=scatter, los_phase=state.los_phase, los=state.los)


def link_gain(fading: FadingState, d3d_m: float, params: RadioParams) -> float:
    """Desired-link power gain: main lobe x path loss x |fading|^2."""
    c = fading.coefficient(params.rician_k)
    pl = float(pathloss_linear(d3d_m, params.carrier_hz / 1e9, fading.los))
    return params.main_lobe_gain * pl * abs(c) ** 2


def interference_at(
    i: int,
    j: int,
    assoc: dict[int, int],
    term: "callable",
    params: RadioParams,
) -> float:
    """Interference plus noise (watts) at BS j while serving vehicle i.

    `term(k, j, l, i)` returns the complex sqrt-power contribution (phase and
    both-end beam factors included) of vehicle k transmitting toward BS l,
    received at BS j while j's beam serves vehicle i.
    """
    total = 0j
    for k, l in assoc.items():
        if k == i:
            continue
        total += term(k, j, l, i)
    return params.noise_w + abs(total) ** 2


def estimation_interference(
    i: int,
    j: int,
    prev_assoc: dict[int, int] | None,
    term: "callable",
) -> float:
    """Same coherent sum with last period's indicators, noise excluded.
    Returns 0 when no previous association exists."""
    if not prev_assoc:
        return 0.0
    total = 0j
    for k, l in prev_assoc.items():
        if k == i:
            continue
        total += term(k, j, l, i)
    return abs(total) ** 2


def estimation_rate(gain: float, eta_w: float, params: RadioParams) -> float:
    """Pilot-phase rate: W log2(1 + P g / (N0 W + eta))."""
    return params.bandwidth_hz * math.log2(
        1.0 + params.tx_power_w * gain / (params.noise_w + eta_w)
    )


def data_rate(gain: float, interf_w: float, handover: bool, params: RadioParams) -> float:
    """Data-phase rate with the handover derating factor."""
    factor = 1.0 - params.handover_cost * (1.0 if handover else 0.0)
    return factor * params.bandwidth_hz * math.log2(1.0 + params.tx_power_w * gain / interf_w)


def angle_diff(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Absolute angular difference wrapped into [0, pi]."""
    d = np.abs(a - b) % (2.0 * math.pi)
    return np.minimum(d, 2.0 * math.pi - d)


class PeriodChannel:
    """Frozen per-period channel realization for all active vehicles.

    Holds base power gains and both-end beam-alignment tables so any
    candidate association can be priced on the identical realization.

    Beam factors act on both link ends: an interference path k -> (i, j)
    carries the transmit factor of k's beam toward its own BS and the receive
    factor of BS j's beam formed toward its served vehicle i. Full alignment
    on both ends yields main_lobe_gain, full misalignment side_lobe_gain, and
    a single aligned end the geometric mean.

    Under the default "ergodic" model a period's interference is the average
    over the many phase coherence intervals inside one data phase: the power
    sum of the terms. Under "coherent" each term carries the frozen
    per-period phase passed in `phases` and terms add as complex amplitudes.
    """

    def __init__(
        self,
        positions: np.ndarray,  # (N, 2)
        sites_xy: np.ndarray,  # (A, 2)
        coeffs: np.ndarray,  # (N, A) complex fading coefficients
        los: np.ndarray,  # (N, A) bool
        phases: np.ndarray | None,  # (N, A) uniform [0, 2pi); coherent model only
        dz: float,  # BS antenna height minus vehicle antenna height
        params: RadioParams,
    ):
        self.params = params
        self.coherent = params.interference_model == "coherent"
        n, a = coeffs.shape
        self.n = n
        self.n_arms = a
        d2 = positions[:, None, :] - sites_xy[None, :, :]
        d2d = np.linalg.norm(d2, axis=2)
        self.d3d = np.sqrt(d2d**2 + dz**2)
        self.base_gain = pathloss_linear(self.d3d, params.carrier_hz / 1e9, los) * (
            np.abs(coeffs) ** 2
        )
        self.signal_gain = params.main_lobe_gain * self.base_gain  # (N, A)
        self.pw0 = params.tx_power_w * self.base_gain  # (N, A) unbeamed powers
        if self.coherent:
            if phases is None:
                raise ValueError("coherent interference model needs per-term phases")
            self.amp0 = np.sqrt(self.pw0) * np.exp(1j * phases)
        dirs = np.arctan2(d2[:, :, 1], d2[:, :, 0])  # (N, A) vehicle -> BS angle
        half = params.theta_beam / 2.0
        # per-end power factors: each end contributes the square root of the
        # combined gain, so main x main = main_lobe_gain
        pf_main = math.sqrt(params.main_lobe_gain)
        pf_side = math.sqrt(params.side_lobe_gain)
        # tx_pf[k, j, l]: power factor of vehicle k's beam (aimed at BS l) in
        # the direction of BS j; symmetric in (j, l)
        tx_aligned = angle_diff(dirs[:, :, None], dirs[:, None, :]) < half
        self.tx_pf = np.where(tx_aligned, pf_main, pf_side)
        # rx_pf[i, k, j]: receive factor at BS j (beam formed toward its
        # served vehicle i) in the direction of interferer k; bearings at the
        # BS differ by the same angle as the vehicle->BS directions
        rx_aligned = angle_diff(dirs[:, None, :], dirs[None, :, :]) < half
        self.rx_pf = np.where(rx_aligned, pf_main, pf_side)
        self.los = los

    def _tx_row_pf(self, assoc: np.ndarray) -> np.ndarray:
        """(N, A) transmit power factor of each vehicle toward every BS given
        its serving BS; rows with assoc < 0 are zeroed (not transmitting)."""
        act = assoc >= 0
        idx = np.where(act, assoc, 0)
        at = self.tx_pf[np.arange(self.n), :, idx]  # (N, A)
        return np.where(act[:, None], at, 0.0)

    def _rx_factor(self, co_served: np.ndarray, rx: np.ndarray) -> np.ndarray:
        """Receive-end power factor: beam alignment for cross-BS paths, the
        multi-user combining residue for a co-served vehicle at its own BS."""
        return np.where(co_served, self.params.mu_mimo_suppression, rx)

    def interference_matrix(self, assoc: np.ndarray) -> np.ndarray:
        """(N, A) interference-plus-noise at every candidate BS j while
        serving vehicle i (receive beam on i), excluding i's own term,
        with all other vehicles transmitting under `assoc`."""
        rows = np.arange(self.n)
        co = (assoc[:, None] == np.arange(self.n_arms)[None, :]) & (assoc >= 0)[:, None]
        if self.coherent:
            m = self.amp0 * np.sqrt(self._tx_row_pf(assoc))
            rx = np.sqrt(self._rx_factor(co[None, :, :], self.rx_pf))
            t = m[None, :, :] * rx
            total = t.sum(axis=1)  # (i, j)
            own = t[rows, rows, :]
            return np.abs(total - own) ** 2 + self.params.noise_w
        m = self.pw0 * self._tx_row_pf(assoc)  # (k, j) transmit-weighted powers
        t = m[None, :, :] * self._rx_factor(co[None, :, :], self.rx_pf)  # (i, k, j)
        total = t.sum(axis=1)
        own = t[rows, rows, :]
        return np.maximum(total - own, 0.0) + self.params.noise_w

    def _interference_served(self, serve_bs: np.ndarray, tx_assoc: np.ndarray) -> np.ndarray:
        """(N,) interference power at each vehicle's `serve_bs`, receive beam
        on the vehicle, with transmitters beamed per `tx_assoc`. Noise not
        included; the receiver's own term is excluded."""
        rows = np.arange(self.n)
        co = tx_assoc[None, :] == serve_bs[:, None]  # (i, k); tx rows w/o prev are 0 anyway
        if self.coherent:
            m = self.amp0 * np.sqrt(self._tx_row_pf(tx_assoc))
            rx = np.sqrt(self._rx_factor(co, self.rx_pf[rows, :, serve_bs]))
            t = m[:, serve_bs].T * rx
            coh = t.sum(axis=1) - t[rows, rows]
            return np.abs(coh) ** 2
        m = self.pw0 * self._tx_row_pf(tx_assoc)
        t = m[:, serve_bs].T * self._rx_factor(co, self.rx_pf[rows, :, serve_bs])  # (i, k)
        return np.maximum(t.sum(axis=1) - t[rows, rows], 0.0)

    def rates(self, assoc: np.ndarray, prev_assoc: np.ndarray) -> np.ndarray:
        """Per-vehicle data rates under `assoc` with handover costs relative
        to `prev_assoc` (-1 where the vehicle had no previous BS)."""
        p = self.params
        rows = np.arange(self.n)
        interf = self._interference_served(assoc, assoc) + p.noise_w
        sinr = p.tx_power_w * self.signal_gain[rows, assoc] / interf
        handover = (prev_assoc >= 0) & (prev_assoc != assoc)
        return (1.0 - p.handover_cost * handover) * p.bandwidth_hz * np.log2(1.0 + sinr)

    def estimation_eta(self, pilot_bs: np.ndarray, prev_assoc: np.ndarray) -> np.ndarray:
        """Per-vehicle pilot interference (watts, noise excluded) at each
        vehicle's pilot BS, using last period's association indicators.
        Vehicles without a previous BS are silent."""
        return self._interference_served(pilot_bs, prev_assoc)

    def estimation_rates(self, pilot_bs: np.ndarray, prev_assoc: np.ndarray) -> np.ndarray:
        p = self.params
        eta = self.estimation_eta(pilot_bs, prev_assoc)
        rows = np.arange(self.n)
        snr = p.tx_power_w * self.signal_gain[rows, pilot_bs] / (p.noise_w + eta)
        return p.bandwidth_hz * np.log2(1.0 + snr)
