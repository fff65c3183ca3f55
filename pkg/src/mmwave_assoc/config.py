"""Configuration loading, validation, defaults, and seed derivation.

Configs are JSON. Unknown keys are rejected, duplicate keys are a parse
error, and every run emits an effective-config echo with all defaults filled
in. Default parameter values follow the evaluation setup: alpha = 1,
alpha_ts = 1, p = 0.1, lambda = 0.3, 9 BSs, 28 GHz, 30 dBm, 50 MHz,
antenna heights 10 m / 2 m, velocities 20-80 km/h.
"""

from __future__ import annotations

import hashlib
import json
import math
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .channel import RadioParams
from .contexts import ContextGrid
from .errors import ConfigError
from .geometry import BaseStationSite, BuildingMap, Location
from .mobility import RoadGraph
from .policies import PolicyKind

KMH = 1.0 / 3.6


def derive_rng(master_seed: int, purpose: str, entity: int = 0) -> np.random.Generator:
    """Child stream keyed by (seed, purpose, entity): adding a new draw
    purpose never perturbs existing streams."""
    tag = zlib.crc32(purpose.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence([master_seed, tag, entity]))


@dataclass
class Scenario:
    world_w: float
    world_h: float
    bs_height_m: float
    vehicle_height_m: float
    v_min_kmh: float
    v_max_kmh: float
    buildings: list  # [x_min, y_min, x_max, y_max] rows
    road_nodes: list  # [x, y] rows
    road_edges: list  # [a, b] index pairs
    road_entries: list
    road_exits: list
    bs_xy: list  # [x, y] rows

    @property
    def v_min(self) -> float:
        return self.v_min_kmh * KMH

    @property
    def v_max(self) -> float:
        return self.v_max_kmh * KMH

    def building_map(self) -> BuildingMap:
        return BuildingMap(np.array(self.buildings, dtype=float).reshape(-1, 4))

    def road_graph(self) -> RoadGraph:
        return RoadGraph(
            nodes=np.array(self.road_nodes, dtype=float),
            edges=[tuple(e) for e in self.road_edges],
            entries=list(self.road_entries),
            exits=list(self.road_exits),
        )

    def sites(self) -> list[BaseStationSite]:
        return [
            BaseStationSite(i, Location(float(x), float(y)), self.bs_height_m)
            for i, (x, y) in enumerate(self.bs_xy)
        ]


def desk_scenario(w: float = 90.0, bs_offset: float = 4.0) -> Scenario:
    """Synthetic street-canyon block: two horizontal and two vertical streets
    crossing an `w` x `w` world, building blocks between them, and 9 BSs
    along the street corridors.

    BSs sit staggered off the street axes so a beam aimed at one BS does not
    sweep the others, and vehicles may enter or leave at any node (street
    ends and intersections), which keeps the population desk-sized."""
    s1, s2 = 0.325 * w, 0.675 * w  # street centerlines
    nodes = [
        [0, s1], [s1, s1], [s2, s1], [w, s1],
        [0, s2], [s1, s2], [s2, s2], [w, s2],
        [s1, 0], [s2, 0], [s1, w], [s2, w],
    ]
    edges = [
        [0, 1], [1, 2], [2, 3],
        [4, 5], [5, 6], [6, 7],
        [8, 1], [1, 5], [5, 10],
        [9, 2], [2, 6], [6, 11],
    ]
    everywhere = list(range(len(nodes)))
    setback = 0.05 * w
    lo1, hi1 = s1 + setback, s2 - setback
    elo, ehi = s1 - setback, s2 + setback
    plaza_lo, plaza_hi = 0.45 * w, 0.55 * w
    buildings = [
        # corner blocks
        [0, 0, elo, elo],
        [ehi, 0, w, elo],
        [0, ehi, elo, w],
        [ehi, ehi, w, w],
        # edge blocks
        [lo1, 0, hi1, elo],
        [lo1, ehi, hi1, w],
        [0, lo1, elo, hi1],
        [ehi, lo1, w, hi1],
        # split center block, leaving a mid-plaza corridor for the center BS
        [lo1, lo1, hi1, plaza_lo],
        [lo1, plaza_hi, hi1, hi1],
    ]
    # one end BS and one mid-block BS per street, staggered to alternating
    # sides and at distinct along-street positions so no two sites coincide
    # and no beam toward one BS sweeps another
    off = bs_offset
    bs_xy = [
        [0.15 * w, s1 - off], [0.60 * w, s1 + off],
        [0.40 * w, s2 - off], [0.85 * w, s2 + off],
        [s1 + off, 0.15 * w], [s1 - off, 0.60 * w],
        [s2 - off, 0.40 * w], [s2 + off, 0.85 * w],
        [0.5 * w, 0.5 * w],
    ]
    return Scenario(
        world_w=w,
        world_h=w,
        bs_height_m=10.0,
        vehicle_height_m=2.0,
        v_min_kmh=20.0,
        v_max_kmh=80.0,
        buildings=buildings,
        road_nodes=nodes,
        road_edges=edges,
        road_entries=everywhere,
        road_exits=everywhere,
        bs_xy=bs_xy,
    )


@dataclass
class SimConfig:
    scenario: Scenario
    policy: PolicyKind
    horizon: int = 20000
    seed: int = 0
    lam: float = 0.3
    period_s: float = 0.1
    oracle_mode: str = "wcs_reference"  # or "exhaustive"
    alpha: float = 1.0
    p: float = 0.1
    alpha_ts: float = 1.0
    ts_sigma_is_variance: bool = False
    radio: RadioParams = field(default_factory=RadioParams)
    n_v: int = 4
    n_x: int = 20
    n_y: int = 20
    track_misid: bool = True
    wcs_max_iters: int | None = None

    def grid(self) -> ContextGrid:
        return ContextGrid(
            n_v=self.n_v,
            n_x=self.n_x,
            n_y=self.n_y,
            v_min=self.scenario.v_min,
            v_max=self.scenario.v_max,
            world_w=self.scenario.world_w,
            world_h=self.scenario.world_h,
        )

    def effective_dict(self) -> dict:
        d = {
            "horizon": self.horizon,
            "seed": self.seed,
            "lambda": self.lam,
            "period_s": self.period_s,
            "policy": self.policy.value,
            "oracle_mode": self.oracle_mode,
            "learner": {"alpha": self.alpha, "p": self.p},
            "agent": {
                "alpha_ts": self.alpha_ts,
                "ts_sigma_is_variance": self.ts_sigma_is_variance,
            },
            "grid": {"n_v": self.n_v, "n_x": self.n_x, "n_y": self.n_y},
            "radio": {
                "carrier_hz": self.radio.carrier_hz,
                "bandwidth_hz": self.radio.bandwidth_hz,
                "tx_power_w": self.radio.tx_power_w,
                "noise_density_w_hz": self.radio.noise_density_w_hz,
                "handover_cost": self.radio.handover_cost,
                "main_lobe_gain": self.radio.main_lobe_gain,
                "side_lobe_gain": self.radio.side_lobe_gain,
                "rician_k": self.radio.rician_k,
                "theta_beam": self.radio.theta_beam,
                "d_max_m": self.radio.d_max_m,
                "r_max_bps": self.radio.r_max_bps,
                "r_max_headroom": self.radio.r_max_headroom,
            },
            "track_misid": self.track_misid,
            "wcs_max_iters": self.wcs_max_iters,
            "scenario": asdict(self.scenario),
        }
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.effective_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _reject_duplicates(pairs):
    seen = {}
    for k, v in pairs:
        if k in seen:
            raise ConfigError(k, "duplicate key")
        seen[k] = v
    return seen


def _check_keys(section: str, d: dict, allowed: set[str]):
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"{section}.{sorted(unknown)[0]}", "unknown key")


def _db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def _load_radio(d: dict) -> RadioParams:
    _check_keys(
        "radio",
        d,
        {
            "carrier_ghz",
            "bandwidth_mhz",
            "tx_power_dbm",
            "noise_density_dbm_hz",
            "handover_cost",
            "main_lobe_gain_db",
            "side_lobe_gain_db",
            "rician_k_db",
            "nlos_k_db",
            "theta_beam_deg",
            "d_max_m",
            "r_max_bps",
            "r_max_headroom_db",
            "mu_mimo_suppression_db",
            "interference_model",
        },
    )
    zeta = d.get("handover_cost", 0.1)
    if not (0.0 <= zeta < 1.0):
        raise ConfigError("radio.handover_cost", f"{zeta} outside [0, 1)")
    theta_deg = d.get("theta_beam_deg", 6.0)
    if not (0.0 < theta_deg < 90.0):
        raise ConfigError("radio.theta_beam_deg", f"{theta_deg} outside (0, 90)")
    return RadioParams(
        carrier_hz=d.get("carrier_ghz", 28.0) * 1e9,
        bandwidth_hz=d.get("bandwidth_mhz", 50.0) * 1e6,
        tx_power_w=_db_to_linear(d.get("tx_power_dbm", 30.0)) * 1e-3,
        noise_density_w_hz=_db_to_linear(d.get("noise_density_dbm_hz", -174.0)) * 1e-3,
        handover_cost=zeta,
        main_lobe_gain=_db_to_linear(d.get("main_lobe_gain_db", 20.0)),
        side_lobe_gain=_db_to_linear(d.get("side_lobe_gain_db", -30.0)),
        rician_k=_db_to_linear(d.get("rician_k_db", 18.0)),
        nlos_k=_db_to_linear(d.get("nlos_k_db", 7.0)),
        theta_beam=math.radians(theta_deg),
        d_max_m=d.get("d_max_m", 0.0),
        r_max_bps=d.get("r_max_bps", 0.0),
        r_max_headroom=_db_to_linear(d.get("r_max_headroom_db", 10.0)),
        mu_mimo_suppression=_db_to_linear(d.get("mu_mimo_suppression_db", -20.0)),
        interference_model=d.get("interference_model", "ergodic"),
    ).with_derived_defaults()


def _load_scenario(d: dict) -> Scenario:
    if "preset" in d:
        if d["preset"] != "desk":
            raise ConfigError("scenario.preset", f"unknown preset {d['preset']!r}")
        base = desk_scenario()
        rest = {k: v for k, v in d.items() if k != "preset"}
        _check_keys("scenario", rest, {"v_min_kmh", "v_max_kmh", "bs_height_m", "vehicle_height_m"})
        for k, v in rest.items():
            setattr(base, k, float(v))
        return base
    _check_keys(
        "scenario",
        d,
        {
            "world_w",
            "world_h",
            "bs_height_m",
            "vehicle_height_m",
            "v_min_kmh",
            "v_max_kmh",
            "buildings",
            "road_nodes",
            "road_edges",
            "road_entries",
            "road_exits",
            "bs_xy",
        },
    )
    required = {"world_w", "world_h", "road_nodes", "road_edges", "road_entries", "road_exits", "bs_xy"}
    for k in sorted(required):
        if k not in d:
            raise ConfigError(f"scenario.{k}", "missing required key")
    sc = Scenario(
        world_w=float(d["world_w"]),
        world_h=float(d["world_h"]),
        bs_height_m=float(d.get("bs_height_m", 10.0)),
        vehicle_height_m=float(d.get("vehicle_height_m", 2.0)),
        v_min_kmh=float(d.get("v_min_kmh", 20.0)),
        v_max_kmh=float(d.get("v_max_kmh", 80.0)),
        buildings=d.get("buildings", []),
        road_nodes=d["road_nodes"],
        road_edges=d["road_edges"],
        road_entries=d["road_entries"],
        road_exits=d["road_exits"],
        bs_xy=d["bs_xy"],
    )
    if sc.v_max_kmh <= sc.v_min_kmh or sc.v_min_kmh < 0:
        raise ConfigError("scenario.v_min_kmh", "need 0 <= v_min < v_max")
    for r in sc.buildings:
        x0, y0, x1, y1 = r
        if not (0 <= x0 < x1 <= sc.world_w and 0 <= y0 < y1 <= sc.world_h):
            raise ConfigError("scenario.buildings", f"rect {r} invalid or outside world")
    return sc


TOP_KEYS = {
    "horizon",
    "seed",
    "lambda",
    "period_s",
    "policy",
    "oracle_mode",
    "learner",
    "agent",
    "grid",
    "radio",
    "scenario",
    "track_misid",
    "wcs_max_iters",
}


def config_from_dict(raw: dict) -> SimConfig:
    _check_keys("config", raw, TOP_KEYS)
    if "policy" not in raw:
        raise ConfigError("policy", "missing required key")
    if "scenario" not in raw:
        raise ConfigError("scenario", "missing required key")
    try:
        policy = PolicyKind(raw["policy"])
    except ValueError:
        raise ConfigError("policy", f"unknown policy {raw['policy']!r}") from None

    learner = raw.get("learner", {})
    _check_keys("learner", learner, {"alpha", "p"})
    agent = raw.get("agent", {})
    _check_keys("agent", agent, {"alpha_ts", "ts_sigma_is_variance"})
    grid = raw.get("grid", {})
    _check_keys("grid", grid, {"n_v", "n_x", "n_y"})

    horizon = int(raw.get("horizon", 20000))
    if horizon < 1:
        raise ConfigError("horizon", "must be >= 1")
    lam = float(raw.get("lambda", 0.3))
    if lam < 0:
        raise ConfigError("lambda", "must be >= 0")
    period_s = float(raw.get("period_s", 0.1))
    if period_s <= 0:
        raise ConfigError("period_s", "must be > 0")
    p = float(learner.get("p", 0.1))
    if not (0.0 <= p <= 1.0):
        raise ConfigError("learner.p", f"{p} outside [0, 1]")
    alpha = float(learner.get("alpha", 1.0))
    if alpha < 0:
        raise ConfigError("learner.alpha", "must be >= 0")
    alpha_ts = float(agent.get("alpha_ts", 1.0))
    if alpha_ts < 0:
        raise ConfigError("agent.alpha_ts", "must be >= 0")
    oracle_mode = raw.get("oracle_mode", "wcs_reference")
    if oracle_mode not in ("wcs_reference", "exhaustive"):
        raise ConfigError("oracle_mode", f"unknown mode {oracle_mode!r}")
    for dim in ("n_v", "n_x", "n_y"):
        if int(grid.get(dim, {"n_v": 4, "n_x": 20, "n_y": 20}[dim])) < 1:
            raise ConfigError(f"grid.{dim}", "must be >= 1")

    return SimConfig(
        scenario=_load_scenario(raw["scenario"]),
        policy=policy,
        horizon=horizon,
        seed=int(raw.get("seed", 0)),
        lam=lam,
        period_s=period_s,
        oracle_mode=oracle_mode,
        alpha=alpha,
        p=p,
        alpha_ts=alpha_ts,
        ts_sigma_is_variance=bool(agent.get("ts_sigma_is_variance", False)),
        radio=_load_radio(raw.get("radio", {})),
        n_v=int(grid.get("n_v", 4)),
        n_x=int(grid.get("n_x", 20)),
        n_y=int(grid.get("n_y", 20)),
        track_misid=bool(raw.get("track_misid", True)),
        wcs_max_iters=raw.get("wcs_max_iters"),
    )


def load_config(path: str | Path) -> SimConfig:
    text = Path(path).read_text()
    raw = json.loads(text, object_pairs_hook=_reject_duplicates)
    return config_from_dict(raw)
