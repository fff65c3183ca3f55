"""Vehicle lifecycle: Poisson arrivals, road travel, velocity resampling."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .geometry import Location


@dataclass
class RoadGraph:
    nodes: np.ndarray  # (K, 2) meters
    edges: list[tuple[int, int]]
    entries: list[int]
    exits: list[int]

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float).reshape(-1, 2)
        self._adj: dict[int, list[tuple[int, float]]] = {i: [] for i in range(len(self.nodes))}
        for a, b in self.edges:
            length = float(np.linalg.norm(self.nodes[a] - self.nodes[b]))
            if length <= 0:
                raise ConfigError("scenario.roads", f"zero-length edge {a}-{b}")
            self._adj[a].append((b, length))
            self._adj[b].append((a, length))
        for e in self.entries:
            if not any(self._route_exists(e, x) for x in self.exits if x != e):
                raise ConfigError("scenario.roads", f"entry node {e} reaches no exit")

    def _route_exists(self, a: int, b: int) -> bool:
        return self.shortest_path(a, b) is not None

    def shortest_path(self, start: int, goal: int) -> list[int] | None:
        """Label-setting shortest path; equal-length ties resolved toward the
        smaller predecessor index for determinism."""
        if start == goal:
            return [start]
        dist = {start: 0.0}
        pred: dict[int, int] = {}
        heap = [(0.0, start)]
        done = set()
        while heap:
            d, u = heapq.heappop(heap)
            if u in done:
                continue
            done.add(u)
            if u == goal:
                break
            for v, w in self._adj[u]:
                nd = d + w
                if v not in dist or nd < dist[v] - 1e-12:
                    dist[v] = nd
                    pred[v] = u
                    heapq.heappush(heap, (nd, v))
                elif abs(nd - dist[v]) <= 1e-12 and v not in done and u < pred.get(v, 1 << 60):
                    pred[v] = u
        if goal not in dist:
            return None
        path = [goal]
        while path[-1] != start:
            path.append(pred[path[-1]])
        return path[::-1]

    def route_lengths(self, route: list[int]) -> np.ndarray:
        """Cumulative arc length at each route node, starting at 0."""
        pts = self.nodes[route]
        seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        return np.concatenate([[0.0], np.cumsum(seg)])


@dataclass
class VehicleState:
    id: int
    velocity: float  # m/s
    route: list[int]
    route_progress: float = 0.0
    prev_bs: int | None = None
    age_s: float = 0.0
    _cum: np.ndarray | None = field(default=None, repr=False)

    def location_on(self, roads: RoadGraph) -> Location:
        if self._cum is None:
            self._cum = roads.route_lengths(self.route)
        cum = self._cum
        s = min(self.route_progress, cum[-1])
        k = int(np.searchsorted(cum, s, side="right")) - 1
        k = min(k, len(self.route) - 2) if len(self.route) > 1 else 0
        if len(self.route) == 1:
            p = roads.nodes[self.route[0]]
            return Location(float(p[0]), float(p[1]))
        a = roads.nodes[self.route[k]]
        b = roads.nodes[self.route[k + 1]]
        seg_len = cum[k + 1] - cum[k]
        t = 0.0 if seg_len <= 0 else (s - cum[k]) / seg_len
        p = a + t * (b - a)
        return Location(float(p[0]), float(p[1]))

    def total_route_length(self, roads: RoadGraph) -> float:
        if self._cum is None:
            self._cum = roads.route_lengths(self.route)
        return float(self._cum[-1])


def make_vehicle(
    vid: int, rng: np.random.Generator, roads: RoadGraph, v_min: float, v_max: float
) -> VehicleState:
    """Draw a fresh vehicle: random entry, uniform velocity, shortest route to
    a random reachable exit distinct from the entry."""
    entry = int(roads.entries[rng.integers(len(roads.entries))])
    candidates = [x for x in roads.exits if x != entry and roads.shortest_path(entry, x)]
    exit_node = int(candidates[rng.integers(len(candidates))])
    velocity = float(rng.uniform(v_min, v_max))
    route = roads.shortest_path(entry, exit_node)
    assert route is not None
    return VehicleState(id=vid, velocity=velocity, route=route)


def spawn_arrivals(
    arrivals_rng: np.random.Generator,
    lam: float,
    roads: RoadGraph,
    v_min: float,
    v_max: float,
    next_id: int,
    vehicle_rng_for: "callable",
) -> list[VehicleState]:
    """Poisson(lam) new vehicles this period. Per-vehicle attributes come from
    the vehicle's own stream so later arrivals never perturb earlier ones."""
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    count = int(arrivals_rng.poisson(lam)) if lam > 0 else 0
    out = []
    for k in range(count):
        vid = next_id + k
        out.append(make_vehicle(vid, vehicle_rng_for(vid), roads, v_min, v_max))
    return out


def step_vehicle(
    v: VehicleState,
    dt: float,
    roads: RoadGraph,
    rng: np.random.Generator,
    v_min: float,
    v_max: float,
) -> VehicleState | None:
    """Advance one period. Displacement uses the pre-step velocity; crossing a
    whole-second boundary resamples the velocity for subsequent periods.
    Returns None when the route is exhausted (departure)."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    v.route_progress += v.velocity * dt
    if v.route_progress > v.total_route_length(roads):
        return None
    new_age = v.age_s + dt
    if math.floor(new_age) > math.floor(v.age_s):
        v.velocity = float(rng.uniform(v_min, v_max))
    v.age_s = new_age
    return v
