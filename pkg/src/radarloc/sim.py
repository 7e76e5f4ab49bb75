"""Synthetic scenario generator: road maps, vehicle motion and radar frames.

Roads and vehicle paths are chains of straight and circular-arc segments.
Vehicles move at constant speed along their path (exactly CTRA-consistent:
zero acceleration, piecewise-constant yaw rate). Radar frames sample
reflection points on the sensor-facing sides of each vehicle's footprint.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidSpecError
from .geometry import LabeledCloud, PointCloud, Transform3
from .laneletmap import Lanelet, LaneletMap
from .coarse import RadarFrame

_ALS_NOISE_SEED = 0xA15  # map geometry must not depend on the scenario seed
_CONTINUITY_TOL = 1e-6
_SIM_DT = 0.05


# ---------------------------------------------------------------------------
# Path geometry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Segment:
    """Straight line or circular arc with explicit endpoints."""

    kind: str                 # "straight" | "arc"
    start: tuple[float, float]
    end: tuple[float, float]
    center: tuple[float, float] | None = None  # arc only
    ccw: bool = True                           # arc only

    def __post_init__(self):
        if self.kind not in ("straight", "arc"):
            raise InvalidSpecError(f"unknown segment kind {self.kind!r}")
        if self.kind == "arc":
            if self.center is None:
                raise InvalidSpecError("arc segment needs a center")
            r0 = math.dist(self.start, self.center)
            r1 = math.dist(self.end, self.center)
            if abs(r0 - r1) > 1e-6 or r0 <= 0:
                raise InvalidSpecError("arc endpoints must be equidistant from center")

    @property
    def radius(self) -> float:
        return math.dist(self.start, self.center)

    def _angles(self) -> tuple[float, float]:
        a0 = math.atan2(self.start[1] - self.center[1], self.start[0] - self.center[0])
        a1 = math.atan2(self.end[1] - self.center[1], self.end[0] - self.center[0])
        return a0, a1

    @property
    def length(self) -> float:
        if self.kind == "straight":
            return math.dist(self.start, self.end)
        a0, a1 = self._angles()
        sweep = (a1 - a0) % (2 * math.pi) if self.ccw else (a0 - a1) % (2 * math.pi)
        if sweep == 0.0:
            sweep = 2 * math.pi
        return self.radius * sweep

    def state_at(self, s: float) -> tuple[float, float, float, float]:
        """(x, y, heading, curvature) at arc length s from the segment start."""
        if self.kind == "straight":
            dx = self.end[0] - self.start[0]
            dy = self.end[1] - self.start[1]
            length = math.hypot(dx, dy)
            f = s / length
            return (self.start[0] + f * dx, self.start[1] + f * dy,
                    math.atan2(dy, dx), 0.0)
        r = self.radius
        a0, _ = self._angles()
        if self.ccw:
            theta = a0 + s / r
            heading = theta + math.pi / 2
            kappa = 1.0 / r
        else:
            theta = a0 - s / r
            heading = theta - math.pi / 2
            kappa = -1.0 / r
        return (self.center[0] + r * math.cos(theta),
                self.center[1] + r * math.sin(theta), heading, kappa)


@dataclass(frozen=True)
class Path:
    """Continuous chain of segments with arc-length lookup."""

    segments: tuple[Segment, ...]

    def __post_init__(self):
        segs = tuple(self.segments)
        if not segs:
            raise InvalidSpecError("path has no segments")
        for prev, cur in zip(segs, segs[1:]):
            if math.dist(prev.end, cur.start) > _CONTINUITY_TOL:
                raise InvalidSpecError(
                    f"segment chain is discontinuous at {prev.end} -> {cur.start}")
        object.__setattr__(self, "segments", segs)

    @property
    def length(self) -> float:
        return sum(seg.length for seg in self.segments)

    def state_at(self, s: float):
        s = min(max(s, 0.0), self.length)
        for seg in self.segments:
            if s <= seg.length or seg is self.segments[-1]:
                return seg.state_at(min(s, seg.length))
            s -= seg.length
        raise AssertionError("unreachable")

    def sample(self, step: float = 1.0) -> np.ndarray:
        """(N, 4) array of (x, y, heading, curvature) every ``step`` meters."""
        n = max(int(math.ceil(self.length / step)), 1)
        ss = np.linspace(0.0, self.length, n + 1)
        return np.array([self.state_at(s) for s in ss])


# ---------------------------------------------------------------------------
# Scenario description
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RoadSpec:
    path: Path
    width: float = 4.0


@dataclass(frozen=True)
class VehicleSpec:
    path: Path
    speed: float = 10.0
    start_time: float = 0.0
    length: float = 4.5
    width: float = 1.8

    def __post_init__(self):
        if self.speed < 0:
            raise InvalidSpecError("vehicle speed must be >= 0")

    @property
    def end_time(self) -> float:
        if self.speed == 0:
            return math.inf
        return self.start_time + self.path.length / self.speed


@dataclass(frozen=True)
class ScenarioSpec:
    roads: tuple[RoadSpec, ...]
    vehicles: tuple[VehicleSpec, ...]
    sensor_pose: Transform3 = field(default_factory=Transform3.identity)
    fov_horizontal_deg: float = 120.0
    fov_vertical_deg: float = 30.0
    max_range: float = 150.0
    points_per_second: float = 10000.0
    frame_dt: float = 0.1
    noise_position_std: float = 0.3   # m
    noise_range_rate_std: float = 0.1  # m/s
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.fov_horizontal_deg < 360 or not 0 < self.fov_vertical_deg < 360:
            raise InvalidSpecError("FOV must be in (0, 360) degrees")


@dataclass(frozen=True)
class VehicleTruth:
    vehicle_id: int
    length: float
    width: float
    history: np.ndarray  # (T, 7): t, x, y, v, a, phi, phi_dot


@dataclass(frozen=True)
class ScenarioTruth:
    sensor_pose: Transform3
    vehicles: tuple[VehicleTruth, ...]
    lanelet_map: LaneletMap
    als: PointCloud


# ---------------------------------------------------------------------------
# Map and ALS generation
# ---------------------------------------------------------------------------

def _segment_lanelet(seg: Segment, width: float, lanelet_id: int) -> Lanelet:
    states = Path((seg,)).sample(step=1.0)
    normal = np.column_stack([-np.sin(states[:, 2]), np.cos(states[:, 2])])
    center = states[:, :2]
    return Lanelet(lanelet_id, center + 0.5 * width * normal,
                   center - 0.5 * width * normal)


def build_map(spec: ScenarioSpec, grid: float = 0.5,
              z_noise_std: float = 0.02) -> tuple[LaneletMap, PointCloud]:
    """Lanelets per road segment and a synthetic road-surface laser scan."""
    if not spec.roads:
        raise InvalidSpecError("scenario has no roads")
    lanelets = []
    next_id = 1
    for road in spec.roads:
        for seg in road.path.segments:
            lanelets.append(_segment_lanelet(seg, road.width, next_id))
            next_id += 1
    lanelet_map = LaneletMap(tuple(lanelets))

    from .laneletmap import points_in_polygon
    rng = np.random.default_rng(_ALS_NOISE_SEED)
    seen: set[tuple[int, int]] = set()
    points = []
    for lanelet in lanelets:
        poly = lanelet.polygon()
        lo = np.floor(poly.min(axis=0) / grid).astype(int)
        hi = np.ceil(poly.max(axis=0) / grid).astype(int)
        xs = np.arange(lo[0], hi[0] + 1) * grid
        ys = np.arange(lo[1], hi[1] + 1) * grid
        gx, gy = np.meshgrid(xs, ys)
        cand = np.column_stack([gx.ravel(), gy.ravel()])
        inside = points_in_polygon(cand, poly)
        for x, y in cand[inside]:
            key = (round(x / grid), round(y / grid))
            if key in seen:
                continue
            seen.add(key)
            points.append((x, y))
    pts = np.array(sorted(points))
    z = rng.normal(0.0, z_noise_std, size=pts.shape[0])
    return lanelet_map, PointCloud(np.column_stack([pts, z]))


# ---------------------------------------------------------------------------
# Vehicle motion
# ---------------------------------------------------------------------------

def vehicle_state(vspec: VehicleSpec, t: float):
    """Exact (x, y, v, a, phi, phi_dot) at time t, or None if off-path."""
    if t < vspec.start_time or t > vspec.end_time:
        return None
    s = vspec.speed * (t - vspec.start_time)
    x, y, heading, kappa = vspec.path.state_at(s)
    return np.array([x, y, vspec.speed, 0.0, heading, kappa * vspec.speed])


def simulate_vehicles(spec: ScenarioSpec, dt: float = _SIM_DT) -> tuple[VehicleTruth, ...]:
    """Ground-truth state histories sampled at a fixed timestep."""
    out = []
    for i, vspec in enumerate(spec.vehicles, start=1):
        times = np.arange(vspec.start_time, vspec.end_time + dt / 2, dt)
        rows = []
        for t in times:
            state = vehicle_state(vspec, t)
            if state is not None:
                rows.append(np.concatenate([[t], state]))
        out.append(VehicleTruth(i, vspec.length, vspec.width, np.array(rows)))
    return tuple(out)


def make_truth(spec: ScenarioSpec) -> ScenarioTruth:
    lanelet_map, als = build_map(spec)
    return ScenarioTruth(spec.sensor_pose, simulate_vehicles(spec), lanelet_map, als)


# ---------------------------------------------------------------------------
# Radar rendering
# ---------------------------------------------------------------------------

def _in_fov(points_sensor: np.ndarray, spec: ScenarioSpec) -> np.ndarray:
    x, y, z = points_sensor.T
    rng_xy = np.hypot(x, y)
    h_angle = np.arctan2(y, x)
    v_angle = np.arctan2(z, rng_xy)
    dist = np.sqrt(x * x + y * y + z * z)
    return ((np.abs(h_angle) <= math.radians(spec.fov_horizontal_deg) / 2)
            & (np.abs(v_angle) <= math.radians(spec.fov_vertical_deg) / 2)
            & (dist <= spec.max_range) & (dist > 1e-9))


def _footprint_edges(state: np.ndarray, length: float, width: float):
    """Edges of the ground-plane rectangle: (start, end, outward normal)."""
    cx, cy, phi = state[0], state[1], state[4]
    c, s = math.cos(phi), math.sin(phi)
    rot = np.array([[c, -s], [s, c]])
    half_l, half_w = length / 2, width / 2
    corners_body = np.array([[half_l, half_w], [-half_l, half_w],
                             [-half_l, -half_w], [half_l, -half_w]])
    corners = corners_body @ rot.T + np.array([cx, cy])
    normals_body = np.array([[0.0, 1.0], [-1.0, 0.0], [0.0, -1.0], [1.0, 0.0]])
    edges = []
    for k in range(4):
        a, b = corners[k], corners[(k + 1) % 4]
        edges.append((a, b, rot @ normals_body[k]))
    return edges


def render_radar(spec: ScenarioSpec, truth: ScenarioTruth,
                 t0: float, t1: float) -> list[RadarFrame]:
    """Radar frames over [t0, t1): facing-side reflections with noise.

    Deterministic under the scenario seed; each frame draws from its own
    derived random stream so rendering order does not matter.
    """
    if t1 <= t0:
        raise InvalidSpecError("t1 must be greater than t0")
    sensor_pos = truth.sensor_pose.translation
    inv_pose = truth.sensor_pose.inverse()
    budget = int(round(spec.points_per_second * spec.frame_dt))
    frames = []
    n_frames = int(round((t1 - t0) / spec.frame_dt))
    for fi in range(n_frames):
        t = t0 + fi * spec.frame_dt
        rng = np.random.default_rng([spec.seed, fi])
        active = [v for v in spec.vehicles
                  if vehicle_state(v, t) is not None]
        # visibility pre-check on the vehicle center
        visible = []
        for v in active:
            state = vehicle_state(v, t)
            center_sensor = inv_pose.apply(np.array([[state[0], state[1], 0.0]]))
            if _in_fov(center_sensor, spec)[0]:
                visible.append((v, state))
        if not visible:
            continue
        per_vehicle = max(budget // len(visible), 1)
        pts_global = []
        rrates = []
        for vspec, state in visible:
            edges = [(a, b, n) for a, b, n in
                     _footprint_edges(state, vspec.length, vspec.width)
                     if float(np.dot(n, sensor_pos[:2] - (a + b) / 2)) > 0.0]
            if not edges:
                continue
            lengths = np.array([math.dist(a, b) for a, b, _ in edges])
            counts = np.maximum((per_vehicle * lengths / lengths.sum()).round().astype(int), 1)
            vel = state[2] * np.array([math.cos(state[4]), math.sin(state[4])])
            omega = state[5]
            center = state[:2]
            for (a, b, _), count in zip(edges, counts):
                f = rng.uniform(0.0, 1.0, size=count)
                pts = a + f[:, None] * (b - a)
                rel = pts - center
                v_pts = vel + omega * np.column_stack([-rel[:, 1], rel[:, 0]])
                p3 = np.column_stack([pts, np.zeros(count)])
                los = p3 - sensor_pos
                los /= np.linalg.norm(los, axis=1, keepdims=True)
                rr = np.einsum("ij,ij->i", np.column_stack([v_pts, np.zeros(count)]), los)
                pts_global.append(p3)
                rrates.append(rr)
        if not pts_global:
            continue
        p_global = np.concatenate(pts_global)
        rr = np.concatenate(rrates)
        p_sensor = inv_pose.apply(p_global)
        p_sensor = p_sensor + rng.normal(0.0, spec.noise_position_std, p_sensor.shape)
        rr = rr + rng.normal(0.0, spec.noise_range_rate_std, rr.shape)
        keep = _in_fov(p_sensor, spec)
        if not np.any(keep):
            continue
        frames.append(RadarFrame(round(t, 6), PointCloud(p_sensor[keep], rr[keep])))
    return frames


# ---------------------------------------------------------------------------
# Birth-region suggestion
# ---------------------------------------------------------------------------

def suggest_birth_regions(spec: ScenarioSpec, radius: float = 8.0,
                          merge_distance: float = 6.0) -> list[tuple[float, float, float, float]]:
    """(x, y, radius, heading) where vehicle paths enter the field of view."""
    inv_pose = spec.sensor_pose.inverse()
    entries = []
    for vspec in spec.vehicles:
        states = vspec.path.sample(step=2.0)
        p3 = np.column_stack([states[:, :2], np.zeros(states.shape[0])])
        inside = _in_fov(inv_pose.apply(p3), spec)
        idx = np.flatnonzero(inside)
        if idx.size == 0:
            continue
        k = idx[0]
        entries.append((states[k, 0], states[k, 1], states[k, 2]))
    regions: list[tuple[float, float, float, float]] = []
    for x, y, heading in entries:
        duplicate = any(
            math.hypot(rx - x, ry - y) <= merge_distance
            and abs(math.remainder(rh - heading, 2 * math.pi)) <= 0.5
            for rx, ry, _, rh in regions)
        if not duplicate:
            regions.append((x, y, radius, heading))
    return regions


# ---------------------------------------------------------------------------
# Bundled scenarios
# ---------------------------------------------------------------------------

def _straight(p0, p1) -> Segment:
    return Segment("straight", tuple(p0), tuple(p1))


def _arc(p0, p1, center, ccw) -> Segment:
    return Segment("arc", tuple(p0), tuple(p1), tuple(center), ccw)


def _route(start, heading, ops) -> Path:
    """Build a path from ("s", length) and ("t", angle, radius) operations.

    Turns are rendered as five tangent arcs whose radii step down into and
    back out of the core radius (3R, 1.5R, R, 1.5R, 3R), approximating a
    steering ramp; an instantaneous curvature jump would be unphysical.
    """
    pt = (float(start[0]), float(start[1]))
    hd = float(heading)
    segs: list[Segment] = []
    for op in ops:
        if op[0] == "s":
            length = float(op[1])
            end = (pt[0] + length * math.cos(hd), pt[1] + length * math.sin(hd))
            segs.append(_straight(pt, end))
            pt = end
        elif op[0] == "t":
            angle = float(op[1])
            radius = float(op[2])
            fracs = (0.1, 0.15, 0.5, 0.15, 0.1)
            radii = (3 * radius, 1.5 * radius, radius, 1.5 * radius, 3 * radius)
            for frac, r in zip(fracs, radii):
                dpsi = angle * frac
                ccw = dpsi > 0
                side = 1.0 if ccw else -1.0
                center = (pt[0] - side * r * math.sin(hd),
                          pt[1] + side * r * math.cos(hd))
                a0 = math.atan2(pt[1] - center[1], pt[0] - center[0])
                a1 = a0 + dpsi
                end = (center[0] + r * math.cos(a1), center[1] + r * math.sin(a1))
                segs.append(_arc(pt, end, center, ccw))
                pt = end
                hd += dpsi
        else:
            raise InvalidSpecError(f"unknown route op {op[0]!r}")
    return Path(tuple(segs))


def _turn_routes() -> tuple[Path, Path, Path]:
    """The three turning routes through the junction, with steering ramps."""
    return (
        # eastbound -> southbound right turn (core R = 8)
        _route((-80.0, -2.0), 0.0,
               [("s", 70.0), ("t", math.radians(-90.0), 8.0), ("s", 64.0)]),
        # eastbound -> northbound left turn (core R = 12)
        _route((-80.0, -2.0), 0.0,
               [("s", 66.0), ("t", math.radians(90.0), 12.0), ("s", 60.0)]),
        # northbound -> eastbound right turn (core R = 8)
        _route((2.0, -80.0), math.pi / 2,
               [("s", 70.0), ("t", math.radians(-90.0), 8.0), ("s", 64.0)]),
    )


def _intersection_roads() -> tuple[RoadSpec, ...]:
    """Crossroad at the origin with right-hand lanes and turn connectors."""
    lane = 2.5
    paths = [
        Path((_straight((-80, -2), (80, -2)),)),          # eastbound
        Path((_straight((80, 2), (-80, 2)),)),            # westbound
        Path((_straight((2, -80), (2, 80)),)),            # northbound
        Path((_straight((-2, 80), (-2, -80)),)),          # southbound
        *_turn_routes(),
    ]
    return tuple(RoadSpec(p, lane) for p in paths)


def _intersection_paths() -> list[Path]:
    return [
        Path((_straight((-80, -2), (80, -2)),)),
        Path((_straight((80, 2), (-80, 2)),)),
        Path((_straight((2, -80), (2, 80)),)),
        Path((_straight((-2, 80), (-2, -80)),)),
        *_turn_routes(),
    ]


def intersection_spec(n_vehicles: int = 64, seed: int = 0,
                      spacing: float = 3.0,
                      points_per_second: float = 2500.0,
                      noise_position_std: float = 0.3,
                      pitch_deg: float = 3.0) -> ScenarioSpec:
    """Crossroad scenario with staggered traffic on straights and turns."""
    paths = _intersection_paths()
    speeds = [9.0, 11.0, 10.0, 8.5, 8.0, 9.5, 10.5]
    vehicles = []
    for i in range(n_vehicles):
        path = paths[i % len(paths)]
        vehicles.append(VehicleSpec(path, speed=speeds[i % len(speeds)],
                                    start_time=i * spacing))
    sensor = Transform3.from_euler(
        x=40.0, y=-30.0, z=5.0,
        yaw=math.atan2(30.0, -40.0), pitch=math.radians(pitch_deg))
    return ScenarioSpec(_intersection_roads(), tuple(vehicles), sensor,
                        points_per_second=points_per_second,
                        noise_position_std=noise_position_std, seed=seed)


def sparse_intersection_spec(n_vehicles: int = 20, seed: int = 11,
                             spacing: float = 6.0,
                             points_per_second: float = 2500.0,
                             noise_position_std: float = 0.3,
                             pitch_deg: float = 3.0) -> ScenarioSpec:
    """Crossroad with lighter traffic for tracking evaluation.

    Vehicles cycle only the six routes whose course stays mostly inside
    the sensor field of view, so every trajectory is observed long enough
    to be judged; the wider spacing avoids simultaneous junction crossings
    that belong in the dense ``intersection`` scenario.
    """
    paths = _intersection_paths()[:6]
    speeds = [9.0, 11.0, 10.0, 8.5, 8.0, 9.5, 10.5]
    vehicles = [VehicleSpec(paths[i % len(paths)], speed=speeds[i % len(speeds)],
                            start_time=i * spacing)
                for i in range(n_vehicles)]
    sensor = Transform3.from_euler(
        x=40.0, y=-30.0, z=5.0,
        yaw=math.atan2(30.0, -40.0), pitch=math.radians(pitch_deg))
    return ScenarioSpec(_intersection_roads(), tuple(vehicles), sensor,
                        points_per_second=points_per_second,
                        noise_position_std=noise_position_std, seed=seed)


def two_right_turns_spec(seed: int = 0) -> ScenarioSpec:
    """Single vehicle that turns right twice; exercises turn labeling."""
    path = _route((-60.0, -2.0), 0.0,
                  [("s", 50.0), ("t", math.radians(-90.0), 8.0),
                   ("s", 24.0), ("t", math.radians(-90.0), 8.0), ("s", 45.0)])
    roads = (RoadSpec(path, 2.5),)
    sensor = Transform3.from_euler(x=30.0, y=-25.0, z=5.0,
                                   yaw=math.pi, pitch=math.radians(2.0))
    vehicles = (VehicleSpec(path, speed=9.0, start_time=0.0),)
    return ScenarioSpec(roads, vehicles, sensor, points_per_second=2500.0, seed=seed)


BUNDLED_SCENARIOS = {
    "intersection": intersection_spec,
    "sparse-intersection": sparse_intersection_spec,
    "two-right-turns": two_right_turns_spec,
}


# ---------------------------------------------------------------------------
# Spec / truth (de)serialization
# ---------------------------------------------------------------------------

def _segment_to_dict(seg: Segment) -> dict:
    doc = {"kind": seg.kind, "start": list(seg.start), "end": list(seg.end)}
    if seg.kind == "arc":
        doc["center"] = list(seg.center)
        doc["ccw"] = seg.ccw
    return doc


def _segment_from_dict(doc: dict) -> Segment:
    return Segment(doc["kind"], tuple(doc["start"]), tuple(doc["end"]),
                   tuple(doc["center"]) if "center" in doc else None,
                   bool(doc.get("ccw", True)))


def spec_to_dict(spec: ScenarioSpec) -> dict:
    return {
        "roads": [{"width": r.width,
                   "segments": [_segment_to_dict(s) for s in r.path.segments]}
                  for r in spec.roads],
        "vehicles": [{"speed": v.speed, "start_time": v.start_time,
                      "length": v.length, "width": v.width,
                      "segments": [_segment_to_dict(s) for s in v.path.segments]}
                     for v in spec.vehicles],
        "sensor_pose": {"rotation": spec.sensor_pose.rotation.tolist(),
                        "translation": spec.sensor_pose.translation.tolist()},
        "fov_horizontal_deg": spec.fov_horizontal_deg,
        "fov_vertical_deg": spec.fov_vertical_deg,
        "max_range": spec.max_range,
        "points_per_second": spec.points_per_second,
        "frame_dt": spec.frame_dt,
        "noise_position_std": spec.noise_position_std,
        "noise_range_rate_std": spec.noise_range_rate_std,
        "seed": spec.seed,
    }


def spec_from_dict(doc: dict) -> ScenarioSpec:
    roads = tuple(
        RoadSpec(Path(tuple(_segment_from_dict(s) for s in r["segments"])),
                 float(r.get("width", 4.0)))
        for r in doc["roads"])
    vehicles = tuple(
        VehicleSpec(Path(tuple(_segment_from_dict(s) for s in v["segments"])),
                    float(v.get("speed", 10.0)), float(v.get("start_time", 0.0)),
                    float(v.get("length", 4.5)), float(v.get("width", 1.8)))
        for v in doc["vehicles"])
    pose_doc = doc["sensor_pose"]
    pose = Transform3(np.array(pose_doc["rotation"]), np.array(pose_doc["translation"]))
    return ScenarioSpec(
        roads, vehicles, pose,
        fov_horizontal_deg=float(doc.get("fov_horizontal_deg", 120.0)),
        fov_vertical_deg=float(doc.get("fov_vertical_deg", 30.0)),
        max_range=float(doc.get("max_range", 150.0)),
        points_per_second=float(doc.get("points_per_second", 10000.0)),
        frame_dt=float(doc.get("frame_dt", 0.1)),
        noise_position_std=float(doc.get("noise_position_std", 0.3)),
        noise_range_rate_std=float(doc.get("noise_range_rate_std", 0.1)),
        seed=int(doc.get("seed", 0)),
    )


def save_spec(path, spec: ScenarioSpec) -> None:
    with open(path, "w") as fh:
        json.dump(spec_to_dict(spec), fh, sort_keys=True, indent=1)


def load_spec(path) -> ScenarioSpec:
    with open(path) as fh:
        return spec_from_dict(json.load(fh))


def save_truth(path, truth: ScenarioTruth) -> None:
    doc = {
        "sensor_pose": {"rotation": truth.sensor_pose.rotation.tolist(),
                        "translation": truth.sensor_pose.translation.tolist()},
        "vehicles": [{"id": v.vehicle_id, "length": v.length, "width": v.width,
                      "history": v.history.tolist()}
                     for v in truth.vehicles],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True)


def load_truth_pose(path) -> Transform3:
    with open(path) as fh:
        doc = json.load(fh)
    pd = doc["sensor_pose"]
    return Transform3(np.array(pd["rotation"]), np.array(pd["translation"]))


def load_truth_vehicles(path) -> list[VehicleTruth]:
    with open(path) as fh:
        doc = json.load(fh)
    return [VehicleTruth(int(v["id"]), float(v["length"]), float(v["width"]),
                         np.array(v["history"]))
            for v in doc["vehicles"]]
