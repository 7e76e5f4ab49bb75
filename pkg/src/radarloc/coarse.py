"""Coarse sensor localization from accumulated dynamic radar points.

Points with a high radial-velocity magnitude are taken as returns from
moving vehicles; accumulated over many frames they trace the roads, and
point-to-point ICP against the road cloud yields a first SE(3) estimate
of the sensor pose.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial import cKDTree

from .errors import InvalidParameterError, NoOverlapError
from .geometry import (
    PointCloud,
    Transform3,
    align_rigid_3d,
    dbscan_filter,
    transform_cloud,
    voxel_downsample,
)

DEFAULT_RANGE_RATE_THRESHOLD = 1.0  # m/s
DEFAULT_COARSE_RANGES = (50.0, 25.0, 12.5, 6.25)  # m, chained ICP stages


@dataclass(frozen=True)
class RadarFrame:
    """One radar scan: a timestamp and its returns."""

    timestamp: float
    points: PointCloud


@dataclass(frozen=True)
class IcpParams:
    max_correspondence: float = 50.0
    max_iterations: int = 100
    rmse_epsilon: float = 1e-4

    def __post_init__(self):
        if self.max_correspondence <= 0 or self.max_iterations <= 0 or self.rmse_epsilon <= 0:
            raise InvalidParameterError("ICP parameters must all be positive")


@dataclass(frozen=True)
class IcpResult:
    transform: Transform3
    fitness: float
    rmse: float
    iterations: int
    rmse_trace: tuple[float, ...] = field(default=())


def extract_dynamic(frames, threshold: float = DEFAULT_RANGE_RATE_THRESHOLD) -> PointCloud:
    """Concatenate points whose |range rate| reaches the threshold.

    The absolute value is used deliberately: approaching traffic has
    negative range rate and must not be discarded.
    """
    if threshold < 0:
        raise InvalidParameterError(f"threshold must be >= 0, got {threshold}")
    kept = []
    for frame in frames:
        pts = frame.points
        if pts.range_rate is None:
            raise InvalidParameterError("dynamic extraction needs range-rate data")
        kept.append(pts.select(np.abs(pts.range_rate) >= threshold))
    return PointCloud.concatenate(kept)


def icp_point2point(source: PointCloud, target: PointCloud,
                    init: Transform3, params: IcpParams) -> IcpResult:
    """Classic point-to-point ICP with distance gating on correspondences.

    The reported RMSE is the trimmed objective: per-source-point nearest
    distance capped at the gating radius, so unmatched points contribute
    the gate instead of dropping out. Unlike the matched-pairs RMSE this
    quantity cannot increase when re-gating admits new correspondences,
    which makes the per-iteration trace non-increasing.
    """
    if len(source) == 0 or len(target) == 0:
        raise InvalidParameterError("ICP needs non-empty source and target clouds")
    tree = cKDTree(target.xyz)
    transform = init
    trace: list[float] = []
    prev_rmse = None
    fitness = 0.0
    iterations = 0
    for iterations in range(1, params.max_iterations + 1):
        moved = transform.apply(source.xyz)
        dist, idx = tree.query(moved, distance_upper_bound=params.max_correspondence)
        matched = np.isfinite(dist)
        n_matched = int(matched.sum())
        fitness = n_matched / len(source)
        if n_matched == 0:
            if iterations == 1:
                raise NoOverlapError(
                    "no correspondences within gating distance at init", fitness=0.0)
            break
        capped = np.minimum(dist, params.max_correspondence)
        rmse = float(np.sqrt(np.mean(capped ** 2)))
        trace.append(rmse)
        if prev_rmse is not None and abs(prev_rmse - rmse) < params.rmse_epsilon:
            break
        prev_rmse = rmse
        delta = align_rigid_3d(moved[matched], target.xyz[idx[matched]])
        transform = delta.compose(transform)
    return IcpResult(transform, fitness, trace[-1] if trace else float("inf"),
                     iterations, tuple(trace))


@dataclass(frozen=True)
class CoarseParams:
    range_rate_threshold: float = DEFAULT_RANGE_RATE_THRESHOLD
    voxel: float = 0.5
    dbscan_eps: float = 2.0
    dbscan_min_pts: int = 5
    trim_bounds: tuple[float, float, float, float] | None = None  # xmin,xmax,ymin,ymax in sensor frame
    icp_ranges: tuple[float, ...] = DEFAULT_COARSE_RANGES
    max_iterations: int = 100
    rmse_epsilon: float = 1e-4


def coarse_localize(frames, road_cloud: PointCloud, init: Transform3,
                    params: CoarseParams = CoarseParams()) -> tuple[Transform3, IcpResult]:
    """Full coarse chain: extract, clean, then ICP at decreasing gating ranges."""
    dynamic = extract_dynamic(frames, params.range_rate_threshold)
    if len(dynamic) == 0:
        raise NoOverlapError("no moving points above the range-rate threshold")
    dynamic = voxel_downsample(dynamic, params.voxel)
    dynamic = dbscan_filter(dynamic, params.dbscan_eps, params.dbscan_min_pts)
    if params.trim_bounds is not None:
        xmin, xmax, ymin, ymax = params.trim_bounds
        mask = ((dynamic.xyz[:, 0] >= xmin) & (dynamic.xyz[:, 0] <= xmax)
                & (dynamic.xyz[:, 1] >= ymin) & (dynamic.xyz[:, 1] <= ymax))
        dynamic = dynamic.select(mask)
    if len(dynamic) == 0:
        raise NoOverlapError("coarse cleaning removed every dynamic point")
    transform = init
    result = None
    for max_corr in params.icp_ranges:
        icp_params = IcpParams(max_corr, params.max_iterations, params.rmse_epsilon)
        result = icp_point2point(dynamic, road_cloud, transform, icp_params)
        transform = result.transform
    return transform, replace(result, transform=transform)


def flatten_to_plane(cloud: PointCloud, t_coarse: Transform3) -> PointCloud:
    """Move a sensor-frame cloud into the global frame and drop its height."""
    moved = transform_cloud(t_coarse, cloud)
    xyz = moved.xyz.copy()
    xyz[:, 2] = 0.0
    return PointCloud(xyz, moved.range_rate)


# ---------------------------------------------------------------------------
# Radar recording CSV I/O: rows sorted by timestamp, frames share a timestamp
# ---------------------------------------------------------------------------

def save_frames(path, frames) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("timestamp,x,y,z,range_rate\n")
        for frame in frames:
            pts = frame.points
            rr = pts.range_rate
            for i in range(len(pts)):
                x, y, z = (float(v) for v in pts.xyz[i])
                fh.write(f"{float(frame.timestamp)!r},{x!r},{y!r},{z!r},"
                         f"{float(rr[i])!r}\n" if rr is not None
                         else f"{float(frame.timestamp)!r},{x!r},{y!r},{z!r},0.0\n")


def load_frames(path) -> list[RadarFrame]:
    data = np.genfromtxt(path, delimiter=",", names=True, dtype=np.float64)
    data = np.atleast_1d(data)
    if data.size == 0:
        return []
    ts = data["timestamp"]
    if np.any(np.diff(ts) < 0):
        raise InvalidParameterError(f"{path}: rows must be sorted by timestamp")
    frames = []
    boundaries = np.flatnonzero(np.diff(ts) > 0) + 1
    starts = np.concatenate([[0], boundaries])
    ends = np.concatenate([boundaries, [ts.size]])
    for a, b in zip(starts, ends):
        xyz = np.column_stack([data["x"][a:b], data["y"][a:b], data["z"][a:b]])
        frames.append(RadarFrame(float(ts[a]), PointCloud(xyz, data["range_rate"][a:b])))
    return frames
