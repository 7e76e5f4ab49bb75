"""Rigid-transform algebra, point-cloud containers and basic cloud filters.

Conventions: the global frame is UTM east-north-up, all distances in meters,
angles in radians. 2D poses live in SE(2) with yaw normalized to (-pi, pi];
3D transforms are (R, t) with R in SO(3).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np
from scipy.spatial import cKDTree

from .errors import DegenerateGeometryError, InvalidParameterError


class BehaviorLabel(IntEnum):
    """Driving-behavior category attached to road and trajectory points."""

    LEFT_TURN = 0
    RIGHT_TURN = 1
    STRAIGHT = 2

    @property
    def char(self) -> str:
        return _LABEL_TO_CHAR[self]

    @classmethod
    def from_char(cls, c: str) -> "BehaviorLabel":
        try:
            return _CHAR_TO_LABEL[c]
        except KeyError:
            raise InvalidParameterError(f"unknown behavior label {c!r}") from None


_LABEL_TO_CHAR = {
    BehaviorLabel.LEFT_TURN: "L",
    BehaviorLabel.RIGHT_TURN: "R",
    BehaviorLabel.STRAIGHT: "S",
}
_CHAR_TO_LABEL = {v: k for k, v in _LABEL_TO_CHAR.items()}


def wrap_angle(a: float) -> float:
    """Normalize an angle into (-pi, pi]."""
    return math.pi - (math.pi - a) % (2.0 * math.pi)


@dataclass(frozen=True)
class Pose2:
    """Rigid transform in SE(2): rotation by ``yaw`` then translation (x, y)."""

    x: float = 0.0
    y: float = 0.0
    yaw: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "yaw", wrap_angle(float(self.yaw)))

    @classmethod
    def identity(cls) -> "Pose2":
        return cls(0.0, 0.0, 0.0)

    def compose(self, other: "Pose2") -> "Pose2":
        """Return self * other (apply ``other`` first, then ``self``)."""
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return Pose2(
            self.x + c * other.x - s * other.y,
            self.y + s * other.x + c * other.y,
            self.yaw + other.yaw,
        )

    def inverse(self) -> "Pose2":
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return Pose2(-(c * self.x + s * self.y), -(-s * self.x + c * self.y), -self.yaw)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform an (N, 2) array of points."""
        pts = np.asarray(points, dtype=np.float64)
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        rot = np.array([[c, -s], [s, c]])
        return pts @ rot.T + np.array([self.x, self.y])

    def rotation_matrix(self) -> np.ndarray:
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return np.array([[c, -s], [s, c]])


def _check_rotation(rot: np.ndarray) -> np.ndarray:
    rot = np.asarray(rot, dtype=np.float64)
    if rot.shape != (3, 3):
        raise InvalidParameterError(f"rotation must be 3x3, got {rot.shape}")
    if not np.allclose(rot.T @ rot, np.eye(3), atol=1e-9):
        raise InvalidParameterError("rotation matrix is not orthonormal")
    if abs(np.linalg.det(rot) - 1.0) > 1e-9:
        raise InvalidParameterError("rotation matrix determinant is not +1")
    return rot


@dataclass(frozen=True)
class Transform3:
    """Rigid transform in SE(3) as a rotation matrix and translation vector."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        rot = _check_rotation(self.rotation)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        rot.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "Transform3":
        return cls()

    @classmethod
    def from_matrix(cls, mat: np.ndarray) -> "Transform3":
        mat = np.asarray(mat, dtype=np.float64)
        return cls(mat[:3, :3], mat[:3, 3])

    @classmethod
    def from_euler(cls, x: float = 0.0, y: float = 0.0, z: float = 0.0,
                   roll: float = 0.0, pitch: float = 0.0, yaw: float = 0.0) -> "Transform3":
        """Build from translation and ZYX (yaw-pitch-roll) Euler angles."""
        return cls(rot_z(yaw) @ rot_y(pitch) @ rot_x(roll), np.array([x, y, z]))

    def matrix(self) -> np.ndarray:
        mat = np.eye(4)
        mat[:3, :3] = self.rotation
        mat[:3, 3] = self.translation
        return mat

    def compose(self, other: "Transform3") -> "Transform3":
        return Transform3(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def inverse(self) -> "Transform3":
        return Transform3(self.rotation.T, -self.rotation.T @ self.translation)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform an (N, 3) array of points."""
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation.T + self.translation

    @property
    def yaw(self) -> float:
        """Heading of the transformed x-axis projected on the ground plane."""
        return math.atan2(self.rotation[1, 0], self.rotation[0, 0])


def rot_x(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]], dtype=np.float64)


def rot_y(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]], dtype=np.float64)


def rot_z(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]], dtype=np.float64)


def pose2_to_transform3(p: Pose2) -> Transform3:
    """Lift an SE(2) pose to SE(3): rotation about z, zero z-translation."""
    return Transform3(rot_z(p.yaw), np.array([p.x, p.y, 0.0]))


def compose_final(t_fine: Pose2, t_coarse: Transform3) -> Transform3:
    """Compose the fine 2D refinement with the coarse 3D estimate."""
    return pose2_to_transform3(t_fine).compose(t_coarse)


# ---------------------------------------------------------------------------
# Cloud containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PointCloud:
    """Ordered set of 3D points, optionally carrying per-point range rate."""

    xyz: np.ndarray
    range_rate: np.ndarray | None = None

    def __post_init__(self):
        xyz = np.asarray(self.xyz, dtype=np.float64).reshape(-1, 3)
        xyz.setflags(write=False)
        object.__setattr__(self, "xyz", xyz)
        if self.range_rate is not None:
            rr = np.asarray(self.range_rate, dtype=np.float64).reshape(-1)
            if rr.shape[0] != xyz.shape[0]:
                raise InvalidParameterError("range_rate length must match point count")
            rr.setflags(write=False)
            object.__setattr__(self, "range_rate", rr)

    def __len__(self) -> int:
        return self.xyz.shape[0]

    @classmethod
    def empty(cls) -> "PointCloud":
        return cls(np.zeros((0, 3)))

    def select(self, mask_or_idx) -> "PointCloud":
        rr = None if self.range_rate is None else self.range_rate[mask_or_idx]
        return PointCloud(self.xyz[mask_or_idx], rr)

    @staticmethod
    def concatenate(clouds: list["PointCloud"]) -> "PointCloud":
        if not clouds:
            return PointCloud.empty()
        xyz = np.concatenate([c.xyz for c in clouds])
        if all(c.range_rate is not None for c in clouds):
            rr = np.concatenate([c.range_rate for c in clouds])
        else:
            rr = None
        return PointCloud(xyz, rr)


@dataclass(frozen=True)
class LabeledCloud:
    """Ordered set of points, each carrying a behavior label."""

    xyz: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        xyz = np.asarray(self.xyz, dtype=np.float64).reshape(-1, 3)
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if labels.shape[0] != xyz.shape[0]:
            raise InvalidParameterError("labels length must match point count")
        xyz.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "xyz", xyz)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.xyz.shape[0]

    @classmethod
    def empty(cls) -> "LabeledCloud":
        return cls(np.zeros((0, 3)), np.zeros(0, dtype=np.int64))

    def select(self, mask_or_idx) -> "LabeledCloud":
        return LabeledCloud(self.xyz[mask_or_idx], self.labels[mask_or_idx])

    @staticmethod
    def concatenate(clouds: list["LabeledCloud"]) -> "LabeledCloud":
        if not clouds:
            return LabeledCloud.empty()
        return LabeledCloud(
            np.concatenate([c.xyz for c in clouds]),
            np.concatenate([c.labels for c in clouds]),
        )


def transform_cloud(t: Transform3 | Pose2, cloud: PointCloud | LabeledCloud):
    """Apply a rigid transform to every point; attributes pass through."""
    if isinstance(t, Pose2):
        t = pose2_to_transform3(t)
    xyz = t.apply(cloud.xyz)
    if isinstance(cloud, LabeledCloud):
        return LabeledCloud(xyz, cloud.labels)
    return PointCloud(xyz, cloud.range_rate)


# ---------------------------------------------------------------------------
# Downsampling and outlier filtering
# ---------------------------------------------------------------------------

def _voxel_groups(xyz: np.ndarray, voxel: float):
    """Group point indices by voxel key, in first-occurrence order."""
    keys = np.floor(xyz / voxel).astype(np.int64)
    _, first_idx, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    # np.unique sorts keys; re-rank groups by first occurrence for determinism
    order = np.argsort(first_idx, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    return rank[inverse], order.size


def voxel_downsample(cloud: PointCloud | LabeledCloud, voxel: float):
    """Replace each occupied voxel by the centroid of its points.

    For labeled clouds the output label is the voxel's majority label;
    ties fall back to STRAIGHT. Range rate is dropped (no later stage
    reads it after the dynamic-point filter).
    """
    if voxel <= 0:
        raise InvalidParameterError(f"voxel size must be positive, got {voxel}")
    if len(cloud) == 0:
        return cloud
    group, n_groups = _voxel_groups(cloud.xyz, voxel)
    counts = np.bincount(group, minlength=n_groups).astype(np.float64)
    centroids = np.zeros((n_groups, 3))
    for axis in range(3):
        centroids[:, axis] = np.bincount(group, weights=cloud.xyz[:, axis],
                                         minlength=n_groups) / counts
    if isinstance(cloud, LabeledCloud):
        label_counts = np.zeros((n_groups, len(BehaviorLabel)), dtype=np.int64)
        for lab in BehaviorLabel:
            label_counts[:, lab] = np.bincount(group, weights=(cloud.labels == lab),
                                               minlength=n_groups).astype(np.int64)
        best = label_counts.argmax(axis=1)
        tie = (label_counts == label_counts.max(axis=1, keepdims=True)).sum(axis=1) > 1
        best[tie] = BehaviorLabel.STRAIGHT
        return LabeledCloud(centroids, best)
    return PointCloud(centroids)


def dbscan_filter(cloud: PointCloud, eps: float, min_pts: int) -> PointCloud:
    """Keep only points that belong to a density cluster (noise removed)."""
    if eps <= 0:
        raise InvalidParameterError(f"eps must be positive, got {eps}")
    if min_pts < 1:
        raise InvalidParameterError(f"min_pts must be >= 1, got {min_pts}")
    n = len(cloud)
    if n == 0:
        return cloud
    tree = cKDTree(cloud.xyz)
    neighbors = tree.query_ball_point(cloud.xyz, r=eps)
    core = np.array([len(nb) >= min_pts for nb in neighbors])
    in_cluster = np.zeros(n, dtype=bool)
    visited = np.zeros(n, dtype=bool)
    for seed in range(n):
        if visited[seed] or not core[seed]:
            continue
        # expand one cluster from this core point
        stack = [seed]
        visited[seed] = True
        while stack:
            i = stack.pop()
            in_cluster[i] = True
            if not core[i]:
                continue
            for j in neighbors[i]:
                in_cluster[j] = True
                if not visited[j] and core[j]:
                    visited[j] = True
                    stack.append(j)
    return cloud.select(in_cluster)


# ---------------------------------------------------------------------------
# Weighted rigid alignment
# ---------------------------------------------------------------------------

def align_rigid_2d(source: np.ndarray, target: np.ndarray,
                   weights: np.ndarray | None = None) -> Pose2:
    """Closed-form weighted least-squares SE(2) alignment of paired 2D points.

    Returns the pose T minimizing sum_i w_i * ||T(source_i) - target_i||^2.
    """
    src = np.asarray(source, dtype=np.float64).reshape(-1, 2)
    dst = np.asarray(target, dtype=np.float64).reshape(-1, 2)
    if src.shape != dst.shape or src.shape[0] < 2:
        raise InvalidParameterError("need >= 2 source/target pairs of equal length")
    w = np.ones(src.shape[0]) if weights is None else np.asarray(weights, dtype=np.float64)
    if np.any(w < 0) or w.sum() <= 0:
        raise InvalidParameterError("weights must be nonnegative and not all zero")
    wsum = w.sum()
    mu_s = (w[:, None] * src).sum(axis=0) / wsum
    mu_t = (w[:, None] * dst).sum(axis=0) / wsum
    ds = src - mu_s
    dt = dst - mu_t
    if np.max(np.abs(ds)) < 1e-12:
        raise DegenerateGeometryError("all source points coincide")
    sxx = float((w * (ds[:, 0] * dt[:, 0] + ds[:, 1] * dt[:, 1])).sum())
    sxy = float((w * (ds[:, 0] * dt[:, 1] - ds[:, 1] * dt[:, 0])).sum())
    yaw = math.atan2(sxy, sxx)
    c, s = math.cos(yaw), math.sin(yaw)
    tx = mu_t[0] - (c * mu_s[0] - s * mu_s[1])
    ty = mu_t[1] - (s * mu_s[0] + c * mu_s[1])
    return Pose2(tx, ty, yaw)


def align_rigid_3d(source: np.ndarray, target: np.ndarray,
                   weights: np.ndarray | None = None) -> Transform3:
    """Weighted Kabsch solve for the SE(3) transform mapping source to target."""
    src = np.asarray(source, dtype=np.float64).reshape(-1, 3)
    dst = np.asarray(target, dtype=np.float64).reshape(-1, 3)
    if src.shape != dst.shape or src.shape[0] < 3:
        raise InvalidParameterError("need >= 3 source/target pairs of equal length")
    w = np.ones(src.shape[0]) if weights is None else np.asarray(weights, dtype=np.float64)
    if np.any(w < 0) or w.sum() <= 0:
        raise InvalidParameterError("weights must be nonnegative and not all zero")
    wsum = w.sum()
    mu_s = (w[:, None] * src).sum(axis=0) / wsum
    mu_t = (w[:, None] * dst).sum(axis=0) / wsum
    ds = src - mu_s
    dt = dst - mu_t
    if np.max(np.abs(ds)) < 1e-12:
        raise DegenerateGeometryError("all source points coincide")
    h = (w[:, None] * ds).T @ dt
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    rot = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    return Transform3(rot, mu_t - rot @ mu_s)


# ---------------------------------------------------------------------------
# CSV serialization
# ---------------------------------------------------------------------------

def save_cloud(path, cloud: PointCloud) -> None:
    """Write a radar cloud as CSV with header x,y,z,range_rate."""
    rr = cloud.range_rate
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "z", "range_rate"])
        for i in range(len(cloud)):
            x, y, z = (float(v) for v in cloud.xyz[i])
            writer.writerow([repr(x), repr(y), repr(z),
                             repr(float(rr[i])) if rr is not None else "0.0"])


def load_cloud(path) -> PointCloud:
    data = np.genfromtxt(path, delimiter=",", names=True, dtype=np.float64)
    data = np.atleast_1d(data)
    if data.size == 0:
        return PointCloud.empty()
    xyz = np.column_stack([data["x"], data["y"], data["z"]])
    rr = data["range_rate"] if "range_rate" in (data.dtype.names or ()) else None
    return PointCloud(xyz, rr)


def save_labeled_cloud(path, cloud: LabeledCloud) -> None:
    """Write a labeled cloud as CSV with header x,y,z,label (L/R/S)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "z", "label"])
        for i in range(len(cloud)):
            x, y, z = (float(v) for v in cloud.xyz[i])
            writer.writerow([repr(x), repr(y), repr(z),
                             BehaviorLabel(int(cloud.labels[i])).char])


def load_labeled_cloud(path) -> LabeledCloud:
    xyz = []
    labels = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["x", "y", "z", "label"]:
            raise InvalidParameterError(f"{path}: expected header x,y,z,label")
        for row in reader:
            if not row:
                continue
            xyz.append([float(row[0]), float(row[1]), float(row[2])])
            labels.append(BehaviorLabel.from_char(row[3].strip()))
    if not xyz:
        return LabeledCloud.empty()
    return LabeledCloud(np.array(xyz), np.array(labels, dtype=np.int64))
