"""Lanelet map handling: curvature labeling and cropping of the road cloud.

A lanelet is a road segment bounded by a left and a right polyline; the
area between the bounds is road surface. Each lanelet gets a driving
behavior label from the Menger curvature of its left bound.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DegenerateGeometryError, InvalidParameterError
from .geometry import BehaviorLabel, LabeledCloud, PointCloud

DEFAULT_GAMMA = 0.01  # curvature threshold separating turns from straight, 1/m


class Orientation(Enum):
    COUNTER_CLOCKWISE = "ccw"
    CLOCKWISE = "cw"
    COLLINEAR = "collinear"


@dataclass(frozen=True)
class Lanelet:
    id: int
    left_bound: np.ndarray   # (N, 2) polyline, N >= 2
    right_bound: np.ndarray  # (M, 2) polyline, M >= 2

    def __post_init__(self):
        left = np.asarray(self.left_bound, dtype=np.float64).reshape(-1, 2)
        right = np.asarray(self.right_bound, dtype=np.float64).reshape(-1, 2)
        if left.shape[0] < 2 or right.shape[0] < 2:
            raise InvalidParameterError("lanelet bounds need >= 2 points each")
        left.setflags(write=False)
        right.setflags(write=False)
        object.__setattr__(self, "left_bound", left)
        object.__setattr__(self, "right_bound", right)

    def polygon(self) -> np.ndarray:
        """Closed boundary: left bound followed by the reversed right bound."""
        return np.concatenate([self.left_bound, self.right_bound[::-1]])


@dataclass(frozen=True)
class LaneletMap:
    lanelets: tuple[Lanelet, ...]
    utm_zone: str = "UTM32N"

    def __post_init__(self):
        ids = [l.id for l in self.lanelets]
        if len(ids) != len(set(ids)):
            raise InvalidParameterError("lanelet ids must be unique")
        object.__setattr__(self, "lanelets", tuple(self.lanelets))


def menger_curvature(p_st, p_md, p_ed) -> float:
    """Curvature of the circle through three points: 4*Area / product of sides."""
    a = np.asarray(p_st, dtype=np.float64)
    b = np.asarray(p_md, dtype=np.float64)
    c = np.asarray(p_ed, dtype=np.float64)
    ab = np.linalg.norm(a - b)
    bc = np.linalg.norm(b - c)
    ca = np.linalg.norm(c - a)
    if ab == 0 or bc == 0 or ca == 0:
        raise DegenerateGeometryError("coincident points have no curvature")
    cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    area = 0.5 * abs(cross)
    return 4.0 * area / (ab * bc * ca)


def polyline_orientation(p_st, p_md, p_ed) -> Orientation:
    """Turn direction of the three points by the sign of the 2D cross product."""
    a = np.asarray(p_st, dtype=np.float64)
    b = np.asarray(p_md, dtype=np.float64)
    c = np.asarray(p_ed, dtype=np.float64)
    cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    scale = max(np.abs(np.concatenate([b - a, c - a])).max(), 1.0)
    if abs(cross) <= 1e-12 * scale * scale:
        return Orientation.COLLINEAR
    return Orientation.COUNTER_CLOCKWISE if cross > 0 else Orientation.CLOCKWISE


def label_lanelet(lanelet: Lanelet, gamma: float = DEFAULT_GAMMA) -> BehaviorLabel:
    """Classify a lanelet by the curvature of its left bound.

    Uses the bound's start, middle (index n//2) and end vertices; curvature
    above ``gamma`` makes it a turn, the orientation decides the side.
    """
    if gamma <= 0:
        raise InvalidParameterError(f"gamma must be positive, got {gamma}")
    bound = lanelet.left_bound
    if bound.shape[0] < 3:
        raise InvalidParameterError("left bound needs >= 3 vertices for labeling")
    p_st, p_md, p_ed = bound[0], bound[bound.shape[0] // 2], bound[-1]
    try:
        c = menger_curvature(p_st, p_md, p_ed)
    except DegenerateGeometryError:
        c = 0.0
    if c <= gamma:
        return BehaviorLabel.STRAIGHT
    orient = polyline_orientation(p_st, p_md, p_ed)
    if orient is Orientation.COUNTER_CLOCKWISE:
        return BehaviorLabel.LEFT_TURN
    if orient is Orientation.CLOCKWISE:
        return BehaviorLabel.RIGHT_TURN
    return BehaviorLabel.STRAIGHT


def points_in_polygon(points: np.ndarray, polygon: np.ndarray) -> np.ndarray:
    """Even-odd ray-casting containment test; boundary points count as inside."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    poly = np.asarray(polygon, dtype=np.float64).reshape(-1, 2)
    n = poly.shape[0]
    inside = np.zeros(pts.shape[0], dtype=bool)
    on_edge = np.zeros(pts.shape[0], dtype=bool)
    x, y = pts[:, 0], pts[:, 1]
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        # boundary check: point on segment within a small tolerance
        ex, ey = x2 - x1, y2 - y1
        seg_len2 = ex * ex + ey * ey
        if seg_len2 > 0:
            t = np.clip(((x - x1) * ex + (y - y1) * ey) / seg_len2, 0.0, 1.0)
            dist2 = (x - (x1 + t * ex)) ** 2 + (y - (y1 + t * ey)) ** 2
            on_edge |= dist2 <= 1e-18
        crosses = ((y1 > y) != (y2 > y))
        if not np.any(crosses):
            continue
        with np.errstate(divide="ignore", invalid="ignore"):
            x_cross = x1 + (y - y1) * ex / (y2 - y1)
        inside ^= crosses & (x < x_cross)
    return inside | on_edge


def crop_als_by_lanelets(als: PointCloud, lanelet_map: LaneletMap,
                         gamma: float = DEFAULT_GAMMA) -> LabeledCloud:
    """Keep the ALS points inside some lanelet, labeled by that lanelet.

    Turn lanelets claim overlap areas first: at junctions the straight
    lanes cross the turn connectors, and assigning the shared surface to
    the (much larger) straight lanes would leave the turn classes nearly
    empty. Within the same class the lowest lanelet id wins.
    """
    if not lanelet_map.lanelets:
        raise InvalidParameterError("lanelet map is empty")
    n = len(als)
    assigned = np.full(n, -1, dtype=np.int64)
    pts2d = als.xyz[:, :2]
    labeled = [(label_lanelet(l, gamma), l) for l in lanelet_map.lanelets]
    ordered = [l for _, l in sorted(
        labeled, key=lambda e: (e[0] is BehaviorLabel.STRAIGHT, e[1].id))]
    for lanelet in ordered:
        unclaimed = assigned < 0
        if not np.any(unclaimed):
            break
        poly = lanelet.polygon()
        # cheap bounding-box prefilter before the exact test
        lo = poly.min(axis=0) - 1e-9
        hi = poly.max(axis=0) + 1e-9
        cand = unclaimed & np.all((pts2d >= lo) & (pts2d <= hi), axis=1)
        if not np.any(cand):
            continue
        hit = points_in_polygon(pts2d[cand], poly)
        idx = np.flatnonzero(cand)[hit]
        assigned[idx] = int(label_lanelet(lanelet, gamma))
    keep = assigned >= 0
    return LabeledCloud(als.xyz[keep], assigned[keep])


# ---------------------------------------------------------------------------
# JSON serialization (simplified map subset)
# ---------------------------------------------------------------------------

def save_map(path, lanelet_map: LaneletMap) -> None:
    doc = {
        "utm_zone": lanelet_map.utm_zone,
        "lanelets": [
            {
                "id": l.id,
                "left": l.left_bound.tolist(),
                "right": l.right_bound.tolist(),
            }
            for l in lanelet_map.lanelets
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True)


def load_map(path) -> LaneletMap:
    with open(path) as fh:
        doc = json.load(fh)
    lanelets = [
        Lanelet(int(entry["id"]), np.array(entry["left"]), np.array(entry["right"]))
        for entry in doc["lanelets"]
    ]
    return LaneletMap(tuple(lanelets), utm_zone=doc.get("utm_zone", "UTM32N"))
