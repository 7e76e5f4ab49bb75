"""Multi-vehicle GP-EOT tracker: candidate association, UKF updates,
track lifecycle, trajectory labeling and source-cloud export.

Each tracked vehicle carries a CTRA kinematic state plus a radial contour
estimate. Measurements are radar returns in the flattened global plane;
they are matched to visible reflection candidates on the predicted
contour and fused in a joint unscented update.
"""

from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import linear_sum_assignment

from ..errors import InvalidParameterError
from ..geometry import BehaviorLabel, LabeledCloud
from .contour import ContourState, GpParams, contour_predict, gp_regress
from .motion import (DEFAULT_PROCESS_NOISE_DIAG, KinematicState, ctra_predict,
                     ctra_transition, default_process_noise)
from .unscented import sigma_points, symmetrize

DEFAULT_ETA = 0.01     # angular-curvature threshold for trajectory labels, rad/m
DEFAULT_V_MIN = 0.5    # slower states are not labeled, m/s


class TrackStatus(Enum):
    TENTATIVE = "tentative"
    CONFIRMED = "confirmed"
    TERMINATED = "terminated"


@dataclass(frozen=True)
class BirthRegion:
    """Area where new tracks may appear, with the expected entry heading."""

    center: tuple[float, float]
    radius: float
    initial_heading: float

    def __post_init__(self):
        if self.radius <= 0:
            raise InvalidParameterError("birth region radius must be positive")


@dataclass(frozen=True)
class HistoryEntry:
    timestamp: float
    kinematic: KinematicState
    points: np.ndarray  # (M, 2) associated measurements


@dataclass
class Track:
    id: int
    kinematic: KinematicState
    contour: ContourState
    status: TrackStatus = TrackStatus.TENTATIVE
    history: list[HistoryEntry] = field(default_factory=list)
    consecutive_hits: int = 0
    consecutive_misses: int = 0
    ever_confirmed: bool = False

    @property
    def active(self) -> bool:
        return self.status is not TrackStatus.TERMINATED


@dataclass(frozen=True)
class TrackerConfig:
    gp: GpParams = GpParams()
    n_candidates: int = 0            # 0 -> 3 * n_theta
    gate_radius: float = 10.0        # point-to-track gating, m
    association_gate: float = 5.0    # measurement-to-candidate gate, m
    sensor_noise_std: float = 0.3    # m
    confirm_hits: int = 5
    terminate_misses: int = 25   # must outlast the tangential Doppler blind zone
    min_birth_points: int = 3
    max_measurements_per_update: int = 25
    initial_speed: float = 8.0       # m/s prior for newborn tracks
    range_rate_gate: float = 3.0     # max |measured - predicted| Doppler, m/s
    visibility_margin: float = 0.1   # min cosine between surface normal and sensor ray
    process_noise_diag: tuple[float, ...] = DEFAULT_PROCESS_NOISE_DIAG  # per second
    initial_position_std: float = 2.0
    initial_speed_std: float = 3.0
    initial_heading_std: float = math.radians(15.0)

    @property
    def candidate_count(self) -> int:
        return self.n_candidates if self.n_candidates > 0 else 3 * self.gp.n_theta


@functools.lru_cache(maxsize=16)
def _candidate_model(gp: GpParams, n_cand: int):
    """Body-frame candidate angles with their GP regression weights."""
    angles = 2.0 * math.pi * np.arange(n_cand) / n_cand
    weights, resid = gp_regress(angles, gp.basis_angles(), gp)
    weights = np.atleast_2d(weights)
    resid = np.atleast_1d(resid)
    return angles, weights, np.clip(resid, 0.0, None)


def generate_candidates(state: KinematicState, contour: ContourState,
                        sensor_xy, gp: GpParams, n_cand: int | None = None,
                        min_facing_cos: float = 0.0):
    """Reflection-spot candidates on the contour with visibility flags.

    A candidate is visible when its outward radial direction points toward
    the sensor side (the surface element faces the sensor). A positive
    ``min_facing_cos`` additionally discards grazing candidates near the
    silhouette, whose predicted spots sit far from any physical surface
    and would otherwise drag the center toward the sensor.
    """
    sensor = np.asarray(sensor_xy, dtype=np.float64)
    if np.allclose(sensor, state.center, atol=1e-9):
        raise InvalidParameterError("sensor coincides with the object center")
    n_cand = n_cand or 3 * gp.n_theta
    angles, weights, _ = _candidate_model(gp, n_cand)
    radii = weights @ contour.radii
    theta_g = angles + state.phi
    radial = np.column_stack([np.cos(theta_g), np.sin(theta_g)])
    positions = state.center + radii[:, None] * radial
    to_sensor = sensor - positions
    to_sensor = to_sensor / np.linalg.norm(to_sensor, axis=1, keepdims=True)
    visible = np.einsum("ij,ij->i", radial, to_sensor) > min_facing_cos
    return positions, angles, visible


def associate_hungarian(measurements: np.ndarray, candidates: np.ndarray,
                        gate: float = 5.0) -> list[tuple[int, int]]:
    """Min-cost one-to-one assignment between measurements and candidates.

    Rectangular problems leave the excess side unassigned; pairs farther
    apart than the gate are dropped after solving.
    """
    meas = np.asarray(measurements, dtype=np.float64).reshape(-1, 2)
    cand = np.asarray(candidates, dtype=np.float64).reshape(-1, 2)
    if meas.shape[0] == 0 or cand.shape[0] == 0:
        return []
    cost = np.linalg.norm(meas[:, None, :] - cand[None, :, :], axis=2)
    rows, cols = linear_sum_assignment(cost)
    return [(int(r), int(c)) for r, c in zip(rows, cols) if cost[r, c] <= gate]


def _joint_cov(kin_cov: np.ndarray, contour_cov: np.ndarray) -> np.ndarray:
    n_k = kin_cov.shape[0]
    n_c = contour_cov.shape[0]
    cov = np.zeros((n_k + n_c, n_k + n_c))
    cov[:n_k, :n_k] = kin_cov
    cov[n_k:, n_k:] = contour_cov
    return cov


def ukf_update(track: Track, measurements: np.ndarray, sensor_xy, dt: float,
               cfg: TrackerConfig) -> Track:
    """One predict + joint unscented update of a track.

    With no (associated) measurements the predicted state is returned.
    The contour enters the measurement model through the GP regression
    weights at each associated candidate angle.
    """
    if dt <= 0:
        raise InvalidParameterError(f"dt must be positive, got {dt}")
    gp = cfg.gp
    kin_pred = ctra_predict(track.kinematic, dt,
                            default_process_noise(dt, cfg.process_noise_diag))
    cont_pred = contour_predict(track.contour, dt, gp)
    predicted = Track(track.id, kin_pred, cont_pred, track.status,
                      track.history, track.consecutive_hits,
                      track.consecutive_misses, track.ever_confirmed)
    meas = np.asarray(measurements, dtype=np.float64).reshape(-1, 2)
    if meas.shape[0] == 0:
        return predicted
    positions, cand_angles, visible = generate_candidates(
        kin_pred, cont_pred, sensor_xy, gp, cfg.candidate_count,
        cfg.visibility_margin)
    vis_idx = np.flatnonzero(visible)
    if vis_idx.size == 0:
        return predicted
    pairs = associate_hungarian(meas, positions[vis_idx], cfg.association_gate)
    if not pairs:
        return predicted
    _, all_weights, all_resid = _candidate_model(gp, cfg.candidate_count)
    m_idx = np.array([p[0] for p in pairs])
    c_idx = vis_idx[[p[1] for p in pairs]]
    theta_b = cand_angles[c_idx]          # (m,)
    h_gp = all_weights[c_idx]             # (m, n_theta)
    resid_var = all_resid[c_idx]          # (m,)
    z = meas[m_idx].reshape(-1)           # (2m,)

    n_k = kin_pred.vector.size
    joint_mean = np.concatenate([kin_pred.vector, cont_pred.radii])
    joint_cov = _joint_cov(kin_pred.covariance, cont_pred.covariance)
    pts, wm, wc = sigma_points(joint_mean, joint_cov)
    wm = wm.astype(np.float64)
    wc = wc.astype(np.float64)

    centers = pts[:, 0:2]                           # (S, 2)
    phi = pts[:, 4]                                 # (S,)
    radii = pts[:, n_k:] @ h_gp.T                   # (S, m)
    theta_g = theta_b[None, :] + phi[:, None]       # (S, m)
    zx = centers[:, 0:1] + radii * np.cos(theta_g)
    zy = centers[:, 1:2] + radii * np.sin(theta_g)
    z_sigma = np.stack([zx, zy], axis=2).reshape(pts.shape[0], -1)  # (S, 2m)

    z_mean = wm @ z_sigma
    dz = z_sigma - z_mean
    dx = pts - joint_mean
    noise = np.repeat(cfg.sensor_noise_std ** 2 + resid_var, 2)
    s_mat = (wc[:, None] * dz).T @ dz + np.diag(noise)
    p_xz = (wc[:, None] * dx).T @ dz
    gain = np.linalg.solve(s_mat.T, p_xz.T).T
    upd_mean = joint_mean + gain @ (z - z_mean)
    upd_cov = symmetrize(joint_cov - gain @ s_mat @ gain.T)

    # CTRA is invariant under (v, a, phi) -> (-v, -a, phi + pi); pick the
    # v >= 0 representative so headings stay comparable across tracks
    kin_cov = symmetrize(upd_cov[:n_k, :n_k])
    if upd_mean[2] < 0.0:
        upd_mean[2] = -upd_mean[2]
        upd_mean[3] = -upd_mean[3]
        upd_mean[4] += math.pi
        kin_cov[2:4, :] *= -1.0
        kin_cov[:, 2:4] *= -1.0
    kin = KinematicState(upd_mean[:n_k], kin_cov)
    # a radial extent never goes negative; unchecked, the joint update can
    # trade heading error for a flipped contour and lose observability
    radii_new = np.clip(upd_mean[n_k:], 0.2 * gp.mean_radius, 1.25 * gp.mean_radius)
    contour = ContourState(radii_new, symmetrize(upd_cov[n_k:, n_k:]),
                           cont_pred.basis_angles)
    return Track(track.id, kin, contour, track.status, track.history,
                 track.consecutive_hits, track.consecutive_misses,
                 track.ever_confirmed)


def _subsample(points: np.ndarray, limit: int) -> np.ndarray:
    if points.shape[0] <= limit:
        return points
    idx = np.linspace(0, points.shape[0] - 1, limit).round().astype(int)
    return points[idx]


def _new_track(track_id: int, points: np.ndarray, region: BirthRegion,
               cfg: TrackerConfig) -> Track:
    centroid = points.mean(axis=0)
    vec = np.array([centroid[0], centroid[1], cfg.initial_speed, 0.0,
                    region.initial_heading, 0.0])
    cov = np.diag([cfg.initial_position_std ** 2, cfg.initial_position_std ** 2,
                   cfg.initial_speed_std ** 2, 0.5 ** 2,
                   cfg.initial_heading_std ** 2, 0.2 ** 2])
    return Track(track_id, KinematicState(vec, cov), ContourState.from_prior(cfg.gp))


def track_step(tracks: list[Track], points: np.ndarray, timestamp: float,
               dt: float, birth_regions, sensor_xy,
               cfg: TrackerConfig = TrackerConfig(),
               range_rates: np.ndarray | None = None) -> list[Track]:
    """Advance the tracker by one frame.

    Frame points are gated to the nearest predicted track center; leftover
    points near a birth region may spawn a tentative track. Tracks confirm
    after ``confirm_hits`` consecutive associated frames and terminate
    after ``terminate_misses`` consecutive empty ones. When ``range_rates``
    are given, births whose Doppler sign contradicts the region's entry
    heading are rejected (traffic merely crossing the region).
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    rr = None if range_rates is None else np.asarray(range_rates, dtype=np.float64).reshape(-1)
    active = [t for t in tracks if t.active]
    # gate points to the nearest predicted center
    assigned = np.full(pts.shape[0], -1, dtype=np.int64)
    if active and pts.shape[0] > 0:
        predicted = np.stack([
            ctra_transition(t.kinematic.vector, dt) for t in active])
        centers = predicted[:, :2]
        dists = np.linalg.norm(pts[:, None, :] - centers[None, :, :], axis=2)
        if rr is not None:
            # a point whose Doppler contradicts a track's predicted radial
            # velocity belongs to something else (e.g. head-on traffic)
            u = pts[:, None, :] - np.asarray(sensor_xy, dtype=np.float64)[None, None, :]
            u /= np.maximum(np.linalg.norm(u, axis=2, keepdims=True), 1e-9)
            vel = (predicted[:, 2] * np.stack(
                [np.cos(predicted[:, 4]), np.sin(predicted[:, 4])], axis=1).T).T
            expected = np.einsum("pkc,kc->pk", np.broadcast_to(
                u, (pts.shape[0], len(active), 2)), vel)
            # widen the gate while a track's speed is still uncertain
            speed_std = np.array([math.sqrt(max(t.kinematic.covariance[2, 2], 0.0))
                                  for t in active])
            gate_k = cfg.range_rate_gate + np.minimum(2.0 * speed_std, 1.5)
            dists = np.where(np.abs(rr[:, None] - expected) <= gate_k[None, :],
                             dists, np.inf)
        nearest = dists.argmin(axis=1)
        within = dists[np.arange(pts.shape[0]), nearest] <= cfg.gate_radius
        assigned[within] = nearest[within]

    out: list[Track] = []
    for k, track in enumerate(active):
        own = _subsample(pts[assigned == k], cfg.max_measurements_per_update)
        updated = ukf_update(track, own, sensor_xy, dt, cfg)
        if own.shape[0] > 0:
            updated.consecutive_hits += 1
            updated.consecutive_misses = 0
            updated.history = track.history + [
                HistoryEntry(timestamp, updated.kinematic, own)]
            if (updated.status is TrackStatus.TENTATIVE
                    and updated.consecutive_hits >= cfg.confirm_hits):
                updated.status = TrackStatus.CONFIRMED
                updated.ever_confirmed = True
        else:
            updated.consecutive_misses += 1
            updated.consecutive_hits = 0
            if updated.consecutive_misses >= cfg.terminate_misses:
                updated.status = TrackStatus.TERMINATED
        out.append(updated)

    # births from unclaimed points
    next_id = max((t.id for t in tracks), default=0) + 1
    unclaimed = pts[assigned < 0]
    unclaimed_rr = None if rr is None else rr[assigned < 0]
    sensor = np.asarray(sensor_xy, dtype=np.float64)
    for region in birth_regions:
        if unclaimed.shape[0] == 0:
            break
        center = np.asarray(region.center, dtype=np.float64)
        near = np.linalg.norm(unclaimed - center, axis=1) <= region.radius
        if int(near.sum()) < cfg.min_birth_points:
            continue
        if unclaimed_rr is not None:
            heading = np.array([math.cos(region.initial_heading),
                                math.sin(region.initial_heading)])
            radial = unclaimed[near] - sensor
            radial /= np.linalg.norm(radial, axis=1, keepdims=True)
            expected = cfg.initial_speed * radial @ heading
            measured = float(np.mean(unclaimed_rr[near]))
            # near-tangential geometry carries no sign information
            if abs(expected.mean()) > 0.25 * cfg.initial_speed \
                    and measured * expected.mean() < 0.0:
                unclaimed = unclaimed[~near]
                if unclaimed_rr is not None:
                    unclaimed_rr = unclaimed_rr[~near]
                continue
        # avoid spawning on top of an existing track
        if any(np.linalg.norm(np.asarray(t.kinematic.center) - unclaimed[near].mean(axis=0))
               <= cfg.gate_radius for t in out if t.active):
            unclaimed = unclaimed[~near]
            if unclaimed_rr is not None:
                unclaimed_rr = unclaimed_rr[~near]
            continue
        seed_pts = _subsample(unclaimed[near], cfg.max_measurements_per_update)
        newborn = _new_track(next_id, seed_pts, region, cfg)
        newborn = ukf_update(newborn, seed_pts, sensor_xy, dt, cfg)
        newborn.consecutive_hits = 1
        newborn.history = [HistoryEntry(timestamp, newborn.kinematic, seed_pts)]
        out.append(newborn)
        next_id += 1
        unclaimed = unclaimed[~near]
        if unclaimed_rr is not None:
            unclaimed_rr = unclaimed_rr[~near]

    terminated = [t for t in tracks if not t.active]
    return terminated + out


# ---------------------------------------------------------------------------
# Trajectory labeling and export
# ---------------------------------------------------------------------------

def _smoothed_yaw_rates(track: Track, window: float) -> np.ndarray:
    """Per-entry yaw rate from a least-squares heading slope over +-window s.

    The filter estimate of phi_dot jitters on straight stretches; the slope
    of the unwrapped heading over a short window is far less noisy and the
    turn rates of interest persist much longer than the window.
    """
    ts = np.array([e.timestamp for e in track.history])
    phi = np.unwrap([e.kinematic.phi for e in track.history])
    rates = np.empty(ts.size)
    for i, t in enumerate(ts):
        m = np.abs(ts - t) <= window
        if m.sum() < 2 or np.ptp(ts[m]) <= 0.0:
            rates[i] = track.history[i].kinematic.phi_dot
            continue
        rates[i] = np.polyfit(ts[m], phi[m], 1)[0]
    return rates


def label_track_points(track: Track, eta: float = DEFAULT_ETA,
                       v_min: float = DEFAULT_V_MIN,
                       yaw_rate_window: float = 0.0,
                       edge_trim: float = 0.0) -> LabeledCloud:
    """Label a track's trajectory by angular curvature yaw_rate/speed.

    Emits one point per history entry: the estimated object center. Raw
    reflection points would do as well for shape, but they lie on the
    sensor-facing surface and would bias the trajectory cloud toward the
    sensor; the center estimates sit on the lane the vehicle drove.

    By default each history entry is labeled from its own filter state. A
    positive ``yaw_rate_window`` smooths the yaw rate over that many
    seconds first, which suppresses spurious turn labels from phi_dot
    jitter on straight stretches. A positive ``edge_trim`` drops entries
    within that many seconds of the track's start and end, where the
    heading estimate is still settling (birth) or degrading (field-of-view
    exit) and would otherwise produce false turn labels.
    """
    positions = []
    labels = []
    rates = _smoothed_yaw_rates(track, yaw_rate_window)
    t_first = track.history[0].timestamp if track.history else 0.0
    t_last = track.history[-1].timestamp if track.history else 0.0
    for entry, phi_dot in zip(track.history, rates):
        v = entry.kinematic.v
        if v <= v_min or entry.points.shape[0] == 0:
            continue
        if (entry.timestamp - t_first < edge_trim
                or t_last - entry.timestamp < edge_trim):
            continue
        kappa = phi_dot / v
        if kappa > eta:
            label = BehaviorLabel.LEFT_TURN
        elif kappa < -eta:
            label = BehaviorLabel.RIGHT_TURN
        else:
            label = BehaviorLabel.STRAIGHT
        positions.append((entry.kinematic.x, entry.kinematic.y, 0.0))
        labels.append(int(label))
    if not positions:
        return LabeledCloud.concatenate([])
    return LabeledCloud(np.array(positions), np.array(labels, dtype=np.int64))


def export_source_cloud(tracks: list[Track], track_ids=None,
                        random_count: int | None = None, seed: int = 0,
                        eta: float = DEFAULT_ETA, v_min: float = DEFAULT_V_MIN,
                        yaw_rate_window: float = 0.0,
                        edge_trim: float = 0.0) -> LabeledCloud:
    """Concatenate labeled points of selected confirmed/terminated-confirmed tracks.

    Selection is either an explicit id set or a seeded random draw of
    ``random_count`` tracks.
    """
    confirmed = [t for t in tracks
                 if t.status is TrackStatus.CONFIRMED or t.ever_confirmed]
    confirmed.sort(key=lambda t: t.id)
    if track_ids is not None:
        wanted = set(track_ids)
        selected = [t for t in confirmed if t.id in wanted]
    elif random_count is not None:
        if random_count <= 0:
            raise InvalidParameterError("random_count must be positive")
        rng = np.random.default_rng(seed)
        k = min(random_count, len(confirmed))
        idx = rng.choice(len(confirmed), size=k, replace=False)
        selected = [confirmed[i] for i in sorted(idx)]
    else:
        selected = confirmed
    if not selected:
        raise InvalidParameterError("track selection is empty")
    return LabeledCloud.concatenate(
        [label_track_points(t, eta, v_min, yaw_rate_window, edge_trim)
         for t in selected])


# ---------------------------------------------------------------------------
# JSON-lines persistence of track histories
# ---------------------------------------------------------------------------

def save_tracks(path, tracks: list[Track]) -> None:
    """One JSON record per history entry: id, timestamp, state, radii, points."""
    with open(path, "w") as fh:
        for track in sorted(tracks, key=lambda t: t.id):
            for entry in track.history:
                record = {
                    "track_id": track.id,
                    "status": track.status.value,
                    "ever_confirmed": track.ever_confirmed,
                    "timestamp": entry.timestamp,
                    "state": entry.kinematic.vector.tolist(),
                    "radii": track.contour.radii.tolist(),
                    "n_points": int(entry.points.shape[0]),
                    "points": entry.points.tolist(),
                }
                fh.write(json.dumps(record, sort_keys=True) + "\n")


def load_tracks(path, gp: GpParams = GpParams()) -> list[Track]:
    """Rebuild tracks (history snapshots only) from a JSON-lines file."""
    by_id: dict[int, Track] = {}
    cov = np.eye(6)
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            tid = int(rec["track_id"])
            kin = KinematicState(np.array(rec["state"]), cov)
            if tid not in by_id:
                contour = ContourState(np.array(rec["radii"]),
                                       np.eye(len(rec["radii"])),
                                       gp.basis_angles()[:len(rec["radii"])])
                status = TrackStatus(rec.get("status", "confirmed"))
                by_id[tid] = Track(
                    tid, kin, contour, status,
                    ever_confirmed=bool(rec.get(
                        "ever_confirmed", status is not TrackStatus.TENTATIVE)))
            track = by_id[tid]
            track.kinematic = kin
            track.history.append(HistoryEntry(
                float(rec["timestamp"]), kin,
                np.array(rec["points"], dtype=np.float64).reshape(-1, 2)))
    return [by_id[tid] for tid in sorted(by_id)]
