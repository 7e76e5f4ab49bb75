"""Pipeline orchestration: configuration, staged execution and reporting.

The chain is coarse -> track -> label -> sicp; every stage reads and
writes files under the configured output directory, so a full run and a
stage-by-stage run produce bit-identical artifacts.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path as FsPath

import numpy as np
import yaml

from . import sim
from .coarse import CoarseParams, coarse_localize, extract_dynamic, load_frames, save_frames
from .eot import (
    BirthRegion,
    GpParams,
    TrackerConfig,
    export_source_cloud,
    load_tracks,
    save_tracks,
    track_step,
)
from .errors import InputError, NoOverlapError, RadarLocError, StageError
from .geometry import (
    BehaviorLabel,
    LabeledCloud,
    PointCloud,
    Pose2,
    Transform3,
    compose_final,
    load_labeled_cloud,
    save_labeled_cloud,
    transform_cloud,
    voxel_downsample,
)
from .laneletmap import crop_als_by_lanelets, load_map, save_map
from .sicp import SicpParams, sicp_register

STAGES = ("coarse", "track", "label", "sicp")


@dataclass
class PipelineConfig:
    """Flat key-value configuration; every field maps 1:1 to a config key."""

    radar_csv: str = ""
    als_csv: str = ""
    map_json: str = ""
    out_dir: str = "out"
    seed: int = 0

    # coarse stage
    lambda_range_rate: float = 1.0
    voxel_coarse: float = 0.5
    dbscan_eps: float = 2.0
    dbscan_min_pts: int = 5
    trim_bounds: str = ""                  # "xmin,xmax,ymin,ymax" or empty
    coarse_icp_ranges: str = "50,25,12.5,6.25"
    icp_max_iterations: int = 100
    icp_rmse_epsilon: float = 1e-4
    init_x: float = 0.0
    init_y: float = 0.0
    init_z: float = 0.0
    init_yaw: float = 0.0
    init_pitch: float = 0.0
    init_roll: float = 0.0

    # map labeling
    gamma: float = 0.01

    # tracking
    gp_sigma_f: float = 1.0
    gp_sigma_r: float = 0.2
    gp_length_scale: float = math.pi / 4
    gp_tau: float = 0.01
    n_theta: int = 20
    gp_mean_radius: float = 2.0
    gp_symmetric: bool = False
    gate_radius: float = 10.0
    association_gate: float = 5.0
    sensor_noise_std: float = 0.3
    confirm_hits: int = 5
    terminate_misses: int = 25
    min_birth_points: int = 3
    max_measurements_per_update: int = 25
    initial_speed: float = 8.0
    range_rate_gate: float = 3.0
    visibility_margin: float = 0.1
    process_noise: str = "0.01,0.01,0.09,0.04,0.01,0.01"  # variances per second
    birth_regions: str = "[]"              # JSON [[x, y, radius, heading], ...]

    # labeling / selection
    eta: float = 0.01
    v_min: float = 0.5
    label_yaw_window: float = 0.0          # s; 0 = label from raw filter yaw rate
    label_edge_trim: float = 0.0           # s dropped at each track end
    voxel_label: float = 0.5
    select_track_ids: str = ""             # comma-separated ids, empty = no filter
    select_random_count: int = 0           # 0 = use all confirmed tracks

    # fine registration
    sicp_max_correspondence: float = 50.0
    sicp_max_iterations: int = 100
    sicp_rmse_epsilon: float = 1e-4
    sicp_weight_left: float = 1.0
    sicp_weight_right: float = 1.0
    sicp_weight_straight: float = 1.0

    @classmethod
    def keys(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    @classmethod
    def from_dict(cls, doc: dict) -> "PipelineConfig":
        cfg = cls()
        for key, value in doc.items():
            cfg.set(key, value)
        return cfg

    def set(self, key: str, value) -> None:
        matching = {f.name: f for f in fields(self)}
        if key not in matching:
            raise InputError(f"unknown configuration key {key!r}")
        kind = matching[key].type
        current = getattr(self, key)
        if isinstance(current, bool):
            value = str(value).lower() in ("1", "true", "yes")
        elif isinstance(current, int):
            value = int(value)
        elif isinstance(current, float):
            value = float(value)
        else:
            value = str(value)
        setattr(self, key, value)
        _ = kind

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        try:
            with open(path) as fh:
                doc = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise InputError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise InputError(f"cannot parse config {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise InputError(f"config {path} must be a flat key-value mapping")
        return cls.from_dict(doc)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            yaml.safe_dump(asdict(self), fh, sort_keys=True)

    # derived parameter bundles -------------------------------------------

    def gp_params(self) -> GpParams:
        return GpParams(self.gp_sigma_f, self.gp_sigma_r, self.gp_length_scale,
                        self.gp_tau, self.n_theta, self.gp_mean_radius,
                        self.gp_symmetric)

    def tracker_config(self) -> TrackerConfig:
        return TrackerConfig(
            gp=self.gp_params(), gate_radius=self.gate_radius,
            association_gate=self.association_gate,
            sensor_noise_std=self.sensor_noise_std,
            confirm_hits=self.confirm_hits,
            terminate_misses=self.terminate_misses,
            min_birth_points=self.min_birth_points,
            max_measurements_per_update=self.max_measurements_per_update,
            initial_speed=self.initial_speed,
            range_rate_gate=self.range_rate_gate,
            visibility_margin=self.visibility_margin,
            process_noise_diag=tuple(
                float(v) for v in self.process_noise.split(",")))

    def coarse_params(self) -> CoarseParams:
        trim = None
        if self.trim_bounds.strip():
            vals = [float(v) for v in self.trim_bounds.split(",")]
            if len(vals) != 4:
                raise InputError("trim_bounds needs 4 comma-separated values")
            trim = tuple(vals)
        ranges = tuple(float(v) for v in self.coarse_icp_ranges.split(","))
        return CoarseParams(self.lambda_range_rate, self.voxel_coarse,
                            self.dbscan_eps, self.dbscan_min_pts, trim,
                            ranges, self.icp_max_iterations, self.icp_rmse_epsilon)

    def sicp_params(self) -> SicpParams:
        return SicpParams(self.sicp_max_correspondence, self.sicp_max_iterations,
                          self.sicp_rmse_epsilon,
                          {BehaviorLabel.LEFT_TURN: self.sicp_weight_left,
                           BehaviorLabel.RIGHT_TURN: self.sicp_weight_right,
                           BehaviorLabel.STRAIGHT: self.sicp_weight_straight})

    def init_transform(self) -> Transform3:
        return Transform3.from_euler(self.init_x, self.init_y, self.init_z,
                                     self.init_roll, self.init_pitch, self.init_yaw)

    def birth_region_list(self) -> list[BirthRegion]:
        try:
            entries = json.loads(self.birth_regions)
        except json.JSONDecodeError as exc:
            raise InputError(f"birth_regions is not valid JSON: {exc}") from exc
        return [BirthRegion((float(e[0]), float(e[1])), float(e[2]), float(e[3]))
                for e in entries]


@dataclass
class LocalizationReport:
    t_coarse: Transform3
    t_fine: Pose2
    t_utm: Transform3
    diagnostics: dict
    timings: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "t_coarse": _transform_dict(self.t_coarse),
            "t_fine": {"x": self.t_fine.x, "y": self.t_fine.y, "yaw": self.t_fine.yaw},
            "t_utm": _transform_dict(self.t_utm),
            "diagnostics": self.diagnostics,
        }


def _transform_dict(t: Transform3) -> dict:
    return {"r": t.rotation.tolist(), "t": t.translation.tolist()}


def _transform_from_dict(doc: dict) -> Transform3:
    return Transform3(np.array(doc["r"]), np.array(doc["t"]))


def _require(path: FsPath, stage: str) -> FsPath:
    if not path.exists():
        raise InputError(f"stage '{stage}' requires missing file: {path}")
    return path


def _write_json(path, doc) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True)


def _read_json(path):
    with open(path) as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# Stage implementations
# ---------------------------------------------------------------------------

def _stage_coarse(cfg: PipelineConfig, out: FsPath) -> dict:
    for key in ("radar_csv", "als_csv", "map_json"):
        if not getattr(cfg, key):
            raise InputError(f"config key {key} is required for the coarse stage")
    lanelet_map = load_map(_require(FsPath(cfg.map_json), "coarse"))
    als = _load_als(cfg.als_csv)
    target = crop_als_by_lanelets(als, lanelet_map, cfg.gamma)
    target = voxel_downsample(target, cfg.voxel_label)
    save_labeled_cloud(out / "target_labeled.csv", target)

    frames = load_frames(_require(FsPath(cfg.radar_csv), "coarse"))
    if not frames:
        raise StageError("coarse", "radar recording contains no frames")
    road_cloud = PointCloud(target.xyz)
    try:
        t_coarse, icp = coarse_localize(frames, road_cloud, cfg.init_transform(),
                                        cfg.coarse_params())
    except NoOverlapError as exc:
        raise StageError("coarse", str(exc)) from exc
    _write_json(out / "t_coarse.json", {
        **_transform_dict(t_coarse),
        "fitness": icp.fitness, "rmse": icp.rmse, "iterations": icp.iterations,
        "rmse_trace": list(icp.rmse_trace),
    })
    return {"fitness": icp.fitness, "rmse": icp.rmse, "iterations": icp.iterations}


def _load_als(path) -> PointCloud:
    path = FsPath(path)
    if not path.exists():
        raise InputError(f"ALS cloud file not found: {path}")
    data = np.genfromtxt(path, delimiter=",", names=True, dtype=np.float64)
    data = np.atleast_1d(data)
    names = data.dtype.names or ()
    for col in ("x", "y", "z"):
        if col not in names:
            raise InputError(f"{path}: missing column {col!r}")
    return PointCloud(np.column_stack([data["x"], data["y"], data["z"]]))


def _stage_track(cfg: PipelineConfig, out: FsPath) -> dict:
    coarse_doc = _read_json(_require(out / "t_coarse.json", "track"))
    t_coarse = _transform_from_dict(coarse_doc)
    frames = load_frames(_require(FsPath(cfg.radar_csv), "track"))
    tracker_cfg = cfg.tracker_config()
    regions = cfg.birth_region_list()
    sensor_xy = t_coarse.translation[:2]
    tracks = []
    prev_t = None
    dts = np.diff([f.timestamp for f in frames])
    default_dt = float(np.median(dts)) if dts.size else 0.1
    for frame in frames:
        dt = frame.timestamp - prev_t if prev_t is not None else default_dt
        prev_t = frame.timestamp
        if dt <= 0:
            dt = default_dt
        dynamic = extract_dynamic([frame], cfg.lambda_range_rate)
        flat = transform_cloud(t_coarse, dynamic)
        tracks = track_step(tracks, flat.xyz[:, :2], frame.timestamp, dt, regions,
                            sensor_xy, tracker_cfg, range_rates=flat.range_rate)
    save_tracks(out / "tracks.jsonl", tracks)
    confirmed = sum(1 for t in tracks if t.ever_confirmed)
    return {"track_count": len(tracks), "confirmed_tracks": confirmed}


def _stage_label(cfg: PipelineConfig, out: FsPath) -> dict:
    tracks = load_tracks(_require(out / "tracks.jsonl", "label"), cfg.gp_params())
    ids = None
    if cfg.select_track_ids.strip():
        ids = [int(v) for v in cfg.select_track_ids.split(",")]
    count = cfg.select_random_count or None
    try:
        cloud = export_source_cloud(tracks, track_ids=ids, random_count=count,
                                    seed=cfg.seed, eta=cfg.eta, v_min=cfg.v_min,
                                    yaw_rate_window=cfg.label_yaw_window,
                                    edge_trim=cfg.label_edge_trim)
    except RadarLocError as exc:
        raise StageError("label", str(exc)) from exc
    cloud = voxel_downsample(cloud, cfg.voxel_label)
    save_labeled_cloud(out / "source_labeled.csv", cloud)
    counts = {lab.char: int((cloud.labels == lab).sum()) for lab in BehaviorLabel}
    return {"per_label_counts": counts, "source_points": len(cloud)}


def _stage_sicp(cfg: PipelineConfig, out: FsPath) -> dict:
    source = load_labeled_cloud(_require(out / "source_labeled.csv", "sicp"))
    target = load_labeled_cloud(_require(out / "target_labeled.csv", "sicp"))
    try:
        result = sicp_register(source, target, Pose2.identity(), cfg.sicp_params())
    except NoOverlapError as exc:
        raise StageError("sicp", str(exc)) from exc
    t_fine = result.transform
    _write_json(out / "t_fine.json", {
        "x": t_fine.x, "y": t_fine.y, "yaw": t_fine.yaw,
        "rmse": result.rmse, "fitness": result.fitness,
        "iterations": result.iterations, "converged_by": result.converged_by.value,
        "rmse_trace": list(result.rmse_trace),
    })
    save_labeled_cloud(out / "source_registered.csv",
                       transform_cloud(t_fine, source))
    _write_overlay_svg(out / "overlay.svg", source, target, t_fine)
    return {"fitness": result.fitness, "rmse": result.rmse,
            "iterations": result.iterations,
            "fitness_per_label": result.fitness_per_label}


_STAGE_FUNCS = {
    "coarse": _stage_coarse,
    "track": _stage_track,
    "label": _stage_label,
    "sicp": _stage_sicp,
}


def run_stage(cfg: PipelineConfig, stage: str) -> dict:
    """Execute one stage from serialized intermediates in the output dir."""
    if stage not in _STAGE_FUNCS:
        raise InputError(f"unknown stage {stage!r}; expected one of {STAGES}")
    out = FsPath(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return _STAGE_FUNCS[stage](cfg, out)


def run_pipeline(cfg: PipelineConfig) -> LocalizationReport:
    """Run all stages in order and assemble the localization report."""
    out = FsPath(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    diagnostics: dict = {}
    timings: dict = {}
    for stage in STAGES:
        started = time.perf_counter()
        diagnostics[stage] = _STAGE_FUNCS[stage](cfg, out)
        timings[stage] = time.perf_counter() - started
    t_coarse = _transform_from_dict(_read_json(out / "t_coarse.json"))
    fine_doc = _read_json(out / "t_fine.json")
    t_fine = Pose2(fine_doc["x"], fine_doc["y"], fine_doc["yaw"])
    t_utm = compose_final(t_fine, t_coarse)
    report = LocalizationReport(t_coarse, t_fine, t_utm, diagnostics, timings)
    _write_json(out / "report.json", report.to_dict())
    # wall-clock goes to a separate file so reports stay reproducible
    _write_json(out / "timings.json", {k: round(v, 3) for k, v in timings.items()})
    return report


def gen_scenario(spec_source: str, out_dir, seed: int | None = None) -> dict:
    """Generate scenario files (radar, ALS, map, truth) plus a ready config.

    ``spec_source`` is either a bundled scenario name or a path to a
    scenario JSON file.
    """
    if spec_source in sim.BUNDLED_SCENARIOS:
        spec = sim.BUNDLED_SCENARIOS[spec_source]()
    else:
        path = FsPath(spec_source)
        if not path.exists():
            raise InputError(
                f"scenario spec {spec_source!r} is neither a bundled name "
                f"({', '.join(sorted(sim.BUNDLED_SCENARIOS))}) nor a file")
        spec = sim.load_spec(path)
    if seed is not None:
        spec = sim.ScenarioSpec(**{**_spec_kwargs(spec), "seed": seed})
    out = FsPath(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    truth = sim.make_truth(spec)
    t_end = max((v.end_time for v in spec.vehicles
                 if math.isfinite(v.end_time)), default=10.0)
    frames = sim.render_radar(spec, truth, 0.0, t_end + spec.frame_dt)
    save_frames(out / "radar.csv", frames)
    _save_als_csv(out / "als.csv", truth.als)
    save_map(out / "map.json", truth.lanelet_map)
    sim.save_truth(out / "truth.json", truth)
    sim.save_spec(out / "scenario.json", spec)

    regions = sim.suggest_birth_regions(spec)
    # tracker settings validated against the simulator's rectangle targets:
    # the filter noise is deliberately larger than the rendered noise to
    # absorb the smooth-contour-vs-rectangle model mismatch
    cfg = PipelineConfig(
        radar_csv=str(out / "radar.csv"), als_csv=str(out / "als.csv"),
        map_json=str(out / "map.json"), out_dir=str(out / "run"),
        seed=spec.seed, birth_regions=json.dumps([list(r) for r in regions]),
        sensor_noise_std=max(0.8, spec.noise_position_std),
        gp_sigma_f=1.2, gp_length_scale=0.45, gp_tau=0.003, gp_mean_radius=1.8,
        gp_symmetric=True, gate_radius=5.0, max_measurements_per_update=35,
        label_yaw_window=2.0, label_edge_trim=2.0,
        sicp_max_correspondence=3.0,
    )
    pose = spec.sensor_pose
    cfg.init_x, cfg.init_y, cfg.init_z = pose.translation.tolist()
    cfg.init_yaw = pose.yaw
    cfg.init_pitch = -math.asin(max(-1.0, min(1.0, pose.rotation[2, 0])))
    cfg.init_roll = math.atan2(pose.rotation[2, 1], pose.rotation[2, 2])
    cfg.save(out / "pipeline.yaml")
    return {"frames": len(frames), "vehicles": len(spec.vehicles),
            "birth_regions": len(regions), "out_dir": str(out)}


def _spec_kwargs(spec: sim.ScenarioSpec) -> dict:
    return {f.name: getattr(spec, f.name) for f in fields(sim.ScenarioSpec)}


def _save_als_csv(path, als: PointCloud) -> None:
    with open(path, "w") as fh:
        fh.write("x,y,z\n")
        for row in als.xyz:
            x, y, z = (float(v) for v in row)
            fh.write(f"{x!r},{y!r},{z!r}\n")


# ---------------------------------------------------------------------------
# SVG overlay plot
# ---------------------------------------------------------------------------

_LABEL_COLORS = {BehaviorLabel.LEFT_TURN: "#d62728",
                 BehaviorLabel.RIGHT_TURN: "#1f77b4",
                 BehaviorLabel.STRAIGHT: "#000000"}


def _thin(xyz: np.ndarray, limit: int = 3000) -> np.ndarray:
    if xyz.shape[0] <= limit:
        return xyz
    idx = np.linspace(0, xyz.shape[0] - 1, limit).round().astype(int)
    return xyz[idx]


def _write_overlay_svg(path, source: LabeledCloud, target: LabeledCloud,
                       t_fine: Pose2, size: int = 800) -> None:
    """Target gray; source colored by label, faded before and solid after
    applying the fine transform."""
    moved = transform_cloud(t_fine, source)
    all_xy = np.concatenate([target.xyz[:, :2], source.xyz[:, :2], moved.xyz[:, :2]])
    lo = all_xy.min(axis=0) - 5.0
    hi = all_xy.max(axis=0) + 5.0
    span = max(hi[0] - lo[0], hi[1] - lo[1])
    scale = size / span

    def to_px(xy):
        return ((xy[:, 0] - lo[0]) * scale, (hi[1] - xy[:, 1]) * scale)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
             f'viewBox="0 0 {size} {size}">',
             f'<rect width="{size}" height="{size}" fill="white"/>']
    tx, ty = to_px(_thin(target.xyz[:, :2]))
    for x, y in zip(tx, ty):
        parts.append(f'<circle cx="{x:.1f}" cy="{y:.1f}" r="1" fill="#bbbbbb"/>')
    for cloud, opacity in ((source, 0.25), (moved, 1.0)):
        xyz = _thin(np.column_stack([cloud.xyz[:, :2], cloud.labels]))
        px, py = to_px(xyz[:, :2])
        for x, y, lab in zip(px, py, xyz[:, 2]):
            color = _LABEL_COLORS[BehaviorLabel(int(lab))]
            parts.append(f'<circle cx="{x:.1f}" cy="{y:.1f}" r="1.5" '
                         f'fill="{color}" fill-opacity="{opacity}"/>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts))
