"""Gaussian-process extended object tracking of vehicles in radar data."""

from .contour import ContourState, GpParams, contour_predict, gp_gram, gp_kernel, gp_regress
from .motion import KinematicState, ctra_predict
from .tracker import (
    BirthRegion,
    Track,
    TrackStatus,
    TrackerConfig,
    associate_hungarian,
    export_source_cloud,
    generate_candidates,
    label_track_points,
    load_tracks,
    save_tracks,
    track_step,
    ukf_update,
)

__all__ = [
    "BirthRegion",
    "ContourState",
    "GpParams",
    "KinematicState",
    "Track",
    "TrackStatus",
    "TrackerConfig",
    "associate_hungarian",
    "contour_predict",
    "ctra_predict",
    "export_source_cloud",
    "generate_candidates",
    "gp_gram",
    "gp_kernel",
    "gp_regress",
    "label_track_points",
    "load_tracks",
    "save_tracks",
    "track_step",
    "ukf_update",
]
