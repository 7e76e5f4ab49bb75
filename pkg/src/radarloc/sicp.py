"""Label-constrained point cloud registration in SE(2).

Correspondences are restricted to points of the same behavior label; the
per-iteration alignment is a weighted least-squares solve, which realizes
the maximum-likelihood registration under Gaussian residuals with hard
associations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.spatial import cKDTree

from .errors import InvalidParameterError, NoOverlapError
from .geometry import BehaviorLabel, LabeledCloud, Pose2, align_rigid_2d

DEFAULT_MAX_CORRESPONDENCE = 50.0
DEFAULT_MAX_ITERATIONS = 100
DEFAULT_RMSE_EPSILON = 1e-4


class ConvergedBy(Enum):
    ITERATION_CAP = "iteration_cap"
    RMSE_DELTA = "rmse_delta"


def _uniform_weights() -> dict:
    return {label: 1.0 for label in BehaviorLabel}


@dataclass(frozen=True)
class SicpParams:
    max_correspondence: float = DEFAULT_MAX_CORRESPONDENCE
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    rmse_epsilon: float = DEFAULT_RMSE_EPSILON
    class_weights: dict = field(default_factory=_uniform_weights)

    def __post_init__(self):
        if self.max_correspondence <= 0 or self.max_iterations <= 0 or self.rmse_epsilon <= 0:
            raise InvalidParameterError("SICP distances/iterations must be positive")
        weights = {BehaviorLabel(k): float(v) for k, v in self.class_weights.items()}
        if any(w < 0 for w in weights.values()) or sum(weights.values()) <= 0:
            raise InvalidParameterError("class weights must be >= 0 and not all zero")
        object.__setattr__(self, "class_weights", weights)

    def weight(self, label: int) -> float:
        return self.class_weights.get(BehaviorLabel(int(label)), 1.0)


@dataclass(frozen=True)
class SicpResult:
    transform: Pose2
    fitness: float
    fitness_per_label: dict
    rmse: float
    iterations: int
    converged_by: ConvergedBy
    rmse_trace: tuple[float, ...] = ()


def semantic_correspondences(source: LabeledCloud, target: LabeledCloud,
                             t: Pose2, params: SicpParams = SicpParams()):
    """Same-label nearest neighbors of the transformed source in the target.

    Returns (source_idx, target_idx, distance) arrays for pairs within the
    gating distance.
    """
    if len(source) == 0 or len(target) == 0:
        raise InvalidParameterError("clouds must be non-empty")
    moved = t.apply(source.xyz[:, :2])
    src_idx: list[np.ndarray] = []
    tgt_idx: list[np.ndarray] = []
    dists: list[np.ndarray] = []
    for label in BehaviorLabel:
        s_mask = np.flatnonzero(source.labels == label)
        t_mask = np.flatnonzero(target.labels == label)
        if s_mask.size == 0 or t_mask.size == 0:
            continue
        tree = cKDTree(target.xyz[t_mask][:, :2])
        d, j = tree.query(moved[s_mask],
                          distance_upper_bound=params.max_correspondence)
        ok = np.isfinite(d)
        src_idx.append(s_mask[ok])
        tgt_idx.append(t_mask[j[ok]])
        dists.append(d[ok])
    if not src_idx:
        return (np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64), np.zeros(0))
    order = np.argsort(np.concatenate(src_idx), kind="stable")
    return (np.concatenate(src_idx)[order],
            np.concatenate(tgt_idx)[order],
            np.concatenate(dists)[order])


def sicp_register(source: LabeledCloud, target: LabeledCloud,
                  init: Pose2 = Pose2.identity(),
                  params: SicpParams = SicpParams()) -> SicpResult:
    """Iterate same-label correspondence search and weighted 2D alignment.

    The RMSE is the trimmed objective: each source point contributes its
    same-label nearest distance capped at the gating radius (unmatched
    points contribute the gate itself), weighted by its class weight.
    Capping makes the per-iteration trace non-increasing even when
    re-gating admits new correspondences.
    """
    if len(source) == 0 or len(target) == 0:
        raise InvalidParameterError("clouds must be non-empty")
    if not (set(np.unique(source.labels)) & set(np.unique(target.labels))):
        raise NoOverlapError("source and target share no behavior label")
    transform = init
    trace: list[float] = []
    prev_rmse = None
    converged_by = ConvergedBy.ITERATION_CAP
    fitness = 0.0
    per_label: dict = {label: 0.0 for label in BehaviorLabel}
    iterations = 0
    for iterations in range(1, params.max_iterations + 1):
        si, ti, d = semantic_correspondences(source, target, transform, params)
        if si.size == 0:
            if iterations == 1:
                raise NoOverlapError(
                    "no same-label correspondences within gating distance", fitness=0.0)
            break
        w = np.array([params.weight(l) for l in source.labels[si]])
        used = w > 0
        if not np.any(used):
            raise NoOverlapError("all correspondences have zero class weight")
        fitness = si.size / len(source)
        for label in BehaviorLabel:
            n_src = int((source.labels == label).sum())
            if n_src:
                per_label[label] = int((source.labels[si] == label).sum()) / n_src
        all_w = np.array([params.weight(l) for l in source.labels])
        capped = np.full(len(source), params.max_correspondence)
        capped[si] = np.minimum(d, params.max_correspondence)
        w_pos = all_w > 0
        rmse = float(np.sqrt((all_w[w_pos] * capped[w_pos] ** 2).sum()
                             / all_w[w_pos].sum()))
        trace.append(rmse)
        if prev_rmse is not None and abs(prev_rmse - rmse) < params.rmse_epsilon:
            converged_by = ConvergedBy.RMSE_DELTA
            break
        prev_rmse = rmse
        moved = transform.apply(source.xyz[si][:, :2])
        delta = align_rigid_2d(moved[used], target.xyz[ti][:, :2][used], w[used])
        transform = delta.compose(transform)
    return SicpResult(transform, fitness, {k.char: v for k, v in per_label.items()},
                      trace[-1] if trace else float("inf"), iterations,
                      converged_by, tuple(trace))
