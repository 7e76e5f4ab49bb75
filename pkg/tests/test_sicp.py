import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from radarloc.errors import InvalidParameterError, NoOverlapError
from radarloc.geometry import BehaviorLabel, LabeledCloud, Pose2, wrap_angle
from radarloc.sicp import (
    ConvergedBy,
    SicpParams,
    SicpResult,
    semantic_correspondences,
    sicp_register,
)

L = int(BehaviorLabel.LEFT_TURN)
R = int(BehaviorLabel.RIGHT_TURN)
S = int(BehaviorLabel.STRAIGHT)


def _cloud(xy, labels):
    xy = np.asarray(xy, dtype=float)
    return LabeledCloud(np.column_stack([xy, np.zeros(len(xy))]),
                        np.asarray(labels, dtype=np.int64))


def _random_cloud(rng, n=80):
    xy = rng.uniform(-20, 20, size=(n, 2))
    labels = rng.integers(0, 3, size=n)
    return _cloud(xy, labels)


def test_params_validation():
    with pytest.raises(InvalidParameterError):
        SicpParams(max_correspondence=0.0)
    with pytest.raises(InvalidParameterError):
        SicpParams(class_weights={L: -1.0})
    with pytest.raises(InvalidParameterError):
        SicpParams(class_weights={L: 0.0, R: 0.0, S: 0.0})


def test_semantic_correspondences_same_label_only():
    source = _cloud([[0.0, 0.0], [10.0, 0.0]], [L, S])
    target = _cloud([[0.5, 0.0], [10.5, 0.0]], [S, L])
    si, ti, d = semantic_correspondences(source, target, Pose2.identity())
    # nearest same-label partner is the *far* point for both
    assert si.tolist() == [0, 1]
    assert ti.tolist() == [1, 0]
    assert np.all(d > 9.0)


def test_self_registration_is_identity():
    rng = np.random.default_rng(0)
    cloud = _random_cloud(rng)
    result = sicp_register(cloud, cloud, Pose2.identity())
    assert math.hypot(result.transform.x, result.transform.y) < 1e-9
    assert abs(result.transform.yaw) < 1e-9
    assert result.fitness == 1.0
    assert result.rmse < 1e-9


@given(st.integers(0, 500))
@settings(max_examples=25, deadline=None)
def test_recovers_random_transform(seed):
    rng = np.random.default_rng(seed)
    source = _random_cloud(rng)
    truth = Pose2(float(rng.uniform(-2, 2)), float(rng.uniform(-2, 2)),
                  float(rng.uniform(-0.2, 0.2)))
    target = LabeledCloud(
        np.column_stack([truth.apply(source.xyz[:, :2]), np.zeros(len(source))]),
        source.labels)
    result = sicp_register(source, target, Pose2.identity())
    assert math.hypot(result.transform.x - truth.x,
                      result.transform.y - truth.y) < 1e-6
    assert abs(wrap_angle(result.transform.yaw - truth.yaw)) < 1e-6


def test_trace_non_increasing_and_stop_rule():
    rng = np.random.default_rng(12)
    source = _random_cloud(rng, n=120)
    target = LabeledCloud(source.xyz + np.array([1.0, -2.0, 0.0]), source.labels)
    params = SicpParams(max_iterations=100, rmse_epsilon=1e-4)
    result = sicp_register(source, target, Pose2.identity(), params)
    assert result.iterations <= 100
    trace = result.rmse_trace
    assert all(b - a <= 1e-12 for a, b in zip(trace, trace[1:]))
    if result.converged_by is ConvergedBy.RMSE_DELTA:
        assert abs(trace[-2] - trace[-1]) < 1e-4


def test_disjoint_labels_raise():
    source = _cloud([[0.0, 0.0]], [L])
    target = _cloud([[0.0, 0.0]], [R])
    with pytest.raises(NoOverlapError):
        sicp_register(source, target)
    with pytest.raises(InvalidParameterError):
        sicp_register(LabeledCloud.empty(), target)


def test_out_of_gate_raises_no_overlap():
    source = _cloud([[0.0, 0.0], [1.0, 0.0]], [S, S])
    target = _cloud([[500.0, 0.0], [501.0, 0.0]], [S, S])
    with pytest.raises(NoOverlapError):
        sicp_register(source, target, Pose2.identity(),
                      SicpParams(max_correspondence=10.0))


def test_zero_weight_class_equals_deletion():
    rng = np.random.default_rng(5)
    source = _random_cloud(rng, n=90)
    shift = np.array([0.8, -0.4, 0.0])
    target = LabeledCloud(source.xyz + shift, source.labels)
    # corrupt the straight-label targets; with weight 0 they must not matter
    corrupt = target.xyz.copy()
    corrupt[target.labels == S] += rng.normal(0, 5.0, size=(int(
        (target.labels == S).sum()), 3))
    target = LabeledCloud(corrupt, target.labels)
    params = SicpParams(class_weights={L: 1.0, R: 1.0, S: 0.0})
    full = sicp_register(source, target, Pose2.identity(), params)
    kept = source.labels != S
    reduced = sicp_register(source.select(kept), target.select(kept),
                            Pose2.identity(),
                            SicpParams(class_weights={L: 1.0, R: 1.0, S: 0.0}))
    assert math.hypot(full.transform.x - reduced.transform.x,
                      full.transform.y - reduced.transform.y) < 1e-9
    assert abs(full.transform.yaw - reduced.transform.yaw) < 1e-9


def test_label_permutation_equivariance():
    rng = np.random.default_rng(8)
    source = _random_cloud(rng)
    target = LabeledCloud(source.xyz + np.array([1.0, 0.5, 0.0]), source.labels)
    base = sicp_register(source, target, Pose2.identity())
    # swap L and R everywhere (and swap their equal weights): same geometry
    perm = {L: R, R: L, S: S}
    ps = LabeledCloud(source.xyz, np.array([perm[int(l)] for l in source.labels]))
    pt = LabeledCloud(target.xyz, np.array([perm[int(l)] for l in target.labels]))
    swapped = sicp_register(ps, pt, Pose2.identity())
    assert math.hypot(base.transform.x - swapped.transform.x,
                      base.transform.y - swapped.transform.y) < 1e-12
    assert abs(base.transform.yaw - swapped.transform.yaw) < 1e-12


def test_result_reports_per_label_fitness():
    source = _cloud([[0.0, 0.0], [5.0, 0.0]], [L, S])
    target = _cloud([[0.1, 0.0], [5.1, 0.0]], [L, S])
    result = sicp_register(source, target)
    assert isinstance(result, SicpResult)
    assert result.fitness_per_label["L"] == 1.0
    assert result.fitness_per_label["S"] == 1.0
