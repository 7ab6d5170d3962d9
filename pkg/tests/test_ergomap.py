"""Ergonomics maps: fitting, PSD projection, frames, serialization."""

import numpy as np
import pytest

from hqplab import ergomap
from hqplab.errors import DegenerateGrid, MissingClass, WrongFrame


def _exact_grid(rng, H, g, c, n=60):
    pts = rng.uniform(-1.0, 1.0, size=(n, 3))
    scores = np.array([0.5 * p @ H @ p + g @ p + c for p in pts])
    return ergomap.ScoreGrid(points=pts, scores=scores)


def test_exact_quadratic_recovered(rng):
    H = np.array([[4.0, 1.0, 0.0], [1.0, 3.0, 0.5], [0.0, 0.5, 5.0]])
    g = np.array([-1.0, 0.4, 2.0])
    c = 7.0
    fitted = ergomap.fit_map_from_grid(_exact_grid(rng, H, g, c))
    np.testing.assert_allclose(fitted.H_e, H, atol=1e-8)
    np.testing.assert_allclose(fitted.g_e, g, atol=1e-8)
    np.testing.assert_allclose(fitted.c_e, c, atol=1e-8)
    assert fitted.meta["fit_rms"] <= 1e-9


def test_indefinite_curvature_projected_psd(rng):
    H = np.diag([4.0, -2.0, 3.0])
    fitted = ergomap.fit_map_from_grid(
        _exact_grid(rng, H, np.zeros(3), 1.0))
    eig = np.linalg.eigvalsh(fitted.H_e)
    assert eig[0] >= -1e-12
    assert fitted.meta["clipped_eig_mass"] > 1.0


def test_min_score_nonnegative_after_shift(rng):
    H = np.diag([2.0, 2.0, 2.0])
    g = np.array([10.0, 0.0, 0.0])
    c = -50.0  # raw minimum far below zero
    fitted = ergomap.fit_map_from_grid(_exact_grid(rng, H, g, c))
    assert fitted.min_score() >= -1e-9


def test_frame_transform_preserves_scores(rng):
    subject = ergomap.SubjectProfile(height=1.7)
    fitted = ergomap.fit_map_from_grid(
        ergomap.generate_synthetic_reba_grid(subject))
    human = ergomap.HumanPoseState(position=np.array([1.3, -0.6, 0.0]),
                                   heading=2.4)
    world = ergomap.map_to_world(fitted, human)
    R = human.yaw_matrix()
    for _ in range(50):
        x = rng.uniform(-1.0, 1.0, size=3)
        e_h = ergomap.evaluate_score(fitted, x)
        e_w = ergomap.evaluate_score(world, R @ x + human.position)
        assert abs(e_h - e_w) <= 1e-9
    with pytest.raises(WrongFrame):
        ergomap.map_to_world(world, human)


def test_world_minimizer_is_transformed_minimizer():
    subject = ergomap.SubjectProfile(height=1.75)
    fitted = ergomap.fit_map_from_grid(
        ergomap.generate_synthetic_reba_grid(subject))
    human = ergomap.HumanPoseState(position=np.array([1.1, 0.0, 0.0]),
                                   heading=np.pi)
    world = ergomap.map_to_world(fitted, human)
    expect = human.yaw_matrix() @ fitted.minimizer() + human.position
    np.testing.assert_allclose(world.minimizer(), expect, atol=1e-9)
    np.testing.assert_allclose(world.min_score(), fitted.min_score(),
                               atol=1e-9)


def test_stature_classification():
    assert ergomap.classify_stature(1.60) == ergomap.SHORT
    assert ergomap.classify_stature(1.65) == ergomap.AVERAGE
    assert ergomap.classify_stature(1.80) == ergomap.AVERAGE
    assert ergomap.classify_stature(1.81) == ergomap.TALL


def test_select_map_requires_all_classes():
    registry = ergomap.build_map_registry()
    subject = ergomap.SubjectProfile(height=1.9)
    assert ergomap.select_map(registry, subject) is registry[ergomap.TALL]
    del registry[ergomap.SHORT]
    with pytest.raises(MissingClass):
        ergomap.select_map(registry, subject)


def test_degenerate_grids_rejected(rng):
    with pytest.raises(DegenerateGrid):
        ergomap.fit_map_from_grid(ergomap.ScoreGrid(
            points=rng.normal(size=(5, 3)), scores=np.zeros(5)))
    planar = np.zeros((30, 3))
    planar[:, :2] = rng.normal(size=(30, 2))  # z fixed: rank-deficient design
    with pytest.raises(DegenerateGrid):
        ergomap.fit_map_from_grid(ergomap.ScoreGrid(
            points=planar, scores=np.zeros(30)))


def test_map_dump_load_round_trip(tmp_path, rng):
    fitted = ergomap.fit_map_from_grid(
        _exact_grid(rng, np.diag([2.0, 3.0, 4.0]), np.ones(3), 5.0))
    path = tmp_path / "map.txt"
    fitted.dump(path)
    back = ergomap.ErgonomicsMap.load(path)
    np.testing.assert_array_equal(fitted.H_e, back.H_e)
    np.testing.assert_array_equal(fitted.g_e, back.g_e)
    assert fitted.c_e == back.c_e
    assert back.frame == ergomap.FRAME_HUMAN
    assert back.meta["fit_rms"] == fitted.meta["fit_rms"]


def test_grid_csv_round_trip(tmp_path, rng):
    grid = _exact_grid(rng, np.eye(3), np.zeros(3), 1.0, n=20)
    path = tmp_path / "grid.csv"
    grid.to_csv(path)
    back = ergomap.ScoreGrid.from_csv(path)
    np.testing.assert_array_equal(grid.points, back.points)
    np.testing.assert_array_equal(grid.scores, back.scores)


def test_subject_profile_validation():
    with pytest.raises(ValueError):
        ergomap.SubjectProfile(height=0.9)
    with pytest.raises(ValueError):
        ergomap.generate_synthetic_reba_grid(
            ergomap.SubjectProfile(height=1.7), spacing=0.5)
