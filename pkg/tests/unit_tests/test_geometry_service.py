"""
Unit tests for the geometry service (LHS sampling, boundary batches, test sets).

Run with: pytest tests/unit_tests/test_geometry_service.py -v
"""

from types import SimpleNamespace

import numpy as np
import pytest

from wavepinn.errors import ArgumentError, GeometryError
from wavepinn.schemas import CutPlane, CutPlanesEvalSet, GridEvalSet, SphereEvalSet
from wavepinn.services.geometry_service import (
    Domain,
    Hole,
    TimeRange,
    build_test_set,
    lhs_sample,
    sample_boundary,
    sample_training_batch,
)
from wavepinn.services.problem_registry import get_problem

PI = np.pi


def test_lhs_one_point_per_stratum():
    rng = np.random.default_rng(0)
    n, d = 50, 3
    sample = lhs_sample(n, d, rng)
    assert sample.shape == (n, d)
    assert np.all((sample >= 0) & (sample < 1))
    for k in range(d):
        strata = np.sort(np.floor(sample[:, k] * n).astype(int))
        assert np.array_equal(strata, np.arange(n))


def test_lhs_single_dimension_small():
    sample = lhs_sample(4, 1, np.random.default_rng(7))
    assert sorted(np.floor(sample[:, 0] * 4).astype(int)) == [0, 1, 2, 3]


def test_lhs_rejects_empty_request():
    with pytest.raises(ArgumentError):
        lhs_sample(0, 2, np.random.default_rng(0))


def test_lhs_same_seed_same_points():
    a = lhs_sample(30, 3, np.random.default_rng(5))
    b = lhs_sample(30, 3, np.random.default_rng(5))
    assert np.array_equal(a, b)


def test_lhs_advances_the_generator():
    rng = np.random.default_rng(5)
    first = lhs_sample(30, 3, rng)
    second = lhs_sample(30, 3, rng)
    assert not np.array_equal(first, second)

    replay = np.random.default_rng(5)
    lhs_sample(30, 3, replay)
    assert np.array_equal(lhs_sample(30, 3, replay), second)


def test_training_batch_counts_and_ranges():
    problem = get_problem("example1_large")
    batch = sample_training_batch(problem, (1500, 300, 700), np.random.default_rng(0))

    assert batch.interior_x.shape == (1500, 2)
    assert batch.interior_t.shape == (1500,)
    assert len(batch.boundary) == 300
    assert batch.initial_x.shape == (700, 2)

    # interior strictly inside the box and the time range
    assert np.all(batch.interior_x > 0) and np.all(batch.interior_x < 10 * PI)
    assert np.all(batch.interior_t >= 0) and np.all(batch.interior_t <= 10)
    assert np.all(batch.initial_t == 0.0)


def test_boundary_points_lie_on_their_face():
    problem = get_problem("example1_small")
    boundary = sample_boundary(problem.domain, problem.time, 400, np.random.default_rng(3))
    for idx, face in enumerate(boundary.faces):
        sel = boundary.face_index == idx
        expected = problem.domain.upper[face.axis] if face.side == "high" else problem.domain.lower[face.axis]
        assert np.all(np.abs(boundary.x[sel, face.axis] - expected) <= 1e-12)
        sign = 1.0 if face.side == "high" else -1.0
        assert np.all(boundary.normal[sel, face.axis] == sign)
    assert np.allclose(np.linalg.norm(boundary.normal, axis=1), 1.0)


def test_faces_are_roughly_uniform():
    problem = get_problem("example1_small")
    boundary = sample_boundary(problem.domain, problem.time, 4000, np.random.default_rng(11))
    counts = np.bincount(boundary.face_index, minlength=4)
    assert np.all(np.abs(counts - 1000) < 150)


def test_porous_interior_avoids_holes():
    problem = get_problem("example3_porous")
    batch = sample_training_batch(problem, (800, 100, 400), np.random.default_rng(2))
    for hole in problem.domain.holes:
        assert np.all(np.linalg.norm(batch.interior_x - hole.center, axis=1) > hole.radius)
        assert np.all(np.linalg.norm(batch.initial_x - hole.center, axis=1) > hole.radius)


def test_hole_boundary_points_when_data_declared():
    domain = Domain(bounds=np.array([[0.0, 4.0], [0.0, 4.0]]), holes=(Hole(center=np.array([2.0, 2.0]), radius=1.0),))
    boundary = sample_boundary(domain, TimeRange(0.0, 1.0), 500, np.random.default_rng(0), include_holes=True)
    assert [f.label for f in boundary.faces][-1] == "hole0"
    sel = boundary.face_index == len(boundary.faces) - 1
    assert sel.any()
    offsets = boundary.x[sel] - domain.holes[0].center
    assert np.allclose(np.linalg.norm(offsets, axis=1), 1.0, atol=1e-12)
    # outward normal of the material points into the hole
    assert np.allclose(boundary.normal[sel], -offsets)


def test_invalid_bounds_rejected():
    with pytest.raises(GeometryError):
        Domain(bounds=np.array([[1.0, 0.0], [0.0, 1.0]]))
    with pytest.raises(GeometryError):
        TimeRange(2.0, 1.0)


def test_hole_center_outside_rejected():
    with pytest.raises(GeometryError):
        Domain(bounds=np.array([[0.0, 1.0], [0.0, 1.0]]), holes=(Hole(center=np.array([2.0, 0.5]), radius=0.1),))


def test_covering_holes_fail_sampling():
    domain = Domain(bounds=np.array([[0.0, 1.0], [0.0, 1.0]]), holes=(Hole(center=np.array([0.5, 0.5]), radius=10.0),))
    problem = SimpleNamespace(domain=domain, time=TimeRange(0.0, 1.0), hole_boundary=None)
    with pytest.raises(GeometryError):
        sample_training_batch(problem, (5, 5, 5), np.random.default_rng(0))


def test_grid_test_set_size():
    problem = get_problem("example1_large")
    test_set = build_test_set(GridEvalSet(resolution=128, t_eval=2.5), problem)
    assert len(test_set) == 16384
    assert np.all(test_set.t == 2.5)
    assert test_set.exact.shape == (16384,)
    # corners of the grid are included
    assert np.allclose(test_set.x.min(axis=0), 0.0)
    assert np.allclose(test_set.x.max(axis=0), 10 * PI)


def test_grid_excludes_hole_points():
    domain = Domain(bounds=np.array([[0.0, 2.0], [0.0, 2.0]]), holes=(Hole(center=np.array([1.0, 1.0]), radius=0.5),))
    test_set = build_test_set(GridEvalSet(resolution=41, t_eval=0.0), domain=domain)
    assert len(test_set) < 41 * 41
    assert np.all(np.linalg.norm(test_set.x - 1.0, axis=1) > 0.5)
    assert test_set.exact is None


def test_sphere_test_set():
    problem = get_problem("example4_sphere")
    test_set = build_test_set(problem.defaults.eval_set, problem)
    assert len(test_set) == 3000
    radii = np.linalg.norm(test_set.x - 5 * PI, axis=1)
    assert np.allclose(radii, 3.0, atol=1e-12)


def test_sphere_outside_domain_rejected():
    problem = get_problem("example4_sphere")
    spec = SphereEvalSet(center=[1.0, 1.0, 1.0], radius=3.0, count=10, t_eval=1.0)
    with pytest.raises(GeometryError):
        build_test_set(spec, problem)


def test_cut_planes_hold_plane_coordinate():
    problem = get_problem("example5_porous3d")
    spec = CutPlanesEvalSet(planes=[CutPlane(axis=2, value=2.5 * PI)], resolution=16, t_eval=2.5, exclude_holes=False)
    test_set = build_test_set(spec, problem)
    assert len(test_set) == 16 * 16
    assert np.all(test_set.x[:, 2] == 2.5 * PI)


def test_default_cut_planes_exclude_holes():
    problem = get_problem("example5_porous3d")
    test_set = build_test_set(problem.defaults.eval_set, problem)
    assert 0 < len(test_set) < 2 * 64 * 64
    assert np.all(problem.domain.outside_holes(test_set.x))
