import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from castr import proximity
from castr.errors import NumericalFailure
from castr.geom import Polytope

import oracles


def cube(offset=(0.0, 0.0, 0.0)):
    c = np.array([[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)], float)
    return c + np.asarray(offset, float)


def test_cubes_with_gap():
    r = proximity.min_distance(cube(), cube((1.3, 0, 0)))
    assert r.distance == pytest.approx(0.3, abs=1e-9)
    assert not r.intersecting
    assert r.witness_a[0] == pytest.approx(1.0, abs=1e-9)
    assert r.witness_b[0] == pytest.approx(1.3, abs=1e-9)
    assert np.linalg.norm(r.witness_a - r.witness_b) == pytest.approx(r.distance, abs=1e-6)


def test_overlapping_cubes():
    r = proximity.min_distance(cube(), cube((0.5, 0.5, 0.5)))
    assert r.distance == 0.0
    assert r.intersecting


def test_point_inside_and_outside():
    assert proximity.min_distance(cube(), [0.5, 0.5, 0.5]).intersecting
    r = proximity.min_distance(cube(), [2.0, 0.5, 0.5])
    assert r.distance == pytest.approx(1.0, abs=1e-9)


def test_planar_patch_operand():
    patch = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], float)
    assert proximity.min_distance(patch, [0.5, 0.5, 0.2]).distance == pytest.approx(0.2, abs=1e-9)
    assert proximity.min_distance(patch, [0.5, 0.5, 0.0]).intersecting


def test_random_pairs_match_feature_oracle(rng):
    for _ in range(300):
        a = oracles.random_polytope(rng)
        b = oracles.random_polytope(rng, center=rng.uniform(-4, 4, 3))
        r = proximity.min_distance(a, b)
        assert r.distance == pytest.approx(oracles.hull_distance(a, b), abs=1e-6)
        if not r.intersecting:
            assert np.linalg.norm(r.witness_a - r.witness_b) == pytest.approx(r.distance, abs=1e-6)
            assert oracles.lp_contains(a, r.witness_a, tol=1e-6)
            assert oracles.lp_contains(b, r.witness_b, tol=1e-6)


def test_iteration_cap_raises():
    a, b = cube(), cube((3, 2, 1))
    with pytest.raises(NumericalFailure):
        proximity.min_distance(a, b, max_iterations=0)
    # the public entry point falls back to direct minimisation
    assert proximity.distance(a, b).distance == pytest.approx(oracles.hull_distance(a, b), abs=1e-6)


def test_fallback_agrees(rng):
    for _ in range(10):
        a = oracles.random_polytope(rng, n=6)
        b = oracles.random_polytope(rng, n=6, center=[5, 0, 0])
        assert proximity.fallback_distance(a, b).distance == pytest.approx(oracles.hull_distance(a, b), abs=1e-5)


def test_support_lowest_index_on_ties():
    p = Polytope(np.array([[1, 0, 0], [1, 1, 0], [0, 0, 0]], float))
    assert proximity.support_index(p, [1, 0, 0]) == 0
    assert np.array_equal(proximity.support(p, [0, 1, 0]), [1, 1, 0])


clouds = arrays(np.float64, st.tuples(st.integers(1, 12), st.just(3)), elements=st.floats(-3, 3))
shift = arrays(np.float64, (3,), elements=st.floats(-5, 5))


@given(clouds, clouds, shift)
def test_symmetry(a, b, t):
    b = b + t
    assert proximity.min_distance(a, b).distance == pytest.approx(proximity.min_distance(b, a).distance, abs=1e-9)


@given(clouds, clouds, shift, shift)
def test_translation_equivariance(a, b, s, t):
    b = b + s
    d0 = proximity.min_distance(a, b).distance
    d1 = proximity.min_distance(a + t, b + t).distance
    assert d1 == pytest.approx(d0, abs=1e-9)


@given(clouds, clouds, shift, st.floats(0.1, 10))
def test_scaling(a, b, s, k):
    b = b + s
    d0 = proximity.min_distance(a, b).distance
    d1 = proximity.min_distance(k * a, k * b).distance
    assert d1 == pytest.approx(k * d0, rel=1e-7, abs=1e-9)


@given(clouds, clouds, shift)
def test_vertex_pairs_bound_distance(a, b, s):
    b = b + s
    d = proximity.min_distance(a, b).distance
    assert d >= 0
    pair = np.linalg.norm(a[:, None] - b[None], axis=2).min()
    assert d <= pair + 1e-9
    assert (d == 0) == proximity.min_distance(a, b).intersecting
