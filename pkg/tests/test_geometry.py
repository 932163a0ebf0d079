import numpy as np
import pytest
from hypothesis import given, strategies as st

from kplab.geometry import (GroupPoint, point, identity, compose, inverse, dilate,
                            quasi_norm, quasi_distance, boundary_distance,
                            extension_metric, allclose)
from conftest import batch_points

finite = st.floats(-1e3, 1e3, allow_nan=False)
pos = st.floats(0.01, 100.0)


def hpoint(x, y, t):
    return point([x], [y], t)


def test_compose_example():
    assert allclose(compose(point(1, 0, 0), point(0, 0, 2)), point(1, -2, 2))


def test_compose_identity():
    g = point(0.3, -1.2, 0.7)
    assert allclose(compose(identity(1), g), g)
    assert allclose(compose(g, identity(1)), g)


def test_inverse_examples():
    assert allclose(inverse(point(1, 2, 3)), point(-1, -5, -3))
    assert allclose(inverse(identity(1)), identity(1))


@given(finite, finite, finite)
def test_inverse_law(x, y, t):
    g = hpoint(x, y, t)
    assert allclose(compose(inverse(g), g), identity(1), atol=1e-9 * (1 + abs(x) * abs(t)))
    assert allclose(inverse(inverse(g)), g, atol=1e-9)


def test_dilate_examples():
    assert allclose(dilate(2, point(1, 1, 1)), point(2, 8, 4))
    g = point(0.5, -0.25, 2.0)
    assert allclose(dilate(1, g), g)


@given(pos, pos, finite, finite, finite)
def test_dilate_semigroup(r, s, x, y, t):
    g = hpoint(x, y, t)
    assert allclose(dilate(r, dilate(s, g)), dilate(r * s, g), rtol=1e-9, atol=1e-9)


def test_dilate_rejects_nonpositive():
    with pytest.raises(ValueError):
        dilate(0.0, point(1, 1, 1))


def test_quasi_norm_examples():
    assert quasi_norm(point(1, 8, 4)) == pytest.approx(5.0, abs=1e-14)
    assert quasi_norm(identity(1)) == 0.0


def test_quasi_norm_homogeneity_batch(rng):
    g = batch_points(rng, 10_000, 1)
    for r in (0.3, 2.0, 7.5):
        lhs = quasi_norm(dilate(r, g))
        rhs = r * quasi_norm(g)
        assert np.max(np.abs(lhs - rhs) / np.maximum(rhs, 1e-12)) < 1e-12


def test_associativity_batch(rng):
    for m in (1, 2):
        a = batch_points(rng, 10_000, m)
        b = batch_points(rng, 10_000, m)
        c = batch_points(rng, 10_000, m)
        lhs = compose(compose(a, b), c)
        rhs = compose(a, compose(b, c))
        scale = 1 + np.abs(rhs.Y)
        assert np.max(np.abs(lhs.X - rhs.X)) < 1e-12
        assert np.max(np.abs(lhs.Y - rhs.Y) / scale) < 1e-12
        assert np.max(np.abs(lhs.t - rhs.t)) < 1e-12


def test_quasi_distance_examples(rng):
    g = point(0.4, 1.0, -0.3)
    assert quasi_distance(g, g) == 0.0
    assert quasi_distance(point(0, 0, 0), point(1, 0, 0)) == pytest.approx(1.0, abs=1e-14)
    a = batch_points(rng, 1000, 1)
    b = batch_points(rng, 1000, 1)
    assert np.allclose(quasi_distance(a, b), quasi_distance(b, a), atol=1e-14)


def test_boundary_distance_examples():
    g = point(0.2, 0.5, 0.1)
    assert boundary_distance(g, g) == 0.0
    assert boundary_distance(point(0, 1, 0), point(1, 0, 1)) == pytest.approx(2.0, abs=1e-14)


def test_boundary_distance_not_symmetric():
    a = point(0.0, 1.0, 0.0)
    b = point(3.0, 0.0, 1.0)
    # d(a,b) = 3 + |1 - 3|^(1/3) + 1, d(b,a) = 3 + 1 + 1
    assert float(boundary_distance(a, b)) == pytest.approx(4 + 2 ** (1 / 3), abs=1e-12)
    assert float(boundary_distance(b, a)) == pytest.approx(5.0, abs=1e-12)


def test_comparability_constants_fresh_samples():
    # two-sided band sampled once over the [-2, 2] box (seed 314159, 1e5 pairs):
    # ratio d_boundary / d_K observed in [0.800, 1.199] for m=1 and
    # [0.841, 1.154] for m=2; asserted here on fresh draws with slack.
    for m, lo, hi in ((1, 0.75, 1.25), (2, 0.80, 1.20)):
        rng = np.random.default_rng(987)
        a = batch_points(rng, 1000, m)
        b = batch_points(rng, 1000, m)
        dk = quasi_distance(a, b)
        db = boundary_distance(a, b)
        mask = dk > 1e-9
        ratio = db[mask] / dk[mask]
        assert lo < ratio.min() and ratio.max() < hi


def test_pseudo_triangle_constant_fresh_samples():
    # C-hat sampled once at 1.0328 (m=1, same box and seed as above); the
    # recorded fixture is 1.05 and is asserted on fresh triples.
    C_HAT = 1.05
    rng = np.random.default_rng(2718)
    for m in (1, 2):
        a = batch_points(rng, 20_000, m)
        b = batch_points(rng, 20_000, m)
        c = batch_points(rng, 20_000, m)
        lhs = quasi_distance(a, c)
        rhs = quasi_distance(a, b) + quasi_distance(b, c)
        assert np.all(lhs <= C_HAT * rhs + 1e-12)


def test_extension_metric_examples():
    assert extension_metric(point(0, 0, 0), point(0, 4, 0)) == pytest.approx(2.0, abs=1e-14)
    g = point(1.0, -2.0, 0.5)
    assert extension_metric(g, g) == 0.0


def test_extension_metric_triangle_inequality(rng):
    for m in (1, 2):
        a = batch_points(rng, 10_000, m)
        b = batch_points(rng, 10_000, m)
        c = batch_points(rng, 10_000, m)
        lhs = extension_metric(a, c)
        rhs = extension_metric(a, b) + extension_metric(b, c)
        assert np.all(lhs <= rhs + 1e-12)


def test_dimension_mismatch_rejected():
    with pytest.raises(ValueError):
        compose(point(1, 1, 0), GroupPoint(np.zeros(2), np.zeros(2), 0.0))


def test_nonfinite_rejected():
    with pytest.raises(ValueError):
        point(np.nan, 0, 0)
