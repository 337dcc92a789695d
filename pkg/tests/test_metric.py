import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lie3atlas import catalog
from lie3atlas.catalog import identity, multiply, parse_spec
from lie3atlas.errors import DegeneratePlane
from lie3atlas.geodesy import Curve
from lie3atlas.metric import (FrameMetric, curve_length, frame_at, metric_tensor,
                              sectional_curvature, volume_density)

from conftest import CHARTABLE, random_elements

FLAT_CHARTS = [t for t in CHARTABLE if parse_spec(t).kind != "quat"]


def test_frame_metric_validation():
    FrameMetric(np.diag([1.0, 2.0, 3.0]))
    with pytest.raises(ValueError):
        FrameMetric(np.array([[1.0, 0.1], [0.0, 1.0]]))
    with pytest.raises(np.linalg.LinAlgError):
        FrameMetric(np.diag([1.0, -1.0]))
    Q = FrameMetric(np.array([[2.0, 0.5, 0], [0.5, 1.0, 0], [0, 0, 3.0]]))
    again = FrameMetric.from_json(Q.to_json())
    np.testing.assert_array_equal(again.Q, Q.Q)
    assert len(json.loads(Q.to_json())["Q"]) == 9


def test_d_lambda_frame_example():
    lam, p = -0.7, np.array([0.4, -1.1, 0.9])
    F = frame_at(parse_spec("D:lambda=-0.7"), p)
    np.testing.assert_allclose(F, [[math.exp(0.9), 0, 0], [0, math.exp(lam * 0.9), 0], [0, 0, -1]])


def test_se2_frame_example():
    th = 0.83
    F = frame_at(parse_spec("SE2~"), [1.5, -2.0, th])
    np.testing.assert_allclose(F, [[math.cos(th), -math.sin(th), 0], [math.sin(th), math.cos(th), 0], [0, 0, 1]])


@pytest.mark.parametrize("text", CHARTABLE)
def test_frame_is_left_translate_of_identity_frame(text, rng):
    spec = parse_spec(text)
    e = identity(spec)
    F0 = frame_at(spec, e)
    h = 1e-6
    for p in random_elements(spec, rng, 5):
        F = frame_at(spec, p)
        for i in range(spec.dim):
            a = multiply(spec, p, catalog.normalize_coords(spec, e + h * F0[:, i]))
            b = multiply(spec, p, catalog.normalize_coords(spec, e - h * F0[:, i]))
            if spec.kind == "quat":
                b = b if a @ b >= 0 else -b
                fd = (a - b) / (2 * h)
            else:
                fd = catalog.coord_difference(spec, b, a) / (2 * h)
            np.testing.assert_allclose(fd, F[:, i], atol=1e-6)


def test_metric_tensor_examples():
    z = 0.6
    for lam in (1.0, -1.0, 0.3):
        g = metric_tensor(parse_spec(f"D:lambda={lam}"), None, [2.0, -3.0, z])
        np.testing.assert_allclose(g, np.diag([math.exp(-2 * z), math.exp(-2 * lam * z), 1.0]), rtol=1e-14)
    for text in FLAT_CHARTS:
        spec = parse_spec(text)
        np.testing.assert_allclose(metric_tensor(spec, None, identity(spec)), np.eye(spec.dim), atol=1e-15)
    np.testing.assert_allclose(metric_tensor(parse_spec("SE2~"), None, [3.0, 1.0, 2.2]), np.eye(3), atol=1e-15)


@pytest.mark.parametrize("text", FLAT_CHARTS)
def test_metric_tensor_left_invariant(text, rng):
    """Pullback of g at g*p under dL_g equals g at p."""
    spec = parse_spec(text)
    n = spec.dim
    M = rng.normal(size=(n, n))
    Q = M @ M.T + n * np.eye(n)
    h = 1e-6
    for _ in range(5):
        g0, p = random_elements(spec, rng, 2)
        J = np.empty((n, n))
        for i in range(n):
            dp = np.eye(n)[i] * h
            J[:, i] = catalog.coord_difference(spec, multiply(spec, g0, p - dp), multiply(spec, g0, p + dp)) / (2 * h)
        pulled = J.T @ metric_tensor(spec, Q, multiply(spec, g0, p)) @ J
        np.testing.assert_allclose(pulled, metric_tensor(spec, Q, p), rtol=1e-6, atol=1e-6)


def test_metric_symmetric_positive(chartable, rng):
    spec = chartable
    if spec.kind == "quat":
        pytest.skip("quaternion tensors are degenerate along the radial direction")
    g = metric_tensor(spec, None, random_elements(spec, rng, 50))
    np.testing.assert_allclose(g, np.swapaxes(g, -1, -2), atol=1e-14)
    assert np.all(np.linalg.eigvalsh(g) > 0)


def test_curve_length_examples():
    spec = parse_spec("R^3")
    assert curve_length(spec, None, Curve(np.zeros((5, 3)), np.arange(5.0))) == 0.0
    seg = Curve(np.linspace([0, 0, 0], [1, 2, 2], 7), np.linspace(0, 1, 7))
    assert curve_length(spec, None, seg) == pytest.approx(3.0, abs=1e-12)
    t = 2.5
    vert = Curve(np.linspace([0.3, 0.4, 0.0], [0.3, 0.4, t], 11), np.linspace(0, 1, 11))
    for lam in (1.0, -0.5):
        assert curve_length(parse_spec(f"D:lambda={lam}"), None, vert) == pytest.approx(t, rel=1e-12)
    with pytest.raises(ValueError):
        curve_length(spec, None, np.zeros((1, 3)))


def test_curve_length_additive():
    spec = parse_spec("D:lambda=-1")
    P = np.column_stack([np.linspace(0, 2, 41), np.sin(np.linspace(0, 3, 41)), np.linspace(-1, 1, 41)])
    whole = curve_length(spec, None, P, subdivide=8)
    parts = curve_length(spec, None, P[:21], subdivide=8) + curve_length(spec, None, P[20:], subdivide=8)
    assert whole == pytest.approx(parts, rel=1e-12)


def test_volume_density_examples():
    assert volume_density(parse_spec("R^3"), None, [1, 2, 3]) == pytest.approx(1.0)
    assert volume_density(parse_spec("SE2~"), None, [1, 2, 3]) == pytest.approx(1.0)
    z = 0.7
    for lam in (1.0, -0.4, 0.5):
        v = volume_density(parse_spec(f"D:lambda={lam}"), None, [0, 0, z])
        assert v == pytest.approx(math.exp(-(1 + lam) * z), rel=1e-12)


# -- curvature -------------------------------------------------------------------------


def _random_plane(spec, p, rng):
    if spec.kind == "quat":
        u, v = rng.normal(size=(2, 3))
        return (catalog._quat_mul(p, np.concatenate([[0.0], u])),
                catalog._quat_mul(p, np.concatenate([[0.0], v])))
    return rng.normal(size=(2, spec.dim))


def _curvatures(text, rng, n, Q=None, box=1.5):
    spec = parse_spec(text)
    out = []
    for p in random_elements(spec, rng, n, box=box):
        u, v = _random_plane(spec, p, rng)
        out.append(sectional_curvature(spec, Q, p, u, v))
    return np.array(out)


def test_flat_curvature(rng):
    for text in ("R^3", "T^3", "SE2~"):
        assert np.max(np.abs(_curvatures(text, rng, 10))) < 1e-6


def test_hyperbolic_curvature(rng):
    np.testing.assert_allclose(_curvatures("D:lambda=1", rng, 10), -1.0, atol=1e-4)
    for lam in (0.5, 2.0):
        np.testing.assert_allclose(_curvatures(f"C:lambda={lam}", rng, 10), -lam * lam, atol=1e-4)


def test_sphere_curvature_constant(rng):
    K = _curvatures("SU2", rng, 10)
    assert K.min() > 0 and np.ptp(K) / K.mean() < 1e-3
    np.testing.assert_allclose(_curvatures("SO3", rng, 5), K.mean(), rtol=1e-3)


@settings(max_examples=25, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.floats(0.2, 3), st.floats(-3, 3))
def test_curvature_plane_invariance(a, b, c, s, t):
    spec = parse_spec("D:lambda=-0.5")
    p = np.array([a, b, c])
    u = np.array([1.0, 0.3, -0.2])
    v = np.array([0.1, 1.0, 0.5])
    K = sectional_curvature(spec, None, p, u, v)
    K2 = sectional_curvature(spec, None, p, s * u + t * v, v)
    assert K2 == pytest.approx(K, abs=1e-6)


def test_degenerate_plane():
    with pytest.raises(DegeneratePlane):
        sectional_curvature(parse_spec("R^3"), None, [0, 0, 0], [1, 2, 3], [2, 4, 6])
