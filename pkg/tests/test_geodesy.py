import json
import math

import numpy as np
import pytest

from lie3atlas import catalog
from lie3atlas.catalog import multiply, parse_spec
from lie3atlas.constructions import d_se2k, se2k_product_Q
from lie3atlas.errors import IntegrationEscape, StatisticalError, UnsupportedChart
from lie3atlas.geodesy import (DistanceBudget, GrowthType, ball_volume, distance_estimate,
                               geodesic_shoot, growth_exponent, growth_type_algebraic)
from lie3atlas.metric import metric_tensor


def h3_distance(p, q):
    """D_1 with Q = I is hyperbolic 3-space in horospherical coordinates."""
    v, w = math.exp(p[2]), math.exp(q[2])
    d2 = (p[0] - q[0]) ** 2 + (p[1] - q[1]) ** 2 + (v - w) ** 2
    return math.acosh(1 + d2 / (2 * v * w))


# -- geodesics ----------------------------------------------------------------------


def test_shoot_straight_line():
    c = geodesic_shoot(parse_spec("R^3"), None, [0, 0, 0], [1, 0, 0], 2.0, steps=16)
    np.testing.assert_allclose(c.samples[-1], [2, 0, 0], atol=1e-12)
    np.testing.assert_allclose(c.samples[:, 1:], 0, atol=1e-12)


def test_shoot_vertical_in_d1():
    t = 1.7
    c = geodesic_shoot(parse_spec("D:lambda=1"), None, [0, 0, 0], [0, 0, 1], t, steps=32)
    np.testing.assert_allclose(c.samples[-1], [0, 0, t], atol=1e-8)
    assert h3_distance(c.samples[0], c.samples[-1]) == pytest.approx(t, rel=1e-8)


def test_shoot_zero_time():
    c = geodesic_shoot(parse_spec("N3"), None, [1, 2, 3], [1, 1, 1], 0.0)
    assert np.all(c.samples == c.samples[0])


def test_shoot_rejects_few_steps_and_chartless():
    with pytest.raises(ValueError):
        geodesic_shoot(parse_spec("R^3"), None, [0, 0, 0], [1, 0, 0], 1.0, steps=4)
    with pytest.raises(UnsupportedChart):
        geodesic_shoot(parse_spec("SL2~"), None, [0, 0, 0], [1, 0, 0], 1.0)


def test_shoot_escape():
    with pytest.raises(IntegrationEscape):
        geodesic_shoot(parse_spec("D:lambda=1"), None, [0, 0, 0], [0, 0, 1], 30.0, steps=64, bound=10.0)


@pytest.mark.parametrize("text", ["D:lambda=-1", "N3", "SE2~", "C:lambda=0.5", "AffR", "J", "SU2"])
def test_speed_conservation(text, rng):
    spec = parse_spec(text)
    p = catalog.identity(spec)
    for _ in range(3):
        v = rng.normal(size=spec.dim)
        if spec.kind == "quat":
            v = np.concatenate([[0.0], v])
        c = geodesic_shoot(spec, None, p, v, 2.0, steps=200)
        g = metric_tensor(spec, None, c.samples)
        speed = np.sqrt(np.einsum("ni,nij,nj->n", c.velocities, g, c.velocities))
        assert np.ptp(speed) / speed.mean() < 1e-4


# -- distance -----------------------------------------------------------------------


def test_euclidean_distance():
    assert distance_estimate(parse_spec("R^3"), None, [0, 0, 0], [1, 2, 2]) == pytest.approx(3.0, abs=1e-6)


def test_d1_half_space():
    spec = parse_spec("D:lambda=1")
    assert distance_estimate(spec, None, [0, 0, 0], [1, 0, 0]) == pytest.approx(math.acosh(1.5), rel=0.01)
    rng = np.random.default_rng(5)
    for _ in range(4):
        p, q = rng.uniform(-1.5, 1.5, (2, 3))
        assert distance_estimate(spec, None, p, q) == pytest.approx(h3_distance(p, q), rel=0.01)


@pytest.mark.parametrize("k", [1, 3])
def test_se2k_product_metric_distance(k, rng):
    spec = parse_spec(f"SE2:k={k}")
    Q = se2k_product_Q(k)
    for _ in range(3):
        p = np.array([*rng.uniform(-1, 1, 2), rng.uniform(0, 2 * math.pi * k)])
        q = np.array([*rng.uniform(-1, 1, 2), rng.uniform(0, 2 * math.pi * k)])
        assert distance_estimate(spec, Q, p, q) == pytest.approx(float(d_se2k(k, p, q)), rel=1e-3)


def test_symmetry_and_triangle(rng):
    spec = parse_spec("N3")
    budget = DistanceBudget(symmetric=False)
    pts = rng.uniform(-1.5, 1.5, (3, 3))
    d = lambda a, b: distance_estimate(spec, None, pts[a], pts[b], budget)  # noqa: E731
    assert d(0, 1) == pytest.approx(d(1, 0), rel=0.02)
    assert d(0, 2) <= 1.02 * (d(0, 1) + d(1, 2))


def test_quotient_distance_is_min_over_translates():
    cover, quot = parse_spec("N3"), parse_spec("N3*")
    p, q = np.array([0.2, -0.4, 0.1]), np.array([0.9, 0.3, 0.35])
    dq = distance_estimate(quot, None, p, q)
    lifted = [distance_estimate(cover, None, p, multiply(cover, q, [0, 0, m])) for m in (-2, -1, 0, 1, 2)]
    assert dq <= 1.05 * min(lifted)
    assert dq == pytest.approx(min(lifted), rel=0.05)


def test_distance_chartless():
    with pytest.raises(UnsupportedChart):
        distance_estimate(parse_spec("PSL2:k=1"), None, [0, 0, 0], [1, 0, 0])


# -- volumes and growth ---------------------------------------------------------------------


def test_euclidean_ball():
    v = ball_volume(parse_spec("R^3"), None, 1.0)
    assert v.volume == pytest.approx(4 * math.pi / 3, rel=0.05)
    assert v.stderr > 0 and not v.warning


def test_compact_saturation():
    assert ball_volume(parse_spec("T^3"), None, 5.0).volume == pytest.approx(1.0, rel=1e-9)
    assert ball_volume(parse_spec("SU2"), None, 4.0).volume == pytest.approx(2 * math.pi ** 2, rel=0.01)
    assert ball_volume(parse_spec("SO3"), None, 4.0).volume == pytest.approx(math.pi ** 2, rel=0.01)


def test_small_sphere_ball():
    # geodesic ball of radius 1 on the unit 3-sphere: pi (2 r - sin 2r)
    v = ball_volume(parse_spec("SU2"), None, 1.0).volume
    assert v == pytest.approx(math.pi * (2 - math.sin(2)), rel=0.02)


def test_ball_volume_seeded():
    a = ball_volume(parse_spec("N3"), None, 2.0, samples=20000, seed=3)
    b = ball_volume(parse_spec("N3"), None, 2.0, samples=20000, seed=3)
    assert a == b


def test_heisenberg_doubling_ratio():
    v4 = ball_volume(parse_spec("N3"), None, 4.0).volume
    v8 = ball_volume(parse_spec("N3"), None, 8.0).volume
    assert v8 / v4 == pytest.approx(16.0, rel=0.15)


def test_growth_monotone_up_to_stderr():
    rep = growth_exponent(parse_spec("D:lambda=-1"), None, [2, 2.5, 3, 3.5, 4], samples=50000)
    for a, b, ea, eb in zip(rep.volumes, rep.volumes[1:], rep.stderr, rep.stderr[1:]):
        assert b >= a - 2 * (ea + eb)


def test_growth_examples():
    r3 = growth_exponent(parse_spec("R^3"), None, [2, 4, 6, 8])
    assert r3.exponent == pytest.approx(3.0, abs=0.4)
    assert r3.classification == GrowthType("polynomial", 3)
    aff = growth_exponent(parse_spec("AffR"), None, [2, 4, 6, 8, 12, 16, 20])
    assert aff.classification == GrowthType("exponential")
    out = json.loads(aff.to_json())
    assert {"radii", "volumes", "stderr", "exponent", "residual", "classification"} <= set(out)
    assert out["classification"] == "exponential"


def test_growth_slow_exponential_rate():
    # eigenvalues 0.3 +- 2.44i: the ball looks Euclidean at small radii, then
    # the local log-log slope climbs past any degree a 3-d group can have
    rep = growth_exponent(parse_spec("A:[[0.5,-2],[3,0.1]]"), None, [4, 8, 12, 16, 20], samples=50000)
    assert rep.classification == GrowthType("exponential")
    assert rep.classification == growth_type_algebraic(parse_spec("A:[[0.5,-2],[3,0.1]]"))


def test_growth_needs_radii():
    with pytest.raises(StatisticalError):
        growth_exponent(parse_spec("R^3"), None, [2, 4])


@pytest.mark.parametrize("text,expected", [
    ("T^3", "polynomial(0)"), ("SO3", "polynomial(0)"), ("R^1", "polynomial(1)"), ("RxT2", "polynomial(1)"),
    ("N3*", "polynomial(2)"), ("SE2:k=2", "polynomial(2)"), ("R2xT1", "polynomial(2)"),
    ("SE2~", "polynomial(3)"), ("R^3", "polynomial(3)"), ("N3", "polynomial(4)"),
    ("D:lambda=-1", "exponential"), ("AffR", "exponential"), ("J", "exponential"), ("SL2~", "exponential"),
    ("PSL2:k=3", "exponential"), ("C:lambda=0.5", "exponential"),
    ("A:[[0,0],[0,0]]", "polynomial(3)"), ("A:[[0,0],[1,0]]", "polynomial(4)"),
    ("A:[[0,-3],[3,0]]", "polynomial(3)"), ("A:[[1,2],[3,4]]", "exponential"),
])
def test_growth_type_algebraic(text, expected):
    assert str(growth_type_algebraic(parse_spec(text))) == expected
