"""Executable checks of explicit isometries and quasi-isometries.

Each ``verify_*`` function returns a :class:`VerificationReport` whose JSON
form is ``{name, pass, max_deviation, params, seed}``.  Random inputs come
from ``SeedSequence(seed)`` so a report is reproducible from its seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import catalog
from .catalog import GroupSpec, parse_spec
from .errors import BadSpec, DegenerateEndpoints
from .geodesy import DistanceBudget, distance_estimate
from .invariants import (QIConstants, fit_qi_constants, hausdorff_distance,
                         quasi_geodesic_constants, quasi_geodesic_pair)
from .metric import _as_Q, metric_tensor

TWO_PI = 2.0 * math.pi


@dataclass
class VerificationReport:
    name: str
    passed: bool
    max_deviation: float
    params: dict = field(default_factory=dict)
    seed: int = 0

    def to_dict(self) -> dict:
        return {"name": self.name, "pass": bool(self.passed),
                "max_deviation": float(self.max_deviation),
                "params": self.params, "seed": self.seed}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _rng(seed):
    return np.random.default_rng(np.random.SeedSequence(seed))


def _spec(s) -> GroupSpec:
    return parse_spec(s) if isinstance(s, str) else s


# -- SE(2) ---------------------------------------------------------------------


def verify_se2_left_invariance(samples: int = 1000, seed: int = 0, tol: float = 1e-12,
                               box: float = 5.0) -> VerificationReport:
    """Euclidean distance of ``R^3`` under left translation in the universal cover of SE(2).

    Samples ``(g, p, q)`` with coordinates in ``[-box, box]`` and reports
    ``max |d_E(g p, g q) - d_E(p, q)|``.
    """
    spec = GroupSpec("SE2tilde")
    rng = _rng(seed)
    g, p, q = (rng.uniform(-box, box, (samples, 3)) for _ in range(3))
    gp = catalog.multiply(spec, g, p)
    gq = catalog.multiply(spec, g, q)
    dev = np.abs(np.linalg.norm(gp - gq, axis=1) - np.linalg.norm(p - q, axis=1))
    m = float(dev.max()) if samples else 0.0
    return VerificationReport("se2-left-invariance", m < tol, m,
                              {"samples": samples, "tol": tol, "box": box}, seed)


def circle_distance(a, b, period: float = 1.0):
    """``min_m |m * period - (a - b)|``."""
    d = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
    d = np.mod(d, period)
    return np.minimum(d, period - d)


def d_cyl(p, q):
    """Flat product distance on ``R^2 x R/Z`` (circle of circumference 1)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    c = circle_distance(p[..., 2], q[..., 2], 1.0)
    return np.sqrt((p[..., 0] - q[..., 0]) ** 2 + (p[..., 1] - q[..., 1]) ** 2 + c ** 2)


def d_se2k(k: int, p, q):
    """Left-invariant distance on ``SE(2)_k`` with the angle rescaled by ``1/(2 pi k)``.

    ``d^2 = |(x, y) - (x', y')|^2 + (d_circle(theta, theta') / (2 pi k))^2``
    where the circle has circumference ``2 pi k``.
    """
    _check_k(k)
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    P = TWO_PI * k
    c = circle_distance(p[..., 2], q[..., 2], P) / P
    return np.sqrt((p[..., 0] - q[..., 0]) ** 2 + (p[..., 1] - q[..., 1]) ** 2 + c ** 2)


def _check_k(k):
    if int(k) != k or k < 1:
        raise BadSpec("need an integer k >= 1")


def cylinder_isometry(k: int, p) -> np.ndarray:
    """``(x, y, theta) -> (x, y, 2 pi k theta)`` from ``R^2 x R/Z`` onto ``SE(2)_k``."""
    _check_k(k)
    p = np.asarray(p, dtype=float)
    out = p.copy()
    out[..., 2] = TWO_PI * k * np.mod(p[..., 2], 1.0)
    return catalog.normalize_coords(GroupSpec("SE2k", k=int(k)), out)


def cylinder_isometry_inverse(k: int, p) -> np.ndarray:
    _check_k(k)
    p = np.asarray(p, dtype=float)
    out = p.copy()
    out[..., 2] = np.mod(p[..., 2] / (TWO_PI * k), 1.0)
    return out


def verify_cylinder_isometry(k: int, samples: int = 1000, seed: int = 0, tol: float = 1e-12,
                             box: float = 5.0) -> VerificationReport:
    """Max of ``|d_SE2k(Psi p, Psi q) - d_cyl(p, q)|`` over random pairs."""
    _check_k(k)
    rng = _rng(seed)
    p = np.column_stack([rng.uniform(-box, box, (samples, 2)), rng.uniform(0, 1, samples)])
    q = np.column_stack([rng.uniform(-box, box, (samples, 2)), rng.uniform(0, 1, samples)])
    dev = np.abs(d_se2k(k, cylinder_isometry(k, p), cylinder_isometry(k, q)) - d_cyl(p, q))
    m = float(dev.max()) if samples else 0.0
    return VerificationReport("cylinder-isometry", m < tol, m,
                              {"k": int(k), "samples": samples, "tol": tol}, seed)


def verify_eq4_left_invariance(k: int, samples: int = 1000, seed: int = 0, tol: float = 1e-12,
                               box: float = 5.0) -> VerificationReport:
    """Max of ``|d(g p, g q) - d(p, q)|`` for the rescaled product distance on ``SE(2)_k``."""
    _check_k(k)
    spec = GroupSpec("SE2k", k=int(k))
    P = TWO_PI * k
    rng = _rng(seed)

    def draw():
        return np.column_stack([rng.uniform(-box, box, (samples, 2)), rng.uniform(0, P, samples)])

    g, p, q = draw(), draw(), draw()
    d0 = d_se2k(k, p, q)
    d1 = d_se2k(k, catalog.multiply(spec, g, p), catalog.multiply(spec, g, q))
    m = float(np.abs(d1 - d0).max()) if samples else 0.0
    return VerificationReport("se2k-left-invariance", m < tol, m,
                              {"k": int(k), "samples": samples, "tol": tol}, seed)


def se2k_product_Q(k: int) -> np.ndarray:
    """Inner product whose left-invariant metric is the rescaled product distance."""
    _check_k(k)
    return np.diag([1.0, 1.0, (TWO_PI * k) ** -2])


# -- coverings -------------------------------------------------------------------


def _random_point(spec: GroupSpec, rng, box):
    if spec.kind == "quat":
        q = rng.normal(size=4)
        return q / np.linalg.norm(q)
    p = rng.uniform(-box, box, spec.chart.dim)
    return catalog.normalize_coords(spec, p)


def _quat_exp(xi):
    t = float(np.linalg.norm(xi))
    if t == 0:
        return np.array([1.0, 0, 0, 0])
    return np.concatenate([[math.cos(t)], math.sin(t) * xi / t])


def _pushforward(total, base, p, v, h):
    """Chart velocity of the projected curve through ``p`` with velocity ``v``."""
    if total.kind == "quat":
        # v is a Lie algebra vector; the curve is p exp(t v)
        a = catalog.multiply(total, p, _quat_exp(h * v))
        b = catalog.multiply(total, p, _quat_exp(-h * v))
        c = catalog.covering_projection(total, base, p)
        pa = catalog.covering_projection(total, base, a)
        pb = catalog.covering_projection(total, base, b)
        pa = pa if pa @ c >= 0 else -pa
        pb = pb if pb @ c >= 0 else -pb
        tangent = catalog._quat_mul(p, np.concatenate([[0.0], v]))
        return tangent, (pa - pb) / (2 * h), c
    pa = catalog.covering_projection(total, base, p + h * v)
    pb = catalog.covering_projection(total, base, p - h * v)
    c = catalog.covering_projection(total, base, p)
    return v, catalog.coord_difference(base, pb, pa) / (2 * h), c


def verify_covering_local_isometry(total, base, Q=None, samples: int = 200, seed: int = 0,
                                   tol: float = 1e-8, box: float = 5.0,
                                   h: float = 1e-5) -> VerificationReport:
    """Compare metric lengths of tangent vectors and of their projections.

    For each sampled ``p`` and unit chart vector ``v`` (a Lie algebra vector
    on quaternion groups) the relative deviation
    ``| |d pi(v)|_base - |v|_total | / |v|_total`` is recorded.  The
    differential is a central difference of the projection.

    Raises
    ------
    NotACovering
        for unsupported pairs.
    """
    total, base = _spec(total), _spec(base)
    Qm = _as_Q(total, Q)
    rng = _rng(seed)
    worst = 0.0
    for _ in range(samples):
        p = _random_point(total, rng, box)
        v = rng.normal(size=total.dim)
        v /= np.linalg.norm(v)
        tv, w, c = _pushforward(total, base, p, v, h)
        l0 = math.sqrt(tv @ metric_tensor(total, Qm, p) @ tv)
        l1 = math.sqrt(max(w @ metric_tensor(base, Qm, c) @ w, 0.0))
        worst = max(worst, abs(l1 - l0) / l0)
    return VerificationReport("covering-local-isometry", worst < tol, worst,
                              {"total": catalog.format_spec(total), "base": catalog.format_spec(base),
                               "Q": Qm.tolist(), "samples": samples, "tol": tol}, seed)


# -- quasi-isometries of the identity map -------------------------------------------------------


def _qi_L_grid():
    return np.unique(np.round(np.geomspace(1.0, 64.0, 241), 6))


@dataclass
class IdentityQIReport:
    L: float
    C: float
    box: float
    pairs: int
    seed: int
    max_ratio: float

    def to_dict(self) -> dict:
        return dict(vars(self))


def _identity_qi(spec, pts_a, pts_b, other_distance, budget):
    d_group = np.array([distance_estimate(spec, np.eye(3), a, b, budget)
                        for a, b in zip(pts_a, pts_b)])
    d_other = other_distance(pts_a, pts_b)
    qi = fit_qi_constants(d_group, d_other, _qi_L_grid())
    pos = (d_group > 1e-12) & (d_other > 1e-12)
    r = np.concatenate([d_other[pos] / d_group[pos], d_group[pos] / d_other[pos]])
    return qi, float(r.max()) if len(r) else 1.0


def _pairs_n3star(rng, samples, box):
    # uniform pairs, nearby pairs and pairs on one fiber
    n_near = samples // 4
    n_fiber = samples // 4
    n_far = samples - n_near - n_fiber

    def pt(n):
        return np.column_stack([rng.uniform(-box, box, (n, 2)), rng.uniform(0, 1, n)])

    a = pt(samples)
    b = np.empty_like(a)
    b[:n_far] = pt(n_far)
    b[n_far:n_far + n_near] = a[n_far:n_far + n_near] + rng.normal(scale=0.2, size=(n_near, 3))
    b[n_far + n_near:, :2] = a[n_far + n_near:, :2]
    b[n_far + n_near:, 2] = rng.uniform(0, 1, n_fiber)
    b[:, 2] = np.mod(b[:, 2], 1.0)
    return a, b


def n3star_qi_homeo(samples: int = 64, box: float = 4.0, seed: int = 0,
                    budget: DistanceBudget | None = None) -> QIConstants:
    """QI constants of the identity map from ``N3*`` (``Q = I``) to the flat ``R^2 x R/Z``.

    Pairs are drawn in ``[-box, box]^2 x [0, 1)``: a mix of uniform pairs,
    nearby pairs and pairs on a common fiber.  Group distances are
    :func:`distance_estimate` upper bounds.
    """
    return n3star_qi_report(samples, box, seed, budget)[0]


def n3star_qi_report(samples: int = 64, box: float = 4.0, seed: int = 0,
                     budget: DistanceBudget | None = None):
    spec = GroupSpec("N3star")
    rng = _rng(seed)
    a, b = _pairs_n3star(rng, samples, box)
    qi, ratio = _identity_qi(spec, a, b, d_cyl, budget or DistanceBudget.fast())
    return qi, IdentityQIReport(qi.L, qi.C, box, samples, seed, ratio)


def r3_n3_contrast(samples: int = 64, box: float = 4.0, seed: int = 0,
                   budget: DistanceBudget | None = None):
    """Same estimator for the identity map from ``N3`` to Euclidean ``R^3``.

    Points have ``|x|, |y| <= box`` and ``|z| <= box^2``, the shape of a
    Heisenberg ball, so the fitted constants grow with ``box``.
    """
    spec = GroupSpec("N3")
    rng = _rng(seed)

    def pt(n):
        return np.column_stack([rng.uniform(-box, box, (n, 2)), rng.uniform(-box * box, box * box, n)])

    a, b = pt(samples), pt(samples)
    qi, ratio = _identity_qi(spec, a, b, lambda p, q: np.linalg.norm(p - q, axis=-1),
                             budget or DistanceBudget.fast())
    return qi, IdentityQIReport(qi.L, qi.C, box, samples, seed, ratio)


# -- divergence of quasi-geodesics -------------------------------------------------------------------


@dataclass
class DivergenceRow:
    separation: float
    hausdorff: float
    L: float
    C: float

    def to_dict(self) -> dict:
        return dict(vars(self))


def divergence_experiment(lam: float, separations, seed: int = 0, step: float = 0.25,
                          max_points: int = 64, budget: DistanceBudget | None = None):
    """Hausdorff distance of ``gamma_a`` and ``gamma_b`` from ``0`` to ``(s, s, 0)`` in ``D_lambda``.

    Returns one :class:`DivergenceRow` per separation with the quasi-geodesic
    constants of ``gamma_a``.

    Raises
    ------
    DegenerateEndpoints
        for a zero separation.
    """
    spec = GroupSpec("Dlambda", lam=float(lam))
    rows = []
    for s in separations:
        s = float(s)
        if s == 0:
            raise DegenerateEndpoints("separation must be nonzero")
        ga, gb = quasi_geodesic_pair(lam, np.zeros(3), np.array([s, s, 0.0]), step=step)
        h = hausdorff_distance(spec, np.eye(3), ga, gb, budget=budget, max_points=max_points)
        qi = quasi_geodesic_constants(lam, ga, seed=seed)
        rows.append(DivergenceRow(s, h, qi.L, qi.C))
    return rows


def divergence_passes(rows) -> bool:
    """Hausdorff strictly increasing and ``L + C`` varying by less than a factor 2."""
    h = [r.hausdorff for r in rows]
    inc = all(b > a for a, b in zip(h, h[1:]))
    sizes = [r.L + r.C for r in rows]
    return inc and max(sizes) < 2.0 * min(sizes)
