"""Gromov hyperbolicity and the non-hyperbolicity construction for ``D_lambda``, ``lambda < 0``.

``D_lambda`` with ``Q = I`` has length element
``ds^2 = e^{-2z} dx^2 + e^{-2 lambda z} dy^2 + dz^2``.  The planes ``{y = c}``
and ``{x = c}`` are totally geodesic copies of the hyperbolic plane (the
second rescaled by ``1/|lambda|``), and ``(x, y, z) -> ((x, z), (y, z))``
compares ``D_lambda`` with a product of two hyperbolic planes.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .catalog import GroupSpec, as_element
from .errors import DegenerateEndpoints, IntegrationEscape, NotApplicable
from .geodesy import Curve, DistanceBudget, distance_estimate, geodesic_shoot
from .metric import _as_Q, frame_at
from . import catalog


@dataclass(frozen=True)
class QIConstants:
    """Quasi-isometry constants ``L >= 1``, ``C >= 0``."""

    L: float
    C: float

    def __post_init__(self):
        if not (self.L >= 1.0 and self.C >= 0.0):
            raise ValueError("need L >= 1 and C >= 0")


# -- hyperbolicity ------------------------------------------------------------


@dataclass
class HyperbolicityReport:
    scale: float
    delta_estimate: float
    samples: int
    seed: int
    max_distance: float = 0.0
    errors: int = 0

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def four_point_delta(D: np.ndarray) -> float:
    """Supremum over quadruples of ``(S_max - S_mid) / 2`` for a distance matrix."""
    D = np.asarray(D, dtype=float)
    n = D.shape[0]
    if n < 4:
        return 0.0
    quads = np.array(list(itertools.combinations(range(n), 4)))
    x, y, z, w = quads.T
    S = np.stack([D[x, y] + D[z, w], D[x, z] + D[y, w], D[x, w] + D[y, z]], axis=1)
    S.sort(axis=1)
    return float(max(0.0, 0.5 * np.max(S[:, 2] - S[:, 1])))


def sample_ball_points(spec: GroupSpec, Q, scale: float, samples: int, seed: int = 0,
                       inner: float = 0.5, legs: int = 2, plane_bias: float = 0.75) -> np.ndarray:
    """Random points of the closed ball of radius ``scale`` about the identity.

    Each point is the endpoint of a broken geodesic with ``legs`` pieces of
    total length uniform in ``[inner * scale, scale]``; by left-invariance
    and the triangle inequality it lies in the ball.  With probability
    ``plane_bias`` a leg direction is drawn inside a coordinate 2-plane of
    the orthonormalized frame: on solvable groups those planes carry long
    minimizing geodesics, while generic directions tend to wind and stay
    near the identity.  Sample ``i`` draws from the stream
    ``SeedSequence(seed, spawn_key=(i,))``.
    """
    Qm = _as_Q(spec, Q)
    n = spec.dim
    evals, evecs = np.linalg.eigh(Qm)
    Qinv_half = evecs @ np.diag(evals ** -0.5) @ evecs.T
    e = catalog.identity(spec)
    F = frame_at(spec, e)
    pts = []
    for i in range(samples):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))
        ell = scale * (inner + (1.0 - inner) * rng.random())
        cuts = np.sort(rng.random(legs - 1))
        parts = np.diff(np.concatenate([[0.0], cuts, [1.0]])) * ell
        p = e
        try:
            for L in parts:
                u = rng.normal(size=n)
                if n > 2 and rng.random() < plane_bias:
                    u[rng.integers(n)] = 0.0
                u /= np.linalg.norm(u)
                if L <= 0:
                    continue
                steps = int(max(32, math.ceil(8 * L)))
                c = geodesic_shoot(spec, Qm, e, F @ (Qinv_half @ u), L, steps, bound=1e12)
                p = catalog.multiply(spec, p, c.samples[-1])
        except IntegrationEscape:
            continue
        pts.append(p)
    return np.array(pts)


def hyperbolicity_delta(spec: GroupSpec, Q, scale: float, samples: int = 16, seed: int = 0,
                        budget: DistanceBudget | None = None) -> HyperbolicityReport:
    """Four-point estimate of the Gromov hyperbolicity constant at a given scale.

    ``samples`` points are drawn in the ball of radius ``scale`` about the
    identity; all pairwise distances come from :func:`distance_estimate`
    and ``delta`` is the supremum of the four-point defect.
    """
    if scale <= 0:
        raise ValueError("scale must be positive")
    pts = sample_ball_points(spec, Q, scale, samples, seed)
    k = len(pts)
    D = np.zeros((k, k))
    errors = 0
    for i in range(k):
        for j in range(i + 1, k):
            try:
                D[i, j] = D[j, i] = distance_estimate(spec, Q, pts[i], pts[j], budget)
            except Exception:  # noqa: BLE001 - counted and reported
                errors += 1
                D[i, j] = D[j, i] = np.nan
    ok = ~np.any(np.isnan(D), axis=1)
    delta = four_point_delta(D[np.ix_(ok, ok)])
    return HyperbolicityReport(float(scale), delta, k, int(seed), float(np.nanmax(D)) if k else 0.0, errors)


# -- hyperbolic plane ---------------------------------------------------------


@dataclass(frozen=True)
class H2Point:
    """Horospherical coordinates ``(x, z)``: ``ds^2 = e^{-2z} dx^2 + dz^2``."""

    x: float
    z: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.z)):
            raise ValueError("H2Point coordinates must be finite")


def _h2(x1, z1, x2, z2):
    """Vectorized hyperbolic distance in horospherical coordinates.

    Uses ``arccosh(1 + q) = 2 asinh(sqrt(q/2))`` with
    ``q = ((dx)^2 + (v - v')^2) / (2 v v')``, ``v = e^z``, written so that
    large ``|z|`` does not overflow.
    """
    x1, z1, x2, z2 = (np.asarray(a, dtype=float) for a in (x1, z1, x2, z2))
    zm = 0.5 * (z1 + z2)
    dz = z1 - z2
    # (v - v')^2 / (v v') = 4 sinh^2(dz/2);  dx^2 / (v v') = (dx e^{-zm})^2
    a = (x1 - x2) * np.exp(-zm)
    return 2.0 * np.arcsinh(np.hypot(0.5 * a, np.sinh(0.5 * dz)))


def h2_distance(a: H2Point, b: H2Point) -> float:
    """Hyperbolic distance ``arccosh(1 + ((du)^2 + (dv)^2) / (2 v v'))``, ``u = x``, ``v = e^z``."""
    return float(_h2(a.x, a.z, b.x, b.z))


def _check_lambda(lam):
    if not (-1.0 <= lam < 0.0):
        raise NotApplicable("construction needs lambda in [-1, 0)")


def qi_embed_H2xH2(p, lam: float = -1.0):
    """The map ``(x, y, z) -> ((x, z), (y, z))`` into a product of two hyperbolic planes."""
    p = np.asarray(p, dtype=float)
    return H2Point(float(p[0]), float(p[2])), H2Point(float(p[1]), float(p[2]))


def factor_distances(lam: float, p, q):
    """Distances in the two hyperbolic factors (vectorized over leading axes).

    The first factor has slope 1; the second carries
    ``e^{-2 lambda z} dy^2 + dz^2``, a hyperbolic plane scaled by ``1/|lambda|``.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    a = abs(lam)
    d1 = _h2(p[..., 0], p[..., 2], q[..., 0], q[..., 2])
    d2 = _h2(a * p[..., 1], lam * p[..., 2], a * q[..., 1], lam * q[..., 2]) / a
    return d1, d2


def max_factor_distance(lam: float, p, q):
    """Lower bound for the ``D_lambda`` distance (both projections are 1-Lipschitz)."""
    d1, d2 = factor_distances(lam, p, q)
    return np.maximum(d1, d2)


# -- closed-form hyperbolic geodesics ------------------------------------------


def _h2_geodesic(x1, z1, x2, z2, step):
    """Arclength-sampled geodesic between two points of the horospherical plane.

    Returns ``(s, x, z)`` with ``s`` from 0 to the length, spacing <= ``step``.
    """
    L = float(_h2(x1, z1, x2, z2))
    if L == 0.0:
        return np.zeros(1), np.array([x1]), np.array([z1])
    m = max(2, int(math.ceil(L / step)) + 1)
    s = np.linspace(0.0, L, m)
    if x1 == x2:
        sign = 1.0 if z2 > z1 else -1.0
        return s, np.full(m, float(x1)), z1 + sign * s
    # semicircle centred on the boundary at c, radius R, in (u, v) = (x, e^z);
    # work with logs to keep large separations finite
    v1, v2 = math.exp(z1), math.exp(z2)
    c = 0.5 * (x1 + x2) + 0.5 * (v1 * v1 - v2 * v2) / (x1 - x2)
    R = math.hypot(x1 - c, v1)

    def param(x, z):
        du = x - c
        if du >= 0:
            return math.log((R + du)) - z
        return -(math.log(R - du) - z)

    t1, t2 = param(x1, z1), param(x2, z2)
    t = t1 + np.sign(t2 - t1) * s
    x = c + R * np.tanh(t)
    at = np.abs(t)
    log_cosh = at + np.log1p(np.exp(-2.0 * at)) - math.log(2.0)
    z = math.log(R) - log_cosh
    x[0], z[0], x[-1], z[-1] = x1, z1, x2, z2
    return s, x, z


def _leg_in_y_plane(lam, a, b, step):
    """Geodesic of the plane ``{y = a_y}`` from ``a`` to ``b`` (``b_y == a_y``)."""
    s, x, z = _h2_geodesic(a[0], a[2], b[0], b[2], step)
    return s, np.stack([x, np.full_like(x, a[1]), z], axis=1)


def _leg_in_x_plane(lam, a, b, step):
    """Geodesic of the plane ``{x = a_x}``: rescaled hyperbolic plane with slope ``lambda``."""
    k = abs(lam)
    s, u, w = _h2_geodesic(k * a[1], lam * a[2], k * b[1], lam * b[2], step * k)
    return s / k, np.stack([np.full_like(u, a[0]), u / k, w / lam], axis=1)


def _concat(legs):
    times, pts = [], []
    offset = 0.0
    for s, P in legs:
        if times:
            s, P = s[1:], P[1:]
        if len(s) == 0:
            continue
        times.append(s + offset)
        pts.append(P)
        offset = times[-1][-1]
    return np.concatenate(times), np.concatenate(pts)


def quasi_geodesic_pair(lam: float, p1, p2, step: float = 0.25):
    """The two piecewise-geodesic curves ``gamma_a`` and ``gamma_b`` from ``p1`` to ``p2``.

    ``gamma_a`` runs in ``{y = y1}`` to ``(x2, y1, z2)`` and then in
    ``{x = x2}``; ``gamma_b`` runs in ``{x = x1}`` to ``(x1, y2, z2)`` and
    then in ``{y = y2}``.  Legs are exact hyperbolic geodesics sampled by
    arclength (spacing ``<= step``).

    Raises
    ------
    DegenerateEndpoints
        if exactly one of ``x1 == x2``, ``y1 == y2`` holds or the curves
        would otherwise degenerate.
    """
    _check_lambda(lam)
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    if np.array_equal(p1, p2):
        c = Curve(np.stack([p1, p2]), np.array([0.0, 1.0]))
        return c, Curve(c.samples.copy(), c.times.copy())
    if p1[0] == p2[0] or p1[1] == p2[1]:
        raise DegenerateEndpoints("need x1 != x2 and y1 != y2")
    mid_a = np.array([p2[0], p1[1], p2[2]])
    mid_b = np.array([p1[0], p2[1], p2[2]])
    ta, Pa = _concat([_leg_in_y_plane(lam, p1, mid_a, step), _leg_in_x_plane(lam, mid_a, p2, step)])
    tb, Pb = _concat([_leg_in_x_plane(lam, p1, mid_b, step), _leg_in_y_plane(lam, mid_b, p2, step)])
    return Curve(Pa, ta), Curve(Pb, tb)


# -- Hausdorff distance ---------------------------------------------------------


def hausdorff_distance(spec: GroupSpec, Q, c1: Curve, c2: Curve, budget: DistanceBudget | None = None,
                       max_points: int = 64) -> float:
    """Symmetrized Hausdorff distance between the sample sets of two curves.

    Each curve is thinned to at most ``max_points`` samples.  For ``D_lambda``
    with ``Q = I`` and ``lambda < 0`` the factor distances bound the true
    distance (``max <= d <= sum``); pairs that cannot affect the result are
    skipped before calling :func:`distance_estimate`.
    """
    A = _thin(c1.samples, max_points)
    B = _thin(c2.samples, max_points)
    if A.shape == B.shape and np.array_equal(A, B):
        return 0.0
    Qm = _as_Q(spec, Q)
    bounded = spec.family == "Dlambda" and spec.lam < 0 and np.allclose(Qm, np.eye(3))
    budget = budget or DistanceBudget.fast()
    cache: dict = {}

    def dist(i, j, a, b):
        key = (i, j)
        if key not in cache:
            cache[key] = distance_estimate(spec, Qm, a, b, budget)
        return cache[key]

    if bounded:
        d1, d2 = factor_distances(spec.lam, A[:, None, :], B[None, :, :])
        lo, hi = np.maximum(d1, d2), d1 + d2
    else:
        lo = np.zeros((len(A), len(B)))
        hi = np.full((len(A), len(B)), np.inf)

    def directed(lo, hi, P, R, swap):
        # max over rows of min over columns
        row_lo = lo.min(axis=1)
        row_hi = hi.min(axis=1)
        floor = row_lo.max()
        best = 0.0
        for i in np.argsort(-row_hi):
            if row_hi[i] <= max(best, floor) and np.isfinite(row_hi[i]):
                break
            m = np.inf
            for j in np.argsort(lo[i]):
                if lo[i, j] >= m:
                    break
                dij = dist(j, i, R[j], P[i]) if swap else dist(i, j, P[i], R[j])
                m = min(m, dij)
                if m <= best:
                    break
            best = max(best, m)
        # rows skipped by the floor test contribute at most floor, and the
        # row attaining floor has true value >= floor
        return max(best, floor)

    h12 = directed(lo, hi, A, B, False)
    h21 = directed(lo.T, hi.T, B, A, True)
    return float(max(h12, h21))


def _thin(P, m):
    P = np.asarray(P, dtype=float)
    if len(P) <= m:
        return P
    idx = np.unique(np.round(np.linspace(0, len(P) - 1, m)).astype(int))
    return P[idx]


# -- quasi-geodesic constants -----------------------------------------------------


def quasi_geodesic_constants(lam: float, curve: Curve, L_grid=None, pairs: int = 4000,
                             seed: int = 0) -> QIConstants:
    """Smallest ``(L, C)`` on a grid with ``|s-t|/L - C <= d <= L |s-t| + C``.

    ``d`` is the max-factor distance of the product of hyperbolic planes.
    For each ``L`` the least admissible ``C`` is computed and the pair
    minimizing ``L + C`` is returned.  Weighting ``C`` by the curve length
    instead would let ``C`` grow with the curve and hide a bad ``L``.

    Raises
    ------
    DegenerateEndpoints
        for a constant curve.
    """
    s = np.asarray(curve.times, dtype=float)
    P = np.asarray(curve.samples, dtype=float)
    T = float(s[-1] - s[0])
    if T <= 0 or np.allclose(P, P[0]):
        raise DegenerateEndpoints("constant curve")
    if L_grid is None:
        L_grid = np.round(np.arange(1.0, 4.0001, 0.05), 10)
    n = len(s)
    if n * (n - 1) // 2 <= pairs:
        i, j = np.triu_indices(n, 1)
    else:
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        i = rng.integers(0, n, pairs)
        j = rng.integers(0, n, pairs)
        keep = i != j
        i, j = i[keep], j[keep]
    ds = np.abs(s[i] - s[j])
    if lam is None:
        d = np.linalg.norm(P[i] - P[j], axis=1)
    else:
        d = max_factor_distance(lam, P[i], P[j])
    return fit_qi_constants(ds, d, L_grid)


def fit_qi_constants(d_src, d_dst, L_grid) -> QIConstants:
    """Grid point ``(L, C)`` minimizing ``L + C`` subject to the QI inequalities.

    ``C(L)`` is the least ``C`` with ``d_src / L - C <= d_dst <= L d_src + C``
    on every pair.
    """
    d_src = np.asarray(d_src, dtype=float)
    d_dst = np.asarray(d_dst, dtype=float)
    best = None
    for L in L_grid:
        C = max(0.0, float(np.max(d_src / L - d_dst, initial=0.0)),
                float(np.max(d_dst - L * d_src, initial=0.0)))
        score = L + C
        if best is None or score < best[0] - 1e-12:
            best = (score, float(L), C)
    return QIConstants(best[1], best[2])
