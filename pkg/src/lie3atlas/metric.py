"""Left-invariant Riemannian metrics defined by an inner product on the Lie algebra.

A metric is fixed by a :class:`FrameMetric` ``Q``: the Gram matrix of the
left-invariant frame ``E_1..E_n`` returned by :func:`frame_at`.  In chart
coordinates the tensor is ``g = F^{-T} Q F^{-1}`` with ``F`` the frame
matrix.  Derivatives of ``g`` (Christoffel symbols, curvature) are taken
by central finite differences; there is no closed-form curvature path.

Quaternion groups use a 4-dimensional chart; computations that need a
genuine 3-dimensional chart go through :class:`WorkingChart`, which for
``SU2``/``SO3`` is the exponential chart ``xi -> p exp(xi)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import catalog
from .catalog import GroupSpec, as_element, coord_difference, mat_exp_2x2
from .errors import DegeneratePlane, UnsupportedChart

FD_REL_STEP = 1e-4


@dataclass(frozen=True, eq=False)
class FrameMetric:
    """Symmetric positive definite inner product on the Lie algebra."""

    Q: np.ndarray

    def __post_init__(self):
        Q = np.array(self.Q, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise ValueError(f"Q must be square, got shape {Q.shape}")
        if np.max(np.abs(Q - Q.T), initial=0.0) > 1e-14:
            raise ValueError("Q must be symmetric")
        np.linalg.cholesky(Q)  # raises LinAlgError if not positive definite
        Q.setflags(write=False)
        object.__setattr__(self, "Q", Q)

    @classmethod
    def identity(cls, spec_or_dim) -> "FrameMetric":
        n = spec_or_dim if isinstance(spec_or_dim, int) else spec_or_dim.dim
        return cls(np.eye(n))

    @property
    def dim(self) -> int:
        return self.Q.shape[0]

    def to_json(self) -> str:
        return json.dumps({"Q": [float(v) for v in self.Q.ravel()]})

    @classmethod
    def from_json(cls, text: str) -> "FrameMetric":
        flat = np.asarray(json.loads(text)["Q"], dtype=float)
        n = int(round(np.sqrt(flat.size)))
        if n * n != flat.size:
            raise ValueError("Q must hold a square number of entries")
        return cls(flat.reshape(n, n))


def _as_Q(spec: GroupSpec, Q) -> np.ndarray:
    if Q is None:
        return np.eye(spec.dim)
    if isinstance(Q, FrameMetric):
        Q = Q.Q
    Q = np.asarray(Q, dtype=float)
    if Q.shape != (spec.dim, spec.dim):
        raise ValueError(f"{spec}: Q must be {spec.dim}x{spec.dim}")
    return Q


# -- frames -------------------------------------------------------------------

def frame_at(spec: GroupSpec, p) -> np.ndarray:
    """Left-invariant frame at ``p`` as a ``(chart_dim, n)`` matrix of columns ``E_i``.

    Vectorized: ``p`` of shape ``(..., d)`` gives ``(..., d, n)``.
    """
    X = as_element(spec, p)
    kind = spec.kind
    shape = X.shape[:-1]
    if kind == "abelian":
        return np.broadcast_to(np.eye(spec.dim), shape + (spec.dim, spec.dim)).copy()
    if kind == "heis":
        F = np.zeros(shape + (3, 3))
        F[..., 0, 0] = F[..., 1, 1] = F[..., 2, 2] = 1.0
        F[..., 2, 0] = 2.0 * X[..., 1]
        F[..., 2, 1] = -2.0 * X[..., 0]
        return F
    if kind == "se2":
        c, s = np.cos(X[..., 2]), np.sin(X[..., 2])
        F = np.zeros(shape + (3, 3))
        F[..., 0, 0], F[..., 0, 1] = c, -s
        F[..., 1, 0], F[..., 1, 1] = s, c
        F[..., 2, 2] = 1.0
        return F
    if kind == "semidirect":
        F = np.zeros(shape + (3, 3))
        F[..., :2, :2] = mat_exp_2x2(spec.matrix, X[..., 2])
        F[..., 2, 2] = -1.0
        return F
    if kind == "affr":
        F = np.zeros(shape + (2, 2))
        F[..., 0, 0] = np.exp(X[..., 1])
        F[..., 1, 1] = -1.0
        return F
    # quaternions: E_i(q) = q * e_i
    units = np.eye(4)[1:]
    return np.stack([catalog._quat_mul(X, u) for u in units], axis=-1)


def inverse_frame(spec: GroupSpec, p) -> np.ndarray:
    """Map from chart tangent vectors to frame components (``(..., n, d)``)."""
    X = as_element(spec, p)
    kind = spec.kind
    if kind == "semidirect":
        Finv = np.zeros(X.shape[:-1] + (3, 3))
        Finv[..., :2, :2] = mat_exp_2x2(spec.matrix, -X[..., 2])
        Finv[..., 2, 2] = -1.0
        return Finv
    if kind == "quat":
        # w -> Im(conj(q) w), valid on tangent vectors
        return np.swapaxes(frame_at(spec, X), -1, -2)
    return np.linalg.inv(frame_at(spec, X))


def metric_tensor(spec: GroupSpec, Q, p) -> np.ndarray:
    """Coordinate metric tensor ``g = F^{-T} Q F^{-1}`` at ``p`` (vectorized).

    For quaternion charts the 4x4 result is degenerate along the radial
    direction; it is the inner product of tangent vectors of the sphere.
    """
    Qm = _as_Q(spec, Q)
    Finv = inverse_frame(spec, p)
    return np.swapaxes(Finv, -1, -2) @ Qm @ Finv


def volume_density(spec: GroupSpec, Q, p) -> float:
    """Riemannian volume density ``sqrt(det g)`` in chart coordinates.

    For quaternion charts this is the density relative to the round
    unit-sphere measure, ``sqrt(det Q)``.
    """
    Qm = _as_Q(spec, Q)
    if spec.kind == "quat":
        as_element(spec, p)
        return float(np.sqrt(np.linalg.det(Qm)))
    return np.sqrt(np.linalg.det(metric_tensor(spec, Qm, p)))


# -- working charts -----------------------------------------------------------

def _quat_exp(xi):
    xi = np.asarray(xi, dtype=float)
    th = np.linalg.norm(xi, axis=-1)
    sinc = np.where(th > 1e-12, np.sin(th) / np.where(th > 1e-12, th, 1.0), 1.0 - th * th / 6.0)
    return np.concatenate([np.cos(th)[..., None], sinc[..., None] * xi], axis=-1)


def _quat_log(q):
    q = np.asarray(q, dtype=float)
    w = np.clip(q[..., 0], -1.0, 1.0)
    v = q[..., 1:]
    s = np.linalg.norm(v, axis=-1)
    th = np.arctan2(s, w)
    fac = np.where(s > 1e-12, th / np.where(s > 1e-12, s, 1.0), 1.0)
    return fac[..., None] * v


def _dexp_left(xi):
    """Left-trivialized differential of the quaternion exponential (3x3)."""
    xi = np.asarray(xi, dtype=float)
    th = np.linalg.norm(xi, axis=-1)
    safe = np.where(th > 1e-8, th, 1.0)
    n = xi / safe[..., None]
    a = np.where(th > 1e-8, np.sin(th) * np.cos(th) / safe, 1.0 - 2.0 * th * th / 3.0)
    b = np.where(th > 1e-8, np.sin(th) ** 2 / safe, th)
    nn = n[..., :, None] * n[..., None, :]
    eye = np.eye(3)
    cross = np.zeros(xi.shape[:-1] + (3, 3))
    cross[..., 0, 1], cross[..., 0, 2] = -n[..., 2], n[..., 1]
    cross[..., 1, 0], cross[..., 1, 2] = n[..., 2], -n[..., 0]
    cross[..., 2, 0], cross[..., 2, 1] = -n[..., 1], n[..., 0]
    small = (th <= 1e-8)[..., None, None]
    W = nn + a[..., None, None] * (eye - nn) - b[..., None, None] * cross
    W_small = eye - xi_cross(xi)
    return np.where(small, W_small, W)


def xi_cross(xi):
    xi = np.asarray(xi, dtype=float)
    C = np.zeros(xi.shape[:-1] + (3, 3))
    C[..., 0, 1], C[..., 0, 2] = -xi[..., 2], xi[..., 1]
    C[..., 1, 0], C[..., 1, 2] = xi[..., 2], -xi[..., 0]
    C[..., 2, 0], C[..., 2, 1] = -xi[..., 1], xi[..., 0]
    return C


class WorkingChart:
    """A genuine coordinate chart of dimension ``spec.dim`` around a base point.

    For non-quaternion groups this is the group chart itself.  For ``SU2``
    and ``SO3`` it is ``xi -> base * exp(xi)`` (valid for ``|xi| < pi``);
    by left-invariance the metric in ``xi`` does not depend on the base.
    """

    def __init__(self, spec: GroupSpec, Q=None, base=None):
        self.spec = spec
        self.Q = _as_Q(spec, Q)
        self.quat = spec.kind == "quat"
        if base is None:
            base = catalog.identity(spec)
        self.base = as_element(spec, base)
        self.dim = spec.dim
        self.periods = (None,) * 3 if self.quat else spec.chart.periods

    def metric(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.quat:
            W = _dexp_left(X)
            return np.swapaxes(W, -1, -2) @ self.Q @ W
        return metric_tensor(self.spec, self.Q, X)

    def to_group(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.quat:
            return catalog.normalize_coords(self.spec, catalog._quat_mul(self.base, _quat_exp(X)))
        return catalog.normalize_coords(self.spec, X)

    def from_group(self, p) -> np.ndarray:
        """Working coordinates of ``p`` (for quaternions, the short log of ``base^-1 p``)."""
        p = as_element(self.spec, p)
        if self.quat:
            rel = catalog._quat_mul(self.base * np.array([1.0, -1.0, -1.0, -1.0]), p)
            if self.spec.family == "SO3":
                rel = np.where(rel[..., :1] < 0, -rel, rel)
            return _quat_log(rel)
        return np.array(p, dtype=float)

    def tangent_in(self, v) -> np.ndarray:
        """Convert a chart tangent vector at the base point into working coordinates."""
        v = np.asarray(v, dtype=float)
        if self.quat:
            conj = self.base * np.array([1.0, -1.0, -1.0, -1.0])
            return catalog._quat_mul(conj, v)[..., 1:]
        return v

    def tangent_out(self, X, V) -> np.ndarray:
        """Chart tangent vector of the working-coordinate velocity ``V`` at ``X``."""
        if not self.quat:
            return np.asarray(V, dtype=float)
        q = catalog._quat_mul(self.base, _quat_exp(X))
        eta = np.einsum("...ij,...j->...i", _dexp_left(X), V)
        pure = np.concatenate([np.zeros(eta.shape[:-1] + (1,)), eta], axis=-1)
        return catalog._quat_mul(q, pure)

    def step(self, X) -> np.ndarray:
        return FD_REL_STEP * (1.0 + np.abs(np.asarray(X, dtype=float)))


def christoffel(chart: WorkingChart, X) -> np.ndarray:
    """Christoffel symbols ``Gamma[k, i, j]`` at working coordinates ``X`` (vectorized).

    Central differences with step ``h = 1e-4 (1 + |x|)``; error O(h^2).
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[-1]
    h = chart.step(X)
    dg = []
    for m in range(n):
        e = np.zeros(n)
        e[m] = 1.0
        hm = h[..., m]
        plus = chart.metric(X + hm[..., None] * e)
        minus = chart.metric(X - hm[..., None] * e)
        dg.append((plus - minus) / (2.0 * hm[..., None, None]))
    dg = np.stack(dg, axis=-3)  # [..., m, i, j] = d_m g_ij
    ginv = np.linalg.inv(chart.metric(X))
    # Gamma_lij = 1/2 (d_i g_jl + d_j g_il - d_l g_ij)
    # lowered symbols [l, i, j] = 1/2 (d_i g_jl + d_j g_il - d_l g_ij)
    low = 0.5 * (np.einsum("...ijl->...lij", dg)
                 + np.einsum("...jil->...lij", dg)
                 - dg)
    return np.einsum("...kl,...lij->...kij", ginv, low)


def riemann(chart: WorkingChart, X) -> np.ndarray:
    """Riemann tensor ``R[l, k, i, j]`` with ``R(d_i, d_j) d_k = R[l,k,i,j] d_l``."""
    X = np.asarray(X, dtype=float)
    n = X.shape[-1]
    h = chart.step(X)
    G = christoffel(chart, X)
    dG = []
    for m in range(n):
        e = np.zeros(n)
        e[m] = 1.0
        hm = h[..., m]
        plus = christoffel(chart, X + hm[..., None] * e)
        minus = christoffel(chart, X - hm[..., None] * e)
        dG.append((plus - minus) / (2.0 * hm[..., None, None, None]))
    dG = np.stack(dG, axis=-4)  # [..., m, l, a, b] = d_m Gamma^l_ab
    # R^l_kij = d_i G^l_jk - d_j G^l_ik + G^l_im G^m_jk - G^l_jm G^m_ik
    term1 = np.einsum("...iljk->...lkij", dG)
    term2 = np.einsum("...jlik->...lkij", dG)
    term3 = np.einsum("...lim,...mjk->...lkij", G, G)
    term4 = np.einsum("...ljm,...mik->...lkij", G, G)
    return term1 - term2 + term3 - term4


def sectional_curvature(spec: GroupSpec, Q, p, u, v, tol: float = 1e-12) -> float:
    """Sectional curvature of the plane spanned by tangent vectors ``u, v`` at ``p``.

    ``u`` and ``v`` are chart tangent vectors (4-vectors tangent to the
    sphere for quaternion groups).
    """
    chart = WorkingChart(spec, Q, base=p)
    X = chart.from_group(p) if not chart.quat else np.zeros(3)
    a = chart.tangent_in(u)
    b = chart.tangent_in(v)
    g = chart.metric(X)
    gram = (a @ g @ a) * (b @ g @ b) - (a @ g @ b) ** 2
    scale = (a @ g @ a) * (b @ g @ b)
    if gram <= tol * max(scale, 1e-300):
        raise DegeneratePlane("u and v are (nearly) linearly dependent")
    R = riemann(chart, X)
    # <R(u,v)v, u>
    Ruvv = np.einsum("lkij,k,i,j->l", R, b, a, b)
    return float(a @ g @ Ruvv / gram)


# -- lengths ------------------------------------------------------------------

def quad_form(g, v):
    """Batched quadratic form ``v^T g v`` (broadcasting over leading axes)."""
    return np.sum((g @ v[..., None])[..., 0] * v, axis=-1)


def curve_length(spec: GroupSpec, Q, curve, subdivide: int = 1) -> float:
    """Length of a sampled curve: trapezoidal rule on ``sqrt(x'^T g x')``.

    The curve is taken piecewise linear between samples (periodic
    coordinates unwrapped); each piece is optionally split into
    ``subdivide`` sub-pieces before applying the trapezoidal rule.
    """
    pts = curve.samples if hasattr(curve, "samples") else curve
    pts = as_element(spec, pts)
    if pts.shape[0] < 2:
        raise ValueError("a curve needs at least two samples")
    delta = coord_difference(spec, pts[:-1], pts[1:])
    if spec.kind == "quat":
        delta = pts[1:] - pts[:-1]
    return float(np.sum(segment_lengths(spec, Q, pts[:-1], delta, subdivide)))


def segment_lengths(spec: GroupSpec, Q, starts, deltas, subdivide: int = 1) -> np.ndarray:
    """Trapezoidal lengths of the straight coordinate segments ``start + t*delta``."""
    m = max(int(subdivide), 1)
    t = np.linspace(0.0, 1.0, m + 1)
    pts = starts[:, None, :] + t[None, :, None] * deltas[:, None, :]
    if spec.kind == "quat":
        pts = pts / np.linalg.norm(pts, axis=-1, keepdims=True)
    g = metric_tensor(spec, Q, pts)
    speed = np.sqrt(np.maximum(quad_form(g, deltas[:, None, :]), 0.0))
    w = np.full(m + 1, 1.0 / m)
    w[0] = w[-1] = 0.5 / m
    return speed @ w


# -- metric derivatives -------------------------------------------------------

def _inverse_frame_derivs(spec: GroupSpec, X):
    """Inverse frame ``M`` and its first/second coordinate derivatives.

    Shapes: ``M (..., n, d)``, ``dM (..., k, n, d)``, ``d2M (..., k, l, n, d)``.
    Non-quaternion kinds only.
    """
    X = np.asarray(X, dtype=float)
    d = X.shape[-1]
    shape = X.shape[:-1]
    M = inverse_frame(spec, X)
    dM = np.zeros(shape + (d,) + M.shape[-2:])
    d2M = np.zeros(shape + (d, d) + M.shape[-2:])
    kind = spec.kind
    if kind == "heis":
        dM[..., 0, 2, 1] = 2.0
        dM[..., 1, 2, 0] = -2.0
    elif kind == "se2":
        c, s = np.cos(X[..., 2]), np.sin(X[..., 2])
        dM[..., 2, 0, 0], dM[..., 2, 0, 1] = -s, c
        dM[..., 2, 1, 0], dM[..., 2, 1, 1] = -c, -s
        d2M[..., 2, 2, :2, :2] = -M[..., :2, :2]
    elif kind == "semidirect":
        A = spec.matrix
        E = M[..., :2, :2]
        dM[..., 2, :2, :2] = -np.einsum("ab,...bc->...ac", A, E)
        d2M[..., 2, 2, :2, :2] = np.einsum("ab,...bc->...ac", A @ A, E)
    elif kind == "affr":
        dM[..., 1, 0, 0] = -M[..., 0, 0]
        d2M[..., 1, 1, 0, 0] = M[..., 0, 0]
    return M, dM, d2M


def metric_derivatives(chart: "WorkingChart", X):
    """Metric tensor with first and second derivatives in working coordinates.

    Returns ``g (..., d, d)``, ``dg (..., k, d, d)``, ``d2g (..., k, l, d, d)``.
    Analytic for every kind except the quaternion exponential chart, which
    uses central differences.
    """
    X = np.asarray(X, dtype=float)
    if not chart.quat:
        M, dM, d2M = _inverse_frame_derivs(chart.spec, X)
        Q = chart.Q
        QM = Q @ M
        g = np.swapaxes(M, -1, -2) @ QM
        dg = np.swapaxes(dM, -1, -2) @ QM[..., None, :, :]
        dg = dg + np.swapaxes(dg, -1, -2)
        d2g = np.swapaxes(d2M, -1, -2) @ QM[..., None, None, :, :]
        d2g = d2g + np.swapaxes(d2g, -1, -2)
        cross = np.swapaxes(dM, -1, -2)[..., :, None, :, :] @ (Q @ dM)[..., None, :, :, :]
        d2g = d2g + cross + np.swapaxes(cross, -1, -2)
        return g, dg, d2g
    d = X.shape[-1]
    h = 1e-4
    eye = np.eye(d) * h
    g = chart.metric(X)
    gp = np.stack([chart.metric(X + eye[k]) for k in range(d)], axis=-3)
    gm = np.stack([chart.metric(X - eye[k]) for k in range(d)], axis=-3)
    dg = (gp - gm) / (2 * h)
    d2g = np.empty(X.shape[:-1] + (d, d, d, d))
    for k in range(d):
        d2g[..., k, k, :, :] = (gp[..., k, :, :] - 2 * g + gm[..., k, :, :]) / (h * h)
        for l in range(k + 1, d):
            v = (chart.metric(X + eye[k] + eye[l]) - chart.metric(X + eye[k] - eye[l])
                 - chart.metric(X - eye[k] + eye[l]) + chart.metric(X - eye[k] - eye[l])) / (4 * h * h)
            d2g[..., k, l, :, :] = v
            d2g[..., l, k, :, :] = v
    return g, dg, d2g
