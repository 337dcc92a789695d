"""Geodesics, distance estimation, ball volumes and growth exponents.

``distance_estimate`` returns the length of an explicit curve, so every
value is an upper bound on the Riemannian distance up to quadrature error.
Candidate curves (straight, axis-aligned, detours and loops) are ranked by
length; the best few are relaxed by damped Newton iterations on the
discrete path energy, whose Hessian is block tridiagonal.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from . import catalog
from .catalog import GroupSpec, as_element, structure_constants
from .errors import IntegrationEscape, NoPathFound, StatisticalError, UnsupportedChart
from .metric import WorkingChart, _as_Q, christoffel, metric_derivatives, quad_form

# -- curves -------------------------------------------------------------------


@dataclass
class Curve:
    """Sampled curve in a group chart.

    Attributes
    ----------
    samples : (m, d) array of chart coordinates
    times : (m,) strictly increasing parameters
    velocities : optional (m, d) chart velocities (set by :func:`geodesic_shoot`)
    """

    samples: np.ndarray
    times: np.ndarray
    velocities: np.ndarray | None = None

    def __post_init__(self):
        self.samples = np.atleast_2d(np.asarray(self.samples, dtype=float))
        self.times = np.asarray(self.times, dtype=float)
        if self.samples.shape[0] < 2:
            raise ValueError("a curve needs at least two samples")
        if self.times.shape != (self.samples.shape[0],):
            raise ValueError("times must match samples")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    def __len__(self):
        return self.samples.shape[0]


# -- geodesic shooting ----------------------------------------------------------


def geodesic_shoot(spec: GroupSpec, Q, p, v, T: float, steps: int = 64,
                   bound: float = 1e6) -> Curve:
    """Integrate the geodesic from ``p`` with initial chart velocity ``v`` for time ``T``.

    Fixed-step RK4 on ``x'' + Gamma(x)(x', x') = 0`` in working coordinates,
    with Christoffel symbols from central differences.

    Raises
    ------
    IntegrationEscape
        if a coordinate exceeds ``bound`` in absolute value.
    """
    if steps < 8:
        raise ValueError("steps must be >= 8")
    if not spec.chartable:
        raise UnsupportedChart(f"{spec} has no global chart")
    chart = WorkingChart(spec, Q, base=p)
    X0 = np.zeros(spec.dim) if chart.quat else as_element(spec, p)
    V0 = chart.tangent_in(v)
    times = np.linspace(0.0, float(T), steps + 1)
    if T == 0:
        pts = np.repeat(as_element(spec, p)[None, :], steps + 1, axis=0)
        return Curve(pts, np.arange(steps + 1, dtype=float))
    dt = float(T) / steps

    def rhs(x, u):
        G = christoffel(chart, x)
        return u, -np.einsum("kij,i,j->k", G, u, u)

    xs = [X0]
    vs = [np.asarray(v, dtype=float)]
    x, u = X0.astype(float), V0.astype(float)
    for _ in range(steps):
        k1x, k1u = rhs(x, u)
        k2x, k2u = rhs(x + 0.5 * dt * k1x, u + 0.5 * dt * k1u)
        k3x, k3u = rhs(x + 0.5 * dt * k2x, u + 0.5 * dt * k2u)
        k4x, k4u = rhs(x + dt * k3x, u + dt * k3u)
        x = x + dt / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
        u = u + dt / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u)
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > bound:
            raise IntegrationEscape(f"geodesic left |x| <= {bound}")
        if chart.quat and np.linalg.norm(x) > 2.5:
            # re-centre the exponential chart so it stays well conditioned
            q = chart.to_group(x)
            vel = chart.tangent_out(x, u)
            chart = WorkingChart(spec, Q, base=q)
            x = np.zeros(3)
            u = chart.tangent_in(vel)
        xs.append(chart.to_group(x) if chart.quat else x.copy())
        vs.append(chart.tangent_out(x, u) if chart.quat else u.copy())
    if chart.quat:
        pts = np.array([as_element(spec, p)] + [np.asarray(y) for y in xs[1:]])
    else:
        pts = np.array(xs)
    return Curve(pts, times, np.array(vs))


# -- distance estimation ------------------------------------------------------


@dataclass
class DistanceBudget:
    """Effort knobs for :func:`distance_estimate`.

    Attributes
    ----------
    lift_range : fiber translates ``-lift_range..lift_range`` tried on periodic axes
    levels : number of detour heights per sign in the candidate family
    keep : number of best candidates that get relaxed
    nodes_per_unit : path nodes per unit of estimated length
    min_nodes, max_nodes : bounds on the node count
    newton_iters : Newton iterations per resolution level
    quad_nodes : Gauss-Legendre nodes per segment for validated lengths
    restarts : random initial curves (thorough mode)
    shooting : refine the best curve by least-squares geodesic shooting
    symmetric : evaluate both ``d(p,q)`` and ``d(q,p)`` and keep the minimum
    """

    lift_range: int = 2
    levels: int = 10
    keep: int = 2
    nodes_per_unit: float = 8.0
    min_nodes: int = 24
    max_nodes: int = 768
    newton_iters: int = 40
    quad_nodes: int = 4
    restarts: int = 0
    shooting: bool = False
    symmetric: bool = True
    seed: int = 0

    @classmethod
    def fast(cls) -> "DistanceBudget":
        return cls(levels=8, keep=1, nodes_per_unit=5.0, max_nodes=384, symmetric=False)

    @classmethod
    def thorough(cls) -> "DistanceBudget":
        return cls(levels=14, keep=4, nodes_per_unit=12.0, max_nodes=1536, restarts=16,
                   shooting=True)


_GL_CACHE: dict = {}


def _gauss_legendre(m):
    if m not in _GL_CACHE:
        t, w = np.polynomial.legendre.leggauss(m)
        _GL_CACHE[m] = (0.5 * (t + 1.0), 0.5 * w)
    return _GL_CACHE[m]


def polyline_lengths(chart: WorkingChart, paths: np.ndarray, quad: int = 4) -> np.ndarray:
    """Lengths of piecewise-linear paths ``(B, m, d)`` by Gauss-Legendre per segment."""
    t, w = _gauss_legendre(quad)
    a = paths[:, :-1, :]
    delta = paths[:, 1:, :] - a
    pts = a[:, :, None, :] + t[None, None, :, None] * delta[:, :, None, :]
    # far-off candidates may overflow; they come out non-finite and are dropped
    with np.errstate(over="ignore", invalid="ignore"):
        g = chart.metric(pts)
        speed = np.sqrt(np.maximum(quad_form(g, delta[:, :, None, :]), 0.0))
        return (speed @ w).sum(axis=1)


def _resample(chart: WorkingChart, path: np.ndarray, n_nodes: int) -> np.ndarray:
    """Redistribute ``n_nodes`` points along a polyline uniformly in metric length."""
    sub = 8
    t = np.linspace(0.0, 1.0, sub + 1)[:-1]
    fine = (path[:-1, None, :] + t[None, :, None] * (path[1:] - path[:-1])[:, None, :]).reshape(-1, path.shape[1])
    fine = np.vstack([fine, path[-1:]])
    seg = _seg_lengths(chart, fine)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if s[-1] <= 0:
        return np.linspace(path[0], path[-1], n_nodes)
    target = np.linspace(0.0, s[-1], n_nodes)
    out = np.empty((n_nodes, path.shape[1]))
    for j in range(path.shape[1]):
        out[:, j] = np.interp(target, s, fine[:, j])
    out[0], out[-1] = path[0], path[-1]
    return out


def _seg_lengths(chart, pts):
    t, w = _gauss_legendre(2)
    delta = pts[1:] - pts[:-1]
    q = pts[:-1, None, :] + t[None, :, None] * delta[:, None, :]
    g = chart.metric(q)
    sp = np.sqrt(np.maximum(quad_form(g, delta[:, None, :]), 0.0))
    return sp @ w


def _energy(chart, X):
    delta = X[1:] - X[:-1]
    mid = 0.5 * (X[1:] + X[:-1])
    g = chart.metric(mid)
    return float(np.sum(quad_form(g, delta)))


def _newton_relax(chart: WorkingChart, X: np.ndarray, iters: int = 40, tol: float = 1e-11) -> np.ndarray:
    """Minimize the midpoint-rule path energy over interior nodes (endpoints fixed)."""
    X = X.copy()
    n_seg = X.shape[0] - 1
    d = X.shape[1]
    n_int = n_seg - 1
    if n_int < 1:
        return X
    size = d * n_int
    band = 2 * d - 1
    mu = 1e-3
    E = _energy(chart, X)
    # block index helpers for banded assembly
    ii, jj = np.meshgrid(np.arange(d), np.arange(d), indexing="ij")
    for _ in range(iters):
        delta = X[1:] - X[:-1]
        mid = 0.5 * (X[1:] + X[:-1])
        g, dg, d2g = metric_derivatives(chart, mid)
        gD = (g @ delta[:, :, None])[..., 0]
        dgD = (dg @ delta[:, None, :, None])[..., 0]  # (d_k g delta)_i
        c = np.sum(dgD * delta[:, None, :], axis=-1)
        grad_a = -2.0 * gD + 0.5 * c
        grad_b = 2.0 * gD + 0.5 * c
        grad = np.zeros_like(X)
        grad[:-1] += grad_a
        grad[1:] += grad_b
        rhs = -grad[1:-1].ravel()
        if np.max(np.abs(rhs)) < 1e-15 * max(E, 1e-300):
            break
        H_dd = 2.0 * g
        H_dm = 2.0 * np.swapaxes(dgD, -1, -2)  # [s, i, k]
        H_mm = quad_form(d2g, delta[:, None, None, :])
        H_md = np.swapaxes(H_dm, -1, -2)
        H_aa = H_dd - 0.5 * (H_dm + H_md) + 0.25 * H_mm
        H_bb = H_dd + 0.5 * (H_dm + H_md) + 0.25 * H_mm
        H_ab = -H_dd - 0.5 * H_dm + 0.5 * H_md + 0.25 * H_mm
        diag = np.zeros((n_seg + 1, d, d))
        diag[:-1] += H_aa
        diag[1:] += H_bb
        diag = diag[1:-1]  # interior nodes
        off = H_ab[1:-1]  # couples interior node r (as a) with r+1 (as b)
        # Marquardt damping: scale by the Hessian diagonal, since coordinate
        # scales differ by many orders of magnitude on exponential groups
        hdiag = np.abs(np.einsum("rii->ri", diag))
        hdiag = np.maximum(hdiag, 1e-300 + 1e-14 * hdiag.max())
        while True:
            ab = np.zeros((2 * band + 1, size))
            D = diag + mu * hdiag[:, :, None] * np.eye(d)[None]
            r = np.arange(n_int)
            rows = (d * r[:, None, None] + ii[None]).ravel()
            cols = (d * r[:, None, None] + jj[None]).ravel()
            ab[band + rows - cols, cols] = D.ravel()
            if n_int > 1:
                r1 = np.arange(n_int - 1)
                rows = (d * r1[:, None, None] + ii[None]).ravel()
                cols = (d * (r1 + 1)[:, None, None] + jj[None]).ravel()
                ab[band + rows - cols, cols] = off.ravel()
                ab[band + cols - rows, rows] = off.ravel()
            try:
                step = solve_banded((band, band), ab, rhs, check_finite=False)
            except (np.linalg.LinAlgError, ValueError):
                step = None
            if step is not None and np.all(np.isfinite(step)):
                Xn = X.copy()
                Xn[1:-1] += step.reshape(n_int, d)
                En = _energy(chart, Xn)
                if En <= E:
                    break
                if np.max(np.abs(step)) <= 1e-10 * (1.0 + np.max(np.abs(X))):
                    # at roundoff level: nothing left to gain
                    return X
            mu *= 10.0
            if mu > 1e12:
                return X
        X = Xn
        converged = E - En <= tol * E
        E = En
        mu = max(mu / 10.0, 1e-12)
        if converged:
            break
    return X


def _candidate_paths(w: np.ndarray, levels: int) -> list:
    """Piecewise-linear candidate curves from the origin to ``w`` (working coordinates)."""
    d = w.shape[0]
    o = np.zeros(d)
    paths = [np.stack([o, w])]
    scale = float(np.max(np.abs(w))) if np.any(w) else 1.0
    hmax = 2.0 * math.log1p(scale) + 4.0
    hs = np.geomspace(0.125, hmax, levels)
    hts = np.concatenate([hs, -hs])
    # axis-aligned in every order
    for order in itertools.permutations(range(d)):
        pts = [o.copy()]
        cur = o.copy()
        for a in order:
            cur = cur.copy()
            cur[a] = w[a]
            pts.append(cur)
        paths.append(np.array(pts))
    if d >= 2:
        for a in range(d):
            others = [b for b in range(d) if b != a]
            levels_a = np.concatenate([[0.0, w[a]], hts, w[a] + hts])
            # single detour: lift, straight across, drop
            k = levels_a.shape[0]
            det = np.zeros((k, 4, d))
            det[:, 1, a] = levels_a
            det[:, 2, :] = w
            det[:, 2, a] = levels_a
            det[:, 3, :] = w
            paths.extend(list(det))
            # two-level staircase: lift, move one axis, change level, move the other
            if d == 3:
                lv = np.concatenate([[0.0, w[a]], hts])
                h1, h2 = (m.ravel() for m in np.meshgrid(lv, lv, indexing="ij"))
                for b, c in (others, others[::-1]):
                    st = np.zeros((h1.shape[0], 6, d))
                    st[:, 1, a] = h1
                    st[:, 2, a] = h1
                    st[:, 2, b] = w[b]
                    st[:, 3, a] = h2
                    st[:, 3, b] = w[b]
                    st[:, 4, a] = h2
                    st[:, 4, b] = w[b]
                    st[:, 4, c] = w[c]
                    st[:, 5, :] = w
                    paths.append(st)
        # loops and arcs around the straight segment
        t = np.linspace(0.0, 1.0, 17)[:, None]
        straight = t * w[None, :]
        radii = np.geomspace(0.25, max(hmax, 1.0), max(levels // 2, 3))
        for a in range(d):
            for b in range(d):
                if a == b:
                    continue
                ea = np.eye(d)[a]
                eb = np.eye(d)[b]
                for r in radii:
                    for sg in (1.0, -1.0):
                        loop = straight + r * (sg * ea[None] * (1 - np.cos(2 * np.pi * t)) + eb[None] * np.sin(2 * np.pi * t))
                        paths.append(loop)
                    if b == (a + 1) % d:
                        for sg in (1.0, -1.0):
                            paths.append(straight + sg * r * ea[None] * np.sin(np.pi * t))
    return paths


def _ranked_candidates(chart: WorkingChart, w: np.ndarray, levels: int, quad: int, top: int = 64):
    by_len: dict = {}
    for p in _candidate_paths(w, levels):
        batch = p if p.ndim == 3 else p[None]
        by_len.setdefault(batch.shape[1], []).append(batch)
    lengths, items = [], []
    for group in by_len.values():
        arr = np.concatenate(group)
        lengths.append(polyline_lengths(chart, arr, quad=quad))
        items.append(arr)
    lengths = np.concatenate(lengths)
    offsets = np.cumsum([0] + [len(a) for a in items])

    def item(i):
        j = int(np.searchsorted(offsets, i, side="right")) - 1
        return items[j][i - offsets[j]]

    order = np.argsort(lengths)[:top]
    return [(float(lengths[i]), item(i)) for i in order if np.isfinite(lengths[i])]


def _relax_path(chart: WorkingChart, path: np.ndarray, est: float, budget: DistanceBudget):
    target = int(np.clip(budget.nodes_per_unit * est + budget.min_nodes, budget.min_nodes, budget.max_nodes))
    n = max(budget.min_nodes // 2, 9)
    X = _resample(chart, path, n)
    while True:
        X = _newton_relax(chart, X, iters=budget.newton_iters)
        if n >= target:
            break
        n = min(2 * n - 1, target)
        X = _resample(chart, X, n)
    L = float(polyline_lengths(chart, X[None], quad=budget.quad_nodes)[0])
    return L, X


def _shooting_refine(chart: WorkingChart, w: np.ndarray, X: np.ndarray, L: float, budget: DistanceBudget):
    """Least-squares shooting from the relaxed path's initial direction."""
    from scipy.optimize import least_squares

    spec = chart.spec
    if chart.quat:
        return L
    v0 = (X[1] - X[0]) * (X.shape[0] - 1)
    steps = int(np.clip(16 * L, 32, 512))

    def endpoint(v):
        try:
            c = geodesic_shoot(spec, chart.Q, np.zeros(spec.dim) if spec.kind != "quat" else None, v, 1.0, steps)
        except IntegrationEscape:
            return np.full(spec.dim, 1e6)
        return c.samples[-1] - w

    try:
        res = least_squares(endpoint, v0, xtol=1e-12, ftol=1e-12, max_nfev=30)
    except Exception:  # noqa: BLE001 - shooting is optional refinement
        return L
    if np.max(np.abs(res.fun)) > 1e-8 * (1 + np.max(np.abs(w))):
        return L
    c = geodesic_shoot(spec, chart.Q, np.zeros(spec.dim), res.x, 1.0, steps)
    Ls = float(polyline_lengths(chart, c.samples[None], quad=budget.quad_nodes)[0])
    return min(L, Ls)


def _distance_from_identity(chart: WorkingChart, w: np.ndarray, budget: DistanceBudget) -> float:
    if not np.any(w):
        return 0.0
    if chart.spec.kind == "abelian":
        # constant metric: the straight segment is the geodesic of the cover
        return float(np.sqrt(w @ chart.Q @ w))
    ranked = _ranked_candidates(chart, w, budget.levels, budget.quad_nodes)
    if not ranked:
        raise NoPathFound("no finite-length candidate curve")
    best = ranked[0][0]
    picked: list = []
    for L0, path in ranked:
        if len(picked) >= budget.keep:
            break
        # skip near-duplicates of already selected candidates
        if any(abs(L0 - Lp) < 1e-9 * max(1.0, L0) for Lp, _ in picked):
            continue
        picked.append((L0, path))
    rng = np.random.default_rng(np.random.SeedSequence(budget.seed))
    for _ in range(budget.restarts):
        t = np.linspace(0.0, 1.0, 17)[:, None]
        bump = rng.normal(size=(3, w.shape[0])) * (1.0 + 0.25 * best)
        curve = t * w[None] + np.sin(np.pi * t) * bump[0] + np.sin(2 * np.pi * t) * bump[1] + np.sin(3 * np.pi * t) * bump[2]
        picked.append((np.inf, curve))
    for L0, path in picked:
        est = L0 if np.isfinite(L0) else best
        try:
            L, X = _relax_path(chart, path, min(est, 4.0 * best), budget)
        except (np.linalg.LinAlgError, FloatingPointError, ValueError):
            continue
        if np.isfinite(L) and L < best:
            best = L
            if budget.shooting:
                best = _shooting_refine(chart, w, X, best, budget)
    return float(best)


def _lifts(spec: GroupSpec, w: np.ndarray, rng_lift: int) -> list:
    """Representatives of the relative element ``w`` in the universal-cover chart."""
    if spec.kind == "quat":
        out = [w]
        if spec.family == "SO3":
            out.append(-w)
        return out
    periods = spec.chart.periods
    axes = [i for i, P in enumerate(periods) if P is not None]
    if not axes:
        return [w]
    out = []
    for ms in itertools.product(range(-rng_lift, rng_lift + 1), repeat=len(axes)):
        v = w.copy()
        for a, m in zip(axes, ms):
            v[a] = v[a] + m * periods[a]
        out.append(v)
    return out


def _relative(spec: GroupSpec, p, q) -> np.ndarray:
    """``p^-1 q`` with periodic coordinates mapped into the symmetric window."""
    w = catalog.multiply(spec, catalog.inverse(spec, p), q)
    if spec.kind != "quat":
        periods = spec.chart.periods
        for a, P in enumerate(periods):
            if P is not None:
                w[a] = (w[a] + 0.5 * P) % P - 0.5 * P
    return w


def distance_estimate(spec: GroupSpec, Q, p, q, budget: DistanceBudget | None = None) -> float:
    """Upper-bound estimate of the left-invariant Riemannian distance ``d(p, q)``.

    Uses ``d(p, q) = d(e, p^-1 q)``; on quotient groups the minimum is taken
    over fiber translates of the relative element.  With
    ``budget.symmetric`` both orders are evaluated and the minimum returned.

    Raises
    ------
    UnsupportedChart
        for groups without a global chart.
    NoPathFound
        if no admissible curve was produced.
    """
    if not spec.chartable:
        raise UnsupportedChart(f"{spec} has no global chart")
    budget = budget or DistanceBudget()
    chart = WorkingChart(spec, Q)
    p = as_element(spec, p)
    q = as_element(spec, q)
    pairs = [(p, q), (q, p)] if budget.symmetric else [(p, q)]
    best = np.inf
    for a, b in pairs:
        w = _relative(spec, a, b)
        for lift in _lifts(spec, w, budget.lift_range):
            X = chart.from_group(lift) if chart.quat else lift
            best = min(best, _distance_from_identity(chart, np.asarray(X, dtype=float), budget))
    if not np.isfinite(best):
        raise NoPathFound("no admissible curve")
    return float(best)


# -- ball volumes -------------------------------------------------------------


@dataclass
class VolumeEstimate:
    """Monte Carlo ball volume with its standard error."""

    radius: float
    volume: float
    stderr: float
    warning: bool = False


def _padded_metric(chart: WorkingChart, d: int):
    """Metric on padded 3-d working coordinates (unit entries on unused axes)."""

    def metric(X):
        X = np.asarray(X, dtype=float)
        G = np.broadcast_to(np.eye(3), X.shape[:-1] + (3, 3)).copy()
        with np.errstate(over="ignore", invalid="ignore"):
            g = chart.metric(X[..., :d])
        G[..., :d, :d] = np.where(np.isfinite(g), g, 1e300)
        return G

    return metric


def _initial_box(spec: GroupSpec, Qm: np.ndarray, r: float):
    """Per-axis ``(lo, hi, periodic, map)`` in working coordinates for a ball of radius ``r``."""
    from .graph import AxisMap

    rr = r / math.sqrt(float(np.linalg.eigvalsh(Qm)[0]))
    kind = spec.kind
    d = spec.dim
    if kind == "quat":
        return [(-math.pi, math.pi, False, AxisMap())] * 3
    bounds = [rr] * d
    maps = [AxisMap()] * d
    if kind == "heis":
        bounds[2] = rr + rr * rr / math.pi
    elif kind == "semidirect":
        # horizontal speed at height z is at most |e^{zA}|; reaching height z costs |z|
        zs = np.linspace(-rr, rr, 201)
        norms = np.linalg.norm(catalog.mat_exp_2x2(spec.matrix, zs), ord=2, axis=(-2, -1))
        grow = float(np.max((rr - np.abs(zs)) * norms)) + rr
        bounds[0] = bounds[1] = grow
        maps[0] = maps[1] = AxisMap("sinh", 1.0)
    elif kind == "affr":
        bounds[0] = math.exp(rr) * rr
        maps[0] = AxisMap("sinh", 1.0)
    out = []
    for a in range(d):
        P = spec.chart.periods[a]
        if P is not None and P <= 2.0 * bounds[a]:
            out.append((0.0, P, True, AxisMap()))
        else:
            lim = float(maps[a].inverse(bounds[a]))
            out.append((-lim, lim, False, maps[a]))
    return out


def _allocate_nodes(spans, periodic, budget: int):
    """Node counts roughly proportional to the axis spans, product about ``budget``."""
    spans = np.asarray(spans, dtype=float)
    c = (budget / np.prod(spans)) ** (1.0 / len(spans))
    n = np.maximum(np.rint(c * spans).astype(int), 5)
    return [int(v if per else v + (v + 1) % 2) for v, per in zip(n, periodic)]


class _BallSampler:
    """Distance field from the identity on a box, plus uniform box samples.

    The sampling coordinates ``xi`` are uniform in the box; the volume
    weight of a sample is ``sqrt(det g) * |d x / d xi|`` times the box
    volume.  For ``SO3`` the field lives on the ``SU2`` exponential chart
    and a point's distance is the smaller of its two lifts.
    """

    def __init__(self, spec: GroupSpec, Q, r_max: float, samples: int, seed: int,
                 nodes: int = 90000, radius: int = 3, max_expand: int = 4, boundary_rate: float = 1e-3):
        from .graph import AxisMap, DistanceField, GridSpec

        self.spec = spec
        self.Qm = _as_Q(spec, Q)
        self.quat = spec.kind == "quat"
        self.so3 = spec.family == "SO3"
        cover = catalog.parse_spec("SU2") if self.so3 else spec
        self.chart = WorkingChart(cover, self.Qm)
        d = 3 if self.quat else spec.dim
        self.d = d
        box = _initial_box(spec, self.Qm, r_max)
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0xBA11,)))
        self.warning = False
        for attempt in range(max_expand + 1):
            lo = np.array([b[0] for b in box] + [0.0] * (3 - d))
            hi = np.array([b[1] for b in box] + [0.0] * (3 - d))
            per = tuple(b[2] for b in box) + (False,) * (3 - d)
            maps = tuple(b[3] for b in box) + (AxisMap(),) * (3 - d)
            n = _allocate_nodes(hi[:d] - lo[:d], per[:d], nodes) + [1] * (3 - d)
            if spec.kind == "heis":
                grid, field = self._lattice_field(lo, hi, per, nodes, radius)
                lo, hi = grid.lo, grid.hi
            else:
                grid = GridSpec(lo, hi, tuple(n), per, maps)
                mask = None
                if self.quat:
                    mask = lambda xi: np.linalg.norm(xi, axis=-1) < math.pi - 1e-9  # noqa: E731
                field = DistanceField(_padded_metric(self.chart, d), grid, np.zeros(3), radius=radius,
                                      mask=mask)
            xi = lo + (hi - lo) * rng.random((samples, 3))
            xi[:, d:] = 0.0
            dist, weight = self._evaluate(field, grid, xi)
            if self.quat:
                break
            # acceptance rate in the outer shell of every non-periodic axis
            u = (xi[:, :d] - lo[:d]) / (hi[:d] - lo[:d])
            shell = np.zeros(samples, dtype=bool)
            grow = []
            for a in range(d):
                if per[a]:
                    continue
                s = (u[:, a] < 0.05) | (u[:, a] > 0.95)
                hit = s & (dist <= r_max)
                shell |= s
                if hit.sum() > boundary_rate * max(s.sum(), 1):
                    grow.append(a)
            if not grow:
                break
            if attempt == max_expand:
                self.warning = True
                break
            for a in grow:
                lo_a, hi_a, p_a, m_a = box[a]
                box[a] = (1.5 * lo_a, 1.5 * hi_a, p_a, m_a)
        self.grid = grid
        self.field = field
        self.dist = dist
        self.weight = weight

    def _lattice_field(self, lo, hi, per, nodes, radius):
        """Left-invariant lattice graph for the Heisenberg law (see :class:`LatticeField`)."""
        from .graph import GridSpec, LatticeField, stencil

        B, Bz = float(hi[0]), float(hi[2])
        if per[2]:
            P = float(hi[2] - lo[2])
            # z spacing must divide the period: h_z = P / nz, h = sqrt(h_z / 2)
            # nodes ~ (2B/h)^2 P / (2 h^2)
            h = (2.0 * B * B * P / nodes) ** 0.25
            nz = max(int(round(P / (2.0 * h * h))), 1)
            hz = P / nz
            h = math.sqrt(0.5 * hz)
            c = int(math.ceil(B / h))
            zlo, zhi, nzn = 0.0, P, nz
        else:
            # nodes ~ (2B/h)^2 (2Bz/(2h^2)) = 4 B^2 Bz / h^4
            h = (4.0 * B * B * Bz / nodes) ** 0.25
            hz = 2.0 * h * h
            c = int(math.ceil(B / h))
            cz = int(math.ceil(Bz / hz))
            zlo, zhi, nzn = -cz * hz, cz * hz, 2 * cz + 1
        grid = GridSpec(np.array([-c * h, -c * h, zlo]), np.array([c * h, c * h, zhi]),
                        (2 * c + 1, 2 * c + 1, nzn), (False, False, bool(per[2])))
        offs = stencil(int(radius), (True, True, True))
        elems = offs * np.array([h, h, hz])
        paths = np.linspace(0.0, 1.0, 9)[None, :, None] * elems[:, None, :]
        W = polyline_lengths(self.chart, paths, quad=4)
        return grid, LatticeField(grid, W, offs, 1, np.zeros(3))

    def _evaluate(self, field, grid, xi):
        X = grid.to_work(xi)
        jac = np.prod(grid.jac_diag(xi)[:, : self.d], axis=1)
        span = np.prod([(grid.hi[a] - grid.lo[a]) for a in range(self.d)])
        with np.errstate(over="ignore", invalid="ignore"):
            g = self.chart.metric(X[:, : self.d])
            dens = np.sqrt(np.maximum(np.linalg.det(g), 0.0))
        dens = np.where(np.isfinite(dens), dens, 0.0)
        dist = field.interpolate(X)
        if self.quat:
            inside = np.linalg.norm(X, axis=1) < math.pi
            dist = np.where(inside, dist, np.inf)
            dens = np.where(inside, dens, 0.0)
            if self.so3:
                # the antipodal lift -q has log of length pi - |xi| along -xi
                th = np.linalg.norm(X, axis=1)
                safe = np.where(th > 0, th, 1.0)
                Xa = -(math.pi - th)[:, None] * X / safe[:, None]
                dist = np.minimum(dist, field.interpolate(Xa))
                dens = 0.5 * dens
        return dist, dens * jac * span

    def volume(self, r: float) -> VolumeEstimate:
        vals = np.where(self.dist <= r, self.weight, 0.0)
        m = vals.shape[0]
        return VolumeEstimate(float(r), float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(m)), self.warning)


def _compact(spec: GroupSpec) -> bool:
    return spec.kind == "quat" or all(P is not None for P in spec.chart.periods)


def _heisenberg_transfer(spec: GroupSpec, Q):
    """Replace ``R^2 x_A R`` with nilpotent ``A != 0`` by ``N3`` and the pushed inner product.

    A Lie algebra isomorphism ``M`` integrates to an isomorphism of the
    simply connected groups; with ``Q' = M^-T Q M^-1`` it is an isometry, so
    ball volumes agree.  ``N3`` has the sheared lattice graph.
    """
    Qm = _as_Q(spec, Q)
    if spec.family != "SemidirectA":
        return spec, Qm
    A = spec.matrix
    if not np.any(A) or np.abs(A @ A).max() > 1e-12 * max(1.0, np.abs(A).max() ** 2):
        return spec, Qm
    c = structure_constants(spec).c
    i, j = next((i, j) for i in range(3) for j in range(i + 1, 3) if np.any(c[:, i, j]))
    S = np.column_stack([np.eye(3)[i], np.eye(3)[j], c[:, i, j]])
    T = np.diag([1.0, 1.0, -4.0])
    Minv = S @ np.linalg.inv(T)
    return GroupSpec("N3"), Minv.T @ Qm @ Minv


def _volumes(spec: GroupSpec, Q, radii, samples: int, seed: int) -> list:
    """One estimate per radius, each on a box and grid sized for that radius.

    Compact groups use a single box (the whole group) and share the samples,
    which makes their volumes exactly nondecreasing.
    """
    spec, Q = _heisenberg_transfer(spec, Q)
    if _compact(spec):
        sampler = _BallSampler(spec, Q, float(max(radii)), samples, seed)
        return [sampler.volume(float(r)) for r in radii]
    return [_BallSampler(spec, Q, float(r), samples, seed).volume(float(r)) for r in radii]


def ball_volume(spec: GroupSpec, Q, r: float, samples: int = 200000, seed: int = 0) -> VolumeEstimate:
    """Monte Carlo estimate of the volume of the ball of radius ``r`` about the identity.

    Points are drawn uniformly in a coordinate box around the identity and
    weighted by the volume density; a point is accepted when its grid-graph
    distance from the identity (see :mod:`lie3atlas.graph`) is at most
    ``r``.  The box grows until fewer than a fraction ``1e-3`` of the samples
    in its outer shell are accepted; if that fails after a few expansions
    the estimate carries ``warning=True``.
    """
    if not r > 0:
        raise ValueError("r must be positive")
    if not spec.chartable:
        raise UnsupportedChart(f"{spec} has no global chart")
    spec, Q = _heisenberg_transfer(spec, Q)
    return _BallSampler(spec, Q, r, samples, seed).volume(r)


# -- growth -------------------------------------------------------------------


@dataclass(frozen=True)
class GrowthType:
    """``kind`` is ``'polynomial'`` (with ``degree``) or ``'exponential'``."""

    kind: str
    degree: int | None = None

    def __str__(self) -> str:
        return f"polynomial({self.degree})" if self.kind == "polynomial" else "exponential"


@dataclass
class GrowthReport:
    radii: list
    volumes: list
    stderr: list
    exponent: float
    residual: float
    classification: GrowthType
    exp_rate: float = 0.0
    exp_residual: float = 0.0
    warning: bool = False

    def to_json(self) -> str:
        out = asdict(self)
        out["classification"] = str(self.classification)
        return json.dumps(out)


def _linfit(x, y):
    A = np.stack([x, np.ones_like(x)], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - A @ coef
    return float(coef[0]), float(np.sqrt(np.mean(res * res)))


def growth_exponent(spec: GroupSpec, Q, radii, samples: int = 200000, seed: int = 0,
                    ratio: float = 4.0, r_min: float = 2.0) -> GrowthReport:
    """Fit ``log V`` against ``log r`` (power law) and against ``r`` (exponential).

    Each radius gets its own box, grid and samples (see :func:`ball_volume`),
    so volumes are nondecreasing only up to their standard errors.  Radii
    below ``r_min`` are excluded from the fit.  Growth is exponential when
    the power-law residual is at least ``ratio`` times the exponential one
    and the exponential rate is positive, or when the log-log slope over the
    last radius interval exceeds by more than one the largest polynomial
    degree a group of this dimension can have (slow exponential rates look
    polynomial at small radii); otherwise the degree is the rounded
    power-law slope.

    Raises
    ------
    StatisticalError
        with fewer than three radii in the window or a zero volume.
    """
    radii = np.sort(np.asarray(radii, dtype=float))
    if len(radii) < 3:
        raise StatisticalError("need at least three radii")
    if not spec.chartable:
        raise UnsupportedChart(f"{spec} has no global chart")
    est = _volumes(spec, Q, radii, samples, seed)
    V = np.array([e.volume for e in est])
    fit = radii >= r_min
    if fit.sum() < 3:
        raise StatisticalError("need at least three radii >= r_min")
    if np.any(V[fit] <= 0):
        raise StatisticalError("zero volume estimate; increase samples")
    logV = np.log(V[fit])
    slope, res_p = _linfit(np.log(radii[fit]), logV)
    rate, res_e = _linfit(radii[fit], logV)
    # residuals at the noise floor mean the fits cannot be told apart
    noise = float(np.max([e.stderr / e.volume for e, f in zip(est, fit) if f]))
    r_fit, V_fit = radii[fit], V[fit]
    tail = float(np.log(V_fit[-1] / V_fit[-2]) / np.log(r_fit[-1] / r_fit[-2]))
    too_steep = tail > _MAX_DEGREE.get(spec.dim, 4) + 1.0
    if rate > 0 and (res_p >= ratio * max(res_e, noise) or too_steep):
        cls = GrowthType("exponential")
    else:
        cls = GrowthType("polynomial", int(max(0, round(slope))))
    return GrowthReport([float(r) for r in radii], V.tolist(), [e.stderr for e in est], slope, res_p, cls,
                        rate, res_e, any(e.warning for e in est))


# largest polynomial growth degree of a connected Lie group of each dimension
_MAX_DEGREE = {1: 1, 2: 2, 3: 4}

_POLY_DEGREE = {
    "T1": 0, "T2": 0, "T3": 0, "SU2": 0, "SO3": 0,
    "R1": 1, "RxT1": 1, "RxT2": 1,
    "R2": 2, "R2xT1": 2, "N3star": 2, "SE2k": 2,
    "R3": 3, "SE2tilde": 3,
    "N3": 4,
}


def growth_type_algebraic(spec: GroupSpec) -> GrowthType:
    """Growth type from the algebra: table lookup, or the spectrum of ``A`` for semidirect products.

    ``R^2 x|_A R`` has polynomial growth iff every eigenvalue of ``A`` is
    purely imaginary; then ``A = 0`` gives degree 3, a nonzero nilpotent
    ``A`` the Heisenberg degree 4, and a rotation part degree 3.
    """
    fam = spec.family
    if fam in _POLY_DEGREE:
        return GrowthType("polynomial", _POLY_DEGREE[fam])
    if fam == "SemidirectA":
        A = spec.matrix
        ev = np.linalg.eigvals(A)
        if np.all(np.abs(ev.real) < catalog.DISC_THRESHOLD):
            if np.max(np.abs(A)) < catalog.DISC_THRESHOLD:
                return GrowthType("polynomial", 3)
            if np.all(np.abs(ev) < catalog.DISC_THRESHOLD):
                return GrowthType("polynomial", 4)
            return GrowthType("polynomial", 3)
        return GrowthType("exponential")
    # AffR, AffR x R, AffR x T1, J, D_lambda, C_lambda, SL2~, PSL2_k
    return GrowthType("exponential")
