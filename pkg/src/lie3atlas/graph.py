"""Grid graphs weighted by a Riemannian metric, and shortest-path distance fields.

Nodes sit on a tensor grid of a *sampling chart* ``xi``; an edge joins a node
to every node displaced by a primitive integer offset of sup-norm at most
``radius``.  Edge weights are local metric lengths of the straight offset.
The graph distance is an independent approximation of the Riemannian
distance (the epsilon-net oracle), and single-source fields drive the
ball-volume estimator.

The Dijkstra kernel is compiled (Cython) when available; otherwise a
``scipy.sparse.csgraph`` implementation is used.  Set the environment
variable ``LIE3ATLAS_PURE=1`` to force the fallback.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import NoPathFound

try:
    if os.environ.get("LIE3ATLAS_PURE", "") not in ("", "0"):
        raise ImportError("fallback forced by LIE3ATLAS_PURE")
    from ._dijkstra import grid_dijkstra as _compiled_dijkstra
    from ._dijkstra import lattice_dijkstra as _compiled_lattice

    BACKEND = "cython"
except ImportError:  # pragma: no cover - depends on build
    _compiled_dijkstra = None
    _compiled_lattice = None
    BACKEND = "python"


@lru_cache(maxsize=None)
def stencil(radius: int, active: tuple = (True, True, True)) -> np.ndarray:
    """Primitive integer offsets with sup-norm in ``1..radius`` on the active axes."""
    rng = [range(-radius, radius + 1) if a else range(0, 1) for a in active]
    out = [
        (i, j, k)
        for i in rng[0]
        for j in rng[1]
        for k in rng[2]
        if (i, j, k) != (0, 0, 0) and math.gcd(math.gcd(abs(i), abs(j)), abs(k)) == 1
    ]
    arr = np.array(out, dtype=np.int64).reshape(-1, 3)
    arr.setflags(write=False)
    return arr


def _pack(G: np.ndarray) -> np.ndarray:
    """(N,3,3) symmetric tensors -> (N,6) rows (g00, g11, g22, g01, g02, g12)."""
    return np.ascontiguousarray(
        np.stack([G[:, 0, 0], G[:, 1, 1], G[:, 2, 2], G[:, 0, 1], G[:, 0, 2], G[:, 1, 2]], axis=1)
    )


def _python_dijkstra(Gp, mask, dims, periodic, offsets, sources, target=-1, W=None, shear=None):
    """Same contract as the compiled kernels, using scipy's sparse Dijkstra.

    With ``W`` given, offset ``m`` has the fixed weight ``W[m]``; ``shear``
    is ``(cx, cy, s)`` for the lattice mode.
    """
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import dijkstra

    nx, ny, nz = dims
    N = nx * ny * nz
    idx = np.arange(N).reshape(nx, ny, nz)
    ix, iy, iz = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
    rows, cols, wts = [], [], []
    for m, o in enumerate(offsets):
        jx, jy, jz = ix + o[0], iy + o[1], iz + o[2]
        if shear is not None:
            cx, cy, sh = shear
            jz = jz + sh * ((iy - cy) * o[0] - (ix - cx) * o[1])
        ok = np.ones_like(ix, dtype=bool)
        for j, n, per in ((jx, nx, periodic[0]), (jy, ny, periodic[1]), (jz, nz, periodic[2])):
            if per:
                j %= n
            else:
                ok &= (j >= 0) & (j < n)
        a = idx[ok]
        b = (jx[ok] * ny + jy[ok]) * nz + jz[ok]
        keep = mask[a].astype(bool) & mask[b].astype(bool)
        a, b = a[keep], b[keep]
        if W is not None:
            w = np.full(a.shape, float(W[m]))
        else:
            ox, oy, oz = (float(v) for v in o)

            def norm(n):
                q = (Gp[n, 0] * ox * ox + Gp[n, 1] * oy * oy + Gp[n, 2] * oz * oz
                     + 2.0 * (Gp[n, 3] * ox * oy + Gp[n, 4] * ox * oz + Gp[n, 5] * oy * oz))
                return np.sqrt(np.maximum(q, 0.0))

            na, nb = norm(a), norm(b)
            w = (0.5 * (na + nb) + 2.0 * np.sqrt(na * nb)) / 3.0
        # csgraph treats explicit zeros as missing edges
        w = np.maximum(w, 1e-300)
        rows.append(a)
        cols.append(b)
        wts.append(w)
    src = np.asarray(sources)
    if np.any(~mask[src].astype(bool)):
        raise ValueError("source node is masked out")
    graph = csr_matrix(
        (np.concatenate(wts), (np.concatenate(rows), np.concatenate(cols))), shape=(N, N)
    )
    d = dijkstra(graph, directed=True, indices=src, min_only=True)
    return np.asarray(d, dtype=float)


def run_dijkstra(G, mask, dims, periodic, offsets, sources, target=-1, backend=None):
    """Dispatch to the compiled kernel or the fallback.

    ``G`` is ``(N,3,3)`` in grid-index units, ``mask`` a boolean array of
    length ``N``; returns the distance array (``inf`` for unreachable nodes).
    """
    backend = backend or BACKEND
    Gp = _pack(np.asarray(G, dtype=float).reshape(-1, 3, 3))
    mask = np.ascontiguousarray(np.asarray(mask, dtype=np.uint8).reshape(-1))
    offsets = np.ascontiguousarray(offsets, dtype=np.int64)
    sources = np.ascontiguousarray(np.atleast_1d(sources), dtype=np.int64)
    dims = tuple(int(d) for d in dims)
    periodic = tuple(bool(p) for p in periodic)
    if backend == "cython":
        if _compiled_dijkstra is None:
            raise RuntimeError("compiled kernel not available")
        return _compiled_dijkstra(Gp, mask, dims, periodic, offsets, sources, int(target))
    return _python_dijkstra(Gp, mask, dims, periodic, offsets, sources, target)


def run_lattice_dijkstra(W, mask, dims, periodic, offsets, sources, center, shear, target=-1,
                         backend=None):
    """Left-invariant lattice graph: fixed weight ``W[m]`` per offset, sheared third index."""
    backend = backend or BACKEND
    W = np.ascontiguousarray(W, dtype=float)
    mask = np.ascontiguousarray(np.asarray(mask, dtype=np.uint8).reshape(-1))
    offsets = np.ascontiguousarray(offsets, dtype=np.int64)
    sources = np.ascontiguousarray(np.atleast_1d(sources), dtype=np.int64)
    dims = tuple(int(d) for d in dims)
    periodic = tuple(bool(p) for p in periodic)
    cx, cy = (int(c) for c in center)
    if backend == "cython":
        if _compiled_lattice is None:
            raise RuntimeError("compiled kernel not available")
        return _compiled_lattice(W, mask, dims, periodic, offsets, sources, cx, cy, int(shear), int(target))
    return _python_dijkstra(None, mask, dims, periodic, offsets, sources, target, W=W,
                            shear=(cx, cy, int(shear)))


# -- sampling charts ----------------------------------------------------------

@dataclass
class AxisMap:
    """Monotone map ``x = f(xi)`` of one working coordinate.

    ``kind='linear'`` is the identity; ``kind='sinh'`` is ``x = s sinh(xi/s)``,
    which gives roughly logarithmic resolution for large ``|x|``.
    """

    kind: str = "linear"
    scale: float = 1.0

    def forward(self, xi):
        if self.kind == "sinh":
            return self.scale * np.sinh(np.asarray(xi) / self.scale)
        return np.asarray(xi, dtype=float)

    def inverse(self, x):
        if self.kind == "sinh":
            return self.scale * np.arcsinh(np.asarray(x) / self.scale)
        return np.asarray(x, dtype=float)

    def derivative(self, xi):
        if self.kind == "sinh":
            return np.cosh(np.asarray(xi) / self.scale)
        return np.ones_like(np.asarray(xi, dtype=float))


@dataclass
class GridSpec:
    """Tensor grid on a sampling chart.

    Attributes
    ----------
    lo, hi : per-axis bounds in ``xi`` (unused axes have ``lo == hi``)
    n : per-axis node counts (1 for unused axes)
    periodic : axes that wrap; the grid then covers ``[lo, hi)``
    maps : per-axis :class:`AxisMap`
    """

    lo: np.ndarray
    hi: np.ndarray
    n: tuple
    periodic: tuple = (False, False, False)
    maps: tuple = field(default_factory=lambda: (AxisMap(), AxisMap(), AxisMap()))

    def axes(self):
        out = []
        for a in range(3):
            if self.n[a] == 1:
                out.append(np.array([self.lo[a]], dtype=float))
            elif self.periodic[a]:
                out.append(self.lo[a] + (self.hi[a] - self.lo[a]) * np.arange(self.n[a]) / self.n[a])
            else:
                out.append(np.linspace(self.lo[a], self.hi[a], self.n[a]))
        return out

    def spacing(self):
        h = np.zeros(3)
        for a in range(3):
            if self.n[a] > 1:
                span = self.hi[a] - self.lo[a]
                h[a] = span / (self.n[a] if self.periodic[a] else self.n[a] - 1)
        return h

    def nodes_xi(self):
        ax = self.axes()
        grid = np.meshgrid(*ax, indexing="ij")
        return np.stack([g.ravel() for g in grid], axis=1)

    def to_work(self, xi):
        xi = np.asarray(xi, dtype=float)
        return np.stack([self.maps[a].forward(xi[..., a]) for a in range(3)], axis=-1)

    def from_work(self, X):
        X = np.asarray(X, dtype=float)
        return np.stack([self.maps[a].inverse(X[..., a]) for a in range(3)], axis=-1)

    def jac_diag(self, xi):
        xi = np.asarray(xi, dtype=float)
        return np.stack([self.maps[a].derivative(xi[..., a]) for a in range(3)], axis=-1)

    def flat_index(self, ijk):
        ijk = np.asarray(ijk)
        return (ijk[..., 0] * self.n[1] + ijk[..., 1]) * self.n[2] + ijk[..., 2]

    def nearest_index(self, xi):
        """Nearest node (per-axis rounding in ``xi``)."""
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        h = self.spacing()
        out = np.zeros(xi.shape, dtype=np.int64)
        for a in range(3):
            if self.n[a] == 1:
                continue
            t = np.rint((xi[:, a] - self.lo[a]) / h[a]).astype(np.int64)
            out[:, a] = t % self.n[a] if self.periodic[a] else np.clip(t, 0, self.n[a] - 1)
        return out


class DistanceField:
    """Shortest-path distance from a set of sources over a metric grid graph.

    Parameters
    ----------
    metric : callable mapping working coordinates ``(N,3)`` to tensors ``(N,3,3)``
        (unused axes must carry a positive diagonal entry; it is ignored).
    grid : GridSpec
    sources : working coordinates of the source points (snapped to nodes)
    radius : stencil sup-norm radius
    mask : optional callable ``xi -> bool`` restricting the node set
    """

    def __init__(self, metric, grid: GridSpec, sources, radius: int = 3, mask=None,
                 target=None, backend=None):
        self.grid = grid
        xi = grid.nodes_xi()
        X = grid.to_work(xi)
        J = grid.jac_diag(xi) * grid.spacing()[None, :]
        G = metric(X) * J[:, :, None] * J[:, None, :]
        self.node_mask = np.ones(len(xi), dtype=bool) if mask is None else np.asarray(mask(xi), dtype=bool)
        src = grid.flat_index(grid.nearest_index(grid.from_work(np.atleast_2d(sources))))
        tgt = -1
        if target is not None:
            tgt = int(grid.flat_index(grid.nearest_index(grid.from_work(np.atleast_2d(target))))[0])
        active = tuple(n > 1 for n in grid.n)
        self.offsets = stencil(int(radius), active)
        self.values = run_dijkstra(G, self.node_mask, grid.n, grid.periodic, self.offsets, src,
                                   tgt, backend=backend)
        self.target_index = tgt

    def at_node(self, flat):
        return self.values[flat]

    def interpolate(self, X) -> np.ndarray:
        """Multilinear interpolation of the field at working coordinates ``X``.

        Points outside the grid (on non-periodic axes) return ``inf``.
        """
        from scipy.interpolate import RegularGridInterpolator

        g = self.grid
        xi = g.from_work(np.atleast_2d(X))
        axes = g.axes()
        vals = self.values.reshape(g.n)
        pts = []
        keep_axes = []
        for a in range(3):
            if g.n[a] == 1:
                continue
            ax = axes[a]
            v = xi[:, a]
            if g.periodic[a]:
                span = g.hi[a] - g.lo[a]
                v = g.lo[a] + np.mod(v - g.lo[a], span)
                ax = np.append(ax, g.hi[a])
                vals = np.concatenate([vals, np.take(vals, [0], axis=a)], axis=a)
            pts.append(v)
            keep_axes.append(ax)
        vals = vals.reshape([len(a) for a in keep_axes])
        interp = RegularGridInterpolator(keep_axes, vals, bounds_error=False, fill_value=np.inf)
        return interp(np.stack(pts, axis=1))


def graph_distance(metric, grid: GridSpec, p, q, radius: int = 3, mask=None, backend=None) -> float:
    """Graph distance between the nodes nearest to ``p`` and ``q`` (working coordinates)."""
    f = DistanceField(metric, grid, p, radius=radius, mask=mask, target=q, backend=backend)
    d = float(f.values[f.target_index])
    if not np.isfinite(d):
        raise NoPathFound("target not reachable in the grid graph")
    return d


class LatticeField(DistanceField):
    """Distance field of a left-invariant graph on a lattice of a Heisenberg-type group.

    For the law ``z'' = z + z' + 2 (y x' - x y')`` the grid with spacings
    ``(h, h, 2 h^2 / shear)`` and a node at the identity is closed under
    multiplication, so every node gets the same stencil of left-translated
    offsets, each with a fixed weight (an approximation of the distance
    from the identity to the offset element).  Unlike the coordinate grid
    graph, this stays accurate where the chart is strongly sheared.
    """

    def __init__(self, grid: GridSpec, weights, offsets, shear: int, sources, mask=None,
                 target=None, backend=None):
        self.grid = grid
        xi = grid.nodes_xi()
        self.node_mask = np.ones(len(xi), dtype=bool) if mask is None else np.asarray(mask(xi), dtype=bool)
        center = grid.nearest_index(np.zeros((1, 3)))[0]
        src = grid.flat_index(grid.nearest_index(np.atleast_2d(sources)))
        tgt = -1
        if target is not None:
            tgt = int(grid.flat_index(grid.nearest_index(np.atleast_2d(target)))[0])
        self.offsets = np.asarray(offsets, dtype=np.int64)
        self.values = run_lattice_dijkstra(weights, self.node_mask, grid.n, grid.periodic, self.offsets,
                                           src, center[:2], shear, tgt, backend=backend)
        self.target_index = tgt
