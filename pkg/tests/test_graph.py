import os
import subprocess
import sys

import numpy as np
import pytest

from lie3atlas import graph
from lie3atlas.errors import NoPathFound
from lie3atlas.graph import DistanceField, GridSpec, LatticeField, graph_distance, run_dijkstra, stencil

needs_compiled = pytest.mark.skipif(graph._compiled_dijkstra is None, reason="compiled kernel not built")


def euclid(X):
    return np.broadcast_to(np.eye(3), (len(X), 3, 3)).copy()


def grid(n=9, lo=-2.0, hi=2.0, periodic=(False, False, False)):
    return GridSpec(np.full(3, lo), np.full(3, hi), (n, n, n), periodic)


def test_stencil_counts():
    assert len(stencil(1)) == 26
    # radius 2: 124 nonzero offsets, of which the 26 doubled unit offsets are not primitive
    assert len(stencil(2)) == 98
    assert len(stencil(1, (True, True, False))) == 8
    s = stencil(3)
    assert not s.flags.writeable
    assert {tuple(o) for o in s} == {tuple(-o) for o in s}


def test_euclidean_axis_and_diagonal():
    g = grid()
    h = g.spacing()[0]
    assert graph_distance(euclid, g, [-2, 0, 0], [2, 0, 0], radius=1) == pytest.approx(4.0)
    assert graph_distance(euclid, g, [-2, -2, -2], [2, 2, 2], radius=1) == pytest.approx(4 * np.sqrt(3))
    # (2, 1, 0) steps are exact with radius 2
    assert graph_distance(euclid, g, [-2, -2, 0], [-2 + 4 * h, -2 + 2 * h, 0], radius=2) == pytest.approx(
        np.hypot(4 * h, 2 * h))


def test_periodic_axis_wraps():
    g = GridSpec(np.array([-2.0, -2.0, 0.0]), np.array([2.0, 2.0, 1.0]), (9, 9, 8), (False, False, True))
    # z = 0 and z = 7/8 are neighbours across the seam
    assert graph_distance(euclid, g, [0, 0, 0], [0, 0, 0.875], radius=1) == pytest.approx(0.125)


def test_mask_disconnects():
    g = grid()
    with pytest.raises(NoPathFound):
        graph_distance(euclid, g, [-2, 0, 0], [2, 0, 0], radius=1, mask=lambda xi: np.abs(xi[:, 0]) > 0.6)


def test_interpolate_matches_nodes():
    g = grid()
    f = DistanceField(euclid, g, [0, 0, 0], radius=2)
    xi = g.nodes_xi()
    np.testing.assert_allclose(f.interpolate(xi), f.values, atol=1e-12)
    assert np.isinf(f.interpolate([[5.0, 0, 0]]))[0]


def _random_problem(rng, n=7, periodic=(False, True, False)):
    M = rng.normal(size=(n ** 3, 3, 3)) * 0.3
    G = M @ np.swapaxes(M, 1, 2) + np.eye(3)
    mask = rng.random(n ** 3) > 0.1
    src = int(np.flatnonzero(mask)[0])
    mask[src] = True
    return G, mask, (n, n, n), periodic, stencil(2), src


@needs_compiled
@pytest.mark.parametrize("periodic", [(False, False, False), (False, True, False), (True, True, True)])
def test_backends_agree(rng, periodic):
    G, mask, dims, per, offs, src = _random_problem(rng, periodic=periodic)
    a = run_dijkstra(G, mask, dims, per, offs, src, backend="cython")
    b = run_dijkstra(G, mask, dims, per, offs, src, backend="python")
    np.testing.assert_array_equal(np.isinf(a), np.isinf(b))
    fin = np.isfinite(a)
    np.testing.assert_allclose(a[fin], b[fin], rtol=1e-12)
    assert np.all(np.isinf(a[~mask]))


@needs_compiled
def test_target_early_exit_is_exact(rng):
    G, mask, dims, per, offs, src = _random_problem(rng)
    full = run_dijkstra(G, mask, dims, per, offs, src)
    tgt = int(np.flatnonzero(np.isfinite(full))[-1])
    for backend in ("cython", "python"):
        part = run_dijkstra(G, mask, dims, per, offs, src, target=tgt, backend=backend)
        assert part[tgt] == pytest.approx(full[tgt], rel=1e-12)


@needs_compiled
@pytest.mark.parametrize("shear", [1, 2])
def test_lattice_backends_agree(rng, shear):
    g = GridSpec(np.array([-2.0, -2.0, -4.0]), np.array([2.0, 2.0, 4.0]), (9, 9, 17))
    offs = stencil(1)
    W = rng.uniform(0.5, 1.5, len(offs))
    a = LatticeField(g, W, offs, shear, [0, 0, 0], backend="cython").values
    b = LatticeField(g, W, offs, shear, [0, 0, 0], backend="python").values
    np.testing.assert_allclose(a, b, rtol=1e-12)
    assert np.isfinite(a).any() and a.min() == 0.0


def test_pure_environment_selects_fallback():
    code = "from lie3atlas import graph; print(graph.BACKEND, graph._compiled_dijkstra is None)"
    env = dict(os.environ, LIE3ATLAS_PURE="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["python", "True"]


def test_default_backend_reported():
    assert graph.BACKEND in ("cython", "python")
    if graph._compiled_dijkstra is not None:
        assert graph.BACKEND == "cython" or os.environ.get("LIE3ATLAS_PURE")
