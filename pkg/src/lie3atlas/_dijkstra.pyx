# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Dijkstra on an implicit 3-D grid graph with metric-weighted stencil edges."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, INFINITY
from libc.stdlib cimport malloc, realloc, free

cnp.import_array()


cdef struct HeapItem:
    double key
    Py_ssize_t node


cdef inline void _push(HeapItem** heap, Py_ssize_t* size, Py_ssize_t* cap,
                       double key, Py_ssize_t node) nogil:
    cdef Py_ssize_t i, parent
    cdef HeapItem tmp
    if size[0] == cap[0]:
        cap[0] = cap[0] * 2
        heap[0] = <HeapItem*> realloc(heap[0], cap[0] * sizeof(HeapItem))
    i = size[0]
    size[0] += 1
    heap[0][i].key = key
    heap[0][i].node = node
    while i > 0:
        parent = (i - 1) >> 1
        if heap[0][parent].key <= heap[0][i].key:
            break
        tmp = heap[0][parent]
        heap[0][parent] = heap[0][i]
        heap[0][i] = tmp
        i = parent


cdef inline HeapItem _pop(HeapItem* heap, Py_ssize_t* size) nogil:
    cdef HeapItem top = heap[0]
    cdef HeapItem tmp
    cdef Py_ssize_t i = 0, child, n
    size[0] -= 1
    n = size[0]
    heap[0] = heap[n]
    while True:
        child = 2 * i + 1
        if child >= n:
            break
        if child + 1 < n and heap[child + 1].key < heap[child].key:
            child += 1
        if heap[i].key <= heap[child].key:
            break
        tmp = heap[i]
        heap[i] = heap[child]
        heap[child] = tmp
        i = child
    return top


cdef inline double _norm(const double[:, ::1] G, Py_ssize_t a,
                         double ox, double oy, double oz) nogil:
    # G rows hold (g00, g11, g22, g01, g02, g12)
    cdef double q = (G[a, 0] * ox * ox + G[a, 1] * oy * oy + G[a, 2] * oz * oz
                     + 2.0 * (G[a, 3] * ox * oy + G[a, 4] * ox * oz + G[a, 5] * oy * oz))
    if q < 0.0:
        q = 0.0
    return sqrt(q)


cdef _run(const double[:, ::1] G, const double[::1] W, bint invariant,
          const unsigned char[::1] mask, dims, periodic,
          const long[:, ::1] offsets, const long[::1] sources, Py_ssize_t target,
          Py_ssize_t cx, Py_ssize_t cy, long shear):
    cdef Py_ssize_t nx = dims[0], ny = dims[1], nz = dims[2]
    cdef bint px = periodic[0], py = periodic[1], pz = periodic[2]
    cdef Py_ssize_t N = nx * ny * nz
    cdef Py_ssize_t M = offsets.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dist_arr = np.full(N, np.inf)
    cdef double[::1] dist = dist_arr
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] done_arr = np.zeros(N, dtype=np.uint8)
    cdef unsigned char[::1] done = done_arr
    cdef Py_ssize_t cap = 1024, size = 0
    cdef HeapItem* heap
    cdef HeapItem item
    cdef Py_ssize_t a, b, ix, iy, iz, jx, jy, jz, m, s
    cdef double na, nb, w, nd, ox, oy, oz
    for s in range(sources.shape[0]):
        if sources[s] < 0 or sources[s] >= N:
            raise ValueError("source index out of range")
        if not mask[sources[s]]:
            raise ValueError("source node is masked out")
    heap = <HeapItem*> malloc(cap * sizeof(HeapItem))
    with nogil:
        for s in range(sources.shape[0]):
            dist[sources[s]] = 0.0
            _push(&heap, &size, &cap, 0.0, sources[s])
        while size > 0:
            item = _pop(heap, &size)
            a = item.node
            if done[a]:
                continue
            done[a] = 1
            if a == target:
                break
            iz = a % nz
            iy = (a // nz) % ny
            ix = a // (ny * nz)
            for m in range(M):
                jx = ix + offsets[m, 0]
                jy = iy + offsets[m, 1]
                jz = iz + offsets[m, 2]
                if shear != 0:
                    jz = jz + shear * ((iy - cy) * offsets[m, 0] - (ix - cx) * offsets[m, 1])
                if jx < 0 or jx >= nx:
                    if not px:
                        continue
                    jx = (jx % nx + nx) % nx
                if jy < 0 or jy >= ny:
                    if not py:
                        continue
                    jy = (jy % ny + ny) % ny
                if jz < 0 or jz >= nz:
                    if not pz:
                        continue
                    jz = (jz % nz + nz) % nz
                b = (jx * ny + jy) * nz + jz
                if done[b] or not mask[b]:
                    continue
                if invariant:
                    w = W[m]
                else:
                    ox = offsets[m, 0]
                    oy = offsets[m, 1]
                    oz = offsets[m, 2]
                    na = _norm(G, a, ox, oy, oz)
                    nb = _norm(G, b, ox, oy, oz)
                    w = (0.5 * (na + nb) + 2.0 * sqrt(na * nb)) / 3.0
                nd = dist[a] + w
                if nd < dist[b]:
                    dist[b] = nd
                    _push(&heap, &size, &cap, nd, b)
    free(heap)
    return dist_arr


def grid_dijkstra(const double[:, ::1] G, const unsigned char[::1] mask, dims, periodic,
                  const long[:, ::1] offsets, const long[::1] sources, Py_ssize_t target=-1):
    """Multi-source shortest paths; returns the distance array (inf = unreached).

    ``G`` holds the metric tensor at each node in grid-index units.  The
    edge weight for offset ``o`` between nodes ``a`` and ``b`` is
    ``(T + 2 M) / 3`` with ``T`` and ``M`` the arithmetic and geometric means
    of ``|o|_{G_a}`` and ``|o|_{G_b}``.  Stops early once ``target`` is settled.
    """
    cdef double[::1] W = np.zeros(1)
    return _run(G, W, False, mask, dims, periodic, offsets, sources, target, 0, 0, 0)


def lattice_dijkstra(const double[::1] W, const unsigned char[::1] mask, dims, periodic,
                     const long[:, ::1] offsets, const long[::1] sources, Py_ssize_t cx,
                     Py_ssize_t cy, long shear, Py_ssize_t target=-1):
    """Shortest paths on a left-invariant lattice graph.

    Offset ``m`` has the fixed weight ``W[m]``.  The neighbour of node
    ``(i, j, k)`` moves the third index by ``o_z + shear * ((j - cy) o_x - (i - cx) o_y)``,
    which is left translation in a Heisenberg-type law.
    """
    cdef double[:, ::1] G = np.zeros((1, 6))
    return _run(G, W, True, mask, dims, periodic, offsets, sources, target, cx, cy, shear)
