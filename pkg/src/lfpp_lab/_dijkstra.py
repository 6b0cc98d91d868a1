"""Compiled shortest-path kernels on an implicit window lattice.

Vertices are flattened as ``ix * ny + iy``. Edge cost between ``u`` and ``v``
along stencil offset ``k`` is ``lengths[k] * 0.5 * (w[u] + w[v])``.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _heap_push(keys, vals, size, key, val):
    i = size
    keys[i] = key
    vals[i] = val
    while i > 0:
        parent = (i - 1) >> 1
        pk = keys[parent]
        if pk < key or (pk == key and vals[parent] <= val):
            break
        keys[i] = pk
        vals[i] = vals[parent]
        i = parent
    keys[i] = key
    vals[i] = val
    return size + 1


@njit(cache=True, nogil=True)
def _heap_pop(keys, vals, size):
    top_key = keys[0]
    top_val = vals[0]
    size -= 1
    if size == 0:
        return top_key, top_val, size
    key = keys[size]
    val = vals[size]
    i = 0
    while True:
        child = 2 * i + 1
        if child >= size:
            break
        right = child + 1
        if right < size:
            if keys[right] < keys[child] or (
                keys[right] == keys[child] and vals[right] < vals[child]
            ):
                child = right
        ck = keys[child]
        if key < ck or (key == ck and val <= vals[child]):
            break
        keys[i] = ck
        vals[i] = vals[child]
        i = child
    keys[i] = key
    vals[i] = val
    return top_key, top_val, size


@njit(cache=True, nogil=True)
def dijkstra(weights, offsets, lengths, sources, blocked, stop, use_stop):
    """Multi-source Dijkstra.

    Returns ``(dist, pred, hit)``; ``hit`` is the first settled vertex of the
    ``stop`` mask when ``use_stop`` is set, else -1. With early stopping,
    only vertices settled before ``hit`` carry final distances.
    """
    nx, ny = weights.shape
    nv = nx * ny
    w = weights.ravel()
    blk = blocked.ravel()
    stp = stop.ravel()
    dist = np.full(nv, np.inf)
    pred = np.full(nv, -1, dtype=np.int64)
    done = np.zeros(nv, dtype=np.bool_)
    cap = 4 * nv + 16
    keys = np.empty(cap, dtype=np.float64)
    vals = np.empty(cap, dtype=np.int64)
    size = 0
    for s in sources:
        if dist[s] != 0.0:
            dist[s] = 0.0
            size = _heap_push(keys, vals, size, 0.0, s)
    m = offsets.shape[0]
    hit = -1
    while size > 0:
        d, u, size = _heap_pop(keys, vals, size)
        if done[u]:
            continue
        done[u] = True
        if use_stop and stp[u]:
            hit = u
            break
        ux = u // ny
        uy = u - ux * ny
        wu = w[u]
        for k in range(m):
            vx = ux + offsets[k, 0]
            vy = uy + offsets[k, 1]
            if vx < 0 or vx >= nx or vy < 0 or vy >= ny:
                continue
            v = vx * ny + vy
            if blk[v] or done[v]:
                continue
            nd = d + lengths[k] * (0.5 * (wu + w[v]))
            if nd < dist[v]:
                dist[v] = nd
                pred[v] = u
                if size >= keys.shape[0]:
                    nk = np.empty(2 * keys.shape[0], dtype=np.float64)
                    nvals = np.empty(2 * keys.shape[0], dtype=np.int64)
                    nk[:size] = keys[:size]
                    nvals[:size] = vals[:size]
                    keys = nk
                    vals = nvals
                size = _heap_push(keys, vals, size, nd, v)
            elif nd == dist[v] and u < pred[v]:
                pred[v] = u
    return dist, pred, hit
