"""Exhaustive simple-path enumeration on tiny grids (independent of Dijkstra)."""

import numpy as np
from numba import njit


@njit(cache=True)
def _enumerate(weights, offsets, lengths, src):
    nx, ny = weights.shape
    nv = nx * ny
    best = np.full(nv, np.inf)
    on_path = np.zeros(nv, dtype=np.bool_)
    stack_v = np.empty(nv, dtype=np.int64)
    stack_k = np.empty(nv, dtype=np.int64)
    stack_d = np.empty(nv, dtype=np.float64)
    m = offsets.shape[0]
    depth = 0
    stack_v[0] = src
    stack_k[0] = 0
    stack_d[0] = 0.0
    on_path[src] = True
    best[src] = 0.0
    while depth >= 0:
        u = stack_v[depth]
        k = stack_k[depth]
        if k == m:
            on_path[u] = False
            depth -= 1
            continue
        stack_k[depth] = k + 1
        ux, uy = u // ny, u % ny
        vx, vy = ux + offsets[k, 0], uy + offsets[k, 1]
        if vx < 0 or vx >= nx or vy < 0 or vy >= ny:
            continue
        v = vx * ny + vy
        if on_path[v]:
            continue
        d = stack_d[depth] + lengths[k] * (0.5 * (weights[ux, uy] + weights[vx, vy]))
        if d < best[v]:
            best[v] = d
        depth += 1
        stack_v[depth] = v
        stack_k[depth] = 0
        stack_d[depth] = d
        on_path[v] = True
    return best


def min_over_simple_paths(weights: np.ndarray, offsets: np.ndarray, lengths: np.ndarray, source: int) -> np.ndarray:
    """Minimum over every simple path from ``source`` of the path cost summed
    from the source outward; returns a window-shaped array."""
    w = np.ascontiguousarray(weights, dtype=np.float64)
    best = _enumerate(w, np.asarray(offsets, dtype=np.int64), np.asarray(lengths, dtype=np.float64), int(source))
    return best.reshape(w.shape)
