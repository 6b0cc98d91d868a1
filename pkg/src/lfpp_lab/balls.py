"""Metric balls, filled metric balls and hitting radii."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .core import DomainError, GeometryError
from .lfpp import DistanceField, MetricGraph

_STRUCTURES = {
    "four": ndimage.generate_binary_structure(2, 1),
    "eight": ndimage.generate_binary_structure(2, 2),
}


@dataclass(frozen=True, eq=False)
class FilledBall:
    center: tuple
    radius: float
    vertices: np.ndarray  # window-shaped mask
    boundary: np.ndarray  # window-shaped mask

    def __len__(self):
        return int(self.vertices.sum())


def _single_source(dfield: DistanceField):
    if len(dfield.sources) != 1:
        raise DomainError("ball operations need a single-source distance field")
    return dfield.sources[0]


def metric_ball(dfield: DistanceField, s: float) -> np.ndarray:
    """Closed ball ``{v : dist(v) <= s}`` as a window-shaped mask."""
    if s < 0:
        raise DomainError("radius must be >= 0")
    _single_source(dfield)
    return dfield.dist <= s


def label_components(mask: np.ndarray, graph: MetricGraph):
    """Connected components of ``mask`` under the graph's stencil adjacency."""
    structure = _STRUCTURES.get(graph.stencil)
    if structure is not None:
        labels, count = ndimage.label(mask, structure=structure)
        return labels, count
    nx, ny = mask.shape
    idx = np.full(mask.shape, -1, dtype=np.int64)
    idx[mask] = np.arange(int(mask.sum()))
    rows, cols = [], []
    for dx, dy in graph.offsets:
        xs = slice(max(0, -dx), nx - max(0, dx))
        ys = slice(max(0, -dy), ny - max(0, dy))
        xt = slice(max(0, dx), nx - max(0, -dx) if dx < 0 else nx)
        yt = slice(max(0, dy), ny - max(0, -dy) if dy < 0 else ny)
        both = mask[xs, ys] & mask[xt, yt]
        rows.append(idx[xs, ys][both])
        cols.append(idx[xt, yt][both])
    m = int(mask.sum())
    r, c = np.concatenate(rows), np.concatenate(cols)
    adj = coo_matrix((np.ones(r.size, dtype=np.int8), (r, c)), shape=(m, m))
    count, comp = connected_components(adj, directed=False)
    labels = np.zeros(mask.shape, dtype=np.int64)
    labels[mask] = comp + 1
    return labels, count


def boundary_mask(mask: np.ndarray, graph: MetricGraph) -> np.ndarray:
    """Vertices of ``mask`` with a stencil neighbour (inside the window) outside it."""
    nx, ny = mask.shape
    out = np.zeros_like(mask)
    for dx, dy in graph.offsets:
        xs = slice(max(0, -dx), nx - max(0, dx))
        ys = slice(max(0, -dy), ny - max(0, dy))
        xt = slice(max(0, dx), nx + min(0, dx))
        yt = slice(max(0, dy), ny + min(0, dy))
        out[xs, ys] |= mask[xs, ys] & ~mask[xt, yt]
    return out


def _touches_edge(mask: np.ndarray) -> bool:
    return bool(mask[0, :].any() or mask[-1, :].any() or mask[:, 0].any() or mask[:, -1].any())


def filled_metric_ball(dfield: DistanceField, s: float) -> FilledBall:
    """Closed ball plus every complementary component not touching the window edge."""
    center = _single_source(dfield)
    ball = metric_ball(dfield, s)
    if _touches_edge(ball):
        raise GeometryError(f"ball of radius {s} touches the window boundary")
    graph = dfield.graph
    labels, _ = label_components(~ball, graph)
    edge_labels = np.unique(
        np.concatenate([labels[0, :], labels[-1, :], labels[:, 0], labels[:, -1]])
    )
    outside = np.isin(labels, edge_labels[edge_labels > 0])
    filled = ~outside
    filled.setflags(write=False)
    bnd = boundary_mask(filled, graph)
    bnd.setflags(write=False)
    return FilledBall(center, float(s), filled, bnd)


def hitting_radius(dfield: DistanceField, r: float) -> float:
    """Minimum distance over vertices within half a spacing of the Euclidean circle of radius r."""
    center = _single_source(dfield)
    graph = dfield.graph
    spec = graph.spec
    a = spec.spacing
    cx, cy = spec.position(center)
    x0, y0, x1, y1 = spec.window
    tol = 1e-9 * spec.side_length
    if cx - r < x0 - tol or cx + r > x1 + tol or cy - r < y0 - tol or cy + r > y1 + tol or r <= 0:
        raise GeometryError(f"circle of radius {r} around {center} exits the window")
    ix, iy = graph.window_indices()
    ring = np.abs(np.hypot(ix * a - cx, iy * a - cy) - r) <= 0.5 * a + 1e-12
    if not ring.any():
        raise GeometryError(f"no vertices near the circle of radius {r}")
    return float(dfield.dist[ring].min())


def write_ball_csv(path, dfield: DistanceField, ball: FilledBall) -> None:
    ix, iy = dfield.graph.window_indices()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["ix", "iy", "dist", "in_fill"])
        sel = ball.vertices | (dfield.dist <= ball.radius)
        for a, b, d, f in zip(ix[sel], iy[sel], dfield.dist[sel], ball.vertices[sel]):
            w.writerow([int(a), int(b), repr(float(d)) if math.isfinite(d) else "inf", int(f)])
