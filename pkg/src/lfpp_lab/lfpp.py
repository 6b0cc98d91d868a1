"""Discrete LFPP metric on the window lattice.

Vertices are global grid indices ``(ix, iy)``; only vertices inside the
measurement window take part. Path length is the trapezoid rule on vertex
weights ``exp(xi * h_eps)`` along stencil edges.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import _dijkstra
from .core import DomainError, GeometryError, LFPPError
from .mollify import MollifiedField

_FOUR = [(1, 0), (-1, 0), (0, 1), (0, -1)]
_DIAG = [(1, 1), (1, -1), (-1, 1), (-1, -1)]
_KNIGHT = [(1, 2), (1, -2), (-1, 2), (-1, -2), (2, 1), (2, -1), (-2, 1), (-2, -1)]
STENCILS = {"four": _FOUR, "eight": _FOUR + _DIAG, "sixteen": _FOUR + _DIAG + _KNIGHT}


class UnreachableError(LFPPError):
    """Target vertex has infinite distance."""


def stencil_offsets(stencil: str) -> np.ndarray:
    try:
        return np.array(STENCILS[stencil], dtype=np.int64)
    except KeyError:
        raise DomainError(f"unknown stencil {stencil!r}; use one of {sorted(STENCILS)}") from None


def stretched_length(delta, anisotropy_a: float = 1.0) -> float:
    return math.sqrt(delta[0] ** 2 + anisotropy_a * delta[1] ** 2)


@dataclass(frozen=True, eq=False)
class MetricGraph:
    mollified: MollifiedField
    xi: float
    stencil: str
    anisotropy_a: float
    vertex_weight: np.ndarray  # window-shaped
    offsets: np.ndarray
    lengths: np.ndarray  # physical stretched length per offset

    @property
    def spec(self):
        return self.mollified.spec

    @property
    def origin(self):
        ix0, _, iy0, _ = self.spec.index_bounds
        return ix0, iy0

    @property
    def shape(self):
        return self.vertex_weight.shape

    def local(self, vertex):
        ix0, iy0 = self.origin
        lx, ly = vertex[0] - ix0, vertex[1] - iy0
        nx, ny = self.shape
        if not (0 <= lx < nx and 0 <= ly < ny):
            raise GeometryError(f"vertex {tuple(vertex)} outside window")
        return lx, ly

    def flat(self, vertex) -> int:
        lx, ly = self.local(vertex)
        return lx * self.shape[1] + ly

    def vertex(self, flat: int):
        ix0, iy0 = self.origin
        lx, ly = divmod(int(flat), self.shape[1])
        return (lx + ix0, ly + iy0)

    def window_indices(self):
        """Global ``(IX, IY)`` index arrays over the window."""
        ix0, iy0 = self.origin
        nx, ny = self.shape
        return np.meshgrid(np.arange(ix0, ix0 + nx), np.arange(iy0, iy0 + ny), indexing="ij")

    def as_mask(self, region) -> np.ndarray:
        """Window-shaped boolean mask from a mask, a vertex predicate, or None."""
        if region is None:
            return np.ones(self.shape, dtype=bool)
        if callable(region):
            ix, iy = self.window_indices()
            mask = np.asarray(region(ix, iy), dtype=bool)
        else:
            mask = np.asarray(region, dtype=bool)
        if mask.shape != self.shape:
            raise GeometryError(f"region mask shape {mask.shape} != window shape {self.shape}")
        return mask


def edge_cost(graph: MetricGraph, u, v) -> float:
    delta = (v[0] - u[0], v[1] - u[1])
    for k, off in enumerate(graph.offsets):
        if off[0] == delta[0] and off[1] == delta[1]:
            lu, lv = graph.local(u), graph.local(v)
            w = graph.vertex_weight
            return float(graph.lengths[k] * (0.5 * (w[lu] + w[lv])))
    raise GeometryError(f"{u} and {v} are not stencil neighbours")


def build_graph(mollified: MollifiedField, xi: float, stencil: str = "eight", anisotropy_a: float = 1.0) -> MetricGraph:
    if not xi > 0:
        raise DomainError(f"xi must be positive, got {xi}")
    if not anisotropy_a >= 1:
        raise DomainError(f"anisotropy_a must be >= 1, got {anisotropy_a}")
    spec = mollified.spec
    offsets = stencil_offsets(stencil)
    lengths = spec.spacing * np.sqrt(offsets[:, 0] ** 2 + anisotropy_a * offsets[:, 1] ** 2.0)
    ix0, ix1, iy0, iy1 = spec.index_bounds
    h = mollified.values[ix0 : ix1 + 1, iy0 : iy1 + 1]
    weight = np.exp(xi * h)
    if not np.all(np.isfinite(weight)) or not np.all(weight > 0):
        raise DomainError("vertex weights must be finite and positive")
    weight.setflags(write=False)
    return MetricGraph(mollified, float(xi), stencil, float(anisotropy_a), weight, offsets, lengths)


def weyl_shift(graph: MetricGraph, f) -> MetricGraph:
    """Graph of the field plus ``f`` (scalar, window-shaped or full-grid array)."""
    spec = graph.spec
    f = np.asarray(f, dtype=np.float64)
    if f.ndim == 2 and f.shape == graph.shape:
        full = np.zeros((spec.n, spec.n))
        ix0, iy0 = graph.origin
        full[ix0 : ix0 + f.shape[0], iy0 : iy0 + f.shape[1]] = f
        f = full
    if not np.all(np.isfinite(f)):
        raise DomainError("f must be finite")
    m = graph.mollified
    shifted = MollifiedField(m.base, m.eps, m.values + f)
    return build_graph(shifted, graph.xi, graph.stencil, graph.anisotropy_a)


@dataclass(frozen=True, eq=False)
class DistanceField:
    graph: MetricGraph
    sources: tuple
    dist: np.ndarray  # window-shaped, inf where unreachable
    predecessor: np.ndarray  # window-shaped flat indices, -1 at roots

    def at(self, vertex) -> float:
        return float(self.dist[self.graph.local(vertex)])

    def write_csv(self, path) -> None:
        ix, iy = self.graph.window_indices()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["ix", "iy", "dist"])
            for a, b, d in zip(ix.ravel(), iy.ravel(), self.dist.ravel()):
                w.writerow([int(a), int(b), repr(float(d))])


@dataclass(frozen=True)
class Geodesic:
    vertices: list
    length: float

    def cumulative_lengths(self, graph: MetricGraph):
        out = [0.0]
        for u, v in zip(self.vertices, self.vertices[1:]):
            out.append(out[-1] + edge_cost(graph, u, v))
        return out

    def write_csv(self, path, graph: MetricGraph) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "ix", "iy", "cumulative_length"])
            for i, (v, c) in enumerate(zip(self.vertices, self.cumulative_lengths(graph))):
                w.writerow([i, v[0], v[1], repr(float(c))])


def _run(graph, source_flat, blocked=None, stop=None):
    shape = graph.shape
    if blocked is None:
        blocked = np.zeros(shape, dtype=bool)
    use_stop = stop is not None
    if stop is None:
        stop = np.zeros(shape, dtype=bool)
    return _dijkstra.dijkstra(
        graph.vertex_weight,
        graph.offsets,
        graph.lengths,
        np.asarray(source_flat, dtype=np.int64),
        np.ascontiguousarray(blocked, dtype=np.bool_),
        np.ascontiguousarray(stop, dtype=np.bool_),
        use_stop,
    )


def _source_indices(graph, sources):
    if isinstance(sources, np.ndarray) and sources.dtype == bool:
        flat = np.flatnonzero(graph.as_mask(sources).ravel())
        verts = tuple(graph.vertex(i) for i in flat)
    else:
        verts = tuple((int(s[0]), int(s[1])) for s in sources)
        flat = np.array([graph.flat(v) for v in verts], dtype=np.int64)
    if len(flat) == 0:
        raise DomainError("sources must be nonempty")
    return verts, flat


def distance_field(graph: MetricGraph, sources) -> DistanceField:
    """Exact shortest-path distances from a vertex set (list of vertices or mask).

    Predecessor ties go to the smallest vertex index.
    """
    verts, flat = _source_indices(graph, sources)
    dist, pred, _ = _run(graph, flat)
    shape = graph.shape
    return DistanceField(graph, verts, dist.reshape(shape), pred.reshape(shape))


def point_distance(graph: MetricGraph, u, v) -> float:
    u, v = tuple(u), tuple(v)
    if u == v:
        graph.local(u)
        return 0.0
    stop = np.zeros(graph.shape, dtype=bool)
    stop[graph.local(v)] = True
    dist, _, _ = _run(graph, [graph.flat(u)], stop=stop)
    return float(dist[graph.flat(v)])


def set_distance(graph: MetricGraph, sources, targets, region=None) -> float:
    """Distance between two vertex sets (masks), optionally inside a region."""
    src = np.flatnonzero(graph.as_mask(sources).ravel())
    tgt = graph.as_mask(targets)
    blocked = None if region is None else ~graph.as_mask(region)
    dist, _, hit = _run(graph, src, blocked=blocked, stop=tgt)
    return math.inf if hit < 0 else float(dist[hit])


def trace_geodesic(dfield: DistanceField, target) -> Geodesic:
    graph = dfield.graph
    t = graph.flat(target)
    d = dfield.dist.ravel()
    if not math.isfinite(d[t]):
        raise UnreachableError(f"target {tuple(target)} is unreachable")
    pred = dfield.predecessor.ravel()
    path = [t]
    while pred[path[-1]] >= 0:
        path.append(int(pred[path[-1]]))
    path.reverse()
    return Geodesic([graph.vertex(i) for i in path], float(d[t]))


def internal_distance(graph: MetricGraph, u, v, region) -> float:
    """Shortest path using only vertices in ``region``; inf if disconnected."""
    mask = graph.as_mask(region)
    u, v = tuple(u), tuple(v)
    if not (mask[graph.local(u)] and mask[graph.local(v)]):
        raise GeometryError("endpoints must satisfy the region predicate")
    if u == v:
        return 0.0
    stop = np.zeros(graph.shape, dtype=bool)
    stop[graph.local(v)] = True
    dist, _, hit = _run(graph, [graph.flat(u)], blocked=~mask, stop=stop)
    return math.inf if hit < 0 else float(dist[hit])
