"""Confluence of shortest-path-tree geodesics across a metric annulus."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .balls import filled_metric_ball
from .core import DomainError
from .lfpp import DistanceField


@njit(cache=True)
def _first_hits(order, pred, inner_boundary):
    """For every vertex, the first inner-boundary vertex on its tree path (or -1)."""
    anc = np.full(pred.size, -1, dtype=np.int64)
    for v in order:
        p = pred[v]
        if p >= 0 and anc[p] >= 0:
            anc[v] = anc[p]
        elif inner_boundary[v]:
            anc[v] = v
    return anc


@dataclass
class ConfluenceReport:
    seed: int
    center: tuple
    s: float
    ts: list = field(default_factory=list)
    ancestor_counts: list = field(default_factory=list)
    targets_per_t: list = field(default_factory=list)
    ancestors: list = field(default_factory=list)
    targets: str = "all_boundary"

    def write_csv(self, path, append: bool = False) -> None:
        with open(path, "a" if append else "w", newline="") as fh:
            w = csv.writer(fh)
            if not append:
                w.writerow(["seed", "s", "t", "targets", "ancestor_count"])
            for t, c in zip(self.ts, self.ancestor_counts):
                w.writerow([self.seed, repr(self.s), repr(t), self.targets, c])


def ancestor_map(dfield: DistanceField, s: float) -> np.ndarray:
    """Per-vertex flat index of the first crossing of the filled-ball boundary at ``s``."""
    inner = filled_metric_ball(dfield, s)
    dist = dfield.dist.ravel()
    finite = np.flatnonzero(np.isfinite(dist))
    order = finite[np.argsort(dist[finite], kind="stable")]
    return _first_hits(order, dfield.predecessor.ravel(), inner.boundary.ravel())


def confluence_statistic(dfield: DistanceField, s: float, t: float, targets="all_boundary", anc=None):
    """Distinct first crossings of the boundary of B_s for targets on the boundary of B_t.

    ``targets`` is ``"all_boundary"`` or ``("sample", m, seed)``. Returns
    ``(ancestor_count, n_targets, ancestor_vertices)``.
    """
    if not 0 < s < t:
        raise DomainError(f"need 0 < s < t, got s={s}, t={t}")
    graph = dfield.graph
    if anc is None:
        anc = ancestor_map(dfield, s)
    outer = filled_metric_ball(dfield, t)
    tgt = np.flatnonzero(outer.boundary.ravel())
    if targets != "all_boundary":
        kind, m, seed = targets
        if kind != "sample":
            raise DomainError(f"unknown target spec {targets!r}")
        rng = np.random.Generator(np.random.Philox(key=int(seed)))
        tgt = np.sort(rng.choice(tgt, size=min(int(m), tgt.size), replace=False))
    hits = anc[tgt]
    if np.any(hits < 0):
        raise DomainError("a target path never crosses the inner filled-ball boundary")
    uniq = np.unique(hits)
    return int(uniq.size), int(tgt.size), [graph.vertex(i) for i in uniq]


def confluence_report(dfield: DistanceField, s: float, ts, targets="all_boundary", seed: int = 0) -> ConfluenceReport:
    anc = ancestor_map(dfield, s)
    tag = targets if isinstance(targets, str) else f"sample({targets[1]})"
    rep = ConfluenceReport(seed, dfield.sources[0], float(s), targets=tag)
    for t in ts:
        count, ntgt, verts = confluence_statistic(dfield, s, t, targets, anc=anc)
        rep.ts.append(float(t))
        rep.ancestor_counts.append(count)
        rep.targets_per_t.append(ntgt)
        rep.ancestors.append(verts)
    return rep
