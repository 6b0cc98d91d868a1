import csv

import numpy as np
import pytest

from conftest import zero_graph
from lfpp_lab.balls import filled_metric_ball, hitting_radius
from lfpp_lab.confluence import ancestor_map, confluence_report, confluence_statistic
from lfpp_lab.core import DomainError, GridSpec
from lfpp_lab.field import sample_field
from lfpp_lab.lfpp import build_graph, distance_field, trace_geodesic, weyl_shift
from lfpp_lab.mollify import mollify


def _random_df(seed, n=256):
    spec = GridSpec(n)
    g = build_graph(mollify(sample_field(spec, seed), 4 * spec.spacing), 0.4)
    return distance_field(g, [spec.nearest_vertex(spec.window_center)])


def test_single_sample_target():
    df = _random_df(0)
    s, t = hitting_radius(df, 0.1), hitting_radius(df, 0.3)
    count, ntgt, verts = confluence_statistic(df, s, t, ("sample", 1, 3))
    assert (count, ntgt, len(verts)) == (1, 1, 1)


@pytest.mark.parametrize("seed", range(3))
def test_nested_in_t_and_tree_consistent(seed):
    df = _random_df(seed)
    g = df.graph
    s = hitting_radius(df, 0.1)
    ts = [hitting_radius(df, r) for r in (0.2, 0.3, 0.4)]
    rep = confluence_report(df, s, ts, seed=seed)
    sets = [set(v) for v in rep.ancestors]
    for inner, outer in zip(sets, sets[1:]):
        assert outer <= inner
    for c, n in zip(rep.ancestor_counts, rep.targets_per_t):
        assert 1 <= c <= n
    inner_bnd = filled_metric_ball(df, s).boundary
    outer = filled_metric_ball(df, ts[-1])
    targets = [g.vertex(i) for i in np.flatnonzero(outer.boundary.ravel())]
    on_paths = set()
    for tgt in targets:
        on_paths.update(trace_geodesic(df, tgt).vertices)
    for v in sets[-1]:
        assert inner_bnd[g.local(v)] and v in on_paths


def test_ancestor_is_first_crossing():
    df = _random_df(4)
    g = df.graph
    s, t = hitting_radius(df, 0.1), hitting_radius(df, 0.25)
    anc = ancestor_map(df, s)
    inner = filled_metric_ball(df, s).boundary
    outer = filled_metric_ball(df, t).boundary
    for i in np.flatnonzero(outer.ravel())[::25]:
        path = trace_geodesic(df, g.vertex(i)).vertices
        first = next(v for v in path if inner[g.local(v)])
        assert g.vertex(anc[i]) == first


def test_two_valley_instance():
    xi = 0.5
    g0 = zero_graph(256, xi=xi)  # 129 x 129 window, local center (64, 64)
    ix, iy = np.meshgrid(np.arange(129), np.arange(129), indexing="ij")
    r = np.hypot(ix - 64, iy - 64)
    annulus = (r >= 3) & (r <= 10)
    corridor = iy == 64
    f = np.where(annulus & ~corridor, 10.0 / xi, 0.0)
    g = weyl_shift(g0, f)
    c = g.vertex(64 * 129 + 64)
    df = distance_field(g, [c])
    a = g.spec.spacing
    s = 6 * a
    for t in (35 * a, 40 * a, 45 * a):
        count, _, verts = confluence_statistic(df, s, t)
        assert count == 2
        assert sorted(v[1] for v in verts) == [c[1], c[1]]
        assert filled_metric_ball(df, t).vertices[annulus].all()


def test_bad_radii():
    df = _random_df(5, n=64)
    with pytest.raises(DomainError):
        confluence_statistic(df, 0.2, 0.1)


def test_report_csv(tmp_path):
    df = _random_df(6)
    s = hitting_radius(df, 0.1)
    rep = confluence_report(df, s, [hitting_radius(df, 0.2), hitting_radius(df, 0.3)], seed=6)
    p = tmp_path / "c.csv"
    rep.write_csv(p)
    rep.write_csv(p, append=True)
    rows = list(csv.reader(open(p)))
    assert rows[0] == ["seed", "s", "t", "targets", "ancestor_count"]
    assert len(rows) == 5 and rows[1][3] == "all_boundary"
