"""Monte Carlo experiments on LFPP: crossing medians, exponent fits,
bi-Lipschitz constants, tightness across scales, anisotropy and Hölder scans,
plus graph-level axiom checks."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import ks_2samp

from .core import DomainError, GeometryError, GridSpec, Parameters
from .field import CircleAverageZero, FieldSample, circle_average, sample_field
from .lfpp import (
    MetricGraph,
    build_graph,
    distance_field,
    internal_distance,
    point_distance,
    set_distance,
    weyl_shift,
)
from .mollify import mollify
from .seeding import parallel_map, task_seeds

N_BOOT = 1000


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed)))


def percentile_ci(samples, stat, n_boot: int = N_BOOT, seed: int = 0, level: float = 0.95):
    """Percentile bootstrap CI and standard error of ``stat`` over axis-0 resamples."""
    samples = np.asarray(samples)
    rng = _rng(seed)
    m = samples.shape[0]
    boots = np.array([stat(samples[rng.integers(0, m, m)]) for _ in range(n_boot)])
    alpha = (1 - level) / 2
    lo, hi = np.quantile(boots, [alpha, 1 - alpha], axis=0)
    return lo, hi, boots.std(axis=0, ddof=1)


# --- crossings -------------------------------------------------------------


def square_masks(graph: MetricGraph, square=None):
    """Masks ``(left, right, bottom, top)`` of a physical square (default: window)."""
    spec = graph.spec
    x0, y0, x1, y1 = spec.window if square is None else square
    a = spec.spacing
    ix, iy = graph.window_indices()
    tol = 1e-9
    jx0, jx1 = math.ceil(x0 / a - tol), math.floor(x1 / a + tol)
    jy0, jy1 = math.ceil(y0 / a - tol), math.floor(y1 / a + tol)
    inside = (ix >= jx0) & (ix <= jx1) & (iy >= jy0) & (iy <= jy1)
    if inside.sum() == 0 or not (graph.spec.in_window((jx0, jy0)) and graph.spec.in_window((jx1, jy1))):
        raise GeometryError(f"square {square} is not inside the window")
    return inside & (ix == jx0), inside & (ix == jx1), inside & (iy == jy0), inside & (iy == jy1)


def crossing_distance(graph: MetricGraph, direction: str = "horizontal", square=None) -> float:
    """LFPP distance between opposite sides of a square (left-right or bottom-top)."""
    left, right, bottom, top = square_masks(graph, square)
    if direction == "horizontal":
        return set_distance(graph, left, right)
    if direction == "vertical":
        return set_distance(graph, bottom, top)
    raise DomainError(f"direction must be horizontal or vertical, got {direction!r}")


def unit_square(spec: GridSpec):
    cx, cy = spec.window_center
    return (cx - 0.5, cy - 0.5, cx + 0.5, cy + 0.5)


def crossing_field(spec: GridSpec, seed: int) -> FieldSample:
    """Field normalized so its circle average over the unit circle at the window center is zero."""
    return sample_field(spec, seed, CircleAverageZero(spec.window_center, 1.0))


@dataclass
class CrossingReport:
    params: Parameters
    grid: GridSpec
    eps: list
    seeds: list
    crossings: np.ndarray  # (replicas, len(eps))
    medians: list = field(default_factory=list)
    ci: list = field(default_factory=list)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["gamma", "d", "eps", "seed", "crossing"])
            for j, e in enumerate(self.eps):
                for i, sd in enumerate(self.seeds):
                    w.writerow([repr(self.params.gamma), repr(self.params.d), repr(e), sd, repr(float(self.crossings[i, j]))])


def crossing_samples(
    params: Parameters,
    grid: GridSpec,
    eps_list,
    replicas: int,
    seed0: int,
    stencil: str = "eight",
    anisotropy_a: float = 1.0,
    directions=("horizontal",),
    shift: float = 0.0,
    zero_field: bool = False,
    experiment: str = "crossings",
    workers=None,
):
    """Crossing distances, shape ``(replicas, len(eps_list), len(directions))``.

    Replica ``i`` uses one field for every eps level (common random numbers).
    """
    seeds = task_seeds(seed0, experiment, replicas)
    square = unit_square(grid)

    def one(seed):
        if zero_field:
            f = FieldSample.constant(grid, shift)
        else:
            f = crossing_field(grid, seed)
            if shift:
                f = f.shifted(shift)
        out = []
        for e in eps_list:
            g = build_graph(mollify(f, e), params.xi, stencil, anisotropy_a)
            out.append([crossing_distance(g, d, square) for d in directions])
        return out

    return seeds, np.array(parallel_map(one, seeds, workers), dtype=float)


def crossing_report(params, grid, eps_list, replicas, seed0, n_boot=N_BOOT, workers=None, **kw) -> CrossingReport:
    seeds, x = crossing_samples(params, grid, eps_list, replicas, seed0, workers=workers, **kw)
    x = x[:, :, 0]
    rep = CrossingReport(params, grid, list(eps_list), seeds, x)
    for j in range(len(eps_list)):
        rep.medians.append(float(np.median(x[:, j])))
        lo, hi, _ = percentile_ci(x[:, j], np.median, n_boot, seed=seed0 + j)
        rep.ci.append((float(lo), float(hi)))
    return rep


def crossing_median(params, grid, eps: float, replicas: int, seed0: int, **kw) -> CrossingReport:
    """Median crossing distance of the unit square at one eps (the a_eps estimate)."""
    return crossing_report(params, grid, [eps], replicas, seed0, **kw)


# --- exponent fit ----------------------------------------------------------


@dataclass
class FitReport:
    x: list
    y: list
    slope: float
    intercept: float
    ci: tuple
    target: float | None = None

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["slope", "ci_lo", "ci_hi", "target"])
            t = "" if self.target is None else repr(float(self.target))
            w.writerow([repr(self.slope), repr(float(self.ci[0])), repr(float(self.ci[1])), t])


def _ols(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xc = x - x.mean()
    slope = float(np.dot(xc, y - y.mean()) / np.dot(xc, xc))
    return slope, float(y.mean() - slope * x.mean())


def fit_exponent(x, y, bootstrap: int = N_BOOT, seed: int = 0, target=None) -> FitReport:
    """OLS slope of per-level medians of ``y`` against per-level medians of ``x``.

    ``x`` has shape ``(levels,)`` or ``(replicas, levels)``; ``y`` has shape
    ``(levels,)`` or ``(replicas, levels)``. The bootstrap resamples replica
    rows jointly, which keeps common-random-number pairing across levels.
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    if y.ndim == 1:
        y = y[None, :]
    if x.ndim == 1:
        x = np.broadcast_to(x, y.shape)
    if y.shape[1] < 4:
        raise DomainError("need at least 4 levels")
    xm, ym = np.median(x, axis=0), np.median(y, axis=0)
    if np.ptp(xm) == 0:
        raise DomainError("degenerate design: all x levels equal")
    slope, intercept = _ols(xm, ym)
    if y.shape[0] == 1 or bootstrap <= 0:
        ci = (slope, slope)
    else:
        rng = _rng(seed)
        m = y.shape[0]
        boots = []
        for _ in range(bootstrap):
            idx = rng.integers(0, m, m)
            boots.append(_ols(np.median(x[idx], axis=0), np.median(y[idx], axis=0))[0])
        ci = tuple(float(v) for v in np.quantile(boots, [0.025, 0.975]))
    return FitReport(list(map(float, xm)), list(map(float, ym)), slope, intercept, ci, target)


# --- bi-Lipschitz ----------------------------------------------------------


@dataclass
class BiLipReport:
    descriptor_a: str
    descriptor_b: str
    beta: float
    rows: list  # (pair_id, sep, da, db, ratio)

    @property
    def c_min(self) -> float:
        return min(r[4] for r in self.rows)

    @property
    def c_max(self) -> float:
        return max(r[4] for r in self.rows)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["pair_id", "sep", "da", "db", "ratio"])
            for row in self.rows:
                w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])


def describe(graph: MetricGraph) -> str:
    return f"{graph.stencil}/A={graph.anisotropy_a:g}/xi={graph.xi:.6g}/eps={graph.mollified.eps:g}"


def sample_pairs(spec: GridSpec, beta: float, count: int, seed: int):
    """Uniform window vertex pairs with separation >= beta * window side."""
    if not 0 < beta < 1:
        raise DomainError("beta must lie in (0, 1)")
    ix0, ix1, iy0, iy1 = spec.index_bounds
    side = min(ix1 - ix0, iy1 - iy0)
    rng = _rng(seed)
    pairs = []
    while len(pairs) < count:
        u = (int(rng.integers(ix0, ix1 + 1)), int(rng.integers(iy0, iy1 + 1)))
        v = (int(rng.integers(ix0, ix1 + 1)), int(rng.integers(iy0, iy1 + 1)))
        if math.hypot(u[0] - v[0], u[1] - v[1]) >= beta * side:
            pairs.append((u, v))
    return pairs


def bilipschitz_estimate(graph_a: MetricGraph, graph_b: MetricGraph, beta: float = 0.25, pairs=64, seed: int = 0, workers=None) -> BiLipReport:
    """Extremes of ``D_b / D_a`` over separated pairs (estimates of c*, C*).

    ``pairs`` is a count (sampled) or an explicit list of vertex pairs.
    """
    spec = graph_a.spec
    if graph_b.spec.window != spec.window or graph_b.shape != graph_a.shape:
        raise GeometryError("graphs must share the window")
    if isinstance(pairs, int):
        pairs = sample_pairs(spec, beta, pairs, seed)

    def one(pair):
        u, v = pair
        return point_distance(graph_a, u, v), point_distance(graph_b, u, v)

    dists = parallel_map(one, pairs, workers)
    a = spec.spacing
    rows = [
        (i, a * math.hypot(u[0] - v[0], u[1] - v[1]), da, db, db / da)
        for i, ((u, v), (da, db)) in enumerate(zip(pairs, dists))
    ]
    return BiLipReport(describe(graph_a), describe(graph_b), beta, rows)


# --- tightness across scales ----------------------------------------------


@dataclass(frozen=True)
class ScaleNormalization:
    r: float
    c_r: float
    h_r: float

    @classmethod
    def make(cls, params: Parameters, r: float, h_r: float) -> "ScaleNormalization":
        return cls(r, r ** params.xiq, h_r)

    def factor(self, xi: float) -> float:
        return self.c_r * math.exp(xi * self.h_r)


def normalized_distance(d: float, norm: ScaleNormalization, xi: float) -> float:
    return d / norm.factor(xi)


@dataclass
class TightnessReport:
    r1: float
    r2: float
    seeds: list
    samples: dict  # r -> array of normalized distances
    statistic: float

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "seed", "normalized_distance"])
            for r in (self.r1, self.r2):
                for sd, v in zip(self.seeds, self.samples[r]):
                    w.writerow([repr(r), sd, repr(float(v))])


def _round_sig(x, digits: int):
    return np.array([float(f"{v:.{digits}g}") for v in np.asarray(x, dtype=float)])


def ks_statistic(x, y, digits: int = 12) -> float:
    """Two-sample KS statistic; values are rounded to ``digits`` significant
    digits first so round-off never splits a tie."""
    return float(ks_2samp(_round_sig(x, digits), _round_sig(y, digits)).statistic)


def tightness_samples(params: Parameters, grid: GridSpec, r: float, seeds, eps: float, stencil: str = "eight", workers=None):
    """Normalized distance between ``center +- (r/4, 0)`` per seed."""
    cx, cy = grid.window_center
    u = grid.nearest_vertex((cx - 0.25 * r, cy))
    v = grid.nearest_vertex((cx + 0.25 * r, cy))

    def one(seed):
        f = sample_field(grid, seed)
        g = build_graph(mollify(f, eps), params.xi, stencil)
        norm = ScaleNormalization.make(params, r, circle_average(f, (cx, cy), r))
        return normalized_distance(point_distance(g, u, v), norm, params.xi)

    return np.array(parallel_map(one, seeds, workers))


def tightness_compare(params, grid, r1: float, r2: float, replicas: int, seed0: int, eps: float, stencil="eight", workers=None) -> TightnessReport:
    """KS statistic between normalized rescaled distances at scales r1 and r2."""
    seeds = task_seeds(seed0, "tightness", replicas)
    s1 = tightness_samples(params, grid, r1, seeds, eps, stencil, workers)
    s2 = s1 if r2 == r1 else tightness_samples(params, grid, r2, seeds, eps, stencil, workers)
    return TightnessReport(r1, r2, seeds, {r1: s1, r2: s2}, ks_statistic(s1, s2))


# --- anisotropy -----------------------------------------------------------


@dataclass
class RotationReport:
    anisotropy_a: float
    eps: list
    seeds: list
    horizontal: np.ndarray  # (replicas, len(eps))
    vertical: np.ndarray
    ratios: list = field(default_factory=list)
    ci: list = field(default_factory=list)
    se: list = field(default_factory=list)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["eps", "ratio", "ci_lo", "ci_hi"])
            for e, r, (lo, hi) in zip(self.eps, self.ratios, self.ci):
                w.writerow([repr(e), repr(r), repr(float(lo)), repr(float(hi))])

    def difference_se(self, i: int, j: int, n_boot: int = N_BOOT, seed: int = 0) -> float:
        """Bootstrap SE of ``ratio[i] - ratio[j]`` resampling replicas jointly."""
        both = np.stack([self.horizontal, self.vertical], axis=-1)

        def stat(x):
            r = np.median(x[:, :, 1], axis=0) / np.median(x[:, :, 0], axis=0)
            return r[i] - r[j]

        return float(percentile_ci(both, stat, n_boot, seed)[2])


def _ratio_stat(x):
    return np.median(x[:, 1]) / np.median(x[:, 0])


def rotation_anisotropy(params, grid, anisotropy_a: float, eps_list, replicas: int, seed0: int, n_boot=N_BOOT, zero_field=False, workers=None) -> RotationReport:
    """Per eps: median vertical over median horizontal crossing under the stretched metric."""
    seeds, x = crossing_samples(
        params,
        grid,
        eps_list,
        replicas,
        seed0,
        anisotropy_a=anisotropy_a,
        directions=("horizontal", "vertical"),
        zero_field=zero_field,
        experiment="rotation",
        workers=workers,
    )
    rep = RotationReport(anisotropy_a, list(eps_list), seeds, x[:, :, 0], x[:, :, 1])
    for j in range(len(eps_list)):
        pair = x[:, j, :]
        rep.ratios.append(float(_ratio_stat(pair)))
        lo, hi, se = percentile_ci(pair, _ratio_stat, n_boot, seed=seed0 + j)
        rep.ci.append((float(lo), float(hi)))
        rep.se.append(float(se))
    return rep


# --- Hölder scan -----------------------------------------------------------

ANCHOR_FACTOR = 10.0


@dataclass
class HolderReport:
    separations: np.ndarray
    distances: np.ndarray
    decades: np.ndarray  # decade index per pair
    slope: float
    intercept: float
    pair_slopes: np.ndarray
    band: tuple

    def fraction_inside(self, decade: int | None = None) -> float:
        lo, hi = self.band
        inside = (self.pair_slopes > lo) & (self.pair_slopes < hi)
        if decade is not None:
            inside = inside[self.decades == decade]
        return float(inside.mean())


def holder_scan(graph: MetricGraph, params: Parameters, pairs: int = 500, seed: int = 0, sources: int = 25, decades=3) -> HolderReport:
    """Log-log scaling of distance against separation over three decades.

    Separations are drawn log-uniformly in ``[10^k, 10^(k+1))`` grid spacings
    (clipped to the window). Each pair's slope is measured against an anchor
    on the fitted line at ``ANCHOR_FACTOR`` window sides:
    ``log(D / D_anchor) / log(sep / R_anchor)``.
    """
    if pairs < 100:
        raise DomainError("need at least 100 pairs per decade")
    spec = graph.spec
    a = spec.spacing
    nx, ny = graph.shape
    ix0, iy0 = graph.origin
    rng = _rng(seed)
    srcs = [(ix0 + int(rng.integers(0, nx)), iy0 + int(rng.integers(0, ny))) for _ in range(sources)]
    fields = [distance_field(graph, [s]).dist for s in srcs]
    max_sep = math.hypot(nx - 1, ny - 1)
    if 2 * 10.0 ** (decades - 1) > max_sep:
        raise DomainError(f"window of {nx}x{ny} vertices cannot hold {decades} decades of separation")
    seps, dists, decs = [], [], []
    for k in range(decades):
        lo, hi = 10.0**k, min(10.0 ** (k + 1), max_sep)
        got = 0
        while got < pairs:
            j = int(rng.integers(0, sources))
            u = srcs[j]
            rho = math.exp(rng.uniform(math.log(lo), math.log(hi)))
            th = rng.uniform(0, 2 * math.pi)
            v = (u[0] + int(round(rho * math.cos(th))), u[1] + int(round(rho * math.sin(th))))
            lx, ly = v[0] - ix0, v[1] - iy0
            sep = math.hypot(v[0] - u[0], v[1] - u[1])
            if not (0 <= lx < nx and 0 <= ly < ny) or not lo <= sep < hi or sep == 0:
                continue
            seps.append(sep * a)
            dists.append(float(fields[j][lx, ly]))
            decs.append(k)
            got += 1
    seps, dists, decs = np.array(seps), np.array(dists), np.array(decs)
    slope, intercept = _ols(np.log(seps), np.log(dists))
    x0, y0, x1, y1 = spec.window
    anchor = ANCHOR_FACTOR * max(x1 - x0, y1 - y0)
    log_da = intercept + slope * math.log(anchor)
    pair_slopes = (np.log(dists) - log_da) / (np.log(seps) - math.log(anchor))
    return HolderReport(seps, dists, decs, slope, intercept, pair_slopes, params.holder_band())


# --- graph-level axiom checks ---------------------------------------------


def weyl_constant_check(graph: MetricGraph, source, c: float):
    """Max relative error of ``D_{h+c} = e^{xi c} D_h`` and whether trees agree."""
    base = distance_field(graph, [source])
    shifted = distance_field(weyl_shift(graph, c), [source])
    scale = math.exp(graph.xi * c)
    ok = np.isfinite(base.dist) & (base.dist > 0)
    rel = np.abs(shifted.dist[ok] - scale * base.dist[ok]) / (scale * base.dist[ok])
    return float(rel.max(initial=0.0)), bool(np.array_equal(base.predecessor, shifted.predecessor))


def locality_check(graph: MetricGraph, region, u, v, seed: int = 0) -> tuple:
    """Internal distance on the full graph vs on a graph whose field is
    replaced by independent noise outside ``region``."""
    mask = graph.as_mask(region)
    m = graph.mollified
    spec = graph.spec
    ix0, iy0 = graph.origin
    nx, ny = graph.shape
    vals = np.array(m.values)
    junk = _rng(seed).normal(0.0, 3.0, size=vals.shape)
    outside = np.ones(vals.shape, dtype=bool)
    outside[ix0 : ix0 + nx, iy0 : iy0 + ny] = ~mask
    vals[outside] = junk[outside]
    from .mollify import MollifiedField

    restricted = build_graph(MollifiedField(m.base, m.eps, vals), graph.xi, graph.stencil, graph.anisotropy_a)
    return internal_distance(graph, u, v, mask), internal_distance(restricted, u, v, mask)


def length_space_check(graph: MetricGraph, u, v) -> float:
    """``|D(u,v) - min_m (cost(u,m) + D(m,v))|`` over stencil neighbours ``m`` of ``u``."""
    from .lfpp import edge_cost

    dv = distance_field(graph, [v])
    best = math.inf
    for dx, dy in graph.offsets:
        m = (u[0] + dx, u[1] + dy)
        if not graph.spec.in_window(m):
            continue
        best = min(best, edge_cost(graph, u, m) + dv.at(m))
    return abs(dv.at(u) - best)
