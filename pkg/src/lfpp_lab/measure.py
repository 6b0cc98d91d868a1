"""Gaussian multiplicative chaos area approximants and ball-volume scaling."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .balls import filled_metric_ball, hitting_radius
from .core import DomainError, GeometryError, GridSpec, Parameters
from .field import FieldSample, sample_field, spectral_point_variance
from .lfpp import build_graph, distance_field
from .mollify import MollifiedField, mollify
from .seeding import parallel_map, task_seeds


def window_indices(spec: GridSpec):
    ix0, ix1, iy0, iy1 = spec.index_bounds
    return np.meshgrid(np.arange(ix0, ix1 + 1), np.arange(iy0, iy1 + 1), indexing="ij")


def region_mask(spec: GridSpec, region) -> np.ndarray:
    """Window-shaped mask from a mask, a predicate on ``(ix, iy)`` arrays, or a
    physical rectangle ``(x0, y0, x1, y1)`` (closed)."""
    shape = spec.window_shape
    if region is None:
        return np.ones(shape, dtype=bool)
    if callable(region):
        ix, iy = window_indices(spec)
        return np.asarray(region(ix, iy), dtype=bool)
    arr = np.asarray(region)
    if arr.shape == (4,) and arr.dtype != bool:
        x0, y0, x1, y1 = (float(v) for v in arr)
        wx0, wy0, wx1, wy1 = spec.window
        tol = 1e-9 * spec.side_length
        if x0 < wx0 - tol or y0 < wy0 - tol or x1 > wx1 + tol or y1 > wy1 + tol:
            raise GeometryError(f"region {tuple(arr)} exits window {spec.window}")
        ix, iy = window_indices(spec)
        a = spec.spacing
        return (ix * a >= x0 - tol) & (ix * a <= x1 + tol) & (iy * a >= y0 - tol) & (iy * a <= y1 + tol)
    if arr.shape != shape:
        raise GeometryError(f"region mask shape {arr.shape} != window shape {shape}")
    return arr.astype(bool)


def _mass_from_values(window_values, eps, gamma, mask, spacing):
    return float(eps ** (gamma * gamma / 2.0) * np.sum(np.exp(gamma * window_values[mask])) * spacing**2)


def gmc_mass(mollified: MollifiedField, gamma: float, region=None) -> float:
    """``eps^(gamma^2/2) * sum_region exp(gamma h_eps) * spacing^2``."""
    if not 0 < gamma < 2:
        raise DomainError("gamma must lie in (0, 2)")
    spec = mollified.spec
    ix0, ix1, iy0, iy1 = spec.index_bounds
    vals = mollified.values[ix0 : ix1 + 1, iy0 : iy1 + 1]
    return _mass_from_values(vals, mollified.eps, gamma, region_mask(spec, region), spec.spacing)


def spectral_correction(spec: GridSpec, eps: float, gamma: float) -> float:
    """Multiplier ``exp(-(gamma^2/2) (Var h_eps - log(1/eps)))`` making the
    expected corrected mass equal the region area."""
    var = spectral_point_variance(spec, eps)
    return math.exp(-(gamma * gamma / 2.0) * (var - math.log(1.0 / eps)))


def _upsample(values: np.ndarray, factor: int) -> np.ndarray:
    """Band-limited (trigonometric) interpolation onto a grid ``factor`` times finer."""
    n = values.shape[0]
    spec_full = np.fft.fft2(values)
    m = n * factor
    out = np.zeros((m, m), dtype=complex)
    h = n // 2
    idx = np.r_[0:h, m - h + 1 : m]
    src = np.r_[0:h, n - h + 1 : n]
    out[np.ix_(idx, idx)] = spec_full[np.ix_(src, src)]
    return np.fft.ifft2(out).real * factor * factor


def gmc_coordinate_check(field: FieldSample, gamma: float, r: float, region, eps: float, center=None, shift=None):
    """Masses on both sides of the coordinate change for ``phi(z) = c + r (z - c)``.

    Returns ``(mass of phi(region) under h at eps, mass of region under
    h o phi + Q log r at eps / r)``; equal in the continuum limit. The field
    ``h o phi`` mollified at ``eps / r`` is exactly ``h_eps o phi``, evaluated by
    band-limited interpolation. With ``shift`` (integer vertex offset) the map
    is the torus translation ``z -> z + shift`` instead.
    """
    spec = field.spec
    n = spec.n
    a = spec.spacing
    q = 2.0 / gamma + gamma / 2.0
    mask = region_mask(spec, region)
    ix, iy = window_indices(spec)
    ix0, iy0 = int(ix[0, 0]), int(iy[0, 0])
    nx, ny = mask.shape
    hm = mollify(field, eps)
    sel_x, sel_y = ix[mask], iy[mask]
    if shift is not None:
        sx, sy = int(shift[0]), int(shift[1])
        lx, ly = sel_x + sx - ix0, sel_y + sy - iy0
        if lx.min() < 0 or ly.min() < 0 or lx.max() >= nx or ly.max() >= ny:
            raise GeometryError("translated region exits the window")
        moved = np.zeros(mask.shape, dtype=bool)
        moved[lx, ly] = True
        lhs = gmc_mass(hm, gamma, moved)
        tilde = hm.values[(sel_x + sx) % n, (sel_y + sy) % n]
        return lhs, _mass_from_values(tilde, eps, gamma, np.ones(tilde.shape, bool), a)

    factor = round(1.0 / r)
    if not (factor >= 1 and factor & (factor - 1) == 0 and abs(factor * r - 1) < 1e-12):
        raise DomainError(f"r must be 1, 1/2, 1/4, ...; got {r}")
    cx, cy = spec.nearest_vertex(spec.window_center) if center is None else center

    # phi(region) on the original lattice: vertices w whose preimage c + (w - c)/r lies in region
    px, py = cx + (ix - cx) * factor - ix0, cy + (iy - cy) * factor - iy0
    inside = (px >= 0) & (px < nx) & (py >= 0) & (py < ny)
    image = np.zeros(mask.shape, dtype=bool)
    image[inside] = mask[px[inside], py[inside]]
    lhs = gmc_mass(hm, gamma, image)

    fine = hm.values if factor == 1 else _upsample(hm.values, factor)
    fx = (factor * cx + (sel_x - cx)) % (n * factor)
    fy = (factor * cy + (sel_y - cy)) % (n * factor)
    tilde = fine[fx, fy] + q * math.log(r)
    rhs = _mass_from_values(tilde, eps / r, gamma, np.ones(tilde.shape, bool), a)
    return lhs, rhs


@dataclass
class GmcReport:
    gamma: float
    eps: list
    seeds: list
    masses: np.ndarray  # (replicas, len(eps)), raw masses
    corrections: list = field(default_factory=list)
    ball_pairs: list = field(default_factory=list)  # (seed, s, mass)

    def corrected(self) -> np.ndarray:
        return self.masses * np.asarray(self.corrections)[None, :]

    def expectation(self):
        c = self.corrected()
        return c.mean(axis=0), c.std(axis=0, ddof=1) / math.sqrt(c.shape[0])

    def write_csv(self, path, region_id: str = "window") -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["gamma", "eps", "seed", "region_id", "mass"])
            for j, e in enumerate(self.eps):
                for i, sd in enumerate(self.seeds):
                    w.writerow([repr(self.gamma), repr(e), sd, region_id, repr(float(self.masses[i, j]))])

    def write_dim_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["gamma", "seed", "s", "ball_mass"])
            for sd, s, m in self.ball_pairs:
                w.writerow([repr(self.gamma), sd, repr(float(s)), repr(float(m))])


def gmc_expectation(spec: GridSpec, gamma: float, eps_list, replicas: int, seed0: int, region=None, workers=None) -> GmcReport:
    """Masses of ``region`` at every eps on common fields (one per replica)."""
    seeds = task_seeds(seed0, "gmc", replicas)
    mask = region_mask(spec, region)

    def one(seed):
        f = sample_field(spec, seed)
        return [gmc_mass(mollify(f, e), gamma, mask) for e in eps_list]

    masses = np.array(parallel_map(one, seeds, workers))
    corr = [spectral_correction(spec, e, gamma) for e in eps_list]
    return GmcReport(float(gamma), list(eps_list), seeds, masses, corr)


def ball_volume_dimension(
    params: Parameters,
    spec: GridSpec,
    radii,
    replicas: int,
    seed0: int,
    eps: float,
    stencil: str = "eight",
    shift: float = 0.0,
    zero_field: bool = False,
    bootstrap: int = 1000,
    workers=None,
):
    """Fit log mu(filled ball) against log metric radius.

    ``radii`` are Euclidean radii; each replica uses the metric ladder
    ``s_i = tau_{r_i}`` (so balls stay inside the window). Returns
    ``(FitReport, GmcReport)``; the fitted slope estimates d.
    """
    from .experiments import fit_exponent

    radii = list(radii)
    if len(radii) < 4:
        raise DomainError("need at least 4 radii")
    seeds = task_seeds(seed0, "dim", replicas)
    center = spec.nearest_vertex(spec.window_center)

    def one(seed):
        f = FieldSample.constant(spec, shift) if zero_field else sample_field(spec, seed).shifted(shift)
        hm = mollify(f, eps)
        g = build_graph(hm, params.xi, stencil)
        df = distance_field(g, [center])
        out = []
        for r in radii:
            s = hitting_radius(df, r)
            ball = filled_metric_ball(df, s)
            out.append((s, gmc_mass(hm, params.gamma, ball.vertices)))
        return out

    rows = parallel_map(one, seeds, workers)
    s_arr = np.array([[s for s, _ in row] for row in rows])
    m_arr = np.array([[m for _, m in row] for row in rows])
    report = GmcReport(params.gamma, [eps], seeds, m_arr.sum(axis=1, keepdims=True))
    report.ball_pairs = [(sd, s, m) for sd, row in zip(seeds, rows) for s, m in row]
    fit = fit_exponent(np.log(s_arr), np.log(m_arr), bootstrap=bootstrap, seed=seed0, target=params.d)
    return fit, report
