"""Log-correlated Gaussian field on a torus, synthesized spectrally.

The field has covariance ``calibration * 2*pi * G`` where ``G`` is the
Green function of the 5-point lattice Laplacian (zero mode removed), so that
``Cov(h(z), h(w)) ~ -log|z - w| + O(1)`` at separations well below the torus
side.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import DomainError, GeometryError, GridSpec

MEAN_ZERO = "mean_zero"
HEADER = struct.Struct("<8sQdQ")
FIELD_MAGIC = b"LFPPFLD1"


@dataclass(frozen=True)
class CircleAverageZero:
    center: tuple
    radius: float

    @property
    def tag(self) -> str:
        return f"circle_average_zero({self.center[0]:g},{self.center[1]:g};{self.radius:g})"


@dataclass(frozen=True, eq=False)
class FieldSample:
    """Field values at the torus vertices, indexed ``values[ix, iy]``."""

    spec: GridSpec
    seed: int
    values: np.ndarray
    normalization: object = MEAN_ZERO

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        if v.shape != (self.spec.n, self.spec.n):
            raise DomainError(f"values must have shape {(self.spec.n,) * 2}, got {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, spec: GridSpec, c: float = 0.0) -> "FieldSample":
        return cls(spec, 0, np.full((spec.n, spec.n), float(c)), "injected")

    def shifted(self, f) -> "FieldSample":
        """Field plus a deterministic function (scalar or ``n x n`` array)."""
        return FieldSample(self.spec, self.seed, self.values + f, "injected")


def _wavenumbers(n: int):
    k = np.fft.fftfreq(n, d=1.0 / n)
    return np.meshgrid(k, k, indexing="ij")


def _laplacian_symbol(n: int) -> np.ndarray:
    k1, k2 = _wavenumbers(n)
    return 4.0 - 2.0 * np.cos(2 * np.pi * k1 / n) - 2.0 * np.cos(2 * np.pi * k2 / n)


@lru_cache(maxsize=8)
def _raw_density(n: int) -> np.ndarray:
    lam = _laplacian_symbol(n)
    lam[0, 0] = np.inf
    s = 2.0 * np.pi / (n * n * lam)
    s.setflags(write=False)
    return s


@lru_cache(maxsize=8)
def covariance_calibration(n: int) -> float:
    """Factor making the covariance drop by exactly log 2 between lattice
    separations ``n/64`` and ``n/32`` along an axis (1 for n < 64)."""
    if n < 64:
        return 1.0
    s = _raw_density(n)
    k1, _ = _wavenumbers(n)

    def cov(sep):
        return float(np.sum(s * np.cos(2 * np.pi * k1 * sep / n)))

    r = n // 64
    return math.log(2.0) / (cov(r) - cov(2 * r))


def spectral_density(spec: GridSpec) -> np.ndarray:
    """Per-mode variance ``S(k)`` on the full ``n x n`` frequency grid."""
    return covariance_calibration(spec.n) * _raw_density(spec.n)


def angular_frequency_sq(spec: GridSpec, half: bool = False) -> np.ndarray:
    n = spec.n
    k = np.fft.fftfreq(n, d=1.0 / n)
    k2 = np.fft.rfftfreq(n, d=1.0 / n) if half else k
    a, b = np.meshgrid(k, k2, indexing="ij")
    return (2 * np.pi / spec.side_length) ** 2 * (a * a + b * b)


def spectral_point_variance(spec: GridSpec, eps: float = 0.0) -> float:
    """Exact pointwise variance of the mean-zero field mollified at ``eps``."""
    if eps < 0:
        raise DomainError("eps must be >= 0")
    s = spectral_density(spec)
    if eps == 0:
        return float(s.sum())
    return float(np.sum(s * np.exp(-(eps * eps) * angular_frequency_sq(spec) / 2.0)))


_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def _mix64(z: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer (wrapping uint64 arithmetic)."""
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def _uniform(seed: int, k1, k2, stream: int) -> np.ndarray:
    """Uniforms in (0, 1] keyed by (seed, wavenumber, stream); order-free."""
    key = _mix64(np.array([seed], dtype=np.uint64) + _GOLDEN)
    enc = ((k1.astype(np.int64) + 2**30).astype(np.uint64) << np.uint64(32)) | (
        k2.astype(np.int64) + 2**30
    ).astype(np.uint64)
    with np.errstate(over="ignore"):
        z = _mix64(_mix64(enc * np.uint64(4) + np.uint64(stream) + key) ^ key)
    return ((z >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53


def mode_noise(n: int, seed: int, half: bool = False) -> np.ndarray:
    """Hermitian array of unit complex Gaussians ``Z_k`` (``Z_-k = conj(Z_k)``).

    Each conjugate pair is drawn from a counter-based hash keyed by
    ``(seed, k)`` with ``k`` the signed wavenumber, so a mode gets the same
    draw at every resolution that contains it. ``half`` returns only the
    ``n x (n//2 + 1)`` block used by ``irfft2``.
    """
    k = np.fft.fftfreq(n, d=1.0 / n).astype(np.int64)
    k2 = k[: n // 2 + 1].copy() if half else k
    if half:
        k2[-1] = -(n // 2)
    k1, k2 = np.meshgrid(k, k2, indexing="ij")
    m1, m2 = (-k1) % n, (-k2) % n
    m1 = np.where(m1 >= n // 2, m1 - n, m1)
    m2 = np.where(m2 >= n // 2, m2 - n, m2)
    canon = (k1 > m1) | ((k1 == m1) & (k2 >= m2))
    c1, c2 = np.where(canon, k1, m1), np.where(canon, k2, m2)
    with np.errstate(over="ignore"):
        r = np.sqrt(-2.0 * np.log(_uniform(seed, c1, c2, 0)))
        theta = 2.0 * np.pi * _uniform(seed, c1, c2, 1)
    self_conj = (k1 == m1) & (k2 == m2)
    re = np.where(self_conj, r * np.cos(theta), r * np.cos(theta) / np.sqrt(2.0))
    im = np.where(self_conj, 0.0, r * np.sin(theta) / np.sqrt(2.0))
    return re + 1j * np.where(canon, im, -im)


def sample_field(spec: GridSpec, seed: int, normalization=MEAN_ZERO) -> FieldSample:
    """Draw one field: independent complex Gaussians of variance ``S(k)`` per
    nonzero mode, zero mode removed, then the requested normalization."""
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise DomainError("seed must be a 64-bit unsigned integer")
    n = spec.n
    coeff = np.sqrt(spectral_density(spec)[:, : n // 2 + 1]) * mode_noise(n, seed, half=True)
    coeff[0, 0] = 0.0
    values = np.fft.irfft2(coeff, s=(n, n)) * (n * n)
    if normalization == MEAN_ZERO:
        values -= values.mean()
    elif isinstance(normalization, CircleAverageZero):
        values -= _circle_mean(values, spec, normalization.center, normalization.radius)
    else:
        raise DomainError(f"unknown normalization {normalization!r}")
    return FieldSample(spec, seed, values, normalization)


def _circle_points(spec: GridSpec, center, radius):
    m = max(64, math.ceil(2 * math.pi * radius / spec.spacing))
    theta = 2 * np.pi * np.arange(m) / m
    return center[0] + radius * np.cos(theta), center[1] + radius * np.sin(theta)


def _bilinear_stencil(spec: GridSpec, px, py):
    a = spec.spacing
    fx, fy = px / a, py / a
    ix, iy = np.floor(fx).astype(np.int64), np.floor(fy).astype(np.int64)
    tx, ty = fx - ix, fy - iy
    n = spec.n
    corners = [
        (ix % n, iy % n, (1 - tx) * (1 - ty)),
        ((ix + 1) % n, iy % n, tx * (1 - ty)),
        (ix % n, (iy + 1) % n, (1 - tx) * ty),
        ((ix + 1) % n, (iy + 1) % n, tx * ty),
    ]
    return corners


def _circle_mean(values, spec, center, radius) -> float:
    px, py = _circle_points(spec, center, radius)
    total = np.zeros(px.shape)
    for i, j, w in _bilinear_stencil(spec, px, py):
        total += w * values[i, j]
    return float(total.mean())


def circle_weights(spec: GridSpec, center, radius) -> np.ndarray:
    """Coefficient array ``c`` with ``circle average = sum(c * values)``."""
    px, py = _circle_points(spec, center, radius)
    c = np.zeros((spec.n, spec.n))
    for i, j, w in _bilinear_stencil(spec, px, py):
        np.add.at(c, (i, j), w / px.size)
    return c


def _check_circle(spec: GridSpec, center, radius):
    if radius < 4 * spec.spacing:
        raise GeometryError(f"radius {radius} below 4 grid spacings")
    x0, y0, x1, y1 = spec.window
    tol = 1e-9 * spec.side_length
    if (
        center[0] - radius < x0 - tol
        or center[0] + radius > x1 + tol
        or center[1] - radius < y0 - tol
        or center[1] + radius > y1 + tol
    ):
        raise GeometryError(f"circle at {center} radius {radius} exits window {spec.window}")


def circle_average(field, center, radius: float) -> float:
    """Mean of bilinearly interpolated values over equispaced circle points."""
    _check_circle(field.spec, center, radius)
    return _circle_mean(field.values, field.spec, center, radius)


def circle_average_variance(spec: GridSpec, center, radius: float) -> float:
    """Exact variance of ``circle_average`` under the mean-zero field law."""
    _check_circle(spec, center, radius)
    c_hat = np.fft.fft2(circle_weights(spec, center, radius))
    return float(np.sum(spectral_density(spec) * np.abs(c_hat) ** 2))


def dump_field(path, field: FieldSample) -> None:
    """Write the 32-byte header (magic, n, side_length, seed) then row-major doubles."""
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(FIELD_MAGIC, field.spec.n, field.spec.side_length, field.seed))
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def load_field(path) -> FieldSample:
    with open(path, "rb") as fh:
        magic, n, side, seed = HEADER.unpack(fh.read(HEADER.size))
        if magic != FIELD_MAGIC:
            raise DomainError(f"{path}: not a field dump (magic {magic!r})")
        values = np.frombuffer(fh.read(), dtype="<f8").reshape(n, n)
    return FieldSample(GridSpec(int(n), side), int(seed), values.copy(), "loaded")
