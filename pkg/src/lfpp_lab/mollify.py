"""Heat-kernel mollification via a Fourier multiplier."""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .core import DomainError, GridSpec
from .field import HEADER, FieldSample, angular_frequency_sq

MOLLIFIED_MAGIC = b"LFPPMOL1"
_EPS = struct.Struct("<d")


@dataclass(frozen=True, eq=False)
class MollifiedField:
    base: FieldSample
    eps: float
    values: np.ndarray

    @property
    def spec(self) -> GridSpec:
        return self.base.spec

    def as_field(self) -> FieldSample:
        return FieldSample(self.spec, self.base.seed, self.values, self.base.normalization)


def heat_multiplier(spec: GridSpec, eps: float) -> np.ndarray:
    """``exp(-eps^2 |omega|^2 / 4)``: transform of the kernel p_s with s = eps^2 / 2."""
    return np.exp(-(eps * eps) * angular_frequency_sq(spec, half=True) / 4.0)


def mollify(field: FieldSample, eps: float) -> MollifiedField:
    spec = field.spec
    lo, hi = 2 * spec.spacing, spec.side_length / 8
    if not lo * (1 - 1e-12) <= eps <= hi * (1 + 1e-12):
        raise DomainError(f"eps={eps} outside [{lo}, {hi}]")
    n = spec.n
    out = np.fft.irfft2(np.fft.rfft2(field.values) * heat_multiplier(spec, eps), s=(n, n))
    out.setflags(write=False)
    return MollifiedField(field, float(eps), out)


def dump_mollified(path, mf: MollifiedField) -> None:
    """Field dump header with eps appended (40 bytes), then row-major doubles."""
    spec = mf.spec
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MOLLIFIED_MAGIC, spec.n, spec.side_length, mf.base.seed))
        fh.write(_EPS.pack(mf.eps))
        fh.write(np.ascontiguousarray(mf.values, dtype="<f8").tobytes())


def load_mollified(path) -> MollifiedField:
    with open(path, "rb") as fh:
        magic, n, side, seed = HEADER.unpack(fh.read(HEADER.size))
        if magic != MOLLIFIED_MAGIC:
            raise DomainError(f"{path}: not a mollified-field dump (magic {magic!r})")
        (eps,) = _EPS.unpack(fh.read(_EPS.size))
        values = np.frombuffer(fh.read(), dtype="<f8").reshape(n, n).copy()
    spec = GridSpec(int(n), side)
    values.setflags(write=False)
    return MollifiedField(FieldSample(spec, int(seed), values, "loaded"), eps, values)
