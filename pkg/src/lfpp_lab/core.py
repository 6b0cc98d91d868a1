"""Coupling constants, derived exponents and grid geometry."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

SQRT_8_3 = math.sqrt(8.0 / 3.0)
_TOL = 1e-12


class LFPPError(Exception):
    """Base class for errors raised by lfpp_lab."""


class DomainError(LFPPError, ValueError):
    """A parameter lies outside its admissible range."""


class ConsistencyError(LFPPError, ValueError):
    """Parameters are individually valid but jointly inconsistent."""


class GeometryError(LFPPError, ValueError):
    """A requested shape does not fit inside the measurement window."""


@dataclass(frozen=True)
class Parameters:
    gamma: float
    d: float
    xi: float
    q: float
    exponent_one_minus_xiq: float

    @property
    def xiq(self) -> float:
        return self.xi * self.q

    def holder_band(self, lower_factor: float = 0.9, upper_factor: float = 1.1):
        """Return ``(chi, chi_prime)`` with chi below xi(Q-2) and chi' above xi(Q+2)."""
        return (
            lower_factor * self.xi * (self.q - 2.0),
            upper_factor * self.xi * (self.q + 2.0),
        )


def watabiki_dimension(gamma: float) -> float:
    if not 0.0 < gamma < 2.0:
        raise DomainError(f"gamma must lie in (0, 2), got {gamma!r}")
    g2 = gamma * gamma
    return 1.0 + g2 / 4.0 + 0.25 * math.sqrt((4.0 + g2) ** 2 + 16.0 * g2)


def derive_params(gamma: float, d: float) -> Parameters:
    """Build the (gamma, d, xi, Q) bundle.

    Raises :class:`ConsistencyError` when ``xi * Q > 1`` or when
    ``xi * (Q + 2) <= 1`` (the latter would put a smooth path outside the
    Hölder band).
    """
    if not (isinstance(gamma, (int, float)) and 0.0 < gamma < 2.0):
        raise DomainError(f"gamma must lie in (0, 2), got {gamma!r}")
    if not (isinstance(d, (int, float)) and d > 2.0 and math.isfinite(d)):
        raise DomainError(f"d must be a finite real > 2, got {d!r}")
    xi = gamma / d
    q = 2.0 / gamma + gamma / 2.0
    if xi * q > 1.0 + _TOL:
        raise ConsistencyError(
            f"xi*Q = {xi * q:.12g} > 1 for gamma={gamma}, d={d}; need d >= 2 + gamma^2/2"
        )
    if xi * (q + 2.0) <= 1.0:
        raise ConsistencyError(
            f"xi*(Q+2) = {xi * (q + 2.0):.12g} <= 1 for gamma={gamma}, d={d}"
        )
    return Parameters(gamma=float(gamma), d=float(d), xi=xi, q=q, exponent_one_minus_xiq=1.0 - xi * q)


def resolve_dimension(gamma: float, d) -> float:
    """Resolve a dimension preset: ``"known"``, ``"watabiki"`` or a number."""
    if isinstance(d, str):
        if d == "watabiki":
            return watabiki_dimension(gamma)
        if d == "known":
            if abs(gamma - SQRT_8_3) > 1e-9:
                raise DomainError("d='known' is only available at gamma = sqrt(8/3)")
            return 4.0
        raise DomainError(f"unknown dimension preset {d!r}")
    return float(d)


@dataclass(frozen=True)
class GridSpec:
    """An ``n x n`` torus of physical side ``side_length``.

    Vertex ``(ix, iy)`` sits at ``(ix * spacing, iy * spacing)``. ``window``
    is ``(x0, y0, x1, y1)`` in physical units; it defaults to the centered
    square of side ``side_length / 2``.
    """

    n: int
    side_length: float = 2.0
    window: tuple = field(default=None)

    def __post_init__(self):
        n = self.n
        if not isinstance(n, int) or n < 4 or n & (n - 1):
            raise DomainError(f"n must be a power of two >= 4, got {n!r}")
        if not self.side_length > 0:
            raise DomainError("side_length must be positive")
        L = float(self.side_length)
        if self.window is None:
            object.__setattr__(self, "window", (L / 4, L / 4, 3 * L / 4, 3 * L / 4))
        x0, y0, x1, y1 = (float(v) for v in self.window)
        object.__setattr__(self, "window", (x0, y0, x1, y1))
        slack = 1e-12 * L
        if not (x0 < x1 and y0 < y1):
            raise GeometryError(f"degenerate window {self.window}")
        lo, hi = L / 4 - slack, 3 * L / 4 + slack
        if x0 < lo or y0 < lo or x1 > hi or y1 > hi:
            raise GeometryError(
                f"window {self.window} must be inset by side_length/4 = {L / 4} from the torus boundary"
            )

    @property
    def spacing(self) -> float:
        return self.side_length / self.n

    @property
    def index_bounds(self):
        """Inclusive vertex index ranges ``(ix0, ix1, iy0, iy1)`` of the window."""
        a = self.spacing
        x0, y0, x1, y1 = self.window
        eps = 1e-9
        return (
            math.ceil(x0 / a - eps),
            math.floor(x1 / a + eps),
            math.ceil(y0 / a - eps),
            math.floor(y1 / a + eps),
        )

    @property
    def window_shape(self):
        ix0, ix1, iy0, iy1 = self.index_bounds
        return ix1 - ix0 + 1, iy1 - iy0 + 1

    @property
    def window_center(self):
        x0, y0, x1, y1 = self.window
        return (0.5 * (x0 + x1), 0.5 * (y0 + y1))

    def position(self, vertex):
        return (vertex[0] * self.spacing, vertex[1] * self.spacing)

    def nearest_vertex(self, point):
        a = self.spacing
        return (int(round(point[0] / a)), int(round(point[1] / a)))

    def in_window(self, vertex) -> bool:
        ix0, ix1, iy0, iy1 = self.index_bounds
        return ix0 <= vertex[0] <= ix1 and iy0 <= vertex[1] <= iy1

    def to_dict(self):
        return {"n": self.n, "side_length": self.side_length, "window": list(self.window)}
