import math

import numpy as np
import pytest

from lfpp_lab.core import SQRT_8_3, GridSpec, derive_params
from lfpp_lab.field import FieldSample
from lfpp_lab.lfpp import build_graph
from lfpp_lab.mollify import MollifiedField


@pytest.fixture(scope="session")
def lqg():
    """gamma = sqrt(8/3), d = 4."""
    return derive_params(SQRT_8_3, 4.0)


def raw_graph(values, xi=0.5, stencil="eight", anisotropy_a=1.0, spec=None):
    """Graph whose window weights are exp(xi * values) with no mollification.

    ``values`` is either a full ``n x n`` array or a window-shaped array
    embedded into a default grid.
    """
    values = np.asarray(values, dtype=float)
    if spec is None:
        n = values.shape[0]
        spec = GridSpec(n)
    if values.shape != (spec.n, spec.n):
        full = np.zeros((spec.n, spec.n))
        ix0, _, iy0, _ = spec.index_bounds
        full[ix0 : ix0 + values.shape[0], iy0 : iy0 + values.shape[1]] = values
        values = full
    f = FieldSample(spec, 0, values, "injected")
    return build_graph(MollifiedField(f, 0.0, f.values), xi, stencil, anisotropy_a)


def zero_graph(n=64, **kw):
    return raw_graph(np.zeros((n, n)), **kw)


def tiny_spec():
    """4 x 4 vertex window on an 8 x 8 torus."""
    return GridSpec(8, 8.0, (2.0, 2.0, 5.0, 5.0))


def rel(a, b):
    return abs(a - b) / abs(b)


SQRT2 = math.sqrt(2.0)


ACCEPTANCE_LINES = []


def record(number, ok, detail):
    line = f"ACCEPTANCE {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[-1])):
            terminalreporter.write_line(line)
