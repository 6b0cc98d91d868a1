import math

import numpy as np
import pytest

from lfpp_lab.core import GeometryError, GridSpec
from lfpp_lab.field import (
    HEADER,
    MEAN_ZERO,
    CircleAverageZero,
    FieldSample,
    circle_average,
    circle_average_variance,
    circle_weights,
    covariance_calibration,
    dump_field,
    load_field,
    mode_noise,
    sample_field,
    spectral_density,
    spectral_point_variance,
)
from lfpp_lab.mollify import mollify

LOG2 = math.log(2.0)

# Circle-average variance at n=64, r=0.25 about the window center, from a
# real-space double sum over the bilinear circle weights against the
# lattice covariance (computed once, independently of the spectral formula).
CIRCLE_VAR_64_QUARTER = 0.7774110366271025


def test_deterministic():
    spec = GridSpec(128)
    a = sample_field(spec, 12345)
    b = sample_field(spec, 12345)
    assert a.values.tobytes() == b.values.tobytes()
    assert not np.array_equal(a.values, sample_field(spec, 12346).values)


def test_mean_zero():
    spec = GridSpec(256)
    for seed in range(5):
        v = sample_field(spec, seed).values
        assert abs(v.mean()) <= 1e-10 * v.std()


def test_values_read_only():
    f = sample_field(GridSpec(16), 1)
    with pytest.raises(ValueError):
        f.values[0, 0] = 1.0


def test_noise_is_hermitian():
    z = mode_noise(16, 7)
    k = (-np.arange(16)) % 16
    assert np.allclose(z[np.ix_(k, k)], np.conj(z))
    assert np.abs(np.fft.ifft2(z).imag).max() < 1e-12
    half = mode_noise(16, 7, half=True)
    assert np.array_equal(half, z[:, :9])


def test_point_variance_matches_spectral_sum():
    spec = GridSpec(32)
    c = spec.nearest_vertex(spec.window_center)
    x = np.array([sample_field(spec, s).values[c] for s in range(2000)])
    exact = spectral_point_variance(spec)
    se = exact * math.sqrt(2.0 / (x.size - 1))
    assert abs(x.var(ddof=1) - exact) < 3 * se


def test_log_correlation_of_spectral_sums():
    spec = GridSpec(1024)
    a = spec.spacing
    eps = 8 * a
    while eps <= spec.side_length / 64 * (1 + 1e-12):
        diff = spectral_point_variance(spec, eps) - spectral_point_variance(spec, 2 * eps)
        assert diff == pytest.approx(LOG2, rel=0.05)
        eps *= 2


def test_spectral_variance_limits_and_monotone():
    spec = GridSpec(64)
    assert spectral_point_variance(spec, 1e3) < 1e-300
    eps = np.linspace(0.0, 1.0, 30)
    v = [spectral_point_variance(spec, e) for e in eps]
    assert all(b < a for a, b in zip(v, v[1:]))


def test_calibration_near_one():
    for n in (64, 256, 1024):
        assert 0.95 < covariance_calibration(n) < 1.05
    spec = GridSpec(256)
    assert spectral_density(spec)[0, 0] == 0.0


def test_circle_average_of_constant_and_linearity():
    spec = GridSpec(128)
    c = spec.window_center
    assert circle_average(FieldSample.constant(spec, 2.5), c, 0.2) == pytest.approx(2.5, abs=1e-13)
    f = sample_field(spec, 3)
    base = circle_average(f, c, 0.2)
    assert circle_average(f.shifted(0.7), c, 0.2) == pytest.approx(base + 0.7, abs=1e-13)


def test_circle_geometry_errors():
    spec = GridSpec(128)
    with pytest.raises(GeometryError):
        circle_average(sample_field(spec, 0), spec.window_center, 0.6)
    with pytest.raises(GeometryError):
        circle_average(sample_field(spec, 0), spec.window_center, 3 * spec.spacing)


def test_circle_variance_oracle():
    spec = GridSpec(64)
    v = circle_average_variance(spec, spec.window_center, 0.25)
    assert v == pytest.approx(CIRCLE_VAR_64_QUARTER, rel=1e-12)
    w = circle_weights(spec, spec.window_center, 0.25)
    assert w.sum() == pytest.approx(1.0, abs=1e-13)


def test_circle_variance_monte_carlo():
    spec = GridSpec(64)
    c = spec.window_center
    x = np.array([circle_average(sample_field(spec, s), c, 0.25) for s in range(2000)])
    exact = circle_average_variance(spec, c, 0.25)
    assert abs(x.var(ddof=1) - exact) < 3 * exact * math.sqrt(2.0 / (x.size - 1))


@pytest.mark.parametrize("r", [1 / 16, 1 / 8, 1 / 4])
def test_circle_variance_log_step(r):
    spec = GridSpec(512)
    c = spec.window_center
    diff = circle_average_variance(spec, c, r / 2) - circle_average_variance(spec, c, r)
    assert diff == pytest.approx(LOG2, rel=0.10)


def test_circle_average_zero_normalization():
    spec = GridSpec(256)
    norm = CircleAverageZero(spec.window_center, 0.5)
    f = sample_field(spec, 9, norm)
    assert abs(circle_average(f, norm.center, norm.radius)) < 1e-12
    assert f.normalization == norm
    # unit circle leaves the window at L = 2; the normalization wraps periodically
    g = sample_field(spec, 9, CircleAverageZero(spec.window_center, 1.0))
    assert np.allclose(np.diff((g.values - f.values).ravel()), 0.0, atol=1e-12)


def test_stationarity():
    spec = GridSpec(32)
    shift = (5, 11)
    p = (3, 7)
    direct = np.array([sample_field(spec, s).values[p] for s in range(1500)])
    rolled = np.array([np.roll(sample_field(spec, s + 10**6).values, shift, axis=(0, 1))[p] for s in range(1500)])
    var = spectral_point_variance(spec)
    se_mean = math.sqrt(2 * var / 1500)
    se_var = var * math.sqrt(2 * 2 / 1499)
    assert abs(direct.mean() - rolled.mean()) < 3 * se_mean
    assert abs(direct.var() - rolled.var()) < 3 * se_var


def test_resolutions_share_low_modes():
    fine = mollify(sample_field(GridSpec(512), 77), 2.0**-4).values
    coarse = mollify(sample_field(GridSpec(256), 77), 2.0**-4).values
    assert np.abs(fine[::2, ::2] - coarse).max() < 0.02 * coarse.std()


def test_dump_roundtrip(tmp_path):
    f = sample_field(GridSpec(32), 2**63 + 5)
    path = tmp_path / "f.bin"
    dump_field(path, f)
    raw = path.read_bytes()
    assert len(raw) == HEADER.size + 32 * 32 * 8 and HEADER.size == 32
    assert raw[:8] == b"LFPPFLD1"
    g = load_field(path)
    assert g.seed == f.seed and g.spec == f.spec
    assert g.values.tobytes() == f.values.tobytes()
    assert MEAN_ZERO == f.normalization
