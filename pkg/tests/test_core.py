import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from relayfbl.core import (ChannelParams, DomainError, GaussianSpec, RngStream, cap_fn, disp_fn,
                           log_gauss)


@pytest.mark.parametrize("x, expected", [(0.0, 0.0), (math.e ** 2 - 1, 1.0), (1.0, 0.5 * math.log(2))])
def test_cap_fn_values(x, expected):
    assert cap_fn(x) == pytest.approx(expected, abs=1e-15)


def test_cap_fn_frozen():
    assert round(cap_fn(1.0), 6) == 0.346574


@pytest.mark.parametrize("x, expected", [(0.0, 0.0), (1.0, 0.5), (3.0, 0.75)])
def test_disp_fn_values(x, expected):
    assert disp_fn(x) == expected


@pytest.mark.parametrize("fn", [cap_fn, disp_fn])
def test_negative_input_rejected(fn):
    with pytest.raises(DomainError):
        fn(-1e-9)


def test_cap_fn_increasing_and_concave():
    grid = np.linspace(0.0, 50.0, 5001)
    c = cap_fn(grid)
    assert np.all(np.diff(c) > 0)
    assert np.all(np.diff(c, 2) <= 1e-15)


def test_disp_fn_bounded_and_increasing():
    grid = np.concatenate([np.linspace(0, 10, 1001), np.logspace(1, 12, 200)])
    v = disp_fn(grid)
    assert np.all(v < 1.0)
    assert np.all(np.diff(v) >= 0)


def test_log_gauss_standard_origin():
    # -0.5 ln(2 pi) to 16 digits
    assert log_gauss([0.0], GaussianSpec(0.0, 1.0)) == pytest.approx(-0.9189385332046727, abs=1e-15)


@given(st.floats(-50, 50), st.floats(1e-3, 1e3))
def test_log_gauss_peak(mu, var):
    assert log_gauss([mu], GaussianSpec(mu, var)) == pytest.approx(-0.5 * math.log(2 * math.pi * var))


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=20),
       st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=20),
       st.floats(-10, 10), st.floats(1e-2, 1e2))
def test_log_gauss_additive(a, b, mu, var):
    spec = GaussianSpec(mu, var)
    whole = log_gauss(a + b, spec)
    parts = log_gauss(a, spec) + log_gauss(b, spec)
    assert whole == pytest.approx(parts, rel=1e-12, abs=1e-12)


def test_log_gauss_zero_variance_rejected():
    with pytest.raises(DomainError):
        log_gauss([0.0], GaussianSpec(0.0, 0.0))


def test_gaussian_spec_negative_variance():
    with pytest.raises(DomainError):
        GaussianSpec(0.0, -1.0)


@pytest.mark.parametrize("field", ["p1", "p2", "n2", "n3"])
@pytest.mark.parametrize("bad", [0.0, -1.0, float("nan"), float("inf")])
def test_channel_params_rejects(field, bad):
    kw = dict(p1=1.0, p2=1.0, n2=1.0, n3=1.0)
    kw[field] = bad
    with pytest.raises(DomainError):
        ChannelParams(**kw)


def test_rng_determinism_10k():
    a = RngStream(123, 45).normals(10_000)
    b = RngStream(123, 45).normals(10_000)
    assert a.tobytes() == b.tobytes()


def test_rng_frozen_first_values():
    # Pins the sampling algorithm; a change here breaks seed reproducibility.
    raw = RngStream(5, 7).raw(4, 4)
    assert raw.tolist() == [11909970843071548987, 5082809696259149560,
                            14378918058016007044, 11507933119814781604]


def test_rng_distinct_streams_uncorrelated():
    a = RngStream(1, 0).normals(100_000)
    b = RngStream(1, 1).normals(100_000)
    assert abs(np.corrcoef(a, b)[0, 1]) < 4 / math.sqrt(a.size)


@given(st.integers(0, 5000), st.integers(1, 300))
def test_rng_normals_random_access(offset, count):
    s = RngStream(9, 3)
    full = s.normals(offset + count)
    assert np.array_equal(s.normals(count, offset), full[offset:])


def test_rng_moments():
    z = RngStream(2, 2).normals(1_000_000)
    assert abs(z.mean()) < 4e-3
    assert abs(z.var() - 1) < 6e-3


def test_rng_integers_uniform_and_in_range():
    x = RngStream(3).integers(7, 70_000)
    assert x.min() == 1 and x.max() == 7
    counts = np.bincount(x, minlength=8)[1:]
    assert np.all(np.abs(counts - 10_000) < 4 * math.sqrt(10_000))


def test_spawn_is_deterministic_and_label_sensitive():
    s = RngStream(11, 2)
    assert s.spawn("U") == s.spawn("U")
    assert s.spawn("U") != s.spawn("V")
    assert s.spawn("relay", 1) != s.spawn("relay", 2)
    assert s.spawn("a").seed == 11


@pytest.mark.parametrize("seed", [-1, 1 << 64])
def test_rng_seed_range(seed):
    with pytest.raises(DomainError):
        RngStream(seed)
