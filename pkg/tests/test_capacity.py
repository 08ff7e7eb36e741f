import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from relayfbl.capacity import (BindingSide, PowerSplit, _branches, alpha_tilde, eps_capacity,
                               r_cutset)
from relayfbl.core import ChannelParams, DomainError

UNIT = ChannelParams(1, 1, 1, 1)
ASYM = ChannelParams(2, 1, 1, 1)

channels = st.builds(ChannelParams, st.floats(0.01, 100), st.floats(0.01, 100),
                     st.floats(0.01, 100), st.floats(0.01, 100))


def test_power_split_range():
    with pytest.raises(DomainError):
        PowerSplit(1.0000001)
    with pytest.raises(DomainError):
        PowerSplit(-0.1)


def test_r_cutset_zero_alpha():
    assert r_cutset(PowerSplit(0.0), 3.0, 5.0, UNIT) == 0.0


def test_r_cutset_examples():
    assert r_cutset(PowerSplit(1.0), 2, 1, UNIT) == pytest.approx(0.5 * math.log(2.5), abs=1e-15)
    assert round(r_cutset(PowerSplit(1.0), 2, 1, UNIT), 6) == 0.458145
    assert r_cutset(PowerSplit(1.0), 1, 1, UNIT) == pytest.approx(0.5 * math.log(2), abs=1e-15)


def test_alpha_tilde_boundary_case():
    assert alpha_tilde(1, 1, UNIT).alpha == 1.0


def test_alpha_tilde_closed_form():
    target = (2 + math.sqrt(3)) / 4
    assert alpha_tilde(2, 1, ASYM).alpha == pytest.approx(target, abs=1e-12)
    assert alpha_tilde(4, 2, ASYM).alpha == pytest.approx(target, abs=1e-12)
    # 16 a^2 - 16 a + 1 = 0 at the crossing
    a = alpha_tilde(2, 1, ASYM).alpha
    assert 16 * a * a - 16 * a + 1 == pytest.approx(0, abs=1e-10)


@pytest.mark.parametrize("eps, expected", [(0.0, 0.5 * math.log(2)), (0.5, 0.5 * math.log(3)),
                                           (0.2, 0.5 * math.log(2.25))])
def test_eps_capacity_unit_channel(eps, expected):
    assert eps_capacity(UNIT, eps).rate == pytest.approx(expected, abs=1e-12)


def test_eps_capacity_frozen_rounding():
    assert round(eps_capacity(UNIT, 0.0).rate, 6) == 0.346574
    assert round(eps_capacity(UNIT, 0.5).rate, 6) == 0.549306
    assert round(eps_capacity(UNIT, 0.2).rate, 6) == 0.405465


@pytest.mark.parametrize("eps", [-0.1, 1.0, 1.5])
def test_eps_capacity_domain(eps):
    with pytest.raises(DomainError):
        eps_capacity(UNIT, eps)


def test_binding_side():
    # weak relay link: alpha = 1 and the relay cut binds strictly
    res = eps_capacity(ChannelParams(1, 10, 1, 1))
    assert res.alpha_star.alpha == 1.0
    assert res.binding_side is BindingSide.RELAY_LINK
    # strong relay link: interior crossing, both cuts equal
    res = eps_capacity(ChannelParams(10, 1, 0.1, 10))
    assert 0 < res.alpha_star.alpha < 1
    assert res.binding_side is BindingSide.EQUAL


@settings(max_examples=200, deadline=None)
@given(channels, st.floats(0.0, 0.99))
def test_multiple_access_never_binds_strictly_at_optimum(ch, eps):
    assert eps_capacity(ch, eps).binding_side is not BindingSide.MULTIPLE_ACCESS


@settings(max_examples=200, deadline=None)
@given(channels, st.floats(0.01, 50), st.floats(0.01, 50))
def test_alpha_tilde_crossing_or_boundary(ch, p1, p2):
    a = alpha_tilde(p1, p2, ch).alpha
    relay, mac = _branches(a, p1, p2, ch)
    if a < 1.0:
        assert relay == pytest.approx(mac, abs=1e-9)
    else:
        assert relay <= mac + 1e-12


@settings(max_examples=100, deadline=None)
@given(channels, st.sampled_from([0.5, 2.0, 10.0]))
def test_alpha_tilde_scale_invariant(ch, c):
    a = alpha_tilde(ch.p1, ch.p2, ch).alpha
    assert alpha_tilde(c * ch.p1, c * ch.p2, ch).alpha == pytest.approx(a, abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(channels)
def test_alpha_tilde_maximizes(ch):
    a = alpha_tilde(ch.p1, ch.p2, ch)
    best = r_cutset(a, ch.p1, ch.p2, ch)
    grid = np.linspace(0, 1, 1000)
    assert all(r_cutset(PowerSplit(g), ch.p1, ch.p2, ch) <= best + 1e-12 for g in grid)


@settings(max_examples=30, deadline=None)
@given(channels)
def test_eps_capacity_strictly_increasing(ch):
    rates = [eps_capacity(ch, e).rate for e in np.arange(1, 100) / 100]
    assert all(b > a for a, b in zip(rates, rates[1:]))
