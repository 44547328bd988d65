import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from parastab.funcs import (
    Compose,
    DomainError,
    InverseOf,
    MinOf,
    Polynomial,
    Power,
    PowerLog,
    ScaledBy,
    StructureTriple,
    TabulatedMonotone,
    eval,
    from_dict,
    radial_inf_q,
    radial_power_log,
    theta_inf,
)

from _oracles import brute_theta_inf, random_power_logs


def test_eval_examples():
    assert eval(Power(1, 2), 3.0) == 9.0
    assert eval(InverseOf(Power(1, 2)), 9.0) == pytest.approx(3.0, rel=1e-14)
    e = math.e
    assert eval(PowerLog(2, 1, 1, shift=1), e - 1) == pytest.approx(2 * (e - 1), rel=1e-14)


def test_eval_rejects_bad_points():
    with pytest.raises(DomainError):
        eval(Power(1, 2), 0.0)
    with pytest.raises(DomainError):
        eval(Power(1, 2), -1.0)
    # log(1 + z)**-1 blows up at 0 but is fine elsewhere
    assert eval(PowerLog(1, 0, -1), 1.0) == pytest.approx(1 / math.log(2))


def test_constructors_validate():
    with pytest.raises(ValueError):
        Power(0.0, 1)
    with pytest.raises(ValueError):
        TabulatedMonotone((1, 1, 2), (1, 2, 3))
    with pytest.raises(ValueError):
        TabulatedMonotone((1, 2), (1, -2))
    with pytest.raises(ValueError):
        InverseOf(Power(1, -1))
    with pytest.raises(ValueError):
        StructureTriple(Power(1, 2), Power(1, 2), Power(1, 0), theta=1.0)


def test_theta_inf_examples():
    assert theta_inf(Power(1, 2), 2, 4) == pytest.approx(4.0)
    assert theta_inf(Power(1, -1), 2, 1) == pytest.approx(0.5)
    # (z - 2)**2 + 1 has its minimum inside (1, 4)
    assert theta_inf(Polynomial((5, -4, 1)), 2, 2) == pytest.approx(1.0, rel=1e-12)


def test_theta_inf_rejects_small_theta():
    with pytest.raises(ValueError):
        theta_inf(Power(1, 2), 1.0, 1.0)


def test_radial_q_examples():
    p = Power(1, -2, offset=1)
    for r in (0.5, 1.0, 3.0, 100.0):
        assert radial_inf_q(p, r) == pytest.approx((1 + r) ** -2)
    assert radial_inf_q(Power(1, 0, offset=1), 7.0) == 1.0
    tab = TabulatedMonotone((1, 2, 4), (3, 1, 2))
    assert radial_inf_q(tab, 4.0) == pytest.approx(1.0)


def test_radial_q_tabulated_matches_scan():
    tab = TabulatedMonotone((1, 2, 4, 8), (3, 1, 2, 0.5))
    for r in (1.5, 3.0, 6.0, 9.0):
        grid = np.concatenate([np.linspace(1e-9, r, 200_001), [x for x in tab.nodes if x <= r]])
        assert radial_inf_q(tab, r) == pytest.approx(float(np.min(tab(grid))), rel=1e-9)


def test_radial_power_log_convention():
    p = radial_power_log(2.0, -2.0, 1.0)
    assert float(p(3.0)) == pytest.approx(2.0 * 4.0**-2 * math.log(5.0))


def test_theta_inf_matches_brute_force():
    worst = 0.0
    for f, theta, z in random_power_logs(300, seed=11):
        ref = brute_theta_inf(f, theta, z)
        worst = max(worst, abs(theta_inf(f, theta, z) / ref - 1))
    assert worst < 1e-6


def test_tabulated_tail_freezes_last_slope():
    tab = TabulatedMonotone((1, 10, 100), (1, 10, 1000))
    assert float(tab(1000.0)) == pytest.approx(1e5, rel=1e-12)
    assert tab.tail() is None


def test_composition_and_scaling():
    phi = Power(1, 3)
    psi = Power(1, 2)
    h = Compose(InverseOf(phi), ScaledBy(0.5, psi))
    z = np.array([0.5, 2.0, 40.0])
    np.testing.assert_allclose(h(z), (0.5 * z**2) ** (1 / 3), rtol=1e-12)
    assert h.tail() == pytest.approx((2 / 3, 0.0))
    assert h.monotone == 1


def test_inverse_of_general_base():
    base = PowerLog(1, 1, 1, shift=2)
    inv = InverseOf(base)
    x = np.array([1e-3, 0.3, 5.0, 1e4])
    np.testing.assert_allclose(inv(base(x)), x, rtol=1e-9)


def test_min_of_tail_is_smaller_part():
    f = MinOf((Power(1, 2), PowerLog(1, 2, -1, shift=2)))
    assert f.tail() == (2.0, -1.0)


@pytest.mark.parametrize(
    "d",
    [
        {"family": "power", "c0": 2.0, "a": -1.0},
        {"family": "power", "c0": 1.0, "a": -2.0, "offset": 1.0},
        {"family": "power_log", "c0": 1.0, "a": 1.0, "s": 3.0, "shift": 1.0},
        {"family": "tabulated", "nodes": [1.0, 2.0], "values": [1.0, 4.0]},
        {"family": "inverse_of", "base": {"family": "power", "c0": 1.0, "a": 3.0}},
        {"family": "scaled_by", "eps": 0.5, "base": {"family": "power", "c0": 1.0, "a": 2.0}},
        {"family": "polynomial", "coeffs": [5.0, -4.0, 1.0]},
    ],
)
def test_dict_round_trip(d):
    f = from_dict(d)
    g = from_dict(f.to_dict())
    z = np.geomspace(0.1, 10, 7)
    np.testing.assert_allclose(f(z), g(z), rtol=0)


def test_from_dict_rejects_unknown():
    with pytest.raises(ValueError):
        from_dict({"family": "spline"})
    with pytest.raises(ValueError):
        from_dict({"family": "power", "a": 1, "b": 2})


def test_structure_triple_round_trip():
    t = StructureTriple(Power(1, 2), PowerLog(1, 1, 2), Power(1, -2, offset=1), theta=3.0)
    back = StructureTriple.from_dict(t.to_dict())
    assert back == t
    assert StructureTriple.from_dict(t.to_dict(), theta=1.5).theta == 1.5


power_logs = st.builds(
    PowerLog,
    st.floats(0.1, 10),
    st.floats(-3, 3),
    st.floats(-3, 3),
    st.sampled_from([1.0, 2.0]),
)
zetas = st.floats(1e-3, 1e3)
thetas = st.floats(1.01, 8)


@settings(max_examples=200, deadline=None)
@given(power_logs, thetas, zetas)
def test_theta_inf_below_value(f, theta, z):
    assert theta_inf(f, theta, z) <= float(f(z)) * (1 + 1e-10)


@settings(max_examples=200, deadline=None)
@given(power_logs, thetas, thetas, zetas)
def test_theta_inf_monotone_in_theta(f, t1, t2, z):
    lo, hi = sorted((t1, t2))
    assert theta_inf(f, hi, z) <= theta_inf(f, lo, z) * (1 + 1e-10)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.1, 5), st.floats(-4, 1), st.floats(-3, 3), st.floats(0.01, 50), st.floats(1.0, 100))
def test_radial_q_non_increasing(p0, l, m, r, factor):
    p = radial_power_log(p0, l, m)
    assert radial_inf_q(p, r * factor) <= radial_inf_q(p, r) * (1 + 1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.1, 10), st.floats(0.2, 4), st.floats(0, 3), st.floats(1e-3, 1e3))
def test_inverse_round_trip(c0, a, s, x):
    f = PowerLog(c0, a, s, shift=2.0)
    assert eval(InverseOf(f), eval(f, x)) == pytest.approx(x, rel=1e-9)
