import json

import numpy as np
import pytest
from scipy.integrate import cumulative_trapezoid

from parastab.pde import Absorption, CTerm, EquationSpec, RadialGrid, residual, simulate
from parastab.stationary import Outcome, find_witness, profile_radii, shoot, write_manifest, write_profile_csv

DECAYING_C = EquationSpec(n=3, c=CTerm(1.0, l=-4.0), absorption=Absorption(2.0))
CONSTANT_C = EquationSpec(n=3, c=CTerm(1.0), absorption=Absorption(2.0))


@pytest.fixture(scope="module")
def witness():
    search = find_witness(DECAYING_C, (0.01, 1.0))
    assert search.found
    return search.witness


def test_no_absorption_keeps_constant():
    res = shoot(EquationSpec(n=3, c=CTerm(0.0)), 0.7, 1e3)
    assert res.outcome is Outcome.BOUNDED_POSITIVE
    u, du = res.evaluate(np.linspace(0, 1e3, 11))
    np.testing.assert_array_equal(u, 0.7)
    np.testing.assert_array_equal(du, 0.0)


def test_decaying_coefficient_stays_bounded():
    res = shoot(DECAYING_C, 0.1, 1e3)
    assert res.outcome is Outcome.BOUNDED_POSITIVE
    # u'' + 2u'/r = c u**2 > 0 makes the profile increase, so it ends above A
    assert 0.1 < res.terminal_u < 0.2
    r = profile_radii(1e3, 4001)
    u, du = res.evaluate(r)
    assert np.all(np.diff(u) >= 0)


def test_flux_identity():
    # (r^2 u')' = r^2 c u^2, so u'(r) = r^-2 int_0^r s^2 c(s) u(s)^2 ds
    res = shoot(DECAYING_C, 0.1, 1e3)
    s = np.linspace(0.0, 50.0, 200_001)
    u, du = res.evaluate(s)
    flux = cumulative_trapezoid(s**2 * DECAYING_C.c_of_r(s) * u**2, s, initial=0.0)
    mask = s > 0.5
    np.testing.assert_allclose(du[mask], flux[mask] / s[mask] ** 2, rtol=1e-6)


def test_constant_coefficient_blows_up():
    res = shoot(CONSTANT_C, 1.0, 1e3)
    assert res.outcome is Outcome.BLOWUP
    assert 0 < res.radius < 1e3


def test_shoot_validates():
    with pytest.raises(ValueError):
        shoot(DECAYING_C, 0.0, 10.0)
    with pytest.raises(ValueError):
        shoot(DECAYING_C, 1.0, -1.0)


def test_witness_found_for_decaying_coefficient(witness):
    assert witness.is_witness()
    assert witness.plateau < 1e-6
    assert witness.A == pytest.approx(0.01)


def test_no_witness_for_constant_coefficient():
    search = find_witness(CONSTANT_C, (0.01, 10.0))
    assert not search.found
    assert all(s["outcome"] != "bounded_positive" for s in search.shots)


def test_empty_range_gives_none():
    assert not find_witness(DECAYING_C, (1.0, 1.0)).found
    assert not find_witness(DECAYING_C, (2.0, 1.0)).found


def test_witness_is_stationary_for_simulator(witness):
    grid = RadialGrid(16.0, 256)
    state = witness.to_field(grid)
    assert residual(state, DECAYING_C, grid) < 1e-4
    res = simulate(DECAYING_C, grid, state, 10.0, 1.0, 0.01, sample_every=50)
    sup = np.array(res.curve.sup_abs)
    assert np.max(np.abs(sup / sup[0] - 1)) < 0.01


def test_scaling_of_absorption_coefficient():
    # v = u / lam solves the equation with lam * c for sigma = 2
    lam, A = 3.0, 0.2
    base = shoot(DECAYING_C, A, 200.0)
    scaled = shoot(EquationSpec(n=3, c=CTerm(lam, l=-4.0), absorption=Absorption(2.0)), A / lam, 200.0)
    r = np.linspace(0, 200, 101)
    u, _ = base.evaluate(r)
    v, _ = scaled.evaluate(r)
    np.testing.assert_allclose(v, u / lam, rtol=1e-8)


@pytest.mark.parametrize(
    "spec, A",
    [(DECAYING_C, 0.1), (DECAYING_C, 1.0), (CONSTANT_C, 1.0), (CONSTANT_C, 0.05), (EquationSpec(n=3, c=CTerm(0.0)), 0.3)],
)
def test_classification_stable_under_tolerance(spec, A):
    assert shoot(spec, A, 1e3, rtol=1e-8).outcome is shoot(spec, A, 1e3, rtol=1e-10).outcome


def test_profile_files(tmp_path, witness):
    write_profile_csv(tmp_path / "w.csv", witness)
    lines = (tmp_path / "w.csv").read_text().splitlines()
    assert lines[0] == "r,u,du_dr"
    r_last = float(lines[-1].split(",")[0])
    assert r_last == pytest.approx(witness.radius)
    write_manifest(tmp_path / "m.json", {"witness": witness.summary()})
    data = json.loads((tmp_path / "m.json").read_text())
    assert data["witness"]["outcome"] == "bounded_positive"


def test_evaluate_outside_range(witness):
    with pytest.raises(ValueError):
        witness.evaluate([witness.radius * 2])
