import math

import numpy as np
import pytest

from ipscoupling.hydro import (
    RiemannProblem,
    compare_profiles,
    flux_exact_from_measure,
    flux_from_measure,
    front_positions,
    godunov,
    inflexion_report,
    mc_window,
    microscopic_current,
    riemann_solve,
    s2ep_flux,
    s2ep_flux_model,
    s2ep_flux_second_grouped,
    stp_flux,
    stp_flux_model,
    sup_distance_away_from_jumps,
    thermal_flux,
    thermal_flux_second,
)
from ipscoupling.rates import thermal_b_for_c

from _models import s2ep_random, sep, stp, thermal


def test_microscopic_current_examples():
    assert microscopic_current(sep(0.5, 0.5), 1, 1) == 0
    assert microscopic_current(stp(0.7, 0.3), 3, 2) == pytest.approx(0.7 * 6 - 0.3 * 3)
    t = thermal()
    r = t.rates(1, -1, (1,))
    assert microscopic_current(t, 1, -1) == pytest.approx(r[0] + 2 * r[1])


def test_stp_flux():
    assert stp_flux(1.0, 1.0, 0.0) == pytest.approx(2.0)
    assert np.all(stp_flux(np.linspace(0, 5, 11), 0.4, 0.4) == 0)
    with pytest.raises(ValueError):
        stp_flux(-0.1, 1.0, 0.0)
    for rho in (0.3, 1.0, 2.5):
        assert flux_exact_from_measure(stp(), rho) == pytest.approx(stp_flux(rho, 1, 0), rel=1e-9)


def test_stp_flux_from_measure_brackets_closed_form():
    est, se = flux_from_measure(stp(), 1.0, 200_000, np.random.default_rng(5))
    assert abs(est - stp_flux(1.0, 1.0, 0.0)) < 3 * se


@pytest.mark.parametrize("a,c", [(0.5, 0.145), (0.7, 0.5), (0.4, 0.9), (0.8, 0.3)])
def test_s2ep_flux_matches_measure_expectation(a, c):
    t = thermal(c=c, a=a)
    for rho in np.linspace(-0.95, 0.95, 9):
        assert s2ep_flux(rho, t) == pytest.approx(flux_exact_from_measure(t, rho), abs=1e-12)
    assert s2ep_flux(np.array([-1.0, 1.0]), t) == pytest.approx([0.0, 0.0], abs=1e-14)


def test_s2ep_flux_monte_carlo_on_grid():
    t = thermal()
    rng = np.random.default_rng(11)
    for rho in np.linspace(-1, 1, 21):
        est, se = flux_from_measure(t, rho, 20_000, rng)
        flux = float(s2ep_flux(rho, t))
        if abs(rho) == 1:
            assert se == 0 and est == pytest.approx(flux, abs=1e-14)
        else:
            assert abs(est - flux) <= 3 * se + 1e-12


def test_thermal_flux_constant_offset_and_zero_prefactor():
    a, c = 0.5, 0.145
    t = thermal(c=c, a=a)
    b = thermal_b_for_c(a, c)
    rho = np.linspace(-1, 1, 41)
    assert thermal_flux(rho, a, b) == pytest.approx(s2ep_flux(rho, t), abs=1e-12)
    flat = thermal(c=0.3, a=1.0)
    assert np.abs(s2ep_flux(rho, flat)).max() < 1e-12


def test_degenerate_branch():
    a = 0.6
    b = thermal_b_for_c(a, 0.5)
    t = thermal(c=0.5, a=a)
    rho = np.linspace(-0.9, 0.9, 7)
    assert thermal_flux(rho, a, b) == pytest.approx(s2ep_flux(rho, t), abs=1e-10)
    with pytest.raises(ValueError):
        s2ep_flux_second_grouped(0.1, t)


@pytest.mark.parametrize("c", [0.145, 0.3, 0.9])
def test_second_derivative_against_differences(c):
    t = thermal(c=c, a=0.5)
    f = s2ep_flux_model(t)
    rho = np.linspace(-0.99, 0.99, 199)
    h = 1e-4
    fd = (f.value(rho + h) - 2 * f.value(rho) + f.value(rho - h)) / h**2
    assert np.abs(fd - f.curvature(rho)).max() < 1e-6 * max(1.0, np.abs(fd).max()) + 2e-6
    fd1 = (f.value(rho + h) - f.value(rho - h)) / (2 * h)
    assert np.abs(fd1 - f.slope(rho)).max() < 1e-7
    b = thermal_b_for_c(0.5, c)
    assert thermal_flux_second(rho, 0.5, b) == pytest.approx(f.curvature(rho), abs=1e-10)
    assert s2ep_flux_second_grouped(rho, t) == pytest.approx(f.curvature(rho), abs=1e-10)


def test_refuses_without_product_condition():
    t = s2ep_random(100)
    with pytest.raises(ValueError):
        s2ep_flux(0.0, t)
    est, se = flux_from_measure(t, 0.2, 1000, np.random.default_rng(0))
    assert math.isfinite(est) and se > 0


@pytest.mark.parametrize("c,count,near", [(0.5, 0, None), (0.145, 2, 0.0), (0.9, 2, 1.0)])
def test_inflexions(c, count, near):
    rep = inflexion_report(s2ep_flux_model(thermal(c=c, a=0.5)))
    assert rep.count == count
    if near is not None:
        assert all(abs(abs(x) - near) < 0.25 for x in rep.locations)
        assert rep.locations[0] == pytest.approx(-rep.locations[1], abs=1e-8)


def _check_rankine_hugoniot(sol):
    flux = sol.problem.flux.value
    for w in sol.jumps:
        rh = (float(flux(w.left)) - float(flux(w.right))) / (w.left - w.right)
        assert w.speed == pytest.approx(rh, abs=1e-8)


def test_riemann_constant():
    sol = riemann_solve(RiemannProblem(0.4, 0.4, stp_flux_model(1, 0)))
    assert sol.waves == [] and np.all(sol(np.linspace(-3, 3, 7)) == 0.4)


def test_riemann_stp_shock_and_fan():
    flux = stp_flux_model(1.0, 0.0)
    shock = riemann_solve(RiemannProblem(2.0, 0.0, flux))
    assert [w.kind for w in shock.waves] == ["shock"]
    assert shock.waves[0].speed == pytest.approx(3.0, abs=1e-12)
    _check_rankine_hugoniot(shock)
    fan = riemann_solve(RiemannProblem(0.0, 2.0, flux))
    assert [w.kind for w in fan.waves] == ["rarefaction"]
    speed = np.linspace(1.2, 4.8, 13)
    assert fan(speed) == pytest.approx((speed - 1) / 2, abs=2e-3)
    with pytest.raises(ValueError):
        riemann_solve(RiemannProblem(-1.0, 1.0, flux))


def test_riemann_thermal_two_shocks():
    sol = riemann_solve(RiemannProblem(0.303, -0.303, s2ep_flux_model(thermal())))
    assert [w.kind for w in sol.waves] == ["shock", "rarefaction", "shock"]
    s1, fan, s2 = sol.waves
    assert s1.speed < 0 < s2.speed
    assert s1.speed == pytest.approx(-s2.speed, abs=1e-9)
    assert fan.speed == pytest.approx(s1.speed, abs=1e-3) and fan.speed_right == pytest.approx(s2.speed, abs=1e-3)
    _check_rankine_hugoniot(sol)
    u = sol(np.linspace(-1, 1, 401))
    assert np.all(np.diff(u) <= 0)


def test_contact_for_affine_flux():
    from ipscoupling.hydro import FluxModel

    lin = FluxModel(lambda r: 2 * np.asarray(r, float), lambda r: np.full_like(np.asarray(r, float), 2.0),
                    lambda r: np.zeros_like(np.asarray(r, float)), (0.0, 1.0))
    sol = riemann_solve(RiemannProblem(1.0, 0.0, lin))
    assert [w.kind for w in sol.waves] == ["contact"] and sol.jumps[0].speed == pytest.approx(2.0)


@pytest.mark.parametrize("lam,rho,model", [(2.0, 0.0, "stp"), (0.2, 1.7, "stp"), (0.303, -0.303, "s2ep"),
                                           (-0.8, 0.6, "s2ep")])
def test_godunov_oracle_agrees(lam, rho, model):
    flux = stp_flux_model(1.0, 0.0) if model == "stp" else s2ep_flux_model(thermal())
    sol = riemann_solve(RiemannProblem(lam, rho, flux))
    x, u = godunov(flux, lam, rho)
    assert sup_distance_away_from_jumps(sol, x, u) < 0.02


def test_compare_profiles_and_fronts_on_synthetic_data():
    sol = riemann_solve(RiemannProblem(0.303, -0.303, s2ep_flux_model(thermal())))
    x = np.linspace(-1.5, 1.5, 3001)
    assert compare_profiles(x, sol.profile(x, 1.0), sol, 1.0, 1.2) == 0.0
    shifted = sol.profile(x - 0.02, 1.0)
    fronts = front_positions(x, shifted, sol, 1.0)
    assert len(fronts) == 2
    for pred, meas in fronts:
        assert meas == pytest.approx(pred + 0.02, abs=2e-3)
    assert compare_profiles(x, sol.profile(x, 1.0) + 0.1, sol, 1.0, 1.0) == pytest.approx(0.2, rel=1e-9)
    with pytest.raises(ValueError):
        compare_profiles(x, shifted, sol, 1.0, 1e-6)
    flat = np.zeros_like(x)
    assert all(m is None for _, m in front_positions(x, flat + 0.303, sol, 1.0))


def test_mc_window():
    shock = riemann_solve(RiemannProblem(2.0, 0.0, stp_flux_model(1.0, 0.0)))
    assert mc_window(shock, 1000, 1.0) == 4500
    slow = riemann_solve(RiemannProblem(0.303, -0.303, s2ep_flux_model(thermal())))
    assert mc_window(slow, 1000, 1.0) == 2000
