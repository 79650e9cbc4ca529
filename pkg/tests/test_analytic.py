import csv
import math

import numpy as np
import pytest
from scipy.integrate import trapezoid
from scipy.optimize import brentq

from granular_jko.analytic import (
    Criticality,
    SelfSimilarParams,
    bump_profile,
    burgers_blowup_time,
    characteristic_gamma2,
    characteristic_gamma_gt2,
    classify_threshold,
    closed_form,
    integrate_characteristic,
    integrate_ode,
    self_similar_density,
    write_characteristics_csv,
    write_selfsimilar_csv,
)
from granular_jko.grid import Grid1D

RHO0_G2 = 1 / math.sqrt(240)


def params(lam=300.0, beta=0.0):
    return SelfSimilarParams(rho0=RHO0_G2, m0=0.4, b0=-10.0, lam=lam, beta=beta)


def test_initial_state():
    p = params()
    assert closed_form(p, 0.0) == pytest.approx((p.rho0, p.m0, p.b0, p.rho0 / p.m0))


def test_blowup_time_from_b0():
    assert params().T == pytest.approx(0.1)


def test_critical_width_constant():
    p = params(lam=2 / (RHO0_G2 * 0.1))
    widths = [closed_form(p, t)[3] for t in np.linspace(0, 0.099, 7)]
    np.testing.assert_allclose(widths, widths[0], rtol=1e-12)


@pytest.mark.parametrize("lam, sign", [(400.0, -1), (200.0, 1)])
def test_width_monotone(lam, sign):
    p = params(lam=lam)
    widths = np.array([closed_form(p, t)[3] for t in np.linspace(0, 0.099, 12)])
    assert np.all(sign * np.diff(widths) > 0)


def test_closed_form_rejects_past_blowup():
    with pytest.raises(ValueError):
        closed_form(params(), 0.1)
    with pytest.raises(ValueError):
        closed_form(params(beta=1.0), 0.01)


def test_invalid_params():
    with pytest.raises(ValueError):
        SelfSimilarParams(rho0=1.0, m0=1.0, b0=1.0, lam=1.0)
    with pytest.raises(ValueError):
        SelfSimilarParams(rho0=1.0, m0=1.0, b0=-1.0, lam=-1.0)


def test_closed_form_ode_residual():
    p = params()
    half = 0.5 * p.lam
    for t in (0.01, 0.05, 0.08):
        rho, m, b, _ = closed_form(p, t)
        # exact derivatives of the closed form
        drho = rho / (p.T - t)
        dm = half * p.rho0 * p.T * m / (p.T - t)
        db = -1.0 / (p.T - t) ** 2
        assert abs(drho + b * rho) <= 1e-10 * abs(drho)
        assert abs(dm - half * rho * m) <= 1e-10 * abs(dm)
        assert abs(db + b * b) <= 1e-10 * abs(db)


def test_ode_matches_closed_form(rng):
    for _ in range(5):
        p = SelfSimilarParams(rho0=rng.uniform(0.05, 1), m0=rng.uniform(0.1, 2), b0=-rng.uniform(1, 20),
                              lam=rng.uniform(0, 30))
        t = 0.9 * p.T
        num = integrate_ode(p, t, p.T / 1e5)
        exact = closed_form(p, t)[:3]
        np.testing.assert_allclose(num, exact, rtol=1e-8)


def test_ode_without_interaction():
    p = params(lam=0.0)
    rho, m, b = integrate_ode(p, 0.05, 1e-5)
    assert m == pytest.approx(p.m0, rel=1e-14)
    assert rho == pytest.approx(p.rho0 * p.T / (p.T - 0.05), rel=1e-10)


def test_ode_refuses_blowup_time():
    with pytest.raises(ValueError):
        integrate_ode(params(), 0.1, 1e-3)


def test_beta_positive_mass_growth_like_inverse_distance():
    p = SelfSimilarParams(rho0=0.5, m0=1.0, b0=-1.0, lam=4.0, beta=1.0)
    vals = []
    for k in range(4, 11):
        t = p.T * (1 - 2.0**-k)
        _, m, _ = integrate_ode(p, t, p.T * 1e-6)
        vals.append(m * (p.T - t))
    assert max(vals[-3:]) / min(vals[-3:]) - 1 < 0.05
    assert min(vals) > 0


def test_beta_positive_width_bounded():
    p = SelfSimilarParams(rho0=0.5, m0=1.0, b0=-1.0, lam=4.0, beta=1.0)
    rho, m, _ = integrate_ode(p, p.T / 2, p.T * 1e-6)
    ref = rho / m
    for t in np.linspace(p.T / 2, p.T * (1 - 1e-3), 8)[1:]:
        rho, m, _ = integrate_ode(p, t, p.T * 1e-6)
        assert 0.5 * ref <= rho / m <= 2 * ref


def test_classify_threshold():
    assert classify_threshold(25.0, 1.0, 0.1) is Criticality.SUPERCRITICAL
    assert classify_threshold(10.0, 1.0, 0.1) is Criticality.SUBCRITICAL
    assert classify_threshold(20.0, 1.0, 0.1) is Criticality.CRITICAL
    boundary = 20 * math.sqrt(240)
    assert boundary == pytest.approx(309.84, abs=0.01)
    assert classify_threshold(boundary + 0.5, RHO0_G2, 0.1) is Criticality.SUPERCRITICAL
    assert classify_threshold(boundary - 0.5, RHO0_G2, 0.1) is Criticality.SUBCRITICAL
    with pytest.raises(ValueError):
        classify_threshold(0.0, 1.0, 1.0)


def test_characteristic_alpha_zero_is_straight_line():
    p = params()
    x = 0.3
    for t in (0.0, 0.04, 0.09):
        assert characteristic_gamma2(p, x, -x / p.T, t) == pytest.approx(x * (p.T - t) / p.T, abs=1e-15)


def test_characteristic_stays_negative_in_band():
    p = params(lam=400.0)
    x = -0.2
    lo, hi = -x / p.T, -x / p.T * 0.5 * p.criticality_number
    v = 0.5 * (lo + hi)
    for t in np.linspace(0, 0.0999, 50)[1:]:
        assert characteristic_gamma2(p, x, v, t) < 0


def test_characteristic_matches_trajectory_ode():
    for lam in (200.0, 400.0):
        p = params(lam=lam)
        t = 0.9 * p.T
        x, v = -0.1, 1.5
        X, _, _ = integrate_characteristic(p, x, v, t, p.T / 1e5)
        assert characteristic_gamma2(p, x, v, t) == pytest.approx(X, rel=1e-6)


def test_alpha_conserved_along_trajectory():
    p = params(lam=350.0)
    x, v = 0.05, -0.8
    alpha0 = (p.m0 / p.rho0) * (v - p.b0 * x)
    for t in np.linspace(0.01, 0.09, 5):
        _, _, alpha = integrate_characteristic(p, x, v, t, p.T / 1e5)
        assert abs(alpha - alpha0) <= 1e-8 * max(1.0, abs(alpha0))


def test_characteristic_critical_refused():
    with pytest.raises(ValueError):
        characteristic_gamma2(params(lam=2 / (RHO0_G2 * 0.1)), 0.1, 0.0, 0.05)


def test_gamma_gt2_no_crossing_without_drift():
    X, t_cross = characteristic_gamma_gt2(-0.5, 0.0, 1.0, 1.0, 0.4)
    assert X == pytest.approx(-0.5 * 0.6)
    assert t_cross is None


def test_gamma_gt2_crossing_is_root():
    X0, alpha, C, T = -0.5, 0.3, 2.0, 1.0
    _, t_cross = characteristic_gamma_gt2(X0, alpha, C, T, 0.0)
    assert 0 < t_cross < T
    root = brentq(lambda t: characteristic_gamma_gt2(X0, alpha, C, T, t)[0], 1e-9, T * (1 - 1e-12),
                  xtol=1e-14)
    assert abs(characteristic_gamma_gt2(X0, alpha, C, T, t_cross)[0]) < 1e-10
    assert t_cross == pytest.approx(root, abs=1e-10)


def test_xv_condition():
    from granular_jko.analytic import xv_condition

    p = params(lam=400.0)
    x = -0.1
    assert not xv_condition(p, x, -x / p.T)
    assert xv_condition(p, x, -(x / p.T) * (1 + 0.5 * p.criticality_number) / 2)
    sub = params(lam=100.0)
    assert not any(xv_condition(sub, x, v) for v in np.linspace(-5, 5, 101))


@pytest.mark.parametrize("g, expected", [
    (lambda v: np.exp(-2 * v**2), 0.5),
    (lambda v: 4 * np.exp(-2 * v**2), 0.125),
    (lambda v: np.exp(-10 * (v - 1.5) ** 2) + np.exp(-10 * (v + 1.5) ** 2), 0.5),
])
def test_burgers_blowup_time(g, expected):
    grid = Grid1D(np.linspace(-2.5, 2.5, 101), 2.55)
    assert burgers_blowup_time(g, grid) == pytest.approx(expected, rel=1e-6)


def test_bump_profile_normalised_and_compact():
    y = np.linspace(-0.6, 0.6, 20001)
    vals = bump_profile(y * y)
    assert trapezoid(vals, y) == pytest.approx(1.0, rel=1e-6)
    assert np.all(vals[np.abs(y) >= 0.5] == 0)


def test_self_similar_density_mass_matches_rho():
    p = params(lam=350.0)
    t = 0.05
    rho = closed_form(p, t)[0]
    v = np.linspace(-3, 3, 40001)
    assert trapezoid(self_similar_density(p, t, 0.0, v), v) == pytest.approx(rho, rel=1e-6)


def test_csv_writers(tmp_path):
    p = params()
    path = write_selfsimilar_csv(tmp_path / "ss.csv", p, [0.0, 0.05])
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["t", "rho", "m", "b", "inv_sqrt_a"]
    assert float(rows[2][3]) == pytest.approx(-1 / 0.05)
    path = write_characteristics_csv(tmp_path / "ch.csv", p, [(0.1, 0.0)], [0.0, 0.05])
    rows = list(csv.reader(path.open()))
    assert len(rows) == 3 and float(rows[1][3]) == pytest.approx(0.1)


def test_csv_beta_positive_matches_rk4(tmp_path):
    p = SelfSimilarParams(rho0=0.5, m0=1.0, b0=-1.0, lam=4.0, beta=1.0)
    path = write_selfsimilar_csv(tmp_path / "b.csv", p, [0.0, 0.3, 0.6])
    rows = list(csv.reader(path.open()))[1:]
    rho, m, b = integrate_ode(p, 0.6, 1e-5)
    np.testing.assert_allclose([float(x) for x in rows[2][1:4]], [rho, m, b], rtol=1e-8)
    assert float(rows[0][1]) == 0.5
