import csv
import math

import numpy as np
import pytest

from granular_jko.driver import (
    HISTORY_COLUMNS,
    RunConfig,
    Strategy,
    Trigger,
    adapt_dt_on_failure,
    run_homogeneous,
    run_inhomogeneous,
    write_history,
)


class FailingSolver:
    """Reports failure a fixed number of times, then success."""

    def __init__(self, failures):
        self.failures = failures
        self.calls = []

    def __call__(self, dt):
        self.calls.append(dt)
        ok = len(self.calls) > self.failures
        return ("result", dt), int(not ok)


def test_adapt_dt_immediate_success():
    solver = FailingSolver(0)
    dt, result, failed = adapt_dt_on_failure(0.01, solver, 5e-6)
    assert dt == 0.01 and not failed and solver.calls == [0.01]


def test_adapt_dt_two_failures_quarter_step():
    dt, result, failed = adapt_dt_on_failure(0.01, FailingSolver(2), 5e-6)
    assert dt == pytest.approx(0.0025) and not failed
    assert result == ("result", dt)


def test_adapt_dt_never_converges_stops_at_threshold():
    solver = FailingSolver(10**9)
    dt, _, failed = adapt_dt_on_failure(0.01, solver, 5e-6)
    assert failed and dt <= 5e-6
    assert len(solver.calls) < 20


def test_adapt_dt_rejects_nonpositive():
    with pytest.raises(ValueError):
        adapt_dt_on_failure(0.0, FailingSolver(0), 1e-6)


@pytest.mark.parametrize("kw", [
    dict(N_v=2), dict(dt0=0.0), dict(delta0=1.0), dict(delta=0.0), dict(refine_stride=0),
    dict(dt_rule="other"), dict(strategy="sometimes"), dict(lam=-1.0),
])
def test_run_config_validation(kw):
    with pytest.raises(ValueError):
        RunConfig(**kw)


def test_run_config_kernel_and_options():
    cfg = RunConfig(gamma=3.0, lam=4.0, beta=10.0, tol=1e-9)
    assert cfg.kernel.scale == 2.0 and cfg.kernel.gamma == 3.0
    assert cfg.jko_options.beta == 10.0 and cfg.jko_options.tol == 1e-9
    d = cfg.to_dict()
    assert d["strategy"] == "fixed" and d["bump_mode"] == "one_bump"


def short_homogeneous(**kw):
    base = dict(gamma=1.0, N_v=41, L_v=2.0, dt0=0.02, T_final=0.2, initial_condition="g1")
    base.update(kw)
    return run_homogeneous(RunConfig(**base))


def test_homogeneous_structure_and_columns():
    hist, rep = short_homogeneous()
    assert rep.trigger is Trigger.HORIZON and rep.T_b == pytest.approx(0.2)
    assert len(hist) == 11
    assert set(HISTORY_COLUMNS) <= set(hist[0])
    mass = hist[0]["mass"]
    for row in hist[1:]:
        assert row["mass"] == pytest.approx(mass, rel=1e-8)
        assert row["m2_after_collision"] <= row["m2_before_collision"] * (1 + 1e-8)
        assert abs(row["momentum"]) < 1e-8


def test_homogeneous_threshold_trigger():
    hist, rep = short_homogeneous(eps_v=0.05, T_final=2.0)
    assert rep.trigger is Trigger.MIN_DV and rep.B_v == 1
    assert hist[-1]["min_dv"] <= 0.05


def test_homogeneous_adaptive_halves_on_failure():
    hist, rep = short_homogeneous(strategy="adaptive", max_iter=2, eps_t=1e-3, dt0=0.05)
    assert rep.trigger is Trigger.EXIT_FLAG


def test_homogeneous_custom_profile_and_callback():
    seen = []
    cfg = RunConfig(N_v=31, dt0=0.05, T_final=0.1)
    run_homogeneous(cfg, profile=lambda v: np.exp(-3 * v**2), on_step=lambda s, t, g, f: seen.append(s))
    assert seen == [1, 2]


def test_homogeneous_rejects_massless_profile():
    with pytest.raises(ValueError):
        run_homogeneous(RunConfig(N_v=11), profile=lambda v: np.zeros_like(v) - 1.0)


def test_inhomogeneous_short_run_conserves_mass_and_momentum():
    cfg = RunConfig(gamma=3.0, lam=4.0, N_x=21, N_v=21, L_x=4.0, L_v=4.0, dt0=0.05, T_final=0.2,
                    initial_condition="f0", bump_mode="two_bump", delta0=0.02, eps_v=1e-3 / 8,
                    eps_x=1e-3 / 8)
    hist, rep = run_inhomogeneous(cfg)
    assert rep.trigger is Trigger.HORIZON and rep.B_x == 0 and rep.B_v == 0
    m0 = hist[0]["mass"]
    for row in hist[1:]:
        assert row["mass"] == pytest.approx(m0, rel=1e-8)
        assert abs(row["momentum"]) <= 1e-3 * m0
        assert row["m2_after_collision"] <= row["m2_before_collision"] * (1 + 1e-8)
        assert row["level_components"] >= 1
    assert len(hist) == 5


def test_inhomogeneous_x_threshold_trigger():
    cfg = RunConfig(gamma=3.0, lam=4.0, N_x=21, N_v=21, L_x=4.0, L_v=4.0, dt0=0.05, T_final=1.0,
                    initial_condition="f0", eps_x=0.5)
    _, rep = run_inhomogeneous(cfg)
    assert rep.trigger is Trigger.MIN_DX and rep.B_x == 1


def test_adaptive_step_rule():
    cfg = RunConfig(N_x=21, N_v=21, L_x=4.0, L_v=4.0, dt0=1.0, T_final=0.3, strategy=Strategy.ADAPTIVE,
                    initial_condition="f0", gamma=3.0, lam=4.0)
    hist, _ = run_inhomogeneous(cfg)
    first = hist[1]
    assert first["dt"] == pytest.approx(0.9 * (8.0 / 21) / 4.0)


def test_write_history_roundtrip(tmp_path):
    hist, _ = short_homogeneous(T_final=0.04)
    path = write_history(tmp_path / "h.csv", hist)
    rows = list(csv.DictReader(path.open()))
    assert list(rows[0])[: len(HISTORY_COLUMNS)] == HISTORY_COLUMNS
    assert float(rows[-1]["t"]) == pytest.approx(0.04)
    assert math.isclose(float(rows[1]["mass"]), hist[1]["mass"], rel_tol=0, abs_tol=0)
