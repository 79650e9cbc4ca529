"""Time loops for the homogeneous and the split-step inhomogeneous problems.

Both loops record one history row per step and stop on the blow-up
indicators: the smallest mesh width falling below its threshold, the
collision solver failing to converge, or the time step collapsing under
adaptive stepping.
"""

from __future__ import annotations

import csv
import enum
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable

import numpy as np

from .diagnostics import (
    field_summary,
    level_set_vertical_components,
    log_ratio_rho_m,
    moment,
    moment_1d,
    profile_summary,
)
from .grid import FLOOR, Grid1D, PhaseField, interpolate, quadrature_mass, regrid_2d, rescale_mass
from .jko import CollisionProblem, JkoOptions, solve_collision_batch
from .kernels import KernelSpec
from .meshmap import BumpMode, adapt_grid
from .transport import transport_step

log = logging.getLogger(__name__)

__all__ = [
    "Strategy",
    "Trigger",
    "RunConfig",
    "BlowupReport",
    "HISTORY_COLUMNS",
    "run_homogeneous",
    "run_inhomogeneous",
    "adapt_dt_on_failure",
    "write_history",
]

#: Columns every history row carries (extra diagnostics follow them).
HISTORY_COLUMNS = [
    "t", "dt", "mass", "momentum", "moment2", "moment3", "moment4", "entropy",
    "min_dx", "min_dv", "max_f", "exit_flag",
]


class Strategy(str, enum.Enum):
    FIXED = "fixed"
    ADAPTIVE = "adaptive"


class Trigger(str, enum.Enum):
    MIN_DX = "min_dx"
    MIN_DV = "min_dv"
    EXIT_FLAG = "exit_flag"
    HORIZON = "horizon"


@dataclass
class RunConfig:
    """Parameters of one driver run.

    ``lam`` is the inelasticity strength; the kernel matrix is scaled by
    ``lam / 2``. Homogeneous runs use only the ``v`` fields.
    """

    gamma: float = 1.0
    lam: float = 2.0
    normalized: bool = True
    L_x: float = 4.0
    L_v: float = 2.0
    N_x: int = 61
    N_v: int = 121
    dt0: float = 0.01
    strategy: Strategy = Strategy.FIXED
    T_final: float = 1.0
    eps_v: float = 1e-3 / 16
    eps_x: float = 1e-3 / 16
    eps_t: float = 5e-6
    delta0: float = 0.5
    delta: float = 0.5
    bump_mode: BumpMode = BumpMode.ONE
    bump_mode_x: BumpMode | None = None
    initial_condition: str = "g1"
    ic_params: dict = field(default_factory=dict)
    beta: float = 3000.0
    omega: float = 1.0
    max_iter: int = 500
    tol: float = 1e-10
    hessian: str = "banded"
    refine_stride: int = 1
    dt_rule: str = "verbatim"

    def __post_init__(self):
        self.strategy = Strategy(self.strategy)
        self.bump_mode = BumpMode(self.bump_mode)
        if self.bump_mode_x is not None:
            self.bump_mode_x = BumpMode(self.bump_mode_x)
        if min(self.N_x, self.N_v) < 3:
            raise ValueError("grid sizes must be at least 3")
        positive = ("dt0", "T_final", "eps_v", "eps_x", "eps_t", "L_x", "L_v", "lam")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not (0 < self.delta0 < 1 and 0 < self.delta < 1):
            raise ValueError("delta0 and delta must lie in (0, 1)")
        if self.refine_stride < 1:
            raise ValueError("refine_stride must be >= 1")
        if self.dt_rule not in ("verbatim", "cfl"):
            raise ValueError("dt_rule is 'verbatim' or 'cfl'")

    @property
    def kernel(self) -> KernelSpec:
        return KernelSpec(self.gamma, normalized=self.normalized, scale=0.5 * self.lam)

    @property
    def jko_options(self) -> JkoOptions:
        return JkoOptions(beta=self.beta, omega=self.omega, max_iter=self.max_iter,
                          tol=self.tol, hessian=self.hessian)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["strategy"] = self.strategy.value
        out["bump_mode"] = self.bump_mode.value
        out["bump_mode_x"] = None if self.bump_mode_x is None else self.bump_mode_x.value
        return out

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


@dataclass
class BlowupReport:
    T_b: float
    B_x: int
    B_v: int
    trigger: Trigger
    history: list = field(repr=False, default_factory=list)
    final_state: object = field(repr=False, default=None)

    @property
    def blew_up(self) -> bool:
        return self.trigger is not Trigger.HORIZON


def adapt_dt_on_failure(dt: float, redo: Callable, eps_t: float):
    """Halve ``dt`` while ``redo(dt)`` reports failure.

    ``redo`` returns ``(result, exit_flag)``. Returns ``(dt, result, failed)``
    where ``failed`` is True if ``dt`` dropped to ``eps_t`` or below without
    a converged solve.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    result, flag = redo(dt)
    while flag:
        if dt / 2 <= eps_t:
            return dt / 2, result, True
        dt /= 2
        result, flag = redo(dt)
    return dt, result, False


def _regrid_1d(old: Grid1D, new: Grid1D, f, mass):
    if new is old:
        return f
    return rescale_mass(new, interpolate(old, f, new.nodes), mass)


def run_homogeneous(cfg: RunConfig, profile: Callable | None = None, on_step: Callable | None = None):
    """Mesh-refined JKO evolution of a velocity profile.

    Parameters
    ----------
    cfg : RunConfig
    profile : callable, optional
        ``g(v)`` initial profile; defaults to the named condition in ``cfg``.
    on_step : callable, optional
        Called as ``on_step(step, t, grid, f)`` after every step.

    Returns
    -------
    history : list of dict
    report : BlowupReport
    """
    if profile is None:
        from .scenarios import build_initial_condition

        profile = build_initial_condition(cfg.initial_condition, cfg.ic_params)
    kspec, opts = cfg.kernel, cfg.jko_options
    grid = Grid1D.uniform(cfg.N_v, cfg.L_v)
    raw = np.asarray(profile(grid.nodes), dtype=float)
    if not np.max(raw) > 0:
        raise ValueError("initial profile has no positive values")
    f = np.maximum(raw, FLOOR)
    mass = quadrature_mass(grid, f)
    adaptive = cfg.strategy is Strategy.ADAPTIVE
    dt = cfg.dt0
    t, step = 0.0, 0
    history = [_row_1d(0.0, 0.0, grid, f, 0, iterations=0)]
    trigger = Trigger.HORIZON

    while t < cfg.T_final * (1 - 1e-12):
        dt = min(dt, cfg.T_final - t) if not adaptive else dt
        m2_before = moment_1d(grid, f, 2)

        def redo(h):
            prob = CollisionProblem(grid, kspec, h, opts)
            out, flags, iters = solve_collision_batch(f, h, grid, kspec, opts, problem=prob)
            return (out[0], int(iters[0])), int(flags[0])

        if adaptive:
            dt, (f_new, iters), failed = adapt_dt_on_failure(dt, redo, cfg.eps_t)
            if failed:
                trigger = Trigger.EXIT_FLAG
                history[-1]["exit_flag"] = 1
                break
            flag = 0
        else:
            (f_new, iters), flag = redo(dt)
        m2_after = moment_1d(grid, f_new, 2)
        t = (step + 1) * dt if not adaptive and dt == cfg.dt0 else t + dt
        step += 1
        if step % cfg.refine_stride == 0:
            new = adapt_grid(grid, f_new, cfg.bump_mode, cfg.delta0, cfg.delta)
            f_new = _regrid_1d(grid, new, f_new, mass)
            grid = new
        f = f_new
        history.append(_row_1d(t, dt, grid, f, flag, iterations=iters,
                               m2_before=m2_before, m2_after=m2_after))
        if on_step is not None:
            on_step(step, t, grid, f)
        if not adaptive and grid.min_spacing <= cfg.eps_v:
            trigger = Trigger.MIN_DV
            break
        if adaptive and dt <= cfg.eps_t:
            trigger = Trigger.EXIT_FLAG
            break

    B_v = int(trigger is not Trigger.HORIZON)
    report = BlowupReport(t, 0, B_v, trigger, history, (grid, f))
    log.info("homogeneous run stopped at t=%.6g (%s)", t, trigger.value)
    return history, report


def _row_1d(t, dt, grid, f, flag, iterations, m2_before=math.nan, m2_after=math.nan):
    row = {"t": t, "dt": dt}
    row.update(profile_summary(grid, f))
    row.update(min_dx=math.nan, min_dv=grid.min_spacing, exit_flag=int(flag))
    pos = grid.nodes > 0
    row["peak_v"] = float(grid.nodes[pos][np.argmax(f[pos])])
    row.update(m2_before_collision=m2_before, m2_after_collision=m2_after, sqp_iters=iterations)
    return row


def _time_step(cfg: RunConfig, field_: PhaseField) -> float:
    if cfg.strategy is Strategy.FIXED:
        return cfg.dt0
    dv, dx = field_.v_grid.min_spacing, field_.x_grid.min_spacing
    if cfg.dt_rule == "cfl":
        # transport CFL in x and a drift bound in v
        return min(cfg.dt0, 0.9 * dx / cfg.L_v, 0.9 * dv / cfg.L_v)
    return min(cfg.dt0, 0.9 * dv / cfg.L_v, 0.9 * dx / cfg.L_x)


def run_inhomogeneous(cfg: RunConfig, initial: PhaseField | None = None,
                      on_step: Callable | None = None):
    """Split-step evolution: transport, collision per ``x`` node, 2-D refinement.

    Returns ``(history, report)`` like :func:`run_homogeneous`; the report's
    ``final_state`` is the last :class:`PhaseField`.
    """
    if initial is None:
        from .scenarios import initial_field

        initial = initial_field(cfg)
    fld = initial.copy()
    fld.values = np.maximum(fld.values, FLOOR)
    kspec, opts = cfg.kernel, cfg.jko_options
    mode_v = cfg.bump_mode
    mode_x = cfg.bump_mode_x or cfg.bump_mode
    t, step = 0.0, 0
    history = [_row_2d(0.0, 0.0, fld, 0, 0)]
    trigger = Trigger.HORIZON

    while t < cfg.T_final * (1 - 1e-12):
        dt = min(_time_step(cfg, fld), cfg.T_final - t)
        m2_before = moment(fld, 2)
        fld = transport_step(fld, fld.x_grid, dt)
        m2_transport = moment(fld, 2)
        vals, flags, iters = solve_collision_batch(fld.values, dt, fld.v_grid, kspec, opts)
        fld = PhaseField(fld.x_grid, fld.v_grid, vals)
        m2_after = moment(fld, 2)
        flag = int(flags.max())
        step += 1
        t += dt
        if step % cfg.refine_stride == 0:
            px = fld.values.max(axis=1)
            pv = fld.values.max(axis=0)
            x_new = adapt_grid(fld.x_grid, px, mode_x, cfg.delta0, cfg.delta)
            v_new = adapt_grid(fld.v_grid, pv, mode_v, cfg.delta0, cfg.delta)
            fld = regrid_2d(fld, x_new, v_new)
        history.append(_row_2d(t, dt, fld, flag, int(iters.max()), m2_before=m2_before,
                               m2_transport=m2_transport, m2_after=m2_after))
        if on_step is not None:
            on_step(step, t, fld)
        if fld.x_grid.min_spacing <= cfg.eps_x:
            trigger = Trigger.MIN_DX
        elif fld.v_grid.min_spacing <= cfg.eps_v:
            trigger = Trigger.MIN_DV
        elif flag:
            trigger = Trigger.EXIT_FLAG
        elif cfg.strategy is Strategy.ADAPTIVE and dt <= cfg.eps_t:
            trigger = (Trigger.MIN_DX if fld.x_grid.min_spacing / cfg.L_x
                       <= fld.v_grid.min_spacing / cfg.L_v else Trigger.MIN_DV)
        if trigger is not Trigger.HORIZON:
            break

    B_x = int(fld.x_grid.min_spacing <= cfg.eps_x or trigger is Trigger.MIN_DX)
    B_v = int(fld.v_grid.min_spacing <= cfg.eps_v or trigger in (Trigger.MIN_DV, Trigger.EXIT_FLAG))
    report = BlowupReport(t, B_x, B_v, trigger, history, fld)
    log.info("inhomogeneous run stopped at t=%.6g (%s)", t, trigger.value)
    return history, report


def _row_2d(t, dt, fld: PhaseField, flag, iterations, m2_before=math.nan,
            m2_transport=math.nan, m2_after=math.nan):
    row = {"t": t, "dt": dt}
    row.update(field_summary(fld))
    row.update(min_dx=fld.x_grid.min_spacing, min_dv=fld.v_grid.min_spacing, exit_flag=int(flag))
    vals = fld.values
    upper = fld.v_grid.nodes > 0
    i, _ = np.unravel_index(np.argmax(vals[:, upper]), vals[:, upper].shape)
    row["peak_x"] = float(fld.x_grid.nodes[i])
    row["log_ratio"] = log_ratio_rho_m(fld)
    row["level_components"] = level_set_vertical_components(fld, 0.1)
    row.update(m2_before_collision=m2_transport, m2_after_collision=m2_after,
               m2_step_start=m2_before, sqp_iters=iterations)
    return row


def write_history(path, history) -> Path:
    """CSV with the standard columns first, extra diagnostics after."""
    path = Path(path)
    extra = [k for k in history[0] if k not in HISTORY_COLUMNS] if history else []
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=HISTORY_COLUMNS + extra)
        w.writeheader()
        for row in history:
            w.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in row.items()})
    return path
