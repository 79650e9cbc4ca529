"""Named initial conditions, scenario files and the scenario runner.

Scenario files are INI documents with one section per scenario::

    [g1_table1]
    mode = homogeneous
    initial_condition = g1
    dt0 = 0.00125
    eps_v = 6.25e-05

Keys are :class:`~granular_jko.driver.RunConfig` field names (``lambda`` is
accepted for ``lam``); ``ic.<name>`` keys set initial-condition parameters and
``expect.T_b`` / ``expect.tol`` record a reference blow-up time checked in
the summary. Self-similar scenarios use ``rho0, m0, b0, lambda, beta``.
"""

from __future__ import annotations

import configparser
import enum
import io
import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .analytic import (
    SelfSimilarParams,
    characteristic_gamma2,
    classify_threshold,
    closed_form,
    write_characteristics_csv,
    write_selfsimilar_csv,
)
from .driver import RunConfig, Trigger, run_homogeneous, run_inhomogeneous, write_history
from .grid import FLOOR, Grid1D, PhaseField, write_snapshot

__all__ = [
    "Mode",
    "Scenario",
    "PROFILES_1D",
    "PROFILES_2D",
    "build_initial_condition",
    "initial_field",
    "load_scenarios",
    "dump_scenarios",
    "run_scenario",
]


def _g(scale, width=2.0):
    return lambda v: scale * np.exp(-width * np.asarray(v, dtype=float) ** 2)


def _two_bump(center=1.5, width=10.0):
    def g(v):
        v = np.asarray(v, dtype=float)
        return np.exp(-width * (v - center) ** 2) + np.exp(-width * (v + center) ** 2)
    return g


PROFILES_1D = {
    "g1": lambda **p: _g(1.0),
    "g2": lambda **p: _g(2.0),
    "g3": lambda **p: _g(4.0),
    "g4": lambda **p: _two_bump(),
    "in_two": lambda center=1.5, width=10.0: _two_bump(center, width),
    "gaussian": lambda amplitude=1.0, width=2.0: _g(amplitude, width),
}


def _f0(a=6.0, b=6.0, c=1.5, d=2.0):
    def f(x, v):
        x, v = np.broadcast_arrays(np.asarray(x, float), np.asarray(v, float))
        return (np.exp(-a * (x + c) ** 2) * np.exp(-b * (v - d) ** 2)
                + np.exp(-a * (x - c) ** 2) * np.exp(-b * (v + d) ** 2))
    return f


def _ic_g2(a=120.0, b=10.0, x1=0.2, cutoff=1000.0):
    def f(x, v):
        x, v = np.broadcast_arrays(np.asarray(x, float), np.asarray(v, float))
        out = np.exp(-a * (b * x + v) ** 2) / math.sqrt(2 * math.pi)
        outside = np.abs(x) > x1
        return np.where(outside, out * np.exp(-cutoff * (np.abs(x) - x1) ** 2), out)
    return f


PROFILES_2D = {"f0": _f0, "ic_g2": _ic_g2}


def build_initial_condition(name: str, params: dict | None = None, x_grid: Grid1D | None = None,
                            v_grid: Grid1D | None = None):
    """Look up a named initial condition.

    Without grids a callable is returned (``g(v)`` or ``f(x, v)``). With the
    needed grids the floored samples are returned: an array for velocity
    profiles, a :class:`PhaseField` for phase-space data.
    """
    params = dict(params or {})
    if name in PROFILES_1D:
        g = PROFILES_1D[name](**params)
        if v_grid is None:
            return g
        return np.maximum(g(v_grid.nodes), FLOOR)
    if name in PROFILES_2D:
        f = PROFILES_2D[name](**params)
        if x_grid is None or v_grid is None:
            return f
        X, V = np.meshgrid(x_grid.nodes, v_grid.nodes, indexing="ij")
        return PhaseField(x_grid, v_grid, np.maximum(f(X, V), FLOOR))
    known = ", ".join(sorted(PROFILES_1D) + sorted(PROFILES_2D))
    raise KeyError(f"unknown initial condition {name!r}; known: {known}")


def initial_field(cfg: RunConfig) -> PhaseField:
    """Phase-space initial condition of ``cfg`` on uniform grids."""
    return build_initial_condition(cfg.initial_condition, cfg.ic_params,
                                   Grid1D.uniform(cfg.N_x, cfg.L_x), Grid1D.uniform(cfg.N_v, cfg.L_v))


class Mode(str, enum.Enum):
    HOMOGENEOUS = "homogeneous"
    INHOMOGENEOUS = "inhomogeneous"
    SELF_SIMILAR = "self_similar"


@dataclass
class Scenario:
    name: str
    mode: Mode
    config: RunConfig | SelfSimilarParams
    stride: int = 0
    out_dir: str = ""
    expect: dict = field(default_factory=dict)

    def __post_init__(self):
        self.mode = Mode(self.mode)


_RUN_TYPES = {f.name: f.type for f in fields(RunConfig)}
_SS_KEYS = ("rho0", "m0", "b0", "lam", "beta")
_META = ("mode", "stride", "out_dir")


def _parse_value(key, text):
    text = text.strip()
    if key in ("N_x", "N_v", "max_iter", "refine_stride"):
        return int(text)
    if key == "normalized":
        return text.lower() in ("1", "true", "yes", "on")
    if key == "bump_mode_x" and text.lower() in ("", "none"):
        return None
    if key in ("strategy", "bump_mode", "bump_mode_x", "initial_condition", "hessian", "dt_rule"):
        return text
    return float(text)


def _format_value(v):
    if isinstance(v, enum.Enum):
        return v.value
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return "none" if v is None else str(v)


def _section_to_scenario(name, sec) -> Scenario:
    items = {("lam" if k == "lambda" else k): v for k, v in sec.items()}
    mode = Mode(items.pop("mode", "homogeneous"))
    stride = int(items.pop("stride", 0))
    out_dir = items.pop("out_dir", "")
    expect = {k[7:]: float(items.pop(k)) for k in list(items) if k.startswith("expect.")}
    ic = {k[3:]: float(items.pop(k)) for k in list(items) if k.startswith("ic.")}
    if mode is Mode.SELF_SIMILAR:
        unknown = set(items) - set(_SS_KEYS)
        if unknown:
            raise KeyError(f"[{name}] unknown self-similar keys: {sorted(unknown)}")
        cfg = SelfSimilarParams(**{k: float(v) for k, v in items.items()})
    else:
        unknown = set(items) - set(_RUN_TYPES)
        if unknown:
            raise KeyError(f"[{name}] unknown keys: {sorted(unknown)}")
        kw = {k: _parse_value(k, v) for k, v in items.items()}
        if ic:
            kw["ic_params"] = ic
        cfg = RunConfig(**kw)
    return Scenario(name, mode, cfg, stride, out_dir, expect)


def _read(text_or_path):
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    if isinstance(text_or_path, Path) or "\n" not in text_or_path:
        path = Path(text_or_path)
        with path.open() as fh:
            cp.read_file(fh, source=str(path))
    else:
        cp.read_string(text_or_path)
    return cp


def load_scenarios(source, overrides: dict | None = None) -> list[Scenario]:
    """Parse a scenario file (path or text).

    Each override is applied to every section whose mode accepts the key;
    a key that no section accepts raises :class:`KeyError`.
    """
    cp = _read(source)
    out = []
    used = set()
    for name in cp.sections():
        sec = dict(cp[name])
        mode = Mode(sec.get("mode", "homogeneous"))
        for k, v in (overrides or {}).items():
            if _accepts(mode, k):
                sec[k] = str(v)
                used.add(k)
        out.append(_section_to_scenario(name, sec))
    unused = set(overrides or {}) - used
    if unused:
        raise KeyError(f"override keys match no scenario: {sorted(unused)}")
    return out


def _accepts(mode: Mode, key: str) -> bool:
    key = "lam" if key == "lambda" else key
    if key in _META or key.startswith("expect."):
        return True
    if mode is Mode.SELF_SIMILAR:
        return key in _SS_KEYS
    return key in _RUN_TYPES or key.startswith("ic.")


def dump_scenarios(scenarios) -> str:
    """Serialise scenarios back to INI text (inverse of :func:`load_scenarios`)."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    for sc in scenarios:
        sec = {"mode": sc.mode.value}
        if sc.stride:
            sec["stride"] = str(sc.stride)
        if sc.out_dir:
            sec["out_dir"] = sc.out_dir
        if isinstance(sc.config, SelfSimilarParams):
            for k in _SS_KEYS:
                sec["lambda" if k == "lam" else k] = repr(float(getattr(sc.config, k)))
        else:
            default = RunConfig()
            for k in _RUN_TYPES:
                if k == "ic_params":
                    continue
                v = getattr(sc.config, k)
                if v != getattr(default, k):
                    sec["lambda" if k == "lam" else k] = _format_value(v)
            for k, v in sc.config.ic_params.items():
                sec[f"ic.{k}"] = repr(float(v))
        for k, v in sc.expect.items():
            sec[f"expect.{k}"] = repr(float(v))
        cp[sc.name] = sec
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def _write_profile(path, grid: Grid1D, f, t):
    rows = np.column_stack([grid.nodes, f])
    np.savetxt(path, rows, fmt="%.17g", header=f"t={t:.17g} Nv={len(grid)}\nLv={grid.half_length:.17g}",
               comments="# ")


def _json_safe(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, enum.Enum):
        return value.value
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    return value


def run_scenario(sc: Scenario, out_dir=None, stride: int | None = None, dry_run: bool = False) -> dict:
    """Run one scenario and write its artefacts.

    Writes ``history.csv``, snapshots every ``stride`` steps (0 disables
    them) and ``summary.json`` into ``out_dir/<name>``. With ``dry_run`` the
    parsed configuration is returned without computing anything.
    """
    summary = {"name": sc.name, "mode": sc.mode.value}
    cfg = sc.config
    summary["config"] = (cfg.to_dict() if isinstance(cfg, RunConfig)
                         else {k: getattr(cfg, k) for k in _SS_KEYS})
    if dry_run:
        summary["dry_run"] = True
        return _json_safe(summary)
    base = Path(out_dir or sc.out_dir or "runs") / sc.name
    base.mkdir(parents=True, exist_ok=True)
    stride = sc.stride if stride is None else stride

    if sc.mode is Mode.SELF_SIMILAR:
        T = cfg.T
        times = np.linspace(0.0, 0.99 * T, 100)
        write_selfsimilar_csv(base / "selfsimilar.csv", cfg, times)
        summary.update(T=T, criticality=None, blew_up=False)
        if cfg.beta == 0:
            summary["criticality"] = classify_threshold(cfg.lam, cfg.rho0, T).value
            if abs(cfg.criticality_number - 2) > 1e-9:
                starts = [(-0.05, 0.5), (-0.05, 1.0), (0.05, -0.5)]
                write_characteristics_csv(base / "characteristics.csv", cfg, starts, times)
            rho, m, b, isa = closed_form(cfg, times[-1])
            summary["final"] = {"t": times[-1], "rho": rho, "m": m, "b": b, "inv_sqrt_a": isa}
    else:
        if sc.mode is Mode.HOMOGENEOUS:
            def on_step(step, t, grid, f):
                if stride and step % stride == 0:
                    _write_profile(base / f"profile_{step:06d}.txt", grid, f, t)
            history, report = run_homogeneous(cfg, on_step=on_step)
        else:
            def on_step(step, t, fld):
                if stride and step % stride == 0:
                    write_snapshot(base / f"snapshot_{step:06d}.txt", fld, t)
            history, report = run_inhomogeneous(cfg, on_step=on_step)
        write_history(base / "history.csv", history)
        last = history[-1]
        summary.update(
            T_b=report.T_b, B_x=report.B_x, B_v=report.B_v, trigger=report.trigger.value,
            blew_up=report.trigger is not Trigger.HORIZON, steps=len(history) - 1,
            eps_v=cfg.eps_v, eps_x=cfg.eps_x, eps_t=cfg.eps_t, dt0=cfg.dt0,
            final={k: last[k] for k in ("mass", "momentum", "moment2", "entropy", "min_dx",
                                        "min_dv", "max_f")},
        )
    if "T_b" in sc.expect:
        got = summary.get("T_b", summary.get("T"))
        tol = sc.expect.get("tol", 0.0)
        summary["expect"] = dict(sc.expect)
        summary["acceptance"] = bool(abs(got - sc.expect["T_b"]) <= tol + 1e-9)
    summary = _json_safe(summary)
    with (base / "summary.json").open("w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    return summary
