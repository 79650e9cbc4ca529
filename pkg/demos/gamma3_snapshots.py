"""Short gamma = 3 phase-space run that writes snapshots every few steps.

Usage: python3 demos/gamma3_snapshots.py [out_dir] [T_final]
"""

import sys
from pathlib import Path

from granular_jko import RunConfig, run_inhomogeneous
from granular_jko.driver import write_history
from granular_jko.grid import write_snapshot


def main(out_dir="gamma3_demo", T_final="1.0"):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = RunConfig(gamma=3.0, lam=4.0, initial_condition="f0", bump_mode="two_bump", N_x=41, N_v=41,
                    L_x=4.0, L_v=4.0, dt0=0.05, delta0=0.02, T_final=float(T_final),
                    eps_x=1e-3 / 8, eps_v=1e-3 / 8)

    def on_step(step, t, fld):
        if step % 5 == 0:
            write_snapshot(out / f"snapshot_{step:04d}.txt", fld, t)

    history, report = run_inhomogeneous(cfg, on_step=on_step)
    write_history(out / "history.csv", history)
    last = history[-1]
    print(f"t={report.T_b:.2f} trigger={report.trigger.value} max f={last['max_f']:.3f} "
          f"mass drift={last['mass'] / history[0]['mass'] - 1:.1e}")


if __name__ == "__main__":
    main(*sys.argv[1:])
