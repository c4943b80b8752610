"""Shooting for the toy cascade at several nu; transfer times against log(1/nu)."""
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from qhdcascade import toy


@dataclass
class Config:
    N: int = 5
    nus: tuple = (1e-2, 1e-3, 1e-4, 1e-5)
    source: int = 3
    target: int = 4
    fraction: float = 0.7
    out: str = "runs/toy"


cfg = Config()
Path(cfg.out).mkdir(parents=True, exist_ok=True)

T0 = {}
for nu in cfg.nus:
    res = toy.cascade_search(cfg.N, nu, cfg.fraction, cfg.source, cfg.target)
    T0[nu] = res.T0
    st = res.trajectory.stats
    print(f"nu={nu:.0e}  T0={res.T0:7.3f}  peak={res.peak_fraction:.4f} at t={res.t_peak:.3f}  "
          f"phase={res.params['phase']:.4f}  drift mass {st['mass_drift']:.1e} energy {st['energy_drift']:.1e}")
    Path(cfg.out, f"trajectory_nu{nu:.0e}.csv").write_text(res.trajectory.to_csv())

x = np.array([math.log(1 / n) for n in T0])
y = np.array(list(T0.values()))
slope, icept = np.polyfit(x, y, 1)
print(f"T0 ~ {slope:.3f} log(1/nu) + {icept:.3f}; successive slope ratio "
      f"{toy.transfer_time_slope_ratio(dict(list(T0.items())[:3])):.3f}")
