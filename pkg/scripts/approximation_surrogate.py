"""Deviation between the full equation and the embedded toy orbit.

The desk sweep (N=5, G=8, q up to 32) is far too expensive for a split-step
run, so the plan is printed and a two-point-per-generation set stands in.
"""
import math
import time
from dataclasses import dataclass

from qhdcascade import nls, toy
from qhdcascade.experiments import ApproxConfig, approximation_plan
from qhdcascade.lambdaset import LambdaSet


@dataclass
class Config:
    qs: tuple = (1, 2, 4)
    lams: tuple = (10.0, 20.0)
    horizon: float = 0.5
    nu: float = 1e-2
    samples: int = 10


cfg = Config()

for p in approximation_plan(ApproxConfig()):
    print(f"full sweep q={p['q']} lam={p['lam']:g}: {p['steps']:.2e} steps on {p['M']}^2 "
          f"({p['fft_points']:.1e} grid updates)")

small = LambdaSet((((2, 1), (-1, 2)), ((3, -1), (1, 3)), ((-2, 3), (3, 2)),
                   ((-3, -1), (1, -3)), ((2, -3), (-3, -2))), (), 1, {})
b0 = toy.cascade_initial(5, cfg.nu, math.pi / 3, 1)
sol = toy.integrate_toy(b0, 30.0, 1e-12, dense=True).stats["sol"]
for L in cfg.lams:
    for q in cfg.qs:
        t = time.time()
        d = nls.deviation_run(small.scaled(q), sol, L, cfg.horizon, cfg.samples)
        print(f"lam={L:g} q={q}: sup deviation {d.sup:.4e} (l1 of data {d.initial_l1:.3f}, "
              f"{d.steps} steps, {time.time() - t:.1f}s)")
