"""H^s against the hydrodynamic M^s norm along u = sqrt(m)(1 + a e^{ix})."""
from dataclasses import dataclass

import numpy as np

from qhdcascade.errors import HypothesisViolated
from qhdcascade.hydro import equivalence_report, perturbed_plane_wave


@dataclass
class Config:
    m: float = 1.0
    s: float = 2.0
    eps_list: tuple = (1.0, 0.5, 0.25)
    amps: tuple = tuple(np.round(np.linspace(0.0, 0.3, 7), 3))
    vacuum: tuple = (0.5, 0.6, 0.8, 0.9, 0.95, 0.98, 0.99)


cfg = Config()
for eps in cfg.eps_list:
    r = [equivalence_report(perturbed_plane_wave(cfg.m, a), cfg.m, cfg.s, eps).ratio for a in cfg.amps]
    print(f"eps={eps}: " + " ".join(f"{x:.3f}" for x in r))

for a in cfg.vacuum:
    u = perturbed_plane_wave(cfg.m, a)
    try:
        equivalence_report(u, cfg.m, cfg.s)
        flag = "inside"
    except HypothesisViolated as e:
        flag = f"outside by {-e.slack:.2f}"
    rep = equivalence_report(u, cfg.m, cfg.s, check=False, M=1025)
    print(f"a={a}: H/M {rep.ratio:.4f}  min|u| {rep.min_abs:.3f}  ({flag})")
