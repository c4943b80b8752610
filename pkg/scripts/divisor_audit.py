"""How divisors and normal-form generators scale with the dilation q on a fixed base set."""
from dataclasses import dataclass

from qhdcascade import normalform as nf
from qhdcascade.lambdaset import build_lambda
from qhdcascade.spectra import verify_small_divisors


@dataclass
class Config:
    N: int = 3
    G: int = 8
    seed: int = 0
    qs: tuple = (8, 16, 32, 64)
    m: float = 1.0
    eps: float = 1.0


cfg = Config()
base = build_lambda(cfg.N, cfg.G, seed=cfg.seed)

print(f"{'q':>4} {'min3/q^2':>10} {'min4/q^2':>10} {'family max':>12} {'K':>10} {'|F3|':>10} {'|G4|':>10}")
prev = None
for q in cfg.qs:
    lam = base.scaled(q)
    rep = verify_small_divisors(lam, cfg.m, cfg.eps, keep_rows=False)
    f3 = nf.build_generator_F3(lam, cfg.m, cfg.eps).sup_norm()
    g4 = nf.build_generator_G4(lam, cfg.m, cfg.eps).sup_norm()
    print(f"{q:4d} {rep.kappa3:10.2f} {rep.kappa4:10.2f} {rep.family_max:12.3e} "
          f"{rep.family_max * q * q:10.3e} {f3:10.3e} {g4:10.3e}")
    if prev:
        print(f"     shrink: family {prev[0] / rep.family_max:.2f}, F3 {prev[1] / f3:.2f}, G4 {prev[2] / g4:.2f}")
    prev = (rep.family_max, f3, g4)
# family divisors reach the double-precision floor of omega differences near q = 64
