"""End-to-end growth run: cascade orbit embedded on a grown set, evolved, pulled back."""
from dataclasses import dataclass

from qhdcascade.experiments import GrowthConfig, growth_lambda, growth_run
from qhdcascade.lambdaset import verify_lambda


@dataclass
class Config:
    lams: tuple = (160.0, 320.0, 640.0)
    weight_target: float = 5.0


cfg = Config()
gc = GrowthConfig(weight_target=cfg.weight_target)
lam = growth_lambda(gc)
print(f"set radius {lam.radius()}, certificate {verify_lambda(lam).all_pass}")
for L in cfg.lams:
    gc.lam = L
    rep = growth_run(gc, lam)
    print(f"lam={L:g}  W{gc.target}/W{gc.source} {rep.weight_ratio:.2f}  H^2 ratio {rep.hs_ratio:.3f}  "
          f"M^2 ratio {rep.ms_ratio:.3f} (current variant {rep.ms_ratio_current:.3f})  "
          f"t_final {rep.t_final:.3g}  l1(0) {rep.l1_initial:.3g}  orbit err {rep.orbit_error:.1e}")
# the ratio is bounded by the weight ratio of the set: larger growth needs more generations
