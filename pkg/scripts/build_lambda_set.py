"""Build a frequency set, verify P1-P7 and write it to JSON."""
import time
from dataclasses import dataclass
from pathlib import Path

from qhdcascade.lambdaset import build_lambda, verify_lambda, weight_ratio


@dataclass
class Config:
    N: int = 5
    G: int = 8
    seed: int = 0
    radius: int = 300
    grow: bool = False
    ratio_target: tuple | None = None     # (source, target, s, wanted ratio), used with grow
    out: str = "runs/lambda_N5.json"


cfg = Config()

t = time.time()
lam = build_lambda(cfg.N, cfg.G, seed=cfg.seed, radius=cfg.radius, grow=cfg.grow,
                   ratio_target=cfg.ratio_target)
rep = verify_lambda(lam)
print(f"built N={lam.N} G={lam.G} in {time.time() - t:.1f}s, radius {lam.radius()}")
for p, ok in rep.passed.items():
    print(f"  {p}: {'ok' if ok else 'FAILS'}" + ("" if ok else f"  witness {rep.witness[p]}"))
for i in range(1, lam.N):
    print(f"  W{i + 1}/W1 at s=2: {weight_ratio(lam, 2.0, 1, i + 1):.3f}")

Path(cfg.out).parent.mkdir(parents=True, exist_ok=True)
Path(cfg.out).write_text(lam.to_json() + "\n")
print("wrote", cfg.out)
