"""Simulation parameters shared by every module."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace

from .errors import ConfigError


@dataclass(frozen=True)
class SimConfig:
    m: float = 1.0          # plane-wave mass level
    eps: float = 1.0        # semiclassical parameter, 0 < eps <= 1
    s: float = 2.0          # Sobolev index, > 1
    q: int = 8              # lattice dilation
    N: int = 5              # number of generations
    G: int = 8              # members per generation (desk scale)
    lam: float = 160.0      # toy-orbit amplitude scaling, l1 of the embedded data ~ G / lam
    cutoff: int = 0         # spectral truncation on the coarse lattice, 0 = automatic
    dt: float = 1e-3
    tol: float = 1e-11
    seed: int = 0
    c0: float = 0.1         # smallness threshold for delta

    def __post_init__(self):
        self.validate()

    def validate(self):
        def bad(name, why):
            raise ConfigError(f"{name}={getattr(self, name)!r}: {why}")

        for name in ("m", "eps", "s", "lam", "dt", "tol", "c0"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
                bad(name, "must be a finite real")
        for name in ("q", "N", "G", "cutoff", "seed"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool):
                bad(name, "must be an integer")
        if self.m <= 0:
            bad("m", "must be > 0")
        if not 0 < self.eps <= 1:
            bad("eps", "must lie in (0, 1]")
        if self.s <= 1:
            bad("s", "must be > 1")
        if self.q < 1:
            bad("q", "must be >= 1")
        if self.N < 3:
            bad("N", "must be >= 3")
        if self.G < 1:
            bad("G", "must be >= 1")
        if self.lam <= 0:
            bad("lam", "must be > 0")
        if self.cutoff < 0:
            bad("cutoff", "must be >= 0")
        if self.dt <= 0 or self.tol <= 0 or self.c0 <= 0:
            bad("dt", "dt, tol and c0 must be > 0")
        if self.seed < 0:
            bad("seed", "must be >= 0")

    @property
    def delta(self) -> float:
        """Smallness parameter 1/(eps q)."""
        return 1.0 / (self.eps * self.q)

    @property
    def delta_ok(self) -> bool:
        return self.delta < self.c0

    def with_(self, **kw) -> "SimConfig":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["delta"] = self.delta
        return d

    @classmethod
    def field_types(cls) -> dict:
        return {f.name: f.type for f in fields(cls)}
