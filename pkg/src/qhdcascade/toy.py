"""The finite toy model of generation amplitudes and its cascade orbit.

Gauged variant:  dB_i/dtau = -i |B_i|^2 B_i + 2 i conj(B_i) (B_{i-1}^2 + B_{i+1}^2),
with B_0 = B_{N+1} = 0.  The raw variant adds i * rate * M * b_i, M = sum |b_i|^2,
and is conjugated to the gauged one by B = exp(-i rate M tau) b.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import minimize_scalar

from .errors import SearchFailed, StepFailure


def toy_rhs(B: np.ndarray, rate: float = 0.0) -> np.ndarray:
    """Right-hand side; rate = 0 is the gauged variant."""
    B = np.asarray(B, dtype=np.complex128)
    pad = np.zeros(len(B) + 2, dtype=np.complex128)
    pad[1:-1] = B
    nb = pad[:-2] ** 2 + pad[2:] ** 2
    out = -1j * np.abs(B) ** 2 * B + 2j * np.conj(B) * nb
    if rate:
        out = out + 1j * rate * np.sum(np.abs(B) ** 2) * B
    return out


def toy_hamiltonian(B) -> float:
    """h(B) = sum 1/2 |B_i|^4 - (conj(B_i)^2 B_{i+1}^2 + c.c.); dB/dtau = -i dh/d conj(B)."""
    B = np.asarray(B, dtype=np.complex128)
    cross = np.conj(B[:-1]) ** 2 * B[1:] ** 2
    return float(0.5 * np.sum(np.abs(B) ** 4) - 2.0 * np.sum(cross.real))


def mass(B) -> float:
    return float(np.sum(np.abs(np.asarray(B)) ** 2))


@dataclass
class Trajectory:
    t: np.ndarray
    B: np.ndarray                  # (len(t), N)
    rate: float = 0.0
    stats: dict = field(default_factory=dict)

    def fractions(self) -> np.ndarray:
        p = np.abs(self.B) ** 2
        return p / p.sum(axis=1, keepdims=True)

    def at(self, t) -> np.ndarray:
        """Linear interpolation of the complex samples (dense output is used when available)."""
        if "sol" in self.stats:
            return self.stats["sol"](t).T
        t = np.atleast_1d(t)
        re = np.stack([np.interp(t, self.t, self.B[:, i].real) for i in range(self.B.shape[1])], 1)
        im = np.stack([np.interp(t, self.t, self.B[:, i].imag) for i in range(self.B.shape[1])], 1)
        return re + 1j * im

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        N = self.B.shape[1]
        w.writerow(["t"] + [f"b{i + 1}_sq" for i in range(N)])
        for tt, row in zip(self.t, np.abs(self.B) ** 2):
            w.writerow([repr(float(tt))] + [repr(float(x)) for x in row])
        return buf.getvalue()


def integrate_toy(b0, T: float, tol: float = 1e-12, rate: float = 0.0, t_eval=None,
                  dense: bool = False, method: str = "DOP853") -> Trajectory:
    """Adaptive integration of either variant on [0, T] (T may be negative)."""
    b0 = np.asarray(b0, dtype=np.complex128)
    N = len(b0)

    def f(_, y):
        B = y[:N] + 1j * y[N:]
        d = toy_rhs(B, rate)
        return np.concatenate([d.real, d.imag])

    y0 = np.concatenate([b0.real, b0.imag])
    sol = solve_ivp(f, (0.0, T), y0, method=method, rtol=tol, atol=tol * max(1.0, np.abs(b0).max()),
                    t_eval=t_eval, dense_output=dense)
    if not sol.success:
        raise StepFailure(sol.message)
    B = (sol.y[:N] + 1j * sol.y[N:]).T
    m = np.sum(np.abs(B) ** 2, axis=1)
    stats = {"mass_drift": float(np.max(np.abs(m - m[0])) / max(m[0], 1e-300)), "nfev": int(sol.nfev)}
    if rate == 0.0:
        h = np.array([toy_hamiltonian(x) for x in B])
        stats["energy_drift"] = float(np.max(np.abs(h - h[0])) / max(abs(h[0]), 1e-300))
    if dense:
        s = sol.sol
        stats["sol"] = lambda t: (lambda y: y[:N] + 1j * y[N:])(s(t))
    return Trajectory(sol.t, B, rate, stats)


def gauge_map(b, tau, rate: float, direction: str = "to_gauged"):
    """B = exp(-i rate M tau) b (to_gauged) or its inverse (to_raw); tau may be an array of sample times."""
    b = np.asarray(b, dtype=np.complex128)
    M = np.sum(np.abs(b) ** 2, axis=-1, keepdims=True)
    tau = np.asarray(tau, dtype=np.float64)
    if b.ndim == 2:
        tau = tau.reshape(-1, 1)
    sign = -1.0 if direction == "to_gauged" else 1.0
    if direction not in ("to_gauged", "to_raw"):
        raise ValueError(direction)
    return np.exp(sign * 1j * rate * M * tau) * b


def scale_orbit(traj: Trajectory, lam: float) -> Trajectory:
    """b(tau) -> lam^-1 b(lam^-2 tau), sampled at the stretched times lam^2 t."""
    return Trajectory(traj.t * lam**2, traj.B / lam, traj.rate, {"scaled_by": lam})


def residual(traj: Trajectory) -> float:
    """Relative residual of the equation on the samples (fourth-order central differences)."""
    t, B = traj.t, traj.B
    if len(t) < 5 or not np.allclose(np.diff(t), t[1] - t[0], rtol=1e-9):
        raise ValueError("need at least five uniform samples")
    h = t[1] - t[0]
    d = (-B[4:] + 8 * B[3:-1] - 8 * B[1:-3] + B[:-4]) / (12 * h)
    f = np.array([toy_rhs(x, traj.rate) for x in B[2:-2]])
    return float(np.max(np.abs(d - f)) / max(np.max(np.abs(f)), 1e-300))


# -- cascade orbit ------------------------------------------------------------------

@dataclass
class CascadeResult:
    N: int
    nu: float
    source: int
    target: int
    target_fraction: float
    T0: float                 # first time the target generation holds target_fraction of the mass
    peak_fraction: float
    t_peak: float
    params: dict
    trajectory: Trajectory = field(repr=False)

    def to_json(self) -> str:
        return json.dumps({"N": self.N, "nu": self.nu, "source": self.source, "target": self.target,
                           "target_fraction": self.target_fraction, "T0": self.T0,
                           "peak_fraction": self.peak_fraction, "t_peak": self.t_peak,
                           "params": self.params})


def cascade_initial(N: int, nu: float, phase: float, source: int = 3, exponents=None, phases=None):
    """Unit-mass data concentrated on generation ``source``.

    The forward neighbour gets amplitude nu at relative phase ``phase``
    (pi/3 is the unstable direction of the linearised two-generation flow);
    every other generation gets nu**exponent (default 2) so the cascade
    leaves in one direction.
    """
    b = np.zeros(N, dtype=np.complex128)
    exponents = exponents or {}
    phases = phases or {}
    for j in range(1, N + 1):
        if j == source:
            continue
        if j == source + 1:
            b[j - 1] = nu * np.exp(1j * phase)
        else:
            b[j - 1] = nu ** exponents.get(j, 2.0) * np.exp(1j * phases.get(j, math.pi / 3))
    rest = np.sum(np.abs(b) ** 2)
    if rest >= 1:
        raise ValueError("perturbation exceeds the unit mass")
    b[source - 1] = math.sqrt(1.0 - rest)
    return b


def _transfer(N, nu, phase, source, target, T, tol, exponents, frac_target):
    b0 = cascade_initial(N, nu, phase, source, exponents)
    tr = integrate_toy(b0, T, tol, dense=True)
    ts = np.linspace(0.0, T, 4001)
    fr = np.abs(tr.stats["sol"](ts)) ** 2
    fr = fr[target - 1] / fr.sum(axis=0)
    k = int(np.argmax(fr))
    hit = np.nonzero(fr >= frac_target)[0]
    T0 = math.nan
    if len(hit):
        i = hit[0]
        # refine the crossing on the dense output
        lo, hi = (ts[i - 1], ts[i]) if i > 0 else (0.0, ts[0])
        g = lambda t: (lambda p: p[target - 1] / p.sum())(np.abs(tr.stats["sol"](t)) ** 2) - frac_target
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if g(mid) >= 0:
                hi = mid
            else:
                lo = mid
        T0 = hi
    return fr[k], ts[k], T0, tr


def cascade_search(N: int = 5, nu: float = 1e-3, target_fraction: float = 0.7, source: int = 3,
                   target: int | None = None, T: float | None = None, tol: float = 1e-12,
                   exponents=None, phase0: float = math.pi / 3) -> CascadeResult:
    """Shoot on the phase of the forward neighbour to maximise the peak transfer."""
    if N < 5:
        raise ValueError("need N >= 5")
    target = N - 1 if target is None else target
    if T is None:
        T = 4.0 * (target - source) * math.log(1.0 / nu) + 20.0 if nu > 0 else 20.0
    if nu == 0.0:
        fp, tp, T0, tr = _transfer(N, 0.0, phase0, source, target, T, tol, exponents, target_fraction)
        raise SearchFailed(f"no transfer from the invariant circle (peak {fp:.3g})", best=fp)
    obj = lambda ph: -_transfer(N, nu, ph, source, target, T, tol, exponents, target_fraction)[0]
    best_phase, best_val = phase0, obj(phase0)
    if -best_val < max(target_fraction, 0.95):
        res = minimize_scalar(obj, bounds=(phase0 - 0.5, phase0 + 0.5), method="bounded",
                              options={"xatol": 1e-6})
        if res.fun < best_val:
            best_phase, best_val = float(res.x), float(res.fun)
    fp, tp, T0, tr = _transfer(N, nu, best_phase, source, target, T, tol, exponents, target_fraction)
    if fp < target_fraction or math.isnan(T0):
        raise SearchFailed(f"peak fraction {fp:.4f} below target {target_fraction}", best=fp)
    params = {"phase": best_phase, "T": T, "tol": tol, "exponents": exponents or "default 2"}
    return CascadeResult(N, nu, source, target, target_fraction, T0, fp, tp, params, tr)


def transfer_time_slope_ratio(times: dict) -> float:
    """(T0(nu2) - T0(nu1)) / (T0(nu3) - T0(nu2)) for nu1 > nu2 > nu3 equally spaced in log."""
    nus = sorted(times, reverse=True)
    a, b, c = (times[n] for n in nus[:3])
    return (b - a) / (c - b)
