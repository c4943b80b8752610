"""Madelung variables of a non-vanishing wave function and the quantum Euler system.

For i eps u_t = -(eps^2/2) Lap u + |u|^2 u and u = sqrt(rho) e^{i theta}:

    rho_t + div(rho v) = 0
    (rho v)_t + div(rho v (x) v) + grad p = eps^2 div(Hess(rho)/4 - grad sqrt(rho) (x) grad sqrt(rho))

with v = eps grad theta, p = rho^2 / 2.  Velocities come from the current
Im(conj(u) grad u), never from an unwrapped phase.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import HypothesisViolated, VacuumDetected
from .fields import FourierField2D, grid_hs_norm, hs_norm

TWO_PI2 = (2 * math.pi) ** 2


def _odd_grid(K: int, factor: int = 4) -> int:
    M = max(factor * K + 1, 33)
    return M + 1 - (M % 2)


class Spectral:
    """Spectral derivatives on an M x M grid of the torus (wavenumbers scaled by the stride)."""

    def __init__(self, M: int, stride: int = 1):
        k = np.fft.fftfreq(M, 1.0 / M).round() * stride
        if M % 2 == 0:
            k[M // 2] = 0.0            # drop the Nyquist mode from odd derivatives
        self.M, self.stride = M, stride
        self.kx, self.ky = np.meshgrid(k, k, indexing="ij")

    def grad(self, f):
        F = np.fft.fft2(f)
        gx = np.fft.ifft2(1j * self.kx * F)
        gy = np.fft.ifft2(1j * self.ky * F)
        if np.isrealobj(f):
            gx, gy = gx.real, gy.real
        return np.stack([gx, gy])

    def div(self, V):
        out = self.grad(V[0])[0] + self.grad(V[1])[1]
        return out

    def lap(self, f):
        F = np.fft.fft2(f)
        out = np.fft.ifft2(-(self.kx**2 + self.ky**2) * F)
        return out.real if np.isrealobj(f) else out

    def curl(self, V):
        return self.grad(V[1])[0] - self.grad(V[0])[1]


def _grid_of(u, M=None):
    """(grid values, stride) of a field or a raw grid."""
    if isinstance(u, FourierField2D):
        M = _odd_grid(u.K) if M is None else M
        return u.to_physical(M), u.stride
    return np.asarray(u, dtype=np.complex128), 1


@dataclass
class HydroState:
    rho: np.ndarray
    sqrt_rho: np.ndarray
    v: np.ndarray                 # (2, M, M)
    current: np.ndarray           # sqrt(rho) v
    eps: float
    stride: int = 1

    @property
    def M(self) -> int:
        return self.rho.shape[0]

    def curl(self) -> np.ndarray:
        return Spectral(self.M, self.stride).curl(self.v)

    def to_json(self) -> str:
        return json.dumps({"eps": self.eps, "stride": self.stride, "rho": self.rho.tolist(),
                           "v": self.v.tolist()})

    @classmethod
    def from_json(cls, text: str):
        d = json.loads(text)
        rho = np.asarray(d["rho"], float)
        v = np.asarray(d["v"], float)
        sr = np.sqrt(rho)
        return cls(rho, sr, v, sr * v, d["eps"], d["stride"])


def madelung(u, eps: float = 1.0, M: int | None = None, floor: float | None = None,
             m: float | None = None) -> HydroState:
    """rho = |u|^2, v = eps Im(conj(u) grad u) / rho, current = eps Im(conj(phi) grad u), phi = u/|u|.

    ``floor`` is an absolute bound on |u|; by default 1e-6 sqrt(m), with m the
    mean density when not given.
    """
    g, stride = _grid_of(u, M)
    sp = Spectral(g.shape[0], stride)
    rho = np.abs(g) ** 2
    if floor is None:
        m = float(rho.mean()) if m is None else m
        floor = 1e-6 * math.sqrt(m)
    amin = float(np.sqrt(rho.min()))
    if amin < floor:
        raise VacuumDetected(f"min |u| = {amin:.3g} below floor {floor:.3g}")
    du = sp.grad(g)
    J = np.imag(np.conj(g)[None] * du)
    v = eps * J / rho[None]
    sr = np.sqrt(rho)
    lam = eps * np.imag((np.conj(g) / sr)[None] * du)
    return HydroState(rho, sr, v, lam, eps, stride)


def quantum_term(h: HydroState, form: str = "divergence") -> np.ndarray:
    """Quantum force in the momentum equation, in either of its two equivalent forms.

    potential:  (eps^2/2) rho grad(Lap sqrt(rho) / sqrt(rho))
    divergence: eps^2 div(Hess(rho)/4 - grad sqrt(rho) (x) grad sqrt(rho))
    """
    sp = Spectral(h.M, h.stride)
    if form == "potential":
        bohm = sp.lap(h.sqrt_rho) / h.sqrt_rho
        return 0.5 * h.eps**2 * h.rho[None] * sp.grad(bohm)
    if form == "divergence":
        g = sp.grad(h.sqrt_rho)
        out = 0.25 * sp.grad(sp.lap(h.rho))          # div Hess = grad Lap
        for i in range(2):
            out[i] -= sp.div(np.stack([g[i] * g[0], g[i] * g[1]]))
        return h.eps**2 * out
    raise ValueError(form)


def _l2(r) -> float:
    return float(np.sqrt(np.mean(np.abs(r) ** 2) * (r.shape[0] if r.ndim == 3 else 1)))


def qhd_residual(samples, dt: float, eps: float = 1.0, M: int | None = None):
    """Max over interior samples of the L2 residuals (continuity, momentum).

    ``samples`` are fields (or grids) at uniform spacing dt; time derivatives
    use fourth-order centred differences, space derivatives are spectral.
    """
    if len(samples) < 5:
        raise ValueError("need at least five samples")
    hs = [madelung(u, eps, M) for u in samples]
    sp = Spectral(hs[0].M, hs[0].stride)
    rho = np.stack([h.rho for h in hs])
    mom = np.stack([h.rho[None] * h.v for h in hs])
    c4 = lambda a, i: (-a[i + 2] + 8 * a[i + 1] - 8 * a[i - 1] + a[i - 2]) / (12 * dt)
    rc, rm = 0.0, 0.0
    for i in range(2, len(hs) - 2):
        h = hs[i]
        cont = c4(rho, i) + sp.div(mom[i])
        flux = np.stack([sp.div(np.stack([mom[i][a] * h.v[0], mom[i][a] * h.v[1]])) for a in range(2)])
        press = h.rho[None] * sp.grad(h.rho)
        res = c4(mom, i) + flux + press - quantum_term(h, "divergence")
        rc = max(rc, _l2(cont))
        rm = max(rm, _l2(res))
    return rc, rm


def conserved_quantities(u, eps: float = 1.0, M: int | None = None):
    """(mass, energy, momentum) by quadrature on the grid.

    energy = 1/2 int eps |grad sqrt(rho)|^2 + rho |v|^2 / eps + rho^2 / eps, which is the
    Schrodinger energy int (eps^2/2)|grad u|^2 + |u|^4/2 divided by eps.
    """
    h = u if isinstance(u, HydroState) else madelung(u, eps, M)
    sp = Spectral(h.M, h.stride)
    g = sp.grad(h.sqrt_rho)
    mass = TWO_PI2 * float(h.rho.mean())
    dens = eps * np.sum(g**2, axis=0) + h.rho * np.sum(h.v**2, axis=0) / eps + h.rho**2 / eps
    energy = 0.5 * TWO_PI2 * float(dens.mean())
    momentum = TWO_PI2 * (h.rho[None] * h.v).reshape(2, -1).mean(axis=1)
    return mass, energy, momentum


# -- norm equivalence ----------------------------------------------------------------

def ms_norm(h: HydroState, s: float, variant: str = "rho-v") -> float:
    """||rho||_{H^s} + ||v||_{H^{s-1}}, or ||sqrt rho||_{H^s} + ||sqrt(rho) v||_{H^{s-1}}."""
    if variant == "rho-v":
        return grid_hs_norm(h.rho, s, h.stride) + grid_hs_norm(h.v, s - 1, h.stride)
    if variant == "sqrt-rho-current":
        return grid_hs_norm(h.sqrt_rho, s, h.stride) + grid_hs_norm(h.current, s - 1, h.stride)
    raise ValueError(variant)


def _sup_slack(g, m):
    """sqrt(m)/2 - min over phi of sup |u - sqrt(m) e^{i phi}|."""
    f = lambda ph: float(np.max(np.abs(g - math.sqrt(m) * np.exp(1j * ph))))
    phis = np.linspace(0, 2 * np.pi, 73)
    k = int(np.argmin([f(p) for p in phis]))
    res = minimize_scalar(f, bounds=(phis[max(k - 1, 0)], phis[min(k + 1, 72)]), method="bounded",
                          options={"xatol": 1e-10})
    return 0.5 * math.sqrt(m) - min(res.fun, f(phis[k]))


def _l1_slack(u: FourierField2D, m, delta):
    """delta - min over phi of ||u - sqrt(m) e^{i phi}||_{l1} <||u||_{H^1}>; the minimiser is arg u_0."""
    c = u.coeffs.copy()
    K = u.K
    dist = float(np.sum(np.abs(c))) - abs(c[K, K]) + abs(abs(c[K, K]) - math.sqrt(m))
    return delta - dist * math.sqrt(1.0 + hs_norm(u, 1.0) ** 2)


@dataclass
class EquivalenceReport:
    s: float
    m: float
    eps: float
    variant: str
    hs: float
    ms: float
    ratio: float          # ||u||_{H^s} / ||.||_{M^s}
    inverse: float
    slack: float
    min_abs: float

    def to_json(self) -> str:
        return json.dumps({"s": self.s, "m": self.m, "eps": self.eps, "variant": self.variant,
                           "ratios": {"hs_over_ms": self.ratio, "ms_over_hs": self.inverse},
                           "hs": self.hs, "ms": self.ms, "slack": self.slack, "min_abs": self.min_abs})


def equivalence_report(u: FourierField2D, m: float = 1.0, s: float = 2.0, eps: float = 1.0,
                       variant: str = "rho-v", M_star: float | None = None, delta: float = 0.1,
                       check: bool = True, M: int | None = None) -> EquivalenceReport:
    """Measured ratios between ||u||_{H^s} and the hydrodynamic M^s norm.

    The hypothesis is the sup-distance to the circle sqrt(m) e^{i phi} for
    rho-v and the l1-times-H^1 smallness for sqrt-rho-current.  With check
    set, a negative slack raises HypothesisViolated, and a ratio outside
    [1/M_star, M_star/eps] raises too when M_star is given.
    """
    g = u.to_physical(_odd_grid(u.K) if M is None else M)
    slack = _sup_slack(g, m) if variant == "rho-v" else _l1_slack(u, m, delta)
    if check and slack < 0:
        raise HypothesisViolated(f"hypothesis fails by {-slack:.4g}", slack=slack)
    h = madelung(u, eps, M, floor=0.0)
    a = hs_norm(u, s)
    b = ms_norm(h, s, variant)
    rep = EquivalenceReport(s, m, eps, variant, a, b, a / b, b / a, slack, float(h.sqrt_rho.min()))
    if check and M_star is not None and not (1.0 / M_star <= rep.ratio <= M_star / eps):
        raise HypothesisViolated(f"ratio {rep.ratio:.4g} outside [1/{M_star}, {M_star}/eps]", slack=slack)
    return rep


def perturbed_plane_wave(m: float, a: float, K: int = 1, mode=(1, 0)) -> FourierField2D:
    """sqrt(m) (1 + a e^{i k.x})."""
    return FourierField2D.from_modes({(0, 0): math.sqrt(m), tuple(mode): a * math.sqrt(m)}, K)
