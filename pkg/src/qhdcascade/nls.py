"""Cubic NLS on the 2-torus in every coordinate frame.

Conventions: psi(x) = sum psi_n e^{i n.x}; norms are sequence norms, so the
mass level 4 pi^2 m of the L2 norm reads sum |psi_n|^2 = m.

  rescaled   i psi_t = -Lap psi + 2 eps^-2 |psi|^2 psi
  original   i eps u_t = -(eps^2/2) Lap u + |u|^2 u    (time s = eps t / 2 maps it to rescaled)

Fields on the dilated lattice q Z^2 are simulated on the coarse lattice with
the Laplacian scaled by q^2, so invariance of the sublattice is structural.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import (CutoffOverflow, ExperimentFailed, MassMismatch, StepFailure,
                     VacuumAtZeroMode, VacuumDetected)
from .fields import FourierField2D, l2_norm, wiener_norm
from .spectra import MonomialHamiltonian, diag_coeffs, omega

EQUATIONS = ("rescaled", "original")
FOUR_PI2 = 4 * math.pi**2


# -- grids ------------------------------------------------------------------------

def sim_grid_size(K: int, pad: int = 2) -> int:
    """Odd grid (no Nyquist mode) with M >= 3 pad K + 1.

    pad = 1 is the bare dealiasing bound for one cubic product; the default
    leaves room for the spectrum to spread so that aliasing stays below
    round-off over a run.
    """
    M = 3 * pad * K + 1
    return M + 1 - (M % 2)


def wavenumbers(M: int, stride: int = 1):
    k = np.fft.fftfreq(M, 1.0 / M).round().astype(np.int64) * stride
    return np.meshgrid(k, k, indexing="ij")


def to_grid(f: FourierField2D, M: int) -> np.ndarray:
    if 2 * f.K + 1 > M:
        raise CutoffOverflow(f"field cutoff {f.K} does not fit a {M}-grid")
    A = np.zeros((M, M), complex)
    idx = np.arange(-f.K, f.K + 1) % M
    A[np.ix_(idx, idx)] = f.coeffs
    return A


def from_grid(A: np.ndarray, stride: int, frame: str, K: int | None = None) -> FourierField2D:
    M = A.shape[0]
    K = (M - 1) // 2 if K is None else K
    idx = np.arange(-K, K + 1) % M
    c = A[np.ix_(idx, idx)].copy()
    if frame in ("reduced-z", "diagonal-w", "rotating-r"):
        c[K, K] = 0
    return FourierField2D(c, stride, frame)


def _phys(A):
    M = A.shape[0]
    return np.fft.ifft2(A) * M * M


def _hat(g):
    M = g.shape[0]
    return np.fft.fft2(g) / (M * M)


# -- mode shift --------------------------------------------------------------------

def shift_mode(u: FourierField2D, k, t: float, tol: float = 0.0) -> FourierField2D:
    """psi_n = u_{n+k} exp(i(|k|^2 + 2 k.n) t); maps a plane wave at k to the zero mode.

    Coefficients at most tol * max|u_n| count as outside the support.
    """
    kx, ky = int(k[0]), int(k[1])
    q = u.stride
    if kx % q or ky % q:
        raise CutoffOverflow(f"shift {k} is off the lattice {q}Z^2")
    a, b = kx // q, ky // q
    K = u.K
    src = u.coeffs
    nz = np.argwhere(np.abs(src) > tol * np.abs(src).max(initial=0.0)) - K
    if len(nz):
        shifted = nz - np.array([a, b])
        if np.abs(shifted).max() > K:
            raise CutoffOverflow(f"shift by {k} moves support beyond cutoff {u.cutoff}")
    out = np.zeros_like(src)
    # psi_n at coarse index j takes u at j + (a, b)
    lo_x, hi_x = max(-K, -K - a), min(K, K - a)
    lo_y, hi_y = max(-K, -K - b), min(K, K - b)
    out[lo_x + K:hi_x + K + 1, lo_y + K:hi_y + K + 1] = \
        src[lo_x + a + K:hi_x + a + K + 1, lo_y + b + K:hi_y + b + K + 1]
    X, Y = u.lattice()
    phase = np.exp(1j * ((kx * kx + ky * ky) + 2 * (kx * X + ky * Y)) * t)
    return u.replace(coeffs=out * phase, frame="shifted-psi")


# -- split-step integrator -------------------------------------------------------------

def _coefficients(eps: float, equation: str):
    """(dispersion weight a, nonlinear weight g): i f_t = a |n|^2 f + g (|f|^2 f)."""
    if equation == "rescaled":
        return 1.0, 2.0 / eps**2
    if equation == "original":
        return eps / 2.0, 1.0 / eps
    raise ValueError(f"unknown equation {equation!r}")


class SplitStep:
    """Strang splitting: half linear, full pointwise nonlinear rotation, half linear."""

    def __init__(self, M: int, stride: int, dt: float, eps: float = 1.0, equation: str = "rescaled"):
        self.M, self.stride, self.dt, self.eps, self.equation = M, stride, dt, eps, equation
        a, self.g = _coefficients(eps, equation)
        NX, NY = wavenumbers(M, stride)
        self.n2 = (NX * NX + NY * NY).astype(np.float64)
        self.half = np.exp(-0.5j * a * self.n2 * dt)

    def __call__(self, A: np.ndarray) -> np.ndarray:
        A = A * self.half
        g = _phys(A)
        # transform only the increment g (e^{i phi} - 1): the round-off of the
        # inverse transform then cancels in the mass to first order
        ph = -self.g * self.dt * np.abs(g) ** 2
        s = np.sin(0.5 * ph)
        return (A + _hat(g * (-2.0 * s * s + 1j * np.sin(ph)))) * self.half


def step_splitstep(f: FourierField2D, dt: float, eps: float = 1.0, equation: str = "rescaled",
                   M: int | None = None) -> FourierField2D:
    """One Strang step; the result carries the whole grid spectrum, so pass a fixed M when iterating."""
    M = sim_grid_size(f.K) if M is None else M
    A = SplitStep(M, f.stride, dt, eps, equation)(to_grid(f, M))
    return from_grid(A, f.stride, f.frame)


def grid_mass(A) -> float:
    return float(np.sum(np.abs(A) ** 2))


def grid_momentum(A, stride: int = 1) -> np.ndarray:
    NX, NY = wavenumbers(A.shape[0], stride)
    p = np.abs(A) ** 2
    return np.array([np.sum(NX * p), np.sum(NY * p)], dtype=np.float64)


def grid_energy(A, stride: int = 1, eps: float = 1.0, equation: str = "rescaled") -> float:
    """Discrete Hamiltonian (4 pi^2 dropped): a sum |n|^2 |f_n|^2 + (g/2) mean |f|^4."""
    a, g = _coefficients(eps, equation)
    NX, NY = wavenumbers(A.shape[0], stride)
    kin = float(np.sum((NX * NX + NY * NY) * np.abs(A) ** 2))
    pot = float(np.mean(np.abs(_phys(A)) ** 4))
    return a * kin + 0.5 * g * pot


@dataclass
class InvariantLog:
    t: list = field(default_factory=list)
    mass: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    momentum: list = field(default_factory=list)

    def record(self, t, A, stride, eps, equation):
        if self.t and t <= self.t[-1]:
            raise ValueError("timestamps must increase")
        self.t.append(float(t))
        self.mass.append(grid_mass(A))
        self.energy.append(grid_energy(A, stride, eps, equation))
        self.momentum.append(grid_momentum(A, stride))

    def drift(self) -> dict:
        m = np.asarray(self.mass)
        e = np.asarray(self.energy)
        p = np.asarray(self.momentum)
        scale_p = max(np.abs(p).max(), 1e-300)
        return {"mass": float(np.max(np.abs(m - m[0])) / m[0]) if m[0] else 0.0,
                "energy": float(np.max(np.abs(e - e[0])) / max(abs(e[0]), 1e-300)),
                "momentum": float(np.max(np.abs(p - p[0])) / scale_p),
                "momentum_abs": float(np.max(np.abs(p - p[0])))}

    def to_csv(self) -> str:
        rows = ["t,mass,energy,px,py"]
        for t, m, e, p in zip(self.t, self.mass, self.energy, self.momentum):
            rows.append(f"{t!r},{m!r},{e!r},{p[0]!r},{p[1]!r}")
        return "\n".join(rows) + "\n"


def integrate_nls(f0: FourierField2D, T: float, dt: float, eps: float = 1.0,
                  equation: str = "rescaled", sample_every: int = 0, M: int | None = None):
    """Split-step run; returns (times, fields, log).  Fields are on the simulation grid."""
    if T <= 0 or dt <= 0:
        raise StepFailure("T and dt must be positive")
    M = sim_grid_size(f0.K) if M is None else M
    nsteps = int(round(T / dt))
    if abs(nsteps * dt - T) > 1e-9 * T:
        raise StepFailure(f"T={T} is not a multiple of dt={dt}")
    step = SplitStep(M, f0.stride, dt, eps, equation)
    A = to_grid(f0, M)
    log = InvariantLog()
    log.record(0.0, A, f0.stride, eps, equation)
    times, fields = [0.0], [from_grid(A, f0.stride, f0.frame)]
    every = sample_every or nsteps
    for i in range(1, nsteps + 1):
        A = step(A)
        if not np.all(np.isfinite(A[:1])):
            raise StepFailure(f"non-finite state at step {i}")
        if i % every == 0 or i == nsteps:
            t = i * dt
            log.record(t, A, f0.stride, eps, equation)
            times.append(t)
            fields.append(from_grid(A, f0.stride, f0.frame))
    return times, fields, log


def plane_wave(m: float, K: int, stride: int = 1, k=(0, 0)) -> FourierField2D:
    return FourierField2D.from_modes({tuple(k): math.sqrt(m)}, K, stride)


# -- plane-wave reduction ----------------------------------------------------------

@dataclass(frozen=True)
class ReducedState:
    z: FourierField2D
    theta: float
    m: float

    @property
    def alpha(self) -> float:
        return alpha_of(self.z, self.m)


def alpha_of(z: FourierField2D, m: float) -> float:
    r = m - l2_norm(z) ** 2
    if r <= 0:
        raise VacuumDetected(f"perturbation mass {l2_norm(z) ** 2:.6g} reaches the level m = {m}")
    return math.sqrt(r)


def planewave_reduce(psi: FourierField2D, m: float, tol: float = 1e-8) -> ReducedState:
    mass = l2_norm(psi) ** 2
    if abs(mass - m) > tol * max(m, 1.0):
        raise MassMismatch(f"mass {mass!r} differs from level {m!r}")
    p0 = psi[(0, 0)]
    if abs(p0) < 1e-6 * math.sqrt(m):
        raise VacuumAtZeroMode(f"|psi_0| = {abs(p0):.3g}")
    theta = math.atan2(p0.imag, p0.real)
    c = psi.coeffs * np.exp(-1j * theta)
    c = c.copy()
    c[psi.K, psi.K] = 0
    return ReducedState(FourierField2D(c, psi.stride, "reduced-z"), theta, m)


def planewave_reconstruct(state: ReducedState) -> FourierField2D:
    a = state.alpha
    c = state.z.coeffs.copy()
    c[state.z.K, state.z.K] = a
    return FourierField2D(c * np.exp(1j * state.theta), state.z.stride, "shifted-psi")


def _cubic_zero_and_full(Z: np.ndarray, alpha: float):
    """Coefficients of |zeta|^2 zeta with zeta = alpha + z (grid arrays, exact for M >= 3K+1)."""
    A = Z.copy()
    A[0, 0] = alpha
    g = _phys(A)
    return _hat(np.abs(g) ** 2 * g)


def theta_rhs(z: FourierField2D, m: float, eps: float = 1.0, M: int | None = None) -> float:
    """d theta/dt = -(2 eps^-2 / alpha) Re (|zeta|^2 zeta)_0, zeta = alpha + z."""
    M = sim_grid_size(z.K) if M is None else M
    a = alpha_of(z, m)
    N3 = _cubic_zero_and_full(to_grid(z, M), a)
    return -2.0 / eps**2 * N3[0, 0].real / a


def reduced_rhs_grid(Z: np.ndarray, m: float, eps: float, n2: np.ndarray):
    """(dz/dt, dtheta/dt) of the rescaled equation on the mass level."""
    a = math.sqrt(m - float(np.sum(np.abs(Z) ** 2)) + abs(Z[0, 0]) ** 2)
    N3 = _cubic_zero_and_full(Z, a)
    th = -2.0 / eps**2 * N3[0, 0].real / a
    dZ = -1j * (n2 + th) * Z - 2j / eps**2 * N3
    dZ[0, 0] = 0.0
    return dZ, th


# -- Hamiltonians in the reduced frame -----------------------------------------------

def nls_hamiltonian(psi: FourierField2D, eps: float = 1.0, M: int | None = None) -> float:
    """int |grad psi|^2 + eps^-2 int |psi|^4 for the rescaled equation."""
    M = 4 * psi.K + 1 if M is None else M
    A = to_grid(psi, M)
    NX, NY = wavenumbers(M, psi.stride)
    kin = float(np.sum((NX * NX + NY * NY) * np.abs(A) ** 2))
    pot = float(np.mean(np.abs(_phys(A)) ** 4))
    return FOUR_PI2 * (kin + pot / eps**2)


def reduced_hamiltonian(z: FourierField2D, m: float, eps: float = 1.0) -> float:
    """Expanded plane-wave Hamiltonian H2 + eps^-2 (H4 + alpha G3), up to the constant 4 pi^2 m^2 eps^-2.

    The quartic collects to the family sum, minus sum |z_n|^4, minus
    ||z||_{L2}^4 / (4 pi^2), minus ||z||_{L2}^2 int Re(z^2) / (2 pi^2).
    """
    M = 4 * z.K + 1
    Z = to_grid(z, M)
    NX, NY = wavenumbers(M, z.stride)
    n2 = (NX * NX + NY * NY).astype(float)
    S = float(np.sum(np.abs(Z) ** 2))                 # sequence mass, ||z||_{L2}^2 = 4 pi^2 S
    L2sq = FOUR_PI2 * S
    re_z2 = FOUR_PI2 * float(np.sum(Z * Z[(-np.arange(M)) % M][:, (-np.arange(M)) % M]).real)
    H2 = FOUR_PI2 * float(np.sum(n2 * np.abs(Z) ** 2)) + 2 * m / eps**2 * L2sq + 2 * m / eps**2 * re_z2
    g = _phys(Z)
    int_z4 = FOUR_PI2 * float(np.mean(np.abs(g) ** 4))
    # int |z|^4 = 8 pi^2 S^2 - 4 pi^2 sum|z_n|^4 + 4 pi^2 (family-type sum)
    fam = int_z4 / FOUR_PI2 - 2 * S * S + float(np.sum(np.abs(Z) ** 4))
    H4 = (-FOUR_PI2 * float(np.sum(np.abs(Z) ** 4)) + FOUR_PI2 * fam
          - L2sq**2 / FOUR_PI2 - L2sq * re_z2 / (2 * math.pi**2))
    alpha = math.sqrt(m - S)
    G3 = 2 * FOUR_PI2 * float(np.mean((g + np.conj(g)) * np.abs(g) ** 2).real)
    return H2 + (H4 + alpha * G3) / eps**2


def reduced_hamiltonian_direct(z: FourierField2D, m: float, eps: float = 1.0) -> float:
    """H(psi(z)) - H(sqrt m) evaluated on the reconstructed field."""
    psi = planewave_reconstruct(ReducedState(z, 0.0, m))
    base = plane_wave(m, z.K, z.stride)
    return nls_hamiltonian(psi, eps) - nls_hamiltonian(base, eps)


# -- diagonalisation and rotating frame ---------------------------------------------

def _de_arrays(f: FourierField2D, m, eps):
    X, Y = f.lattice()
    n = np.stack([X, Y], axis=-1)
    zero = (X == 0) & (Y == 0)
    n = np.where(zero[..., None], 1, n)
    d, e = diag_coeffs(n, m, eps)
    d = np.where(zero, 1.0, d)
    e = np.where(zero, 0.0, e)
    return d, e


def apply_S(f: FourierField2D, direction: str = "forward", m: float = 1.0, eps: float = 1.0) -> FourierField2D:
    """forward: w -> z = d w + e conj(w_{-n});  inverse: z -> w = d z - e conj(z_{-n})."""
    d, e = _de_arrays(f, m, eps)
    rc = f.reflected_conj()
    if direction == "forward":
        return f.replace(coeffs=d * f.coeffs + e * rc, frame="reduced-z")
    if direction == "inverse":
        return f.replace(coeffs=d * f.coeffs - e * rc, frame="diagonal-w")
    raise ValueError(direction)


def omega_array(f: FourierField2D, m=1.0, eps=1.0) -> np.ndarray:
    X, Y = f.lattice()
    k2 = (X * X + Y * Y).astype(float)
    return np.sqrt(k2 * k2 + 4.0 * m * k2 / eps**2)


def rotating_frame(f: FourierField2D, t: float, direction: str = "to_r", m=1.0, eps=1.0) -> FourierField2D:
    """to_r: r = w e^{+i omega t} (constant under the linear flow i w' = omega w); to_w inverts."""
    w = omega_array(f, m, eps)
    if direction == "to_r":
        return f.replace(coeffs=f.coeffs * np.exp(1j * w * t), frame="rotating-r")
    if direction == "to_w":
        return f.replace(coeffs=f.coeffs * np.exp(-1j * w * t), frame="diagonal-w")
    raise ValueError(direction)


def quadratic_form(z: FourierField2D, m=1.0, eps=1.0) -> float:
    """H2(z) = int |grad z|^2 + 2 m eps^-2 ||z||^2 + 2 m eps^-2 int Re z^2."""
    X, Y = z.lattice()
    n2 = (X * X + Y * Y).astype(float)
    c = z.coeffs
    zz = float(np.sum(c * c[::-1, ::-1]).real)
    return FOUR_PI2 * (float(np.sum(n2 * np.abs(c) ** 2)) + 2 * m / eps**2 * float(np.sum(np.abs(c) ** 2))
                       + 2 * m / eps**2 * zz)


def diagonal_form(w: FourierField2D, m=1.0, eps=1.0) -> float:
    return FOUR_PI2 * float(np.sum(omega_array(w, m, eps) * np.abs(w.coeffs) ** 2))


# -- embedding of the toy orbit -------------------------------------------------------

def lattice_field(lam, values: dict, K: int | None = None, frame: str = "rotating-r") -> FourierField2D:
    q = lam.q
    if K is None:
        K = max(max(abs(x), abs(y)) for x, y in lam.points()) // q
    return FourierField2D.from_modes(values, K, q, frame)


def embed_toy(lam, b, K: int | None = None) -> FourierField2D:
    """r_n = b_i for n in generation i."""
    b = np.asarray(b, dtype=np.complex128)
    if len(b) != lam.N:
        raise ValueError(f"need {lam.N} amplitudes, got {len(b)}")
    vals = {p: b[i] for i, g in enumerate(lam.generations) for p in g}
    return lattice_field(lam, vals, K)


TOY_TIME_FACTOR = 2.0     # tau = 2 eps^-2 t on the effective system


def embedded_amplitudes(traj_sol, t, lam_scale: float, G: int, eps: float = 1.0):
    """Generation values conj(c_i(tau)), tau = 2 eps^-2 t, of the scaled, regauged toy orbit.

    ``traj_sol`` maps toy time to gauged amplitudes B (shape (N,) or (N, k)).
    c(tau) = exp(-i G M tau) lam^-1 B(lam^-2 tau), with M the scaled mass.
    """
    t = np.asarray(t, dtype=float)
    tau = TOY_TIME_FACTOR * t / eps**2
    B = np.asarray(traj_sol(tau / lam_scale**2)) / lam_scale
    Mass = np.sum(np.abs(B) ** 2, axis=0)
    c = np.exp(-1j * G * Mass * tau) * B
    return np.conj(c)


# -- effective finite system --------------------------------------------------------

def effective_hamiltonian(lam) -> MonomialHamiltonian:
    """H_TM - 4 pi^2 (sum_set |r|^2)^2 as monomials on the set."""
    pts = [tuple(p) for p in lam.points()]
    pset = set(pts)
    H = MonomialHamiltonian("N")
    for n in pts:
        H.add((1, -1, 1, -1), (n, n, n, n), -FOUR_PI2)
    P = np.asarray(pts, dtype=np.int64)
    S = P[:, None, None, :] - P[None, :, None, :] + P[None, None, :, :]
    for i, j, k in zip(*np.nonzero(np.ones(S.shape[:3], bool))):
        if j == i or j == k:
            continue
        n4 = (int(S[i, j, k, 0]), int(S[i, j, k, 1]))
        if n4 in pset and n4 != pts[i]:
            H.add((1, -1, 1, -1), (pts[i], pts[j], pts[k], n4), FOUR_PI2)
    for a in pts:
        for b in pts:
            H.add((1, -1, 1, -1), (a, a, b, b), -FOUR_PI2)
    return H


class EffectiveSystem:
    """i r' = eps^-2 / (4 pi^2) dH/d conj(r) for the effective Hamiltonian on the set."""

    def __init__(self, lam, eps: float = 1.0, extra_modes=()):
        self.lam, self.eps = lam, eps
        self.H = effective_hamiltonian(lam)
        self.modes = [tuple(p) for p in lam.points()] + [tuple(p) for p in extra_modes]
        self.index = {n: i for i, n in enumerate(self.modes)}
        self.H._compile(self.index)

    def rhs(self, r: np.ndarray) -> np.ndarray:
        return -1j / (self.eps**2 * FOUR_PI2) * self.H.grad_conj(r, self.index)

    def energy(self, r) -> float:
        return float(self.H.evaluate(r, self.index).real)

    def from_generations(self, b) -> np.ndarray:
        gen = self.lam.generation_of()
        return np.array([b[gen[n] - 1] if n in gen else 0.0 for n in self.modes], dtype=np.complex128)

    def generation_means(self, r) -> np.ndarray:
        gen = self.lam.generation_of()
        out = np.zeros(self.lam.N, dtype=np.complex128)
        for n, v in zip(self.modes, r):
            if n in gen:
                out[gen[n] - 1] += v / len(self.lam.generations[gen[n] - 1])
        return out

    def integrate(self, r0, T: float, t_eval=None, tol: float = 1e-12):
        n = len(r0)

        def f(_, y):
            d = self.rhs(y[:n] + 1j * y[n:])
            return np.concatenate([d.real, d.imag])

        sol = solve_ivp(f, (0.0, T), np.concatenate([np.real(r0), np.imag(r0)]), method="DOP853",
                        rtol=tol, atol=tol * max(1e-300, float(np.max(np.abs(r0)))), t_eval=t_eval,
                        dense_output=t_eval is None)
        if not sol.success:
            raise StepFailure(sol.message)
        return sol.t, (sol.y[:n] + 1j * sol.y[n:]).T


# -- reduced-frame integrator and the deviation experiment ---------------------------

class ReducedIntegrator:
    """Fourth-order Runge-Kutta in the rotating frame (linear flow solved exactly).

    State: r on the coarse grid (zero mode unused) and theta.  The full
    plane-wave vector field is used; its linearisation is removed analytically
    so that only the nonlinear remainder is integrated.
    """

    def __init__(self, M: int, stride: int, m: float = 1.0, eps: float = 1.0):
        self.M, self.stride, self.m, self.eps = M, stride, m, eps
        NX, NY = wavenumbers(M, stride)
        self.n2 = (NX * NX + NY * NY).astype(float)
        zero = self.n2 == 0
        k2 = np.where(zero, 1.0, self.n2)
        a = k2 + 2 * m / eps**2
        w = np.sqrt(k2 * k2 + 4 * m * k2 / eps**2)
        self.om = np.where(zero, 0.0, w)
        self.d = np.where(zero, 1.0, np.sqrt(0.5 * (a / w + 1)))
        self.e = np.where(zero, 0.0, -np.sqrt(0.5 * (a / w - 1)))
        self.neg = (-np.arange(M)) % M

    def rc(self, A):
        return np.conj(A[self.neg][:, self.neg])

    def S(self, W):
        return self.d * W + self.e * self.rc(W)

    def Sinv(self, Z):
        return self.d * Z - self.e * self.rc(Z)

    def remainder(self, Z):
        """Nonlinear part of dz/dt and d theta/dt."""
        dZ, th = reduced_rhs_grid(Z, self.m, self.eps, self.n2)
        lin = -1j * ((self.n2 + 2 * self.m / self.eps**2) * Z + 2 * self.m / self.eps**2 * self.rc(Z))
        lin[0, 0] = 0.0
        return dZ - lin, th

    def rhs(self, t, R):
        ph = np.exp(1j * self.om * t)
        W = R / ph
        Rz, th = self.remainder(self.S(W))
        return self.Sinv(Rz) * ph, th

    def run(self, R0, theta0, T, dt, sample_times, callback=None):
        n = int(math.ceil(T / dt - 1e-12))
        h = T / n
        R, th, t = R0.copy(), theta0, 0.0
        samples = sorted(sample_times)
        si = 0
        out = []
        while si < len(samples) and samples[si] <= 1e-15:
            out.append(callback(t, R, th) if callback else (t, R.copy(), th))
            si += 1
        for _ in range(n):
            k1, l1 = self.rhs(t, R)
            k2, l2 = self.rhs(t + h / 2, R + h / 2 * k1)
            k3, l3 = self.rhs(t + h / 2, R + h / 2 * k2)
            k4, l4 = self.rhs(t + h, R + h * k3)
            R = R + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            th = th + h / 6 * (l1 + 2 * l2 + 2 * l3 + l4)
            t += h
            while si < len(samples) and samples[si] <= t + 1e-12:
                out.append(callback(t, R, th) if callback else (t, R.copy(), th))
                si += 1
            if not np.isfinite(R[0, 1]):
                raise StepFailure(f"non-finite state at t={t}")
        return out


@dataclass
class DeviationSeries:
    q: int
    lam: float
    t: np.ndarray
    deviation: np.ndarray
    initial_l1: float
    steps: int

    @property
    def sup(self) -> float:
        return float(np.max(self.deviation))

    def to_csv(self) -> str:
        return "t,l1_deviation\n" + "".join(f"{a!r},{b!r}\n" for a, b in zip(self.t, self.deviation))


def estimate_steps(lam, horizon: float, m=1.0, eps=1.0, safety: float = 0.5) -> tuple[int, int]:
    """(grid size, steps) the rotating-frame run needs for the set at its dilation."""
    K = max(max(abs(x), abs(y)) for x, y in lam.points()) // lam.q
    M = sim_grid_size(K)
    kmax = (M - 1) // 2 * lam.q
    wmax = omega((kmax, kmax), m, eps)
    dt = safety / (3 * wmax)
    return M, int(math.ceil(horizon / dt))


def deviation_run(lam, traj_sol, lam_scale: float, horizon: float, nsamples: int = 20,
                  m: float = 1.0, eps: float = 1.0, dt: float | None = None,
                  max_steps: int = 2_000_000) -> DeviationSeries:
    """Evolve the full reduced NLS from the embedded orbit and record the l1 distance to it.

    The initial field is the embedded orbit at t = 0 read as rotating-frame
    coordinates; both fields are compared in the rotating frame.
    """
    K = max(max(abs(x), abs(y)) for x, y in lam.points()) // lam.q
    M = sim_grid_size(K)
    if dt is None:
        _, steps = estimate_steps(lam, horizon, m, eps)
        dt = horizon / steps
    steps = int(math.ceil(horizon / dt))
    if steps > max_steps:
        raise ExperimentFailed(f"run needs {steps} steps on a {M}-grid (limit {max_steps})",
                               failed={"steps": steps, "M": M})
    G = lam.G
    idx = {p: ((p[0] // lam.q) % M, (p[1] // lam.q) % M) for p in lam.points()}
    gen = lam.generation_of()
    ts = np.linspace(0.0, horizon, nsamples + 1)

    def orbit_grid(t):
        amp = embedded_amplitudes(traj_sol, t, lam_scale, G, eps)
        A = np.zeros((M, M), complex)
        for p, (i, j) in idx.items():
            A[i, j] = amp[gen[p] - 1]
        return A

    R0 = orbit_grid(0.0)
    integ = ReducedIntegrator(M, lam.q, m, eps)
    dev = []

    def cb(t, R, th):
        d = float(np.sum(np.abs(R - orbit_grid(t))))
        dev.append(d)
        return d

    integ.run(R0, 0.0, horizon, horizon / steps, ts, cb)
    return DeviationSeries(lam.q, lam_scale, ts[:len(dev)], np.array(dev), float(np.sum(np.abs(R0))), steps)
