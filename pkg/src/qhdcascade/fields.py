"""Fourier fields on the 2-torus and the norms used throughout.

Convention: psi(x) = sum_n psi_n exp(i n.x) on (R / 2 pi Z)^2.  Norms are
sequence norms of the coefficients, so no (2 pi)^2 factor appears in them;
the physical L2 mass of psi is (2 pi)^2 * sum |psi_n|^2.

A field with stride q is supported on q Z^2 and is stored on the coarse
lattice: ``coeffs[kx + K, ky + K]`` holds the mode n = q (kx, ky).  Grids of
such a field sample the coarse function v(y) = sum_k c_k exp(i k.y), and
psi(x) = v(q x); integrals over the torus are unchanged by this substitution.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np
from scipy import signal

from .errors import RadiusExceeded, TruncationNotConverged

FRAMES = ("physical-u", "shifted-psi", "reduced-z", "diagonal-w", "rotating-r")
REDUCED_FRAMES = ("reduced-z", "diagonal-w", "rotating-r")


def grid_size(K: int) -> int:
    """Smallest even grid holding modes |k| <= K without quadratic aliasing (2/3 rule)."""
    M = 3 * K + 2
    return M + (M % 2)


@dataclass(frozen=True, eq=False)
class FourierField2D:
    coeffs: np.ndarray
    stride: int = 1
    frame: str = "physical-u"

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.ndim != 2 or c.shape[0] != c.shape[1] or c.shape[0] % 2 == 0:
            raise ValueError(f"coefficient array must be square with odd side, got {c.shape}")
        if self.frame not in FRAMES:
            raise ValueError(f"unknown frame {self.frame!r}")
        if int(self.stride) != self.stride or self.stride < 1:
            raise ValueError("stride must be a positive integer")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        K = c.shape[0] // 2
        if self.frame in REDUCED_FRAMES and c[K, K] != 0:
            raise ValueError(f"frame {self.frame} carries no zero mode")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "stride", int(self.stride))

    # -- construction ----------------------------------------------------
    @classmethod
    def zeros(cls, K: int, stride: int = 1, frame: str = "physical-u"):
        return cls(np.zeros((2 * K + 1, 2 * K + 1), complex), stride, frame)

    @classmethod
    def from_modes(cls, modes: dict, K: int | None = None, stride: int = 1,
                   frame: str = "physical-u"):
        """Build from {(nx, ny): value}; every n must lie on stride * Z^2."""
        ks = {}
        for n, v in modes.items():
            nx, ny = int(n[0]), int(n[1])
            if nx % stride or ny % stride:
                raise ValueError(f"mode {n} is off the lattice {stride}Z^2")
            ks[(nx // stride, ny // stride)] = v
        if K is None:
            K = max([max(abs(a), abs(b)) for a, b in ks] + [0])
        c = np.zeros((2 * K + 1, 2 * K + 1), complex)
        for (a, b), v in ks.items():
            if max(abs(a), abs(b)) > K:
                raise ValueError(f"mode {(a * stride, b * stride)} beyond cutoff")
            c[a + K, b + K] += v
        return cls(c, stride, frame)

    @classmethod
    def from_physical(cls, grid: np.ndarray, K: int, stride: int = 1,
                      frame: str = "physical-u"):
        M = grid.shape[0]
        if 2 * K + 1 > M:
            raise ValueError("grid too small for requested cutoff")
        hat = np.fft.fft2(grid) / M**2
        idx = np.arange(-K, K + 1) % M
        c = hat[np.ix_(idx, idx)]
        if frame in REDUCED_FRAMES:
            c = c.copy()
            c[K, K] = 0
        return cls(c, stride, frame)

    # -- basic accessors ---------------------------------------------------
    @property
    def K(self) -> int:
        return self.coeffs.shape[0] // 2

    @property
    def cutoff(self) -> int:
        return self.stride * self.K

    def lattice(self):
        """Integer mode coordinates (nx, ny) matching ``coeffs``."""
        k = np.arange(-self.K, self.K + 1) * self.stride
        return np.meshgrid(k, k, indexing="ij")

    def __getitem__(self, n) -> complex:
        nx, ny = int(n[0]), int(n[1])
        if nx % self.stride or ny % self.stride:
            return 0j
        a, b = nx // self.stride, ny // self.stride
        if max(abs(a), abs(b)) > self.K:
            return 0j
        return complex(self.coeffs[a + self.K, b + self.K])

    def support(self, tol: float = 0.0):
        a, b = np.nonzero(np.abs(self.coeffs) > tol)
        return [((int(i) - self.K) * self.stride, (int(j) - self.K) * self.stride)
                for i, j in zip(a, b)]

    def replace(self, coeffs=None, frame=None, stride=None):
        return FourierField2D(self.coeffs if coeffs is None else coeffs,
                              self.stride if stride is None else stride,
                              self.frame if frame is None else frame)

    def resized(self, K: int):
        """Zero-pad or truncate to coarse cutoff K."""
        out = np.zeros((2 * K + 1, 2 * K + 1), complex)
        k = min(K, self.K)
        out[K - k:K + k + 1, K - k:K + k + 1] = \
            self.coeffs[self.K - k:self.K + k + 1, self.K - k:self.K + k + 1]
        return self.replace(coeffs=out)

    def refined(self, stride: int = 1):
        """Re-express on a finer lattice; ``self.stride`` must be a multiple of ``stride``."""
        if self.stride % stride:
            raise ValueError("target stride must divide the current stride")
        r = self.stride // stride
        K = self.K * r
        out = np.zeros((2 * K + 1, 2 * K + 1), complex)
        out[::r, ::r] = self.coeffs
        return FourierField2D(out, stride, self.frame)

    def coarsened(self):
        """Largest stride compatible with the current support."""
        sup = np.argwhere(np.abs(self.coeffs) > 0) - self.K
        g = int(np.gcd.reduce(np.abs(sup).ravel())) if sup.size else 0
        if g <= 1:
            return self
        K = self.K // g
        c = self.coeffs[self.K - K * g:self.K + K * g + 1:g, self.K - K * g:self.K + K * g + 1:g]
        return FourierField2D(c, self.stride * g, self.frame)

    def reflected_conj(self) -> np.ndarray:
        """Array of conj(c_{-n}) aligned with ``coeffs``."""
        return np.conj(self.coeffs[::-1, ::-1])

    def __add__(self, other):
        return self.replace(coeffs=self.coeffs + _aligned(other, self))

    def __sub__(self, other):
        return self.replace(coeffs=self.coeffs - _aligned(other, self))

    def scaled(self, a: complex):
        return self.replace(coeffs=self.coeffs * a)

    # -- physical space ----------------------------------------------------
    def to_physical(self, M: int | None = None) -> np.ndarray:
        M = grid_size(self.K) if M is None else M
        if M < 2 * self.K + 1:
            raise ValueError("grid too small for this field")
        A = np.zeros((M, M), complex)
        idx = np.arange(-self.K, self.K + 1) % M
        A[np.ix_(idx, idx)] = self.coeffs
        return np.fft.ifft2(A) * M**2

    # -- serialization -------------------------------------------------------
    def to_json(self) -> str:
        X, Y = self.lattice()
        mask = self.coeffs != 0
        entries = [[int(x), int(y), float(v.real), float(v.imag)]
                   for x, y, v in zip(X[mask], Y[mask], self.coeffs[mask])]
        return json.dumps({"frame": self.frame, "stride": self.stride,
                           "cutoff": self.cutoff, "entries": entries})

    @classmethod
    def from_json(cls, text: str):
        d = json.loads(text)
        q = int(d["stride"])
        modes = {(e[0], e[1]): complex(e[2], e[3]) for e in d["entries"]}
        return cls.from_modes(modes, int(d["cutoff"]) // q, q, d["frame"])

    def to_bytes(self) -> bytes:
        """Little-endian f64 quadruples (nx, ny, re, im) of the nonzero entries."""
        X, Y = self.lattice()
        mask = self.coeffs != 0
        rec = np.stack([X[mask], Y[mask], self.coeffs[mask].real, self.coeffs[mask].imag], axis=1)
        return rec.astype("<f8").tobytes()


def _aligned(other, like: FourierField2D) -> np.ndarray:
    if isinstance(other, FourierField2D):
        if other.stride != like.stride:
            raise ValueError("stride mismatch")
        return other.resized(like.K).coeffs
    return np.asarray(other)


# -- norms ------------------------------------------------------------------

def japanese_bracket(field: FourierField2D) -> np.ndarray:
    X, Y = field.lattice()
    return np.sqrt(1.0 + X.astype(float) ** 2 + Y.astype(float) ** 2)


def hs_norm(field: FourierField2D, s: float) -> float:
    w = japanese_bracket(field) ** (2 * s)
    return float(np.sqrt(np.sum(np.abs(field.coeffs) ** 2 * w)))


def wiener_norm(field: FourierField2D) -> float:
    return float(np.sum(np.abs(field.coeffs)))


def l2_norm(field: FourierField2D) -> float:
    """Plancherel (sequence) L2 norm; the physical L2 norm is 2 pi times this."""
    return float(np.sqrt(np.sum(np.abs(field.coeffs) ** 2)))


def physical_l2_norm(field: FourierField2D, M: int | None = None) -> float:
    """L2 norm by grid quadrature, normalised like ``l2_norm``."""
    g = field.to_physical(M)
    return float(np.sqrt(np.mean(np.abs(g) ** 2)))


def sup_norm(field: FourierField2D, M: int | None = None) -> float:
    return float(np.max(np.abs(field.to_physical(M))))


def check_sup_bound(field: FourierField2D, M: int | None = None) -> bool:
    """Embedding of the Wiener algebra into L-infinity, sampled on a grid."""
    return sup_norm(field, M) <= wiener_norm(field)


def product(f: FourierField2D, g: FourierField2D) -> FourierField2D:
    """Exact pointwise product (full linear convolution of the coefficients)."""
    if f.stride != g.stride:
        raise ValueError("stride mismatch")
    c = signal.convolve(f.coeffs, g.coeffs, method="direct")
    return FourierField2D(c, f.stride, f.frame)


def grid_hs_norm(grid: np.ndarray, s: float, stride: int = 1) -> float:
    """Sequence H^s norm of a real or complex grid function (vector grids summed componentwise)."""
    grid = np.asarray(grid)
    comps = grid if grid.ndim == 3 else grid[None]
    M = comps.shape[-1]
    k = np.fft.fftfreq(M, 1.0 / M) * stride
    KX, KY = np.meshgrid(k, k, indexing="ij")
    w = (1.0 + KX**2 + KY**2) ** s
    total = 0.0
    for c in comps:
        hat = np.fft.fft2(c) / M**2
        total += float(np.sum(np.abs(hat) ** 2 * w))
    return math.sqrt(total)


# -- Wiener-algebra composition ------------------------------------------------

class Composition(NamedTuple):
    field: FourierField2D
    delta: float          # ||f - z0||_{l1}
    constant: float       # a-priori C with ||h o f|| <= |h(z0)| + C delta
    measured: float       # (||h o f|| - |h(z0)|) / delta, nan when delta = 0
    terms: int
    tail: float           # tail estimate at stop


def taylor_reciprocal(z0: complex) -> Callable[[int], complex]:
    """Taylor coefficients of 1/z at z0."""
    return lambda k: (-1) ** k / z0 ** (k + 1)


def taylor_sqrt(z0: complex) -> Callable[[int], complex]:
    """Taylor coefficients of the principal sqrt at z0 (z0 off the branch cut)."""
    r = complex(np.sqrt(z0))

    def a(k):
        return complex(math.comb(2 * k, k)) * (-1) ** (k + 1) / ((2 * k - 1) * 4**k) * r / z0**k
    return a


def wiener_compose(f: FourierField2D, h: Sequence[complex] | Callable[[int], complex],
                   z0: complex, radius: float, tol: float = 1e-12,
                   max_terms: int = 400, K_max: int = 512) -> Composition:
    """Evaluate h(f) = sum_k a_k (f - z0)^k in the Wiener algebra.

    ``radius`` is the convergence radius of the series at z0.  The series is
    stopped once the geometric tail bound, with ratio ||f - z0|| / radius, is
    below ``tol``.  Powers keep their full support up to coarse cutoff
    ``K_max``; any mass beyond it is added to the reported tail.
    """
    finite = not callable(h)
    coef = (lambda k: h[k] if k < len(h) else 0.0) if finite else h
    nterms = len(h) if finite else max_terms
    K = f.K
    gc = f.coeffs.copy()
    gc[K, K] -= z0
    delta = float(np.sum(np.abs(gc)))
    if delta >= radius / 2:
        raise RadiusExceeded(f"||f - z0||_l1 = {delta:.3g} >= R/2 = {radius / 2:.3g}")
    ratio = delta / radius
    out = np.zeros((1, 1), complex)
    power = np.ones((1, 1), complex)
    cauchy = 0.0
    bound_C = 0.0
    dropped = 0.0
    tail = math.inf
    converged = False
    k = 0
    for k in range(nterms):
        a = complex(coef(k))
        out = _pad_to(out, power.shape[0] // 2) + a * _pad_to(power, out.shape[0] // 2)
        if k > 0:
            bound_C += abs(a) * delta ** (k - 1)
        cauchy = max(cauchy, abs(a) * radius**k)
        tail = cauchy * ratio ** (k + 1) / (1 - ratio)
        if finite and k == nterms - 1:
            tail, converged = 0.0, True
            break
        if not finite and tail < tol:
            converged = True
            break
        power = signal.convolve(power, gc, method="fft" if power.shape[0] > 48 else "direct")
        Kp = power.shape[0] // 2
        if Kp > K_max:
            kept = power[Kp - K_max:Kp + K_max + 1, Kp - K_max:Kp + K_max + 1]
            dropped += abs(coef(k + 1)) * float(np.sum(np.abs(power)) - np.sum(np.abs(kept)))
            power = kept
    if not converged:
        raise TruncationNotConverged(f"tail {tail:.3g} after {nterms} terms")
    tail += dropped
    if tail > tol and not finite:
        raise TruncationNotConverged(f"tail {tail:.3g} exceeds {tol:.3g}")
    frame = f.frame if f.frame not in REDUCED_FRAMES else "physical-u"
    res = FourierField2D(out, f.stride, frame)
    h0 = abs(complex(coef(0)))
    measured = (wiener_norm(res) - h0) / delta if delta > 0 else float("nan")
    return Composition(res, delta, bound_C, measured, k + 1, tail)


def _pad_to(a: np.ndarray, K: int) -> np.ndarray:
    Ka = a.shape[0] // 2
    if Ka >= K:
        return a
    out = np.zeros((2 * K + 1, 2 * K + 1), complex)
    out[K - Ka:K + Ka + 1, K - Ka:K + Ka + 1] = a
    return out


def random_field(rng: np.random.Generator, K: int, amp: float = 1.0, stride: int = 1,
                 frame: str = "physical-u", decay: float = 0.0) -> FourierField2D:
    """Random coefficients with optional algebraic decay <n>^-decay."""
    c = (rng.standard_normal((2 * K + 1, 2 * K + 1))
         + 1j * rng.standard_normal((2 * K + 1, 2 * K + 1))) * amp
    f = FourierField2D(np.zeros_like(c), stride, "physical-u")
    c = c * japanese_bracket(f) ** (-decay)
    if frame in REDUCED_FRAMES:
        c[K, K] = 0
    return FourierField2D(c, stride, frame)


def support_gcd(points: Iterable[tuple[int, int]]) -> int:
    pts = np.array(list(points), dtype=np.int64).ravel()
    return int(np.gcd.reduce(np.abs(pts))) if pts.size else 0
