"""Linearised plane-wave spectrum, small divisors and monomial Hamiltonians.

Around the plane wave of mass m the quadratic part couples z_n with conj(z_{-n}).
The symplectic change z_n = d_n w_n + e_n conj(w_{-n}) diagonalises it, with
i dw_n/dt = omega(n) w_n and omega(n) = sqrt(|n|^4 + 4 m |n|^2 / eps^2).
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import MomentumViolation, ZeroDivisor, ZeroMode

Mode = tuple[int, int]


def omega(n, m: float = 1.0, eps: float = 1.0):
    """Dispersion relation; accepts a single mode or an (..., 2) integer array."""
    n = np.asarray(n)
    k2 = np.sum(n.astype(np.float64) ** 2, axis=-1)
    if np.any(k2 == 0):
        raise ZeroMode("omega is defined only off the zero mode")
    out = np.sqrt(k2 * k2 + 4.0 * m * k2 / eps**2)
    return float(out) if out.ndim == 0 else out


def diag_coeffs(n, m: float = 1.0, eps: float = 1.0):
    """Coefficients (d, e) of z_n = d w_n + e conj(w_{-n}); d^2 - e^2 = 1."""
    n = np.asarray(n)
    k2 = np.sum(n.astype(np.float64) ** 2, axis=-1)
    if np.any(k2 == 0):
        raise ZeroMode("the diagonalising map is defined only off the zero mode")
    a = k2 + 2.0 * m / eps**2
    w = np.sqrt(k2 * k2 + 4.0 * m * k2 / eps**2)
    d = np.sqrt(0.5 * (a / w + 1.0))
    e = -np.sqrt(0.5 * (a / w - 1.0))
    if d.ndim == 0:
        return float(d), float(e)
    return d, e


class FrequencyTable:
    """Cached omega(n) over a finite mode set."""

    def __init__(self, modes, m=1.0, eps=1.0):
        self.m, self.eps = m, eps
        self.modes = [tuple(int(c) for c in n) for n in modes]
        w = omega(np.array(self.modes), m, eps) if self.modes else []
        self._w = dict(zip(self.modes, np.atleast_1d(w)))

    def __getitem__(self, n) -> float:
        n = (int(n[0]), int(n[1]))
        if n not in self._w:
            self._w[n] = omega(n, self.m, self.eps)
        return self._w[n]

    def max(self) -> float:
        return max(self._w.values())


def divisor(sigma, modes, m=1.0, eps=1.0) -> float:
    """sum_i sigma_i omega(n_i); raises ZeroDivisor on exact vanishing."""
    modes = np.asarray(modes, dtype=np.int64)
    sigma = np.asarray(sigma)
    if np.any(np.sum(sigma[:, None] * modes, axis=0) != 0):
        raise MomentumViolation(f"sum sigma n = {np.sum(sigma[:, None] * modes, axis=0)}")
    val = float(np.sum(sigma * omega(modes, m, eps)))
    if val == 0.0:
        raise ZeroDivisor(f"vanishing divisor for {list(map(tuple, modes))}")
    return val


# -- interaction enumeration ------------------------------------------------------

def three_wave_terms(points, include_internal=True):
    """Momentum-conserving triples with n1, n2 in the set and n3 forced.

    Returns a list of (sigma, (n1, n2, n3), n3_in_set) with sigma1 = +1; the
    conjugate sign patterns are the complex conjugates.  n3 = 0 is skipped.
    """
    pts = [tuple(p) for p in points]
    pset = set(pts)
    out, seen = [], set()
    for n1, n2 in itertools.product(pts, pts):
        for s2, s3 in itertools.product((1, -1), (1, -1)):
            v = (n1[0] + s2 * n2[0], n1[1] + s2 * n2[1])
            n3 = (-s3 * v[0], -s3 * v[1])
            if n3 == (0, 0):
                continue
            inside = n3 in pset
            if inside and not include_internal:
                continue
            key = _canon((1, s2, s3), (n1, n2, n3))
            if key in seen:
                continue
            seen.add(key)
            out.append(((1, s2, s3), (n1, n2, n3), inside))
    return out


def four_wave_exterior(points):
    """(n1, n2, n3, n4) with n1, n2, n3 in the set, n4 = n1 - n2 + n3 outside it and nonzero."""
    P = np.asarray(points, dtype=np.int64)
    pset = {tuple(p) for p in points}
    S = P[:, None, None, :] - P[None, :, None, :] + P[None, None, :, :]
    flat = S.reshape(-1, 2)
    keep = np.array([(int(x), int(y)) not in pset and (x, y) != (0, 0) for x, y in flat])
    i, j, k = np.unravel_index(np.nonzero(keep)[0], S.shape[:3])
    return [(tuple(map(int, P[a])), tuple(map(int, P[b])), tuple(map(int, P[c])),
             tuple(map(int, S[a, b, c]))) for a, b, c in zip(i, j, k)]


def rect_defect(n1, n2, n3, n4) -> int:
    """|n1|^2 - |n2|^2 + |n3|^2 - |n4|^2 (exact integer)."""
    sq = lambda n: n[0] * n[0] + n[1] * n[1]
    return sq(n1) - sq(n2) + sq(n3) - sq(n4)


@dataclass
class DivisorReport:
    q: int
    m: float
    eps: float
    kappa3: float            # min |3-wave divisor| / q^2
    kappa4: float            # min |exterior 4-wave divisor| / q^2
    family_max: float        # max |family divisor|
    K_measured: float        # family_max * q^2 * eps^4
    counts: dict
    rows: list = field(repr=False, default_factory=list)

    @property
    def three_wave_ok(self) -> bool:
        return self.kappa3 > 0.5

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["class", "sigma", "n1", "n2", "n3", "n4", "divisor", "divisor_over_q2"])
        for r in self.rows:
            w.writerow(r)
        return buf.getvalue()


def verify_small_divisors(lam, m: float = 1.0, eps: float = 1.0, keep_rows: bool = True,
                          c0: float | None = None) -> DivisorReport:
    """Brute-force divisor audit over the three interaction classes.

    With c0 given, the dilation must satisfy 1/(eps q) < c0.
    """
    pts = lam.points()
    q = lam.q
    if c0 is not None and 1.0 / (eps * q) >= c0:
        raise ValueError(f"delta = {1.0 / (eps * q):.4g} is not below c0 = {c0}")
    rows = []
    tab = FrequencyTable(pts, m, eps)

    k3 = math.inf
    n3w = 0
    for sigma, modes, inside in three_wave_terms(pts):
        dv = sum(s * tab[n] for s, n in zip(sigma, modes))
        k3 = min(k3, abs(dv) / q**2)
        n3w += 1
        if keep_rows:
            rows.append(["3wave" + ("-internal" if inside else ""), "".join("+" if s > 0 else "-" for s in sigma),
                         *modes, "", dv, dv / q**2])

    k4 = math.inf
    ext = four_wave_exterior(pts)
    if ext:
        E = np.asarray(ext, dtype=np.int64)
        w = omega(E.reshape(-1, 2), m, eps).reshape(-1, 4)
        dv = w[:, 0] - w[:, 1] + w[:, 2] - w[:, 3]
        k4 = float(np.min(np.abs(dv))) / q**2
        if keep_rows:
            for f, d in zip(ext, dv):
                rows.append(["4wave-exterior", "+-+-", *f, float(d), float(d) / q**2])

    fam_max = 0.0
    for f in lam.families:
        for quad in _family_orderings(f):
            d = tab[quad[0]] - tab[quad[1]] + tab[quad[2]] - tab[quad[3]]
            fam_max = max(fam_max, abs(d))
            if keep_rows:
                rows.append(["family", "+-+-", *quad, d, d / q**2])
    counts = {"three_wave": n3w, "four_wave_exterior": len(ext), "families": len(lam.families)}
    return DivisorReport(q, m, eps, k3, k4, fam_max, fam_max * q**2 * eps**4, counts, rows)


def _family_orderings(f):
    n1, n2, n3, n4 = f
    return [(n1, n2, n3, n4), (n2, n1, n4, n3)]


# -- monomial Hamiltonians --------------------------------------------------------

def _canon(sigma, modes):
    pairs = sorted(zip((int(s) for s in sigma), (tuple(int(c) for c in n) for n in modes)))
    return tuple(p[0] for p in pairs), tuple(p[1] for p in pairs)


class MonomialHamiltonian:
    """Finite sum of monomials c * prod_i w_{n_i}^{sigma_i} (w^- = conj(w)).

    Keys are canonical (sorted) sign/mode tuples; adding a term merges
    coefficients.  Every term must conserve momentum.
    """

    def __init__(self, name: str = "H"):
        self.name = name
        self.terms: dict = {}
        self._compiled = None

    def add(self, sigma, modes, coeff: complex, check: bool = True):
        if check:
            mom = [0, 0]
            for s, n in zip(sigma, modes):
                mom[0] += s * n[0]
                mom[1] += s * n[1]
            if mom != [0, 0]:
                raise MomentumViolation(f"term {sigma} {modes} carries momentum {tuple(mom)}")
        key = _canon(sigma, modes)
        self.terms[key] = self.terms.get(key, 0.0) + complex(coeff)
        self._compiled = None
        return self

    def __len__(self):
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms.items())

    def prune(self, tol=0.0):
        self.terms = {k: v for k, v in self.terms.items() if abs(v) > tol}
        self._compiled = None
        return self

    def scaled(self, c) -> "MonomialHamiltonian":
        out = MonomialHamiltonian(self.name)
        out.terms = {k: v * c for k, v in self.terms.items()}
        return out

    def __add__(self, other: "MonomialHamiltonian") -> "MonomialHamiltonian":
        out = MonomialHamiltonian(f"{self.name}+{other.name}")
        out.terms = dict(self.terms)
        for k, v in other.terms.items():
            out.terms[k] = out.terms.get(k, 0.0) + v
        return out

    def sup_norm(self) -> float:
        return max((abs(v) for v in self.terms.values()), default=0.0)

    def support(self) -> set:
        return {n for (_, modes) in self.terms for n in modes}

    def conjugate_defect(self) -> float:
        """max |c(conj monomial) - conj(c)|; zero for a real-valued Hamiltonian."""
        worst = 0.0
        for (sig, modes), c in self.terms.items():
            ck = _canon(tuple(-s for s in sig), modes)
            worst = max(worst, abs(self.terms.get(ck, 0.0) - np.conj(c)))
        return worst

    def _compile(self, index):
        by_deg = {}
        for (sig, modes), c in self.terms.items():
            by_deg.setdefault(len(sig), []).append((sig, [index[n] for n in modes], c))
        comp = {}
        for d, items in by_deg.items():
            S = np.array([it[0] for it in items], dtype=np.int64)
            I = np.array([it[1] for it in items], dtype=np.int64)
            C = np.array([it[2] for it in items], dtype=np.complex128)
            comp[d] = (S, I, C)
        self._compiled = (index, comp)

    def _factors(self, v, S, I):
        F = v[I]
        return np.where(S > 0, F, np.conj(F))

    def evaluate(self, values: dict | np.ndarray, index: dict | None = None) -> complex:
        v, index = self._vector(values, index)
        total = 0.0 + 0.0j
        for S, I, C in self._compiled[1].values():
            total += np.sum(C * np.prod(self._factors(v, S, I), axis=1))
        return complex(total)

    def grad_conj(self, values, index: dict | None = None) -> np.ndarray:
        """dH/d conj(w_n) for every indexed mode, as a dense vector."""
        return self._grad(values, index, -1)

    def grad(self, values, index: dict | None = None) -> np.ndarray:
        """dH/dw_n (conj(w) held fixed)."""
        return self._grad(values, index, 1)

    def _grad(self, values, index, sign):
        v, index = self._vector(values, index)
        out = np.zeros(len(v), dtype=np.complex128)
        for S, I, C in self._compiled[1].values():
            F = self._factors(v, S, I)
            d = S.shape[1]
            for j in range(d):
                mask = S[:, j] == sign
                if not np.any(mask):
                    continue
                others = np.prod(np.delete(F[mask], j, axis=1), axis=1)
                np.add.at(out, I[mask, j], C[mask] * others)
        return out

    def _vector(self, values, index):
        if isinstance(values, dict):
            modes = sorted(set(values) | self.support())
            index = {n: i for i, n in enumerate(modes)}
            v = np.array([values.get(n, 0.0) for n in modes], dtype=np.complex128)
        else:
            v = np.asarray(values, dtype=np.complex128)
            if index is None:
                raise ValueError("dense values need a mode index")
        if self._compiled is None or self._compiled[0] is not index:
            missing = self.support() - set(index)
            if missing:
                raise KeyError(f"modes {sorted(missing)[:3]} missing from index")
            self._compile(index)
        return v, index

    def to_json(self) -> str:
        return json.dumps({"name": self.name, "terms": [
            {"sigma": list(sig), "modes": [list(n) for n in modes], "re": c.real, "im": c.imag}
            for (sig, modes), c in sorted(self.terms.items())]})

    @classmethod
    def from_json(cls, text: str) -> "MonomialHamiltonian":
        d = json.loads(text)
        h = cls(d.get("name", "H"))
        for t in d["terms"]:
            h.add(t["sigma"], [tuple(n) for n in t["modes"]], complex(t["re"], t["im"]))
        return h
