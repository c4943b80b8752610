"""Generators of the partial normal form on a verified generation set.

Bracket convention: with H2 = sum omega(n)|w_n|^2 (the 4 pi^2 weight absorbed),
{H2, c * prod w^sigma} = -i (sum sigma_j omega(n_j)) c * prod w^sigma.  The
homological equation {F, H2} + source = 0 is therefore solved by
F = i * source / (sum sigma omega).
"""
from __future__ import annotations

import itertools
import math

import numpy as np

from .errors import SupportMismatch, ZeroDivisor
from .spectra import FrequencyTable, MonomialHamiltonian, diag_coeffs

FOUR_PI2 = 4 * math.pi**2
EIGHT_PI2 = 8 * math.pi**2


def _neg(n):
    return (-n[0], -n[1])


def cubic_source(lam, m=1.0, eps=1.0) -> MonomialHamiltonian:
    """2 * int (z + conj z)|z|^2 dx in the diagonal variables, restricted to at most one mode off the set.

    In Fourier this is 8 pi^2 sum_{n1 - n2 + n3 = 0} (z1 conj(z2) z3 + c.c.); each
    factor is expanded through z^s_n = d_n w^s_n + e_n w^{-s}_{-n}.
    """
    pts = [tuple(p) for p in lam.points()]
    inside = set(pts)
    pm = sorted(inside | {_neg(p) for p in pts})
    de = {}

    def coeffs(n):
        if n not in de:
            de[n] = diag_coeffs(n, m, eps)
        return de[n]

    triples = set()
    for a, b in itertools.product(pm, pm):
        # any two of the three slots fixed, the third forced by n1 - n2 + n3 = 0
        for t in ((a, b, (b[0] - a[0], b[1] - a[1])),
                  (a, (a[0] + b[0], a[1] + b[1]), b),
                  ((a[0] - b[0], a[1] - b[1]), a, b)):
            if (0, 0) not in t:
                triples.add(t)
    H = MonomialHamiltonian("G3oS")
    for t in triples:
        for zsig in ((1, -1, 1), (-1, 1, -1)):
            for flips in itertools.product((0, 1), repeat=3):
                sig, modes, c = [], [], EIGHT_PI2
                for s, n, f in zip(zsig, t, flips):
                    d, e = coeffs(n)
                    if f:
                        sig.append(-s)
                        modes.append(_neg(n))
                        c *= e
                    else:
                        sig.append(s)
                        modes.append(n)
                        c *= d
                if sum(mm in inside for mm in modes) >= 2:
                    H.add(sig, modes, c, check=False)
    return H


def quartic_sources(lam):
    """Pieces of the degree-four Hamiltonian to be removed: (H_I, H_II, h40).

    H_I   4 pi^2 sum w1 conj(w2) w3 conj(w4), n1 - n2 + n3 - n4 = 0, exactly one mode off the set
    H_II  -4 pi^2 (sum_set |w|^2)(sum (w_k w_-k + c.c.)) over k with exactly one of +-k in the set
    h40   the same product with both +-k in the set
    """
    pts = [tuple(p) for p in lam.points()]
    inside = set(pts)
    HI = MonomialHamiltonian("H_I")
    P = np.asarray(pts, dtype=np.int64)
    if len(P):
        S = P[:, None, None, :] - P[None, :, None, :] + P[None, None, :, :]
        n = len(P)
        for i, j, k in itertools.product(range(n), repeat=3):
            n4 = (int(S[i, j, k, 0]), int(S[i, j, k, 1]))
            if n4 == (0, 0) or n4 in inside:
                continue
            quad = (pts[i], pts[j], pts[k], n4)
            for perm in _slot_images(quad):
                HI.add((1, -1, 1, -1), perm, FOUR_PI2, check=False)
    HII = MonomialHamiltonian("H_II")
    h40 = MonomialHamiltonian("h40")
    for a in pts:
        for k in pts:
            both = _neg(k) in inside
            target = h40 if both else HII
            for sg in (1, -1):
                # each unordered pair {k, -k} is hit from both n = k and n = -k
                w = 1.0 if both else 2.0
                target.add((1, -1, sg, sg), (a, a, k, _neg(k)), -FOUR_PI2 * w, check=False)
    return HI, HII, h40


def _slot_images(quad):
    """The enumeration puts the off-set mode in slot 4; these are the matching
    ordered tuples with it in slots 4, 1, 3 and 2 (a bijection per slot)."""
    n1, n2, n3, n4 = quad
    return [(n1, n2, n3, n4), (n4, n3, n2, n1), (n2, n1, n4, n3), (n3, n4, n1, n2)]


def solve_homological(source: MonomialHamiltonian, omega_of, scale: float = 1.0,
                      name: str = "F") -> MonomialHamiltonian:
    """Generator with coefficients i * scale * c / (sum sigma omega)."""
    F = MonomialHamiltonian(name)
    for (sig, modes), c in source:
        D = sum(s * omega_of(n) for s, n in zip(sig, modes))
        if D == 0.0:
            raise ZeroDivisor(f"resonant monomial {sig} {modes} in the source")
        F.terms[(sig, modes)] = 1j * scale * c / D
    return F


def build_generator_F3(lam, m=1.0, eps=1.0, source: MonomialHamiltonian | None = None):
    src = cubic_source(lam, m, eps) if source is None else source
    tab = FrequencyTable(lam.points(), m, eps)
    return solve_homological(src, tab.__getitem__, eps**-2, "F3")


def build_generator_G4(lam, m=1.0, eps=1.0):
    HI, HII, h40 = quartic_sources(lam)
    tab = FrequencyTable(lam.points(), m, eps)
    src = HI + HII + h40
    return solve_homological(src, tab.__getitem__, eps**-2, "G4")


def bracket_with_quadratic(F: MonomialHamiltonian, omega_of) -> MonomialHamiltonian:
    """{F, H2} = i (sum sigma omega) F, term by term."""
    out = MonomialHamiltonian("{F,H2}")
    for (sig, modes), c in F:
        D = sum(s * omega_of(n) for s, n in zip(sig, modes))
        out.terms[(sig, modes)] = 1j * D * c
    return out


def verify_homological(F: MonomialHamiltonian, omega_of, source: MonomialHamiltonian) -> float:
    """max |{F, H2} + source| over the common support (source already carries eps^-2)."""
    if set(F.terms) != set(source.terms):
        extra = set(F.terms) ^ set(source.terms)
        raise SupportMismatch(f"{len(extra)} monomials differ, e.g. {next(iter(extra))}")
    B = bracket_with_quadratic(F, omega_of)
    return max((abs(B.terms[k] + source.terms[k]) for k in source.terms), default=0.0)


def generator_bound(F: MonomialHamiltonian, q: int, eps: float = 1.0) -> dict:
    """Measured constant C in [[F]] <= C delta^2, delta = 1/(eps q)."""
    delta = 1.0 / (eps * q)
    sup = F.sup_norm()
    return {"sup": sup, "delta": delta, "C": sup / delta**2 if sup else 0.0}
