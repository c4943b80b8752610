import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from qhdcascade import normalform as nf
from qhdcascade.errors import MomentumViolation, SupportMismatch, ZeroDivisor, ZeroMode
from qhdcascade.lambdaset import LambdaSet
from qhdcascade.spectra import (FrequencyTable, MonomialHamiltonian, diag_coeffs, divisor, omega,
                                verify_small_divisors)

mode = st.tuples(st.integers(-64, 64), st.integers(-64, 64)).filter(lambda n: n != (0, 0))
mass = st.sampled_from([0.5, 1.0, 2.0])
eps_ = st.sampled_from([0.25, 0.5, 1.0])


class TestFrequencies:
    def test_examples(self):
        assert omega((3, 4), m=0.0) == 25.0
        assert omega((1, 0)) == pytest.approx(math.sqrt(5), abs=1e-7)
        with pytest.raises(ZeroMode):
            omega((0, 0))
        with pytest.raises(ZeroMode):
            diag_coeffs((0, 0))

    @given(mode, mass, eps_)
    def test_even(self, n, m, e):
        assert omega(n, m, e) == omega((-n[0], -n[1]), m, e)
        assert diag_coeffs(n, m, e) == diag_coeffs((-n[0], -n[1]), m, e)

    def test_diag_example(self):
        d, e = diag_coeffs((1, 0))
        assert d == pytest.approx(1.08205, abs=1e-5)
        assert e == pytest.approx(-0.41330, abs=1e-5)
        assert d * d - e * e == pytest.approx(1.0, abs=1e-10)
        assert diag_coeffs((5, 2), m=0.0) == (1.0, 0.0)

    @given(mode, mass, eps_)
    def test_hyperbolic_identity_and_decay(self, n, m, e):
        d, ee = diag_coeffs(n, m, e)
        assert abs(d * d - ee * ee - 1) < 1e-12
        bound = 2 * m / e**2 / (n[0] ** 2 + n[1] ** 2)
        assert abs(d - 1) <= bound and abs(ee) <= bound

    def test_decay_example(self):
        assert abs(diag_coeffs((20, 0))[1]) <= 2 / 400

    def test_table(self):
        tab = FrequencyTable([(1, 0), (2, 3)], m=2.0, eps=0.5)
        assert tab[(2, 3)] == omega((2, 3), 2.0, 0.5)
        assert tab[(7, 7)] == omega((7, 7), 2.0, 0.5)
        assert tab.max() >= tab[(2, 3)]


class TestDivisors:
    def test_three_wave_examples(self):
        modes = [(5, 0), (0, 5), (-5, 5)]
        assert divisor((1, -1, 1), modes, m=0.0) == 50.0
        assert divisor((1, -1, 1), modes) == pytest.approx(51.9615, abs=1e-4)

    def test_momentum_violation(self):
        with pytest.raises(MomentumViolation):
            divisor((1, 1, 1), [(1, 0), (0, 1), (1, 1)])

    def test_family_resonant_without_mass(self):
        with pytest.raises(ZeroDivisor):
            divisor((1, -1, 1, -1), [(1, 0), (0, 1), (-1, 0), (0, -1)], m=0.0)

    @given(mode, mode)
    def test_massless_divisor_even(self, a, b):
        c = (b[0] - a[0], b[1] - a[1])
        assume(c != (0, 0))
        try:
            v = divisor((1, -1, 1), [a, b, c], m=0.0)
        except ZeroDivisor:
            return
        assert v == int(v) and int(v) % 2 == 0

    def test_massless_audit(self, desk3):
        lam = desk3.scaled(4)
        rep = verify_small_divisors(lam, m=0.0)
        assert rep.family_max == 0.0
        for row in rep.rows:
            if row[0] != "family":
                assert row[-1] == int(row[-1]) and row[-1] != 0

    def test_c0_guard(self, desk3):
        with pytest.raises(ValueError):
            verify_small_divisors(desk3.scaled(8), c0=0.1)
        verify_small_divisors(desk3.scaled(16), c0=0.1, keep_rows=False)

    def test_report_csv(self, desk3):
        rep = verify_small_divisors(desk3.scaled(8))
        lines = rep.to_csv().splitlines()
        assert lines[0].startswith("class,") and len(lines) == len(rep.rows) + 1
        assert rep.counts["families"] == len(desk3.families)


class TestMonomials:
    def test_momentum_checked(self):
        H = MonomialHamiltonian()
        with pytest.raises(MomentumViolation):
            H.add((1, -1), ((1, 0), (0, 1)), 1.0)

    def test_canonical_merge_and_json(self):
        H = MonomialHamiltonian("h")
        H.add((1, -1, 1), ((1, 0), (2, 1), (1, 1)), 1 + 2j)
        H.add((1, 1, -1), ((1, 1), (1, 0), (2, 1)), 1.0)
        assert len(H) == 1 and H.sup_norm() == pytest.approx(abs(2 + 2j))
        back = MonomialHamiltonian.from_json(H.to_json())
        assert back.terms == H.terms

    @given(st.integers(0, 10**6))
    def test_gradients_by_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        modes = [(1, 0), (0, 1), (-1, 0), (0, -1), (1, 1)]
        H = MonomialHamiltonian()
        H.add((1, -1, 1, -1), ((1, 0), (0, 1), (-1, 0), (0, -1)), rng.normal() + 1j * rng.normal())
        H.add((1, 1, -1), ((1, 0), (0, 1), (1, 1)), rng.normal() + 1j * rng.normal())
        H.add((1, -1), ((1, 1), (1, 1)), rng.normal())
        idx = {n: i for i, n in enumerate(modes)}
        v = rng.normal(size=5) + 1j * rng.normal(size=5)
        g, gc = H.grad(v, idx), H.grad_conj(v, idx)
        h = 1e-6
        for k in range(5):
            e = np.zeros(5)
            e[k] = h
            dx = (H.evaluate(v + e, idx) - H.evaluate(v - e, idx)) / (2 * h)
            dy = (H.evaluate(v + 1j * e, idx) - H.evaluate(v - 1j * e, idx)) / (2 * h)
            # Wirtinger derivatives
            assert abs(g[k] - 0.5 * (dx - 1j * dy)) < 1e-6
            assert abs(gc[k] - 0.5 * (dx + 1j * dy)) < 1e-6


class TestNormalForm:
    def test_single_term_generator(self):
        src = MonomialHamiltonian()
        modes = ((3, 0), (0, 3), (-3, 3))
        src.add((1, -1, 1), modes, 1.0)
        D = divisor((1, -1, 1), modes, 1.0, 0.5)
        F = nf.solve_homological(src, lambda n: omega(n, 1.0, 0.5), 0.5**-2)
        (key, c), = F
        assert c == pytest.approx(1j * 0.5**-2 / D)

    def test_empty_set(self):
        lam = LambdaSet((), (), 1)
        assert len(nf.build_generator_F3(lam)) == 0
        assert len(nf.build_generator_G4(lam)) == 0
        assert nf.verify_homological(MonomialHamiltonian(), omega, MonomialHamiltonian()) == 0.0

    def test_homological_residual(self, desk3):
        lam = desk3.scaled(16)
        tab = FrequencyTable(lam.points())
        src = nf.cubic_source(lam)
        F = nf.build_generator_F3(lam, source=src)
        assert nf.verify_homological(F, tab.__getitem__, src) <= 1e-10 * src.sup_norm()
        assert src.conjugate_defect() <= 1e-12 * src.sup_norm()

    def test_perturbed_generator(self, desk3):
        lam = desk3.scaled(16)
        tab = FrequencyTable(lam.points())
        src = nf.cubic_source(lam)
        F = nf.build_generator_F3(lam, source=src)
        key = max(src.terms, key=lambda k: abs(src.terms[k]))
        F.terms[key] *= 1.1
        res = nf.verify_homological(F, tab.__getitem__, src)
        assert res == pytest.approx(0.1 * abs(src.terms[key]), rel=1e-9)

    def test_support_mismatch(self, desk3):
        lam = desk3.scaled(16)
        src = nf.cubic_source(lam)
        F = nf.build_generator_F3(lam, source=src)
        F.terms.pop(next(iter(F.terms)))
        with pytest.raises(SupportMismatch):
            nf.verify_homological(F, omega, src)

    def test_bracket_against_wirtinger_derivatives(self, desk3, rng):
        """{F, H2} = i sum (dF/dw dH2/dw* - dF/dw* dH2/dw) with H2 = sum omega |w|^2."""
        lam = desk3.scaled(8)
        F = nf.build_generator_F3(lam)
        modes = sorted(F.support())
        idx = {n: i for i, n in enumerate(modes)}
        w = (rng.normal(size=len(modes)) + 1j * rng.normal(size=len(modes))) * 0.1
        om = np.array([omega(n) for n in modes])
        num = 1j * np.sum(F.grad(w, idx) * om * w - F.grad_conj(w, idx) * om * np.conj(w))
        B = nf.bracket_with_quadratic(F, omega)
        assert abs(B.evaluate(w, idx) - num) <= 1e-10 * abs(num)

    def test_residual_invariant_under_dilation(self, desk3):
        res = []
        for q in (8, 16):
            lam = desk3.scaled(q)
            tab = FrequencyTable(lam.points())
            HI, HII, h40 = nf.quartic_sources(lam)
            src = (HI + HII + h40).scaled(1.0)
            G = nf.build_generator_G4(lam)
            res.append(nf.verify_homological(G, tab.__getitem__, src) / src.sup_norm())
        assert max(res) <= 1e-10

    def test_generator_delta_squared(self, desk3):
        sups = [nf.build_generator_F3(desk3.scaled(q)).sup_norm() for q in (8, 16)]
        assert 3.5 <= sups[0] / sups[1] <= 4.5
        b = nf.generator_bound(nf.build_generator_F3(desk3.scaled(16)), 16)
        assert b["delta"] == 1 / 16 and b["C"] > 0
