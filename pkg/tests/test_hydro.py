import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qhdcascade import hydro, nls
from qhdcascade.errors import HypothesisViolated, VacuumDetected
from qhdcascade.fields import FourierField2D, random_field

seeds = st.integers(0, 2**32 - 1)
TWO_PI2 = (2 * math.pi) ** 2


def bumpy(seed, amp=0.003, K=3):
    """Near-constant field; v = J/rho is then resolved on a 65-point grid without aliasing."""
    return random_field(np.random.default_rng(seed), K, amp) + FourierField2D.from_modes({(0, 0): 1.0}, K)


def plane_wave_orbit(k, eps, dt, n, K=3):
    w = (0.5 * eps**2 * (k[0] ** 2 + k[1] ** 2) + 1.0) / eps
    return [FourierField2D.from_modes({k: np.exp(-1j * w * i * dt)}, K) for i in range(n)]


class TestMadelung:
    def test_plane_wave(self):
        eps = 0.5
        h = hydro.madelung(FourierField2D.from_modes({(2, 1): 1.0}, 3), eps)
        assert np.allclose(h.rho, 1.0, atol=1e-14)
        assert np.allclose(h.v[0], 2 * eps) and np.allclose(h.v[1], eps)
        assert np.abs(h.curl()).max() < 1e-12

    def test_constant(self):
        h = hydro.madelung(FourierField2D.from_modes({(0, 0): 2.0}, 1))
        assert np.allclose(h.rho, 4.0) and np.all(np.abs(h.v) < 1e-14)

    @given(seeds)
    def test_current_identity_and_curl(self, seed):
        h = hydro.madelung(bumpy(seed), 0.5, M=65)
        assert np.abs(h.current - h.sqrt_rho[None] * h.v).max() <= 1e-10
        assert np.abs(h.curl()).max() <= 1e-10

    @given(seeds, st.floats(-3, 3))
    def test_gauge_invariance(self, seed, phi):
        u = bumpy(seed)
        a, b = hydro.madelung(u, 0.7), hydro.madelung(u.scaled(np.exp(1j * phi)), 0.7)
        assert np.abs(a.rho - b.rho).max() < 1e-13
        assert np.abs(a.v - b.v).max() < 1e-11

    @given(seeds)
    def test_quantum_forms_agree(self, seed):
        h = hydro.madelung(bumpy(seed), 0.5, M=65)
        d = hydro.quantum_term(h, "potential") - hydro.quantum_term(h, "divergence")
        assert np.abs(d).max() <= 1e-8

    def test_vacuum(self):
        u = FourierField2D.from_modes({(1, 0): 1.0, (-1, 0): -1.0}, 1)     # 2i sin x vanishes at x = 0
        with pytest.raises(VacuumDetected):
            hydro.madelung(u, M=33, m=1.0)
        with pytest.raises(ValueError):
            hydro.quantum_term(hydro.madelung(bumpy(0)), "other")

    def test_json(self, rng):
        h = hydro.madelung(bumpy(3), 0.5)
        back = hydro.HydroState.from_json(h.to_json())
        assert np.allclose(back.rho, h.rho) and np.allclose(back.current, h.current)
        assert back.eps == 0.5


class TestResidual:
    def test_plane_wave(self):
        orbit = plane_wave_orbit((2, 1), 0.5, 0.01, 7)
        rc, rm = hydro.qhd_residual(orbit, 0.01, 0.5)
        assert rc <= 1e-10 and rm <= 1e-10

    def test_too_few_samples(self):
        with pytest.raises(ValueError):
            hydro.qhd_residual(plane_wave_orbit((1, 0), 1.0, 0.1, 4), 0.1)

    def test_converges_with_the_solver_step(self):
        eps = 0.5
        u = FourierField2D.from_modes({(0, 0): 1.0, (1, 0): 0.01, (0, 1): 0.02j, (1, 1): 0.01}, 3)
        res = []
        for dt in (1e-3, 5e-4):
            _, fs, _ = nls.integrate_nls(u, 0.05, dt, eps, "original", int(round(0.01 / dt)), M=31)
            res.append(hydro.qhd_residual(fs, 0.01, eps))
        assert 3.0 <= res[0][0] / res[1][0] <= 5.0
        assert 3.0 <= res[0][1] / res[1][1] <= 5.0

    def test_wrong_eps_detected(self):
        eps = 0.5
        u = FourierField2D.from_modes({(0, 0): 1.0, (1, 0): 0.1, (0, 1): 0.2j, (1, 1): 0.1}, 3)
        _, fs, _ = nls.integrate_nls(u, 0.05, 1e-3, eps, "original", 10, M=31)
        right = hydro.qhd_residual(fs, 0.01, eps)
        wrong = hydro.qhd_residual(fs, 0.01, 0.55)
        assert max(right) < 1e-6 and max(wrong) > 1e-3


class TestConserved:
    def test_constant(self):
        mass, energy, mom = hydro.conserved_quantities(FourierField2D.from_modes({(0, 0): 1.0}, 1))
        assert mass == pytest.approx(TWO_PI2)
        assert energy == pytest.approx(0.5 * TWO_PI2)
        assert np.allclose(mom, 0.0)

    def test_plane_wave_momentum(self):
        m, eps, k = 2.0, 0.5, (2, 1)
        u = FourierField2D.from_modes({k: math.sqrt(m)}, 3)
        _, _, mom = hydro.conserved_quantities(u, eps)
        assert np.allclose(mom, TWO_PI2 * m * eps * np.array(k))

    def test_energy_matches_schrodinger_energy(self, rng):
        eps = 0.5
        u = bumpy(11, 0.02)
        g = u.to_physical(33)
        sp = hydro.Spectral(33)
        du = sp.grad(g)
        E = TWO_PI2 * np.mean(0.5 * eps**2 * np.sum(np.abs(du) ** 2, axis=0) + 0.5 * np.abs(g) ** 4)
        assert hydro.conserved_quantities(u, eps, M=33)[1] == pytest.approx(E / eps, rel=1e-10)

    def test_drift_along_solution(self):
        eps = 0.5
        u = FourierField2D.from_modes({(0, 0): 1.0, (1, 0): 0.1, (0, 1): 0.2j, (1, 1): 0.1}, 3)
        _, fs, _ = nls.integrate_nls(u, 0.05, 1e-3, eps, "original", 10, M=31)
        E0 = hydro.conserved_quantities(fs[0], eps)[1]
        E1 = hydro.conserved_quantities(fs[-1], eps)[1]
        assert abs(E1 - E0) / E0 < 1e-8


class TestEquivalence:
    def test_ms_norm_examples(self):
        const = hydro.madelung(FourierField2D.from_modes({(0, 0): 1.0}, 1))
        assert hydro.ms_norm(const, 2.0) == pytest.approx(1.0)
        pw = hydro.madelung(FourierField2D.from_modes({(1, 0): 1.0}, 1))
        assert hydro.ms_norm(pw, 2.0) == pytest.approx(2.0)
        pw4 = hydro.madelung(FourierField2D.from_modes({(1, 0): 2.0}, 1))
        assert hydro.ms_norm(pw4, 2.0, "sqrt-rho-current") == pytest.approx(4.0)
        with pytest.raises(ValueError):
            hydro.ms_norm(const, 2.0, "other")

    @given(st.floats(0.0, 0.3), st.sampled_from([1.0, 0.5, 0.25]))
    def test_ratio_window_near_the_circle(self, a, eps):
        rep = hydro.equivalence_report(hydro.perturbed_plane_wave(1.0, a), 1.0, 2.0, eps)
        assert rep.slack >= 0
        assert 0.5 <= rep.ratio <= 2.0 / eps
        assert rep.inverse == pytest.approx(1 / rep.ratio)

    def test_hypothesis_violated(self):
        with pytest.raises(HypothesisViolated) as e:
            hydro.equivalence_report(hydro.perturbed_plane_wave(1.0, 0.6))
        assert e.value.slack < 0

    def test_ratio_degenerates_near_vacuum(self):
        ratios = [hydro.equivalence_report(hydro.perturbed_plane_wave(1.0, a), check=False, M=513).ratio
                  for a in (0.6, 0.9, 0.98)]
        assert ratios[0] > ratios[1] > ratios[2] and ratios[2] < 0.05

    def test_report_json(self):
        rep = hydro.equivalence_report(hydro.perturbed_plane_wave(1.0, 0.02), variant="sqrt-rho-current")
        assert '"hs_over_ms"' in rep.to_json() and rep.variant == "sqrt-rho-current"
