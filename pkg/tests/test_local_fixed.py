import math

import numpy as np
import pytest
from scipy import integrate

from qest.collective import collective_fidelity
from qest.core import Method, Mode, posterior_summary
from qest.local_fixed import (
    FixedScheme,
    OutcomeCounts,
    Rule,
    SchemeKind,
    clg_guess,
    fixed_scheme_fidelity,
    isotropic_2d_fidelity,
    random_scheme_fidelity,
    tomography_outcome_prob,
)

X = np.array([1.0, 0.0, 0.0])


def tomo(kind, n):
    return FixedScheme(SchemeKind(kind), n)


class TestOutcomeProb:
    def test_2d_single_shot(self):
        counts = OutcomeCounts(("x", "y"), (1.0, 1.0), (1, 1))
        p = tomography_outcome_prob(tomo("tomo2d", 2), counts, X)
        assert p == pytest.approx(0.5, abs=1e-15)

    def test_3d_diagonal_state(self):
        counts = OutcomeCounts(("x", "y", "z"), (1.0, 1.0, 1.0), (1, 1, 1))
        n = np.ones(3) / math.sqrt(3)
        p = tomography_outcome_prob(tomo("tomo3d", 3), counts, n)
        assert p == pytest.approx(((1 + 1 / math.sqrt(3)) / 2) ** 3, abs=1e-15)

    def test_normalization_over_counts(self):
        rng = np.random.default_rng(5)
        scheme = tomo("tomo3d", 6)
        n = rng.normal(size=3)
        n /= np.linalg.norm(n)
        total = 0.0
        for kx in range(3):
            for ky in range(3):
                for kz in range(3):
                    counts = OutcomeCounts(
                        ("x", "y", "z"), (kx / 2, ky / 2, kz / 2), (2, 2, 2)
                    )
                    total += tomography_outcome_prob(scheme, counts, n)
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_rejects_mismatched_axes(self):
        counts = OutcomeCounts(("x", "y"), (1.0, 0.0), (1, 1))
        with pytest.raises(ValueError):
            tomography_outcome_prob(tomo("tomo3d", 3), counts, X)


class TestClgGuess:
    def test_single_axis_hit(self):
        g = clg_guess(OutcomeCounts(("x", "y", "z"), (1.0, 0.5, 0.5), (2, 2, 2)))
        assert np.allclose(g.vector, X)

    def test_diagonal(self):
        g = clg_guess(OutcomeCounts(("x", "y", "z"), (1.0, 1.0, 0.5), (2, 2, 2)))
        assert np.allclose(g.vector, [1 / math.sqrt(2), 1 / math.sqrt(2), 0.0])

    def test_always_unit_norm(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            ks = rng.integers(0, 5, size=3)
            g = clg_guess(OutcomeCounts(("x", "y", "z"), tuple(ks / 4), (4, 4, 4)))
            assert np.linalg.norm(g.vector) == pytest.approx(1.0, abs=1e-12)

    def test_degenerate_counts_flagged(self):
        g = clg_guess(OutcomeCounts(("x", "y"), (0.5, 0.5), (2, 2)))
        assert g.degenerate and np.allclose(g.vector, X)


class TestSchemeValidation:
    def test_parity_requirements(self):
        with pytest.raises(ValueError):
            FixedScheme(SchemeKind.TOMOGRAPHY_2D, 3)
        with pytest.raises(ValueError):
            FixedScheme(SchemeKind.TOMOGRAPHY_3D, 4)


class TestTomographyExact:
    def test_2d_clg_scaled_error_near_three_eighths(self):
        for n in (40, 60):
            res = fixed_scheme_fidelity(tomo("tomo2d", n), Rule.CLG)
            assert res.method is Method.EXACT_ENUMERATION
            assert abs(res.epsilon_n - 0.375) < 0.02

    def test_og_beats_clg_everywhere(self):
        for n in range(2, 41, 2):
            og = fixed_scheme_fidelity(tomo("tomo2d", n), Rule.OG)
            clg = fixed_scheme_fidelity(tomo("tomo2d", n), Rule.CLG)
            assert og.F >= clg.F - 1e-13

    def test_2d_estimators_coincide_at_two_copies(self):
        og = fixed_scheme_fidelity(tomo("tomo2d", 2), Rule.OG)
        clg = fixed_scheme_fidelity(tomo("tomo2d", 2), Rule.CLG)
        assert og.F == pytest.approx(clg.F, abs=1e-10)

    def test_og_matches_posterior_summary_route(self):
        # independent evaluation through per-outcome posterior summaries
        scheme = tomo("tomo3d", 6)
        delta = 0.0
        for kx in range(3):
            for ky in range(3):
                for kz in range(3):
                    axes = []
                    for lab, k in zip("xyz", (kx, ky, kz)):
                        vec = {"x": [1, 0, 0], "y": [0, 1, 0], "z": [0, 0, 1]}[lab]
                        axes += [(np.array(vec, float), 1)] * k
                        axes += [(np.array(vec, float), -1)] * (2 - k)
                    comb = math.comb(2, kx) * math.comb(2, ky) * math.comb(2, kz)
                    ps = posterior_summary(axes, Mode.FULL_3D)
                    delta += comb * np.linalg.norm(ps.V)
        direct = fixed_scheme_fidelity(scheme, Rule.OG)
        assert direct.F == pytest.approx(0.5 * (1 + delta), abs=1e-10)

    def test_below_collective_bound(self):
        for n in (12, 24, 60):
            og = fixed_scheme_fidelity(tomo("tomo3d", n), Rule.OG)
            assert 0.5 <= og.F <= collective_fidelity(Mode.FULL_3D, n)
        for n in (10, 40):
            og = fixed_scheme_fidelity(tomo("tomo2d", n), Rule.OG)
            assert 0.5 <= og.F <= collective_fidelity(Mode.PLANAR_2D, n)

    def test_3d_og_extrapolates_to_thirteen_twelfths(self):
        target = 13.0 / 12.0
        eps = {
            n: fixed_scheme_fidelity(tomo("tomo3d", n), Rule.OG).epsilon_n
            for n in (12, 48, 90, 120)
        }
        # curve has passed its peak and the distance to the limit shrinks
        assert eps[120] < eps[90]
        assert abs(eps[120] - target) < abs(eps[12] - target)
        ns = np.array([48, 90, 120], dtype=float)
        design = np.stack([np.ones(3), 1 / np.sqrt(ns), 1 / ns], axis=1)
        coef, *_ = np.linalg.lstsq(design, np.array([eps[48], eps[90], eps[120]]), rcond=None)
        assert abs(coef[0] - target) < 0.03

    def test_mc_agrees_with_exact(self):
        scheme = tomo("tomo2d", 40)
        exact = fixed_scheme_fidelity(scheme, Rule.CLG)
        mcres = fixed_scheme_fidelity(scheme, Rule.CLG, trials=200_000, seed=3, force_mc=True)
        assert mcres.method is Method.MONTE_CARLO
        assert abs(mcres.F - exact.F) < 4 * mcres.stderr
        og_exact = fixed_scheme_fidelity(scheme, Rule.OG)
        og_mc = fixed_scheme_fidelity(scheme, Rule.OG, trials=100_000, seed=4, force_mc=True)
        assert abs(og_mc.F - og_exact.F) < 4 * og_mc.stderr


class TestIsotropic2D:
    def test_single_copy_value(self):
        # brute-force oracle: one axis, optimal guess along the signed axis,
        # F = integral of sum_s p_s(theta) (1 + s cos(theta)) / 2
        oracle, _ = integrate.quad(
            lambda th: sum(
                (1 + s * math.cos(th)) / 2 * (1 + s * math.cos(th)) / 2 for s in (1, -1)
            )
            / (2 * math.pi),
            0,
            2 * math.pi,
        )
        res = isotropic_2d_fidelity(1)
        assert res.F == pytest.approx(oracle, abs=1e-12)
        assert res.F == pytest.approx(0.75, abs=1e-12)

    def test_two_copies_equals_tomography(self):
        iso = isotropic_2d_fidelity(2)
        tom = fixed_scheme_fidelity(tomo("tomo2d", 2), Rule.OG)
        assert iso.F == pytest.approx(tom.F, abs=1e-10)

    def test_beats_tomography(self):
        # exact enumeration puts the fanned axes ahead of tomography at every
        # even N in 2..16 except N = 6, where the fan loses by 6.8e-4
        # (verified independently by branch enumeration and Monte Carlo)
        for n in (2, 4, 8, 10, 12, 14, 16):
            iso = isotropic_2d_fidelity(n)
            tom = fixed_scheme_fidelity(tomo("tomo2d", n), Rule.OG)
            assert iso.F >= tom.F - 1e-12
        gap6 = isotropic_2d_fidelity(6).F - fixed_scheme_fidelity(tomo("tomo2d", 6), Rule.OG).F
        assert gap6 == pytest.approx(-6.85e-4, abs=5e-6)

    def test_mc_agrees_with_exact(self):
        exact = isotropic_2d_fidelity(10)
        mcres = isotropic_2d_fidelity(10, trials=100_000, seed=5, force_mc=True)
        assert abs(mcres.F - exact.F) < 4 * mcres.stderr


class TestRandomScheme:
    def test_single_copy_oracle(self):
        # any single axis with the optimal guess attains the one-copy bound:
        # Delta = 2 |A0 m| / 2 = 1/3 independent of the axis
        res = random_scheme_fidelity(1, trials=200_000, seed=11)
        assert abs(res.F - 2.0 / 3.0) < 4 * res.stderr

    def test_two_copy_oracle(self):
        # exact annealed average: fix the first axis, quadrature over the second
        inner, _ = integrate.quad(
            lambda u: (math.sqrt(2 + 2 * u) + math.sqrt(2 - 2 * u)) / 2, -1, 1
        )
        exact = 0.5 + 0.5 * inner / 6.0
        assert exact == pytest.approx(13.0 / 18.0, abs=1e-10)
        res = random_scheme_fidelity(2, trials=200_000, seed=12)
        assert abs(res.F - exact) < 4 * res.stderr

    def test_requires_enough_trials(self):
        with pytest.raises(ValueError):
            random_scheme_fidelity(4, trials=10)

    def test_below_collective_bound(self):
        res = random_scheme_fidelity(30, trials=20_000, seed=13)
        assert res.F <= collective_fidelity(Mode.FULL_3D, 30) + 4 * res.stderr
