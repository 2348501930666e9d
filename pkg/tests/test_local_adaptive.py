import math

import numpy as np
import pytest

from qest.collective import collective_fidelity
from qest.core import Mode, PosteriorSummary, posterior_summary, sample_prior
from qest.local_adaptive import (
    AdaptivePolicy,
    fit_angle_family_n4,
    greedy_fidelity_mc,
    greedy_next_axis,
    greedy_run,
    locc_optimize,
    one_step_adaptive,
    optimize_last_step_povm,
    _objective_factory,
    _pack,
    _greedy_warm_angles,
)

X = np.array([1.0, 0.0, 0.0])

F2 = (3 + math.sqrt(2)) / 6
F3 = (3 + math.sqrt(3)) / 6
F4 = (15 + math.sqrt(91)) / 30


def _tangency_value(post, m):
    return np.linalg.norm(post.V + post.A @ m) + np.linalg.norm(post.V - post.A @ m)


class TestGreedyNextAxis:
    def test_isotropic_start_uses_convention(self):
        post = posterior_summary([], Mode.FULL_3D)
        assert np.allclose(greedy_next_axis(post, Mode.FULL_3D), X)
        post2 = posterior_summary([], Mode.PLANAR_2D)
        assert np.allclose(greedy_next_axis(post2, Mode.PLANAR_2D), X)

    def test_second_axis_orthogonal_to_first(self):
        post = posterior_summary([(X, 1)], Mode.FULL_3D)
        m = greedy_next_axis(post, Mode.FULL_3D)
        assert abs(m @ X) < 1e-8

    def test_zero_moment_picks_top_eigenvector(self):
        rng = np.random.default_rng(21)
        for _ in range(5):
            evals = np.sort(rng.uniform(0.05, 0.5, 3))
            post = PosteriorSummary(p=float(evals.sum()), V=np.zeros(3), A=np.diag(evals))
            m = greedy_next_axis(post, Mode.FULL_3D)
            # oracle: dense direction sweep
            dirs = sample_prior(Mode.FULL_3D, rng, 10_000)
            vals = np.linalg.norm(dirs @ post.A + post.V, axis=1) + np.linalg.norm(
                dirs @ post.A - post.V, axis=1
            )
            assert _tangency_value(post, m) >= vals.max() - 1e-8
            top = np.zeros(3)
            top[np.argmax(evals)] = 1.0
            assert abs(m @ top) == pytest.approx(1.0, abs=1e-8)


class TestGreedyExact:
    def test_closed_forms(self):
        for n, expected in ((2, F2), (3, F3), (4, F4)):
            _, res = greedy_run(n, Mode.FULL_3D)
            assert res.F == pytest.approx(expected, abs=1e-12)

    def test_single_copy(self):
        _, res = greedy_run(1, Mode.FULL_3D)
        assert res.F == pytest.approx(2.0 / 3.0, abs=1e-12)

    def test_two_copy_branch_moduli(self):
        policy, _ = greedy_run(2, Mode.FULL_3D)
        for code in range(4):
            outcomes = (code & 1, (code >> 1) & 1)
            axes = [
                (policy.axis_for(()), 1 if outcomes[0] == 0 else -1),
                (policy.axis_for((outcomes[0],)), 1 if outcomes[1] == 0 else -1),
            ]
            ps = posterior_summary(axes, Mode.FULL_3D)
            assert np.linalg.norm(ps.V) == pytest.approx(math.sqrt(2) / 12, abs=1e-10)

    def test_two_copy_guess_formula(self):
        # optimal guess is the normalized sum of the two signed axes
        policy, _ = greedy_run(2, Mode.FULL_3D)
        for code in range(4):
            i1, i2 = code & 1, (code >> 1) & 1
            m1 = policy.signed_axis((i1,))
            m2 = policy.signed_axis((i1, i2))
            ps = posterior_summary([(m1, 1), (m2, 1)], Mode.FULL_3D)
            guess = ps.V / np.linalg.norm(ps.V)
            assert np.allclose(guess, (m1 + m2) / math.sqrt(2), atol=1e-9)

    def test_axes_orthogonal_and_outcome_independent_to_depth_three(self):
        policy, _ = greedy_run(3, Mode.FULL_3D)
        lvl1 = [policy.axis_for((i,)) for i in range(2)]
        lvl2 = [policy.axis_for((i, j)) for i in range(2) for j in range(2)]
        for a in lvl1 + lvl2:
            assert abs(a @ policy.axis_for(())) < 1e-9
        for a in lvl1[1:]:
            assert np.allclose(a, lvl1[0], atol=1e-9)
        for a in lvl2[1:]:
            assert np.allclose(a, lvl2[0], atol=1e-9)
        for a in lvl2:
            assert abs(a @ lvl1[0]) < 1e-9

    def test_four_copy_final_axes_orthogonal_to_running_guess(self):
        # the compact cross-product form is one member of an exactly
        # degenerate circle of optimal axes; check that the predicted axis is
        # optimal too and that the dispatched axis probes the plane
        # orthogonal to the three-outcome guess
        policy, _ = greedy_run(4, Mode.FULL_3D)
        for code in range(8):
            i1, i2, i3 = code & 1, (code >> 1) & 1, (code >> 2) & 1
            m1 = policy.signed_axis((i1,))
            m2 = policy.signed_axis((i1, i2))
            m3 = policy.signed_axis((i1, i2, i3))
            axes = [(m1, 1), (m2, 1), (m3, 1)]
            ps = posterior_summary(axes, Mode.FULL_3D)
            chosen = policy.axis_for((i1, i2, i3))
            predicted = (np.cross(m1, m3) + np.cross(m2, m3)) / math.sqrt(2)
            assert np.linalg.norm(predicted) == pytest.approx(1.0, abs=1e-12)
            assert _tangency_value(ps, predicted) == pytest.approx(
                _tangency_value(ps, chosen), abs=1e-10
            )
            guess = ps.V / np.linalg.norm(ps.V)
            assert abs(chosen @ guess) < 1e-8
            assert abs(predicted @ guess) < 1e-8

    def test_monotone_in_n(self):
        vals = []
        for n in range(1, 17):
            _, res = greedy_run(n, Mode.FULL_3D, policy_depth=0)
            vals.append(res.F)
            assert res.F <= collective_fidelity(Mode.FULL_3D, n) + 1e-12
        assert all(b > a for a, b in zip(vals, vals[1:]))

    def test_planar_values(self):
        _, r1 = greedy_run(1, Mode.PLANAR_2D)
        assert r1.F == pytest.approx(0.75, abs=1e-12)
        _, r2 = greedy_run(2, Mode.PLANAR_2D)
        assert r2.F == pytest.approx(collective_fidelity(Mode.PLANAR_2D, 2), abs=1e-12)

    def test_policy_json_round_trip(self):
        policy, _ = greedy_run(3, Mode.FULL_3D)
        clone = AdaptivePolicy.from_json(policy.to_json())
        assert clone.mode is policy.mode
        for key, ax in policy.axes.items():
            assert np.allclose(clone.axes[key], ax, atol=1e-12)

    def test_rejects_oversized(self):
        with pytest.raises(ValueError):
            greedy_run(21, Mode.FULL_3D)


class TestGreedyMonteCarlo:
    def test_matches_exact_small_n(self):
        _, exact = greedy_run(6, Mode.FULL_3D, policy_depth=0)
        est = greedy_fidelity_mc(6, Mode.FULL_3D, trials=16384, seed=2)
        assert abs(est.F - exact.F) < 4 * est.stderr

    def test_matches_exact_planar(self):
        _, exact = greedy_run(8, Mode.PLANAR_2D, policy_depth=0)
        est = greedy_fidelity_mc(8, Mode.PLANAR_2D, trials=16384, seed=3)
        assert abs(est.F - exact.F) < 4 * est.stderr


class TestLocc:
    def test_matches_greedy_up_to_three_copies(self):
        for n in (1, 2, 3):
            _, greedy = greedy_run(n, Mode.FULL_3D, policy_depth=0)
            sol = locc_optimize(n, restarts=2, seed=5)
            assert sol.F == pytest.approx(greedy.F, abs=1e-8)

    def test_gradient_matches_finite_differences(self):
        n = 3
        fun = _objective_factory(n, Mode.FULL_3D)
        rng = np.random.default_rng(9)
        x0 = _pack(_greedy_warm_angles(n, Mode.FULL_3D)) + rng.normal(
            scale=0.3, size=2 * (2**n - 2)
        )
        f0, g0 = fun(x0)
        for idx in (0, 3, 7):
            h = 1e-6
            xp = x0.copy()
            xp[idx] += h
            fp, _ = fun(xp)
            assert (fp - f0) / h == pytest.approx(g0[idx], abs=1e-5)

    def test_four_copy_family_fit(self):
        fit = fit_angle_family_n4()
        assert fit["F"] == pytest.approx(0.8206, abs=5e-4)
        assert fit["alpha"] == pytest.approx(0.502, abs=0.01)
        assert fit["beta"] == pytest.approx(0.584, abs=0.01)
        assert fit["gamma"] == pytest.approx(0.538, abs=0.01)

    def test_third_axis_orthogonal_to_two_copy_guess(self):
        # structural property of the four-copy family solution
        alpha = fit_angle_family_n4()["alpha"]
        ex = np.array([1.0, 0, 0])
        ey = np.array([0, 1.0, 0])
        for i1 in (0, 1):
            for i2 in (0, 1):
                m1 = (-1.0) ** i1 * ex
                m2 = (-1.0) ** i2 * ey
                u1 = np.cross(m1, m2)
                s = (m1 + m2) / math.sqrt(2)
                v1 = np.cross(u1, s)
                m3 = math.cos(alpha) * u1 + math.sin(alpha) * v1
                assert abs(m3 @ s) < 1e-6

    def test_rejects_oversized(self):
        with pytest.raises(ValueError):
            locc_optimize(7)


class TestOneStepAdaptive:
    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            one_step_adaptive(400, a=1.5)
        with pytest.raises(ValueError):
            one_step_adaptive(8, a=0.1)  # first stage would get < 3 copies
        with pytest.raises(ValueError):
            one_step_adaptive(400, lam=-1.0)

    def test_unit_scale_beats_neighbours_small(self):
        res = {
            lam: one_step_adaptive(100, a=0.5, lam=lam, trials=40_000, seed=8)
            for lam in (0.5, 1.0, 1.25)
        }
        assert res[1.0].F > res[0.5].F
        assert res[1.0].F > res[1.25].F

    def test_planar_variant_runs(self):
        res = one_step_adaptive(100, a=0.5, lam=1.0, trials=20_000, seed=9, mode=Mode.PLANAR_2D)
        assert 0.5 < res.F < 1.0

    def test_half_exponent_beats_extremes(self):
        res = {
            a: one_step_adaptive(400, a=a, lam=1.0, trials=50_000, seed=10)
            for a in (0.2, 0.5, 0.8)
        }
        assert res[0.5].F > res[0.2].F + 3 * (res[0.5].stderr + res[0.2].stderr)
        assert res[0.5].F > res[0.8].F + 3 * (res[0.5].stderr + res[0.8].stderr)


class TestLastStepPovm:
    @staticmethod
    def _random_posterior(rng, depth=3):
        axes = [
            (sample_prior(Mode.FULL_3D, rng), int(rng.choice([1, -1])))
            for _ in range(depth)
        ]
        return posterior_summary(axes, Mode.FULL_3D)

    def test_constraints_hold(self):
        rng = np.random.default_rng(31)
        post = self._random_posterior(rng)
        step = optimize_last_step_povm(post, R=4, restarts=3, seed=1)
        assert step.weights.sum() == pytest.approx(1.0, abs=1e-9)
        assert step.feasibility_defect <= 1e-9
        assert np.allclose(np.linalg.norm(step.axes, axis=1), 1.0, atol=1e-9)

    def test_two_outcome_case_reproduces_tangency(self):
        rng = np.random.default_rng(32)
        post = self._random_posterior(rng)
        step = optimize_last_step_povm(post, R=2, restarts=3, seed=2)
        m = greedy_next_axis(post, Mode.FULL_3D)
        greedy_val = 0.5 * _tangency_value(post, m)
        assert step.objective == pytest.approx(greedy_val, abs=1e-6)
        top = step.axes[np.argmax(step.weights)]
        assert abs(top @ m) == pytest.approx(1.0, abs=1e-6)

    def test_optimum_is_von_neumann(self):
        rng = np.random.default_rng(33)
        for _ in range(2):
            post = self._random_posterior(rng)
            step = optimize_last_step_povm(post, R=4, restarts=4, seed=3)
            support = step.support()
            assert len(support) == 2
            w = step.weights[support]
            assert np.allclose(w, 0.5, atol=1e-4)
            m1, m2 = step.axes[support]
            assert m1 @ m2 == pytest.approx(-1.0, abs=1e-6)

    def test_rejects_bad_r(self):
        rng = np.random.default_rng(34)
        post = self._random_posterior(rng)
        with pytest.raises(ValueError):
            optimize_last_step_povm(post, R=9)
