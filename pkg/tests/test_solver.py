"""ADMM solver pieces: data term, proximal maps, spectral factors, the loop."""

import math

import numpy as np
import pytest

import dtgv.solver as solver_mod
from dtgv.degradation import (DegradationConfig, degrade, gaussian_psf,
                              make_stripe_phantom, out_of_focus_psf)
from dtgv.errors import DivergenceError, DomainError, SingularFactorError
from dtgv.grids import ImageGrid, StackedField2, StackedField4
from dtgv.operators import (DirectionalSpec, make_blur_operator,
                            make_directional_operators,
                            make_forward_diff_spectra)
from dtgv.solver import (BlockVector, ProblemOperators, SolverConfig,
                         apply_constraint_operator, kl_divergence,
                         multiplier_update, objective, precompute_factors,
                         project_nonneg, prox_group2, prox_group4, prox_kl,
                         run_admm, solve_x_subproblem, tgv_config)

from oracles import (dense_directional, dense_h_matrix, prox_group_numeric,
                     prox_kl_numeric)


def build_ops(h, w, theta, a, psf=None):
    return ProblemOperators.build(h, w, DirectionalSpec(theta, a), psf=psf)


class TestKlDivergence:
    def test_zero_at_matching_data(self):
        rng = np.random.default_rng(0)
        b = rng.random((4, 4)) + 0.5
        gamma = np.full((4, 4), 0.1)
        assert kl_divergence(b - gamma, gamma, b) == pytest.approx(0.0, abs=1e-12)

    def test_zero_count_term_contributes_intensity(self):
        v = np.array([[0.7]])
        gamma = np.array([[0.3]])
        b = np.array([[0.0]])
        assert kl_divergence(v, gamma, b) == pytest.approx(1.0, abs=1e-14)

    def test_scalar_example(self):
        # b = 2 against intensity 1: 2*ln(2) + 1 - 2
        val = kl_divergence(np.array([[0.9]]), np.array([[0.1]]),
                            np.array([[2.0]]))
        assert val == pytest.approx(2.0 * math.log(2.0) - 1.0, abs=1e-12)

    def test_domain_errors(self):
        with pytest.raises(DomainError):
            kl_divergence(np.array([[-0.2]]), np.array([[0.1]]),
                          np.array([[1.0]]))
        with pytest.raises(DomainError):
            kl_divergence(np.array([[1.0]]), np.array([[0.1]]),
                          np.array([[-1.0]]))

    def test_nonnegative_on_random_draws(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            v = rng.random((3, 3)) + 0.05
            b = rng.random((3, 3)) * 2.0
            assert kl_divergence(v, 1e-3, b) >= -1e-12


class TestProxKl:
    def test_zero_count_closed_form(self):
        # with b = 0 the minimizer is d - lam/rho whenever that exceeds -gamma
        z = prox_kl(1.5, 0.0, 0.2, lam=2.0, rho=4.0)
        assert z == pytest.approx(1.5 - 0.5, abs=1e-12)

    def test_vanishing_fidelity_returns_target(self):
        z = prox_kl(0.7, 3.0, 0.1, lam=1e-12, rho=1.0)
        assert z == pytest.approx(0.7, abs=1e-6)

    def test_agrees_with_numeric_minimizer(self):
        # the spec's worked example is wrong on its own arithmetic; the
        # numeric minimizer is the authority for the expected value
        z = prox_kl(1.0, 2.0, 0.5, lam=1.0, rho=1.0)
        z_ref = prox_kl_numeric(1.0, 2.0, 0.5, 1.0, 1.0)
        assert z == pytest.approx(z_ref, abs=1e-8)
        assert z == pytest.approx(1.1861406616345072, abs=1e-12)

    def test_stationarity_and_feasibility_on_random_instances(self):
        rng = np.random.default_rng(2)
        for _ in range(1000):
            b = rng.uniform(0.0, 10.0)
            gamma = rng.uniform(1e-6, 1.0)
            d = rng.uniform(-2.0, 5.0)
            lam = rng.uniform(0.1, 100.0)
            rho = rng.uniform(0.1, 100.0)
            z = prox_kl(d, b, gamma, lam, rho)
            assert z + gamma > 0.0
            grad = lam * (1.0 - b / (z + gamma)) + rho * (z - d)
            assert abs(grad) <= 1e-6 * (lam + rho)

    def test_vectorized_matches_scalar(self):
        rng = np.random.default_rng(3)
        d = rng.uniform(-1, 3, (4, 5))
        b = rng.uniform(0, 5, (4, 5))
        z = prox_kl(d, b, 0.1, lam=2.0, rho=10.0)
        for idx in np.ndindex(4, 5):
            assert z[idx] == pytest.approx(
                prox_kl(float(d[idx]), float(b[idx]), 0.1, 2.0, 10.0), abs=1e-14)

    def test_negative_count_rejected(self):
        with pytest.raises(DomainError):
            prox_kl(0.5, -1.0, 0.1, 1.0, 1.0)


class TestGroupShrinkage:
    def test_small_vectors_collapse_to_zero(self):
        d = StackedField2(1, 1, np.array([0.3, 0.4]))
        out = prox_group2(d, 1.0)
        assert np.all(out.data == 0.0)

    def test_hand_evaluated_pair(self):
        d = StackedField2(1, 1, np.array([3.0, 4.0]))
        out = prox_group2(d, 1.0)
        assert np.allclose(out.data, [2.4, 3.2], atol=1e-14)
        ref = prox_group_numeric(np.array([3.0, 4.0]), 1.0)
        assert np.allclose(out.data, ref, atol=1e-8)

    def test_never_flips_direction(self):
        rng = np.random.default_rng(4)
        d = rng.standard_normal((2, 6, 6))
        out = prox_group2(d, 0.4)
        assert np.all(out * d >= 0.0)

    def test_matches_numeric_minimizer_2d_and_4d(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            c = rng.uniform(0.05, 2.0)
            d2 = rng.standard_normal(2) * 2.0
            out2 = prox_group2(d2.reshape(2, 1, 1), c)[:, 0, 0]
            assert np.allclose(out2, prox_group_numeric(d2, c), atol=1e-8)
            d4 = rng.standard_normal(4) * 2.0
            out4 = prox_group4(d4.reshape(4, 1, 1), c)[:, 0, 0]
            assert np.allclose(out4, prox_group_numeric(d4, c), atol=1e-8)

    def test_firm_nonexpansion(self):
        rng = np.random.default_rng(6)
        for _ in range(100):
            d1 = rng.standard_normal((2, 4, 4))
            d2 = rng.standard_normal((2, 4, 4))
            p1 = prox_group2(d1, 0.7)
            p2 = prox_group2(d2, 0.7)
            assert np.linalg.norm(p1 - p2) <= np.linalg.norm(d1 - d2) + 1e-12

    def test_typed_four_stack(self):
        d = StackedField4(1, 1, np.array([1.0, 1.0, 1.0, 1.0]))
        out = prox_group4(d, 1.0)
        assert np.allclose(out.data, 0.5, atol=1e-14)

    def test_nonpositive_constant_rejected(self):
        with pytest.raises(ValueError):
            prox_group2(np.zeros((2, 2, 2)), 0.0)


class TestProjection:
    def test_nonnegative_unchanged(self):
        d = np.array([[0.0, 2.0], [1.0, 0.5]])
        assert np.array_equal(project_nonneg(d), d)

    def test_clips_negatives(self):
        assert np.array_equal(project_nonneg(np.array([-1.0, 2.0])),
                              np.array([0.0, 2.0]))

    def test_idempotent(self):
        rng = np.random.default_rng(7)
        d = rng.standard_normal((5, 5))
        once = project_nonneg(d)
        assert np.array_equal(project_nonneg(once), once)


class TestSpectralFactors:
    def test_zero_frequency_values_for_normalized_psf(self):
        psf = gaussian_psf(1.0, 3)
        ops = build_ops(6, 6, math.pi / 3, 1.0, psf=psf)
        f = precompute_factors(ops.blur, ops.grad.d_theta, ops.grad.d_perp)
        assert f.gamma_diag[0, 0] == pytest.approx(2.0, abs=1e-12)
        assert f.psi11[0, 0] == pytest.approx(1.0, abs=1e-12)
        assert f.psi12[0, 0] == pytest.approx(0.0, abs=1e-12)
        assert f.xi_inv[0, 0] == pytest.approx(0.5, abs=1e-12)
        assert f.ups11[0, 0] == pytest.approx(1.0, abs=1e-12)

    def test_reassembled_inverse_on_all_frequencies(self):
        rng = np.random.default_rng(8)
        kern = rng.random((3, 3))
        kern /= kern.sum()
        ops = build_ops(4, 4, math.pi / 3, 1.7, psf=make_psf(kern))
        f = precompute_factors(ops.blur, ops.grad.d_theta, ops.grad.d_perp)
        st, sp = f.dtheta.ravel(), f.dperp.ravel()
        sa = ops.blur.spectrum.ravel()
        for k in range(st.size):
            fwd = np.array([
                [1 + abs(sa[k])**2 + abs(st[k])**2 + abs(sp[k])**2,
                 -np.conj(st[k]), -np.conj(sp[k])],
                [-st[k], 1 + abs(st[k])**2 + 0.5 * abs(sp[k])**2,
                 0.5 * np.conj(sp[k]) * st[k]],
                [-sp[k], 0.5 * np.conj(st[k]) * sp[k],
                 1 + 0.5 * abs(st[k])**2 + abs(sp[k])**2],
            ])
            inv = np.linalg.inv(fwd)
            r1 = np.array([f.xi_inv.ravel()[k],
                           f.xi_inv.ravel()[k] * (np.conj(st[k]) * f.psi11.ravel()[k]
                                                  + np.conj(sp[k]) * f.psi21.ravel()[k]),
                           f.xi_inv.ravel()[k] * (np.conj(st[k]) * f.psi12.ravel()[k]
                                                  + np.conj(sp[k]) * f.psi22.ravel()[k])])
            g = f.gamma_diag.ravel()[k]
            r2 = np.array([(f.ups11.ravel()[k] * st[k] + f.ups12.ravel()[k] * sp[k]) / g,
                           f.ups11.ravel()[k], f.ups12.ravel()[k]])
            r3 = np.array([(f.ups21.ravel()[k] * st[k] + f.ups22.ravel()[k] * sp[k]) / g,
                           f.ups21.ravel()[k], f.ups22.ravel()[k]])
            assert np.allclose(np.vstack([r1, r2, r3]), inv, atol=1e-8)

    def test_axis_aligned_factors_match_plain_construction(self):
        ops = build_ops(6, 6, 0.0, 1.0)
        f = precompute_factors(ops.blur, ops.grad.d_theta, ops.grad.d_perp)
        d_h, d_v = make_forward_diff_spectra(6, 6)
        fd = precompute_factors(ops.blur, d_h, d_v)
        for name in ("gamma_diag", "psi11", "psi12", "psi21", "psi22",
                     "xi_inv", "ups11", "ups12", "ups21", "ups22"):
            assert np.array_equal(getattr(f, name), getattr(fd, name))


def make_psf(weights):
    from dtgv.degradation import PsfKernel
    return PsfKernel(np.asarray(weights, dtype=np.float64))


class TestXSubproblem:
    def _random_blocks(self, rng, h, w):
        return BlockVector(rng.standard_normal((h, w)),
                           rng.standard_normal((2, h, w)),
                           rng.standard_normal((4, h, w)),
                           rng.standard_normal((h, w)))

    def test_consistent_data_recovered(self):
        rng = np.random.default_rng(9)
        h = w = 6
        theta, a = math.pi / 5, 1.3
        ops = build_ops(h, w, theta, a, psf=gaussian_psf(1.0, 3))
        f = precompute_factors(ops.blur, ops.grad.d_theta, ops.grad.d_perp)
        u0 = rng.standard_normal((h, w))
        w0 = rng.standard_normal((2, h, w))
        v = apply_constraint_operator(u0, w0, ops)
        u_hat, w_hat = solve_x_subproblem(v, f, ops)
        assert np.allclose(u_hat, u0, atol=1e-8)
        assert np.allclose(w_hat, w0, atol=1e-8)

    def test_zero_input_zero_output(self):
        ops = build_ops(4, 4, 0.3, 1.0)
        f = precompute_factors(ops.blur, ops.grad.d_theta, ops.grad.d_perp)
        u, w = solve_x_subproblem(BlockVector.zeros(4, 4), f, ops)
        assert np.allclose(u, 0.0, atol=1e-14)
        assert np.allclose(w, 0.0, atol=1e-14)

    @pytest.mark.parametrize("theta,a", [(0.0, 1.0), (math.pi / 6, 1.0),
                                         (math.pi / 3, 2.0)])
    def test_matches_dense_normal_equations(self, theta, a):
        rng = np.random.default_rng(int(theta * 100) + int(a))
        h = w = 8
        kern = rng.random((3, 3))
        kern /= kern.sum()
        ops = build_ops(h, w, theta, a, psf=make_psf(kern))
        f = precompute_factors(ops.blur, ops.grad.d_theta, ops.grad.d_perp)
        H = dense_h_matrix(h, w, theta, a, blur_weights=kern)
        for _ in range(5):
            v = self._random_blocks(rng, h, w)
            x_dense = np.linalg.solve(H.T @ H, H.T @ v.to_flat())
            u_hat, w_hat = solve_x_subproblem(v, f, ops)
            x_spec = np.concatenate([u_hat.ravel(order="F"),
                                     w_hat[0].ravel(order="F"),
                                     w_hat[1].ravel(order="F")])
            rel = np.linalg.norm(x_spec - x_dense) / np.linalg.norm(x_dense)
            assert rel <= 1e-8


class TestConstraintOperatorAndMultiplier:
    def test_matches_dense_blocks(self):
        rng = np.random.default_rng(10)
        h = w = 8
        theta, a = math.pi / 7, 0.6
        kern = rng.random((3, 3))
        kern /= kern.sum()
        ops = build_ops(h, w, theta, a, psf=make_psf(kern))
        u = rng.standard_normal((h, w))
        wst = rng.standard_normal((2, h, w))
        hx = apply_constraint_operator(u, wst, ops)
        H = dense_h_matrix(h, w, theta, a, blur_weights=kern)
        x = np.concatenate([u.ravel(order="F"), wst[0].ravel(order="F"),
                            wst[1].ravel(order="F")])
        assert np.allclose(hx.to_flat(), H @ x, atol=1e-10)

    def test_feasible_point_leaves_multiplier_unchanged(self):
        rng = np.random.default_rng(11)
        ops = build_ops(6, 6, 0.4, 1.0)
        u = rng.standard_normal((6, 6))
        wst = rng.standard_normal((2, 6, 6))
        z = apply_constraint_operator(u, wst, ops)
        mu = BlockVector.zeros(6, 6)
        mu2 = multiplier_update(mu, u, wst, z, ops)
        assert mu2.norm() == pytest.approx(0.0, abs=1e-10)

    def test_zero_state_gives_constraint_blocks(self):
        rng = np.random.default_rng(12)
        ops = build_ops(6, 6, 0.4, 1.0)
        u = rng.standard_normal((6, 6))
        wst = rng.standard_normal((2, 6, 6))
        mu2 = multiplier_update(BlockVector.zeros(6, 6), u, wst,
                                BlockVector.zeros(6, 6), ops)
        hx = apply_constraint_operator(u, wst, ops)
        assert np.allclose(mu2.to_flat(), hx.to_flat(), atol=1e-12)

    def test_random_update_matches_direct_evaluation(self):
        rng = np.random.default_rng(13)
        ops = build_ops(5, 7, -0.8, 1.4)
        u = rng.standard_normal((5, 7))
        wst = rng.standard_normal((2, 5, 7))
        z = BlockVector(rng.standard_normal((5, 7)),
                        rng.standard_normal((2, 5, 7)),
                        rng.standard_normal((4, 5, 7)),
                        rng.standard_normal((5, 7)))
        mu = BlockVector(rng.standard_normal((5, 7)),
                         rng.standard_normal((2, 5, 7)),
                         rng.standard_normal((4, 5, 7)),
                         rng.standard_normal((5, 7)))
        out = multiplier_update(mu, u, wst, z, ops)
        expect = mu.to_flat() + apply_constraint_operator(u, wst, ops).to_flat() \
            - z.to_flat()
        assert np.allclose(out.to_flat(), expect, atol=1e-12)


class TestObjective:
    def _setup(self, theta=0.5, a=1.0, h=16, w=16, seed=14):
        rng = np.random.default_rng(seed)
        ops = build_ops(h, w, theta, a, psf=gaussian_psf(1.0, 3))
        u = ImageGrid.from_matrix(rng.random((h, w)) + 0.2)
        return rng, ops, u

    def test_exact_data_leaves_only_regularizer(self):
        from dtgv.operators import apply_grad, apply_sym_derivative, norm21_4
        rng, ops, u = self._setup()
        b = ops.blur.apply(u)
        gamma = 1e-8
        w = apply_grad(u, ops.grad)
        config = SolverConfig(lam=3.0, theta=0.5, a=1.0, gamma=gamma)
        got = objective(u, w, ImageGrid(16, 16, b.data + gamma), config, ops)
        expect = config.alpha1 * norm21_4(apply_sym_derivative(w, ops.grad))
        assert got == pytest.approx(expect, rel=1e-9, abs=1e-9)

    def test_monotone_in_lambda_for_fixed_point(self):
        rng, ops, u = self._setup(seed=15)
        b = ImageGrid(16, 16, np.maximum(u.data + 0.1 * rng.standard_normal(256),
                                         0.0))
        w = StackedField2(16, 16, rng.standard_normal(512))
        small = objective(u, w, b, SolverConfig(lam=0.1, theta=0.5), ops)
        large = objective(u, w, b, SolverConfig(lam=10.0, theta=0.5), ops)
        assert large > small

    def test_affine_directional_ramp_second_term_is_kink_only(self):
        # a ramp along the perpendicular axis is piecewise affine on the
        # periodic grid: its second differences vanish except at wrap kinks,
        # whose contribution an explicit loop oracle accounts for exactly
        from dtgv.operators import apply_grad, apply_sym_derivative
        h = w = 16
        ops = build_ops(h, w, 0.0, 1.0)
        img = np.tile(np.arange(h, dtype=np.float64)[:, None] / h, (1, w))
        u = ImageGrid.from_matrix(img)
        wfield = apply_grad(u, ops.grad)
        y = apply_sym_derivative(wfield, ops.grad).to_stack()
        # interior rows (away from the wrap kink at the last two rows) vanish
        assert np.allclose(y[:, 1:h - 2, :], 0.0, atol=1e-12)
        # the alpha0 term is exactly zero because w equals the gradient
        config = SolverConfig(lam=1.0, theta=0.0, gamma=1e-6)
        b = ImageGrid(h, w, ops.blur.apply(u).data + 1e-6)
        total = objective(u, wfield, b, config, ops)
        from dtgv.operators import norm21_4
        assert total == pytest.approx(
            config.alpha1 * norm21_4(apply_sym_derivative(wfield, ops.grad)),
            rel=1e-9)


class TestRunAdmm:
    def _phantom_problem(self, size=32, theta_deg=30.0, snr=43.0, seed=0,
                         radius=2.0):
        theta = math.radians(theta_deg)
        ph = make_stripe_phantom(size, size, theta, num_stripes=6, seed=3)
        psf = out_of_focus_psf(radius, 2 * int(math.ceil(radius)) + 1)
        blur = make_blur_operator(psf, size, size)
        b, _ = degrade(ph, DegradationConfig(psf=psf, target_snr=snr,
                                             seed=seed), blur)
        ops = ProblemOperators(blur, make_directional_operators(
            size, size, DirectionalSpec(theta, 1.0)))
        return ph, b, ops, theta

    def test_coarse_tolerance_stops_immediately(self):
        ph, b, ops, theta = self._phantom_problem()
        config = SolverConfig(lam=10.0, theta=theta, tol=0.5, k_max=50)
        _, report = run_admm(b, config, ops)
        assert report.stop_reason == "tolerance"
        assert report.iterations == 1
        assert report.relative_change[-1] < 0.5

    def test_identity_blur_converges_with_small_residual(self):
        size = 64
        theta = math.radians(30.0)
        ph = make_stripe_phantom(size, size, theta, profile="constant",
                                 num_stripes=8, seed=3)
        rng = np.random.default_rng(5)
        noisy = np.maximum(
            ph.to_matrix() + 0.02 * rng.standard_normal((size, size)), 0.0)
        config = SolverConfig(lam=30.0, theta=theta, tol=1e-9, k_max=500)
        u, report = run_admm(noisy, config)  # operators default to identity blur
        assert report.iterations <= 500
        assert report.final_residual_normalized <= 1e-3
        assert report.final_objective <= report.objective[0]

    def test_report_lengths_match_iterations(self):
        ph, b, ops, theta = self._phantom_problem()
        config = SolverConfig(lam=20.0, theta=theta, tol=1e-3, k_max=40)
        _, report = run_admm(b, config, ops, reference=ph)
        n = report.iterations
        assert len(report.objective) == n
        assert len(report.primal_residual) == n
        assert len(report.relative_change) == n
        assert len(report.seconds) == n
        assert len(report.rmse_history) == n

    def test_axis_aligned_run_is_bit_identical_to_tgv_mode(self):
        ph, b, ops_unused, _ = self._phantom_problem()
        config_a = SolverConfig(lam=15.0, theta=0.0, a=1.0, tol=1e-12,
                                k_max=10)
        config_b = tgv_config(15.0, tol=1e-12, k_max=10)
        snaps_a, snaps_b = [], []
        run_admm(b, config_a,
                 callback=lambda k, u, w, z, mu: snaps_a.append(u.copy()))
        run_admm(b, config_b,
                 callback=lambda k, u, w, z, mu: snaps_b.append(u.copy()))
        assert len(snaps_a) == len(snaps_b) == 10
        for ua, ub in zip(snaps_a, snaps_b):
            assert np.array_equal(ua, ub)

    def test_divergence_detection(self, monkeypatch):
        ph, b, ops, theta = self._phantom_problem()

        def bad_prox(d, b_, gamma, lam, rho):
            out = np.asarray(d, dtype=np.float64).copy()
            out.flat[0] = np.nan
            return out

        monkeypatch.setattr(solver_mod, "prox_kl", bad_prox)
        config = SolverConfig(lam=10.0, theta=theta, k_max=5)
        with pytest.raises(DivergenceError, match="iteration 1"):
            run_admm(b, config, ops)

    def test_negative_observation_rejected(self):
        config = SolverConfig(lam=1.0)
        with pytest.raises(DomainError):
            run_admm(np.array([[-0.1, 0.2], [0.3, 0.4]]), config)

    def test_report_csv_round_trip(self, tmp_path):
        ph, b, ops, theta = self._phantom_problem()
        config = SolverConfig(lam=20.0, theta=theta, tol=1e-3, k_max=30)
        _, report = run_admm(b, config, ops)
        path = tmp_path / "report.csv"
        report.to_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "iteration,objective,residual,relative_change,seconds"
        assert len(lines) == report.iterations + 1
        first = lines[1].split(",")
        assert int(first[0]) == 1
        assert float(first[1]) == report.objective[0]

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SolverConfig(lam=-1.0)
        with pytest.raises(ValueError):
            SolverConfig(lam=1.0, alpha0=1.5)
        with pytest.raises(ValueError):
            SolverConfig(lam=1.0, tol=2.0)
        with pytest.raises(ValueError):
            SolverConfig(lam=1.0, gamma=0.0)


@pytest.fixture(scope="module")
def long_run():
    size = 64
    theta = math.radians(30.0)
    ph = make_stripe_phantom(size, size, theta, num_stripes=8, seed=3)
    psf = out_of_focus_psf(5.0, 11)
    blur = make_blur_operator(psf, size, size)
    b, _ = degrade(ph, DegradationConfig(psf=psf, target_snr=43.0, seed=2),
                   blur)
    ops = ProblemOperators(blur, make_directional_operators(
        size, size, DirectionalSpec(theta, 1.0)))
    config = SolverConfig(lam=50.0, theta=theta, tol=1e-9, k_max=400)
    u, report = run_admm(b, config, ops, reference=ph)
    return u, report


class TestSolverInvariants:
    def test_residual_bounded_and_running_min_improves(self, long_run):
        _, report = long_run
        resid = np.asarray(report.primal_residual)
        assert np.all(np.isfinite(resid))
        window = 100
        for start in range(0, len(resid) - window, window):
            before = resid[:start + 1].min() if start else resid[0]
            after = resid[:start + window].min()
            assert after < before or after == pytest.approx(before)
            assert resid[:start + window].min() <= resid[:start + 1].min()

    def test_limit_iterate_nearly_nonnegative(self, long_run):
        u, report = long_run
        m = u.to_matrix()
        assert m.min() >= -1e-3 * m.max()
        assert report.max_negativity <= 1e-3 * m.max()

    def test_objective_not_above_initialization(self, long_run):
        _, report = long_run
        assert report.final_objective <= report.objective[0]
