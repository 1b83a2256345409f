import numpy as np
import pytest

import oracles
from tascov import estimator, linalg, simulation, targets
from tascov.errors import DomainError, InconsistentTable

TOL_NORM = linalg.POSTERIOR_NORMALIZATION_TOL
TOL_ROUTE = linalg.ROUTE_EQUIVALENCE_TOL


def wrap(matrix, label="D"):
    return targets.ShrinkageTarget(label, matrix, f"external:{label}")


def toy_instance(p=2, n=5, seed=1):
    rng = np.random.default_rng(seed)
    x = targets.DataMatrix(rng.standard_normal((p, n)))
    return targets.sample_covariance(x), n


class TestAlphaGrid:
    def test_equispaced_default(self):
        grid = estimator.AlphaGrid.equispaced(0.01)
        assert len(grid) == 99
        assert grid.values[0] == pytest.approx(0.01)
        assert grid.values[-1] == pytest.approx(0.99)

    @pytest.mark.parametrize("step,count", [(0.2, 4), (0.1, 9), (0.05, 19), (0.01, 99)])
    def test_cardinality(self, step, count):
        assert len(estimator.AlphaGrid.equispaced(step)) == count

    def test_coarser_grid_is_subset(self):
        coarse = estimator.AlphaGrid.equispaced(0.1).values
        fine = estimator.AlphaGrid.equispaced(0.05).values
        for value in coarse:
            assert np.min(np.abs(fine - value)) < 1e-12

    def test_invalid_grids_rejected(self):
        with pytest.raises(DomainError):
            estimator.AlphaGrid(np.array([0.0, 0.5]))
        with pytest.raises(DomainError):
            estimator.AlphaGrid(np.array([0.5, 0.5]))
        with pytest.raises(DomainError):
            estimator.AlphaGrid(np.array([]))
        with pytest.raises(DomainError):
            estimator.AlphaGrid.equispaced(0.3)


class TestReparametrise:
    def test_reference_values(self):
        delta = np.eye(3)
        params = estimator.reparametrise(0.5, delta, 10)
        assert params.nu == pytest.approx(14.0)
        np.testing.assert_allclose(params.psi, 10.0 * delta)

    def test_round_trip(self):
        delta = np.array([[2.0, 0.3], [0.3, 1.0]])
        fwd = estimator.reparametrise(0.37, delta, 21)
        back = estimator.reparametrise_inverse(fwd.nu, fwd.psi, 21)
        assert back.alpha == pytest.approx(0.37, rel=1e-12)
        np.testing.assert_allclose(back.delta, delta, rtol=1e-12)

    def test_small_alpha_limit(self):
        delta = np.eye(4)
        params = estimator.reparametrise(1e-12, delta, 50)
        assert params.nu == pytest.approx(5.0, abs=1e-9)
        assert np.max(np.abs(params.psi)) < 1e-9

    def test_alpha_domain(self):
        with pytest.raises(DomainError):
            estimator.reparametrise(1.0, np.eye(2), 5)


class TestLogMarginalLikelihood:
    @pytest.mark.parametrize("alpha", [0.1, 0.5, 0.9])
    @pytest.mark.parametrize("delta", [1.0, 2.5])
    def test_scalar_quadrature_oracle(self, alpha, delta):
        value = estimator.log_marginal_likelihood(
            np.array([[1.0]]), 2, alpha, np.array([[delta]])
        )
        assert value == pytest.approx(
            oracles.quad_log_ml_p1(1.0, 2, alpha, delta), abs=1e-6
        )

    def test_scaling_identity(self):
        s, n = toy_instance(3, 8)
        delta = linalg.symmetrize(np.eye(3) + 0.2)
        c = 1.7
        base = estimator.log_marginal_likelihood(s, n, 0.4, delta)
        scaled = estimator.log_marginal_likelihood(
            c ** 2 * s, n, 0.4, c ** 2 * delta
        )
        assert scaled == pytest.approx(base - n * 3 * np.log(c), rel=1e-12)

    def test_monte_carlo_oracle_small(self):
        s, n = toy_instance(2, 5)
        delta = np.array([[1.0, 0.2], [0.2, 1.5]])
        value = estimator.log_marginal_likelihood(s, n, 0.5, delta)
        mc, log_se = oracles.mc_log_ml(s, n, 0.5, delta, draws=200_000, seed=4)
        assert abs(value - mc) <= 3 * log_se

    def test_sufficiency_in_s_and_n(self):
        # Two different data sets with the same S and n give identical values.
        s, n = toy_instance(2, 6)
        delta = np.eye(2)
        a = estimator.log_marginal_likelihood(s, n, 0.3, delta)
        b = estimator.log_marginal_likelihood(s.copy(), n, 0.3, delta)
        assert a == b

    def test_alpha_domain(self):
        with pytest.raises(DomainError):
            estimator.log_marginal_likelihood(np.eye(2), 5, 0.0, np.eye(2))


class TestPosteriorGrid:
    def test_single_cell(self):
        s, n = toy_instance()
        grid = estimator.AlphaGrid(np.array([0.5]))
        ts = targets.TargetSet((wrap(np.eye(2)),))
        table = estimator.posterior_grid(s, n, grid, ts)
        np.testing.assert_allclose(table.post_prob, [[1.0]])

    def test_duplicate_targets_split_mass(self):
        s, n = toy_instance()
        grid = estimator.AlphaGrid.equispaced(0.1)
        ts = targets.TargetSet((wrap(np.eye(2), "a"), wrap(np.eye(2), "b")))
        table = estimator.posterior_grid(s, n, grid, ts)
        sums = table.post_prob.sum(axis=0)
        np.testing.assert_allclose(sums, [0.5, 0.5], atol=TOL_NORM)

    def test_normalisation(self):
        s, n = toy_instance(4, 10)
        grid = estimator.AlphaGrid.equispaced(0.05)
        ts = targets.build_default_target_set(s)
        table = estimator.posterior_grid(s, n, grid, ts)
        assert abs(table.post_prob.sum() - 1.0) <= TOL_NORM

    def test_matches_extended_precision_enumeration(self):
        s, n = toy_instance(2, 5)
        alphas = [0.2, 0.5, 0.8]
        deltas = [np.eye(2), np.array([[1.0, 0.4], [0.4, 1.0]])]
        grid = estimator.AlphaGrid(np.array(alphas))
        ts = targets.TargetSet(tuple(wrap(d, f"D{i}") for i, d in enumerate(deltas)))
        table = estimator.posterior_grid(s, n, grid, ts)
        post_ref, _, _ = oracles.mp_posterior_enumeration(s, n, alphas, deltas)
        np.testing.assert_allclose(table.post_prob, post_ref, atol=1e-10)

    def test_nonuniform_prior_validation(self):
        s, n = toy_instance()
        grid = estimator.AlphaGrid(np.array([0.3, 0.6]))
        ts = targets.TargetSet((wrap(np.eye(2)),))
        with pytest.raises(DomainError):
            estimator.posterior_grid(s, n, grid, ts, alpha_prior=[0.7, 0.7])
        table = estimator.posterior_grid(s, n, grid, ts, alpha_prior=[1.0, 0.0])
        np.testing.assert_allclose(table.post_prob[:, 0], [1.0, 0.0], atol=TOL_NORM)


class TestTasEstimate:
    def test_single_cell_reduces_to_sts(self):
        s, n = toy_instance()
        delta = wrap(np.array([[2.0, 0.1], [0.1, 1.0]]))
        grid = estimator.AlphaGrid(np.array([0.35]))
        ts = targets.TargetSet((delta,))
        fit = estimator.tas_estimate(estimator.posterior_grid(s, n, grid, ts), s, ts)
        np.testing.assert_allclose(
            fit.sigma_hat, estimator.sts_estimate(s, delta, 0.35), atol=1e-14
        )

    def test_route_equivalence_direct_sum(self):
        s, n = toy_instance(3, 7, seed=5)
        grid = estimator.AlphaGrid.equispaced(0.1)
        ts = targets.build_default_target_set(s, kinds=("T1", "T2", "T4"))
        table = estimator.posterior_grid(s, n, grid, ts)
        fit = estimator.tas_estimate(table, s, ts)
        direct = np.zeros_like(s)
        for k, alpha in enumerate(grid.values):
            for ell, target in enumerate(ts):
                cell = alpha * target.matrix + (1 - alpha) * s
                direct += table.post_prob[k, ell] * cell
        assert np.max(np.abs(direct - fit.sigma_hat)) <= TOL_ROUTE

    def test_matches_extended_precision_enumeration(self):
        s, n = toy_instance(2, 5)
        alphas = [0.2, 0.5, 0.8]
        deltas = [np.eye(2), np.array([[1.0, 0.4], [0.4, 1.0]])]
        grid = estimator.AlphaGrid(np.array(alphas))
        ts = targets.TargetSet(tuple(wrap(d, f"D{i}") for i, d in enumerate(deltas)))
        fit = estimator.tas_estimate(estimator.posterior_grid(s, n, grid, ts), s, ts)
        _, w_ref, sigma_ref = oracles.mp_posterior_enumeration(s, n, alphas, deltas)
        np.testing.assert_allclose(fit.target_weights, w_ref, atol=1e-10)
        np.testing.assert_allclose(fit.sigma_hat, sigma_ref, atol=1e-10)

    def test_weight_budget(self):
        s, n = toy_instance(4, 9, seed=3)
        grid = estimator.AlphaGrid.equispaced(0.05)
        ts = targets.build_default_target_set(s)
        fit = estimator.tas_estimate(estimator.posterior_grid(s, n, grid, ts), s, ts)
        assert np.all(fit.target_weights >= 0.0)
        assert float(np.sum(fit.target_weights)) <= float(grid.values[-1])
        assert fit.sample_weight > 0.0
        assert float(np.sum(fit.target_weights)) + fit.sample_weight == pytest.approx(
            1.0, abs=TOL_NORM
        )

    def test_duplicate_target_invariance(self):
        # Splitting one target's prior mass over two copies leaves the
        # estimate unchanged.
        s, n = toy_instance(3, 8, seed=7)
        grid = estimator.AlphaGrid.equispaced(0.1)
        base = targets.build_default_target_set(s, kinds=("T1", "T3"))
        dup = base.with_target(wrap(base.targets[0].matrix, "T1-copy"))
        fit_base = estimator.tas_estimate(
            estimator.posterior_grid(s, n, grid, base), s, base
        )
        fit_dup = estimator.tas_estimate(
            estimator.posterior_grid(
                s, n, grid, dup, target_prior=[0.25, 0.5, 0.25]
            ),
            s,
            dup,
        )
        assert np.max(np.abs(fit_base.sigma_hat - fit_dup.sigma_hat)) <= TOL_ROUTE

    def test_scaling_equivariance(self):
        s, n = toy_instance(3, 8, seed=11)
        grid = estimator.AlphaGrid.equispaced(0.1)
        mats = [np.eye(3), linalg.symmetrize(np.eye(3) + 0.1)]
        c2 = 2.3 ** 2
        ts = targets.TargetSet(tuple(wrap(m, f"D{i}") for i, m in enumerate(mats)))
        ts_scaled = targets.TargetSet(
            tuple(wrap(c2 * m, f"D{i}") for i, m in enumerate(mats))
        )
        table = estimator.posterior_grid(s, n, grid, ts)
        table_scaled = estimator.posterior_grid(c2 * s, n, grid, ts_scaled)
        np.testing.assert_allclose(
            table.post_prob, table_scaled.post_prob, atol=1e-10
        )
        fit = estimator.tas_estimate(table, s, ts)
        fit_scaled = estimator.tas_estimate(table_scaled, c2 * s, ts_scaled)
        np.testing.assert_allclose(
            fit_scaled.sigma_hat, c2 * fit.sigma_hat, rtol=1e-9
        )

    def test_incremental_target_update(self):
        # Adding one target needs only K new likelihoods; merging them with
        # the old table must reproduce the full recomputation.
        s, n = toy_instance(3, 9, seed=13)
        grid = estimator.AlphaGrid.equispaced(0.1)
        base = targets.build_default_target_set(s, kinds=("T1", "T3"))
        extra = wrap(linalg.symmetrize(np.eye(3) + 0.05), "new")
        table_base = estimator.posterior_grid(s, n, grid, base)
        new_column = np.array(
            [
                estimator.log_marginal_likelihood(s, n, alpha, extra.matrix)
                for alpha in grid.values
            ]
        )
        merged = np.column_stack([table_base.log_ml, new_column])
        merged_post = np.exp(merged - linalg.log_sum_exp(merged))
        full = estimator.posterior_grid(s, n, grid, base.with_target(extra))
        np.testing.assert_allclose(full.post_prob, merged_post, atol=1e-12)

    def test_inconsistent_table_rejected(self):
        s, n = toy_instance()
        grid = estimator.AlphaGrid(np.array([0.5]))
        ts = targets.TargetSet((wrap(np.eye(2)),))
        table = estimator.posterior_grid(s, n, grid, ts)
        other = targets.TargetSet((wrap(np.eye(2), "other"),))
        with pytest.raises(InconsistentTable):
            estimator.tas_estimate(table, s, other)


class TestStsEstimate:
    def test_identity_fixed_point(self):
        np.testing.assert_allclose(
            estimator.sts_estimate(np.eye(2), wrap(np.eye(2)), 0.5), np.eye(2)
        )

    def test_scalar_mixture(self):
        result = estimator.sts_estimate(
            np.array([[4.0]]), wrap(np.array([[2.0]])), 0.3
        )
        assert result[0, 0] == pytest.approx(3.4)

    def test_spectrum_bounds(self):
        rng = np.random.default_rng(2)
        for _ in range(5):
            a = rng.standard_normal((4, 4))
            s = linalg.symmetrize(a @ a.T / 4)
            delta = wrap(linalg.symmetrize(np.eye(4) * rng.uniform(0.5, 2.0)))
            alpha = rng.uniform(0.1, 0.9)
            mixed = estimator.sts_estimate(s, delta, alpha)
            lo = min(
                linalg.sym_eigenvalues(s)[-1],
                linalg.sym_eigenvalues(delta.matrix)[-1],
            )
            hi = max(
                linalg.sym_eigenvalues(s)[0], linalg.sym_eigenvalues(delta.matrix)[0]
            )
            values = linalg.sym_eigenvalues(mixed)
            assert values[0] <= hi + 1e-10
            assert values[-1] >= lo - 1e-10

    def test_alpha_domain(self):
        with pytest.raises(DomainError):
            estimator.sts_estimate(np.eye(2), wrap(np.eye(2)), 1.5)


class TestEmpiricalBayes:
    def test_single_point_grid(self):
        s, n = toy_instance()
        grid = estimator.AlphaGrid(np.array([0.42]))
        alpha, _ = estimator.empirical_bayes_alpha(s, n, wrap(np.eye(2)), grid)
        assert alpha == 0.42

    def test_argmax_matches_pointwise(self):
        s, n = toy_instance(3, 12, seed=21)
        delta = wrap(np.eye(3))
        grid = estimator.AlphaGrid(np.array([0.2, 0.5, 0.8]))
        alpha, log_ml = estimator.empirical_bayes_alpha(s, n, delta, grid)
        per_point = {
            a: estimator.log_marginal_likelihood(s, n, a, delta.matrix)
            for a in grid.values
        }
        assert alpha == max(per_point, key=per_point.get)
        assert log_ml == pytest.approx(per_point[alpha])

    def test_correct_target_earns_more_shrinkage(self):
        rng = simulation.substream(17, 0)
        delta = np.eye(10)
        x = simulation.mvn_sample(delta, 200, rng)
        s = targets.sample_covariance(x)
        grid = estimator.AlphaGrid.equispaced(0.01)
        alpha_true, ml_true = estimator.empirical_bayes_alpha(s, 200, wrap(delta), grid)
        alpha_bad, ml_bad = estimator.empirical_bayes_alpha(
            s, 200, wrap(5.0 * delta), grid
        )
        assert alpha_true > alpha_bad
        assert ml_true > ml_bad


class TestBayesFactorCurve:
    def test_unity_at_optimum_and_floor(self):
        s, n = toy_instance(3, 12, seed=23)
        grid = estimator.AlphaGrid.equispaced(0.05)
        curve = estimator.bayes_factor_curve(s, n, wrap(np.eye(3)), grid)
        bfs = np.array([bf for _, bf in curve])
        assert np.min(bfs) == pytest.approx(1.0)
        assert np.all(bfs >= 1.0)
