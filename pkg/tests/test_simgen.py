"""Simulation designs: coefficient rules, covariance moments, noise
calibration, determinism and the O(np) memory guarantee."""

import tracemalloc

import numpy as np
import pytest

from holpscreen.simgen import (
    Family,
    SimScenario,
    calibrate_noise,
    draw_design,
    make_beta,
    replicate_rng,
    signal_variance,
    simulate_dataset,
    trend_schedule,
)


def col_corr(x, i, j):
    return float(np.corrcoef(x[:, i], x[:, j])[0, 1])


class TestMakeBeta:
    def test_autoregressive_classic_layout(self):
        beta, support = make_beta(Family.AUTOREGRESSIVE, 100, 1000, replicate_rng(0, 0))
        np.testing.assert_array_equal(support, [0, 3, 6])
        np.testing.assert_array_equal(beta[support], [3.0, 1.5, 2.0])
        assert np.count_nonzero(beta) == 3

    def test_group_fifteen_threes(self):
        beta, support = make_beta(Family.GROUP, 100, 1000, replicate_rng(0, 0))
        assert support.size == 15
        np.testing.assert_array_equal(beta[:15], 3.0)

    def test_random_coefficients_bounded_and_deterministic(self):
        n = 100
        beta1, _ = make_beta(Family.INDEPENDENT, n, 50, replicate_rng(5, 0))
        beta2, _ = make_beta(Family.INDEPENDENT, n, 50, replicate_rng(5, 0))
        np.testing.assert_array_equal(beta1, beta2)
        floor = 4.0 * np.log(n) / np.sqrt(n)
        assert np.all(np.abs(beta1[:5]) >= floor)

    def test_marginal_null_coefficients(self):
        beta, _ = make_beta(Family.MARGINAL_NULL, 100, 500, replicate_rng(0, 0), rho=0.5)
        np.testing.assert_array_equal(beta[:5], [5, 5, 5, 5, -10.0])

    def test_support_size_extensions(self):
        beta, support = make_beta(
            Family.COMPOUND_SYMMETRY, 100, 500, replicate_rng(0, 0), support_size=7
        )
        assert support.size == 7 and np.all(beta[:7] == 5.0)
        beta, support = make_beta(
            Family.AUTOREGRESSIVE, 100, 500, replicate_rng(0, 0), support_size=5
        )
        np.testing.assert_array_equal(beta[:5], [3.0, 1.5, 2.0, 3.0, 1.5])
        with pytest.raises(ValueError, match="support_size"):
            make_beta(Family.EXTREME, 100, 500, replicate_rng(0, 0), support_size=4)


class TestDrawDesign:
    def test_compound_symmetry_pairwise_correlation(self):
        x = draw_design(Family.COMPOUND_SYMMETRY, 2000, 10, replicate_rng(1, 0), rho=0.6)
        assert abs(col_corr(x, 2, 7) - 0.6) < 0.05

    def test_compound_symmetry_population_moments(self):
        # max-abs check over all pairs needs ~4 sigma headroom, hence n=20000
        x = draw_design(
            Family.COMPOUND_SYMMETRY, 20000, 8, replicate_rng(2, 0), rho=0.3
        )
        cov = np.cov(x.T)
        assert np.max(np.abs(np.diag(cov) - 1.0)) < 0.03
        off = cov[~np.eye(8, dtype=bool)]
        assert np.max(np.abs(off - 0.3)) < 0.03

    def test_autoregressive_decay(self):
        x = draw_design(Family.AUTOREGRESSIVE, 2000, 20, replicate_rng(3, 0), rho=0.9)
        assert abs(col_corr(x, 0, 2) - 0.81) < 0.05
        assert abs(np.var(x[:, 10], ddof=1) - 1.0) < 0.1

    def test_extreme_copies_nearly_duplicate(self):
        x = draw_design(Family.EXTREME, 2000, 40, replicate_rng(4, 0))
        assert col_corr(x, 0, 5) >= 0.98
        assert col_corr(x, 3, 13) >= 0.98
        # background variance stays at the constructed 1.5, unstandardized
        assert abs(np.var(x[:, 30], ddof=1) - 1.5) < 0.15

    def test_factor_column_variance(self):
        # per-column variance is ||loading||^2 + 1, a chi-square around k+1;
        # averaging over many columns pins the population value
        k = 10
        x = draw_design(Family.FACTOR, 2000, 800, replicate_rng(5, 0), k=k)
        mean_var = float(np.var(x, axis=0, ddof=1).mean())
        assert abs(mean_var - (k + 1)) / (k + 1) < 0.05

    def test_group_structure_correlations(self):
        x = draw_design(Family.GROUP, 3000, 30, replicate_rng(6, 0), delta2=0.01)
        assert col_corr(x, 0, 3) > 0.95  # same latent factor
        assert abs(col_corr(x, 0, 1)) < 0.1  # different factors
        assert abs(col_corr(x, 0, 20)) < 0.1  # background column

    def test_deterministic_given_stream(self):
        a = draw_design(Family.INDEPENDENT, 50, 100, replicate_rng(7, 3))
        b = draw_design(Family.INDEPENDENT, 50, 100, replicate_rng(7, 3))
        np.testing.assert_array_equal(a, b)


class TestSignalVariance:
    def test_compound_symmetry_closed_form(self):
        beta = np.zeros(100)
        beta[:5] = 5.0
        assert signal_variance(
            Family.COMPOUND_SYMMETRY, beta, rho=0.3
        ) == pytest.approx(275.0)

    def test_identity_family_is_squared_norm(self):
        beta = np.zeros(40)
        beta[[1, 7]] = (2.0, -3.0)
        assert signal_variance(Family.INDEPENDENT, beta) == pytest.approx(13.0)

    def test_marginal_null_response_uncorrelated_with_balancing_column(self):
        rho = 0.5
        rng = replicate_rng(8, 0)
        beta, _ = make_beta(Family.MARGINAL_NULL, 100, 300, rng, rho=rho)
        x = draw_design(Family.MARGINAL_NULL, 30000, 300, rng, rho=rho)
        signal = x @ beta
        assert abs(np.corrcoef(x[:, 4], signal)[0, 1]) < 0.02
        want = signal_variance(Family.MARGINAL_NULL, beta, rho=rho)
        assert np.var(signal, ddof=1) == pytest.approx(want, rel=0.05)

    @pytest.mark.parametrize(
        "family,kwargs",
        [
            (Family.AUTOREGRESSIVE, {"rho": 0.6}),
            (Family.GROUP, {"delta2": 0.05}),
            (Family.EXTREME, {}),
        ],
    )
    def test_closed_forms_match_sample_moments(self, family, kwargs):
        rng = replicate_rng(9, 0)
        beta, _ = make_beta(family, 100, 400, rng, rho=kwargs.get("rho"))
        x = draw_design(family, 20000, 400, rng, **kwargs)
        want = signal_variance(family, beta, **kwargs)
        got = float(np.var(x @ beta, ddof=1))
        assert got == pytest.approx(want, rel=0.05)

    def test_group_closed_form_value(self):
        beta = np.zeros(100)
        beta[:15] = 3.0
        # three latent factors, each hit by five coefficients of 3
        assert signal_variance(Family.GROUP, beta, delta2=0.1) == pytest.approx(
            3 * 15.0**2 + 0.1 * 135.0
        )

    def test_factor_uses_realized_loadings(self):
        rng = replicate_rng(10, 0)
        beta, _ = make_beta(Family.FACTOR, 100, 60, rng)
        loadings = rng.standard_normal((60, 4))
        want = signal_variance(Family.FACTOR, beta, loadings=loadings)
        x = draw_design(Family.FACTOR, 40000, 60, rng, k=4, loadings=loadings)
        assert float(np.var(x @ beta, ddof=1)) == pytest.approx(want, rel=0.05)


class TestCalibrateNoise:
    def test_half_target_equates_signal_and_noise(self):
        assert calibrate_noise(12.5, 0.5) == pytest.approx(12.5)

    def test_high_signal_value(self):
        assert calibrate_noise(275.0, 0.9) == pytest.approx(275.0 / 9.0)

    def test_noiseless_limit(self):
        assert calibrate_noise(10.0, 0.999) == pytest.approx(10.0 * 0.001 / 0.999)

    def test_bounds(self):
        with pytest.raises(ValueError):
            calibrate_noise(10.0, 1.0)
        with pytest.raises(ValueError):
            calibrate_noise(0.0, 0.5)


class TestSimulateDataset:
    def test_bitwise_determinism(self):
        scenario = SimScenario(
            family=Family.FACTOR, n=40, p=200, r_squared=0.7, k=3, seed=21
        )
        a = simulate_dataset(scenario, 4)
        b = simulate_dataset(scenario, 4)
        assert np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y)
        c = simulate_dataset(scenario, 5)
        assert not np.array_equal(a.x, c.x)

    def test_autoregressive_support(self):
        scenario = SimScenario(
            family=Family.AUTOREGRESSIVE, n=50, p=300, r_squared=0.9, rho=0.5, seed=0
        )
        ds = simulate_dataset(scenario)
        np.testing.assert_array_equal(ds.support, [0, 3, 6])

    def test_realized_r_squared_matches_target(self):
        scenario = SimScenario(
            family=Family.COMPOUND_SYMMETRY, n=100, p=1000, r_squared=0.5,
            rho=0.3, seed=33,
        )
        ratios = []
        for r in range(100):
            ds = simulate_dataset(scenario, r)
            signal = ds.x @ ds.beta
            ratios.append(np.var(signal) / np.var(ds.y))
        assert abs(float(np.mean(ratios)) - 0.5) < 0.05

    def test_frozen_loadings_fix_noise_level(self):
        base = dict(family=Family.FACTOR, n=40, p=150, r_squared=0.6, k=5, seed=3)
        frozen = SimScenario(**base, freeze_loadings=True)
        sig_frozen = {simulate_dataset(frozen, r).sigma2 for r in range(3)}
        assert len(sig_frozen) == 1  # loadings shared, so sigma2 is constant
        thawed = SimScenario(**base)
        sig_thawed = {simulate_dataset(thawed, r).sigma2 for r in range(3)}
        assert len(sig_thawed) == 3  # redrawn loadings move the calibration

    def test_generation_never_materializes_p_by_p(self):
        n, p = 50, 100_000
        budget = 6 * n * p * 8 + 64 * 2**20
        for family, kwargs in [
            (Family.COMPOUND_SYMMETRY, {"rho": 0.6}),
            (Family.AUTOREGRESSIVE, {"rho": 0.9}),
            (Family.EXTREME, {}),
        ]:
            scenario = SimScenario(
                family=family, n=n, p=p, r_squared=0.9, seed=1, **kwargs
            )
            tracemalloc.start()
            simulate_dataset(scenario)
            _, peak = tracemalloc.get_traced_memory()
            tracemalloc.stop()
            assert peak < budget, f"{family}: peak {peak / 2**20:.0f} MiB"


class TestScenarioValidation:
    def test_requires_wide_design(self):
        with pytest.raises(ValueError, match="p > n"):
            SimScenario(family=Family.INDEPENDENT, n=100, p=100, r_squared=0.5)

    def test_family_parameters_enforced(self):
        with pytest.raises(ValueError, match="rho"):
            SimScenario(family=Family.COMPOUND_SYMMETRY, n=10, p=20, r_squared=0.5)
        with pytest.raises(ValueError, match="k >= 1"):
            SimScenario(family=Family.FACTOR, n=10, p=20, r_squared=0.5)
        with pytest.raises(ValueError, match="delta2"):
            SimScenario(family=Family.GROUP, n=10, p=20, r_squared=0.5)
        with pytest.raises(ValueError, match="r_squared"):
            SimScenario(family=Family.INDEPENDENT, n=10, p=20, r_squared=1.5)

    def test_round_trip_through_dict(self):
        scenario = SimScenario(
            family=Family.GROUP, n=50, p=400, r_squared=0.9, delta2=0.05, seed=9
        )
        assert SimScenario.from_dict(scenario.to_dict()) == scenario


class TestTrendSchedule:
    def test_dimension_growth(self):
        assert trend_schedule(100)[0] == 4 * 103
        assert trend_schedule(500)[0] == 4 * 2798

    def test_sparsity_levels(self):
        assert [trend_schedule(n)[1] for n in (100, 200, 300, 400, 500)] == [
            5, 5, 6, 6, 6,
        ]
        assert [trend_schedule(n, high_signal=False)[1] for n in (100, 300, 500)] == [
            3, 4, 4,
        ]
