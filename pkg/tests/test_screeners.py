"""Screener behavior: exact algebraic cases, independent oracles,
distributional invariants on seeded data."""

import numpy as np
import pytest

from holpscreen.exceptions import (
    DegeneracyWarning,
    DegenerateRegimeError,
    NotPositiveDefiniteError,
)
from holpscreen.numkernel import svd_small
from holpscreen.screeners import (
    Threshold,
    TopD,
    divide_holp_scores,
    forward_regression_rank,
    holp_scores,
    projection_submatrix,
    rank_select,
    ridge_holp_scores,
    rrcs_scores,
    sis_scores,
    threshold_select,
)
from holpscreen.simgen import Family, SimScenario, simulate_dataset


def orthonormal_rows(n, p, rng):
    q, _ = np.linalg.qr(rng.standard_normal((p, n)))
    return q.T


class TestHolp:
    def test_orthonormal_rows_reduce_to_marginal_scores(self):
        rng = np.random.default_rng(0)
        x = orthonormal_rows(6, 20, rng)
        y = rng.standard_normal(6)
        np.testing.assert_allclose(
            holp_scores(x, y).scores, np.abs(x.T @ y), atol=1e-12
        )

    def test_matches_pseudo_inverse_oracle(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((8, 40))
        y = rng.standard_normal(8)
        u, s, v = svd_small(x)
        pinv = v @ np.diag(1.0 / s) @ u.T
        np.testing.assert_allclose(
            holp_scores(x, y).scores, np.abs(pinv @ y), atol=1e-8
        )

    def test_noiseless_identity_design_recovers_support(self):
        # Exact top-5 recovery needs a moderate aspect ratio: the projection
        # distortion alone already defeats it for p/n around 20 (measured
        # 0/100 at n=50, p=1000), while p/n = 2 recovers in 100/100 seeds.
        hits = 0
        for seed in range(100):
            rng = np.random.default_rng(seed)
            x = rng.standard_normal((100, 200))
            beta = np.zeros(200)
            beta[:5] = 5.0
            sel = rank_select(holp_scores(x, x @ beta), 5)
            hits += set(sel.indices.tolist()) == set(range(5))
        assert hits >= 95

    def test_degenerate_regime_rejected(self):
        rng = np.random.default_rng(2)
        with pytest.raises(DegenerateRegimeError, match="ridge_holp"):
            holp_scores(rng.standard_normal((10, 5)), rng.standard_normal(10))

    def test_duplicate_rows_propagate_with_remedy(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((6, 30))
        x[3] = x[2]  # rank-deficient Gram despite p > n
        with pytest.raises(NotPositiveDefiniteError, match="ridge"):
            holp_scores(x, rng.standard_normal(6))

    def test_centering_routes_to_ridge(self):
        rng = np.random.default_rng(4)
        x = rng.standard_normal((15, 60))
        y = rng.standard_normal(15)
        got = holp_scores(x, y, center=True, ridge_on_center=10.0)
        assert got.params == {"center": True, "ridge": 10.0}
        xc = x - x.mean(axis=0)
        expect = ridge_holp_scores(xc, y - y.mean(), r=10.0).scores
        np.testing.assert_allclose(got.scores, expect, atol=1e-12)

    def test_orthogonal_row_invariance(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal((12, 80))
        y = rng.standard_normal(12)
        q, _ = np.linalg.qr(rng.standard_normal((12, 12)))
        base = holp_scores(x, y).scores
        rotated = holp_scores(q @ x, q @ y).scores
        np.testing.assert_allclose(rotated, base, rtol=1e-9, atol=1e-12)


class TestRidgeHolp:
    def test_vanishing_ridge_matches_projection(self):
        rng = np.random.default_rng(6)
        x = rng.standard_normal((10, 50))
        y = rng.standard_normal(10)
        a = holp_scores(x, y).scores
        b = ridge_holp_scores(x, y, r=1e-10).scores
        np.testing.assert_allclose(b, a, rtol=1e-6)

    @pytest.mark.parametrize("r", [1e-3, 1.0, 10.0])
    def test_woodbury_identity_against_primal_solve(self, r):
        rng = np.random.default_rng(7)
        x = rng.standard_normal((5, 12))
        y = rng.standard_normal(5)
        dual = ridge_holp_scores(x, y, r=r).scores
        primal = np.abs(
            np.linalg.solve(x.T @ x + r * np.eye(12), x.T @ y)
        )
        np.testing.assert_allclose(dual, primal, rtol=1e-9, atol=1e-12)

    def test_wide_and_tall_designs_accepted(self):
        rng = np.random.default_rng(8)
        ridge_holp_scores(rng.standard_normal((10, 5)), rng.standard_normal(10), r=1.0)
        ridge_holp_scores(rng.standard_normal((5, 10)), rng.standard_normal(5), r=1.0)

    def test_nonpositive_ridge_rejected(self):
        rng = np.random.default_rng(9)
        x = rng.standard_normal((5, 12))
        with pytest.raises(ValueError, match="positive"):
            ridge_holp_scores(x, np.ones(5), r=0.0)

    def test_default_ridge_tracks_projection_inclusion(self):
        # High-signal equicorrelated design: the r=10 screener should land
        # within 0.1 of the plain projection's inclusion rate (paired data).
        scenario = SimScenario(
            family=Family.COMPOUND_SYMMETRY, n=100, p=1000, r_squared=0.9,
            rho=0.6, seed=42,
        )
        diffs = []
        for r in range(100):
            ds = simulate_dataset(scenario, r)
            top_h = rank_select(holp_scores(ds.x, ds.y), 100).indices
            top_r = rank_select(ridge_holp_scores(ds.x, ds.y, r=10.0), 100).indices
            truth = set(ds.support.tolist())
            diffs.append(
                int(truth <= set(top_h.tolist())) - int(truth <= set(top_r.tolist()))
            )
        assert abs(np.mean(diffs)) <= 0.1


class TestDivideHolp:
    def test_single_partition_equals_rank_selection(self):
        rng = np.random.default_rng(10)
        x = rng.standard_normal((40, 200))
        y = rng.standard_normal(40)
        got = divide_holp_scores(x, y, m=1, d=15, seed=3)
        expect = rank_select(holp_scores(x, y), 15)
        np.testing.assert_array_equal(got.indices, expect.indices)
        assert got.rule == TopD(15)

    def test_minimum_block_size_guard(self):
        rng = np.random.default_rng(11)
        x = rng.standard_normal((30, 100))
        with pytest.raises(ValueError, match="at least 10 rows"):
            divide_holp_scores(x, np.ones(30), m=30, d=10)
        with pytest.raises(ValueError, match=">= 1"):
            divide_holp_scores(x, np.ones(30), m=0, d=10)

    def test_union_has_no_duplicates_and_bounded_size(self):
        rng = np.random.default_rng(12)
        x = rng.standard_normal((60, 300))
        y = x[:, 0] * 4 + rng.standard_normal(60)
        sel = divide_holp_scores(x, y, m=3, d=30, seed=1)
        assert len(set(sel.indices.tolist())) == sel.indices.size
        assert sel.indices.size <= 3 * 10  # m blocks of ceil(d/m)

    def test_block_degeneracy_reports_block_index(self):
        rng = np.random.default_rng(42)
        x = rng.standard_normal((40, 15))  # each 20-row block sees p < n_block
        y = rng.standard_normal(40)
        with pytest.raises(DegenerateRegimeError, match="block 0"):
            divide_holp_scores(x, y, m=2, d=10)
        x2 = rng.standard_normal((24, 60))
        x2[:12] = x2[0]  # constant rows make some block's Gram singular
        x2[12:] = x2[12]
        with pytest.raises(NotPositiveDefiniteError, match="block"):
            divide_holp_scores(x2, y[:24], m=2, d=10)

    def test_near_square_regime_beats_plain_projection(self):
        # With n close to p the plain projection's noise term explodes;
        # partitioning restores the aspect ratio and should do at least as
        # well on the same datasets.
        scenario = SimScenario(
            family=Family.COMPOUND_SYMMETRY, n=900, p=1000, r_squared=0.9,
            rho=0.6, seed=7,
        )
        divide_hits = holp_hits = 0
        for r in range(20):
            ds = simulate_dataset(scenario, r)
            truth = set(ds.support.tolist())
            top = rank_select(holp_scores(ds.x, ds.y), 100)
            holp_hits += truth <= set(top.indices.tolist())
            sel = divide_holp_scores(ds.x, ds.y, m=2, d=100, seed=r)
            divide_hits += truth <= set(sel.indices.tolist())
        assert divide_hits >= holp_hits


class TestSis:
    def test_response_orthogonal_to_columns_scores_zero(self):
        rng = np.random.default_rng(13)
        n = 24
        y = rng.standard_normal(n)
        yc = y - y.mean()
        cols = []
        for _ in range(6):
            w = rng.standard_normal(n)
            cols.append(w - (w @ yc) / (yc @ yc) * yc)
        x = np.column_stack(cols)
        np.testing.assert_allclose(sis_scores(x, y).scores, 0.0, atol=1e-10)

    def test_duplicated_predictor_scores_equal(self):
        rng = np.random.default_rng(14)
        x = rng.standard_normal((20, 4))
        x[:, 1] = x[:, 0]
        s = sis_scores(x, rng.standard_normal(20)).scores
        assert s[0] == pytest.approx(s[1], abs=1e-12)

    def test_zero_variance_column_warns_and_scores_zero(self):
        rng = np.random.default_rng(15)
        x = rng.standard_normal((20, 3))
        x[:, 2] = 7.0
        with pytest.warns(DegeneracyWarning):
            s = sis_scores(x, rng.standard_normal(20)).scores
        assert s[2] == 0.0

    def test_marginally_null_predictor_ranks_below_projection(self):
        # x5 is jointly active but marginally uncorrelated with y, so the
        # marginal screener should include it less often than the
        # projection screener on the same data.
        scenario = SimScenario(
            family=Family.MARGINAL_NULL, n=100, p=1000, r_squared=0.9,
            rho=0.5, seed=11,
        )
        hit_holp = hit_sis = 0
        for r in range(60):
            ds = simulate_dataset(scenario, r)
            hit_holp += 4 in rank_select(holp_scores(ds.x, ds.y), 100).indices
            hit_sis += 4 in rank_select(sis_scores(ds.x, ds.y), 100).indices
        assert hit_sis < hit_holp


def brute_force_omega(x, y):
    n = len(y)
    count = 0
    for i in range(n):
        for l in range(n):
            if i != l and x[i] < x[l] and y[i] < y[l]:
                count += 1
    return count / (n * (n - 1))


class TestRrcs:
    def test_perfect_concordance(self):
        x = np.arange(10.0)[:, None]
        y = np.arange(10.0) ** 3 + 1
        assert rrcs_scores(x, y).scores[0] == pytest.approx(0.25)

    def test_independent_column_scores_near_zero(self):
        rng = np.random.default_rng(16)
        x = rng.standard_normal((400, 200))
        y = rng.standard_normal(400)
        assert rrcs_scores(x, y).scores.mean() < 0.05

    def test_counting_routes_agree_with_brute_force(self):
        from holpscreen.screeners import (
            _concordant_count_ordered,
            _concordant_counts_pairs,
        )

        rng = np.random.default_rng(17)
        n = 50
        y = rng.standard_normal(n)
        x = np.column_stack(
            [
                rng.standard_normal(n),
                rng.integers(0, 5, n).astype(float),  # heavy x ties
                np.repeat(rng.standard_normal(n // 2), 2),
            ]
        )
        y_tied = rng.integers(0, 4, n).astype(float)
        for resp in (y, y_tied):
            expect = np.array(
                [brute_force_omega(x[:, j], resp) for j in range(x.shape[1])]
            )
            pairs = _concordant_counts_pairs(x, resp) / (n * (n - 1))
            ordered = np.array(
                [_concordant_count_ordered(x[:, j], resp) for j in range(x.shape[1])]
            ) / (n * (n - 1))
            np.testing.assert_array_equal(pairs, expect)
            np.testing.assert_array_equal(ordered, expect)

    def test_large_n_route_matches_small_n_route(self):
        rng = np.random.default_rng(18)
        x = rng.standard_normal((501, 5))
        y = rng.standard_normal(501)
        big = rrcs_scores(x, y).scores  # ordered-count route
        from holpscreen.screeners import _concordant_counts_pairs

        small = np.abs(_concordant_counts_pairs(x, y) / (501 * 500) - 0.25)
        np.testing.assert_array_equal(big, small)


class TestForwardRegression:
    def test_orthonormal_noiseless_selects_by_magnitude(self):
        rng = np.random.default_rng(19)
        x, _ = np.linalg.qr(rng.standard_normal((30, 8)))
        beta = np.array([0.0, 3.0, -4.0, 0.0, 2.0, 0.0, 0.0, 1.0])
        scores = forward_regression_rank(x, x @ beta, d=4).scores
        # pick order by descending |beta|: columns 2, 1, 4, 7
        assert scores[2] == 4 and scores[1] == 3 and scores[4] == 2 and scores[7] == 1
        assert np.count_nonzero(scores) == 4

    def test_zero_target_size(self):
        rng = np.random.default_rng(20)
        scores = forward_regression_rank(
            rng.standard_normal((10, 5)), rng.standard_normal(10), d=0
        ).scores
        np.testing.assert_array_equal(scores, 0.0)

    def test_collinear_candidate_skipped(self):
        rng = np.random.default_rng(21)
        x = rng.standard_normal((20, 5))
        x[:, 1] = x[:, 0]
        y = 3.0 * x[:, 0]
        scores = forward_regression_rank(x, y, d=3)
        assert scores.scores[0] == 3  # first pick
        assert scores.scores[1] == 0  # exact duplicate never enters

    def test_d_bounds(self):
        rng = np.random.default_rng(22)
        with pytest.raises(ValueError):
            forward_regression_rank(
                rng.standard_normal((10, 5)), rng.standard_normal(10), d=10
            )

    def test_high_signal_inclusion_on_independent_design(self):
        scenario = SimScenario(
            family=Family.INDEPENDENT, n=100, p=1000, r_squared=0.9, seed=23
        )
        hits = 0
        for r in range(30):
            ds = simulate_dataset(scenario, r)
            sel = rank_select(forward_regression_rank(ds.x, ds.y, d=99), 99)
            hits += set(ds.support.tolist()) <= set(sel.indices.tolist())
        assert hits >= 28  # benchmark reports essentially certain inclusion


class TestSelectionRules:
    def test_rank_select_examples(self):
        sel = rank_select(np.array([0.1, 0.9, 0.5]), 2)
        np.testing.assert_array_equal(sel.indices, [1, 2])
        sel = rank_select(np.array([0.7, 0.7, 0.7, 0.7]), 3)
        np.testing.assert_array_equal(sel.indices, [0, 1, 2])  # low-index ties
        sel = rank_select(np.array([0.1, 0.9, 0.5]), 3)
        np.testing.assert_array_equal(sel.indices, [1, 2, 0])

    def test_rank_select_drops_zero_scores(self):
        sel = rank_select(np.array([0.0, 2.0, 0.0, 1.0]), 4)
        np.testing.assert_array_equal(sel.indices, [1, 3])

    def test_rank_select_nesting(self):
        rng = np.random.default_rng(24)
        scores = rng.random(50)
        small = set(rank_select(scores, 10).indices.tolist())
        for d in range(11, 50, 7):
            assert small <= set(rank_select(scores, d).indices.tolist())

    def test_threshold_examples(self):
        scores = np.array([0.0, 0.6, 0.3])
        np.testing.assert_array_equal(
            threshold_select(scores, 0.0).indices, [1, 2, 0]
        )
        assert threshold_select(scores, 0.7).indices.size == 0
        assert threshold_select(scores, 0.3).rule == Threshold(0.3)

    def test_threshold_recovers_support_in_separable_instance(self):
        rng = np.random.default_rng(25)
        x = rng.standard_normal((40, 120))
        beta = np.zeros(120)
        beta[[3, 17, 44]] = (6.0, -5.0, 4.0)
        scores = holp_scores(x, x @ beta)
        true_mask = beta != 0
        lo = scores.scores[true_mask].min()
        hi = scores.scores[~true_mask].max()
        assert lo > hi  # noiseless instance separates
        sel = threshold_select(scores, (lo + hi) / 2)
        assert set(sel.indices.tolist()) == {3, 17, 44}

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(26)
        x = rng.standard_normal((30, 90))
        y = rng.standard_normal(30)
        perm = rng.permutation(90)
        for screener in (
            holp_scores,
            lambda a, b: ridge_holp_scores(a, b, r=2.0),
            sis_scores,
            rrcs_scores,
            lambda a, b: forward_regression_rank(a, b, d=12),
        ):
            base = screener(x, y).scores
            shuffled = screener(x[:, perm], y).scores
            np.testing.assert_allclose(shuffled, base[perm], atol=1e-9)


class TestProjectionSubmatrix:
    def test_matches_dense_projection(self):
        rng = np.random.default_rng(27)
        x = rng.standard_normal((10, 40))
        full = x.T @ np.linalg.inv(x @ x.T) @ x
        cols = np.array([0, 5, 17, 33])
        np.testing.assert_allclose(
            projection_submatrix(x, cols), full[np.ix_(cols, cols)], atol=1e-9
        )

    def test_diagonal_dominance_quick_scan(self):
        from holpscreen.metrics import dominance_ratio
        from holpscreen.simgen import draw_design

        wins = 0
        for seed in range(15):
            rng = np.random.default_rng(seed)
            x = draw_design(Family.AUTOREGRESSIVE, 50, 1000, rng, rho=0.9)
            cols = np.random.default_rng(seed + 100).choice(1000, 200, replace=False)
            wins += dominance_ratio(projection_submatrix(x, cols)) > 5
        assert wins >= 14
