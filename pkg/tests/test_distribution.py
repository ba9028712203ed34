"""Tests for the univariate and multivariate generalized Waring distributions."""

import itertools
import math

import numpy as np
import pytest
from conftest import ALPHA, within_se

from waring.distribution import (
    GwdParams,
    MgwdParams,
    PmfTable,
    chi_square_gof,
    conditional_allocation,
    draw_mixing,
    empirical_pmf,
    mgwd_aggregate_params,
    mgwd_log_pmf,
    mgwd_marginal_params,
    mgwd_moments,
    sample_mgwd,
    sample_ugwd,
    tv_distance,
    ugwd_cdf,
    ugwd_dispersion_index,
    ugwd_log_pmf,
    ugwd_moments,
    ugwd_pgf,
    ugwd_pmf_ratio,
    ugwd_pmf_table,
    ugwd_quantile,
    ugwd_tail_estimate,
)
from waring.errors import (
    DimensionMismatchError,
    DomainError,
    InfiniteMomentError,
    QuantileOverflowError,
    ValidationError,
)
from waring.utils import POISSON_LAM_MAX, fsum, standard_error

PARAM_GRID = [
    GwdParams(a=a, k=k, rho=rho)
    for a, k, rho in itertools.product(
        (0.3, 1.0, 2.5, 7.0), (0.5, 1.0, 4.0), (2.2, 3.0, 5.5, 9.0, 20.0)
    )
]


class TestParams:
    def test_rejects_nonpositive(self):
        with pytest.raises(ValidationError):
            GwdParams(a=1.0, k=1.0, rho=-1.0)
        with pytest.raises(ValidationError):
            GwdParams(a=0.0, k=1.0, rho=2.0)
        with pytest.raises(ValidationError):
            MgwdParams(a=1.0, rho=2.0, shapes=(1.0, 0.0))
        with pytest.raises(ValidationError):
            MgwdParams(a=1.0, rho=2.0, shapes=())

    def test_non_integer_parameters_allowed(self):
        params = GwdParams(a=0.37, k=2.9, rho=1.01)
        assert params.k == 2.9

    def test_dict_round_trip(self):
        params = GwdParams(a=2.0, k=3.0, rho=4.0)
        assert GwdParams.from_dict(params.to_dict()) == params


class TestUnivariatePmf:
    def test_unit_values(self, unit_params):
        assert ugwd_log_pmf(unit_params, 0) == pytest.approx(math.log(2 / 3), abs=1e-14)
        assert ugwd_log_pmf(unit_params, 1) == pytest.approx(math.log(1 / 6), abs=1e-14)

    def test_symmetry_in_a_and_k(self):
        params = GwdParams(a=2.0, k=5.0, rho=3.0)
        n = np.arange(60)
        np.testing.assert_allclose(
            ugwd_log_pmf(params, n), ugwd_log_pmf(params.swapped(), n), rtol=0, atol=1e-12
        )

    @pytest.mark.parametrize("params", PARAM_GRID[::6])
    def test_recurrence(self, params):
        n = np.arange(100)
        logs = ugwd_log_pmf(params, np.arange(101))
        np.testing.assert_allclose(
            np.exp(np.diff(logs)), ugwd_pmf_ratio(params, n), rtol=1e-12, atol=0
        )

    def test_negative_support_rejected(self, unit_params):
        with pytest.raises(DomainError):
            ugwd_log_pmf(unit_params, -1)

    def test_degenerate_shape_is_point_mass(self):
        params = GwdParams(a=1.0, k=1e-310, rho=2.0)
        assert ugwd_log_pmf(params, 0) == 0.0
        assert ugwd_log_pmf(params, 3) == -math.inf
        assert sample_ugwd(params, 1, size=5).tolist() == [0] * 5


class TestTables:
    def test_fixed_table_sink(self, unit_params):
        table = ugwd_pmf_table(unit_params, max_n=1)
        np.testing.assert_allclose(table.values, [2 / 3, 1 / 6], rtol=1e-13)
        assert table.tail == pytest.approx(1 / 6, rel=1e-12)
        assert table.to_pairs()[1] == (1, pytest.approx(1 / 6))

    def test_tail_estimate_exact_for_unit_params(self, unit_params):
        for n in (0, 5, 40, 1000):
            pi_n = 4.0 / ((n + 1) * (n + 2) * (n + 3))
            exact = 2.0 / ((n + 2) * (n + 3))
            assert ugwd_tail_estimate(unit_params, n, pi_n) == pytest.approx(exact, rel=1e-13)

    @pytest.mark.parametrize(
        "params",
        [
            GwdParams(a=a, k=k, rho=rho)
            for a, k, rho in itertools.product((0.5, 2.0), (0.5, 2.0), (0.5, 1.0, 2.5, 6.0))
        ],
    )
    def test_normalization_with_tail_estimate(self, params):
        table = ugwd_pmf_table(params)
        assert abs(1.0 - table.mass - table.tail) < 1e-9

    def test_table_matches_direct_pmf(self):
        params = GwdParams(a=2.0, k=3.0, rho=4.0)
        table = ugwd_pmf_table(params, max_n=9000)
        direct = np.exp(ugwd_log_pmf(params, np.arange(9001)))
        np.testing.assert_allclose(table.values, direct, rtol=1e-9)


class TestCdfAndQuantile:
    def test_cdf_values(self, unit_params):
        assert ugwd_cdf(unit_params, 0) == pytest.approx(2 / 3, rel=1e-14)
        assert ugwd_cdf(unit_params, 1) == pytest.approx(5 / 6, rel=1e-14)
        assert ugwd_cdf(unit_params, 10**6) == pytest.approx(1.0, abs=1e-6)

    def test_cdf_closed_form(self, unit_params):
        # 1 − cdf(n) = 2/((n+2)(n+3)) for (1, 1; 2)
        for n in (3, 50, 700):
            assert 1.0 - ugwd_cdf(unit_params, n) == pytest.approx(
                2.0 / ((n + 2) * (n + 3)), abs=1e-12
            )

    def test_quantile_values(self, unit_params):
        assert ugwd_quantile(unit_params, 0.0) == 0
        assert ugwd_quantile(unit_params, 0.5) == 0
        assert ugwd_quantile(unit_params, 0.7) == 1

    def test_quantile_inverts_cdf(self):
        params = GwdParams(a=2.0, k=3.0, rho=4.0)
        for q in (0.1, 0.5, 0.9, 0.999):
            n = ugwd_quantile(params, q)
            assert ugwd_cdf(params, n) >= q
            if n > 0:
                assert ugwd_cdf(params, n - 1) < q

    def test_quantile_overflow(self):
        with pytest.raises(QuantileOverflowError):
            ugwd_quantile(GwdParams(a=1.0, k=1.0, rho=0.5), 0.999999, cap=1000)

    def test_quantile_domain(self, unit_params):
        with pytest.raises(DomainError):
            ugwd_quantile(unit_params, 1.0)


class TestMoments:
    def test_mean_and_variance(self, unit_params):
        assert ugwd_moments(unit_params).mean == pytest.approx(1.0)
        moments = ugwd_moments(GwdParams(a=1.0, k=1.0, rho=3.0))
        assert moments.variance == pytest.approx(9 / 4)
        assert moments.factorial(2) == pytest.approx(2.0)

    def test_infinite_moments(self, unit_params):
        with pytest.raises(InfiniteMomentError):
            ugwd_moments(unit_params).factorial(2)
        with pytest.raises(InfiniteMomentError):
            _ = ugwd_moments(unit_params).variance
        with pytest.raises(ArithmeticError):
            _ = ugwd_moments(GwdParams(a=1.0, k=1.0, rho=0.9)).mean

    def test_factorial_order_zero_is_one(self, unit_params):
        assert ugwd_moments(unit_params).factorial(0) == 1.0

    @pytest.mark.parametrize("params", PARAM_GRID)
    def test_variance_identity(self, params):
        moments = ugwd_moments(params)
        via_factorial = moments.factorial(2) + moments.mean - moments.mean**2
        assert via_factorial == pytest.approx(moments.variance, rel=1e-10)

    def test_descending_factorial_moment_matches_table(self):
        params = GwdParams(a=2.0, k=3.0, rho=9.0)
        table = ugwd_pmf_table(params)
        n = np.arange(len(table.values), dtype=float)
        assert fsum(n * (n - 1) * (n - 2) * table.values) == pytest.approx(
            ugwd_moments(params).factorial(3), rel=1e-6
        )

    def test_dispersion_index(self):
        params = GwdParams(a=2.0, k=2.0, rho=8.0)
        expected = (8 + 2 - 1) * (8 + 2 - 1) / (7 * 6)
        assert ugwd_dispersion_index(params) == pytest.approx(expected)
        assert ugwd_dispersion_index(params) > 1


class TestPgf:
    def test_endpoints(self):
        params = GwdParams(a=2.0, k=3.0, rho=4.0)
        assert ugwd_pgf(params, 1.0) == pytest.approx(1.0, abs=1e-12)
        assert ugwd_pgf(params, 0.0) == pytest.approx(math.exp(ugwd_log_pmf(params, 0)))

    def test_series_agreement(self, unit_params):
        table = ugwd_pmf_table(unit_params, max_n=200)
        brute = fsum(table.values * 0.5 ** np.arange(201))
        assert ugwd_pgf(unit_params, 0.5) == pytest.approx(brute, abs=1e-10)

    def test_domain(self, unit_params):
        with pytest.raises(DomainError):
            ugwd_pgf(unit_params, -0.1)


@pytest.mark.statistical
class TestUnivariateSampler:
    PARAMS = GwdParams(a=2.0, k=3.0, rho=4.0)

    def test_total_variation(self):
        draws = sample_ugwd(self.PARAMS, 101, size=100_000)
        table = ugwd_pmf_table(self.PARAMS, max_n=30)
        assert tv_distance(empirical_pmf(draws, 30), table) < 0.01

    def test_mean(self):
        draws = sample_ugwd(self.PARAMS, 102, size=100_000)
        assert within_se(draws.mean(), 2.0, standard_error(draws))

    def test_reproducible(self):
        first = sample_ugwd(self.PARAMS, 7, size=50)
        second = sample_ugwd(self.PARAMS, 7, size=50)
        np.testing.assert_array_equal(first, second)
        assert isinstance(sample_ugwd(self.PARAMS, 7), int)

    def test_underflowing_mixing_draw_is_clipped(self):
        # Beta(1e-3, 1) returns exactly 0 about half the time.
        params = GwdParams(a=1.0, k=1.0, rho=1e-3)
        mixing = draw_mixing(params, 21, size=1_000)
        assert np.any(mixing.p == 0.0)
        assert np.all(np.isfinite(mixing.theta))
        assert isinstance(draw_mixing(params, 21).theta, float)

    def test_small_rho_scalar_draws(self):
        params = GwdParams(a=1.0, k=1.0, rho=1e-3)
        draws = [sample_ugwd(params, seed) for seed in range(50)]
        assert all(isinstance(x, int) for x in draws)
        assert all(0 <= x <= 2 * POISSON_LAM_MAX for x in draws)
        assert max(draws) >= POISSON_LAM_MAX / 2

    def test_small_rho_array_and_multivariate_draws(self):
        params = GwdParams(a=1.0, k=1.0, rho=1e-3)
        assert np.all(sample_ugwd(params, 22, size=1_000) >= 0)
        mgwd = MgwdParams(a=1.0, shapes=(0.5, 1.5), rho=1e-3)
        assert np.all(sample_mgwd(mgwd, 23, size=1_000) >= 0)

    @pytest.mark.parametrize(
        ("params", "seed"),
        [
            (GwdParams(a=2.0, k=3.0, rho=4.0), 11),
            (GwdParams(a=1.0, k=1.0, rho=3.0), 12),
            (GwdParams(a=0.5, k=2.5, rho=6.0), 13),
            (GwdParams(a=4.0, k=0.7, rho=1.5), 14),
        ],
    )
    def test_chi_square(self, params, seed):
        draws = sample_ugwd(params, seed, size=100_000)
        _, p_value = chi_square_gof(draws, ugwd_pmf_table(params))
        assert p_value > ALPHA

    def test_chi_square_detects_wrong_law(self):
        draws = sample_ugwd(self.PARAMS, 15, size=100_000)
        _, p_value = chi_square_gof(draws, ugwd_pmf_table(GwdParams(a=2.0, k=3.0, rho=8.0)))
        assert p_value < ALPHA


class TestMultivariate:
    def test_bivariate_zero_cell(self):
        params = MgwdParams(a=1.0, rho=2.0, shapes=(1.0, 1.0))
        assert mgwd_log_pmf(params, [0, 0]) == pytest.approx(math.log(0.5), abs=1e-14)

    def test_one_component_reduces_to_univariate(self):
        multi = MgwdParams(a=2.0, rho=3.5, shapes=(1.5,))
        uni = GwdParams(a=2.0, k=1.5, rho=3.5)
        for n in range(30):
            assert mgwd_log_pmf(multi, [n]) == pytest.approx(ugwd_log_pmf(uni, n), abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            mgwd_log_pmf(MgwdParams(a=1.0, rho=2.0, shapes=(1.0, 1.0)), [1, 2, 3])

    @pytest.mark.parametrize(
        "params",
        [
            MgwdParams(a=1.0, rho=2.0, shapes=(1.0, 1.0)),
            MgwdParams(a=2.5, rho=0.8, shapes=(0.3, 4.0)),
            MgwdParams(a=0.4, rho=6.0, shapes=(2.0, 2.0)),
        ],
    )
    def test_finite_additivity(self, params):
        aggregate = mgwd_aggregate_params(params)
        for n in range(21):
            joint = [math.exp(mgwd_log_pmf(params, [j, n - j])) for j in range(n + 1)]
            expected = math.exp(ugwd_log_pmf(aggregate, n))
            assert math.fsum(joint) == pytest.approx(expected, rel=1e-12)

    def test_marginalization(self):
        params = MgwdParams(a=1.5, rho=3.0, shapes=(0.5, 1.0, 2.0))
        marginal = mgwd_marginal_params(params, [0, 2])
        for x0, x2 in [(0, 0), (1, 3), (4, 2)]:
            summed = math.fsum(
                math.exp(mgwd_log_pmf(params, [x0, x1, x2])) for x1 in range(4000)
            )
            assert summed == pytest.approx(math.exp(mgwd_log_pmf(marginal, [x0, x2])), rel=1e-6)

    def test_countable_additivity(self):
        a, rho = 1.5, 3.0
        shapes = [2.0**-j for j in range(1, 21)]
        limit = ugwd_pmf_table(GwdParams(a=a, k=math.fsum(shapes), rho=rho), max_n=200)
        distances = [
            tv_distance(
                ugwd_pmf_table(GwdParams(a=a, k=math.fsum(shapes[:j]), rho=rho), max_n=200), limit
            )
            for j in range(1, 21)
        ]
        assert all(cur <= prev + 1e-15 for prev, cur in zip(distances, distances[1:]))
        assert distances[-2] < 1e-5

    def test_moments(self):
        moments = mgwd_moments(MgwdParams(a=1.0, rho=3.0, shapes=(1.0, 1.0)))
        assert moments.covariances[0, 1] == pytest.approx(0.75)
        assert moments.cross_moments[0, 1] == pytest.approx(1.0)
        assert moments.factorial([1, 1]) == pytest.approx(1.0)
        np.testing.assert_allclose(moments.marginal_means, [0.5, 0.5])
        np.testing.assert_allclose(moments.marginal_variances, [2.25, 2.25])
        np.testing.assert_allclose(np.diag(moments.covariances), moments.marginal_variances)

    def test_infinite_cross_moment(self):
        with pytest.raises(InfiniteMomentError):
            _ = mgwd_moments(MgwdParams(a=1.0, rho=2.0, shapes=(1.0, 1.0))).covariances


@pytest.mark.statistical
class TestMultivariateSampler:
    def test_sum_and_marginals(self):
        params = MgwdParams(a=1.0, rho=2.0, shapes=(1.0, 1.0))
        draws = sample_mgwd(params, 21, size=100_000)
        assert draws.shape == (100_000, 2)
        sum_table = ugwd_pmf_table(mgwd_aggregate_params(params), max_n=30)
        assert tv_distance(empirical_pmf(draws.sum(axis=1), 30), sum_table) < 0.01
        marginal_table = ugwd_pmf_table(GwdParams(a=1.0, k=1.0, rho=2.0), max_n=30)
        for i in range(2):
            assert tv_distance(empirical_pmf(draws[:, i], 30), marginal_table) < 0.01

    def test_single_draw_shape(self):
        draw = sample_mgwd(MgwdParams(a=1.0, rho=2.0, shapes=(1.0, 2.0, 3.0)), 5)
        assert draw.shape == (3,)

    def test_covariance(self):
        # The fourth moments needed for a finite-variance covariance estimate exist for ρ > 4.
        params = MgwdParams(a=1.0, rho=8.0, shapes=(1.0, 1.0))
        draws = sample_mgwd(params, 22, size=400_000).astype(float)
        centered = draws - draws.mean(axis=0)
        products = centered[:, 0] * centered[:, 1]
        expected = mgwd_moments(params).covariances[0, 1]
        assert within_se(products.mean(), expected, standard_error(products))


class TestAllocation:
    def test_zero_total(self, rng):
        np.testing.assert_array_equal(conditional_allocation(0, [1.0, 2.0, 3.0], rng), [0, 0, 0])

    def test_single_cell(self, rng):
        np.testing.assert_array_equal(conditional_allocation(17, [0.4], rng), [17])

    def test_counts_sum_to_total(self, rng):
        for total in (1, 5, 1000):
            split = conditional_allocation(total, [1e-12, 3.0, 0.5, 1e-200], rng)
            assert split.sum() == total

    @pytest.mark.statistical
    def test_uniform_split_table(self):
        generator = np.random.default_rng(31)
        draws = 100_000
        firsts = np.array(
            [conditional_allocation(2, [1.0, 1.0], generator)[0] for _ in range(draws)]
        )
        for j in range(3):
            frequency = float(np.mean(firsts == j))
            se = math.sqrt((1 / 3) * (2 / 3) / draws)
            assert within_se(frequency, 1 / 3, se)


class TestTotalVariation:
    def test_identical(self):
        assert tv_distance([0.2, 0.3, 0.5], [0.2, 0.3, 0.5]) == 0.0

    def test_disjoint_point_masses(self):
        assert tv_distance([1.0, 0.0], [0.0, 1.0]) == 1.0

    def test_direct_arithmetic(self):
        assert tv_distance([0.5, 0.5], [0.75, 0.25]) == pytest.approx(0.25)

    def test_sink_counts(self):
        short = PmfTable(values=np.array([0.5]), tail=0.5)
        assert tv_distance(short, [0.5, 0.5]) == pytest.approx(0.0)

    def test_empirical_pmf_sink(self):
        table = empirical_pmf([0, 1, 1, 5, 9], max_n=2)
        np.testing.assert_allclose(table.values, [0.2, 0.4, 0.0])
        assert table.tail == pytest.approx(0.4)
