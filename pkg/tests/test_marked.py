"""Tests for the marked process and its closure operations."""

import numpy as np
import pytest
from conftest import within_se

from waring.distribution import (
    GwdParams,
    MgwdParams,
    empirical_pmf,
    mgwd_moments,
    tv_distance,
    ugwd_pmf_table,
)
from waring.errors import (
    DimensionMismatchError,
    DomainError,
    HeterogeneousGridError,
    ValidationError,
)
from waring.geometry import Backend, QuadratGrid, Window
from waring.marked import (
    MarkedCountField,
    MarkedGrid,
    marginal_counts,
    pair_with_rest,
    project_counts,
    simulate_marked_counts,
    stack_marks,
    superpose_marks,
)
from waring.process import simulate_counts_conditional, simulate_counts_cox
from waring.utils import standard_error

PARAMS = GwdParams(a=2.0, k=1.0, rho=8.0)
MARKS = 3
REPLICATES = 100_000


@pytest.fixture(scope="module")
def marked_grid() -> MarkedGrid:
    return MarkedGrid(QuadratGrid(Window(lower=(0.0,), upper=(2.0,)), (2,)), MARKS)


@pytest.fixture(scope="module")
def ensemble(marked_grid) -> list[MarkedCountField]:
    generator = np.random.default_rng(81)
    return [simulate_marked_counts(PARAMS, marked_grid, generator) for _ in range(REPLICATES)]


@pytest.fixture
def one_field(marked_grid) -> MarkedCountField:
    return simulate_marked_counts(GwdParams(a=2.0, k=30.0, rho=3.0), marked_grid, 5)


class TestStructure:
    def test_shape(self, marked_grid, one_field):
        assert marked_grid.shape == (2, MARKS)
        assert one_field.counts.shape == (2, MARKS)
        assert one_field.meta.model == "marked_gwp"

    def test_validation(self, marked_grid, one_field):
        with pytest.raises(ValidationError):
            MarkedGrid(marked_grid.grid, 0)
        with pytest.raises(DimensionMismatchError):
            MarkedCountField(marked_grid, np.zeros((2, 2)), one_field.meta)

    @pytest.mark.parametrize(
        ("backend", "simulator"),
        [(Backend.COX, simulate_counts_cox), (Backend.CONDITIONAL, simulate_counts_conditional)],
    )
    def test_single_mark_matches_unmarked(self, backend, simulator):
        grid = QuadratGrid(Window(lower=(0.0, 0.0), upper=(1.0, 2.0)), (3, 4))
        params = GwdParams(a=1.5, k=6.0, rho=2.5)
        marked = simulate_marked_counts(params, MarkedGrid(grid, 1), 99, backend)
        np.testing.assert_array_equal(marked.counts[..., 0], simulator(params, grid, 99).counts)

    def test_rejects_other_backends(self, marked_grid):
        with pytest.raises(DomainError):
            simulate_marked_counts(PARAMS, marked_grid, 1, Backend.POISSON)


class TestBookkeeping:
    def test_extract_and_restack(self, one_field):
        marginals = [marginal_counts(one_field, m) for m in range(1, MARKS + 1)]
        restacked = stack_marks(marginals)
        np.testing.assert_array_equal(restacked.counts, one_field.counts)
        assert restacked.num_marks == MARKS

    def test_mark_index_is_one_based(self, one_field):
        np.testing.assert_array_equal(marginal_counts(one_field, 1).counts, one_field.counts[:, 0])
        with pytest.raises(IndexError):
            marginal_counts(one_field, 0)
        with pytest.raises(IndexError):
            marginal_counts(one_field, MARKS + 1)

    def test_single_mark_superposition_is_marginal(self, one_field):
        np.testing.assert_array_equal(
            superpose_marks(one_field, [2]).counts, marginal_counts(one_field, 2).counts
        )

    def test_superposition_sums_and_scales_shape(self, one_field):
        merged = superpose_marks(one_field, [1, 3])
        expected = one_field.counts[:, 0] + one_field.counts[:, 2]
        np.testing.assert_array_equal(merged.counts, expected)
        assert merged.meta.params["k"] == 60.0

    def test_duplicate_marks(self, one_field):
        with pytest.raises(DomainError):
            superpose_marks(one_field, [1, 1])
        with pytest.raises(DomainError):
            superpose_marks(one_field, [])

    def test_pair_with_rest(self, one_field):
        single, rest = pair_with_rest(one_field, 2)
        np.testing.assert_array_equal(single.counts + rest.counts, one_field.counts.sum(axis=1))

    def test_pair_needs_two_marks(self, marked_grid):
        lone = simulate_marked_counts(PARAMS, MarkedGrid(marked_grid.grid, 1), 3)
        with pytest.raises(DomainError):
            pair_with_rest(lone, 1)

    def test_stack_rejects_mixed_grids(self, one_field):
        half = QuadratGrid(Window(lower=(0.0,), upper=(1.0,)), (2,))
        other = simulate_counts_cox(PARAMS, half, 1)
        with pytest.raises(HeterogeneousGridError):
            stack_marks([marginal_counts(one_field, 1), other])


@pytest.mark.statistical
class TestClosureLaws:
    def test_mark_marginals(self, ensemble):
        counts = np.stack([f.counts for f in ensemble])
        table = ugwd_pmf_table(PARAMS, max_n=30)
        for mark in range(MARKS):
            assert tv_distance(empirical_pmf(counts[:, 0, mark], 30), table) < 0.01

    def test_grand_total(self, ensemble, marked_grid):
        totals = np.array([f.counts.sum() for f in ensemble])
        shape = PARAMS.k * MARKS * marked_grid.grid.window.volume
        table = ugwd_pmf_table(PARAMS.with_shape(shape), max_n=30)
        assert tv_distance(empirical_pmf(totals, 30), table) < 0.01

    def test_marginal_mean(self, ensemble):
        firsts = np.array([marginal_counts(f, 1).counts[0] for f in ensemble], dtype=float)
        expected = PARAMS.a * PARAMS.k / (PARAMS.rho - 1)
        assert within_se(firsts.mean(), expected, standard_error(firsts))

    def test_marks_in_one_cell_covary(self, ensemble):
        counts = np.stack([f.counts[0] for f in ensemble]).astype(float)
        centered = counts - counts.mean(axis=0)
        products = centered[:, 0] * centered[:, 1]
        expected = mgwd_moments(MgwdParams(a=PARAMS.a, rho=PARAMS.rho, shapes=(1.0, 1.0)))
        assert expected.covariances[0, 1] > 0
        assert within_se(products.mean(), expected.covariances[0, 1], standard_error(products))

    def test_full_superposition(self, ensemble):
        merged = np.array([superpose_marks(f, [1, 2, 3]).counts[1] for f in ensemble])
        table = ugwd_pmf_table(PARAMS.with_shape(PARAMS.k * MARKS), max_n=30)
        assert tv_distance(empirical_pmf(merged, 30), table) < 0.02

    def test_pair_cross_moment(self, ensemble):
        products = []
        for f in ensemble:
            single, rest = pair_with_rest(f, 1)
            products.append(float(single.counts[0] * rest.counts[0]))
        shapes = (PARAMS.k, (MARKS - 1) * PARAMS.k)
        expected = mgwd_moments(MgwdParams(a=PARAMS.a, rho=PARAMS.rho, shapes=shapes))
        assert within_se(
            float(np.mean(products)), expected.cross_moments[0, 1], standard_error(products)
        )


class TestProjection:
    def test_totals_and_volumes(self, unit_square):
        grid = QuadratGrid(unit_square, (4, 5))
        field = simulate_counts_cox(GwdParams(a=2.0, k=40.0, rho=3.0), grid, 8)
        columns = project_counts(field, axis=1)
        assert columns.grid.shape == (4,)
        np.testing.assert_array_equal(columns.counts, field.counts.sum(axis=1))
        assert columns.total == field.total
        assert columns.grid.window.volume == pytest.approx(1.0)
        assert columns.grid.cell_volume == pytest.approx(5 * field.grid.cell_volume)

    def test_double_projection(self):
        window = Window(lower=(0.0, 0.0, 0.0), upper=(1.0, 2.0, 3.0))
        grid = QuadratGrid(window, (2, 3, 4))
        field = simulate_counts_cox(GwdParams(a=1.0, k=10.0, rho=2.5), grid, 4)
        twice = project_counts(project_counts(field, axis=2), axis=1)
        np.testing.assert_array_equal(twice.counts, field.counts.sum(axis=(1, 2)))
        assert twice.grid.window.volume == pytest.approx(window.volume)

    def test_axis_errors(self, unit_square, two_cells):
        flat = simulate_counts_cox(PARAMS, two_cells, 1)
        with pytest.raises(DomainError):
            project_counts(flat, axis=0)
        square = simulate_counts_cox(PARAMS, QuadratGrid(unit_square, (2, 2)), 1)
        with pytest.raises(DomainError):
            project_counts(square, axis=2)

    @pytest.mark.statistical
    def test_column_counts_follow_column_volume(self, unit_square):
        params = GwdParams(a=2.0, k=4.0, rho=6.0)
        grid = QuadratGrid(unit_square, (4, 4))
        generator = np.random.default_rng(82)
        columns = [
            project_counts(simulate_counts_cox(params, grid, generator), axis=1).counts[0]
            for _ in range(20_000)
        ]
        table = ugwd_pmf_table(params.with_shape(params.k * 0.25), max_n=30)
        assert tv_distance(empirical_pmf(columns, 30), table) < 0.02
