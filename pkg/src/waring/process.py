"""
The generalized Waring point process in quadrat-count form.

Counts on disjoint cells A_1..A_n are jointly MGWD(a; kμ(A_1),…,kμ(A_n); ρ).
Two exchangeable simulators realize that law:

- ``simulate_counts_cox``: one global p ~ Beta(ρ, a), then per cell
  Gamma(k·vol, (1−p)/p) intensities and Poisson counts.
- ``simulate_counts_conditional``: the window total M ~ GWD(a, k·vol(W); ρ),
  split over the cells by Dirichlet-multinomial allocation.
"""

import logging
import math
from collections.abc import Callable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from typing import Any

import numpy as np
from scipy import special

from waring.distribution import (
    GwdParams,
    MgwdParams,
    conditional_allocation,
    dirichlet_draw,
    draw_mixing,
    falling_denominator,
    mgwd_log_pmf,
    poisson_counts,
    sample_ugwd,
)
from waring.errors import DimensionMismatchError, DomainError
from waring.geometry import Backend, CountField, FieldMeta, PointPattern, QuadratGrid, Window
from waring.special import SolverConfig, log_rising, solve_avoidance_inverse
from waring.utils import DEFAULT_RESOLUTION, DEGENERATE_SHAPE, replicate_rng, resolve_rng

logger = logging.getLogger(__name__)

RngLike = np.random.Generator | int | None
Simulator = Callable[[Any, QuadratGrid, RngLike], CountField]

FACE_MARGIN = 1e-9  # Jitter offsets stay this far inside their cell


def _meta(params: GwdParams, seed: int | None, backend: Backend) -> FieldMeta:
    return FieldMeta(model="gwp", params=params.to_dict(), seed=seed, backend=backend)


def avoidance_probability(params: GwdParams, volume: float) -> float:
    """P₀(A) = ρ_(kμ(A)) / (ρ+a)_(kμ(A)); a function of μ(A) only."""
    if volume < 0:
        raise DomainError(f"volume must be nonnegative, got {volume}")
    shape = params.k * volume
    if shape < DEGENERATE_SHAPE:
        return 1.0
    return math.exp(log_rising(params.rho, shape) - log_rising(params.rho + params.a, shape))


def invert_avoidance(params: GwdParams, p0: float, cfg: SolverConfig | None = None) -> float:
    """Recover μ(A) from P₀(A); the avoidance function determines the measure."""
    return solve_avoidance_inverse(params.a, params.rho, p0, cfg) / params.k


def simulate_counts_cox(params: GwdParams, grid: QuadratGrid, rng: RngLike) -> CountField:
    generator, seed = resolve_rng(rng)
    counts = _cox_counts(params, grid.cell_volume, grid.shape, generator)
    return CountField(grid=grid, counts=counts, meta=_meta(params, seed, Backend.COX))


def _cox_counts(
    params: GwdParams,
    cell_volume: float,
    shape: tuple[int, ...],
    generator: np.random.Generator,
) -> np.ndarray:
    cell_shape = params.k * cell_volume
    mixing = draw_mixing(params, generator)
    if cell_shape < DEGENERATE_SHAPE:
        return np.zeros(shape, dtype=np.int64)
    rates = generator.gamma(cell_shape, mixing.theta, size=shape)
    return np.asarray(poisson_counts(rates, generator), dtype=np.int64)


def simulate_counts_conditional(
    params: GwdParams,
    grid: QuadratGrid,
    rng: RngLike,
) -> CountField:
    generator, seed = resolve_rng(rng)
    counts = _conditional_counts(params, grid.cell_volume, grid.shape, generator)
    return CountField(grid=grid, counts=counts, meta=_meta(params, seed, Backend.CONDITIONAL))


def _conditional_counts(
    params: GwdParams,
    cell_volume: float,
    shape: tuple[int, ...],
    generator: np.random.Generator,
) -> np.ndarray:
    cells = math.prod(shape)
    cell_shape = params.k * cell_volume
    if cell_shape < DEGENERATE_SHAPE:
        return np.zeros(shape, dtype=np.int64)
    total = sample_ugwd(params.with_shape(cell_shape * cells), generator)
    weights = np.full(cells, cell_shape)
    return conditional_allocation(total, weights, generator).reshape(shape)


BACKENDS: dict[Backend, Callable[..., np.ndarray]] = {
    Backend.COX: _cox_counts,
    Backend.CONDITIONAL: _conditional_counts,
}


def simulate_ensemble(
    params: GwdParams,
    grid: QuadratGrid,
    replicates: int,
    rng: RngLike,
    backend: Backend = Backend.COX,
) -> np.ndarray:
    """
    Vectorized replicate counts, shape (replicates,) + grid shape.

    Draws the same laws as the per-field simulators from a single stream; use
    ``simulate_replicates`` when per-replicate provenance is needed.
    """
    generator, _ = resolve_rng(rng)
    if replicates < 1:
        raise DomainError(f"replicates must be >= 1, got {replicates}")
    out_shape = (replicates,) + grid.shape
    cell_shape = params.k * grid.cell_volume
    if cell_shape < DEGENERATE_SHAPE:
        return np.zeros(out_shape, dtype=np.int64)
    if backend is Backend.COX:
        theta = np.asarray(draw_mixing(params, generator, size=replicates).theta)
        theta = theta.reshape((replicates,) + (1,) * grid.dim)
        rates = generator.gamma(cell_shape, theta, size=out_shape)
        return np.asarray(poisson_counts(rates, generator), dtype=np.int64)
    if backend is Backend.CONDITIONAL:
        totals = sample_ugwd(params.with_shape(cell_shape * grid.num_cells), generator, replicates)
        if grid.num_cells == 1:
            return totals.reshape(out_shape)
        weights = np.full(grid.num_cells, cell_shape)
        q = dirichlet_draw(weights, generator, rows=replicates)
        return np.asarray(generator.multinomial(totals, q), dtype=np.int64).reshape(out_shape)
    raise DomainError(f"backend {backend.value!r} does not simulate the Waring process")


def conditional_count_pmf(
    params: GwdParams,
    vol_b: float,
    vol_w: float,
    n: int,
    j: int,
) -> float:
    """
    P(N(B) = j | N(W) = n) for B ⊂ W.

    Beta-binomial with shapes k·μ(B) and k·(μ(W) − μ(B)):
    C(n, j)·(kμ_B)_(j)·(k(μ_W − μ_B))_(n−j) / (kμ_W)_(n).
    """
    if not 0 < vol_b < vol_w:
        raise DomainError(f"need 0 < vol_b < vol_w, got vol_b={vol_b}, vol_w={vol_w}")
    if not 0 <= j <= n:
        raise DomainError(f"need 0 <= j <= n, got j={j}, n={n}")
    k = params.k
    log_value = (
        special.gammaln(n + 1.0)
        - special.gammaln(j + 1.0)
        - special.gammaln(n - j + 1.0)
        + log_rising(k * vol_b, j)
        + log_rising(k * (vol_w - vol_b), n - j)
        - log_rising(k * vol_w, n)
    )
    return math.exp(log_value)


def fidi_log_pmf(params: GwdParams, volumes: Sequence[float], counts: Sequence[int]) -> float:
    """Joint log-probability of counts on disjoint sets with the given volumes."""
    if len(volumes) != len(counts):
        raise DimensionMismatchError(f"{len(volumes)} volumes but {len(counts)} counts")
    shapes = tuple(params.k * v for v in volumes)
    return mgwd_log_pmf(MgwdParams(a=params.a, rho=params.rho, shapes=shapes), counts)


def moment_measures(
    params: GwdParams,
    volumes: Sequence[float],
    orders: Sequence[int],
) -> float:
    """
    Factorial moment measure of disjoint sets.

    a_(Σr) Π (k·vol_i)_(r_i) / ((ρ−1)⋯(ρ−Σr)). Order (1) is the intensity
    measure akμ(A)/(ρ−1); orders (1, 1) the second-order moment measure of two
    disjoint sets.
    """
    if len(volumes) != len(orders):
        raise DimensionMismatchError(f"{len(volumes)} volumes but {len(orders)} orders")
    if any(v <= 0 for v in volumes):
        raise DomainError(f"volumes must be positive, got {list(volumes)}")
    if any(r < 0 for r in orders):
        raise DomainError(f"orders must be nonnegative, got {list(orders)}")
    total = int(sum(orders))
    denominator = falling_denominator(params.rho, total)
    log_num = log_rising(params.a, total) + math.fsum(
        log_rising(params.k * v, r) for v, r in zip(volumes, orders)
    )
    return math.exp(log_num) / denominator


def intensity(params: GwdParams) -> float:
    """Intensity rate η = ak/(ρ−1)."""
    return params.a * params.k / falling_denominator(params.rho, 1)


def factorial_moment_density(params: GwdParams, order: int) -> float:
    """Reduced factorial moment density a_(n)·kⁿ/((ρ−1)⋯(ρ−n)); finite iff ρ > n."""
    if order < 1:
        raise DomainError(f"order must be >= 1, got {order}")
    denominator = falling_denominator(params.rho, order)
    return math.exp(log_rising(params.a, order) + order * math.log(params.k)) / denominator


def pair_correlation(params: GwdParams) -> float:
    """g = (a+1)(ρ−1)/(a(ρ−2)), constant in the separation."""
    falling_denominator(params.rho, 2)
    return (params.a + 1.0) * (params.rho - 1.0) / (params.a * (params.rho - 2.0))


def count_grid(pattern: PointPattern, grid: QuadratGrid) -> np.ndarray:
    """Quadrat counts of a point pattern on a grid over the same window."""
    if pattern.window.dim != grid.dim:
        raise DimensionMismatchError(
            f"{pattern.window.dim}-d pattern cannot be counted on a {grid.dim}-d grid"
        )
    if len(pattern) == 0:
        return np.zeros(grid.shape, dtype=np.int64)
    lower = np.asarray(grid.window.lower)
    scaled = (pattern.points - lower) / np.asarray(grid.cell_extents)
    index = np.clip(np.floor(scaled).astype(np.int64), 0, np.asarray(grid.shape) - 1)
    flat = np.ravel_multi_index(tuple(index.T), grid.shape)
    return np.bincount(flat, minlength=grid.num_cells).reshape(grid.shape).astype(np.int64)


def place_points(field: CountField, rng: RngLike) -> np.ndarray:
    """Uniform positions inside each cell, one row per counted point."""
    generator, _ = resolve_rng(rng)
    grid = field.grid
    cell_ids = np.repeat(np.arange(grid.num_cells), field.flat)
    index = np.column_stack(np.unravel_index(cell_ids, grid.shape)).astype(float)
    offsets = generator.random(index.shape)
    offsets = np.clip(offsets, FACE_MARGIN, 1.0 - FACE_MARGIN)
    return np.asarray(grid.window.lower) + (index + offsets) * np.asarray(grid.cell_extents)


def simulate_points(
    params: GwdParams,
    window: Window,
    resolution: int | Sequence[int] = DEFAULT_RESOLUTION,
    rng: RngLike = None,
) -> PointPattern:
    """
    Point pattern rendered from conditional-backend counts on a fine grid.

    Each cell's points are placed uniformly inside it. The result is exact at
    the grid resolution and an approximation of the continuum process below it.
    """
    generator, _ = resolve_rng(rng)
    if isinstance(resolution, int):
        resolution = (resolution,) * window.dim
    grid = QuadratGrid(window, tuple(resolution))
    field = simulate_counts_conditional(params, grid, generator)
    points = place_points(field, generator)
    logger.debug("Placed %d points on a %s grid", len(points), grid.shape)
    return PointPattern(window=window, points=points)


def merge_cells(field: CountField, factor: int) -> CountField:
    """Sum aligned factor^d blocks of cells into one coarser cell each."""
    coarse = field.grid.coarsened(factor)
    split_shape: list[int] = []
    for n in coarse.shape:
        split_shape.extend((n, factor))
    summed = field.counts.reshape(split_shape).sum(axis=tuple(range(1, 2 * coarse.dim, 2)))
    return CountField(grid=coarse, counts=summed, meta=field.meta)


def _run_chunk(
    simulator: Simulator,
    params: Any,
    grid: QuadratGrid,
    seed: int,
    indices: range,
) -> list[CountField]:
    fields = []
    for index in indices:
        result = simulator(params, grid, replicate_rng(seed, index))
        fields.append(replace(result, meta=replace(result.meta, seed=seed, replicate=index)))
    return fields


def simulate_replicates(
    simulator: Simulator,
    params: Any,
    grid: QuadratGrid,
    replicates: int,
    seed: int,
    workers: int = 1,
) -> list[CountField]:
    """
    Independent replicate fields, replicate i drawn from replicate_rng(seed, i).

    With ``workers > 1`` contiguous index chunks run in a process pool and are
    merged back in replicate order, so the result does not depend on workers.
    """
    if replicates < 1:
        raise DomainError(f"replicates must be >= 1, got {replicates}")
    if workers <= 1 or replicates == 1:
        return _run_chunk(simulator, params, grid, seed, range(replicates))

    bounds = np.linspace(0, replicates, min(workers, replicates) + 1).astype(int)
    chunks = [range(lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
    logger.debug("Running %d replicates in %d chunks", replicates, len(chunks))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(_run_chunk, simulator, params, grid, seed, chunk) for chunk in chunks
        ]
        return [field for future in futures for field in future.result()]

