"""
Marked (multivariate) Waring process on window × {1, …, m}.

Marks are extra cells of the same volume: counts live on grid.shape + (m,)
and are simulated by the ordinary backends on that product grid, so all
(cell, mark) counts share one mixing draw.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from waring.distribution import GwdParams
from waring.errors import (
    DimensionMismatchError,
    DomainError,
    HeterogeneousGridError,
    ValidationError,
)
from waring.geometry import Backend, CountField, FieldMeta, QuadratGrid
from waring.process import BACKENDS
from waring.utils import resolve_rng

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MarkedGrid:
    grid: QuadratGrid
    num_marks: int

    def __post_init__(self) -> None:
        if self.num_marks < 1:
            raise ValidationError(f"num_marks must be >= 1, got {self.num_marks}")

    @property
    def shape(self) -> tuple[int, ...]:
        return self.grid.shape + (self.num_marks,)


@dataclass(frozen=True)
class MarkedCountField:
    """Counts per (cell, mark); the last axis indexes marks 1..m."""

    marked_grid: MarkedGrid
    counts: np.ndarray
    meta: FieldMeta

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.shape != self.marked_grid.shape:
            raise DimensionMismatchError(
                f"counts shape {counts.shape} does not match {self.marked_grid.shape}"
            )
        object.__setattr__(self, "counts", counts)

    @property
    def num_marks(self) -> int:
        return self.marked_grid.num_marks

    @property
    def grid(self) -> QuadratGrid:
        return self.marked_grid.grid


def simulate_marked_counts(
    params: GwdParams,
    marked_grid: MarkedGrid,
    rng: np.random.Generator | int | None,
    backend: Backend = Backend.COX,
) -> MarkedCountField:
    """Joint MGWD counts with shape k·cell_volume for every (cell, mark) pair."""
    if backend not in BACKENDS:
        raise DomainError(f"backend {backend.value!r} does not simulate the Waring process")
    generator, seed = resolve_rng(rng)
    counts = BACKENDS[backend](params, marked_grid.grid.cell_volume, marked_grid.shape, generator)
    meta = FieldMeta(model="marked_gwp", params=params.to_dict(), seed=seed, backend=backend)
    return MarkedCountField(marked_grid=marked_grid, counts=counts, meta=meta)


def _check_mark(field: MarkedCountField, mark: int) -> None:
    if not 1 <= mark <= field.num_marks:
        raise IndexError(f"mark {mark} outside 1..{field.num_marks}")


def _scaled_meta(meta: FieldMeta, factor: int) -> FieldMeta:
    params = dict(meta.params)
    if "k" in params:
        params["k"] = params["k"] * factor
    return FieldMeta(
        model="gwp", params=params, seed=meta.seed, backend=meta.backend, replicate=meta.replicate
    )


def marginal_counts(field: MarkedCountField, mark: int) -> CountField:
    """Counts of one mark (1-based); a Waring process with the same (a, k, ρ)."""
    _check_mark(field, mark)
    return CountField(
        grid=field.grid, counts=field.counts[..., mark - 1], meta=_scaled_meta(field.meta, 1)
    )


def superpose_marks(field: MarkedCountField, marks: Sequence[int]) -> CountField:
    """Cellwise sum over a set of l marks; a Waring process with shape k·l."""
    if not marks:
        raise DomainError("superpose_marks needs at least one mark")
    if len(set(marks)) != len(marks):
        raise DomainError(f"duplicate marks in {list(marks)}")
    for mark in marks:
        _check_mark(field, mark)
    index = [m - 1 for m in marks]
    summed = field.counts[..., index].sum(axis=-1)
    return CountField(grid=field.grid, counts=summed, meta=_scaled_meta(field.meta, len(marks)))


def pair_with_rest(field: MarkedCountField, mark: int) -> tuple[CountField, CountField]:
    """(N_i, Σ_{j≠i} N_j), jointly BGWD(a; kμ, (m−1)kμ; ρ) cell by cell."""
    _check_mark(field, mark)
    if field.num_marks < 2:
        raise DomainError("pair_with_rest needs at least two marks")
    rest = [m for m in range(1, field.num_marks + 1) if m != mark]
    return marginal_counts(field, mark), superpose_marks(field, rest)


def stack_marks(fields: Sequence[CountField]) -> MarkedCountField:
    """Re-stack per-mark fields (mark i = fields[i-1]) into one marked field."""
    if not fields:
        raise DomainError("stack_marks needs at least one field")
    grid = fields[0].grid
    if any(f.grid.shape != grid.shape or f.grid.cell_volume != grid.cell_volume for f in fields):
        raise HeterogeneousGridError("fields to stack must share one grid")
    meta = fields[0].meta
    return MarkedCountField(
        marked_grid=MarkedGrid(grid, len(fields)),
        counts=np.stack([f.counts for f in fields], axis=-1),
        meta=FieldMeta(
            model="marked_gwp",
            params=dict(meta.params),
            seed=meta.seed,
            backend=meta.backend,
            replicate=meta.replicate,
        ),
    )


def project_counts(field: CountField, axis: int) -> CountField:
    """
    Sum counts over ``axis`` (the discarded axis).

    The projected grid lives on the remaining axes with the discarded extent
    folded into the density: the window volume and the total are unchanged and
    each projected cell carries the volume of the column it sums.
    """
    grid = field.grid
    if grid.dim < 2 or not 0 <= axis < grid.dim:
        raise DomainError(f"cannot project a {grid.dim}-d field along axis {axis}")
    cells = tuple(n for i, n in enumerate(grid.cells_per_axis) if i != axis)
    projected = QuadratGrid(grid.window.drop_axis(axis), cells)
    return CountField(grid=projected, counts=field.counts.sum(axis=axis), meta=field.meta)
