"""Windows, quadrat grids and the count/point containers produced by the simulators."""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np

from waring.errors import DimensionMismatchError, DomainError, ValidationError

MAX_DIM = 3
EXTENT_RTOL = 1e-9  # Stored extents may differ from upper − lower by rounding only


class Backend(Enum):
    """Simulator that produced a field."""

    COX = "cox"
    CONDITIONAL = "conditional"
    POLYA = "polya"
    CLUSTER_NB = "cluster_nb"
    POISSON = "poisson"


@dataclass(frozen=True)
class Window:
    """
    Axis-aligned box in R^d (d <= 3) carrying the measure density·Lebesgue.

    ``extents`` defaults to upper − lower. Translated copies keep the original
    extents, so every volume derived from a translated window is bit-identical.
    """

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    density: float = 1.0
    extents: tuple[float, ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        lower = tuple(float(x) for x in self.lower)
        upper = tuple(float(x) for x in self.upper)
        if not 1 <= len(lower) <= MAX_DIM:
            raise ValidationError(f"window dimension must be 1..{MAX_DIM}, got {len(lower)}")
        if len(lower) != len(upper):
            raise ValidationError(f"lower has {len(lower)} coordinates, upper has {len(upper)}")
        if any(not lo < hi for lo, hi in zip(lower, upper)):
            raise ValidationError(f"lower must be < upper componentwise: {lower} vs {upper}")
        if not (math.isfinite(self.density) and self.density > 0):
            raise ValidationError(f"density must be positive, got {self.density}")
        spans = tuple(hi - lo for lo, hi in zip(lower, upper))
        extents = tuple(float(e) for e in self.extents) or spans
        if len(extents) != len(lower):
            raise ValidationError("extents must have one entry per axis")
        if any(
            not (e > 0 and math.isclose(e, span, rel_tol=EXTENT_RTOL))
            for e, span in zip(extents, spans)
        ):
            raise ValidationError(f"extents {extents} do not match upper − lower {spans}")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "extents", extents)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def volume(self) -> float:
        """μ(window) = density × Π extents."""
        return self.density * math.prod(self.extents)

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.all((pts >= self.lower) & (pts <= self.upper), axis=1)

    def translated(self, offset: tuple[float, ...]) -> "Window":
        if len(offset) != self.dim:
            raise DimensionMismatchError(
                f"offset has {len(offset)} entries, window is {self.dim}-d"
            )
        return Window(
            lower=tuple(lo + o for lo, o in zip(self.lower, offset)),
            upper=tuple(hi + o for hi, o in zip(self.upper, offset)),
            density=self.density,
            extents=self.extents,
        )

    def drop_axis(self, axis: int) -> "Window":
        """Window on the remaining axes; the dropped extent is folded into the density."""
        if self.dim < 2 or not 0 <= axis < self.dim:
            raise DomainError(f"cannot drop axis {axis} of a {self.dim}-d window")
        keep = [i for i in range(self.dim) if i != axis]
        return Window(
            lower=tuple(self.lower[i] for i in keep),
            upper=tuple(self.upper[i] for i in keep),
            density=self.density * self.extents[axis],
            extents=tuple(self.extents[i] for i in keep),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "lower": list(self.lower),
            "upper": list(self.upper),
            "density": self.density,
            "extents": list(self.extents),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Window":
        return cls(
            lower=tuple(data["lower"]),
            upper=tuple(data["upper"]),
            density=float(data.get("density", 1.0)),
            extents=tuple(data.get("extents", ())),
        )

    @classmethod
    def from_flat(cls, coords: list[float], density: float = 1.0) -> "Window":
        """Build from ``[lo_0, …, lo_{d-1}, hi_0, …, hi_{d-1}]`` (CLI ``--window``)."""
        if len(coords) % 2 or not coords:
            raise ValidationError(f"window needs 2·d coordinates, got {len(coords)}")
        d = len(coords) // 2
        return cls(lower=tuple(coords[:d]), upper=tuple(coords[d:]), density=density)


@dataclass(frozen=True)
class QuadratGrid:
    """Partition of a window into congruent cells."""

    window: Window
    cells_per_axis: tuple[int, ...]

    def __post_init__(self) -> None:
        cells = tuple(int(n) for n in self.cells_per_axis)
        if len(cells) != self.window.dim:
            raise DimensionMismatchError(
                f"{len(cells)} cell counts for a {self.window.dim}-d window"
            )
        if any(n < 1 for n in cells):
            raise ValidationError(f"cells per axis must be >= 1, got {cells}")
        object.__setattr__(self, "cells_per_axis", cells)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.cells_per_axis

    @property
    def dim(self) -> int:
        return self.window.dim

    @property
    def num_cells(self) -> int:
        return math.prod(self.cells_per_axis)

    @property
    def cell_extents(self) -> tuple[float, ...]:
        return tuple(e / n for e, n in zip(self.window.extents, self.cells_per_axis))

    @property
    def cell_volume(self) -> float:
        return self.window.volume / self.num_cells

    def translated(self, offset: tuple[float, ...]) -> "QuadratGrid":
        return QuadratGrid(self.window.translated(offset), self.cells_per_axis)

    def coarsened(self, factor: int) -> "QuadratGrid":
        """Grid over the same window with ``factor`` fewer cells along every axis."""
        if factor < 1 or any(n % factor for n in self.cells_per_axis):
            raise DomainError(f"factor {factor} does not divide the grid shape {self.shape}")
        return QuadratGrid(self.window, tuple(n // factor for n in self.cells_per_axis))

    def to_dict(self) -> dict[str, Any]:
        return {"window": self.window.to_dict(), "cells_per_axis": list(self.cells_per_axis)}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "QuadratGrid":
        return cls(Window.from_dict(data["window"]), tuple(data["cells_per_axis"]))


@dataclass(frozen=True)
class FieldMeta:
    """Provenance of a simulated field: enough to re-run it exactly."""

    model: str
    params: dict[str, float]
    seed: int | None
    backend: Backend
    replicate: int | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "model": self.model,
            "params": dict(self.params),
            "seed": self.seed,
            "backend": self.backend.value,
            "replicate": self.replicate,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "FieldMeta":
        return cls(
            model=data["model"],
            params={key: float(value) for key, value in data["params"].items()},
            seed=data.get("seed"),
            backend=Backend(data["backend"]),
            replicate=data.get("replicate"),
        )


@dataclass(frozen=True)
class CountField:
    """Per-cell counts on a quadrat grid, shaped like the grid."""

    grid: QuadratGrid
    counts: np.ndarray
    meta: FieldMeta

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.shape != self.grid.shape:
            raise DimensionMismatchError(
                f"counts shape {counts.shape} does not match grid shape {self.grid.shape}"
            )
        if np.any(counts < 0):
            raise ValidationError("counts must be nonnegative")
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def flat(self) -> np.ndarray:
        return self.counts.ravel()


@dataclass(frozen=True)
class PointPattern:
    """Points inside a window, with optional 1-based integer marks."""

    window: Window
    points: np.ndarray
    marks: np.ndarray | None = None

    def __post_init__(self) -> None:
        points = np.asarray(self.points, dtype=float).reshape(-1, self.window.dim)
        if points.size and not np.all(self.window.contains(points)):
            raise ValidationError("every point must lie inside the window")
        object.__setattr__(self, "points", points)
        if self.marks is not None:
            marks = np.asarray(self.marks, dtype=np.int64)
            if marks.shape != (len(points),):
                raise DimensionMismatchError(
                    f"{len(marks)} marks for {len(points)} points"
                )
            object.__setattr__(self, "marks", marks)

    def __len__(self) -> int:
        return len(self.points)
