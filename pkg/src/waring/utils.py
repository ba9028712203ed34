"""Utility functions and constants for waring."""

import math
from collections.abc import Sequence

import numpy as np

from waring.errors import UsageError

# Constants
SCHEMA_VERSION = 1  # JSON metadata schema
DEFAULT_RESOLUTION = 64  # Cells per axis for continuum point placement
QUANTILE_CAP = 10**7  # Max support scanned by ugwd_quantile
TAIL_TOLERANCE = 1e-12  # Heuristic tail bound for adaptive pmf tables
DEFAULT_TABLE_CAP = 10**6  # Max length of adaptive pmf tables
TABLE_CHUNK = 4096  # Terms generated per step when growing a table
POISSON_LAM_MAX = 1e18  # numpy's Poisson sampler rejects larger rates
DEGENERATE_SHAPE = 1e-300  # Shapes below this are treated as a point mass at 0


def replicate_rng(seed: int, index: int) -> np.random.Generator:
    """
    Build the generator for one replicate.

    The stream is derived from ``SeedSequence(seed, spawn_key=(index,))``, so
    replicate ``index`` sees the same numbers whether replicates run serially,
    in parallel, or alone.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def resolve_rng(
    rng: np.random.Generator | int | None,
) -> tuple[np.random.Generator, int | None]:
    """Return a generator and the seed it came from (None when unknown)."""
    if isinstance(rng, np.random.Generator):
        return rng, None
    if rng is None:
        return np.random.default_rng(), None
    seed = int(rng)
    return np.random.default_rng(seed), seed


def format_float(value: float) -> str:
    """Shortest round-trip decimal for a float."""
    return repr(float(value))


def parse_float_list(text: str) -> list[float]:
    """Parse ``"1,2.5,3"`` into floats."""
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise UsageError(f"Invalid number list: {text!r}") from e


def parse_int_list(text: str) -> list[int]:
    """Parse ``"8,8"`` into integers."""
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise UsageError(f"Invalid integer list: {text!r}") from e


def parse_volumes(text: str) -> list[float]:
    """
    Parse a volume list.

    Accepts a comma list (``"1,10,100"``) or a decade range such as
    ``"1e-1..1e-8"``, which expands to one value per power of ten from the
    first endpoint to the second, in the order written.
    """
    if ".." not in text:
        return parse_float_list(text)
    start_text, _, stop_text = text.partition("..")
    try:
        start, stop = float(start_text), float(stop_text)
    except ValueError as e:
        raise UsageError(f"Invalid volume range: {text!r}") from e
    if start <= 0 or stop <= 0:
        raise UsageError(f"Volume range endpoints must be positive: {text!r}")
    lo, hi = math.log10(start), math.log10(stop)
    steps = int(round(abs(hi - lo)))
    direction = 1 if hi >= lo else -1
    return [float(10.0 ** (lo + direction * i)) for i in range(steps + 1)]


def standard_error(values: Sequence[float] | np.ndarray) -> float:
    """Standard error of the sample mean."""
    arr = np.asarray(values, dtype=float)
    if arr.size < 2:
        return math.inf
    return float(np.std(arr, ddof=1) / math.sqrt(arr.size))


def fsum(values: Sequence[float] | np.ndarray) -> float:
    """Compensated sum used for every probability accumulation."""
    return math.fsum(np.asarray(values, dtype=float).ravel().tolist())


def compensated_cumsum(values: Sequence[float] | np.ndarray) -> np.ndarray:
    """Running sums with Neumaier compensation."""
    out = np.empty(len(values))
    total = 0.0
    correction = 0.0
    for i, value in enumerate(np.asarray(values, dtype=float).tolist()):
        t = total + value
        if abs(total) >= abs(value):
            correction += (total - t) + value
        else:
            correction += (value - t) + total
        total = t
        out[i] = total + correction
    return out
