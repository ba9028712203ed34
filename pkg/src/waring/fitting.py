"""Method-of-moments fitting of (a, k, ρ) from replicate counts at one volume."""

import logging
import math
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field, replace
from typing import Any

import numpy as np

from waring.errors import DomainError, InsufficientSampleError
from waring.utils import fsum

logger = logging.getLogger(__name__)

MIN_FIT_SAMPLE = 1000


@dataclass(frozen=True)
class FitResult:
    """
    Moment estimates of (a, k, ρ).

    ``canonical`` marks the ordering a_hat <= k_hat·volume: the law is
    symmetric in a and the shape k·volume, so only the unordered pair is
    identifiable. It is set for converged fits only; a fit with a negative
    or missing root makes no claim about the ordering.
    """

    a_hat: float
    k_hat: float
    rho_hat: float
    matched_moments: tuple[float, float, float]
    canonical: bool
    converged: bool
    volume: float = 1.0
    sample_size: int = 0
    message: str = field(default="")

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["matched_moments"] = list(self.matched_moments)
        return data


def sample_factorial_moments(counts: Sequence[int] | np.ndarray) -> tuple[float, float, float]:
    """
    Sample mean and descending factorial moments of orders 2 and 3.

    Computed from the value histogram with compensated sums, so the result
    depends on the multiset of counts only.
    """
    arr = np.asarray(counts, dtype=np.int64).ravel()
    if np.any(arr < 0):
        raise DomainError("counts must be nonnegative")
    histogram = np.bincount(arr).astype(float)
    n = np.arange(len(histogram), dtype=float)
    size = float(arr.size)
    m1 = fsum(histogram * n) / size
    f2 = fsum(histogram * n * (n - 1.0)) / size
    f3 = fsum(histogram * n * (n - 1.0) * (n - 2.0)) / size
    return m1, f2, f3


def solve_moment_equations(mean: float, f2: float, f3: float, volume: float = 1.0) -> FitResult:
    """
    Solve the three moment equations exactly.

    With K = k·volume, q = aK and s = a + K the equations
    E[X] = aK/(ρ−1), E[X(X−1)] = a_(2)K_(2)/((ρ−1)(ρ−2)) and
    E[X(X−1)(X−2)] = a_(3)K_(3)/((ρ−1)(ρ−2)(ρ−3)) become linear in (q, s, ρ);
    a and K are then the roots of t² − st + q.
    """
    moments = (mean, f2, f3)
    if not (mean > 0 and f2 > 0 and f3 > 0):
        return _failed(moments, volume, "sample moments must be positive")
    r2, r3 = f2 / mean, f3 / f2
    system = np.array([[1.0, 0.0, -mean], [1.0, 1.0, -r2], [1.0, 2.0, -r3]])
    rhs = np.array([-mean, -2.0 * r2 - 1.0, -3.0 * r3 - 4.0])
    try:
        q, s, rho = np.linalg.solve(system, rhs)
    except np.linalg.LinAlgError:
        return _failed(moments, volume, "moment system is singular")
    discriminant = s * s - 4.0 * q
    if discriminant < 0:
        return _failed(moments, volume, f"no real (a, k) pair: s²−4q = {discriminant:.6g}")
    root = math.sqrt(discriminant)
    shape = (s + root) / 2.0
    a_hat = q / shape if shape > 0 else (s - root) / 2.0
    converged = a_hat > 0 and shape > 0 and rho > 3
    message = "" if converged else f"implied a={a_hat:.6g}, K={shape:.6g}, rho={rho:.6g}"
    if not converged:
        logger.warning("moment fit did not converge: %s", message)
    return FitResult(
        a_hat=float(a_hat),
        k_hat=float(shape / volume),
        rho_hat=float(rho),
        matched_moments=moments,
        canonical=bool(converged),
        converged=bool(converged),
        volume=volume,
        message=message,
    )


def _failed(moments: tuple[float, float, float], volume: float, message: str) -> FitResult:
    logger.warning("moment fit did not converge: %s", message)
    return FitResult(
        a_hat=math.nan,
        k_hat=math.nan,
        rho_hat=math.nan,
        matched_moments=moments,
        canonical=False,
        converged=False,
        volume=volume,
        message=message,
    )


def fit_moments(counts: Sequence[int] | np.ndarray, volume: float = 1.0) -> FitResult:
    """
    Fit (a, k, ρ) to replicate counts observed on sets of one volume.

    Non-convergence (singular system, complex roots, ρ <= 3) is reported
    through ``converged`` and ``message`` rather than raised.

    Raises:
        InsufficientSampleError: for fewer than MIN_FIT_SAMPLE observations.
        DomainError: if volume <= 0 or counts are negative.
    """
    if not volume > 0:
        raise DomainError(f"volume must be positive, got {volume}")
    size = int(np.asarray(counts).size)
    if size < MIN_FIT_SAMPLE:
        raise InsufficientSampleError(f"need at least {MIN_FIT_SAMPLE} counts, got {size}")
    mean, f2, f3 = sample_factorial_moments(counts)
    result = solve_moment_equations(mean, f2, f3, volume)
    logger.debug("moment fit from %d counts: %s", size, result)
    return replace(result, sample_size=size)
