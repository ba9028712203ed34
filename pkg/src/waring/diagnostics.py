"""Orderliness, ergodicity and dispersion diagnostics for simulated count fields."""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass

import mpmath
import numpy as np

from waring.distribution import GwdParams, sample_ugwd, ugwd_moments
from waring.errors import DomainError, HeterogeneousGridError, InfiniteMomentError
from waring.geometry import CountField
from waring.process import intensity
from waring.special import digamma, log_rising
from waring.utils import fsum, resolve_rng

logger = logging.getLogger(__name__)

MPMATH_DPS = 50
MPMATH_THRESHOLD = 1e-6  # P(N > 0) below this is recomputed in extended precision
MIN_ERGODICITY_REPLICATES = 100


@dataclass(frozen=True)
class OrderlinessRow:
    volume: float
    ratio: float
    printed_atom_limit: float


@dataclass(frozen=True)
class ErgodicityRow:
    """Across-replicate behaviour of N(W)/μ(W) at one window volume."""

    volume: float
    mean: float
    variance: float
    intensity: float
    theory_variance: float
    poisson_mean: float
    poisson_variance: float


@dataclass(frozen=True)
class EmpiricalSummary:
    """Pooled cell-count moments of a homogeneous collection of fields."""

    cell_volume: float
    cells: int
    fields: int
    mean: float
    mean_se: float
    variance: float
    variance_se: float
    dispersion_index: float
    dispersion_se: float


def orderliness_ratio(params: GwdParams, volume: float) -> float:
    """
    P(N(A) > 1) / P(N(A) > 0) = (1 − π₀ − π₁)/(1 − π₀) with shape k·μ(A).

    1 − π₀ is formed with expm1 on the log scale; when it falls below
    MPMATH_THRESHOLD the ratio is recomputed with mpmath.

    Raises:
        DomainError: if volume <= 0 or 1 − π₀ vanishes even in extended precision.
    """
    if not volume > 0:
        raise DomainError(f"volume must be positive, got {volume}")
    a, rho = params.a, params.rho
    shape = params.k * volume
    log_pi0 = log_rising(rho, shape) - log_rising(rho + a, shape)
    p_positive = -math.expm1(log_pi0)
    if p_positive > MPMATH_THRESHOLD:
        pi1 = math.exp(log_pi0) * a * shape / (rho + a + shape)
        return (p_positive - pi1) / p_positive
    logger.debug("orderliness ratio at shape %g falls back to mpmath", shape)
    return _orderliness_ratio_mp(a, rho, shape)


def _orderliness_ratio_mp(a: float, rho: float, shape: float) -> float:
    with mpmath.workdps(MPMATH_DPS):
        a_mp, rho_mp, x = mpmath.mpf(a), mpmath.mpf(rho), mpmath.mpf(shape)
        log_pi0 = (
            mpmath.loggamma(rho_mp + x)
            - mpmath.loggamma(rho_mp)
            - mpmath.loggamma(rho_mp + a_mp + x)
            + mpmath.loggamma(rho_mp + a_mp)
        )
        p_positive = -mpmath.expm1(log_pi0)
        if p_positive <= 0:
            raise DomainError(f"P(N > 0) underflows at shape {shape}")
        pi1 = mpmath.exp(log_pi0) * a_mp * x / (rho_mp + a_mp + x)
        return float((p_positive - pi1) / p_positive)


def printed_atom_limit(params: GwdParams, atom_shape: float) -> float:
    """1 − ρ_(x)·a·x / ((ρ+a)_(x+1) − ρ_(x)) with x = k·μ({atom})."""
    a, rho, x = params.a, params.rho, atom_shape
    rising_rho = math.exp(log_rising(rho, x))
    rising_rho_a = math.exp(log_rising(rho + a, x + 1.0))
    return 1.0 - rising_rho * a * x / (rising_rho_a - rising_rho)


def orderliness_limit(params: GwdParams) -> float:
    """Small-volume limit of the ratio: 1 − a/((ρ+a)(Ψ(ρ+a) − Ψ(ρ)))."""
    a, rho = params.a, params.rho
    return 1.0 - a / ((rho + a) * (digamma(rho + a) - digamma(rho)))


def orderliness_table(params: GwdParams, volumes: Sequence[float]) -> list[OrderlinessRow]:
    """The ratio at each volume, next to the printed atom-limit constant at that shape."""
    return [
        OrderlinessRow(
            volume=float(v),
            ratio=orderliness_ratio(params, v),
            printed_atom_limit=printed_atom_limit(params, params.k * v),
        )
        for v in volumes
    ]


def ergodicity_diagnostic(
    params: GwdParams,
    window_volumes: Sequence[float],
    replicates: int,
    rng: np.random.Generator | int | None,
) -> list[ErgodicityRow]:
    """
    Mean and variance of N(W)/μ(W) over independent windows of growing volume.

    Window totals are GWD(a, k·μ(W); ρ) by additivity and are drawn directly.
    A Poisson process with the same intensity is simulated alongside as the
    calibration column; its variance falls like 1/volume while the Waring
    variance settles at a positive level.
    """
    if replicates < MIN_ERGODICITY_REPLICATES:
        raise DomainError(
            f"replicates must be >= {MIN_ERGODICITY_REPLICATES}, got {replicates}"
        )
    volumes = [float(v) for v in window_volumes]
    if not volumes or any(v <= 0 for v in volumes):
        raise DomainError("window volumes must be positive")
    if any(b <= a for a, b in zip(volumes, volumes[1:])):
        raise DomainError(f"window volumes must be increasing, got {volumes}")
    generator, _ = resolve_rng(rng)
    eta = intensity(params)
    rows = []
    for volume in volumes:
        shape_params = params.with_shape(params.k * volume)
        averages = sample_ugwd(shape_params, generator, size=replicates) / volume
        poisson = generator.poisson(eta * volume, size=replicates) / volume
        try:
            theory_variance = ugwd_moments(shape_params).variance / volume**2
        except InfiniteMomentError:
            theory_variance = math.inf
        rows.append(
            ErgodicityRow(
                volume=volume,
                mean=float(np.mean(averages)),
                variance=float(np.var(averages, ddof=1)),
                intensity=eta,
                theory_variance=theory_variance,
                poisson_mean=float(np.mean(poisson)),
                poisson_variance=float(np.var(poisson, ddof=1)),
            )
        )
        logger.debug("ergodicity row at volume %g: %s", volume, rows[-1])
    return rows


def _moments_from_sums(n: np.ndarray, s1: np.ndarray, s2: np.ndarray):
    mean = s1 / n
    variance = (s2 - n * mean**2) / (n - 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        dispersion = np.where(mean > 0, variance / mean, np.nan)
    return mean, variance, dispersion


def _jackknife_se(estimates: np.ndarray) -> float:
    blocks = len(estimates)
    if blocks < 2:
        return math.nan
    centered = estimates - estimates.mean()
    return math.sqrt((blocks - 1) / blocks * fsum(centered**2))


def empirical_summary(fields: Sequence[CountField]) -> EmpiricalSummary:
    """
    Pooled mean, variance and index of dispersion of cell counts.

    Standard errors are delete-one jackknife estimates over fields (replicates),
    or over cells when a single field is given.

    Raises:
        DomainError: if ``fields`` is empty.
        HeterogeneousGridError: if the fields do not share grid shape and cell volume.
    """
    if not fields:
        raise DomainError("empirical_summary needs at least one field")
    reference = fields[0].grid
    for f in fields[1:]:
        if f.grid.shape != reference.shape or f.grid.cell_volume != reference.cell_volume:
            raise HeterogeneousGridError(
                f"grid {f.grid.shape}/{f.grid.cell_volume} differs from "
                f"{reference.shape}/{reference.cell_volume}"
            )
    if len(fields) > 1:
        blocks = np.stack([f.flat for f in fields]).astype(float)
    else:
        blocks = fields[0].flat.astype(float)[:, np.newaxis]
    if blocks.size < 2:
        raise DomainError("empirical_summary needs at least two cell counts")
    block_n = np.full(len(blocks), blocks.shape[1], dtype=float)
    block_s1 = blocks.sum(axis=1)
    block_s2 = (blocks**2).sum(axis=1)
    n, s1, s2 = block_n.sum(), fsum(block_s1), fsum(block_s2)
    mean, variance, dispersion = _moments_from_sums(np.array(n), np.array(s1), np.array(s2))

    leave_n, leave_s1, leave_s2 = n - block_n, s1 - block_s1, s2 - block_s2
    usable = leave_n > 1
    jack_mean, jack_var, jack_disp = _moments_from_sums(
        leave_n[usable], leave_s1[usable], leave_s2[usable]
    )
    return EmpiricalSummary(
        cell_volume=reference.cell_volume,
        cells=reference.num_cells,
        fields=len(fields),
        mean=float(mean),
        mean_se=_jackknife_se(jack_mean),
        variance=float(variance),
        variance_se=_jackknife_se(jack_var),
        dispersion_index=float(dispersion),
        dispersion_se=_jackknife_se(jack_disp) if np.all(np.isfinite(jack_disp)) else math.nan,
    )
