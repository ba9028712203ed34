"""Reference count processes and the negative binomial / Poisson limit experiments."""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from scipy import stats

from waring.distribution import GwdParams, PmfTable, tv_distance, ugwd_pmf_table
from waring.errors import DomainError, ValidationError
from waring.geometry import Backend, CountField, FieldMeta, QuadratGrid
from waring.process import avoidance_probability
from waring.utils import resolve_rng

logger = logging.getLogger(__name__)

RngLike = np.random.Generator | int | None

LIMIT_TAIL = 1e-16  # Support of limit-curve tables extends to this upper-tail mass


def _require_positive(name: str, value: float) -> None:
    if not (math.isfinite(value) and value > 0):
        raise ValidationError(f"{name} must be positive, got {value!r}")


@dataclass(frozen=True)
class PolyaParams:
    """Global intensity Λ ~ Gamma(shape alpha, scale beta)."""

    alpha: float
    beta: float

    def __post_init__(self) -> None:
        _require_positive("alpha", self.alpha)
        _require_positive("beta", self.beta)

    def to_dict(self) -> dict[str, float]:
        return {"alpha": self.alpha, "beta": self.beta}


@dataclass(frozen=True)
class ClusterNbParams:
    """Cluster centres at rate ``lam``; cluster sizes logarithmic with θ = δ/(1+δ)."""

    lam: float
    delta: float

    def __post_init__(self) -> None:
        _require_positive("lambda", self.lam)
        _require_positive("delta", self.delta)

    @property
    def theta(self) -> float:
        return self.delta / (1.0 + self.delta)

    def nb_shape(self, volume: float) -> float:
        """Shape λμ/ln(1+δ) of the negative binomial cell marginal."""
        return self.lam * volume / math.log1p(self.delta)

    def to_dict(self) -> dict[str, float]:
        return {"lambda": self.lam, "delta": self.delta}


@dataclass(frozen=True)
class LimitRow:
    param: float
    tv_distance: float


@dataclass(frozen=True)
class MultiplicityRow:
    volume: float
    ratio: float


def simulate_polya_counts(params: PolyaParams, grid: QuadratGrid, rng: RngLike) -> CountField:
    """
    Mixed Poisson counts with one global gamma intensity.

    Cell marginal pgf (1 + βμ(1−z))^(−α); variance αβμ + αβ²μ².
    """
    generator, seed = resolve_rng(rng)
    lam = generator.gamma(params.alpha, params.beta)
    counts = generator.poisson(lam * grid.cell_volume, size=grid.shape)
    meta = FieldMeta(model="polya", params=params.to_dict(), seed=seed, backend=Backend.POLYA)
    return CountField(grid=grid, counts=counts, meta=meta)


def simulate_cluster_nb_counts(
    params: ClusterNbParams,
    grid: QuadratGrid,
    rng: RngLike,
) -> CountField:
    """
    Poisson-logarithmic cluster counts, cells independent.

    M ~ Poisson(λ·vol) clusters per cell, each of logarithmic size with
    θ = δ/(1+δ); cell marginal pgf (1 + δ(1−z))^(−λμ/ln(1+δ)).
    """
    generator, seed = resolve_rng(rng)
    clusters = generator.poisson(params.lam * grid.cell_volume, size=grid.num_cells)
    sizes = generator.logseries(params.theta, size=int(clusters.sum()))
    owner = np.repeat(np.arange(grid.num_cells), clusters)
    counts = np.bincount(owner, weights=sizes, minlength=grid.num_cells)
    meta = FieldMeta(
        model="cluster_nb", params=params.to_dict(), seed=seed, backend=Backend.CLUSTER_NB
    )
    return CountField(grid=grid, counts=counts.astype(np.int64).reshape(grid.shape), meta=meta)


def simulate_poisson_counts(intensity: float, grid: QuadratGrid, rng: RngLike) -> CountField:
    """Independent Poisson(intensity·cell_volume) counts."""
    _require_positive("intensity", intensity)
    generator, seed = resolve_rng(rng)
    counts = generator.poisson(intensity * grid.cell_volume, size=grid.shape)
    meta = FieldMeta(
        model="poisson", params={"intensity": intensity}, seed=seed, backend=Backend.POISSON
    )
    return CountField(grid=grid, counts=counts, meta=meta)


def _table(pmf: np.ndarray) -> PmfTable:
    return PmfTable.closed(pmf)


def polya_pmf_table(params: PolyaParams, volume: float, max_n: int) -> PmfTable:
    n = np.arange(max_n + 1)
    return _table(stats.nbinom.pmf(n, params.alpha, 1.0 / (1.0 + params.beta * volume)))


def cluster_nb_pmf_table(params: ClusterNbParams, volume: float, max_n: int) -> PmfTable:
    n = np.arange(max_n + 1)
    return _table(stats.nbinom.pmf(n, params.nb_shape(volume), 1.0 / (1.0 + params.delta)))


def poisson_pmf_table(intensity: float, volume: float, max_n: int) -> PmfTable:
    return _table(stats.poisson.pmf(np.arange(max_n + 1), intensity * volume))


def nb_limit_pmf_table(a: float, c: float, volume: float, max_n: int) -> PmfTable:
    """NB limit of GWD(a, kμ; ck) as k → ∞: pgf (1 + μ(1−z)/c)^(−a)."""
    return polya_pmf_table(PolyaParams(alpha=a, beta=1.0 / c), volume, max_n)


def nb_limit_avoidance(a: float, c: float, volume: float, k: float) -> tuple[float, float]:
    """(π₀ of GWD(a, kμ; ck), its k → ∞ limit (c/(c+μ))^a)."""
    pi0 = avoidance_probability(GwdParams(a=a, k=k, rho=c * k), volume)
    return pi0, (c / (c + volume)) ** a


def _check_increasing(name: str, values: Sequence[float]) -> list[float]:
    out = [float(v) for v in values]
    if not out or any(v <= 0 for v in out):
        raise DomainError(f"{name} must be positive")
    if any(b <= a for a, b in zip(out, out[1:])):
        raise DomainError(f"{name} must be increasing, got {out}")
    return out


def nb_limit_curve(
    a: float,
    c: float,
    volume: float,
    k_values: Sequence[float],
) -> list[LimitRow]:
    """TV between GWD(a, k·μ; c·k) and its negative binomial limit, per k."""
    rows = []
    for k in _check_increasing("k_values", k_values):
        gwd = ugwd_pmf_table(GwdParams(a=a, k=k * volume, rho=c * k))
        limit = nb_limit_pmf_table(a, c, volume, gwd.support_bound)
        rows.append(LimitRow(param=k, tv_distance=tv_distance(gwd, limit)))
        logger.debug("nb limit k=%g: %d terms, tv %.3e", k, len(gwd.values), rows[-1].tv_distance)
    return rows


def poisson_limit_curve(
    lam: float,
    volume: float,
    c_values: Sequence[float],
) -> list[LimitRow]:
    """TV between NB(shape λc, pgf (1 + μ(1−z)/c)^(−λc)) and Poisson(λμ), per c."""
    if not (math.isfinite(lam) and lam >= 0):
        raise ValidationError(f"lambda must be nonnegative, got {lam!r}")
    _require_positive("volume", volume)
    c_list = _check_increasing("c_values", c_values)
    if lam == 0:
        return [LimitRow(param=c, tv_distance=0.0) for c in c_list]
    rows = []
    mean = lam * volume
    for c in c_list:
        nb = stats.nbinom(lam * c, c / (c + volume))
        max_n = int(max(nb.isf(LIMIT_TAIL), stats.poisson.isf(LIMIT_TAIL, mean))) + 1
        n = np.arange(max_n + 1)
        distance = tv_distance(_table(nb.pmf(n)), poisson_pmf_table(lam, volume, max_n))
        rows.append(LimitRow(param=c, tv_distance=distance))
    return rows


def cluster_multiplicity_table(
    params: ClusterNbParams,
    volumes: Sequence[float],
) -> list[MultiplicityRow]:
    """
    P(N ≥ 2 | N ≥ 1) of the cluster process at each volume.

    Tends to 1 − δ/((1+δ)ln(1+δ)) > 0 as the volume shrinks: coincident
    points do not vanish, the process is not orderly.
    """
    rows = []
    p_fail = params.delta / (1.0 + params.delta)
    for volume in volumes:
        if not volume > 0:
            raise DomainError(f"volume must be positive, got {volume}")
        r = params.nb_shape(volume)
        log_pi0 = -r * math.log1p(params.delta)
        p_positive = -math.expm1(log_pi0)
        pi1 = math.exp(log_pi0) * r * p_fail
        rows.append(MultiplicityRow(volume=float(volume), ratio=(p_positive - pi1) / p_positive))
    return rows


def cluster_nb_mean(params: ClusterNbParams, volume: float) -> float:
    """λμδ/ln(1+δ)."""
    return params.lam * volume * params.delta / math.log1p(params.delta)
