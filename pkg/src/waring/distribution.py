"""Univariate and multivariate generalized Waring distributions."""

import logging
import math
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

from waring.errors import (
    DimensionMismatchError,
    DomainError,
    InfiniteMomentError,
    QuantileOverflowError,
    ValidationError,
)
from waring.special import gauss_2f1, log_rising
from waring.utils import (
    DEFAULT_TABLE_CAP,
    DEGENERATE_SHAPE,
    POISSON_LAM_MAX,
    QUANTILE_CAP,
    TABLE_CHUNK,
    TAIL_TOLERANCE,
    fsum,
    resolve_rng,
)

logger = logging.getLogger(__name__)

RngLike = np.random.Generator | int | None


def _require_positive(name: str, value: float) -> None:
    try:
        number = float(value)
    except (TypeError, ValueError) as e:
        raise ValidationError(f"{name} must be a number, got {value!r}") from e
    if not (math.isfinite(number) and number > 0):
        raise ValidationError(f"{name} must be a positive finite number, got {value!r}")


@dataclass(frozen=True)
class GwdParams:
    """Parameters (a, k; ρ) of the univariate generalized Waring distribution."""

    a: float
    k: float
    rho: float

    def __post_init__(self) -> None:
        _require_positive("a", self.a)
        _require_positive("k", self.k)
        _require_positive("rho", self.rho)

    def with_shape(self, k: float) -> "GwdParams":
        """Same (a, ρ) with a different shape k."""
        return GwdParams(a=self.a, k=k, rho=self.rho)

    def swapped(self) -> "GwdParams":
        """Swap a and k; the distribution is symmetric in them."""
        return GwdParams(a=self.k, k=self.a, rho=self.rho)

    def to_dict(self) -> dict[str, float]:
        return {"a": self.a, "k": self.k, "rho": self.rho}

    @classmethod
    def from_dict(cls, data: dict[str, float]) -> "GwdParams":
        return cls(a=float(data["a"]), k=float(data["k"]), rho=float(data["rho"]))


@dataclass(frozen=True)
class MgwdParams:
    """Parameters (a; k₁,…,k_s; ρ) of the multivariate generalized Waring distribution."""

    a: float
    rho: float
    shapes: tuple[float, ...]

    def __post_init__(self) -> None:
        _require_positive("a", self.a)
        _require_positive("rho", self.rho)
        if len(self.shapes) < 1:
            raise ValidationError("MGWD needs at least one shape parameter")
        object.__setattr__(self, "shapes", tuple(float(k) for k in self.shapes))
        for i, k in enumerate(self.shapes):
            _require_positive(f"shapes[{i}]", k)

    @property
    def dimension(self) -> int:
        return len(self.shapes)

    @property
    def total_shape(self) -> float:
        return math.fsum(self.shapes)

    def to_dict(self) -> dict[str, object]:
        return {"a": self.a, "rho": self.rho, "shapes": list(self.shapes)}


@dataclass(frozen=True)
class MixingDraw:
    """Latent beta variate p ~ Beta(ρ, a) and its beta-prime transform θ = (1−p)/p."""

    p: np.ndarray | float
    theta: np.ndarray | float


@dataclass(frozen=True)
class PmfTable:
    """
    Probabilities π_0..π_N on a declared support bound, plus the sink.

    ``tail`` is the probability mass beyond the support bound.
    """

    values: np.ndarray
    tail: float = 0.0

    @property
    def support_bound(self) -> int:
        return len(self.values) - 1

    @property
    def mass(self) -> float:
        return fsum(self.values)

    def to_pairs(self) -> list[tuple[int, float]]:
        """Rows (n, probability) for tabular output."""
        return [(n, float(p)) for n, p in enumerate(self.values)]

    @classmethod
    def closed(cls, values: Sequence[float] | np.ndarray) -> "PmfTable":
        """Table whose sink holds whatever the values leave of total mass 1."""
        arr = np.asarray(values, dtype=float)
        return cls(values=arr, tail=max(0.0, 1.0 - fsum(arr)))


# --- univariate ------------------------------------------------------------


def _log_pi0(params: GwdParams) -> float:
    return log_rising(params.rho, params.k) - log_rising(params.rho + params.a, params.k)


def ugwd_log_pmf(params: GwdParams, n):
    """
    ln π_n(a, k; ρ).

    π_n = ρ_(k)/(ρ+a)_(k) · a_(n) k_(n) / ((ρ+a+k)_(n) n!). Accepts an integer
    or an integer array; evaluated entirely through log rising factorials.
    """
    n_arr = np.asarray(n)
    if np.any(n_arr < 0):
        raise DomainError(f"pmf support is the nonnegative integers, got {n}")
    if params.k < DEGENERATE_SHAPE:
        value = np.where(n_arr == 0, 0.0, -np.inf)
    else:
        a, k, rho = params.a, params.k, params.rho
        value = (
            _log_pi0(params)
            + log_rising(a, n_arr)
            + log_rising(k, n_arr)
            - log_rising(rho + a + k, n_arr)
            - special.gammaln(n_arr + 1.0)
        )
    value = np.asarray(value, dtype=float)
    return float(value) if value.ndim == 0 else value


def ugwd_pmf_ratio(params: GwdParams, n):
    """Exact ratio π_{n+1}/π_n = (a+n)(k+n)/((ρ+a+k+n)(n+1))."""
    n_arr = np.asarray(n, dtype=float)
    a, k, rho = params.a, params.k, params.rho
    return (a + n_arr) * (k + n_arr) / ((rho + a + k + n_arr) * (n_arr + 1.0))


def _pmf_chunks(params: GwdParams, chunk: int = TABLE_CHUNK) -> Iterator[tuple[int, np.ndarray]]:
    """Yield (start, π_start..π_{start+chunk-1}) forever, re-anchored at each chunk start."""
    start = 0
    while True:
        n = np.arange(start, start + chunk, dtype=float)
        log_ratio = np.log(ugwd_pmf_ratio(params, n[:-1]))
        logs = ugwd_log_pmf(params, start) + np.concatenate(([0.0], np.cumsum(log_ratio)))
        yield start, np.exp(logs)
        start += chunk


def ugwd_tail_estimate(params: GwdParams, n: int, pi_n: float) -> float:
    """
    Asymptotic mass beyond n, given π_n.

    Uses Σ_{m>n} π_m ≈ π_n·(n/ρ + (ρ(a+k−1)+ak)/(ρ(ρ+1))), the two leading
    terms of the expansion implied by the pmf recurrence.
    """
    a, k, rho = params.a, params.k, params.rho
    return pi_n * (n / rho + (rho * (a + k - 1.0) + a * k) / (rho * (rho + 1.0)))


def ugwd_pmf_table(
    params: GwdParams,
    max_n: int | None = None,
    tol: float = TAIL_TOLERANCE,
    cap: int = DEFAULT_TABLE_CAP,
) -> PmfTable:
    """
    Table of π_0..π_N built with the exact term recurrence.

    With ``max_n`` the table has max_n + 1 entries and the sink is 1 − Σπ.
    Otherwise it grows until, past the mode, the heuristic tail bound
    π_n·(n+a+k)/ρ drops below ``tol`` (or ``cap`` entries are reached), and the
    sink is the asymptotic tail estimate.
    """
    if params.k < DEGENERATE_SHAPE:
        return PmfTable(values=np.array([1.0]), tail=0.0)
    if max_n is not None:
        if max_n < 0:
            raise DomainError(f"max_n must be nonnegative, got {max_n}")
        pieces = []
        for start, values in _pmf_chunks(params):
            pieces.append(values[: max_n + 1 - start])
            if start + len(values) > max_n:
                break
        return PmfTable.closed(np.concatenate(pieces))

    a, k, rho = params.a, params.k, params.rho
    pieces = []
    for start, values in _pmf_chunks(params):
        n = np.arange(start, start + len(values), dtype=float)
        past_mode = ugwd_pmf_ratio(params, n) < 1.0
        bound = values * (n + a + k) / rho
        hits = np.flatnonzero(past_mode & (bound < tol))
        if hits.size:
            stop = int(hits[0])
            pieces.append(values[: stop + 1])
            break
        if start + len(values) >= cap:
            pieces.append(values[: cap - start])
            logger.warning(
                "pmf table for %s hit its cap of %d terms before the tail bound %g",
                params,
                cap,
                tol,
            )
            break
        pieces.append(values)
    table = np.concatenate(pieces)
    last = len(table) - 1
    tail = ugwd_tail_estimate(params, last, float(table[-1]))
    logger.debug("pmf table for %s: %d terms, tail %.3e", params, len(table), tail)
    return PmfTable(values=table, tail=tail)


def ugwd_cdf(params: GwdParams, n: int) -> float:
    """P(X <= n) by compensated summation of the recurrence table."""
    if n < 0:
        return 0.0
    return min(1.0, ugwd_pmf_table(params, max_n=n).mass)


def ugwd_quantile(params: GwdParams, q: float, cap: int = QUANTILE_CAP) -> int:
    """
    Smallest n with cdf(n) >= q.

    Raises:
        DomainError: if q is outside [0, 1).
        QuantileOverflowError: if the scan passes ``cap`` (heavy tail, small ρ).
    """
    if not 0.0 <= q < 1.0:
        raise DomainError(f"quantile level must lie in [0, 1), got {q}")
    if q == 0.0 or params.k < DEGENERATE_SHAPE:
        return 0
    chunk_sums: list[float] = []
    for start, values in _pmf_chunks(params):
        before = math.fsum(chunk_sums)
        cumulative = before + np.cumsum(values)
        hits = np.flatnonzero(cumulative >= q)
        if hits.size and start + int(hits[0]) <= cap:
            return start + int(hits[0])
        chunk_sums.append(fsum(values))
        if start + len(values) > cap:
            raise QuantileOverflowError(
                f"quantile {q} of {params} lies beyond the cap of {cap} (cdf reached {before})"
            )
    raise AssertionError("unreachable")


def falling_denominator(rho: float, order: int) -> float:
    """(ρ−1)(ρ−2)⋯(ρ−order); raises when the moment of that order is infinite."""
    if rho <= order:
        raise InfiniteMomentError(
            f"moments of order {order} are infinite when rho={rho} <= {order}"
        )
    return math.prod(rho - j for j in range(1, order + 1))


@dataclass(frozen=True)
class UgwdMoments:
    """
    Moments of GWD(a, k; ρ).

    Factorial moments are descending: factorial(r) = E[X(X−1)⋯(X−r+1)]
    = a_(r) k_(r) / ((ρ−1)⋯(ρ−r)).
    """

    params: GwdParams

    @property
    def mean(self) -> float:
        p = self.params
        return p.a * p.k / falling_denominator(p.rho, 1)

    @property
    def variance(self) -> float:
        a, k, rho = self.params.a, self.params.k, self.params.rho
        falling_denominator(rho, 2)
        return k * a * (rho + a - 1.0) * (rho + k - 1.0) / ((rho - 1.0) ** 2 * (rho - 2.0))

    def factorial(self, r: int) -> float:
        if r < 0:
            raise DomainError(f"moment order must be nonnegative, got {r}")
        p = self.params
        denominator = falling_denominator(p.rho, r)
        return math.exp(log_rising(p.a, r) + log_rising(p.k, r)) / denominator


def ugwd_moments(params: GwdParams) -> UgwdMoments:
    return UgwdMoments(params)


def ugwd_dispersion_index(params: GwdParams) -> float:
    """Variance/mean = (ρ+a−1)(ρ+k−1)/((ρ−1)(ρ−2)), finite for ρ > 2."""
    moments = ugwd_moments(params)
    return moments.variance / moments.mean


def ugwd_pgf(params: GwdParams, z: float) -> float:
    """E[z^X] = ρ_(k)/(ρ+a)_(k) · ₂F₁(a, k; ρ+a+k; z) for z in [0, 1]."""
    if not 0.0 <= z <= 1.0:
        raise DomainError(f"pgf is evaluated on [0, 1] only, got z={z}")
    if params.k < DEGENERATE_SHAPE:
        return 1.0
    a, k, rho = params.a, params.k, params.rho
    return math.exp(_log_pi0(params)) * gauss_2f1(a, k, rho + a + k, z)


def draw_mixing(params: GwdParams, rng: RngLike, size=None) -> MixingDraw:
    """
    Draw the latent p ~ Beta(ρ, a) and θ = (1−p)/p.

    For small ρ the beta draw can underflow to 0. θ is then the largest finite
    float, so the gamma rates it scales overflow and are clipped at
    ``POISSON_LAM_MAX`` like any other oversized rate.
    """
    generator, _ = resolve_rng(rng)
    p = np.asarray(generator.beta(params.rho, params.a, size=size), dtype=np.float64)
    with np.errstate(divide="ignore"):
        theta = (1.0 - p) / p
    unbounded = ~np.isfinite(theta)
    if np.any(unbounded):
        logger.warning("Mixing draw p underflowed to 0 in %d replicate(s)", int(np.sum(unbounded)))
        theta = np.where(unbounded, np.finfo(np.float64).max, theta)
    if size is None:
        return MixingDraw(p=float(p), theta=float(theta))
    return MixingDraw(p=p, theta=theta)


def poisson_counts(rates, rng: np.random.Generator) -> np.ndarray:
    """Poisson draws, clipping rates the sampler cannot represent."""
    rates = np.asarray(rates, dtype=float)
    if np.any(rates > POISSON_LAM_MAX):
        logger.warning("Clipping %d Poisson rate(s) above %g", int(np.sum(rates > POISSON_LAM_MAX)),
                       POISSON_LAM_MAX)
        rates = np.minimum(rates, POISSON_LAM_MAX)
    return rng.poisson(rates)


def sample_ugwd(params: GwdParams, rng: RngLike, size=None):
    """
    Exact GWD(a, k; ρ) draws.

    p ~ Beta(ρ, a); g ~ Gamma(k, scale (1−p)/p); X ~ Poisson(g). Given p,
    X is negative binomial NB(k, p); mixing over p reproduces π_n exactly.
    Returns an int for ``size=None``, else an int64 array.
    """
    generator, _ = resolve_rng(rng)
    if params.k < DEGENERATE_SHAPE:
        return 0 if size is None else np.zeros(size, dtype=np.int64)
    mixing = draw_mixing(params, generator, size=size)
    rates = generator.gamma(params.k, mixing.theta)
    draws = poisson_counts(rates, generator)
    if size is None:
        return int(draws)
    return np.asarray(draws, dtype=np.int64)


# --- multivariate ----------------------------------------------------------


def mgwd_log_pmf(params: MgwdParams, x: Sequence[int]) -> float:
    """ln P(X₁=x₁,…,X_s=x_s) for MGWD(a; k; ρ)."""
    x_arr = np.asarray(x)
    if x_arr.shape != (params.dimension,):
        raise DimensionMismatchError(
            f"expected {params.dimension} counts, got shape {x_arr.shape}"
        )
    if np.any(x_arr < 0):
        raise DomainError(f"counts must be nonnegative, got {list(x_arr)}")
    shapes = np.asarray(params.shapes)
    big_k = params.total_shape
    total = int(x_arr.sum())
    value = (
        log_rising(params.rho, big_k)
        + log_rising(params.a, total)
        - log_rising(params.rho + params.a, big_k + total)
        + fsum(log_rising(shapes, x_arr) - special.gammaln(x_arr + 1.0))
    )
    return float(value)


def mgwd_marginal_params(params: MgwdParams, indices: Sequence[int]) -> MgwdParams:
    """Parameters of the sub-vector (X_i, i in indices); MGWD is closed under marginalization."""
    if not indices:
        raise DomainError("marginal needs at least one index")
    return MgwdParams(a=params.a, rho=params.rho, shapes=tuple(params.shapes[i] for i in indices))


def mgwd_aggregate_params(params: MgwdParams) -> GwdParams:
    """Law of X₁+…+X_s: GWD(a, Σk_i; ρ)."""
    return GwdParams(a=params.a, k=params.total_shape, rho=params.rho)


@dataclass(frozen=True)
class MgwdMoments:
    """Moments of MGWD(a; k; ρ); factorial moments are descending cross-moments."""

    params: MgwdParams
    _shapes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_shapes", np.asarray(self.params.shapes, dtype=float))

    @property
    def marginal_means(self) -> np.ndarray:
        p = self.params
        return p.a * self._shapes / falling_denominator(p.rho, 1)

    @property
    def marginal_variances(self) -> np.ndarray:
        a, rho, k = self.params.a, self.params.rho, self._shapes
        falling_denominator(rho, 2)
        return k * a * (rho + a - 1.0) * (rho + k - 1.0) / ((rho - 1.0) ** 2 * (rho - 2.0))

    @property
    def cross_moments(self) -> np.ndarray:
        """E[X_i X_j]; off the diagonal a(a+1)k_ik_j/((ρ−1)(ρ−2)), on it E[X_i²]."""
        a, rho, k = self.params.a, self.params.rho, self._shapes
        matrix = a * (a + 1.0) * np.outer(k, k) / falling_denominator(rho, 2)
        np.fill_diagonal(matrix, self.marginal_variances + self.marginal_means**2)
        return matrix

    @property
    def covariances(self) -> np.ndarray:
        """a(ρ+a−1)k_ik_j/((ρ−1)²(ρ−2)) off the diagonal, marginal variances on it."""
        a, rho, k = self.params.a, self.params.rho, self._shapes
        falling_denominator(rho, 2)
        matrix = a * (rho + a - 1.0) * np.outer(k, k) / ((rho - 1.0) ** 2 * (rho - 2.0))
        np.fill_diagonal(matrix, self.marginal_variances)
        return matrix

    def factorial(self, orders: Sequence[int]) -> float:
        """E[Π X_i(X_i−1)⋯(X_i−r_i+1)] = a_(Σr) Π(k_i)_(r_i) / ((ρ−1)⋯(ρ−Σr))."""
        r = np.asarray(orders, dtype=int)
        if r.shape != (self.params.dimension,):
            raise DimensionMismatchError(
                f"expected {self.params.dimension} orders, got shape {r.shape}"
            )
        if np.any(r < 0):
            raise DomainError(f"orders must be nonnegative, got {list(r)}")
        total = int(r.sum())
        denominator = falling_denominator(self.params.rho, total)
        log_num = log_rising(self.params.a, total) + fsum(log_rising(self._shapes, r))
        return math.exp(log_num) / denominator


def mgwd_moments(params: MgwdParams) -> MgwdMoments:
    return MgwdMoments(params)


def sample_mgwd(params: MgwdParams, rng: RngLike, size=None) -> np.ndarray:
    """
    Exact MGWD draws: one p ~ Beta(ρ, a) shared by all components, then
    independent X_i ~ NB(k_i, p) via gamma-Poisson.

    Returns shape (s,) for ``size=None``, else (size, s).
    """
    generator, _ = resolve_rng(rng)
    shapes = np.asarray(params.shapes, dtype=float)
    mixing = draw_mixing(mgwd_aggregate_params(params), generator, size=size)
    theta = np.asarray(mixing.theta, dtype=float)[..., np.newaxis]
    rates = generator.gamma(shapes, theta)
    return np.asarray(poisson_counts(rates, generator), dtype=np.int64)


def conditional_allocation(total: int, weights: Sequence[float], rng: RngLike) -> np.ndarray:
    """
    Dirichlet-multinomial split of ``total`` over cells with the given weights.

    q ~ Dirichlet(weights), counts ~ Multinomial(total, q). The Dirichlet draw
    is taken from log-gamma variates (ln G(w+1) + ln(U)/w) so tiny weights do
    not underflow.
    """
    generator, _ = resolve_rng(rng)
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise DomainError("weights must be a nonempty vector")
    if np.any(w <= 0):
        raise DomainError("weights must be positive")
    if total < 0:
        raise DomainError(f"total must be nonnegative, got {total}")
    if w.size == 1:
        return np.array([total], dtype=np.int64)
    if total == 0:
        return np.zeros(w.size, dtype=np.int64)
    q = dirichlet_draw(w, generator)
    return np.asarray(generator.multinomial(total, q), dtype=np.int64)


def dirichlet_draw(weights: np.ndarray, generator: np.random.Generator, rows: int | None = None):
    """
    Dirichlet(weights) proportions, shape (s,) or (rows, s).

    Gamma(w) variates are formed in log space as ln G(w+1) + ln(U)/w and
    normalized after subtracting the row maximum.
    """
    size = weights.shape if rows is None else (rows, weights.size)
    log_gamma = np.log(generator.gamma(weights + 1.0, size=size))
    log_gamma += np.log(generator.random(size)) / weights
    q = np.exp(log_gamma - log_gamma.max(axis=-1, keepdims=True))
    return q / q.sum(axis=-1, keepdims=True)


# --- comparison utilities --------------------------------------------------


def _as_table(pmf: PmfTable | Sequence[float] | np.ndarray) -> PmfTable:
    if isinstance(pmf, PmfTable):
        return pmf
    return PmfTable.closed(pmf)


def tv_distance(
    pmf_a: PmfTable | Sequence[float] | np.ndarray,
    pmf_b: PmfTable | Sequence[float] | np.ndarray,
) -> float:
    """
    Total variation distance ½Σ|p_i − q_i| including the sink category.

    Tables are compared on their common support; anything beyond it is
    pooled into each table's sink.
    """
    a, b = _as_table(pmf_a), _as_table(pmf_b)
    length = min(len(a.values), len(b.values))
    sink_a = a.tail + fsum(a.values[length:])
    sink_b = b.tail + fsum(b.values[length:])
    body = fsum(np.abs(a.values[:length] - b.values[:length]))
    return min(1.0, 0.5 * (body + abs(sink_a - sink_b)))


def empirical_pmf(samples: Sequence[int] | np.ndarray, max_n: int) -> PmfTable:
    """Relative frequencies of 0..max_n; the rest of the sample goes to the sink."""
    arr = np.asarray(samples, dtype=np.int64).ravel()
    if arr.size == 0:
        raise DomainError("empirical_pmf needs at least one sample")
    counts = np.bincount(np.minimum(arr, max_n + 1), minlength=max_n + 2)
    freqs = counts / arr.size
    return PmfTable(values=freqs[: max_n + 1], tail=float(freqs[max_n + 1]))


def chi_square_gof(
    samples: Sequence[int] | np.ndarray,
    table: PmfTable,
    min_expected: float = 5.0,
) -> tuple[float, float]:
    """
    Pearson goodness of fit of integer samples against a pmf table.

    Categories whose expected count falls below ``min_expected`` are pooled
    with the sink. Returns (statistic, p_value) from scipy.stats.chisquare.
    """
    arr = np.asarray(samples, dtype=np.int64).ravel()
    size = arr.size
    bound = table.support_bound
    observed_all = np.bincount(np.minimum(arr, bound + 1), minlength=bound + 2).astype(float)
    expected_all = np.append(table.values, max(0.0, 1.0 - table.mass)) * size
    keep = expected_all[:-1] >= min_expected
    observed = list(observed_all[:-1][keep])
    expected = list(expected_all[:-1][keep])
    rest_obs = observed_all[-1] + observed_all[:-1][~keep].sum()
    rest_exp = expected_all[-1] + expected_all[:-1][~keep].sum()
    if rest_exp >= min_expected or not observed:
        observed.append(rest_obs)
        expected.append(rest_exp)
    else:
        observed[-1] += rest_obs
        expected[-1] += rest_exp
    obs = np.asarray(observed)
    exp = np.asarray(expected)
    exp *= obs.sum() / exp.sum()
    result = stats.chisquare(obs, exp)
    return float(result.statistic), float(result.pvalue)
