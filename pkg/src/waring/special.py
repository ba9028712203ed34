"""Special-function kernel: log rising factorials, digamma, 2F1 and the avoidance root solver."""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from waring.errors import ConvergenceError, DomainError, IterationLimitError, ValidationError

logger = logging.getLogger(__name__)

HYP2F1_MAX_TERMS = 1_000_000
HYP2F1_ABS_TOL = 1e-16


@dataclass(frozen=True)
class SolverConfig:
    """Controls for the avoidance-function root solver."""

    abs_tol: float = 1e-12
    max_iter: int = 200
    bracket_growth: float = 2.0

    def __post_init__(self) -> None:
        if not self.abs_tol > 0:
            raise ValidationError(f"abs_tol must be positive, got {self.abs_tol}")
        if self.max_iter < 1:
            raise ValidationError(f"max_iter must be >= 1, got {self.max_iter}")
        if not self.bracket_growth > 1:
            raise ValidationError(f"bracket_growth must exceed 1, got {self.bracket_growth}")


def log_rising(x, r):
    """
    Log of the rising factorial x_(r) = Γ(x+r)/Γ(x).

    Accepts scalars or numpy arrays (broadcast). Scalars return a float.

    Raises:
        DomainError: if x <= 0 or x + r <= 0.
    """
    x_arr = np.asarray(x, dtype=float)
    r_arr = np.asarray(r, dtype=float)
    if np.any(x_arr <= 0):
        raise DomainError(f"log_rising requires x > 0, got {x}")
    if np.any(x_arr + r_arr <= 0):
        raise DomainError(f"log_rising requires x + r > 0, got x={x}, r={r}")
    value = special.gammaln(x_arr + r_arr) - special.gammaln(x_arr)
    # r == 0 must be exactly 0, not a difference of two rounded logs
    value = np.where(r_arr == 0, 0.0, value)
    if value.ndim == 0:
        return float(value)
    return value


def digamma(t: float) -> float:
    """Digamma Ψ(t) for t > 0."""
    if not t > 0:
        raise DomainError(f"digamma requires t > 0, got {t}")
    return float(special.digamma(t))


def log_gamma_ratio_derivative(a: float, rho: float, x: float) -> float:
    """d/dx ln(Γ(ρ+x+a)/Γ(ρ+x)) = Ψ(ρ+x+a) − Ψ(ρ+x); strictly positive for a > 0."""
    return digamma(rho + x + a) - digamma(rho + x)


def gauss_2f1(
    a: float,
    b: float,
    c: float,
    z: float,
    abs_tol: float = HYP2F1_ABS_TOL,
    max_terms: int = HYP2F1_MAX_TERMS,
) -> float:
    """
    Gauss hypergeometric function ₂F₁(a, b; c; z) for z in [0, 1].

    For z < 1 the defining series is summed term by term (term ratio
    (a+n)(b+n)z/((c+n)(n+1))) and stops once the current term is below
    ``abs_tol`` times the partial sum while terms are decreasing. At z = 1
    the Gauss summation Γ(c)Γ(c−a−b)/(Γ(c−a)Γ(c−b)) is returned, which needs
    c − a − b > 0.

    Raises:
        DomainError: if c <= 0 or z is outside [0, 1].
        ConvergenceError: if z = 1 and c − a − b <= 0.
        IterationLimitError: if the series does not settle within max_terms.
    """
    if not c > 0:
        raise DomainError(f"gauss_2f1 requires c > 0, got {c}")
    if not 0.0 <= z <= 1.0:
        raise DomainError(f"gauss_2f1 is restricted to z in [0, 1], got {z}")
    if z == 0.0:
        return 1.0
    if z == 1.0:
        if not c - a - b > 0:
            raise ConvergenceError(f"2F1 diverges at z=1 when c-a-b <= 0 (c-a-b={c - a - b})")
        return _gauss_summation(a, b, c)

    term = 1.0
    terms = [1.0]
    running = 1.0
    for n in range(max_terms):
        previous = abs(term)
        term *= (a + n) * (b + n) * z / ((c + n) * (n + 1))
        terms.append(term)
        running += term
        if term == 0.0:
            return math.fsum(terms)
        if abs(term) <= previous and abs(term) < abs_tol * abs(running):
            logger.debug("2F1(%s, %s; %s; %s) settled after %d terms", a, b, c, z, n + 1)
            return math.fsum(terms)
    raise IterationLimitError(f"2F1 series did not settle within {max_terms} terms at z={z}")


def _gauss_summation(a: float, b: float, c: float) -> float:
    """Γ(c)Γ(c−a−b)/(Γ(c−a)Γ(c−b)), with signs from scipy's gammasgn."""
    sign = (
        special.gammasgn(c)
        * special.gammasgn(c - a - b)
        * special.gammasgn(c - a)
        * special.gammasgn(c - b)
    )
    log_value = (
        special.gammaln(c)
        + special.gammaln(c - a - b)
        - special.gammaln(c - a)
        - special.gammaln(c - b)
    )
    return float(sign * math.exp(log_value))


def solve_avoidance_inverse(
    a: float,
    rho: float,
    p0: float,
    cfg: SolverConfig | None = None,
) -> float:
    """
    Solve Γ(ρ+x+a)/Γ(ρ+x) = Γ(ρ+a)/(p0·Γ(ρ)) for x >= 0.

    The left side is strictly increasing in x (its log-derivative is
    Ψ(ρ+x+a) − Ψ(ρ+x) > 0), so the root is unique. Works on the log scale:
    brackets by growing an upper end from x = 1, then runs a safeguarded
    Newton iteration that falls back to bisection whenever a step leaves the
    bracket or fails to halve the residual.

    Args:
        a: Positive shape a.
        rho: Positive shape ρ.
        p0: Avoidance probability in (0, 1].
        cfg: Solver tolerances; defaults to SolverConfig().

    Returns:
        The root x (for the point process, x = k·μ(A)).

    Raises:
        DomainError: if p0 is outside (0, 1] or a, rho are not positive.
        IterationLimitError: if bracketing or refinement exceeds cfg.max_iter.
    """
    cfg = cfg or SolverConfig()
    if not (a > 0 and rho > 0):
        raise DomainError(f"a and rho must be positive, got a={a}, rho={rho}")
    if not 0.0 < p0 <= 1.0:
        raise DomainError(f"p0 must lie in (0, 1], got {p0}")
    if p0 == 1.0:
        return 0.0

    target = log_rising(rho, a) - math.log(p0)

    def residual(x: float) -> float:
        return log_rising(rho + x, a) - target

    lo, hi = 0.0, 1.0
    f_hi = residual(hi)
    for _ in range(cfg.max_iter):
        if f_hi >= 0:
            break
        lo, hi = hi, hi * cfg.bracket_growth
        f_hi = residual(hi)
    else:
        raise IterationLimitError(f"Could not bracket the avoidance root for p0={p0}")
    if f_hi == 0:
        return hi

    x = 0.5 * (lo + hi)
    step_old = hi - lo
    step = step_old
    f = residual(x)
    df = log_gamma_ratio_derivative(a, rho, x)
    for iteration in range(cfg.max_iter):
        newton_leaves = ((x - hi) * df - f) * ((x - lo) * df - f) > 0
        if newton_leaves or abs(2.0 * f) > abs(step_old * df):
            step_old = step
            step = 0.5 * (hi - lo)
            x = lo + step
        else:
            step_old = step
            step = f / df
            x -= step
        if abs(step) < cfg.abs_tol * (1.0 + x):
            logger.debug("Avoidance root x=%r after %d iterations", x, iteration + 1)
            return max(x, 0.0)
        f = residual(x)
        if f == 0:
            return x
        df = log_gamma_ratio_derivative(a, rho, x)
        if f < 0:
            lo = x
        else:
            hi = x
    raise IterationLimitError(
        f"Avoidance solver did not converge in {cfg.max_iter} iterations (p0={p0})"
    )
