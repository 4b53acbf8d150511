"""
Closed forms for Brownian motion with drift killed at an independent exponential time.

W_t = B_t + μt, S ~ Exp(ν) independent of W, truncation level c. With s = √(μ² + 2ν) the two
special functions are

    θ_μ(ν) = s·coth(c·s) − μ        V_μ(ν) = s / sinh(c·s)

and every exponential-time quantity below is algebraic in them. The fixed-time quantities are
inverse-Laplace series, one adaptive quadrature per term.

This module provides:
 - BmParams, SpecialFunctions, TransformPoint
 - theta / v_factor / special_functions / mgf_pole / mgf_tv
 - mean_tv / mean_utv / mean_dtv, second_moment_tv / second_moment_utv / second_moment_dtv
 - cross_moment_exp / covariance_exp
 - mean_utv_fixed_time / mean_dtv_fixed_time / mean_tv_fixed_time
 - cross_moment_fixed_time / covariance_fixed_time
 - correlation_smallc_report / analytics_report
"""

import math
from dataclasses import asdict, dataclass, replace
from typing import TYPE_CHECKING, Callable, List, Optional, Sequence, Tuple

from setup.logger import log

from . import settings
from .exceptions import DomainError, NonConvergenceError, ParameterDomainError, SingularDenominatorError
from .quadrature import integrate_adaptive_simpson

if TYPE_CHECKING:
    from .monte_carlo import McConfig

SQRT_2PI = math.sqrt(2.0 * math.pi)

# exp() of anything below this is treated as 0 inside the fixed-time integrands
_EXP_FLOOR = -700.0


@dataclass(frozen=True)
class BmParams:
    """
    Attributes:
        mu: Drift, value units per time
        nu: Rate of the exponential killing time, 1/time
        c: Truncation level, value units
    """

    mu: float
    nu: float
    c: float

    def __post_init__(self):
        for name in ("mu", "nu", "c"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ParameterDomainError(f"{name} must be finite, got {getattr(self, name)!r}")
            object.__setattr__(self, name, value)
        if self.nu <= 0:
            raise ParameterDomainError(f"nu must be positive, got {self.nu!r}")
        if self.c <= 0:
            raise ParameterDomainError(f"c must be positive, got {self.c!r}")

    def with_c(self, c: float) -> "BmParams":
        return replace(self, c=c)


@dataclass(frozen=True)
class SpecialFunctions:
    """
    Attributes:
        s: √(μ² + 2ν)
        x: c·s, the argument of coth and sinh
        s_coth: s·coth(x)
        theta_plus: θ_μ(ν)
        theta_minus: θ_{−μ}(ν)
        v: V_μ(ν), equal to V_{−μ}(ν)
        underflow: True when V underflowed to 0
    """

    s: float
    x: float
    s_coth: float
    theta_plus: float
    theta_minus: float
    v: float
    underflow: bool


@dataclass(frozen=True)
class TransformPoint:
    """M_{TV^c(W,S)}(λ) = E exp(λ·TV^c(W,S)) at one argument."""

    lam: float
    value: float


def _s_and_x(mu: float, nu: float, c: float) -> Tuple[float, float]:
    params = BmParams(mu, nu, c)
    s = math.sqrt(params.mu * params.mu + 2.0 * params.nu)
    return s, params.c * s


def _s_coth(s: float, x: float) -> float:
    # coth(x) − 1 = 2/expm1(2x)
    if x > settings.STABLE_ARGUMENT:
        return s
    return s + 2.0 * s / math.expm1(2.0 * x)


def theta(mu: float, nu: float, c: float) -> float:
    """
    θ_μ(ν) = √(μ²+2ν)·coth(c√(μ²+2ν)) − μ, evaluated without cancellation.

    Raises:
        ParameterDomainError: If nu <= 0, c <= 0 or any argument is not finite.
    """
    s, x = _s_and_x(mu, nu, c)
    # s − μ = 2ν/(s + μ) avoids cancellation for large positive drifts
    base = 2.0 * nu / (s + mu) if mu > 0 else s - mu
    if x > settings.STABLE_ARGUMENT:
        return base
    return base + 2.0 * s / math.expm1(2.0 * x)


def _v(s: float, x: float) -> float:
    if x > settings.STABLE_ARGUMENT:
        return 2.0 * s * math.exp(-x) / -math.expm1(-2.0 * x)
    return s / math.sinh(x)


def v_factor(mu: float, nu: float, c: float) -> float:
    """
    V_μ(ν) = √(μ²+2ν)/sinh(c√(μ²+2ν)); even in μ, underflows to 0 for very large c.

    Raises:
        ParameterDomainError: As theta.
    """
    s, x = _s_and_x(mu, nu, c)
    return _v(s, x)


def special_functions(params: BmParams) -> SpecialFunctions:
    """Evaluate s, θ_μ, θ_{−μ} and V once for a parameter set."""
    s, x = _s_and_x(params.mu, params.nu, params.c)
    v = _v(s, x)
    underflow = v == 0.0
    if underflow:
        log.warning(f"V underflowed to 0 at c·√(μ²+2ν) = {x!r}; every variation is negligible")
    return SpecialFunctions(
        s=s,
        x=x,
        s_coth=_s_coth(s, x),
        theta_plus=theta(params.mu, params.nu, params.c),
        theta_minus=theta(-params.mu, params.nu, params.c),
        v=v,
        underflow=underflow,
    )


def mgf_denominator_roots(params: BmParams) -> Tuple[float, float]:
    """
    Real roots (small, large) of λ² − 2λ·s·coth(c·s) + 2ν, the denominator of both MGF terms.

    The discriminant is s²coth² − 2ν = μ² + V², so both roots are real and positive.
    """
    sf = special_functions(params)
    large = sf.s_coth + math.hypot(params.mu, sf.v)
    return 2.0 * params.nu / large, large


def mgf_pole(params: BmParams) -> float:
    """
    Smallest positive λ at which the MGF expression blows up.

    It never exceeds min(θ_μ, θ_{−μ}) = s·coth(c·s) − |μ|.
    """
    return mgf_denominator_roots(params)[0]


def mgf_tv(params: BmParams, lam: float) -> float:
    """
    E exp(λ·TV^c(W,S)) by the two-term closed form.

    With θ_+ = θ_μ, θ_− = θ_{−μ}, V = V_μ and D(λ) = λ² − 2λ·s·coth(c·s) + 2ν:

        1 + λ(θ_− + e^{−μc}V − λ)/D · (e^{μc} − Vθ_−/(2ν) + e^{μc}V²/(2ν)) · V/θ_−
          + λ(θ_+ + e^{μc}V − λ)/D · (e^{−μc} − Vθ_+/(2ν) + e^{−μc}V²/(2ν)) · V/θ_+

    Args:
        params: Drift, killing rate and truncation level
        lam: Transform argument

    Returns:
        float: 1 exactly at λ = 0

    Raises:
        DomainError: If λ is not finite or λ >= mgf_pole(params). The expectation is infinite
            from the first real root of D on, which never exceeds min(θ_μ, θ_{−μ}).
        SingularDenominatorError: If λ lies within SINGULAR_TOL of a root of D.
    """
    lam = float(lam)
    sf = special_functions(params)
    abscissa = min(sf.theta_plus, sf.theta_minus)
    if not math.isfinite(lam) or lam >= abscissa:
        raise DomainError(f"lambda = {lam!r} is outside the domain lambda < min(theta_mu, theta_-mu) = {abscissa!r}")

    small, large = mgf_denominator_roots(params)
    for root in (small, large):
        if abs(lam - root) <= settings.SINGULAR_TOL * max(1.0, abs(root)):
            raise SingularDenominatorError(f"lambda = {lam!r} is within {settings.SINGULAR_TOL} of a denominator root", root)
    if lam > small:
        raise DomainError(f"lambda = {lam!r} lies past the first real pole {small!r}; the expectation is infinite there")

    mu, nu, c, v = params.mu, params.nu, params.c, sf.v
    tp, tm = sf.theta_plus, sf.theta_minus
    e_plus, e_minus = math.exp(mu * c), math.exp(-mu * c)
    denominator = lam * lam - 2.0 * lam * sf.s_coth + 2.0 * nu

    term_minus = (
        lam * (tm + e_minus * v - lam) / denominator
        * (e_plus - v * tm / (2.0 * nu) + e_plus * v * v / (2.0 * nu))
        * v / tm
    )
    term_plus = (
        lam * (tp + e_plus * v - lam) / denominator
        * (e_minus - v * tp / (2.0 * nu) + e_minus * v * v / (2.0 * nu))
        * v / tp
    )
    return 1.0 + term_minus + term_plus


def mean_tv(params: BmParams) -> float:
    """E TV^c(W,S) = V·cosh(μc)/ν."""
    sf = special_functions(params)
    return sf.v * math.cosh(params.mu * params.c) / params.nu


def mean_utv(params: BmParams) -> float:
    """E UTV^c(W,S) = e^{μc}V/(2ν)."""
    sf = special_functions(params)
    return math.exp(params.mu * params.c) * sf.v / (2.0 * params.nu)


def mean_dtv(params: BmParams) -> float:
    """E DTV^c(W,S) = e^{−μc}V/(2ν)."""
    sf = special_functions(params)
    return math.exp(-params.mu * params.c) * sf.v / (2.0 * params.nu)


def second_moment_tv(params: BmParams) -> float:
    """E TV^c(W,S)² = (V/ν²)(V + cosh(μc)θ_μ + e^{μc}μ); even in μ."""
    sf = special_functions(params)
    mu, nu, c = params.mu, params.nu, params.c
    return sf.v / (nu * nu) * (sf.v + math.cosh(mu * c) * sf.theta_plus + math.exp(mu * c) * mu)


def second_moment_utv(params: BmParams) -> float:
    """E UTV^c(W,S)² = e^{μc}Vθ_{−μ}/(2ν²)."""
    sf = special_functions(params)
    return math.exp(params.mu * params.c) * sf.v * sf.theta_minus / (2.0 * params.nu * params.nu)


def second_moment_dtv(params: BmParams) -> float:
    """E DTV^c(W,S)² = e^{−μc}Vθ_μ/(2ν²)."""
    sf = special_functions(params)
    return math.exp(-params.mu * params.c) * sf.v * sf.theta_plus / (2.0 * params.nu * params.nu)


def cross_moment_exp(params: BmParams) -> float:
    """E UTV^c(W,S)·DTV^c(W,S) = V²/(2ν²)."""
    sf = special_functions(params)
    return sf.v * sf.v / (2.0 * params.nu * params.nu)


def covariance_exp(params: BmParams) -> float:
    """Cov(UTV^c(W,S), DTV^c(W,S)) = V²/(4ν²) = (μ²+2ν) / (4ν² sinh²(c√(μ²+2ν)))."""
    sf = special_functions(params)
    return sf.v * sf.v / (4.0 * params.nu * params.nu)


def _check_series_args(T: float, k_max: int, quad_tol: float) -> None:
    if not math.isfinite(T) or T <= 0:
        raise ParameterDomainError(f"T must be positive and finite, got {T!r}")
    if k_max < 1:
        raise ParameterDomainError(f"k_max must be at least 1, got {k_max}")
    if not quad_tol > 0:
        raise ParameterDomainError(f"quad_tol must be positive, got {quad_tol!r}")


def auto_k_max(c: float, T: float, quad_tol: float) -> int:
    """Number of terms after which the Gaussian tail e^{−2(k+1)²c²/T} is below quad_tol."""
    return math.ceil(math.sqrt(T * math.log(1.0 / quad_tol)) / (c * math.sqrt(2.0))) + 2


def _sum_series(term: Callable[[int], float], c: float, T: float, k_max: int, quad_tol: float, label: str) -> float:
    """
    Sum term(0) + term(1) + ... until at least auto_k_max terms are in and the last one is
    below quad_tol relative to the partial sum.

    Raises:
        NonConvergenceError: If k_max terms do not meet the criterion.
    """
    needed = auto_k_max(c, T, quad_tol)
    terms: List[float] = []
    last = 0.0
    for k in range(k_max):
        last = term(k)
        terms.append(last)
        partial = math.fsum(terms)
        if k + 1 >= needed and abs(last) <= quad_tol * abs(partial):
            log.debug(f"{label}: {k + 1} terms, sum {partial!r}, last term {last!r}")
            return partial
    partial = math.fsum(terms)
    raise NonConvergenceError(f"{label} did not converge within k_max = {k_max} terms", partial, last)


def _integral(integrand: Callable[[float], float], T: float, quad_tol: float) -> float:
    value, _ = integrate_adaptive_simpson(integrand, 0.0, T, tol=quad_tol)
    return value


def _mean_series(params: BmParams, T: float, k_max: int, quad_tol: float) -> float:
    """Σ_k ∫_0^T (T−t)((2k+1)²c² − t)/t^{5/2} · e^{−μ²t/2 − (2k+1)²c²/(2t)} dt."""
    _check_series_args(T, k_max, quad_tol)
    half_mu2 = params.mu * params.mu / 2.0

    def term(k: int) -> float:
        a2 = (2 * k + 1) ** 2 * params.c * params.c

        def integrand(t: float) -> float:
            if t <= 0.0:
                return 0.0
            exponent = -half_mu2 * t - a2 / (2.0 * t)
            if exponent < _EXP_FLOOR:
                return 0.0
            return (T - t) * (a2 - t) / t**2.5 * math.exp(exponent)

        return _integral(integrand, T, quad_tol)

    return _sum_series(term, params.c, T, k_max, quad_tol, "Mean series")


def mean_utv_fixed_time(
    params: BmParams, T: float, k_max: int = settings.K_MAX, quad_tol: float = settings.QUAD_TOL
) -> float:
    """
    E UTV^c(W,T) = e^{μc}/√(2π) · Σ_k ∫_0^T (T−t)((2k+1)²c² − t)/t^{5/2} e^{−μ²t/2 − (2k+1)²c²/(2t)} dt.

    ν plays no role at a fixed time.

    Raises:
        NonConvergenceError: If the series does not settle within k_max terms.
    """
    return math.exp(params.mu * params.c) / SQRT_2PI * _mean_series(params, T, k_max, quad_tol)


def mean_dtv_fixed_time(
    params: BmParams, T: float, k_max: int = settings.K_MAX, quad_tol: float = settings.QUAD_TOL
) -> float:
    """E DTV^c(W,T); the series of mean_utv_fixed_time with e^{−μc} in front."""
    return math.exp(-params.mu * params.c) / SQRT_2PI * _mean_series(params, T, k_max, quad_tol)


def mean_tv_fixed_time(
    params: BmParams, T: float, k_max: int = settings.K_MAX, quad_tol: float = settings.QUAD_TOL
) -> float:
    return 2.0 * math.cosh(params.mu * params.c) / SQRT_2PI * _mean_series(params, T, k_max, quad_tol)


def cross_moment_fixed_time(
    params: BmParams, T: float, k_max: int = settings.K_MAX, quad_tol: float = settings.QUAD_TOL
) -> float:
    """
    E UTV^c(W,T)·DTV^c(W,T) by its inverse-Laplace series.

    (2c/√(2π)) Σ_k (k+1)² ∫_0^T (T−t)²(4(k+1)²c² − 3t)/t^{7/2} · e^{−μ²t/2 − 2(k+1)²c²/t} dt,
    with the integrand extended by 0 at t = 0.

    Args:
        params: Drift and truncation level (ν is ignored)
        T: Time horizon, positive
        k_max: Maximum number of series terms
        quad_tol: Quadrature tolerance and relative truncation tolerance

    Raises:
        NonConvergenceError: If the series does not settle within k_max terms.
    """
    _check_series_args(T, k_max, quad_tol)
    c = params.c
    half_mu2 = params.mu * params.mu / 2.0

    def term(k: int) -> float:
        j2 = (k + 1) ** 2
        a = 2.0 * j2 * c * c

        def integrand(t: float) -> float:
            if t <= 0.0:
                return 0.0
            exponent = -half_mu2 * t - a / t
            if exponent < _EXP_FLOOR:
                return 0.0
            return (T - t) ** 2 * (2.0 * a - 3.0 * t) / t**3.5 * math.exp(exponent)

        return j2 * _integral(integrand, T, quad_tol)

    return 2.0 * c / SQRT_2PI * _sum_series(term, c, T, k_max, quad_tol, "Cross moment series")


def covariance_fixed_time(
    params: BmParams, T: float, k_max: int = settings.K_MAX, quad_tol: float = settings.QUAD_TOL
) -> float:
    """
    Cov(UTV^c(W,T), DTV^c(W,T)) = cross moment − (1/2π)(mean series)².

    The subtracted term is E UTV^c(W,T)·E DTV^c(W,T); the drift enters the Gaussian factor as
    μ²t/2. The result is typically negative but no sign is guaranteed.
    """
    cross = cross_moment_fixed_time(params, T, k_max, quad_tol)
    series = _mean_series(params, T, k_max, quad_tol)
    return cross - series * series / (2.0 * math.pi)


def correlation_smallc_report(
    params_base: BmParams, c_grid: Sequence[float], T: float, mc_config: "McConfig"
) -> List[Tuple[float, Optional[float]]]:
    """
    Monte Carlo Cor(UTV^c(W,T), DTV^c(W,T)) along a decreasing grid of truncation levels.

    The correlation tends to −1/2 as c ↓ 0. Levels where either variation is a.s. 0 on the
    simulated paths report None.

    Args:
        params_base: Drift and rate; its c is replaced by each grid value
        c_grid: Strictly decreasing positive truncation levels
        T: Fixed time horizon
        mc_config: monte_carlo.McConfig

    Returns:
        List of (c, correlation or None)
    """
    from .monte_carlo import Quantity, estimate

    grid = [float(c) for c in c_grid]
    if not grid or any(c <= 0 for c in grid) or any(b >= a for a, b in zip(grid, grid[1:])):
        raise ParameterDomainError(f"c_grid must be nonempty, positive and strictly decreasing, got {grid}")

    report = []
    for c in grid:
        result = estimate(Quantity.COR_FIXED, params_base.with_c(c), mc_config, T=T)
        correlation = None if math.isnan(result.mean) else result.mean
        if correlation is None:
            log.warning(f"Correlation undefined at c = {c!r}: a variation vanished on every path")
        report.append((c, correlation))
        log.info(f"Correlation at c = {c!r}: {correlation}")
    return report


def analytics_report(
    params: BmParams,
    lam: Optional[float] = None,
    T: Optional[float] = None,
    k_max: int = settings.K_MAX,
    quad_tol: float = settings.QUAD_TOL,
) -> dict:
    """
    Every closed-form quantity for one parameter set, as a JSON-ready dictionary.

    The transform is included when lam is given, the fixed-time series when T is given.
    """
    sf = special_functions(params)
    report = {
        "params": asdict(params),
        "theta_mu": sf.theta_plus,
        "theta_minus_mu": sf.theta_minus,
        "v": sf.v,
        "v_underflow": sf.underflow,
        "mgf_pole": mgf_pole(params),
        "mean_tv": mean_tv(params),
        "mean_utv": mean_utv(params),
        "mean_dtv": mean_dtv(params),
        "second_moment_tv": second_moment_tv(params),
        "second_moment_utv": second_moment_utv(params),
        "second_moment_dtv": second_moment_dtv(params),
        "cross_moment_exp": cross_moment_exp(params),
        "covariance_exp": covariance_exp(params),
        "tolerances": {
            "quad_tol": quad_tol,
            "k_max": k_max,
            "singular_tol": settings.SINGULAR_TOL,
            "stable_argument": settings.STABLE_ARGUMENT,
        },
    }
    if lam is not None:
        point = TransformPoint(lam=float(lam), value=mgf_tv(params, lam))
        report["mgf_tv"] = asdict(point)
    if T is not None:
        series = _mean_series(params, T, k_max, quad_tol)
        cross = cross_moment_fixed_time(params, T, k_max, quad_tol)
        report["fixed_time"] = {
            "T": float(T),
            "mean_utv": math.exp(params.mu * params.c) / SQRT_2PI * series,
            "mean_dtv": math.exp(-params.mu * params.c) / SQRT_2PI * series,
            "cross_moment": cross,
            "covariance": cross - series * series / (2.0 * math.pi),
        }
        report["tolerances"]["k_max_auto"] = auto_k_max(params.c, T, quad_tol)
    return report
