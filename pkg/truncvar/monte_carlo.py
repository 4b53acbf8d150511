"""
Monte Carlo estimation of the Brownian truncated-variation quantities.

Every path owns its random stream: path i draws from Philox seeded by
SeedSequence(seed, spawn_key=(i,)), its bridge refinements from spawn_key=(i, level). Results
therefore depend on the seed only, never on chunking or thread count. With antithetic
sampling paths 2j and 2j+1 share stream j and its increments, and are killed at S and at the
opposite quantile of Exp(ν). Fixed-time quantities have no killing time to pair and reject it.

This module provides:
 - McConfig, McEstimate, Quantity, AdaptednessReport
 - simulate_bm_path(mu, dt, n_steps, rng) -> CadlagPath
 - killed_path(mu, nu, dt, rng, antithetic, mirror) -> CadlagPath
 - mirrored_killing_time(killing_time, nu) -> float
 - refine_path(path, rng) -> CadlagPath
 - estimate(quantity, params, cfg) -> McEstimate
 - estimate_many(quantities, params, cfg) -> dict of McEstimate from one simulation
 - refine_estimates(quantities, params, cfg) -> dict of Refinement (estimates at dt and dt/4)
 - richardson_bias(quantity, params, cfg) -> float
 - compare(estimate, closed_form, bias) -> dict
 - adaptedness_test(params, cfg) -> AdaptednessReport
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from setup.logger import log

from . import bm_analytics, settings
from .approximants import build_adapted
from .bm_analytics import BmParams
from .crossing_engine import batch_final_variations
from .exceptions import ConfigError
from .path_core import CadlagPath


class Quantity(Enum):
    """Estimable quantities; the value is the name used on the command line."""

    MEAN_TV = "MeanTV"
    MEAN_UTV = "MeanUTV"
    MEAN_DTV = "MeanDTV"
    SECOND_TV = "SecondTV"
    SECOND_UTV = "SecondUTV"
    SECOND_DTV = "SecondDTV"
    CROSS_EXP = "CrossExp"
    COV_EXP = "CovExp"
    MGF_TV = "MgfTV"
    CROSS_FIXED = "CrossFixedT"
    COV_FIXED = "CovFixedT"
    COR_FIXED = "CorFixed"
    MEAN_UTV_FIXED = "MeanUTVFixedT"
    MEAN_DTV_FIXED = "MeanDTVFixedT"

    @property
    def fixed_time(self) -> bool:
        return self in _FIXED_TIME

    @property
    def needs_lambda(self) -> bool:
        return self is Quantity.MGF_TV


_FIXED_TIME = {
    Quantity.CROSS_FIXED,
    Quantity.COV_FIXED,
    Quantity.COR_FIXED,
    Quantity.MEAN_UTV_FIXED,
    Quantity.MEAN_DTV_FIXED,
}


@dataclass(frozen=True)
class McConfig:
    """
    Attributes:
        n_paths: Number of simulated paths, at least MC_MIN_PATHS
        dt: Time step of the simulation grid
        seed: Root seed of every per-path stream
        horizon: Default T of the fixed-time quantities
        antithetic: Pair killing times at opposite quantiles over shared increments (n_paths
            must be even, exponential-time quantities only)
        strict: Turn configuration warnings into ConfigError
        threads: Worker threads; None reads TRUNCVAR_THREADS
        chunk_size: Paths per batch-engine call
    """

    n_paths: int
    dt: float
    seed: int
    horizon: float = 1.0
    antithetic: bool = False
    strict: bool = False
    threads: Optional[int] = None
    chunk_size: int = settings.MC_CHUNK_SIZE

    def __post_init__(self):
        if self.n_paths < settings.MC_MIN_PATHS:
            raise ConfigError(f"n_paths must be at least {settings.MC_MIN_PATHS}, got {self.n_paths}")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ConfigError(f"dt must be positive, got {self.dt!r}")
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise ConfigError(f"horizon must be positive, got {self.horizon!r}")
        if self.seed < 0:
            raise ConfigError(f"seed must be nonnegative, got {self.seed}")
        if self.antithetic and self.n_paths % 2:
            raise ConfigError("Antithetic sampling needs an even number of paths")
        if self.threads is not None and self.threads < 1:
            raise ConfigError(f"threads must be positive, got {self.threads}")
        if self.chunk_size < 1:
            raise ConfigError(f"chunk_size must be positive, got {self.chunk_size}")


@dataclass(frozen=True)
class McEstimate:
    """
    Attributes:
        quantity: Quantity name
        mean: Point estimate (NaN when undefined, e.g. a correlation of constant samples)
        std_error: Standard error of the estimate
        n: Number of simulated paths
        dt: Time step used
        T: Fixed horizon for fixed-time quantities
        lam: Transform argument for MgfTV
    """

    quantity: str
    mean: float
    std_error: float
    n: int
    dt: float
    T: Optional[float] = None
    lam: Optional[float] = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class AdaptednessReport:
    paths: int
    samples: int
    max_discrepancy_ic: float
    max_discrepancy_tilde: float

    @property
    def passed(self) -> bool:
        return max(self.max_discrepancy_ic, self.max_discrepancy_tilde) <= 1e-12

    def to_dict(self) -> dict:
        return {**asdict(self), "passed": self.passed}


def path_rng(seed: int, index: int, level: int = 0) -> np.random.Generator:
    """Generator of path `index` (level 0) or of its level-th bridge refinement."""
    key = (index,) if level == 0 else (index, level)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


def _walk(times: np.ndarray, mu: float, z: np.ndarray) -> np.ndarray:
    steps = np.diff(times)
    values = np.zeros(times.size)
    values[1:] = np.cumsum(mu * steps + np.sqrt(steps) * z)
    return values


def simulate_bm_path(mu: float, dt: float, n_steps: int, rng: np.random.Generator) -> CadlagPath:
    """
    Brownian motion with drift on the grid 0, dt, ..., n_steps·dt, starting at 0.

    Increments are exact N(μ·dt, dt) draws.
    """
    if not dt > 0:
        raise ConfigError(f"dt must be positive, got {dt!r}")
    times = dt * np.arange(n_steps + 1, dtype=np.float64)
    return CadlagPath(times=times, values=_walk(times, mu, rng.standard_normal(n_steps)))


def mirrored_killing_time(killing_time: float, nu: float) -> float:
    """
    The Exp(ν) time at the opposite quantile, F⁻¹(1 − F(S)) = −log(1 − e^{−νS})/ν.

    S and its mirror are both Exp(ν) and countermonotone, so any quantity nondecreasing in the
    horizon comes out negatively correlated on the pair.
    """
    # Clipped so that S = 0 maps to a long but finite horizon
    tail = max(-math.expm1(-nu * killing_time), 1e-16)
    return -math.log(tail) / nu


def _grid_until(horizon: float, dt: float) -> np.ndarray:
    times = dt * np.arange(int(math.floor(horizon / dt)) + 1, dtype=np.float64)
    return np.append(times, horizon) if horizon > times[-1] else times


def killed_path(
    mu: float, nu: float, dt: float, rng: np.random.Generator, antithetic: bool = False, mirror: bool = False
) -> CadlagPath:
    """
    Brownian motion with drift observed on [0, S], S ~ Exp(ν) drawn first from the same stream.

    The grid is 0, dt, 2dt, ... below S plus the exact endpoint S. With antithetic=True the stream
    describes a pair: both members draw the normals for the longer of S and its mirrored time and
    share them as increments; mirror=False stops at S, mirror=True at the mirrored time.
    """
    if not dt > 0:
        raise ConfigError(f"dt must be positive, got {dt!r}")
    killing_time = rng.exponential(1.0 / nu)
    if not antithetic:
        times = _grid_until(killing_time, dt)
        return CadlagPath(times=times, values=_walk(times, mu, rng.standard_normal(times.size - 1)))

    partner = mirrored_killing_time(killing_time, nu)
    times = _grid_until(partner if mirror else killing_time, dt)
    # Enough draws for the longer member; each member uses a prefix
    z = rng.standard_normal(int(math.floor(max(killing_time, partner) / dt)) + 1)
    return CadlagPath(times=times, values=_walk(times, mu, z[: times.size - 1]))


def refine_path(path: CadlagPath, rng: np.random.Generator) -> CadlagPath:
    """
    Insert a Brownian-bridge midpoint between every pair of consecutive samples.

    Given W at t_l and t_r, W at the midpoint is N((W_l + W_r)/2, (t_r − t_l)/4) whatever the
    drift, so the refined path is a finer sample of the same underlying path.
    """
    n = len(path)
    if n < 2:
        return path
    times, values = path.times, path.values
    steps = np.diff(times)
    middle = (values[:-1] + values[1:]) / 2 + np.sqrt(steps / 4) * rng.standard_normal(n - 1)

    refined_times = np.empty(2 * n - 1)
    refined_values = np.empty(2 * n - 1)
    refined_times[0::2], refined_values[0::2] = times, values
    refined_times[1::2] = times[:-1] + steps / 2
    refined_values[1::2] = middle
    return CadlagPath(times=refined_times, values=refined_values)


def _check_dt(params: BmParams, cfg: McConfig, dt: float) -> None:
    if dt >= params.c * params.c / 10:
        message = f"dt = {dt!r} is not small against c²/10 = {params.c * params.c / 10!r}; expect discretization bias"
        if cfg.strict:
            raise ConfigError(message)
        log.warning(message)


def _fixed_grid(T: float, dt: float) -> Tuple[int, float]:
    n_steps = max(1, int(round(T / dt)))
    return n_steps, T / n_steps


def _one_path(params: BmParams, cfg: McConfig, index: int, T: Optional[float], refinements: int) -> CadlagPath:
    stream = index // 2 if cfg.antithetic else index
    rng = path_rng(cfg.seed, stream)
    if T is None:
        path = killed_path(params.mu, params.nu, cfg.dt, rng, cfg.antithetic, mirror=index % 2 == 1)
    else:
        n_steps, dt = _fixed_grid(T, cfg.dt)
        path = simulate_bm_path(params.mu, dt, n_steps, rng)
    for level in range(1, refinements + 1):
        path = refine_path(path, path_rng(cfg.seed, stream, level))
    return path


def _chunk_variations(
    params: BmParams, cfg: McConfig, indices: range, T: Optional[float], refinements: int
) -> Tuple[np.ndarray, np.ndarray]:
    paths = [_one_path(params, cfg, i, T, refinements).values for i in indices]
    width = max(p.size for p in paths)
    # Padding with the last value leaves every truncated variation unchanged
    padded = np.array([np.pad(p, (0, width - p.size), mode="edge") for p in paths])
    return batch_final_variations(padded, params.c)


def _chunks(cfg: McConfig, samples_per_path: int) -> List[range]:
    rows = max(1, min(cfg.chunk_size, settings.MC_MAX_CHUNK_ELEMENTS // max(1, samples_per_path)))
    return [range(start, min(start + rows, cfg.n_paths)) for start in range(0, cfg.n_paths, rows)]


def simulate_variations(
    params: BmParams, cfg: McConfig, T: Optional[float] = None, refinements: int = 0
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Final (UTV^c, DTV^c) of every simulated path, in path-index order.

    Args:
        params: Drift, killing rate and truncation level
        cfg: Simulation configuration
        T: Fixed horizon; None kills each path at its own Exp(ν) time
        refinements: Number of bridge refinements, each halving the step

    Returns:
        (utv, dtv): arrays of shape (n_paths,)

    Raises:
        ConfigError: On antithetic pairing with a fixed horizon, or on a coarse dt in strict mode.
    """
    if cfg.antithetic and T is not None:
        raise ConfigError("Antithetic pairs mirror the killing time and need an exponential-time quantity")
    dt = cfg.dt / 2**refinements
    _check_dt(params, cfg, dt)

    horizon = T if T is not None else 1.0 / params.nu
    chunks = _chunks(cfg, int(horizon / cfg.dt + 2) * 2**refinements)
    threads = cfg.threads or settings.read_threads()

    def work(indices: range) -> Tuple[np.ndarray, np.ndarray]:
        result = _chunk_variations(params, cfg, indices, T, refinements)
        log.debug(f"Simulated paths {indices.start}..{indices.stop - 1}")
        return result

    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            results = list(executor.map(work, chunks))
    else:
        results = [work(indices) for indices in chunks]

    utv = np.concatenate([r[0] for r in results])
    dtv = np.concatenate([r[1] for r in results])
    return utv, dtv


def _mean(values: np.ndarray) -> float:
    return math.fsum(values.tolist()) / values.size


def _mean_and_se(samples: np.ndarray, antithetic: bool) -> Tuple[float, float]:
    """Sample mean and its standard error; antithetic pairs are averaged first."""
    units = (samples[0::2] + samples[1::2]) / 2 if antithetic else samples
    mean = _mean(units)
    if units.size < 2:
        return mean, float("nan")
    deviations = units - mean
    variance = math.fsum((deviations * deviations).tolist()) / (units.size - 1)
    return mean, math.sqrt(variance / units.size)


def _covariance(u: np.ndarray, d: np.ndarray, antithetic: bool) -> Tuple[float, float]:
    n = u.size
    products = (u - _mean(u)) * (d - _mean(d))
    mean, se = _mean_and_se(products, antithetic)
    return mean * n / (n - 1), se * n / (n - 1)


def _correlation(u: np.ndarray, d: np.ndarray, antithetic: bool) -> Tuple[float, float]:
    """Sample correlation with a delta-method standard error over the sampling units."""
    n = u.size
    du, dd = u - _mean(u), d - _mean(d)
    su = math.fsum((du * du).tolist())
    sd = math.fsum((dd * dd).tolist())
    if su == 0.0 or sd == 0.0:
        return float("nan"), float("nan")
    r = math.fsum((du * dd).tolist()) / math.sqrt(su * sd)
    # Influence of each path on r, in standardized coordinates
    x, y = du / math.sqrt(su / n), dd / math.sqrt(sd / n)
    _, se = _mean_and_se(x * y - r * (x * x + y * y) / 2, antithetic)
    return r, se


def _reduce(
    quantity: Quantity, utv: np.ndarray, dtv: np.ndarray, antithetic: bool, lam: Optional[float]
) -> Tuple[float, float]:
    tv = utv + dtv
    if quantity is Quantity.COV_EXP or quantity is Quantity.COV_FIXED:
        return _covariance(utv, dtv, antithetic)
    if quantity is Quantity.COR_FIXED:
        return _correlation(utv, dtv, antithetic)

    samples = {
        Quantity.MEAN_TV: lambda: tv,
        Quantity.MEAN_UTV: lambda: utv,
        Quantity.MEAN_DTV: lambda: dtv,
        Quantity.MEAN_UTV_FIXED: lambda: utv,
        Quantity.MEAN_DTV_FIXED: lambda: dtv,
        Quantity.SECOND_TV: lambda: tv * tv,
        Quantity.SECOND_UTV: lambda: utv * utv,
        Quantity.SECOND_DTV: lambda: dtv * dtv,
        Quantity.CROSS_EXP: lambda: utv * dtv,
        Quantity.CROSS_FIXED: lambda: utv * dtv,
        Quantity.MGF_TV: lambda: np.exp(lam * tv),
    }[quantity]()
    return _mean_and_se(samples, antithetic)


def _resolve(
    quantities: Sequence[Quantity], cfg: McConfig, lam: Optional[float], T: Optional[float]
) -> Tuple[Optional[float], Optional[float]]:
    if not quantities:
        raise ConfigError("Nothing to estimate")
    kinds = {quantity.fixed_time for quantity in quantities}
    if len(kinds) > 1:
        raise ConfigError("Fixed-time and exponential-time quantities cannot share a simulation")
    needs_lambda = any(quantity.needs_lambda for quantity in quantities)
    if needs_lambda and lam is None:
        raise ConfigError(f"{Quantity.MGF_TV.value} needs a transform argument lambda")
    horizon = (T if T is not None else cfg.horizon) if kinds == {True} else None
    return (lam if needs_lambda else None), horizon


def estimate_many(
    quantities: Sequence[Quantity],
    params: BmParams,
    cfg: McConfig,
    lam: Optional[float] = None,
    T: Optional[float] = None,
    refinements: int = 0,
) -> Dict[Quantity, McEstimate]:
    """
    Estimates of several quantities reduced from one set of simulated paths.

    The quantities must all be exponential-time or all fixed-time. Arguments as in `estimate`.
    """
    lam, horizon = _resolve(quantities, cfg, lam, T)
    utv, dtv = simulate_variations(params, cfg, horizon, refinements)
    results = {}
    for quantity in quantities:
        mean, se = _reduce(quantity, utv, dtv, cfg.antithetic, lam)
        results[quantity] = McEstimate(
            quantity=quantity.value,
            mean=mean,
            std_error=se,
            n=cfg.n_paths,
            dt=cfg.dt / 2**refinements,
            T=horizon,
            lam=lam if quantity.needs_lambda else None,
        )
        log.info(f"{quantity.value}: {mean!r} ± {se!r} ({cfg.n_paths} paths, dt={cfg.dt / 2**refinements!r})")
    return results


def estimate(
    quantity: Quantity,
    params: BmParams,
    cfg: McConfig,
    lam: Optional[float] = None,
    T: Optional[float] = None,
    refinements: int = 0,
) -> McEstimate:
    """
    Monte Carlo estimate of one quantity with its standard error.

    Exponential-time quantities kill each path at its own S ~ Exp(ν); fixed-time quantities
    use T (default cfg.horizon). Standard errors are taken over sampling units, which are the
    antithetic pairs when cfg.antithetic is set. Covariances use the unbiased n/(n−1) factor and
    the spread of the per-path deviation products; correlations use the delta method.

    Args:
        quantity: What to estimate
        params: Drift, killing rate and truncation level
        cfg: Simulation configuration
        lam: Transform argument, required for MgfTV
        T: Fixed horizon for fixed-time quantities
        refinements: Number of bridge refinements of every path

    Returns:
        McEstimate

    Raises:
        ConfigError: On a missing lambda, on antithetic pairing of a fixed-time quantity, or on a
            coarse dt in strict mode.
    """
    return estimate_many([quantity], params, cfg, lam, T, refinements)[quantity]


@dataclass(frozen=True)
class Refinement:
    """Estimates of one quantity at dt and at dt/4 on the same underlying paths."""

    coarse: McEstimate
    fine: McEstimate

    @property
    def margin(self) -> float:
        return 2.0 * abs(self.fine.mean - self.coarse.mean)


def refine_estimates(
    quantities: Sequence[Quantity],
    params: BmParams,
    cfg: McConfig,
    lam: Optional[float] = None,
    T: Optional[float] = None,
) -> Dict[Quantity, Refinement]:
    """Coarse and twice-refined estimates of several quantities, two simulations in all."""
    coarse = estimate_many(quantities, params, cfg, lam, T)
    fine = estimate_many(quantities, params, cfg, lam, T, refinements=2)
    refinements = {quantity: Refinement(coarse[quantity], fine[quantity]) for quantity in quantities}
    for quantity, refinement in refinements.items():
        log.info(f"Richardson margin for {quantity.value}: {refinement.margin!r}")
    return refinements


def richardson_bias(
    quantity: Quantity,
    params: BmParams,
    cfg: McConfig,
    lam: Optional[float] = None,
    T: Optional[float] = None,
) -> float:
    """
    Discretization margin 2·|est(dt/4) − est(dt)|, both on the same underlying paths.

    Sampling a path more finely never lowers its truncated variation, so the coarse estimate is
    biased low; the margin bounds what refinement still changes.
    """
    return refine_estimates([quantity], params, cfg, lam, T)[quantity].margin


def closed_form(
    quantity: Quantity, params: BmParams, lam: Optional[float] = None, T: Optional[float] = None
) -> Optional[float]:
    """The analytic value a quantity estimates, None when there is no closed form."""
    formulas = {
        Quantity.MEAN_TV: lambda: bm_analytics.mean_tv(params),
        Quantity.MEAN_UTV: lambda: bm_analytics.mean_utv(params),
        Quantity.MEAN_DTV: lambda: bm_analytics.mean_dtv(params),
        Quantity.SECOND_TV: lambda: bm_analytics.second_moment_tv(params),
        Quantity.SECOND_UTV: lambda: bm_analytics.second_moment_utv(params),
        Quantity.SECOND_DTV: lambda: bm_analytics.second_moment_dtv(params),
        Quantity.CROSS_EXP: lambda: bm_analytics.cross_moment_exp(params),
        Quantity.COV_EXP: lambda: bm_analytics.covariance_exp(params),
        Quantity.MGF_TV: lambda: bm_analytics.mgf_tv(params, lam),
        Quantity.CROSS_FIXED: lambda: bm_analytics.cross_moment_fixed_time(params, T),
        Quantity.COV_FIXED: lambda: bm_analytics.covariance_fixed_time(params, T),
        Quantity.MEAN_UTV_FIXED: lambda: bm_analytics.mean_utv_fixed_time(params, T),
        Quantity.MEAN_DTV_FIXED: lambda: bm_analytics.mean_dtv_fixed_time(params, T),
    }
    formula = formulas.get(quantity)
    return None if formula is None else formula()


def compare(mc: McEstimate, closed: Optional[float], bias: float = 0.0) -> dict:
    """
    z-score of an estimate against its closed form, after discounting a bias margin.

    Returns:
        Dictionary with estimate, se, closed_form, bias, z_score and within_3se
    """
    report = {
        "quantity": mc.quantity,
        "estimate": mc.mean,
        "se": mc.std_error,
        "closed_form": closed,
        "bias": bias,
        "z_score": None,
        "within_3se": None,
    }
    if closed is None or math.isnan(mc.mean):
        return report

    excess = max(abs(mc.mean - closed) - bias, 0.0)
    if mc.std_error > 0:
        z = math.copysign(excess / mc.std_error, mc.mean - closed)
    else:
        z = 0.0 if excess == 0.0 else math.copysign(math.inf, mc.mean - closed)
    report["z_score"] = z
    report["within_3se"] = abs(z) <= 3.0
    return report


def prefix_discrepancy(path: CadlagPath, c: float, stride: int = 1) -> Tuple[float, float]:
    """
    Largest change of X^{i,c} (shifted by X_a) and X̃^c at past samples when the path is cut short.

    Both processes are adapted exactly when these are 0: the value at t_k computed from the
    prefix ending at t_k equals the value computed from the whole path.

    Returns:
        (max discrepancy of X_a + X^{i,c}, max discrepancy of X̃^c)
    """
    if stride < 1:
        raise ConfigError(f"stride must be positive, got {stride}")
    full = build_adapted(path, c)
    worst_ic = worst_tilde = 0.0
    for n in range(1, len(path) + 1, stride):
        prefix = build_adapted(path.restrict(n), c)
        worst_ic = max(worst_ic, float(np.max(np.abs(prefix.x_tilde_ic.values - full.x_tilde_ic.values[:n]))))
        worst_tilde = max(worst_tilde, float(np.max(np.abs(prefix.x_tilde_c.values - full.x_tilde_c.values[:n]))))
    return worst_ic, worst_tilde


def adaptedness_test(params: BmParams, cfg: McConfig, stride: int = 1) -> AdaptednessReport:
    """
    Prefix-consistency of the adapted approximants on cfg.n_paths paths over [0, cfg.horizon].
    """
    n_steps, dt = _fixed_grid(cfg.horizon, cfg.dt)
    worst_ic = worst_tilde = 0.0
    for i in range(cfg.n_paths):
        path = simulate_bm_path(params.mu, dt, n_steps, path_rng(cfg.seed, i))
        ic, tilde = prefix_discrepancy(path, params.c, stride)
        worst_ic, worst_tilde = max(worst_ic, ic), max(worst_tilde, tilde)

    report = AdaptednessReport(
        paths=cfg.n_paths,
        samples=n_steps + 1,
        max_discrepancy_ic=worst_ic,
        max_discrepancy_tilde=worst_tilde,
    )
    log.info(f"Adaptedness over {cfg.n_paths} paths: X^(i,c) {worst_ic!r}, X~^c {worst_tilde!r}")
    return report
