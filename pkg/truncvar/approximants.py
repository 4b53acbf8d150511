"""
Optimal approximants of a sampled path.

This module provides:
 - build_f_c(path, c) -> ApproximantBundle
 - build_adapted(path, c) -> AdaptedApproximant
 - shifted_adapted(path, c) -> CadlagPath
 - competitor_check(path, c, competitor) -> CompetitorReport
 - ball_competitors(path, c, count, seed) -> List[CadlagPath]
 - osc_competitors(path, c, count, seed) -> List[CadlagPath]
 - increment_deviation(path, f_ic) -> float
 - jump_violations(path, approximant) -> List[int]
"""

from dataclasses import dataclass
from typing import List, Tuple, Union

import numpy as np

from setup.logger import log

from . import settings
from .crossing_engine import Branch, scan_path
from .exceptions import BallViolationError, ValidationError
from .path_core import CadlagPath, TruncationLevel, as_level, cumulative_variation, oscillation, sup_distance


@dataclass(frozen=True, eq=False)
class ApproximantBundle:
    """
    The lazy approximant f^c and the objects derived from it.

    Attributes:
        f_c: Minimal-TV function with ‖f − f^c‖_∞ <= c/2
        f_ic: f_U^c − f_D^c, starting at 0, increments within c of those of f
        h_c: f^c − f
        h_0c: f(a) + f^{i,c} − f
        alpha: Offset with f^c = alpha + f^{i,c}
        alpha_0: −inf h^{0,c} − ‖h^{0,c}‖_osc / 2, centring h^{0,c} in the sup norm
    """

    f_c: CadlagPath
    f_ic: CadlagPath
    h_c: CadlagPath
    h_0c: CadlagPath
    alpha: float
    alpha_0: float


@dataclass(frozen=True, eq=False)
class AdaptedApproximant:
    """
    Approximants computable from the past of the path only.

    Attributes:
        x_tilde_c: c/2-accurate process built from first thresholds c/2, TV <= c/2 + TV^c
        x_tilde_ic: f(a) + f^{i,c}, c-accurate with TV = TV^c
        stopping_indices: Sample indices of T_u,0, T_d,0, T_u,1, ... (reflected for a first fall)
        branch: UP_FIRST when the c/2 rise comes first
    """

    x_tilde_c: CadlagPath
    x_tilde_ic: CadlagPath
    stopping_indices: Tuple[int, ...]
    branch: Branch


@dataclass(frozen=True, eq=False)
class CompetitorReport:
    """TV(g,[a;s]) − TV^c(f,[a;s]) at every sample time s of f."""

    times: np.ndarray
    differences: np.ndarray
    min_difference: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "times": self.times.tolist(),
            "differences": self.differences.tolist(),
            "min_difference": self.min_difference,
            "passed": self.passed,
        }


def build_f_c(path: CadlagPath, c: Union[float, TruncationLevel]) -> ApproximantBundle:
    """
    Construct f^c, f^{i,c}, h^c, h^{0,c}, alpha and alpha_0 in one engine pass.

    f^c is m_0 + c/2 before the first epoch, running max − c/2 on up epochs and running
    min + c/2 on down epochs (mirrored when the path falls first). When no epoch opens
    (c >= oscillation) f^c is the constant (min + max)/2 and f^{i,c} is 0.

    Args:
        path: The sampled path f
        c: Truncation level

    Returns:
        ApproximantBundle
    """
    level = as_level(c)
    scan = scan_path(path, level)
    f = path.values

    lazy = np.asarray(scan.lazy)
    f_ic_values = np.asarray(scan.utv) - np.asarray(scan.dtv)
    h_0c_values = f[0] + f_ic_values - f

    # alpha: inf f on [a, T_U) + c/2, sup f on [a, T_D) − c/2, or the midpoint; f^c(a) in all cases
    alpha = float(lazy[0])
    alpha_0 = float(-np.min(h_0c_values) - (np.max(h_0c_values) - np.min(h_0c_values)) / 2)

    return ApproximantBundle(
        f_c=path.with_values(lazy),
        f_ic=path.with_values(f_ic_values),
        h_c=path.with_values(lazy - f),
        h_0c=path.with_values(h_0c_values),
        alpha=alpha,
        alpha_0=alpha_0,
    )


def build_adapted(path: CadlagPath, c: Union[float, TruncationLevel]) -> AdaptedApproximant:
    """
    Construct the adapted process X̃^c.

    X̃^c stays at X_a until the path first moves c/2 away from X_a; from then on it follows the
    running max − c/2 (up regimes) or running min + c/2 (down regimes), switching regimes on
    full c drawdowns / drawups. Every value depends on the path up to that sample only.

    Args:
        path: The sampled path X
        c: Truncation level

    Returns:
        AdaptedApproximant
    """
    level = as_level(c)
    half = level / 2
    values = path.values.tolist()
    n = len(values)
    x_a = values[0]
    out = [x_a] * n

    # First thresholds are c/2 away from the starting value
    sup = inf = x_a
    sign = 0
    first = n
    for i, x in enumerate(values):
        if x > sup:
            sup = x
        if x < inf:
            inf = x
        if sup - x_a >= half:
            sign = 1
        elif x_a - inf >= half:
            sign = -1
        if sign != 0:
            first = i
            break

    stops: List[int] = []
    if sign != 0:
        stops.append(first)
        ext = sign * values[first]
        rising = True
        for i in range(first, n):
            g = sign * values[i]
            if rising:
                if g > ext:
                    ext = g
                if ext - g >= level:
                    ext, rising = g, False
                    stops.append(i)
            else:
                if g < ext:
                    ext = g
                if g - ext >= level:
                    ext, rising = g, True
                    stops.append(i)
            out[i] = sign * (ext - half if rising else ext + half)

    scan = scan_path(path, level)
    x_tilde_ic = x_a + np.asarray(scan.utv) - np.asarray(scan.dtv)

    return AdaptedApproximant(
        x_tilde_c=path.with_values(out),
        x_tilde_ic=path.with_values(x_tilde_ic),
        stopping_indices=tuple(stops),
        branch=Branch.DOWN_FIRST if sign < 0 else Branch.UP_FIRST,
    )


def shifted_adapted(path: CadlagPath, c: Union[float, TruncationLevel]) -> CadlagPath:
    """X_a + X^{i,c}: adapted, within c of X, with TV equal to TV^c."""
    return build_adapted(path, c).x_tilde_ic


def competitor_check(path: CadlagPath, c: Union[float, TruncationLevel], competitor: CadlagPath) -> CompetitorReport:
    """
    Compare the variation of a competitor in the c/2 ball with TV^c of the path.

    Args:
        path: The sampled path f
        c: Truncation level
        competitor: Any path g on the same domain with ‖f − g‖_∞ <= c/2

    Returns:
        CompetitorReport with TV(g,[a;s]) − TV^c(f,[a;s]) at the sample times of f

    Raises:
        BallViolationError: If g leaves the c/2 ball around f.
    """
    level = as_level(c)
    distance = sup_distance(path, competitor)
    if distance > level / 2 + settings.BALL_TOL:
        raise BallViolationError(f"Competitor is {distance!r} away from the path, more than c/2 = {level / 2!r}")

    scan = scan_path(path, level)
    tv_c = np.asarray(scan.utv) + np.asarray(scan.dtv)
    competitor_tv = cumulative_variation(competitor)
    at_times = competitor_tv[np.searchsorted(competitor.times, path.times, side="right") - 1]

    differences = at_times - tv_c
    min_difference = float(np.min(differences))
    return CompetitorReport(
        times=path.times,
        differences=differences,
        min_difference=min_difference,
        passed=min_difference >= -1e-10,
    )


def ball_competitors(path: CadlagPath, c: Union[float, TruncationLevel], count: int, seed: int) -> List[CadlagPath]:
    """
    Random competitors inside the c/2 ball around the path.

    Half of them are f^c plus uniform noise clipped to the ball; the other half flatten a random
    window of f^c (or of f itself) to a single level, clipped to the ball where the window does
    not admit a constant.

    Args:
        path: The sampled path f
        c: Truncation level
        count: Number of competitors
        seed: Seed of the numpy generator

    Returns:
        List of paths on the grid of f
    """
    if count < 1:
        raise ValidationError(f"count must be positive, got {count}")
    level = as_level(c)
    rng = np.random.default_rng(seed)
    f = path.values
    lower, upper = f - level / 2, f + level / 2
    lazy = build_f_c(path, level).f_c.values
    n = len(path)

    competitors = []
    for k in range(count):
        if k % 2 == 0:
            scale = rng.uniform(0.0, 1.0)
            candidate = lazy + scale * rng.uniform(-level / 2, level / 2, size=n)
        else:
            candidate = (lazy if rng.random() < 0.5 else f).copy()
            i, j = sorted(rng.integers(0, n, size=2))
            window_low, window_high = np.max(lower[i : j + 1]), np.min(upper[i : j + 1])
            if window_low <= window_high:
                candidate[i : j + 1] = rng.uniform(window_low, window_high)
            else:
                candidate[i : j + 1] = np.mean(f[i : j + 1])
        competitors.append(path.with_values(np.clip(candidate, lower, upper)))

    log.debug(f"Generated {count} ball competitors (n={n}, c={level!r})")
    return competitors


def osc_competitors(path: CadlagPath, c: Union[float, TruncationLevel], count: int, seed: int) -> List[CadlagPath]:
    """
    Random competitors f + h with ‖h‖_osc <= c, for the increment-approximation problem.

    Returns:
        List of paths on the grid of f
    """
    if count < 1:
        raise ValidationError(f"count must be positive, got {count}")
    level = as_level(c)
    rng = np.random.default_rng(seed)
    f = path.values
    f_ic = build_f_c(path, level).f_ic.values
    competitors = []
    for k in range(count):
        offset = rng.uniform(-level, level)
        if k % 2 == 0:
            h = offset + rng.uniform(0.0, level, size=len(path))
        else:
            # Perturb h^{0,c}, staying inside an interval of length c that contains it
            h0 = f[0] + f_ic - f
            low = np.min(h0) - rng.uniform(0.0, 1.0) * max(level - np.ptp(h0), 0.0)
            h = np.clip(h0 + rng.uniform(-level / 4, level / 4, size=len(path)), low, low + level)
            h = h + offset
        competitors.append(path.with_values(f + h))
    return competitors


def increment_deviation(path: CadlagPath, f_ic: CadlagPath) -> float:
    """
    max over u < s of |(g(s) − g(u)) − (f(s) − f(u))|, which equals ‖g − f‖_osc.
    """
    return oscillation(path.with_values(f_ic.values - path.values))


def jump_violations(path: CadlagPath, approximant: CadlagPath, tol: float = 1e-12) -> List[int]:
    """
    Sample indices where the approximant jumps while f does not, or jumps by more than f.
    """
    jump_f = np.abs(np.diff(path.values))
    jump_g = np.abs(np.diff(approximant.values))
    bad = (jump_g > tol) & (jump_f == 0) | (jump_g > jump_f + tol)
    return (np.nonzero(bad)[0] + 1).tolist()
