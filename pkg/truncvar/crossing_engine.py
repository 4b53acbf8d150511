"""
Single-pass stopping-time decomposition and truncated variation processes.

The engine walks the path once, keeping the running extremum since the last epoch boundary
and the opposite extremum the epoch started from. Before the first epoch only the running
min and max are tracked; the first of (x − min >= c) or (max − x >= c) decides the branch.
A DownFirst path is processed as its reflection −f and the outputs are swapped, so a single
"rising/falling" state machine serves both branches.

This module provides:
 - decompose(path, c) -> CrossingDecomposition
 - variation_profile(path, c) -> VariationProfile
 - truncated_variation(path, c) / upward_tv(path, c) / downward_tv(path, c) -> float
 - tv_profile_in_c(path, c_grid) -> List[Tuple[float, float]]
 - batch_final_variations(values, c) -> Tuple[np.ndarray, np.ndarray]
"""

from dataclasses import dataclass
from enum import Enum, auto
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from setup.logger import log

from .exceptions import ValidationError
from .path_core import CadlagPath, TruncationLevel, as_level


class Branch(Enum):
    """Which threshold is reached first; ties resolve as UP_FIRST."""

    UP_FIRST = auto()
    DOWN_FIRST = auto()


class EpochKind(Enum):
    UP = auto()  # running max regime, [T_U,k ; T_D,k)
    DOWN = auto()  # running min regime, [T_D,k ; T_U,k+1)


@dataclass(frozen=True)
class Epoch:
    """
    One regime of the alternating decomposition.

    Attributes:
        kind: UP or DOWN
        start_index: Sample index of the stopping time opening the epoch
        end_index: Sample index of the stopping time closing it, None while still open at b
        extremum: Running max (UP) or min (DOWN) over the epoch, M_k or m_{k+1}
        anchor: The opposite extremum the epoch was measured from, m_k (UP) or M_k (DOWN)
    """

    kind: EpochKind
    start_index: int
    end_index: Optional[int]
    extremum: float
    anchor: float

    @property
    def completed(self) -> bool:
        return self.end_index is not None


@dataclass(frozen=True)
class CrossingDecomposition:
    branch: Branch
    epochs: Tuple[Epoch, ...]

    @property
    def K(self) -> int:
        """Number of completed epochs."""
        return sum(1 for epoch in self.epochs if epoch.completed)


@dataclass(frozen=True, eq=False)
class VariationProfile:
    """UTV^c, DTV^c and TV^c of f on [a;t_i] at every sample time t_i."""

    times: np.ndarray
    utv: np.ndarray
    dtv: np.ndarray
    tv: np.ndarray

    @property
    def final(self) -> Tuple[float, float, float]:
        """(utv, dtv, tv) on the whole domain."""
        return float(self.utv[-1]), float(self.dtv[-1]), float(self.tv[-1])


@dataclass(frozen=True)
class _Scan:
    """Everything one pass produces; shared by decompose, variation_profile and the approximants."""

    branch: Branch
    epochs: Tuple[Epoch, ...]
    utv: List[float]
    dtv: List[float]
    lazy: List[float]  # f^c values
    first_index: Optional[int]  # index of the first stopping time, None when no epoch opens


def _scan(values: Sequence[float], c: float) -> _Scan:
    """Run the state machine over plain Python floats."""
    n = len(values)
    utv = [0.0] * n
    dtv = [0.0] * n
    lazy = [0.0] * n

    # Before the first epoch: running min and max of f
    lo = hi = values[0]
    sign = 0
    first = n
    for i, x in enumerate(values):
        if x < lo:
            lo = x
        if x > hi:
            hi = x
        if x - lo >= c:
            sign = 1
        elif hi - x >= c:
            sign = -1
        if sign != 0:
            first = i
            break

    if sign == 0:
        # c-crossings never happen: all variations vanish and f^c is the midpoint constant
        middle = (lo + hi) / 2
        return _Scan(Branch.UP_FIRST, (), utv, dtv, [middle] * n, None)

    half = c / 2
    # Pre-epoch value of f^c: m_0 + c/2 (UpFirst) or M_0 − c/2 (DownFirst)
    pre = lo + half if sign > 0 else hi - half
    for i in range(first):
        lazy[i] = pre

    # From here on work with g = sign * f, which always starts rising
    anchor = lo if sign > 0 else -hi
    ext = sign * values[first]
    rising = True
    up_done = 0.0
    down_done = 0.0
    start = first
    epochs: List[Epoch] = []

    def _record(end: Optional[int]) -> None:
        up_in_f = rising == (sign > 0)
        epochs.append(
            Epoch(
                kind=EpochKind.UP if up_in_f else EpochKind.DOWN,
                start_index=start,
                end_index=end,
                extremum=sign * ext,
                anchor=sign * anchor,
            )
        )

    for i in range(first, n):
        g = sign * values[i]
        # Running extremum is updated before the threshold test
        if rising:
            if g > ext:
                ext = g
            if ext - g >= c:
                up_done += ext - anchor - c
                _record(i)
                anchor, ext, rising, start = ext, g, False, i
        else:
            if g < ext:
                ext = g
            if g - ext >= c:
                down_done += anchor - ext - c
                _record(i)
                anchor, ext, rising, start = ext, g, True, i

        if rising:
            up = up_done + ext - anchor - c
            down = down_done
            lazy_g = ext - half
        else:
            up = up_done
            down = down_done + anchor - ext - c
            lazy_g = ext + half

        if sign > 0:
            utv[i], dtv[i] = up, down
        else:
            utv[i], dtv[i] = down, up
        lazy[i] = sign * lazy_g

    _record(None)
    branch = Branch.UP_FIRST if sign > 0 else Branch.DOWN_FIRST
    return _Scan(branch, tuple(epochs), utv, dtv, lazy, first)


def scan_path(path: CadlagPath, c: Union[float, TruncationLevel]) -> _Scan:
    """One engine pass over a validated path; the building block of the public operations."""
    level = as_level(c)
    result = _scan(path.values.tolist(), level)
    log.debug(f"Engine pass: n={len(path)}, c={level!r}, branch={result.branch.name}, epochs={len(result.epochs)}")
    return result


def decompose(path: CadlagPath, c: Union[float, TruncationLevel]) -> CrossingDecomposition:
    """
    Alternating stopping-time decomposition of a sampled path.

    Args:
        path: The sampled càdlàg path
        c: Truncation level

    Returns:
        CrossingDecomposition: branch and alternating epochs (empty with UP_FIRST if no c-crossing)
    """
    result = scan_path(path, c)
    return CrossingDecomposition(branch=result.branch, epochs=result.epochs)


def variation_profile(path: CadlagPath, c: Union[float, TruncationLevel]) -> VariationProfile:
    """
    Running UTV^c, DTV^c and TV^c = UTV^c + DTV^c at every sample time.

    Args:
        path: The sampled càdlàg path
        c: Truncation level

    Returns:
        VariationProfile aligned with path.times, all three sequences starting at 0
    """
    result = scan_path(path, c)
    utv = np.asarray(result.utv)
    dtv = np.asarray(result.dtv)
    return VariationProfile(times=path.times, utv=utv, dtv=dtv, tv=utv + dtv)


def truncated_variation(path: CadlagPath, c: Union[float, TruncationLevel]) -> float:
    return variation_profile(path, c).final[2]


def upward_tv(path: CadlagPath, c: Union[float, TruncationLevel]) -> float:
    return variation_profile(path, c).final[0]


def downward_tv(path: CadlagPath, c: Union[float, TruncationLevel]) -> float:
    return variation_profile(path, c).final[1]


def validate_c_grid(c_grid: Sequence[float]) -> List[float]:
    """
    Check a grid of truncation levels is nonempty, positive and strictly increasing.

    Raises:
        ValidationError: Otherwise.
    """
    grid = [float(c) for c in c_grid]
    if not grid:
        raise ValidationError("The c grid is empty")
    for c in grid:
        as_level(c)
    if any(later <= earlier for earlier, later in zip(grid, grid[1:])):
        raise ValidationError("The c grid must be strictly increasing")
    return grid


def tv_profile_in_c(path: CadlagPath, c_grid: Sequence[float]) -> List[Tuple[float, float]]:
    """
    TV^c(f,[a;b]) for every c of an increasing grid, each computed independently.

    Returns:
        List of (c, tv) pairs in grid order; tv is nonincreasing and convex in c.
    """
    grid = validate_c_grid(c_grid)
    values = path.values.tolist()
    out = []
    for c in grid:
        result = _scan(values, c)
        out.append((c, result.utv[-1] + result.dtv[-1]))
    return out


def batch_final_variations(values: np.ndarray, c: Union[float, TruncationLevel]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Final (UTV^c, DTV^c) of many sampled paths at once.

    Rows are paths on a common number of samples; shorter paths should be padded with their
    last value, which leaves every truncated variation unchanged. The recursion and the order
    of floating point operations are the ones of the scalar engine, so results agree with
    variation_profile.

    Args:
        values: Array of shape (n_paths, n_samples)
        c: Truncation level

    Returns:
        (utv, dtv): arrays of shape (n_paths,)
    """
    level = as_level(c)
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2 or values.shape[1] == 0:
        raise ValidationError(f"Expected a 2-d array with at least one column, got shape {values.shape}")

    n_paths, n_samples = values.shape
    lo = values[:, 0].copy()
    hi = values[:, 0].copy()
    sign = np.zeros(n_paths)
    anchor = np.zeros(n_paths)
    ext = np.zeros(n_paths)
    rising = np.ones(n_paths, dtype=bool)
    up_done = np.zeros(n_paths)
    down_done = np.zeros(n_paths)

    for j in range(n_samples):
        x = values[:, j]

        # Paths still waiting for their first epoch
        pre = sign == 0
        if pre.any():
            np.minimum(lo, x, out=lo, where=pre)
            np.maximum(hi, x, out=hi, where=pre)
            opens_up = pre & (x - lo >= level)
            opens_down = pre & ~opens_up & (hi - x >= level)
            sign[opens_up] = 1.0
            anchor[opens_up] = lo[opens_up]
            ext[opens_up] = x[opens_up]
            sign[opens_down] = -1.0
            anchor[opens_down] = -hi[opens_down]
            ext[opens_down] = -x[opens_down]

        # Paths inside an epoch (a path opened at this sample cannot switch at the same sample)
        live = ~pre
        if not live.any():
            continue
        g = sign * x
        up = live & rising
        down = live & ~rising
        np.maximum(ext, g, out=ext, where=up)
        np.minimum(ext, g, out=ext, where=down)

        to_down = up & (ext - g >= level)
        to_up = down & (g - ext >= level)
        up_done[to_down] += ext[to_down] - anchor[to_down] - level
        down_done[to_up] += anchor[to_up] - ext[to_up] - level
        switch = to_down | to_up
        anchor[switch] = ext[switch]
        ext[switch] = g[switch]
        rising[switch] = ~rising[switch]

    opened = sign != 0
    up_g = np.where(opened & rising, up_done + ext - anchor - level, up_done)
    down_g = np.where(opened & ~rising, down_done + anchor - ext - level, down_done)
    utv = np.where(sign < 0, down_g, up_g)
    dtv = np.where(sign < 0, up_g, down_g)
    return utv, dtv
