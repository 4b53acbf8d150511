"""
Brute-force truncated variations, straight from the definitions.

For a piecewise-constant path every partition of [a;b] can be replaced by the sample times it
visits without lowering the sum, so the supremum over partitions is a maximum over increasing
subsequences of sample indices. Subsequences are enumerated as bit masks; a 0/1 matrix records
which index pairs are consecutive in each mask, so one matrix product scores all of them.

This module provides:
 - brute_tv(path, c) / brute_utv(path, c) / brute_dtv(path, c) -> OracleResult
 - brute_variations_batch(values, c or per-path levels) -> Tuple[np.ndarray, np.ndarray, np.ndarray]
 - brute_optimality_gap(path, c, trials, seed) -> float
 - oracle_equivalence(max_n, random_paths, seed) -> pd.DataFrame
"""

import itertools
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Callable, Dict, Optional, Tuple, Union

import numpy as np
import pandas as pd

from setup.logger import log

from . import settings
from .approximants import build_f_c
from .crossing_engine import variation_profile
from .exceptions import ParameterDomainError, SizeCapError, ValidationError
from .path_core import CadlagPath, TruncationLevel, as_level

# Exhaustive check: every value sequence over this grid, at each of these truncation levels
EXHAUSTIVE_GRID = (0.0, 0.5, 1.0, 1.5)
EXHAUSTIVE_LEVELS = (0.25, 0.5, 1.0, 2.0)
EQUIVALENCE_TOL = 1e-12


class Direction(Enum):
    TV = "tv"
    UTV = "utv"
    DTV = "dtv"


_TRUNCATED: Dict[Direction, Callable[[np.ndarray, float], np.ndarray]] = {
    Direction.TV: lambda d, c: np.maximum(np.abs(d) - c, 0.0),
    Direction.UTV: lambda d, c: np.maximum(d - c, 0.0),
    Direction.DTV: lambda d, c: np.maximum(-d - c, 0.0),
}


@dataclass(frozen=True)
class OracleResult:
    """
    Attributes:
        value: The supremum
        witness: Increasing sample indices of a subsequence attaining it
    """

    value: float
    witness: Tuple[int, ...]


@lru_cache(maxsize=None)
def _pair_structure(n: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Index pairs (i < j) of n samples and the (2^n, pairs) matrix of consecutive pairs per mask.
    """
    pairs = list(itertools.combinations(range(n), 2))
    first = np.array([i for i, _ in pairs], dtype=np.int64)
    second = np.array([j for _, j in pairs], dtype=np.int64)

    masks = np.arange(1 << n, dtype=np.int64)[:, None]
    has_i = (masks >> first) & 1
    has_j = (masks >> second) & 1
    # Bits strictly between i and j
    between = ((1 << second) - 1) & ~((1 << (first + 1)) - 1)
    consecutive = (has_i == 1) & (has_j == 1) & ((masks & between) == 0)
    matrix = consecutive.astype(np.float64)
    matrix.setflags(write=False)
    return first, second, matrix


def _check_size(n: int, size_cap: int) -> None:
    if n > size_cap:
        raise SizeCapError(f"Brute-force enumeration of {n} samples exceeds the cap of {size_cap} (cost 2^n)")


def _witness(mask: int, n: int) -> Tuple[int, ...]:
    return tuple(i for i in range(n) if mask >> i & 1)


def _brute(path: CadlagPath, c: Union[float, TruncationLevel], direction: Direction, size_cap: int) -> OracleResult:
    level = as_level(c)
    n = len(path)
    _check_size(n, size_cap)
    if n < 2:
        return OracleResult(value=0.0, witness=(0,))

    first, second, matrix = _pair_structure(n)
    values = path.values
    scores = matrix @ _TRUNCATED[direction](values[second] - values[first], level)
    best = int(np.argmax(scores))
    return OracleResult(value=float(scores[best]), witness=_witness(best, n))


def brute_tv(
    path: CadlagPath, c: Union[float, TruncationLevel], size_cap: int = settings.ORACLE_SIZE_CAP
) -> OracleResult:
    """
    sup over increasing index subsequences of Σ max(|f(t_i) − f(t_{i−1})| − c, 0).

    Raises:
        SizeCapError: If the path has more than size_cap samples.
    """
    return _brute(path, c, Direction.TV, size_cap)


def brute_utv(
    path: CadlagPath, c: Union[float, TruncationLevel], size_cap: int = settings.ORACLE_SIZE_CAP
) -> OracleResult:
    """Same supremum counting only rises, max(f(t_i) − f(t_{i−1}) − c, 0)."""
    return _brute(path, c, Direction.UTV, size_cap)


def brute_dtv(
    path: CadlagPath, c: Union[float, TruncationLevel], size_cap: int = settings.ORACLE_SIZE_CAP
) -> OracleResult:
    """Same supremum counting only falls, max(f(t_{i−1}) − f(t_i) − c, 0)."""
    return _brute(path, c, Direction.DTV, size_cap)


def _row_levels(c, n_paths: int) -> Union[float, np.ndarray]:
    """One level for every row, or a column of per-row levels broadcasting against (n_paths, pairs)."""
    if np.ndim(c) == 0:
        return as_level(c)
    levels = np.asarray(c, dtype=np.float64)
    if levels.shape != (n_paths,):
        raise ValidationError(f"Expected {n_paths} truncation levels, got shape {levels.shape}")
    if not np.all(np.isfinite(levels) & (levels > 0)):
        raise ParameterDomainError("Every truncation level must be positive and finite")
    return levels[:, None]


def brute_variations_batch(
    values: np.ndarray, c: Union[float, TruncationLevel, np.ndarray], size_cap: int = settings.ORACLE_SIZE_CAP
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Brute-force (tv, utv, dtv) of many paths with the same number of samples.

    Args:
        values: Array of shape (n_paths, n_samples)
        c: Truncation level, or one level per path as an array of shape (n_paths,)

    Returns:
        Three arrays of shape (n_paths,)
    """
    values = np.asarray(values, dtype=np.float64)
    n_paths, n = values.shape
    level = _row_levels(c, n_paths)
    _check_size(n, size_cap)
    if n < 2:
        zeros = np.zeros(n_paths)
        return zeros, zeros.copy(), zeros.copy()

    first, second, matrix = _pair_structure(n)
    diffs = values[:, second] - values[:, first]
    out = []
    for direction in (Direction.TV, Direction.UTV, Direction.DTV):
        scores = _TRUNCATED[direction](diffs, level) @ matrix.T
        out.append(scores.max(axis=1))
    return out[0], out[1], out[2]


def brute_optimality_gap(path: CadlagPath, c: Union[float, TruncationLevel], trials: int, seed: int) -> float:
    """
    Randomized search for a competitor in the c/2 ball with smaller total variation.

    Every trial starts from f^c or f plus random noise (trial 0 is f^c unperturbed), is clipped
    into the ball, then improved by coordinate descent: each value is pulled into the range of its
    neighbours, then back into [f_i − c/2, f_i + c/2]. All trials run side by side.

    Args:
        path: The sampled path f
        c: Truncation level
        trials: Number of random starting points, at least 1
        seed: Seed of the numpy generator

    Returns:
        float: min TV over the competitors found, minus TV^c(f); expected >= −1e−10
    """
    if trials < 1:
        raise ValidationError(f"trials must be positive, got {trials}")
    level = as_level(c)
    rng = np.random.default_rng(seed)
    f = path.values
    n = len(path)
    lower, upper = f - level / 2, f + level / 2
    lazy = build_f_c(path, level).f_c.values
    tv_c = variation_profile(path, level).final[2]

    # 1. Starting points
    start = np.where(rng.random((trials, 1)) < 0.5, lazy, f)
    scale = rng.uniform(0.0, level / 2, size=(trials, 1))
    candidates = start + scale * rng.uniform(-1.0, 1.0, size=(trials, n))
    candidates[0] = lazy
    candidates = np.clip(candidates, lower, upper)

    # 2. Coordinate descent sweeps
    for _ in range(3):
        for i in range(n):
            if n == 1:
                break
            if i == 0:
                low_nb = high_nb = candidates[:, 1]
            elif i == n - 1:
                low_nb = high_nb = candidates[:, n - 2]
            else:
                low_nb = np.minimum(candidates[:, i - 1], candidates[:, i + 1])
                high_nb = np.maximum(candidates[:, i - 1], candidates[:, i + 1])
            pulled = np.clip(candidates[:, i], low_nb, high_nb)
            candidates[:, i] = np.clip(pulled, lower[i], upper[i])
        candidates[0] = lazy

    # 3. Best competitor
    tvs = np.abs(np.diff(candidates, axis=1)).sum(axis=1)
    gap = float(np.min(tvs)) - tv_c
    log.debug(f"Optimality gap over {trials} trials: {gap!r}")
    return gap


def _exhaustive_batches(max_n: int):
    grid = np.array(EXHAUSTIVE_GRID)
    for n in range(1, max_n + 1):
        index = np.array(list(itertools.product(range(len(grid)), repeat=n)), dtype=np.int64)
        yield n, grid[index]


def _random_batches(count: int, max_n: int, seed: int):
    rng = np.random.default_rng(seed)
    lengths = rng.integers(1, max_n + 1, size=count)
    for n in range(1, max_n + 1):
        size = int(np.sum(lengths == n))
        if size:
            yield n, rng.normal(0.0, 1.0, size=(size, n))


def _random_levels(batch: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """
    One truncation level per path: log-uniform on [0.05, 3], or for about half the paths the exact
    gap |x_j − x_i| between two of its samples, where crossing a threshold turns into a tie.
    """
    size, n = batch.shape
    levels = np.exp(rng.uniform(np.log(0.05), np.log(3.0), size=size))
    if n < 2:
        return levels
    rows = np.arange(size)
    i = rng.integers(0, n, size=size)
    j = (i + rng.integers(1, n, size=size)) % n
    gaps = np.abs(batch[rows, j] - batch[rows, i])
    tied = (rng.random(size) < 0.5) & (gaps > 0)
    return np.where(tied, gaps, levels)


def oracle_equivalence(
    max_n: int = 6,
    random_paths: int = 0,
    seed: Optional[int] = None,
    random_max_n: int = 12,
) -> pd.DataFrame:
    """
    Compare the streaming engine with brute-force enumeration.

    Steps:
    1. Every value sequence of length <= max_n over EXHAUSTIVE_GRID, at each EXHAUSTIVE_LEVELS c
    2. Optionally random_paths Gaussian paths of length <= random_max_n, each with its own c
       (log-uniform, or a gap between two of its samples)

    Returns:
        DataFrame with one row per (source, n, c): cases, max_error, passed. Random rows group
        every path of one length and carry c = NaN, since their levels differ per path.
    """
    if max_n < 1 or max_n > settings.ORACLE_SIZE_CAP:
        raise ValidationError(f"max_n must lie in 1..{settings.ORACLE_SIZE_CAP}, got {max_n}")
    if random_paths < 0:
        raise ValidationError(f"random_paths must be nonnegative, got {random_paths}")
    if random_paths and seed is None:
        raise ValidationError("Random verification requires a seed")

    rows = []

    def _compare(source: str, n: int, batch: np.ndarray, levels: np.ndarray, c: float) -> None:
        brute = brute_variations_batch(batch, levels)
        worst = 0.0
        for row, level, tv, utv, dtv in zip(batch, levels, *brute):
            streamed = variation_profile(CadlagPath.from_values(row), float(level)).final
            worst = max(worst, abs(streamed[0] - utv), abs(streamed[1] - dtv), abs(streamed[2] - tv))
        rows.append(
            {
                "source": source,
                "n": n,
                "c": c,
                "cases": len(batch),
                "max_error": worst,
                "passed": worst <= EQUIVALENCE_TOL,
            }
        )

    for n, batch in _exhaustive_batches(max_n):
        for c in EXHAUSTIVE_LEVELS:
            _compare("grid", n, batch, np.full(len(batch), c), c)

    if random_paths:
        rng = np.random.default_rng([seed, 1])
        for n, batch in _random_batches(random_paths, random_max_n, seed):
            _compare("random", n, batch, _random_levels(batch, rng), float("nan"))

    table = pd.DataFrame(rows, columns=["source", "n", "c", "cases", "max_error", "passed"])
    log.info(f"Oracle equivalence: {int(table['cases'].sum())} cases, {int((~table['passed']).sum())} failing rows")
    return table
