"""
Sampled càdlàg paths and elementary path functionals.

A finite sample (t_0 < ... < t_{n-1}, f(t_i)) is read as the piecewise-constant,
right-continuous function f(s) = f(t_i) for t_i <= s < t_{i+1}. Every supremum over
partitions of [a;b] is then attained on sample points, so the functionals below are exact.

This module provides:
 - CadlagPath, TruncationLevel
 - total_variation(path) -> float
 - cumulative_variation(path) -> np.ndarray
 - oscillation(path) -> float
 - sup_distance(p, q) -> float
 - jordan_decomposition(path) -> Tuple[np.ndarray, np.ndarray]
 - read_path_csv(csv_path) -> CadlagPath
 - write_path_csv(path, csv_path) -> None
"""

import math
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np
import pandas as pd

from setup.logger import log
from setup.normalize import TIME_COLUMN, VALUE_COLUMN, TableFormatError, normalize_path_table, read_raw_table
from setup.validate import count_issues, validate_path_table

from .exceptions import DomainMismatchError, ParameterDomainError, PathValidationError


@dataclass(frozen=True, eq=False)
class CadlagPath:
    """
    Piecewise-constant càdlàg function on [a;b] = [times[0]; times[-1]].

    Attributes:
        times: Strictly increasing float64 timestamps, read-only
        values: Float64 values f(t_i), read-only, same length as times
    """

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.array(self.times, dtype=np.float64).reshape(-1)
        values = np.array(self.values, dtype=np.float64).reshape(-1)

        if times.size == 0:
            raise PathValidationError("A path needs at least one sample")
        if times.size != values.size:
            raise PathValidationError(f"times has {times.size} entries but values has {values.size}")
        if not np.all(np.isfinite(times)) or not np.all(np.isfinite(values)):
            raise PathValidationError("Path times and values must be finite")

        steps = np.diff(times)
        if np.any(steps <= 0):
            first = int(np.argmax(steps <= 0)) + 1
            kind = "Duplicate" if steps[first - 1] == 0 else "Decreasing"
            raise PathValidationError(f"{kind} timestamp at sample {first} (t={times[first]!r})")

        times.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_values(cls, values: Sequence[float], start: float = 0.0, step: float = 1.0) -> "CadlagPath":
        """Build a path on the regular grid start, start + step, ..."""
        values = np.asarray(values, dtype=np.float64)
        return cls(times=start + step * np.arange(values.size, dtype=np.float64), values=values)

    def __len__(self) -> int:
        return int(self.values.size)

    @property
    def a(self) -> float:
        return float(self.times[0])

    @property
    def b(self) -> float:
        return float(self.times[-1])

    def evaluate(self, s: Union[float, np.ndarray]) -> np.ndarray:
        """
        Value of the step function at s (greatest sample time <= s).

        Raises:
            DomainMismatchError: If some s lies outside [a;b].
        """
        s = np.asarray(s, dtype=np.float64)
        if np.any(s < self.a) or np.any(s > self.b):
            raise DomainMismatchError(f"Evaluation point outside [{self.a!r};{self.b!r}]")
        index = np.searchsorted(self.times, s, side="right") - 1
        return self.values[index]

    def with_values(self, values: Sequence[float]) -> "CadlagPath":
        """Same time grid, new values."""
        return CadlagPath(times=self.times, values=values)

    def negate(self) -> "CadlagPath":
        return self.with_values(-self.values)

    def shift(self, constant: float) -> "CadlagPath":
        return self.with_values(self.values + constant)

    def restrict(self, n: int) -> "CadlagPath":
        """The prefix made of the first n samples, i.e. the path on [a; t_{n-1}]."""
        if not 1 <= n <= len(self):
            raise PathValidationError(f"Prefix length {n} outside 1..{len(self)}")
        return CadlagPath(times=self.times[:n], values=self.values[:n])


@dataclass(frozen=True)
class TruncationLevel:
    """Truncation level c > 0, in the units of the path values."""

    c: float

    def __post_init__(self):
        c = float(self.c)
        if not math.isfinite(c) or c <= 0:
            raise ParameterDomainError(f"Truncation level must be positive and finite, got {self.c!r}")
        object.__setattr__(self, "c", c)


def as_level(c: Union[float, TruncationLevel]) -> float:
    """Validate and unwrap a truncation level."""
    if isinstance(c, TruncationLevel):
        return c.c
    return TruncationLevel(c).c


def total_variation(path: CadlagPath) -> float:
    """Sum of absolute increments; exact for piecewise-constant paths."""
    return math.fsum(np.abs(np.diff(path.values)).tolist())


def cumulative_variation(path: CadlagPath) -> np.ndarray:
    """TV(f,[a;t_i]) for every sample index i, starting at 0."""
    out = np.zeros(len(path))
    out[1:] = np.cumsum(np.abs(np.diff(path.values)))
    return out


def oscillation(path: CadlagPath) -> float:
    """‖f‖_osc = max f − min f."""
    return float(np.max(path.values) - np.min(path.values))


def sup_distance(p: CadlagPath, q: CadlagPath) -> float:
    """
    ‖p − q‖_∞ evaluated on the union of both sample grids (exact for step functions).

    Raises:
        DomainMismatchError: If the two paths do not share [a;b].
    """
    if p.a != q.a or p.b != q.b:
        raise DomainMismatchError(f"Domains differ: [{p.a!r};{p.b!r}] vs [{q.a!r};{q.b!r}]")
    grid = np.union1d(p.times, q.times)
    return float(np.max(np.abs(p.evaluate(grid) - q.evaluate(grid))))


def jordan_decomposition(path: CadlagPath) -> Tuple[np.ndarray, np.ndarray]:
    """
    Minimal decomposition f − f(a) = P − N into nondecreasing processes.

    Returns:
        (P, N): positive and negative variation at every sample, with P + N = cumulative TV
    """
    steps = np.diff(path.values)
    positive = np.zeros(len(path))
    negative = np.zeros(len(path))
    positive[1:] = np.cumsum(np.maximum(steps, 0.0))
    negative[1:] = np.cumsum(np.maximum(-steps, 0.0))
    return positive, negative


def read_path_csv(csv_path: str) -> CadlagPath:
    """
    Read a `t,value` CSV file (header optional) into a path.

    Raises:
        PathValidationError: With the offending line numbers on parse or ordering errors.
    """
    try:
        table = normalize_path_table(read_raw_table(csv_path))
    except TableFormatError as e:
        raise PathValidationError(str(e), e.line_numbers) from e

    issues = validate_path_table(table)
    if count_issues(issues) > 0:
        details = "; ".join(f"{name} on line(s) {lines}" for name, lines in issues.items() if lines)
        bad_lines = sorted({line for lines in issues.values() for line in lines})
        raise PathValidationError(f"Invalid path in {csv_path}: {details}", bad_lines)

    log.debug(f"Path read from {csv_path}: {len(table)} samples")
    return CadlagPath(times=table[TIME_COLUMN].to_numpy(), values=table[VALUE_COLUMN].to_numpy())


def write_path_csv(path: CadlagPath, csv_path: str) -> None:
    """Write a path with a `t,value` header, floats printed with 17 significant digits."""
    frame = pd.DataFrame({TIME_COLUMN: path.times, VALUE_COLUMN: path.values})
    frame.to_csv(csv_path, index=False, float_format="%.17g", lineterminator="\n")
