"""
Command-line configuration of truncvar.

This module provides a RunConfig dataclass built from argv by RunConfig.of(argv). All flags
are validated here, before any computation runs; unknown flags and malformed values raise
ConfigError instead of exiting the interpreter.
"""

import argparse
from dataclasses import dataclass, field
from enum import Enum, auto
from typing import ClassVar, Dict, List, Optional, Sequence

import numpy as np

from setup.logger import LOG_LEVELS

from . import settings
from .exceptions import ConfigError
from .monte_carlo import Quantity


class Subcommand(Enum):
    """Enum for the subcommands of the command line."""

    TV = auto()  # truncated variations of one path
    APPROX = auto()  # f^c, f^{i,c} and X̃^c as CSV paths
    PROFILE = auto()  # (c, tv) over a grid of truncation levels
    ANALYTICS = auto()  # closed-form Brownian quantities
    MC = auto()  # Monte Carlo estimate against its closed form
    VERIFY = auto()  # brute-force oracle equivalence suite
    COMPETE = auto()  # one competitor path against TV^c of a path


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of printing usage and exiting."""

    def error(self, message):
        raise ConfigError(message)


def parse_c_grid(text: str) -> List[float]:
    """
    Parse `start:stop:count` into count evenly spaced levels, endpoints included.

    Raises:
        ConfigError: If the syntax is wrong, count < 1, or the grid is not positive and increasing.
    """
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"c-grid must look like start:stop:count, got {text!r}")
    try:
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ConfigError(f"c-grid must look like start:stop:count, got {text!r}")
    if count < 1:
        raise ConfigError(f"c-grid count must be positive, got {count}")
    if count == 1:
        if start != stop:
            raise ConfigError(f"A one-point c-grid needs start == stop, got {text!r}")
        grid = [start]
    else:
        grid = np.linspace(start, stop, count).tolist()
    if grid[0] <= 0 or any(later <= earlier for earlier, later in zip(grid, grid[1:])):
        raise ConfigError(f"c-grid must be positive and strictly increasing, got {text!r}")
    return grid


@dataclass
class RunConfig:
    """
    One validated command-line invocation.

    Attributes:
        subcommand: Which computation to run
        input_path: CSV path file (tv, approx, profile, compete)
        competitor_path: CSV competitor path of compete
        output_path: Where stdout output goes instead of the terminal
        c: Truncation level
        c_grid: Truncation levels of the profile subcommand
        with_profile: Include the running profile in tv output
        csv_prefix: Prefix of the CSV files written by approx
        mu, nu: Brownian parameters of analytics and mc
        lam: Transform argument
        T: Fixed time horizon
        k_max, quad_tol: Series controls of the fixed-time quantities
        quantity: Monte Carlo quantity
        n_paths, dt, horizon, seed, antithetic, bias, threads: Monte Carlo controls
        max_n, random: Oracle verification sizes
        strict: Turn configuration warnings into errors
        log_level: Level of the shared logger
    """

    subcommand: Subcommand
    input_path: Optional[str] = None
    competitor_path: Optional[str] = None
    output_path: Optional[str] = None
    c: Optional[float] = None
    c_grid: List[float] = field(default_factory=list)
    with_profile: bool = False
    csv_prefix: Optional[str] = None
    mu: float = 0.0
    nu: float = 1.0
    lam: Optional[float] = None
    T: Optional[float] = None
    k_max: int = settings.K_MAX
    quad_tol: float = settings.QUAD_TOL
    quantity: Optional[Quantity] = None
    n_paths: int = 10_000
    dt: float = 1e-3
    horizon: float = 1.0
    seed: Optional[int] = None
    antithetic: bool = False
    bias: bool = False
    threads: Optional[int] = None
    max_n: int = 6
    random: int = 0
    strict: bool = False
    log_level: Optional[str] = None

    SUBCOMMANDS: ClassVar[Dict[str, Subcommand]] = {
        "tv": Subcommand.TV,
        "approx": Subcommand.APPROX,
        "profile": Subcommand.PROFILE,
        "analytics": Subcommand.ANALYTICS,
        "mc": Subcommand.MC,
        "verify": Subcommand.VERIFY,
        "compete": Subcommand.COMPETE,
    }

    @staticmethod
    def parser() -> argparse.ArgumentParser:
        parser = _Parser(prog="truncvar", description="Truncated variation of sampled paths and Brownian analytics")
        parser.add_argument("--log-level", dest="log_level", choices=LOG_LEVELS)
        commands = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

        def common(sub):
            sub.add_argument("--out", dest="output_path")
            sub.add_argument("--log-level", dest="sub_log_level", choices=LOG_LEVELS)
            sub.add_argument("--strict", action="store_true")

        tv = commands.add_parser("tv", help="UTV^c, DTV^c and TV^c of a path")
        tv.add_argument("--in", dest="input_path", required=True)
        tv.add_argument("--c", type=float, required=True)
        tv.add_argument("--profile", dest="with_profile", action="store_true")
        common(tv)

        approx = commands.add_parser("approx", help="Optimal approximants as CSV paths")
        approx.add_argument("--in", dest="input_path", required=True)
        approx.add_argument("--c", type=float, required=True)
        approx.add_argument("--csv-prefix", dest="csv_prefix")
        common(approx)

        profile = commands.add_parser("profile", help="TV^c over a grid of truncation levels")
        profile.add_argument("--in", dest="input_path", required=True)
        profile.add_argument("--c-grid", dest="c_grid_text", required=True)
        common(profile)

        analytics = commands.add_parser("analytics", help="Closed forms for Brownian motion with drift")
        analytics.add_argument("--mu", type=float, default=0.0)
        analytics.add_argument("--nu", type=float, default=1.0)
        analytics.add_argument("--c", type=float, required=True)
        analytics.add_argument("--lambda", dest="lam", type=float)
        analytics.add_argument("--T", dest="T", type=float)
        analytics.add_argument("--k-max", dest="k_max", type=int, default=settings.K_MAX)
        analytics.add_argument("--quad-tol", dest="quad_tol", type=float, default=settings.QUAD_TOL)
        common(analytics)

        mc = commands.add_parser("mc", help="Monte Carlo estimate against its closed form")
        mc.add_argument("--quantity", required=True, choices=[q.value for q in Quantity])
        mc.add_argument("--mu", type=float, default=0.0)
        mc.add_argument("--nu", type=float, default=1.0)
        mc.add_argument("--c", type=float, required=True)
        mc.add_argument("--lambda", dest="lam", type=float)
        mc.add_argument("--T", dest="T", type=float)
        mc.add_argument("--n-paths", dest="n_paths", type=int, default=10_000)
        mc.add_argument("--dt", type=float, default=1e-3)
        mc.add_argument("--horizon", type=float, default=1.0)
        mc.add_argument("--seed", type=int, required=True)
        mc.add_argument("--antithetic", action="store_true")
        mc.add_argument("--bias", action="store_true")
        mc.add_argument("--threads", type=int)
        common(mc)

        verify = commands.add_parser("verify", help="Streaming engine against brute-force enumeration")
        verify.add_argument("--max-n", dest="max_n", type=int, default=6)
        verify.add_argument("--random", type=int, default=0)
        verify.add_argument("--seed", type=int)
        common(verify)

        compete = commands.add_parser("compete", help="A competitor path in the c/2 ball against TV^c")
        compete.add_argument("--in", dest="input_path", required=True)
        compete.add_argument("--c", type=float, required=True)
        compete.add_argument("--competitor", dest="competitor_path", required=True)
        common(compete)
        return parser

    @classmethod
    def of(cls, argv: Sequence[str]) -> "RunConfig":
        """
        Parse and validate a command line.

        Raises:
            ConfigError: On unknown flags, missing required flags or invalid values.
        """
        namespace = vars(cls.parser().parse_args(list(argv)))
        subcommand = cls.SUBCOMMANDS[namespace.pop("subcommand")]
        sub_log_level = namespace.pop("sub_log_level", None)
        if sub_log_level:
            namespace["log_level"] = sub_log_level

        c_grid_text = namespace.pop("c_grid_text", None)
        if c_grid_text is not None:
            namespace["c_grid"] = parse_c_grid(c_grid_text)
        if "quantity" in namespace:
            namespace["quantity"] = Quantity(namespace["quantity"])

        config = cls(subcommand=subcommand, **namespace)
        config.validate()
        return config

    def validate(self) -> None:
        """Check cross-flag constraints argparse cannot express."""
        if self.c is not None and not self.c > 0:
            raise ConfigError(f"--c must be positive, got {self.c!r}")
        if self.subcommand is Subcommand.MC:
            if self.quantity is Quantity.MGF_TV and self.lam is None:
                raise ConfigError("--quantity MgfTV needs --lambda")
            if self.n_paths < settings.MC_MIN_PATHS:
                raise ConfigError(f"--n-paths must be at least {settings.MC_MIN_PATHS}, got {self.n_paths}")
            if self.antithetic and self.quantity.fixed_time:
                raise ConfigError(f"--antithetic pairs killing times and does not apply to {self.quantity.value}")
        if self.subcommand is Subcommand.VERIFY:
            if not 1 <= self.max_n <= settings.ORACLE_SIZE_CAP:
                raise ConfigError(f"--max-n must lie in 1..{settings.ORACLE_SIZE_CAP}, got {self.max_n}")
            if self.random < 0:
                raise ConfigError(f"--random must be nonnegative, got {self.random}")
            if self.random and self.seed is None:
                raise ConfigError("verify --random needs an explicit --seed")
