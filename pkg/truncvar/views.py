"""
Handlers of the command-line subcommands.

Each handler takes a validated RunConfig and returns a Response holding the text for stdout.
The computations are located in the library modules, which these call.
"""

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict

import pandas as pd

from setup.logger import log

from . import approximants, bm_analytics, crossing_engine, monte_carlo, oracle
from .bm_analytics import BmParams
from .exceptions import VerificationFailure
from .path_core import read_path_csv, sup_distance, total_variation, write_path_csv
from .run_config import RunConfig, Subcommand


@dataclass(frozen=True)
class Response:
    body: str


def _finite_or_none(value: Any) -> Any:
    """Replace NaN and infinities, recursively, so the payload is strict JSON."""
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {key: _finite_or_none(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_finite_or_none(item) for item in value]
    return value


def to_json(payload: dict) -> str:
    """Serialize with a fixed key order; floats use the shortest repr that round-trips."""
    return json.dumps(_finite_or_none(payload), allow_nan=False) + "\n"


def tv_view(config: RunConfig) -> Response:
    """Truncated variations of the input path. Flags: --in, --c, --profile."""
    path = read_path_csv(config.input_path)
    profile = crossing_engine.variation_profile(path, config.c)
    utv, dtv, tv = profile.final
    payload = {"tv": tv, "utv": utv, "dtv": dtv}
    if config.with_profile:
        payload["profile"] = {
            "t": profile.times.tolist(),
            "utv": profile.utv.tolist(),
            "dtv": profile.dtv.tolist(),
            "tv": profile.tv.tolist(),
        }
    return Response(to_json(payload))


def approx_view(config: RunConfig) -> Response:
    """
    Write f^c, f^{i,c} and X̃^c next to each other as CSV paths and summarize them.

    Files are {prefix}.f_c.csv, {prefix}.f_ic.csv and {prefix}.x_tilde_c.csv, the prefix
    defaulting to the input path without its extension.
    """
    path = read_path_csv(config.input_path)
    bundle = approximants.build_f_c(path, config.c)
    adapted = approximants.build_adapted(path, config.c)
    tv_c = crossing_engine.truncated_variation(path, config.c)

    prefix = config.csv_prefix or str(Path(config.input_path).with_suffix(""))
    files = {
        "f_c": f"{prefix}.f_c.csv",
        "f_ic": f"{prefix}.f_ic.csv",
        "x_tilde_c": f"{prefix}.x_tilde_c.csv",
    }
    write_path_csv(bundle.f_c, files["f_c"])
    write_path_csv(bundle.f_ic, files["f_ic"])
    write_path_csv(adapted.x_tilde_c, files["x_tilde_c"])
    log.info(f"Approximants written with prefix {prefix}")

    payload = {
        "c": config.c,
        "alpha": bundle.alpha,
        "alpha_0": bundle.alpha_0,
        "branch": adapted.branch.name,
        "tv_c": tv_c,
        "tv_f_c": total_variation(bundle.f_c),
        "tv_f_ic": total_variation(bundle.f_ic),
        "tv_x_tilde_c": total_variation(adapted.x_tilde_c),
        "sup_distance_f_c": sup_distance(path, bundle.f_c),
        "sup_distance_x_tilde_c": sup_distance(path, adapted.x_tilde_c),
        "increment_deviation_f_ic": approximants.increment_deviation(path, bundle.f_ic),
        "stopping_indices": list(adapted.stopping_indices),
        "files": files,
    }
    return Response(to_json(payload))


def profile_view(config: RunConfig) -> Response:
    """CSV (c, tv) over the --c-grid levels, ready for plotting."""
    path = read_path_csv(config.input_path)
    rows = crossing_engine.tv_profile_in_c(path, config.c_grid)
    frame = pd.DataFrame(rows, columns=["c", "tv"])
    return Response(frame.to_csv(index=False, float_format="%.17g", lineterminator="\n"))


def analytics_view(config: RunConfig) -> Response:
    params = BmParams(config.mu, config.nu, config.c)
    report = bm_analytics.analytics_report(params, config.lam, config.T, config.k_max, config.quad_tol)
    return Response(to_json(report))


def mc_view(config: RunConfig) -> Response:
    """
    Monte Carlo estimate of --quantity with its z-score against the closed form.

    --bias adds the Richardson margin (a second run at dt/4 on the same paths).
    """
    params = BmParams(config.mu, config.nu, config.c)
    mc_config = monte_carlo.McConfig(
        n_paths=config.n_paths,
        dt=config.dt,
        seed=config.seed,
        horizon=config.horizon,
        antithetic=config.antithetic,
        strict=config.strict,
        threads=config.threads,
    )
    quantity = config.quantity
    if config.bias:
        refinement = monte_carlo.refine_estimates([quantity], params, mc_config, config.lam, config.T)[quantity]
        result, bias = refinement.coarse, refinement.margin
    else:
        result, bias = monte_carlo.estimate(quantity, params, mc_config, lam=config.lam, T=config.T), 0.0
    closed = monte_carlo.closed_form(quantity, params, result.lam, result.T)
    comparison = monte_carlo.compare(result, closed, bias)

    payload = {
        "quantity": quantity.value,
        "params": {"mu": params.mu, "nu": params.nu, "c": params.c},
        "config": {
            "n_paths": mc_config.n_paths,
            "dt": mc_config.dt,
            "horizon": mc_config.horizon,
            "seed": mc_config.seed,
            "antithetic": mc_config.antithetic,
            "T": result.T,
            "lambda": result.lam,
        },
        "estimate": result.mean,
        "se": result.std_error,
        "closed_form": closed,
        "bias": comparison["bias"],
        "z_score": comparison["z_score"],
        "within_3se": comparison["within_3se"],
    }
    return Response(to_json(payload))


def verify_view(config: RunConfig) -> Response:
    """
    Oracle equivalence table; prints it and fails with exit code 2 when a row fails.

    Raises:
        VerificationFailure: Carrying the table, which the caller prints before failing.
    """
    table = oracle.oracle_equivalence(max_n=config.max_n, random_paths=config.random, seed=config.seed)
    text = table.to_string(index=False) + "\n"
    failing = int((~table["passed"]).sum())
    if failing:
        raise VerificationFailure(f"{failing} verification row(s) failed", report=text)
    return Response(text)


def compete_view(config: RunConfig) -> Response:
    """
    TV(g,[a;s]) − TV^c(f,[a;s]) at every sample time of f for the --competitor path g.

    A competitor outside the c/2 ball fails with BallViolationError.
    """
    path = read_path_csv(config.input_path)
    competitor = read_path_csv(config.competitor_path)
    report = approximants.competitor_check(path, config.c, competitor)
    payload = {
        "c": config.c,
        "tv_c": crossing_engine.truncated_variation(path, config.c),
        "tv_competitor": total_variation(competitor),
        "sup_distance": sup_distance(path, competitor),
        **report.to_dict(),
    }
    return Response(to_json(payload))


VIEWS: Dict[Subcommand, Callable[[RunConfig], Response]] = {
    Subcommand.TV: tv_view,
    Subcommand.APPROX: approx_view,
    Subcommand.PROFILE: profile_view,
    Subcommand.ANALYTICS: analytics_view,
    Subcommand.MC: mc_view,
    Subcommand.VERIFY: verify_view,
    Subcommand.COMPETE: compete_view,
}
