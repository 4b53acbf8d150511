"""
This is the entry point used only for experimenting.
It has an example of how to use the library functions directly, without going through the CLI.

If you are looking for the command line, check truncvar/cli.py (run it with `python -m truncvar`).
If you are looking for the per-subcommand handlers, check truncvar/views.py.
"""

import os
import sys
import traceback

sys.path.append(os.path.abspath(os.path.dirname(__file__)))

from setup.logger import log
from truncvar import CadlagPath, build_adapted, build_f_c, decompose, sup_distance, total_variation, tv_profile_in_c
from truncvar.bm_analytics import BmParams, analytics_report
from truncvar.crossing_engine import variation_profile
from truncvar.exceptions import ParameterDomainError, TruncVarError
from truncvar.monte_carlo import McConfig, Quantity, closed_form, compare, estimate
from truncvar.oracle import brute_tv


def main():
    """
    Main playground for the library.
    By default, it walks one small path through every layer and then compares a closed form with simulation.
    """
    path = CadlagPath.from_values([0.0, 1.0, 0.2, 1.2, -0.4, 0.3])
    c = 0.5
    log.info(f"Path: t={path.times.tolist()} x={path.values.tolist()}, TV={total_variation(path)}")

    # Truncated variations, streamed and brute force
    try:
        utv, dtv, tv = variation_profile(path, c).final
        log.info(f"TV^c={tv} UTV^c={utv} DTV^c={dtv} at c={c}")
        oracle = brute_tv(path, c)
        log.info(f"Brute force TV^c={oracle.value}, witness indices {oracle.witness}")
        log.info(f"Decomposition: {decompose(path, c).branch.name}")
        log.info(f"TV^c over c: {tv_profile_in_c(path, [0.25, 0.5, 1.0, 2.0])}")
    except TruncVarError as e:
        log.warning(f"Truncated variation error: {e}")
    except Exception as e:
        log.error(f"Error computing truncated variation: {e}\n{traceback.format_exc()}")
        return

    # Approximants
    try:
        bundle = build_f_c(path, c)
        log.info(f"f^c={bundle.f_c.values.tolist()} (alpha={bundle.alpha})")
        log.info(f"sup|x - f^c|={sup_distance(path, bundle.f_c)}, TV(f^c)={total_variation(bundle.f_c)}")
        adapted = build_adapted(path, c)
        log.info(f"Adapted approximant: {adapted.x_tilde_c.values.tolist()}, stopping at {adapted.stopping_indices}")
    except TruncVarError as e:
        log.warning(f"Approximant error: {e}")
    except Exception as e:
        log.error(f"Error building approximants: {e}\n{traceback.format_exc()}")

    # Closed forms for Brownian motion with drift
    params = BmParams(mu=0.2, nu=1.0, c=0.5)
    try:
        report = analytics_report(params, lam=0.1, T=1.0)
        log.info(f"E TV^c(W, T_nu)={report['mean_tv']}, Cov={report['covariance_exp']}, pole={report['mgf_pole']}")
        log.info(f"Fixed time T=1: {report['fixed_time']}")
    except ParameterDomainError as e:
        log.warning(f"Parameters outside the domain: {e}")
    except Exception as e:
        log.error(f"Error evaluating closed forms: {e}\n{traceback.format_exc()}")

    # Monte Carlo against the closed form
    try:
        mc = estimate(Quantity.MEAN_TV, params, McConfig(n_paths=1000, dt=1e-3, seed=1))
        comparison = compare(mc, closed_form(Quantity.MEAN_TV, params))
        log.info(f"Monte Carlo: {mc.mean} +/- {mc.std_error}, z={comparison['z_score']}")
    except TruncVarError as e:
        log.warning(f"Monte Carlo error: {e}")
    except Exception as e:
        log.error(f"Error running Monte Carlo: {e}\n{traceback.format_exc()}")


if __name__ == "__main__":
    main()
