"""
Adaptive Simpson integration for the fixed-time series of bm_analytics.

The integrands there vanish to all orders at t = 0 and are smooth on (0, T], so plain
recursive Simpson on a few initial panels is accurate without special handling.
"""

import math
from typing import Callable, Tuple

from . import settings
from .exceptions import ValidationError


def _simpson(fa: float, fm: float, fb: float, h: float) -> float:
    """h/3 * (f(a) + 4 f(m) + f(b)) on a panel of half-width h."""
    return h / 3.0 * (fa + 4.0 * fm + fb)


def integrate_adaptive_simpson(
    f: Callable[[float], float],
    a: float,
    b: float,
    tol: float = settings.QUAD_TOL,
    panels: int = settings.QUAD_PANELS,
    max_depth: int = settings.QUAD_MAX_DEPTH,
) -> Tuple[float, float]:
    """
    Integrate f over [a, b] by adaptive Simpson's rule.

    The interval is first split into `panels` equal panels; each panel is refined until the
    Richardson error estimate is below max(tol, tol * |panel estimate|) scaled to its width.

    Args:
        f: Function to integrate, finite on [a, b]
        a: Lower bound
        b: Upper bound
        tol: Absolute and relative error tolerance
        panels: Number of initial panels
        max_depth: Maximum recursion depth per panel

    Returns:
        (integral, error_estimate)

    Raises:
        ValidationError: If the tolerance or the panel count is not positive.
    """
    if tol <= 0 or panels < 1:
        raise ValidationError(f"Quadrature needs tol > 0 and panels >= 1, got tol={tol!r}, panels={panels}")
    if a == b:
        return 0.0, 0.0
    if a > b:
        result, error = integrate_adaptive_simpson(f, b, a, tol, panels, max_depth)
        return -result, error

    def _adaptive(lo: float, hi: float, flo: float, fmid: float, fhi: float, whole: float, depth: int, eps: float):
        mid = (lo + hi) / 2.0
        h = (hi - lo) / 2.0
        f_left = f((lo + mid) / 2.0)
        f_right = f((mid + hi) / 2.0)

        left = _simpson(flo, f_left, fmid, h / 2.0)
        right = _simpson(fmid, f_right, fhi, h / 2.0)
        combined = left + right
        error_estimate = (combined - whole) / 15.0

        if depth >= max_depth or abs(error_estimate) <= max(eps, tol * abs(combined)):
            return combined + error_estimate, abs(error_estimate)

        left_result, left_error = _adaptive(lo, mid, flo, f_left, fmid, left, depth + 1, eps / 2.0)
        right_result, right_error = _adaptive(mid, hi, fmid, f_right, fhi, right, depth + 1, eps / 2.0)
        return left_result + right_result, left_error + right_error

    width = (b - a) / panels
    results = []
    errors = []
    for k in range(panels):
        lo = a + k * width
        hi = b if k == panels - 1 else lo + width
        flo, fmid, fhi = f(lo), f((lo + hi) / 2.0), f(hi)
        whole = _simpson(flo, fmid, fhi, (hi - lo) / 2.0)
        result, error = _adaptive(lo, hi, flo, fmid, fhi, whole, 0, tol / panels)
        results.append(result)
        errors.append(error)

    return math.fsum(results), math.fsum(errors)
