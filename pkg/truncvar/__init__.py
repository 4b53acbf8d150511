"""
truncvar: truncated variation of sampled paths, its optimal approximants, and closed forms
for Brownian motion with drift checked against Monte Carlo.
"""

from .approximants import build_adapted, build_f_c, competitor_check
from .crossing_engine import decompose, downward_tv, truncated_variation, tv_profile_in_c, upward_tv, variation_profile
from .path_core import CadlagPath, TruncationLevel, oscillation, sup_distance, total_variation

__all__ = [
    "CadlagPath",
    "TruncationLevel",
    "build_adapted",
    "build_f_c",
    "competitor_check",
    "decompose",
    "downward_tv",
    "oscillation",
    "sup_distance",
    "total_variation",
    "truncated_variation",
    "tv_profile_in_c",
    "upward_tv",
    "variation_profile",
]
