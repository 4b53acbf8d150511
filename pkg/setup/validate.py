import numpy as np
import pandas as pd
from typing import Dict, List

from setup.logger import log
from setup.normalize import LINE_COLUMN, TIME_COLUMN, VALUE_COLUMN


def validate_path_table(table: pd.DataFrame) -> Dict[str, List[int]]:
    """
    Validate a normalized path table.

    Checks:
        empty: the table has no rows
        non_finite: NaN or infinite time or value
        duplicate_t: a timestamp equal to the previous one
        non_increasing_t: a timestamp smaller than the previous one

    Args:
        table: DataFrame produced by setup.normalize.normalize_path_table

    Returns:
        Dictionary mapping each issue to the file lines where it occurs (empty lists when clean)
    """
    issues: Dict[str, List[int]] = {"empty": [], "non_finite": [], "duplicate_t": [], "non_increasing_t": []}

    if len(table) == 0:
        issues["empty"] = [0]
        log.warning("Path table has no rows.")
        return issues

    lines = table[LINE_COLUMN].to_numpy()
    times = table[TIME_COLUMN].to_numpy(dtype=float)
    values = table[VALUE_COLUMN].to_numpy(dtype=float)

    # Check for NaN / infinite entries
    non_finite = ~(np.isfinite(times) & np.isfinite(values))
    issues["non_finite"] = lines[non_finite].tolist()
    if issues["non_finite"]:
        log.warning(f"Found {len(issues['non_finite'])} rows with non-finite entries.")

    # Check ordering of timestamps
    steps = np.diff(times)
    issues["duplicate_t"] = lines[1:][steps == 0].tolist()
    issues["non_increasing_t"] = lines[1:][steps < 0].tolist()

    if issues["duplicate_t"]:
        log.warning(f"Found {len(issues['duplicate_t'])} duplicate timestamps.")
    if issues["non_increasing_t"]:
        log.warning(f"Found {len(issues['non_increasing_t'])} decreasing timestamps.")

    return issues


def count_issues(issues: Dict[str, List[int]]) -> int:
    """Total number of offending rows across all checks."""
    return sum(len(lines) for lines in issues.values())
