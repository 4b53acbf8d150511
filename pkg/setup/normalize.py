import io

import pandas as pd
from pandas import DataFrame
from typing import List

from setup.logger import log

# Canonical column names of a sampled path table
TIME_COLUMN = "t"
VALUE_COLUMN = "value"
LINE_COLUMN = "line"


class TableFormatError(ValueError):
    """Raised when a raw table cannot be normalized, with the offending 1-based line numbers."""

    def __init__(self, message: str, line_numbers: List[int]):
        super().__init__(message)
        self.line_numbers = line_numbers


def read_raw_table(csv_path: str) -> DataFrame:
    """
    Read a two-column CSV file as strings, without assuming a header.

    Blank lines are dropped before parsing and every row is indexed by its 0-based file line,
    so line numbers in error reports match the file.

    Args:
        csv_path: Path to the CSV file.

    Returns:
        A DataFrame of strings with one row per non-blank line.
    """
    with open(csv_path) as f:
        lines = f.read().splitlines()
    kept = [i for i, line in enumerate(lines) if line.strip()]
    if not kept:
        raise TableFormatError(f"{csv_path} is empty", [])
    try:
        raw = pd.read_csv(
            io.StringIO("\n".join(lines[i] for i in kept)), header=None, dtype=str, keep_default_na=False
        )
    except pd.errors.ParserError as e:
        # pandas counts lines of the blank-free text, e.g. "Expected 2 fields in line 4, saw 3"
        raise TableFormatError(f"{csv_path}: {e}", [])
    raw.index = kept
    log.debug(f"Raw table imported from {csv_path}: {raw.shape}")
    return raw


def looks_like_header(row: pd.Series) -> bool:
    """A first row is a header when none of its cells parses as a number."""
    return pd.to_numeric(row, errors="coerce").isna().all()


def normalize_path_table(raw: DataFrame) -> DataFrame:
    """
    Normalize a raw string table into the canonical `t,value` schema.

    Steps:
    1. Check the table has exactly two columns
    2. Drop an optional header row
    3. Convert both columns to float64, recording the file line of every cell that fails

    Args:
        raw: Table as returned by read_raw_table (no header assumed, all strings, indexed by
            0-based file line).

    Returns:
        DataFrame with float columns `t`, `value` and the integer source `line` of each row.

    Raises:
        TableFormatError: If the shape is wrong or some cells are not numbers.
    """
    if raw.shape[1] != 2:
        raise TableFormatError(f"Expected 2 columns (t,value), found {raw.shape[1]}", [])

    table = raw.copy()
    table.columns = [TIME_COLUMN, VALUE_COLUMN]
    # The index holds the 0-based file line of each row
    table[LINE_COLUMN] = table.index + 1

    if len(table) > 0 and looks_like_header(table.iloc[0][[TIME_COLUMN, VALUE_COLUMN]]):
        log.debug(f"Header detected: {list(table.iloc[0][[TIME_COLUMN, VALUE_COLUMN]])}")
        table = table.iloc[1:].copy()

    bad_lines: List[int] = []
    for column in (TIME_COLUMN, VALUE_COLUMN):
        stripped = table[column].str.strip()
        converted = pd.to_numeric(stripped, errors="coerce")
        # A literal "nan" converts to NaN as well and is rejected with the same report
        failed = converted.isna()
        bad_lines.extend(table.loc[failed, LINE_COLUMN].tolist())

    if bad_lines:
        bad_lines = sorted(set(bad_lines))
        raise TableFormatError(f"Non-numeric values on line(s) {', '.join(map(str, bad_lines))}", bad_lines)

    # Python's float() parser is correctly rounded, so 17-digit output reads back unchanged
    for column in (TIME_COLUMN, VALUE_COLUMN):
        table[column] = table[column].str.strip().astype("float64")

    return table.reset_index(drop=True)
