"""
Results History Module

Load, validate and append experiment results CSVs. The column set is fixed
and versioned; plotting and viewer scripts rely on it.
"""

from __future__ import annotations

import os
import warnings
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Any

import pandas as pd

RESULTS_SCHEMA_VERSION = 2

RESULTS_COLUMNS = (
    "schema_version",
    "config_name",
    "config_fingerprint",
    "problem",
    "method",
    "repetition",
    "seed",
    "n_train",
    "n_test",
    "deg",
    "noise_width",
    "phi1",
    "phi2",
    "normalized_regret",
    "normalized_unambiguous_regret",
    "mse",
    "solution_accuracy",
    "unambiguous_fallbacks",
    "rounded_solutions",
    "epoch_time",
    "train_time",
    "eval_time",
    "total_time",
    "status",
    "error",
    "note",
)

METRIC_COLUMNS = ["normalized_regret", "normalized_unambiguous_regret", "mse", "solution_accuracy"]
TIMING_COLUMNS = ["epoch_time", "train_time", "eval_time", "total_time"]
NUMERIC_COLUMNS = (
    ["repetition", "seed", "n_train", "n_test", "deg", "noise_width", "phi1", "phi2"]
    + METRIC_COLUMNS + ["unambiguous_fallbacks"] + TIMING_COLUMNS
)
_FLAGS = {True: True, False: False, "True": True, "False": False, "true": True, "false": False}


def _coerce_numeric(df: pd.DataFrame, columns: List[str]) -> pd.DataFrame:
    """Convert columns to numeric, coercing errors to NaN."""
    for col in columns:
        df[col] = pd.to_numeric(df[col], errors="coerce")
    return df


def load_results_csv(csv_path: str) -> pd.DataFrame:
    """
    Load a results CSV and check its column set.

    Raises:
        FileNotFoundError: path does not exist
        ValueError: missing columns or another schema version
    """
    if not os.path.exists(csv_path):
        raise FileNotFoundError(f"Results CSV not found: {csv_path}")

    df = pd.read_csv(csv_path, keep_default_na=True)
    missing = [c for c in RESULTS_COLUMNS if c not in df.columns]
    if missing:
        raise ValueError(f"Missing required columns in results CSV: {missing}")
    versions = set(pd.to_numeric(df["schema_version"], errors="coerce").dropna().astype(int))
    if versions - {RESULTS_SCHEMA_VERSION}:
        raise ValueError(f"Unsupported results schema version(s): {sorted(versions)}")

    df = _coerce_numeric(df, NUMERIC_COLUMNS)
    # unknown flag text stays as-is for validate_results to report
    df["rounded_solutions"] = df["rounded_solutions"].map(lambda v: _FLAGS.get(v, v))
    return df[list(RESULTS_COLUMNS)].reset_index(drop=True)


def validate_results(csv_path: str) -> Dict[str, List[str]]:
    """
    Return {"errors": [...], "warnings": [...]} for a results CSV.
    """
    issues: Dict[str, List[str]] = {"errors": [], "warnings": []}
    try:
        df = load_results_csv(csv_path)
    except Exception as exc:  # pylint: disable=broad-except
        issues["errors"].append(str(exc))
        return issues

    ok = df["status"] == "ok"
    failed = df.index[~ok].tolist()
    if failed:
        issues["warnings"].append(f"{len(failed)} failed repetition(s) at rows: {failed[:10]}")
    negative = df.index[ok & (df["normalized_regret"] < -1e-9)].tolist()
    if negative:
        issues["errors"].append(f"negative normalized regret at rows: {negative}")
    missing = df.index[ok & df["normalized_regret"].isna()].tolist()
    if missing:
        issues["warnings"].append(f"normalized_regret missing at rows: {missing}")
    fallbacks = df["unambiguous_fallbacks"]
    bad_counts = df.index[ok & fallbacks.notna() & ((fallbacks < 0) | (fallbacks % 1 != 0))].tolist()
    if bad_counts:
        issues["errors"].append(f"unambiguous_fallbacks must be a nonnegative count at rows: {bad_counts}")
    fell_back = df.index[ok & (fallbacks > 0)].tolist()
    if fell_back:
        issues["warnings"].append(f"unambiguous regret fell back to plain regret at rows: {fell_back}")
    flags = df["rounded_solutions"]
    bad_flags = df.index[ok & flags.notna() & ~flags.isin([True, False])].tolist()
    if bad_flags:
        issues["errors"].append(f"rounded_solutions must be true or false at rows: {bad_flags}")
    for col in TIMING_COLUMNS:
        negative_time = df.index[ok & (df[col] < 0)].tolist()
        if negative_time:
            issues["errors"].append(f"negative {col} at rows: {negative_time}")
    return issues


def append_results(csv_path: str, rows: Iterable[Mapping[str, Any]]) -> pd.DataFrame:
    """
    Append rows (missing columns become empty) and rewrite the CSV.

    Returns:
        The full table after appending
    """
    new_df = pd.DataFrame([{col: row.get(col) for col in RESULTS_COLUMNS} for row in rows],
                          columns=list(RESULTS_COLUMNS))
    new_df["schema_version"] = RESULTS_SCHEMA_VERSION
    if os.path.exists(csv_path):
        df = load_results_csv(csv_path)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", FutureWarning)
            df = pd.concat([df, new_df], ignore_index=True, sort=False)
    else:
        df = new_df
    Path(csv_path).parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(csv_path, index=False)
    return df


def method_medians(df: pd.DataFrame) -> pd.DataFrame:
    """Per (problem, method, phi1, phi2) medians of metrics and epoch time over successful rows."""
    ok = df[df["status"] == "ok"]
    keys = ["problem", "method", "phi1", "phi2"]
    cols = METRIC_COLUMNS + ["epoch_time"]
    out = ok.groupby(keys, dropna=False)[cols].median().reset_index()
    out["runs"] = ok.groupby(keys, dropna=False).size().values
    return out
