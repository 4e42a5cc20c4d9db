"""
Report Formatter Module

Text renderings of results tables and evaluation reports.
"""

import json
import math
from typing import Any, Dict, List

import pandas as pd

try:
    from .results_history import method_medians
except ImportError:
    from src.results_history import method_medians


def _fmt(value: Any, spec: str = ".4f") -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "N/A"
    if isinstance(value, float):
        return format(value, spec)
    return str(value)


def format_table(df: pd.DataFrame, title: str = "Experiment Results") -> str:
    """
    One line per repetition.

    Args:
        df: Results table as loaded by results_history.load_results_csv
        title: Header line
    """
    output = []
    output.append("=" * 90)
    output.append(title)
    output.append("=" * 90)
    output.append(f"{'Problem':<16} {'Method':<14} {'Rep':>4} {'Regret':>10} {'U-Regret':>10} {'MSE':>10} {'Epoch s':>9}  Status")
    output.append("-" * 90)
    for _, row in df.iterrows():
        output.append(
            f"{_fmt(row['problem']):<16} {_fmt(row['method']):<14} {int(row['repetition']):>4} "
            f"{_fmt(row['normalized_regret']):>10} {_fmt(row['normalized_unambiguous_regret']):>10} "
            f"{_fmt(row['mse']):>10} {_fmt(row['epoch_time'], '.3f'):>9}  {row['status']}"
        )
    output.append("=" * 90)
    return "\n".join(output)


def format_summary(df: pd.DataFrame) -> str:
    """Median normalized regret per method."""
    output = ["", f"Results summary ({len(df)} rows)", ""]
    for _, row in method_medians(df).iterrows():
        label = row["method"]
        if row["phi1"] > 0 or row["phi2"] > 0:
            label += f" (phi1={_fmt(row['phi1'], 'g')}, phi2={_fmt(row['phi2'], 'g')})"
        output.append(f"   {row['problem']}: {label}: median regret {_fmt(row['normalized_regret'])} over {row['runs']} run(s)")
    failed = int((df["status"] != "ok").sum())
    if failed:
        output.append(f"   {failed} failed repetition(s)")
    output.append("")
    return "\n".join(output)


def format_tradeoff(df: pd.DataFrame) -> str:
    """Prediction error against decision quality against training time, medians per method."""
    medians = method_medians(df)
    output = []
    output.append("=" * 78)
    output.append(f"{'Problem':<16} {'Method':<14} {'phi2':>7} {'MSE':>10} {'Regret':>10} {'Epoch s':>9} {'Runs':>5}")
    output.append("-" * 78)
    for _, row in medians.sort_values(["problem", "normalized_regret"]).iterrows():
        output.append(
            f"{row['problem']:<16} {row['method']:<14} {_fmt(row['phi2'], 'g'):>7} {_fmt(row['mse']):>10} "
            f"{_fmt(row['normalized_regret']):>10} {_fmt(row['epoch_time'], '.3f'):>9} {int(row['runs']):>5}"
        )
    output.append("=" * 78)
    return "\n".join(output)


def format_json(df: pd.DataFrame, indent: int = 2) -> str:
    records: List[Dict[str, Any]] = json.loads(df.to_json(orient="records"))
    return json.dumps(records, indent=indent, ensure_ascii=False)


def format_csv(df: pd.DataFrame) -> str:
    return df.to_csv(index=False)


FORMATTERS = {
    "table": format_table,
    "summary": format_summary,
    "tradeoff": format_tradeoff,
    "json": format_json,
    "csv": format_csv,
}
