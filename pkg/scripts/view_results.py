#!/usr/bin/env python3
"""
View Results Script

Display experiment results CSVs in various formats.
"""

import sys
import os
import argparse
from pathlib import Path

# Add parent directory to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from src.import_utils import get_setting
from src.report_formatter import FORMATTERS
from src.results_history import load_results_csv, validate_results


def list_result_files(results_dir: str) -> list:
    """All results CSVs in the directory, newest first."""
    if not os.path.exists(results_dir):
        return []
    files = [f for f in Path(results_dir).glob("*.csv") if not f.stem.endswith("_timing")]
    return sorted(files, key=lambda f: f.stat().st_mtime, reverse=True)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="View experiment results in various formats")
    parser.add_argument("file", nargs="?", default=None, help="Results CSV (defaults to the newest)")
    parser.add_argument(
        "--format",
        choices=sorted(FORMATTERS),
        default="table",
        help="Output format (default: table)"
    )
    parser.add_argument("--method", default=None, help="Only rows for this method")
    parser.add_argument("--dir", default=get_setting("RESULTS_DIR", "data/results"), help="Results directory")
    parser.add_argument("--list", action="store_true", help="List available results files")
    parser.add_argument("--check", action="store_true", help="Validate the file and report issues")
    args = parser.parse_args(argv)

    if args.list:
        files = list_result_files(args.dir)
        if files:
            print("\nAvailable results:")
            print("-" * 50)
            for f in files:
                print(f"  {f.stem} - {f}")
            print()
        else:
            print(f"No results files found in {args.dir}/")
        return 0

    path = args.file
    if path is None:
        files = list_result_files(args.dir)
        if not files:
            print("Error: No results files found")
            print("Run: python scripts/dfl_bench.py run <config> first")
            return 1
        path = str(files[0])

    if args.check:
        issues = validate_results(path)
        for level in ("errors", "warnings"):
            for message in issues[level]:
                print(f"{level[:-1]}: {message}")
        if not issues["errors"] and not issues["warnings"]:
            print(f"{path}: no issues")
        return 1 if issues["errors"] else 0

    try:
        df = load_results_csv(path)
    except (FileNotFoundError, ValueError) as e:
        print(f"Error: {e}")
        return 1
    if args.method:
        df = df[df["method"] == args.method]
    print(FORMATTERS[args.format](df))
    return 0


if __name__ == "__main__":
    sys.exit(main())
