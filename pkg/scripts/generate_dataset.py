#!/usr/bin/env python3
"""
Generate Dataset Script

Generate a synthetic problem dataset, solve every instance and save it as a
.dfld container (optionally with a CSV export).

Usage:
    python scripts/generate_dataset.py shortest_path --grid 5 5 -n 1000 --deg 4 --noise 0.5
    python scripts/generate_dataset.py knapsack --items 32 --resources 2 -n 100 --csv
    python scripts/generate_dataset.py tsp --nodes 10 -p 10 -n 100
"""

import sys
import os
import argparse
import logging
from pathlib import Path

# Add parent directory to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from src.data_generator import GenSpec, gen_knapsack, gen_shortest_path, gen_tsp
from src.decision_dataset import build_dataset, export_csv, save
from src.import_utils import get_setting
from src.knapsack_solver import KnapsackOracle, KnapsackSpec
from src.shortest_path_solver import GridSpec, ShortestPathOracle
from src.solve_pool import SolvePool
from src.tsp_solver import TspOracle, TspSpec

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Generate and solve a synthetic dataset")
    parser.add_argument("problem", choices=["shortest_path", "knapsack", "tsp"])
    parser.add_argument("-n", type=int, default=1000, help="Number of samples")
    parser.add_argument("-p", type=int, default=5, help="Feature dimension")
    parser.add_argument("--deg", type=int, default=1, help="Polynomial degree")
    parser.add_argument("--noise", type=float, default=0.0, help="Noise half-width")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--grid", type=int, nargs=2, default=[5, 5], metavar=("H", "W"))
    parser.add_argument("--items", type=int, default=32)
    parser.add_argument("--resources", type=int, default=2)
    parser.add_argument("--capacity", type=float, default=20.0)
    parser.add_argument("--nodes", type=int, default=10)
    parser.add_argument("--workers", type=int, default=None)
    parser.add_argument("--out", default=None, help="Output .dfld path")
    parser.add_argument("--csv", action="store_true", help="Also export a CSV next to the container")
    args = parser.parse_args(argv)

    print("=" * 60)
    print(f"Dataset Generator - {args.problem}")
    print("=" * 60)

    try:
        spec = GenSpec(
            n=args.n, p=args.p, deg=args.deg, noise_width=args.noise, seed=args.seed,
            grid=tuple(args.grid), num_items=args.items, num_resources=args.resources, num_nodes=args.nodes,
        )
        if args.problem == "shortest_path":
            data = gen_shortest_path(spec)
            oracle = ShortestPathOracle(GridSpec(*args.grid))
        elif args.problem == "knapsack":
            data = gen_knapsack(spec)
            capacities = [args.capacity] * args.resources
            oracle = KnapsackOracle(KnapsackSpec(data.weights, capacities))
        else:
            data = gen_tsp(spec)
            oracle = TspOracle(TspSpec(args.nodes))

        with SolvePool(oracle, args.workers) as pool:
            ds = build_dataset(oracle, data.features, data.costs, pool, seed=args.seed)

        out = Path(args.out or os.path.join(
            get_setting("DATASET_DIR", "data/datasets"),
            f"{args.problem}_n{args.n}_p{args.p}_deg{args.deg}_seed{args.seed}.dfld",
        ))
        save(ds, out)
        print(f"Dataset: {out}")
        if args.csv:
            csv_path = export_csv(ds, out.with_suffix(".csv"))
            print(f"CSV export: {csv_path}")
    except Exception as e:
        logger.error(f"Error during generation: {e}")
        import traceback
        traceback.print_exc()
        return 2

    print("=" * 60)
    return 0


if __name__ == "__main__":
    sys.exit(main())
