"""
Experiment Runner Module

Executes a validated ExperimentConfig: for every repetition it derives a
seed, generates train/validation/test data, builds the datasets, trains and
evaluates every configured method and appends one results row per method
(and per regularization weight when a phi sweep is configured).

Metric columns are a pure function of (config, base seed); the worker count
only changes timing columns.
"""

from __future__ import annotations

import hashlib
import logging
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

try:
    from .data_generator import GeneratedData, GenSpec, gen_knapsack, gen_shortest_path, gen_tsp
    from .decision_dataset import DecisionDataset, build_dataset
    from .decision_losses import DownstreamLoss, PerturbationConfig
    from .decision_metrics import EvaluationReport, evaluate
    from .experiment_config import ExperimentConfig, MethodSpec
    from .import_utils import get_setting
    from .knapsack_solver import KnapsackOracle, KnapsackSpec
    from .linear_predictor import LinearPredictor, RegularizationConfig
    from .opt_oracle import OptimizationOracle
    from .results_history import append_results
    from .shortest_path_solver import GridSpec, ShortestPathOracle
    from .solve_pool import SolvePool
    from .trainer import Hyperparams, TrainingMethod, train
    from .tsp_solver import TspFormulation, TspOracle, TspSpec
    from .two_stage import fit_two_stage
except ImportError:
    from src.data_generator import GeneratedData, GenSpec, gen_knapsack, gen_shortest_path, gen_tsp
    from src.decision_dataset import DecisionDataset, build_dataset
    from src.decision_losses import DownstreamLoss, PerturbationConfig
    from src.decision_metrics import EvaluationReport, evaluate
    from src.experiment_config import ExperimentConfig, MethodSpec
    from src.import_utils import get_setting
    from src.knapsack_solver import KnapsackOracle, KnapsackSpec
    from src.linear_predictor import LinearPredictor, RegularizationConfig
    from src.opt_oracle import OptimizationOracle
    from src.results_history import append_results
    from src.shortest_path_solver import GridSpec, ShortestPathOracle
    from src.solve_pool import SolvePool
    from src.trainer import Hyperparams, TrainingMethod, train
    from src.tsp_solver import TspFormulation, TspOracle, TspSpec
    from src.two_stage import fit_two_stage

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG_ERROR = 1
EXIT_RUNTIME_FAILURE = 2

TWO_STAGE_NOTE = "two-stage baseline uses scikit-learn regressors in place of automated model search"
SGD_METHODS = {
    "spo+": TrainingMethod.SPO_PLUS,
    "dbb": TrainingMethod.DBB,
    "pfyl": TrainingMethod.PFYL,
    "dpo": TrainingMethod.DPO,
    "2s-sgd": TrainingMethod.TWO_STAGE_MSE,
}


def _stable_hash(*parts: Any) -> int:
    text = ":".join(str(p) for p in parts)
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "little") & (2 ** 63 - 1)


def repetition_seed(base_seed: int, repetition: int) -> int:
    """Seed of repetition r, hash(base_seed, r)."""
    return _stable_hash(int(base_seed), int(repetition))


def method_rngs(seed: int, method: str, phi: float) -> Tuple[np.random.Generator, np.random.Generator]:
    """(init, training) generators for one method run."""
    init, training = np.random.SeedSequence([seed, _stable_hash(method, phi)]).spawn(2)
    return np.random.default_rng(init), np.random.default_rng(training)


@dataclass
class Split:
    oracle: OptimizationOracle
    train: DecisionDataset
    test: DecisionDataset
    val: Optional[DecisionDataset] = None


def generate_data(cfg: ExperimentConfig, n: int, seed: int) -> GeneratedData:
    spec = GenSpec(
        n=n, p=cfg.p, deg=cfg.deg, noise_width=cfg.noise_width, seed=seed,
        grid=cfg.grid, num_items=cfg.num_items, num_resources=cfg.num_resources, num_nodes=cfg.num_nodes,
    )
    if cfg.problem == "shortest_path":
        return gen_shortest_path(spec)
    if cfg.problem == "knapsack":
        return gen_knapsack(spec)
    return gen_tsp(spec)


def build_oracle(cfg: ExperimentConfig, data: GeneratedData) -> OptimizationOracle:
    if cfg.problem == "shortest_path":
        return ShortestPathOracle(GridSpec(*cfg.grid))
    if cfg.problem == "knapsack":
        capacities = np.full(cfg.num_resources, float(cfg.capacity))
        return KnapsackOracle(KnapsackSpec(data.weights, capacities))
    return TspOracle(TspSpec(cfg.num_nodes), TspFormulation(cfg.tsp_formulation))


def prepare_split(cfg: ExperimentConfig, seed: int, pool_workers: int, n_test: Optional[int] = None) -> Split:
    """Generate n_train + n_val + n_test rows from one seed and solve them."""
    n_test = cfg.n_test if n_test is None else n_test
    total = cfg.n_train + cfg.n_val + n_test
    data = generate_data(cfg, total, seed)
    oracle = build_oracle(cfg, data)
    with SolvePool(oracle, pool_workers) as pool:
        full = build_dataset(oracle, data.features, data.costs, pool, seed=seed)
    rows = np.arange(total)
    train_ds = full.subset(rows[:cfg.n_train])
    val_ds = full.subset(rows[cfg.n_train:cfg.n_train + cfg.n_val]) if cfg.n_val else None
    test_ds = full.subset(rows[cfg.n_train + cfg.n_val:])
    return Split(oracle=oracle, train=train_ds, test=test_ds, val=val_ds)


def hyperparams_for(cfg: ExperimentConfig, spec: MethodSpec, phi: Optional[float]) -> Hyperparams:
    reg = RegularizationConfig()
    if spec.regularizer == "l1":
        reg = RegularizationConfig(l1=phi if phi is not None else cfg.phi1)
    elif spec.regularizer == "l2":
        reg = RegularizationConfig(l2=phi if phi is not None else cfg.phi2)
    return Hyperparams(
        lr=cfg.lr,
        momentum=cfg.momentum,
        batch_size=cfg.batch_size,
        lambd=cfg.lambd,
        perturbation=PerturbationConfig(n_samples=cfg.n_samples, sigma=cfg.sigma),
        regularization=reg,
        downstream=DownstreamLoss(cfg.downstream) if cfg.downstream else None,
        select_best=cfg.select_best,
    )


def method_runs(cfg: ExperimentConfig) -> List[Tuple[MethodSpec, Optional[float]]]:
    """(method, phi) pairs; regularized methods repeat once per swept phi."""
    runs = []
    for spec in cfg.method_specs:
        if spec.regularizer and cfg.phi_sweep:
            runs.extend((spec, phi) for phi in cfg.phi_sweep)
        else:
            runs.append((spec, None))
    return runs


@dataclass
class MethodOutcome:
    report: EvaluationReport
    epoch_time: float
    train_time: float
    hyperparams: Optional[Hyperparams] = None


class PoolCache:
    """One SolvePool per oracle, closed together."""

    def __init__(self, workers: int):
        self.workers = workers
        self._pools: Dict[str, SolvePool] = {}

    def get(self, oracle: OptimizationOracle) -> Optional[SolvePool]:
        if self.workers <= 1:
            return None
        key = oracle.fingerprint()
        if key not in self._pools:
            self._pools[key] = SolvePool(oracle, self.workers)
        return self._pools[key]

    def close(self) -> None:
        for pool in self._pools.values():
            pool.close()
        self._pools.clear()

    def __enter__(self) -> "PoolCache":
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        self.close()


def run_method(
    cfg: ExperimentConfig,
    spec: MethodSpec,
    phi: Optional[float],
    split: Split,
    seed: int,
    pools: PoolCache,
    epochs: Optional[int] = None,
) -> MethodOutcome:
    """Train one method on the split and evaluate it on the test set."""
    epochs = cfg.epochs if epochs is None else epochs
    init_rng, train_rng = method_rngs(seed, spec.name, phi if phi is not None else 0.0)
    eval_pool = pools.get(split.oracle)

    if spec.is_two_stage:
        started = time.perf_counter()
        model = fit_two_stage(spec.base.split("-", 1)[1], split.train.features, split.train.costs,
                              seed=int(init_rng.integers(2 ** 31)))
        elapsed = time.perf_counter() - started
        report = evaluate(model, split.oracle, split.test, cfg.unambiguous, eval_pool)
        return MethodOutcome(report=report, epoch_time=elapsed, train_time=elapsed)

    train_oracle = split.oracle.relax() if spec.relaxed else split.oracle
    hp = hyperparams_for(cfg, spec, phi)
    model = LinearPredictor.initialize(split.train.num_feat, split.train.num_cost, init_rng)
    started = time.perf_counter()
    model, trace = train(model, split.train, SGD_METHODS[spec.base], train_oracle, hp, epochs,
                         train_rng, pools.get(train_oracle), split.val)
    elapsed = time.perf_counter() - started
    report = evaluate(model, split.oracle, split.test, cfg.unambiguous, eval_pool)
    return MethodOutcome(report=report, epoch_time=trace.mean_epoch_time, train_time=elapsed, hyperparams=hp)


def _row(cfg: ExperimentConfig, spec: MethodSpec, phi: Optional[float], repetition: int, seed: int) -> Dict[str, Any]:
    phi1 = (phi if phi is not None else cfg.phi1) if spec.regularizer == "l1" else 0.0
    phi2 = (phi if phi is not None else cfg.phi2) if spec.regularizer == "l2" else 0.0
    return {
        "config_name": cfg.name,
        "config_fingerprint": cfg.fingerprint(),
        "problem": cfg.problem,
        "method": spec.name,
        "repetition": repetition,
        "seed": seed,
        "n_train": cfg.n_train,
        "n_test": cfg.n_test,
        "deg": cfg.deg,
        "noise_width": cfg.noise_width,
        "phi1": phi1,
        "phi2": phi2,
        "note": TWO_STAGE_NOTE if spec.is_two_stage else "",
    }


@dataclass
class RunOutcome:
    results_path: Path
    rows: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def failures(self) -> int:
        return sum(1 for r in self.rows if r.get("status") != "ok")

    @property
    def exit_code(self) -> int:
        return EXIT_OK if self.failures == 0 else EXIT_RUNTIME_FAILURE


def run(
    cfg: ExperimentConfig,
    workers: Optional[int] = None,
    out: Optional[str] = None,
    seed: Optional[int] = None,
    append: bool = False,
) -> RunOutcome:
    """
    Run every repetition and write `<out>/<config name>.csv`.

    Args:
        cfg: Validated config
        workers: Overrides cfg.workers
        out: Results directory (RESULTS_DIR setting by default)
        seed: Overrides cfg.seed as the base seed
        append: Keep rows already in the results file
    """
    if seed is not None:
        cfg = replace(cfg, seed=int(seed))
    workers = int(workers or cfg.workers)
    out_dir = Path(out or get_setting("RESULTS_DIR", "data/results"))
    results_path = out_dir / f"{cfg.name}.csv"
    if results_path.exists() and not append:
        results_path.unlink()
    outcome = RunOutcome(results_path=results_path)

    for r in range(cfg.repetitions):
        rep_seed = repetition_seed(cfg.seed, r)
        logger.info(f"repetition {r + 1}/{cfg.repetitions} (seed {rep_seed})")
        rep_started = time.perf_counter()
        rows: List[Dict[str, Any]] = []
        try:
            split = prepare_split(cfg, rep_seed, workers)
        except Exception as e:  # pylint: disable=broad-except
            logger.error(f"repetition {r}: data preparation failed: {e}")
            for spec, phi in method_runs(cfg):
                rows.append({**_row(cfg, spec, phi, r, rep_seed), "status": "failed", "error": str(e)})
            outcome.rows.extend(rows)
            append_results(str(results_path), rows)
            continue

        with PoolCache(workers) as pools:
            for spec, phi in method_runs(cfg):
                row = _row(cfg, spec, phi, r, rep_seed)
                started = time.perf_counter()
                try:
                    result = run_method(cfg, spec, phi, split, rep_seed, pools)
                except Exception as e:  # pylint: disable=broad-except
                    logger.error(f"repetition {r}, {spec.name}: {type(e).__name__}: {e}")
                    row.update(status="failed", error=f"{type(e).__name__}: {e}")
                else:
                    row.update(result.report.to_row())
                    row.update(epoch_time=result.epoch_time, train_time=result.train_time, status="ok", error="")
                    logger.info(f"  {spec.name}: regret={result.report.normalized_regret:.4f} "
                                f"mse={result.report.mse:.4f}")
                row["total_time"] = time.perf_counter() - started
                rows.append(row)
        outcome.rows.extend(rows)
        append_results(str(results_path), rows)
        logger.debug(f"repetition {r} took {time.perf_counter() - rep_started:.1f}s")

    logger.info(f"wrote {len(outcome.rows)} row(s) to {results_path}")
    return outcome


def timing_report(
    cfg: ExperimentConfig,
    worker_counts: Sequence[int] = (1, 2, 4, 8),
    epochs: Optional[int] = None,
    methods: Optional[Iterable[str]] = None,
) -> pd.DataFrame:
    """
    Mean and standard deviation of epoch time per (method, workers).

    Every method trains `cfg.timing_epochs` epochs on the first repetition's
    training data; two-stage regressors report their fit time.
    """
    epochs = cfg.timing_epochs if epochs is None else epochs
    seed = repetition_seed(cfg.seed, 0)
    split = prepare_split(cfg, seed, max(worker_counts), n_test=1)
    wanted = set(methods) if methods else None
    records = []
    for workers in worker_counts:
        with PoolCache(workers) as pools:
            for spec, phi in method_runs(cfg):
                if wanted is not None and spec.name not in wanted:
                    continue
                times = _epoch_times(cfg, spec, phi, split, seed, pools, epochs)
                records.append({
                    "method": spec.name,
                    "phi": phi,
                    "workers": workers,
                    "epochs": len(times),
                    "epoch_time_mean": float(np.mean(times)),
                    "epoch_time_sd": float(np.std(times, ddof=1)) if len(times) > 1 else 0.0,
                })
                logger.info(f"{spec.name} with {workers} worker(s): {records[-1]['epoch_time_mean']:.3f}s/epoch")
    return pd.DataFrame(records, columns=["method", "phi", "workers", "epochs", "epoch_time_mean", "epoch_time_sd"])


def _epoch_times(cfg, spec, phi, split, seed, pools, epochs) -> List[float]:
    if spec.is_two_stage:
        started = time.perf_counter()
        fit_two_stage(spec.base.split("-", 1)[1], split.train.features, split.train.costs, seed=0)
        return [time.perf_counter() - started]
    init_rng, train_rng = method_rngs(seed, spec.name, phi if phi is not None else 0.0)
    train_oracle = split.oracle.relax() if spec.relaxed else split.oracle
    model = LinearPredictor.initialize(split.train.num_feat, split.train.num_cost, init_rng)
    hp = replace(hyperparams_for(cfg, spec, phi), select_best=False)
    _, trace = train(model, split.train, SGD_METHODS[spec.base], train_oracle, hp, epochs,
                     train_rng, pools.get(train_oracle))
    return [rec.wall_time for rec in trace.records]
