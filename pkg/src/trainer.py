"""
Trainer Module

Mini-batch gradient descent for the linear cost predictor:

    predict -> loss forward (oracle solves) -> loss backward
            -> optional prediction regularizer -> backprop -> SGD step

Methods: SPO+, DBB, DPO, PFYL and the two-stage MSE baseline trained by SGD.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

try:
    from .decision_dataset import BatchIterator, DecisionDataset, iterate_batches
    from .decision_losses import (
        DownstreamLoss,
        PerturbationConfig,
        dbb_backward,
        dbb_forward,
        downstream_loss_eval,
        dpo_backward,
        dpo_forward,
        pfyl_loss_and_grad,
        spo_plus_forward,
        spo_plus_grad,
    )
    from .decision_metrics import normalized_regret
    from .errors import DimensionMismatchError, FingerprintMismatchError, UnsupportedCapabilityError
    from .import_utils import get_setting
    from .linear_predictor import (
        LinearPredictor,
        RegularizationConfig,
        SgdState,
        backprop,
        predict,
        regularization_penalty,
        sgd_step,
    )
    from .opt_oracle import OptimizationOracle, RelaxedOracle
    from .solve_pool import SolvePool
except ImportError:
    from src.decision_dataset import BatchIterator, DecisionDataset, iterate_batches
    from src.decision_losses import (
        DownstreamLoss,
        PerturbationConfig,
        dbb_backward,
        dbb_forward,
        downstream_loss_eval,
        dpo_backward,
        dpo_forward,
        pfyl_loss_and_grad,
        spo_plus_forward,
        spo_plus_grad,
    )
    from src.decision_metrics import normalized_regret
    from src.errors import DimensionMismatchError, FingerprintMismatchError, UnsupportedCapabilityError
    from src.import_utils import get_setting
    from src.linear_predictor import (
        LinearPredictor,
        RegularizationConfig,
        SgdState,
        backprop,
        predict,
        regularization_penalty,
        sgd_step,
    )
    from src.opt_oracle import OptimizationOracle, RelaxedOracle
    from src.solve_pool import SolvePool

logger = logging.getLogger(__name__)


class TrainingMethod(Enum):
    SPO_PLUS = "spo+"
    DBB = "dbb"
    DPO = "dpo"
    PFYL = "pfyl"
    TWO_STAGE_MSE = "2s-mse"


# downstream loss each differentiable-layer method trains on unless told otherwise
DEFAULT_DOWNSTREAM = {
    TrainingMethod.DBB: DownstreamLoss.REGRET,
    TrainingMethod.DPO: DownstreamLoss.SQUARED_ERROR,
}


@dataclass
class Hyperparams:
    lr: float = field(default_factory=lambda: float(get_setting("DEFAULT_LR", 0.01)))
    momentum: float = field(default_factory=lambda: float(get_setting("DEFAULT_MOMENTUM", 0.9)))
    batch_size: int = field(default_factory=lambda: int(get_setting("DEFAULT_BATCH_SIZE", 32)))
    lambd: float = field(default_factory=lambda: float(get_setting("DEFAULT_LAMBDA", 15.0)))
    perturbation: PerturbationConfig = field(default_factory=PerturbationConfig)
    regularization: RegularizationConfig = field(default_factory=RegularizationConfig)
    downstream: Optional[DownstreamLoss] = None
    select_best: bool = False

    def sgd_state(self) -> SgdState:
        return SgdState(lr=self.lr, momentum=self.momentum, batch_size=self.batch_size)


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    wall_time: float
    val_regret: Optional[float] = None


@dataclass
class TrainingTrace:
    records: List[EpochRecord] = field(default_factory=list)
    best_epoch: Optional[int] = None

    @property
    def mean_epoch_time(self) -> float:
        return float(np.mean([r.wall_time for r in self.records])) if self.records else 0.0

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([r.__dict__ for r in self.records], columns=["epoch", "loss", "wall_time", "val_regret"])


def _base_oracle(oracle: OptimizationOracle) -> OptimizationOracle:
    return oracle.base if isinstance(oracle, RelaxedOracle) else oracle


def _pool_for(pool: Optional[SolvePool], oracle: OptimizationOracle) -> Optional[SolvePool]:
    """The pool only if its workers hold `oracle`."""
    return pool if pool is not None and pool.oracle is oracle else None


def check_compatible(method: TrainingMethod, dataset: DecisionDataset, oracle: OptimizationOracle) -> None:
    """
    Raises:
        DimensionMismatchError: dataset cost columns differ from the oracle dimension
        FingerprintMismatchError: dataset was built for another problem
        UnsupportedCapabilityError: method needs precomputed solutions the dataset lacks
    """
    if dataset.num_cost != oracle.decision_dim:
        raise DimensionMismatchError(f"dataset has {dataset.num_cost} cost columns, oracle expects {oracle.decision_dim}")
    if dataset.fingerprint != _base_oracle(oracle).fingerprint():
        raise FingerprintMismatchError(f"dataset built for {dataset.fingerprint}, training oracle is {oracle.kind}")
    needs_solutions = method in (TrainingMethod.SPO_PLUS, TrainingMethod.PFYL, TrainingMethod.DBB, TrainingMethod.DPO)
    if needs_solutions and not dataset.is_solved:
        raise UnsupportedCapabilityError(f"{method.value} needs a dataset with precomputed solutions")


def _reference(kind: DownstreamLoss, costs: np.ndarray, solutions: np.ndarray, objectives: np.ndarray, s: float):
    if kind is DownstreamLoss.REGRET:
        return costs * s, objectives * s
    return solutions, None


def batch_loss_and_grad(
    method: TrainingMethod,
    cost_pred: np.ndarray,
    batch,
    oracle: OptimizationOracle,
    hp: Hyperparams,
    rng: np.random.Generator,
    pool: Optional[SolvePool] = None,
) -> Tuple[float, np.ndarray]:
    """Summed batch loss and per-sample dl/dc_hat (B x d)."""
    s = float(oracle.sense.value)
    if method is TrainingMethod.SPO_PLUS:
        loss, state = spo_plus_forward(cost_pred, batch.costs, batch.solutions, batch.objectives, oracle, pool)
        grad = spo_plus_grad(state)
    elif method is TrainingMethod.PFYL:
        loss, grad = pfyl_loss_and_grad(cost_pred, batch.solutions, hp.perturbation, oracle, rng, pool)
    elif method in (TrainingMethod.DBB, TrainingMethod.DPO):
        kind = hp.downstream or DEFAULT_DOWNSTREAM[method]
        if method is TrainingMethod.DBB:
            w, state = dbb_forward(cost_pred, oracle, pool)
        else:
            w, state = dpo_forward(cost_pred, hp.perturbation, oracle, rng, pool)
        reference, objective = _reference(kind, batch.costs, batch.solutions, batch.objectives, s)
        loss, dl_dw = downstream_loss_eval(kind, w, reference, objective)
        if method is TrainingMethod.DBB:
            grad = dbb_backward(state, dl_dw, hp.lambd)
        else:
            grad = dpo_backward(state, dl_dw, hp.perturbation)
    else:
        diff = cost_pred - batch.costs
        loss = np.sum(diff ** 2, axis=1) / diff.shape[1]
        grad = 2.0 * diff / diff.shape[1]
    grad = np.atleast_2d(np.asarray(grad, dtype=np.float64))
    total = float(np.sum(loss))

    if method is not TrainingMethod.TWO_STAGE_MSE and hp.regularization.active:
        value, reg_grad = regularization_penalty(cost_pred, batch.costs, hp.regularization)
        total += value
        grad = grad + reg_grad
    return total, grad


def train(
    model: LinearPredictor,
    dataset: DecisionDataset,
    method: Union[TrainingMethod, str],
    oracle: OptimizationOracle,
    hyperparams: Optional[Hyperparams] = None,
    epochs: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
    pool: Optional[SolvePool] = None,
    val_dataset: Optional[DecisionDataset] = None,
) -> Tuple[LinearPredictor, TrainingTrace]:
    """
    Train `model` in place and return it with the per-epoch trace.

    Args:
        model: Linear predictor, updated in place
        dataset: Training data (solved unless method is 2s-mse)
        method: spo+, dbb, dpo, pfyl or 2s-mse
        oracle: Training oracle; a relaxed oracle trains on LP solutions
        hyperparams: Defaults from settings when omitted
        epochs: Number of passes over the data
        rng: Source of epoch shuffles and perturbation noise
        pool: Worker pool for the per-sample solves
        val_dataset: When given, validation regret (exact oracle) is recorded
            each epoch; with select_best the best epoch's parameters are restored
    """
    method = TrainingMethod(method)
    hp = hyperparams or Hyperparams()
    epochs = int(epochs if epochs is not None else get_setting("DEFAULT_EPOCHS", 20))
    rng = rng if rng is not None else np.random.default_rng(0)
    check_compatible(method, dataset, oracle)
    if val_dataset is not None:
        check_compatible(TrainingMethod.SPO_PLUS, val_dataset, oracle)
    eval_oracle = _base_oracle(oracle)
    val_pool = _pool_for(pool, eval_oracle)
    sgd = hp.sgd_state()

    trace = TrainingTrace()
    best_model, best_regret = None, float("inf")
    for epoch in range(1, epochs + 1):
        started = time.perf_counter()
        it = BatchIterator(batch_size=sgd.batch_size, shuffle=True, seed=int(rng.integers(2 ** 32)))
        total = 0.0
        for batch in iterate_batches(dataset, it):
            cost_pred = predict(model, batch.features)
            loss, grad = batch_loss_and_grad(method, cost_pred, batch, oracle, hp, rng, pool)
            total += loss
            grads = backprop(model, batch.features, grad / len(batch.rows))
            sgd_step(model, grads, sgd)
        record = EpochRecord(epoch=epoch, loss=total / max(1, len(dataset)), wall_time=time.perf_counter() - started)

        if val_dataset is not None:
            record.val_regret = normalized_regret(model, eval_oracle, val_dataset, val_pool)
            if record.val_regret < best_regret:
                best_regret, best_model = record.val_regret, model.copy()
                trace.best_epoch = epoch
        trace.records.append(record)
        logger.debug(f"{method.value} epoch {epoch}: loss={record.loss:.6g} ({record.wall_time:.2f}s)")

    if hp.select_best and best_model is not None:
        model.weight, model.bias = best_model.weight, best_model.bias
        logger.info(f"restored parameters from epoch {trace.best_epoch} (validation regret {best_regret:.4g})")
    return model, trace


@dataclass
class SearchResult:
    hyperparams: Hyperparams
    val_regret: float


def random_search(
    make_model: Callable[[], LinearPredictor],
    dataset: DecisionDataset,
    val_dataset: DecisionDataset,
    method: Union[TrainingMethod, str],
    oracle: OptimizationOracle,
    n_trials: int = 8,
    epochs: int = 5,
    rng: Optional[np.random.Generator] = None,
    base: Optional[Hyperparams] = None,
    pool: Optional[SolvePool] = None,
) -> List[SearchResult]:
    """
    Limited random search over lr, momentum and batch size.

    lr is log-uniform on [1e-3, 1e-1]; momentum in {0, 0.5, 0.9}; batch in
    {16, 32, 64}. Results are sorted by validation regret, best first.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    base = base or Hyperparams()
    results = []
    for trial in range(n_trials):
        hp = replace(
            base,
            lr=float(10 ** rng.uniform(-3.0, -1.0)),
            momentum=float(rng.choice([0.0, 0.5, 0.9])),
            batch_size=int(rng.choice([16, 32, 64])),
            select_best=False,
        )
        model, _ = train(make_model(), dataset, method, oracle, hp, epochs,
                         np.random.default_rng(rng.integers(2 ** 32)), pool)
        regret = normalized_regret(model, _base_oracle(oracle), val_dataset, _pool_for(pool, _base_oracle(oracle)))
        logger.info(f"search trial {trial + 1}/{n_trials}: lr={hp.lr:.4g} momentum={hp.momentum} "
                    f"batch={hp.batch_size} -> regret {regret:.4g}")
        results.append(SearchResult(hp, regret))
    return sorted(results, key=lambda r: r.val_regret)
