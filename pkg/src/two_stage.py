"""
Two-Stage Baselines Module

Predict-then-optimize baselines that fit costs on prediction error alone:
least squares (2-stage LR), k nearest neighbours (2-stage kNN) and a random
forest (2-stage RF). Decisions are made afterwards by solving with the
predicted costs.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Union

import numpy as np
from sklearn.ensemble import RandomForestRegressor
from sklearn.linear_model import LinearRegression
from sklearn.neighbors import KNeighborsRegressor

try:
    from .errors import DimensionMismatchError
except ImportError:
    from src.errors import DimensionMismatchError

logger = logging.getLogger(__name__)


class TwoStageKind(Enum):
    LR = "lr"
    KNN = "knn"
    RF = "rf"


DEFAULT_PARAMS: Dict[TwoStageKind, Dict[str, Any]] = {
    TwoStageKind.LR: {},
    TwoStageKind.KNN: {"n_neighbors": 5},
    TwoStageKind.RF: {"n_estimators": 100},
}


def make_regressor(kind: Union[TwoStageKind, str], seed: int = 0, **params):
    """Multi-output scikit-learn regressor for the given baseline."""
    kind = TwoStageKind(kind)
    merged = {**DEFAULT_PARAMS[kind], **params}
    if kind is TwoStageKind.LR:
        return LinearRegression(**merged)
    if kind is TwoStageKind.KNN:
        return KNeighborsRegressor(**merged)
    return RandomForestRegressor(random_state=int(seed) % (2 ** 32), **merged)


@dataclass
class TwoStageModel:
    kind: TwoStageKind
    estimator: Any
    num_feat: int
    num_cost: int
    params: Dict[str, Any] = field(default_factory=dict)

    def predict(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        squeeze = x.ndim == 1
        x = np.atleast_2d(x)
        if x.shape[1] != self.num_feat:
            raise DimensionMismatchError(f"features have length {x.shape[1]}, model expects {self.num_feat}")
        out = np.asarray(self.estimator.predict(x), dtype=np.float64).reshape(x.shape[0], self.num_cost)
        return out[0] if squeeze else out


def fit_two_stage(kind: Union[TwoStageKind, str], features, costs, seed: int = 0, **params) -> TwoStageModel:
    """
    Fit a cost regressor on (features, true costs).

    Args:
        kind: lr, knn or rf
        features: n x p
        costs: n x d true costs
        seed: Random state for the forest
    """
    kind = TwoStageKind(kind)
    x = np.atleast_2d(np.asarray(features, dtype=np.float64))
    c = np.atleast_2d(np.asarray(costs, dtype=np.float64))
    if x.shape[0] != c.shape[0]:
        raise DimensionMismatchError(f"{x.shape[0]} feature rows vs {c.shape[0]} cost rows")
    if kind is TwoStageKind.KNN:
        # cannot ask for more neighbours than samples
        params.setdefault("n_neighbors", min(DEFAULT_PARAMS[kind]["n_neighbors"], x.shape[0]))
    estimator = make_regressor(kind, seed, **params)
    estimator.fit(x, c)
    logger.debug(f"fitted 2-stage {kind.value} on {x.shape[0]} samples")
    return TwoStageModel(kind=kind, estimator=estimator, num_feat=x.shape[1], num_cost=c.shape[1], params=params)
