"""
Decision Dataset Module

Binds features and true costs to their precomputed optimal solutions and
objectives, iterates seeded mini-batches, and persists datasets.

File layout of a `.dfld` container (all integers and floats little-endian):

    magic      6 bytes   b"DFLDS1"
    version    uint16
    hdr_len    uint32
    header     hdr_len bytes of UTF-8 JSON
               {kind, fingerprint, spec, seed, n, p, d}
    X          n*p float64, row-major
    C          n*d float64
    Wstar      n*d float64
    Zstar      n   float64
    checksum   8 bytes, blake2b(digest_size=8) of everything above
"""

from __future__ import annotations

import hashlib
import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterator, NamedTuple, Optional, Union

import numpy as np
import pandas as pd

try:
    from .errors import (
        ChecksumError,
        DatasetFormatError,
        DimensionMismatchError,
        FingerprintMismatchError,
    )
    from .opt_oracle import OptimizationOracle
    from .solve_pool import SolvePool
except ImportError:
    from src.errors import (
        ChecksumError,
        DatasetFormatError,
        DimensionMismatchError,
        FingerprintMismatchError,
    )
    from src.opt_oracle import OptimizationOracle
    from src.solve_pool import SolvePool

logger = logging.getLogger(__name__)

MAGIC = b"DFLDS1"
FORMAT_VERSION = 1
CHECKSUM_SIZE = 8
CONSISTENCY_TOL = 1e-9
_PREFIX = struct.Struct("<6sHI")
_LE_F8 = np.dtype("<f8")


@dataclass
class DecisionDataset:
    """
    Features X (n x p), costs C (n x d), optimal solutions Wstar (n x d) and
    objectives Zstar (n). Wstar/Zstar are None for an unsolved dataset.
    """
    features: np.ndarray
    costs: np.ndarray
    solutions: Optional[np.ndarray]
    objectives: Optional[np.ndarray]
    fingerprint: str
    kind: str
    spec: Dict[str, Any] = field(default_factory=dict)
    seed: Optional[int] = None

    def __post_init__(self):
        self.features = np.atleast_2d(np.asarray(self.features, dtype=np.float64))
        self.costs = np.atleast_2d(np.asarray(self.costs, dtype=np.float64))
        n = self.features.shape[0]
        if self.costs.shape[0] != n:
            raise DimensionMismatchError(f"{n} feature rows vs {self.costs.shape[0]} cost rows")
        if self.solutions is not None:
            self.solutions = np.atleast_2d(np.asarray(self.solutions, dtype=np.float64))
            self.objectives = np.asarray(self.objectives, dtype=np.float64).reshape(-1)
            if self.solutions.shape != self.costs.shape or self.objectives.shape != (n,):
                raise DimensionMismatchError("solutions/objectives do not match the cost array")

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def num_feat(self) -> int:
        return self.features.shape[1]

    @property
    def num_cost(self) -> int:
        return self.costs.shape[1]

    @property
    def is_solved(self) -> bool:
        return self.solutions is not None

    def subset(self, rows) -> "DecisionDataset":
        rows = np.asarray(rows)
        return DecisionDataset(
            features=self.features[rows],
            costs=self.costs[rows],
            solutions=None if self.solutions is None else self.solutions[rows],
            objectives=None if self.objectives is None else self.objectives[rows],
            fingerprint=self.fingerprint,
            kind=self.kind,
            spec=dict(self.spec),
            seed=self.seed,
        )


class Batch(NamedTuple):
    features: np.ndarray
    costs: np.ndarray
    solutions: Optional[np.ndarray]
    objectives: Optional[np.ndarray]
    rows: np.ndarray


@dataclass(frozen=True)
class BatchIterator:
    batch_size: int
    shuffle: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch size must be at least 1")


def unsolved_dataset(oracle: OptimizationOracle, features, costs, seed: Optional[int] = None) -> DecisionDataset:
    """Dataset without solutions, for methods that only need costs."""
    ds = DecisionDataset(features, costs, None, None, oracle.fingerprint(), oracle.kind, oracle.spec_dict(), seed)
    if ds.num_cost != oracle.decision_dim:
        raise DimensionMismatchError(f"costs have {ds.num_cost} columns, oracle expects {oracle.decision_dim}")
    return ds


def build_dataset(
    oracle: OptimizationOracle,
    features,
    costs,
    pool: Optional[SolvePool] = None,
    seed: Optional[int] = None,
) -> DecisionDataset:
    """
    Solve every row once and store Wstar / Zstar.

    Nothing is returned unless every row solves.

    Raises:
        DimensionMismatchError: shapes disagree with each other or the oracle
        SolverFailureError: an oracle call failed; `.row` names the row
    """
    ds = unsolved_dataset(oracle, features, costs, seed)
    if pool is None:
        with SolvePool(oracle, workers=1) as inline:
            solutions = inline.solve_many(ds.costs)
    else:
        solutions = pool.solve_many(ds.costs)
    objectives = np.einsum("ij,ij->i", ds.costs, solutions)
    logger.info(f"built {oracle.kind} dataset with {len(ds)} rows")
    return DecisionDataset(ds.features, ds.costs, solutions, objectives,
                           ds.fingerprint, ds.kind, ds.spec, seed)


def inconsistent_rows(ds: DecisionDataset, rows=None) -> np.ndarray:
    """Rows where Zstar differs from C . Wstar by more than the tolerance."""
    if not ds.is_solved:
        return np.zeros(0, dtype=np.int64)
    rows = np.arange(len(ds)) if rows is None else np.asarray(rows)
    z = np.einsum("ij,ij->i", ds.costs[rows], ds.solutions[rows])
    bad = np.abs(z - ds.objectives[rows]) > CONSISTENCY_TOL * np.maximum(1.0, np.abs(ds.objectives[rows]))
    return rows[bad]


def iterate_batches(ds: DecisionDataset, it: BatchIterator) -> Iterator[Batch]:
    """Disjoint batches covering the dataset; the last one may be short."""
    n = len(ds)
    order = np.random.default_rng(it.seed).permutation(n) if it.shuffle else np.arange(n)
    for start in range(0, n, it.batch_size):
        rows = order[start:start + it.batch_size]
        yield Batch(
            features=ds.features[rows],
            costs=ds.costs[rows],
            solutions=None if ds.solutions is None else ds.solutions[rows],
            objectives=None if ds.objectives is None else ds.objectives[rows],
            rows=rows,
        )


def save(ds: DecisionDataset, path: Union[str, Path]) -> Path:
    """Write the binary container; returns the path written."""
    if not ds.is_solved:
        raise DatasetFormatError("only solved datasets can be saved")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = json.dumps({
        "kind": ds.kind,
        "fingerprint": ds.fingerprint,
        "spec": ds.spec,
        "seed": ds.seed,
        "n": len(ds),
        "p": ds.num_feat,
        "d": ds.num_cost,
    }, sort_keys=True).encode("utf-8")
    payload = b"".join([
        _PREFIX.pack(MAGIC, FORMAT_VERSION, len(header)),
        header,
        np.ascontiguousarray(ds.features, dtype=_LE_F8).tobytes(),
        np.ascontiguousarray(ds.costs, dtype=_LE_F8).tobytes(),
        np.ascontiguousarray(ds.solutions, dtype=_LE_F8).tobytes(),
        np.ascontiguousarray(ds.objectives, dtype=_LE_F8).tobytes(),
    ])
    digest = hashlib.blake2b(payload, digest_size=CHECKSUM_SIZE).digest()
    path.write_bytes(payload + digest)
    logger.info(f"saved dataset ({len(ds)} rows) to {path}")
    return path


def _read_array(blob: bytes, offset: int, shape) -> np.ndarray:
    count = int(np.prod(shape))
    arr = np.frombuffer(blob, dtype=_LE_F8, count=count, offset=offset)
    return arr.astype(np.float64).reshape(shape)


def load(path: Union[str, Path], oracle: OptimizationOracle, sample_seed: int = 0) -> DecisionDataset:
    """
    Read a container written by `save` and check it against `oracle`.

    Raises:
        DatasetFormatError: bad magic/version, malformed header, truncated file,
            or a sampled row violating Zstar = C . Wstar
        ChecksumError: payload does not match the stored digest
        FingerprintMismatchError: file was built for another oracle
    """
    blob = Path(path).read_bytes()
    if len(blob) < _PREFIX.size + CHECKSUM_SIZE:
        raise DatasetFormatError(f"{path}: file too short for a dataset container")
    magic, version, hdr_len = _PREFIX.unpack_from(blob, 0)
    if magic != MAGIC:
        raise DatasetFormatError(f"{path}: not a dataset container")
    if version != FORMAT_VERSION:
        raise DatasetFormatError(f"{path}: unsupported format version {version}")
    start = _PREFIX.size
    try:
        header = json.loads(blob[start:start + hdr_len].decode("utf-8"))
        n, p, d = int(header["n"]), int(header["p"]), int(header["d"])
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise DatasetFormatError(f"{path}: malformed header ({e})") from e

    offset = start + hdr_len
    expected = offset + 8 * (n * p + 2 * n * d + n) + CHECKSUM_SIZE
    if len(blob) != expected:
        raise DatasetFormatError(f"{path}: expected {expected} bytes, found {len(blob)} (truncated or padded)")
    payload, stored = blob[:-CHECKSUM_SIZE], blob[-CHECKSUM_SIZE:]
    if hashlib.blake2b(payload, digest_size=CHECKSUM_SIZE).digest() != stored:
        raise ChecksumError(f"{path}: checksum mismatch")
    if header.get("fingerprint") != oracle.fingerprint():
        raise FingerprintMismatchError(
            f"{path}: dataset built for {header.get('fingerprint')}, oracle is {oracle.fingerprint()}"
        )

    X = _read_array(blob, offset, (n, p))
    offset += 8 * n * p
    C = _read_array(blob, offset, (n, d))
    offset += 8 * n * d
    W = _read_array(blob, offset, (n, d))
    offset += 8 * n * d
    Z = _read_array(blob, offset, (n,))
    ds = DecisionDataset(X, C, W, Z, header["fingerprint"], header["kind"], header.get("spec") or {}, header.get("seed"))

    if n:
        sample = np.random.default_rng(sample_seed).choice(n, size=max(1, n // 100), replace=False)
        bad = inconsistent_rows(ds, sample)
        if bad.size:
            raise DatasetFormatError(f"{path}: objective does not match solution at rows {bad.tolist()[:10]}")
    return ds


def export_csv(ds: DecisionDataset, path: Union[str, Path]) -> Path:
    """One row per sample: x_*, c_*, w_*, z."""
    frames = [
        pd.DataFrame(ds.features, columns=[f"x_{j}" for j in range(ds.num_feat)]),
        pd.DataFrame(ds.costs, columns=[f"c_{j}" for j in range(ds.num_cost)]),
    ]
    if ds.is_solved:
        frames.append(pd.DataFrame(ds.solutions, columns=[f"w_{j}" for j in range(ds.num_cost)]))
        frames.append(pd.DataFrame({"z": ds.objectives}))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.concat(frames, axis=1).to_csv(path, index=False)
    return path
