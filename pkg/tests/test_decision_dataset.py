"""
Tests for dataset building, batching and the binary container.
"""

import numpy as np
import pandas as pd
import pytest

from src.data_generator import GenSpec, gen_shortest_path
from src.decision_dataset import (
    BatchIterator,
    MAGIC,
    build_dataset,
    export_csv,
    inconsistent_rows,
    iterate_batches,
    load,
    save,
    unsolved_dataset,
)
from src.errors import (
    ChecksumError,
    DatasetFormatError,
    DimensionMismatchError,
    FingerprintMismatchError,
    SolverFailureError,
)
from src.shortest_path_solver import GridSpec, ShortestPathOracle


@pytest.fixture
def sp_dataset(grid3):
    data = gen_shortest_path(GenSpec(n=30, p=4, deg=2, noise_width=0.5, seed=5, grid=(3, 3)))
    return build_dataset(grid3, data.features, data.costs, seed=5)


def test_single_row_example(grid2):
    ds = build_dataset(grid2, [[0.0]], [[1.0, 5.0, 1.0, 5.0]])
    assert ds.solutions.tolist() == [[1.0, 0.0, 1.0, 0.0]]
    assert ds.objectives.tolist() == [2.0]
    assert ds.is_solved


def test_rebuild_is_identical(grid3, sp_dataset):
    again = build_dataset(grid3, sp_dataset.features, sp_dataset.costs, seed=5)
    assert np.array_equal(again.solutions, sp_dataset.solutions)
    assert np.array_equal(again.objectives, sp_dataset.objectives)
    assert inconsistent_rows(again).size == 0


def test_shape_checks(grid2):
    with pytest.raises(DimensionMismatchError):
        build_dataset(grid2, np.zeros((2, 1)), np.ones((3, 4)))
    with pytest.raises(DimensionMismatchError):
        build_dataset(grid2, np.zeros((2, 1)), np.ones((2, 5)))


def test_failing_row_is_reported(grid2):
    costs = np.ones((3, 4))
    costs[1, 2] = np.nan
    with pytest.raises(SolverFailureError) as info:
        build_dataset(grid2, np.zeros((3, 1)), costs)
    assert info.value.row == 1


def test_batch_sizes_and_order(grid2):
    ds = unsolved_dataset(grid2, np.arange(5.0).reshape(5, 1), np.ones((5, 4)))
    batches = list(iterate_batches(ds, BatchIterator(batch_size=2)))
    assert [len(b.rows) for b in batches] == [2, 2, 1]
    assert np.concatenate([b.rows for b in batches]).tolist() == [0, 1, 2, 3, 4]
    assert batches[0].solutions is None


def test_shuffled_batches_are_seeded(sp_dataset):
    it = BatchIterator(batch_size=7, shuffle=True, seed=3)
    first = np.concatenate([b.rows for b in iterate_batches(sp_dataset, it)])
    second = np.concatenate([b.rows for b in iterate_batches(sp_dataset, it)])
    other = np.concatenate([b.rows for b in iterate_batches(sp_dataset, BatchIterator(7, True, 4))])
    assert first.tolist() == second.tolist()
    assert sorted(first.tolist()) == list(range(30))
    assert first.tolist() != other.tolist()


def test_batch_iterator_validation():
    with pytest.raises(ValueError):
        BatchIterator(batch_size=0)


def test_subset_keeps_identity(sp_dataset):
    sub = sp_dataset.subset([0, 2, 4])
    assert len(sub) == 3
    assert sub.fingerprint == sp_dataset.fingerprint
    assert np.array_equal(sub.solutions[1], sp_dataset.solutions[2])


class TestContainer:

    def test_save_load_bit_identical(self, grid3, sp_dataset, tmp_path):
        path = save(sp_dataset, tmp_path / "sp.dfld")
        assert path.read_bytes()[:6] == MAGIC
        back = load(path, grid3)
        for name in ("features", "costs", "solutions", "objectives"):
            assert getattr(back, name).tobytes() == getattr(sp_dataset, name).tobytes()
        assert back.seed == 5
        assert back.kind == "shortest_path"

    def test_wrong_oracle(self, sp_dataset, tmp_path):
        path = save(sp_dataset, tmp_path / "sp.dfld")
        with pytest.raises(FingerprintMismatchError):
            load(path, ShortestPathOracle(GridSpec(3, 4)))

    def test_truncated(self, grid3, sp_dataset, tmp_path):
        path = save(sp_dataset, tmp_path / "sp.dfld")
        path.write_bytes(path.read_bytes()[:-20])
        with pytest.raises(DatasetFormatError):
            load(path, grid3)

    def test_flipped_byte(self, grid3, sp_dataset, tmp_path):
        path = save(sp_dataset, tmp_path / "sp.dfld")
        blob = bytearray(path.read_bytes())
        blob[-40] ^= 0xFF
        path.write_bytes(bytes(blob))
        with pytest.raises(ChecksumError):
            load(path, grid3)

    def test_not_a_container(self, grid3, tmp_path):
        path = tmp_path / "junk.dfld"
        path.write_bytes(b"NOTADATASETFILE" * 4)
        with pytest.raises(DatasetFormatError):
            load(path, grid3)

    def test_unsolved_cannot_be_saved(self, grid2, tmp_path):
        ds = unsolved_dataset(grid2, np.zeros((1, 1)), np.ones((1, 4)))
        with pytest.raises(DatasetFormatError):
            save(ds, tmp_path / "x.dfld")

    def test_inconsistent_objective_detected(self, grid3, sp_dataset, tmp_path):
        broken = sp_dataset.subset(np.arange(len(sp_dataset)))
        broken.objectives[:] += 1.0
        path = save(broken, tmp_path / "bad.dfld")
        with pytest.raises(DatasetFormatError, match="objective does not match"):
            load(path, grid3)


def test_export_csv(sp_dataset, tmp_path):
    path = export_csv(sp_dataset, tmp_path / "out" / "sp.csv")
    df = pd.read_csv(path)
    assert len(df) == 30
    assert list(df.columns[:4]) == ["x_0", "x_1", "x_2", "x_3"]
    assert "c_11" in df.columns and "w_11" in df.columns
    assert df["z"].to_numpy() == pytest.approx(sp_dataset.objectives)
