import json

import numpy as np
import pytest

from dfagnn.core.graph import build_graph
from dfagnn.core.numkit import make_rng
from dfagnn.data.dataset import (
    Dataset, Split, load_dataset, load_split, node_homophily, random_split, row_normalize, save_dataset,
    sparse_split, synthetic,
)
from dfagnn.errors import DatasetFormatError


def test_load_minimal_dataset(minimal_dataset_dir):
    ds = load_dataset(minimal_dataset_dir)
    assert (ds.num_nodes, ds.num_features, ds.num_classes) == (2, 2, 2)
    assert ds.graph.num_edges == 1
    assert ds.name == "minimal"


def test_load_reports_short_labels(minimal_dataset_dir):
    (minimal_dataset_dir / "labels.txt").write_text("0\n")
    with pytest.raises(DatasetFormatError, match="expected 2 labels, found 1"):
        load_dataset(minimal_dataset_dir)


def test_load_reports_line_of_bad_number(minimal_dataset_dir):
    (minimal_dataset_dir / "features.txt").write_text("1.0 0.0\n0.0 x\n")
    with pytest.raises(DatasetFormatError, match=r"features.txt:2"):
        load_dataset(minimal_dataset_dir)


def test_line_numbers_count_blank_lines(minimal_dataset_dir):
    (minimal_dataset_dir / "features.txt").write_text("1.0 0.0\n\n0.0 x\n")
    with pytest.raises(DatasetFormatError, match=r"features.txt:3: malformed number"):
        load_dataset(minimal_dataset_dir)
    (minimal_dataset_dir / "features.txt").write_text("1.0 0.0\n0.0 1.0\n")
    (minimal_dataset_dir / "graph.txt").write_text("2 1\n\n\n0 z\n")
    with pytest.raises(DatasetFormatError, match=r"graph.txt:4: malformed edge"):
        load_dataset(minimal_dataset_dir)


def test_non_ascii_byte_is_a_format_error(minimal_dataset_dir):
    (minimal_dataset_dir / "features.txt").write_bytes(b"1.0 0.0\n0.0 \xff\n")
    with pytest.raises(DatasetFormatError, match=r"features.txt:2: non-ASCII"):
        load_dataset(minimal_dataset_dir)


def test_blank_lines_are_skipped(minimal_dataset_dir):
    (minimal_dataset_dir / "labels.txt").write_text("0\n\n1\n\n")
    assert load_dataset(minimal_dataset_dir).labels.tolist() == [0, 1]


def test_load_reports_missing_file(minimal_dataset_dir):
    (minimal_dataset_dir / "graph.txt").unlink()
    with pytest.raises(DatasetFormatError, match="missing dataset file"):
        load_dataset(minimal_dataset_dir)


def test_load_reports_edge_count_mismatch(minimal_dataset_dir):
    (minimal_dataset_dir / "graph.txt").write_text("2 2\n0 1\n")
    with pytest.raises(DatasetFormatError, match="declares 2 edges"):
        load_dataset(minimal_dataset_dir)


def test_save_then_load_round_trip(sbm60, tmp_path, sbm60_split):
    root = save_dataset(sbm60, tmp_path / "copy", split=sbm60_split, split_name="fixed")
    back = load_dataset(root)
    assert np.array_equal(back.graph.edges, sbm60.graph.edges)
    assert np.array_equal(back.features, sbm60.features)
    assert np.array_equal(back.labels, sbm60.labels)
    assert back.num_classes == sbm60.num_classes
    split = load_split(root, "fixed", back.num_nodes)
    for part in ("train", "val", "test"):
        assert np.array_equal(getattr(split, part), getattr(sbm60_split, part))


def test_load_split_rejects_overlap(minimal_dataset_dir):
    (minimal_dataset_dir / "splits").mkdir()
    (minimal_dataset_dir / "splits" / "bad.json").write_text(json.dumps({"train": [0], "val": [0], "test": [1]}))
    with pytest.raises(DatasetFormatError, match="not disjoint"):
        load_split(minimal_dataset_dir, "bad", 2)
    with pytest.raises(DatasetFormatError, match="missing split file"):
        load_split(minimal_dataset_dir, "nope")


def test_row_normalize_keeps_zero_rows():
    out = row_normalize(np.array([[1.0, 3.0], [0.0, 0.0], [-2.0, 2.0]]))
    assert np.allclose(out, [[0.25, 0.75], [0.0, 0.0], [-0.5, 0.5]])


def test_dataset_invariants():
    g = build_graph(3, [(0, 1)])
    with pytest.raises(DatasetFormatError):
        Dataset(graph=g, features=np.zeros((2, 1)), labels=np.zeros(3, dtype=int), num_classes=2)
    with pytest.raises(DatasetFormatError):
        Dataset(graph=g, features=np.zeros((3, 1)), labels=np.array([0, 1, 2]), num_classes=2)
    with pytest.raises(DatasetFormatError):
        Dataset(graph=g, features=np.zeros((3, 1)), labels=np.zeros(3, dtype=int), num_classes=1)


@pytest.mark.parametrize("n, sizes", [(10, (6, 2, 2)), (2708, (1624, 541, 543))])
def test_random_split_sizes(n, sizes):
    split = random_split(n, (0.6, 0.2, 0.2), make_rng(0))
    assert split.sizes() == sizes
    split.validate(n)
    assert np.array_equal(np.sort(np.concatenate([split.train, split.val, split.test])), np.arange(n))


def test_random_split_is_deterministic():
    a = random_split(50, rng=make_rng(5))
    b = random_split(50, rng=make_rng(5))
    assert np.array_equal(a.train, b.train) and np.array_equal(a.test, b.test)


def test_random_split_too_small():
    with pytest.raises(ValueError):
        random_split(1, (0.6, 0.2, 0.2), make_rng(0))


def test_sparse_split_per_class(sbm60):
    split = sparse_split(sbm60.labels, per_class=5, val_size=10, rng=make_rng(0))
    assert split.train.size == 15
    assert np.array_equal(np.bincount(sbm60.labels[split.train]), [5, 5, 5])
    assert split.val.size == 10
    assert split.test.size == 60 - 25
    split.validate(60)


def test_sparse_split_boundary_and_errors():
    split = sparse_split(np.array([0, 1]), per_class=1, val_size=0, rng=make_rng(0))
    assert split.train.tolist() == [0, 1]
    assert split.val.size == 0 and split.test.size == 0
    with pytest.raises(ValueError, match="class 1"):
        sparse_split(np.array([0, 0, 1]), per_class=2, val_size=0, rng=make_rng(0))


def test_split_validate():
    with pytest.raises(ValueError):
        Split(np.array([], dtype=int), np.array([0]), np.array([1])).validate(2)
    with pytest.raises(ValueError):
        Split(np.array([0]), np.array([5]), np.array([1])).validate(2)


def test_synthetic_disjoint_blocks():
    ds = synthetic(4, 2, 2, 1.0, 0.0, make_rng(0))
    assert ds.graph.edges.tolist() == [[0, 1], [2, 3]]
    assert ds.labels.tolist() == [0, 0, 1, 1]


def test_synthetic_block_sizes_and_errors():
    ds = synthetic(60, 4, 3, 0.3, 0.05, make_rng(1))
    assert np.array_equal(np.bincount(ds.labels), [20, 20, 20])
    with pytest.raises(ValueError):
        synthetic(10, 2, 2, 0.1, 0.5, make_rng(0))
    with pytest.raises(ValueError):
        synthetic(10, 2, 2, 1.5, 0.5, make_rng(0))


def test_homophily_follows_block_probabilities():
    assortative = synthetic(90, 3, 3, 0.3, 0.0, make_rng(2))
    assert node_homophily(assortative.graph, assortative.labels) == 1.0
    values = [node_homophily(ds.graph, ds.labels)
              for ds in (synthetic(90, 3, 3, 0.2, 0.2, make_rng(s)) for s in range(5))]
    assert abs(np.mean(values) - 1.0 / 3.0) < 0.05
    assert np.isnan(node_homophily(build_graph(3, []), np.array([0, 1, 0])))
