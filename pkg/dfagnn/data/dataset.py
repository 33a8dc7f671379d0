"""
Dataset ingestion, train/val/test splits and a stochastic-block-model generator.

On-disk format (ASCII, UNIX newlines), one directory per dataset:

    graph.txt        "n m" then m lines "u v" (0-based ids)
    features.txt     n lines of d space-separated floats
    labels.txt       n lines, one class id each
    splits/<name>.json   optional {"train": [...], "val": [...], "test": [...]}
"""
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np

from dfagnn.core.graph import Graph, build_graph
from dfagnn.core.numkit import DenseMatrix, Rng
from dfagnn.errors import DatasetFormatError, GraphError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

GRAPH_FILE = "graph.txt"
FEATURES_FILE = "features.txt"
LABELS_FILE = "labels.txt"
SPLITS_DIR = "splits"


@dataclass(frozen=True)
class Dataset:
    graph: Graph
    features: DenseMatrix
    labels: np.ndarray
    num_classes: int
    name: str = "unnamed"

    def __post_init__(self):
        n = self.graph.n
        if self.features.shape[0] != n or self.labels.shape[0] != n:
            raise DatasetFormatError(
                f"dataset {self.name}: graph has {n} nodes, features {self.features.shape[0]} rows, "
                f"labels {self.labels.shape[0]} entries")
        if self.num_classes < 2:
            raise DatasetFormatError(f"dataset {self.name}: need at least 2 classes, got {self.num_classes}")
        if n and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise DatasetFormatError(f"dataset {self.name}: labels must lie in [0, {self.num_classes})")

    @property
    def num_nodes(self) -> int:
        return self.graph.n

    @property
    def num_features(self) -> int:
        return int(self.features.shape[1])

    def one_hot(self) -> DenseMatrix:
        y = np.zeros((self.num_nodes, self.num_classes))
        y[np.arange(self.num_nodes), self.labels] = 1.0
        return y

    def with_graph(self, graph: Graph) -> "Dataset":
        """Same features and labels over a different topology (attacks)."""
        return Dataset(graph=graph, features=self.features, labels=self.labels,
                       num_classes=self.num_classes, name=self.name)


@dataclass(frozen=True)
class Split:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def validate(self, n: int) -> "Split":
        if self.train.size == 0:
            raise ValueError("split has an empty training set")
        parts = np.concatenate([self.train, self.val, self.test])
        if parts.size and (parts.min() < 0 or parts.max() >= n):
            raise ValueError(f"split references nodes outside [0, {n})")
        if np.unique(parts).size != parts.size:
            raise ValueError("train/val/test sets are not disjoint")
        return self

    def mask(self, part: str, n: int) -> np.ndarray:
        out = np.zeros(n, dtype=bool)
        out[getattr(self, part)] = True
        return out

    def sizes(self) -> Tuple[int, int, int]:
        return int(self.train.size), int(self.val.size), int(self.test.size)


# --- 读取 ---

def _read_lines(path: Path) -> List[Tuple[int, str]]:
    """Non-blank lines paired with their 1-based physical line numbers."""
    if not path.is_file():
        raise DatasetFormatError(f"missing dataset file: {path}")
    out = []
    with path.open("rb") as f:
        for lineno, raw in enumerate(f, start=1):
            try:
                line = raw.decode("ascii").rstrip("\r\n")
            except UnicodeDecodeError:
                raise DatasetFormatError(f"{path}:{lineno}: non-ASCII byte in line") from None
            if line.strip():
                out.append((lineno, line))
    return out


def _read_graph(path: Path) -> Graph:
    lines = _read_lines(path)
    if not lines:
        raise DatasetFormatError(f"{path}: empty file, expected header 'n m'")
    head_no, head = lines[0]
    try:
        n, m = (int(tok) for tok in head.split())
    except ValueError:
        raise DatasetFormatError(f"{path}:{head_no}: malformed header {head!r}, expected 'n m'") from None
    if len(lines) - 1 != m:
        raise DatasetFormatError(f"{path}: header declares {m} edges, found {len(lines) - 1} edge lines")
    pairs = np.zeros((m, 2), dtype=np.int64)
    for i, (lineno, line) in enumerate(lines[1:]):
        toks = line.split()
        try:
            if len(toks) != 2:
                raise ValueError
            pairs[i] = (int(toks[0]), int(toks[1]))
        except ValueError:
            raise DatasetFormatError(f"{path}:{lineno}: malformed edge line {line!r}") from None
    try:
        return build_graph(n, pairs)
    except GraphError as e:
        raise DatasetFormatError(f"{path}: {e}") from None


def _read_features(path: Path, n: int) -> DenseMatrix:
    lines = _read_lines(path)
    if len(lines) != n:
        raise DatasetFormatError(f"{path}: expected {n} feature rows, found {len(lines)}")
    rows = []
    for lineno, line in lines:
        try:
            row = np.array(line.split(), dtype=np.float64)
        except ValueError:
            raise DatasetFormatError(f"{path}:{lineno}: malformed number in {line[:40]!r}") from None
        if rows and row.size != rows[0].size:
            raise DatasetFormatError(f"{path}:{lineno}: expected {rows[0].size} values, found {row.size}")
        if not np.isfinite(row).all():
            raise DatasetFormatError(f"{path}:{lineno}: non-finite feature value")
        rows.append(row)
    return np.vstack(rows) if rows else np.zeros((0, 0))


def _read_labels(path: Path, n: int) -> np.ndarray:
    lines = _read_lines(path)
    if len(lines) != n:
        raise DatasetFormatError(f"{path}: expected {n} labels, found {len(lines)}")
    labels = np.zeros(n, dtype=np.int64)
    for i, (lineno, line) in enumerate(lines):
        try:
            labels[i] = int(line.strip())
        except ValueError:
            raise DatasetFormatError(f"{path}:{lineno}: malformed label {line!r}") from None
        if labels[i] < 0:
            raise DatasetFormatError(f"{path}:{lineno}: negative label {labels[i]}")
    return labels


def row_normalize(features: DenseMatrix) -> DenseMatrix:
    """Row L1 normalisation; all-zero rows stay zero."""
    norms = np.abs(features).sum(axis=1, keepdims=True)
    return np.divide(features, norms, out=np.zeros_like(features), where=norms > 0)


def load_dataset(directory: PathLike, normalize_features: bool = False) -> Dataset:
    """
    Load a dataset directory.

    :param directory: folder holding graph.txt, features.txt and labels.txt.
    :param normalize_features: apply row L1 normalisation to the features.
    :return: Dataset with num_classes = 1 + max label.
    """
    root = Path(directory)
    graph = _read_graph(root / GRAPH_FILE)
    features = _read_features(root / FEATURES_FILE, graph.n)
    labels = _read_labels(root / LABELS_FILE, graph.n)
    if normalize_features:
        features = row_normalize(features)
    num_classes = int(labels.max()) + 1 if labels.size else 0
    ds = Dataset(graph=graph, features=features, labels=labels, num_classes=num_classes, name=root.name)
    logger.info("[DATA] %s: n=%d m=%d d=%d c=%d homophily=%.3f",
                ds.name, graph.n, graph.num_edges, ds.num_features, num_classes,
                node_homophily(graph, labels))
    return ds


def load_split(directory: PathLike, name: str, n: Optional[int] = None) -> Split:
    """Read splits/<name>.json from a dataset directory."""
    path = Path(directory) / SPLITS_DIR / f"{name}.json"
    if not path.is_file():
        raise DatasetFormatError(f"missing split file: {path}")
    try:
        raw = json.loads(path.read_text(encoding="ascii"))
        split = Split(*(np.asarray(raw[k], dtype=np.int64) for k in ("train", "val", "test")))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise DatasetFormatError(f"{path}: invalid split file ({e})") from None
    if n is not None:
        try:
            split.validate(n)
        except ValueError as e:
            raise DatasetFormatError(f"{path}: {e}") from None
    return split


def save_dataset(ds: Dataset, directory: PathLike, split: Optional[Split] = None,
                 split_name: str = "default") -> Path:
    """Write ``ds`` (and optionally one split) in the plain-text format."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    with (root / GRAPH_FILE).open("w", encoding="ascii", newline="\n") as f:
        f.write(f"{ds.graph.n} {ds.graph.num_edges}\n")
        for u, v in ds.graph.edges.tolist():
            f.write(f"{u} {v}\n")
    np.savetxt(root / FEATURES_FILE, ds.features, fmt="%.17g", delimiter=" ", newline="\n")
    np.savetxt(root / LABELS_FILE, ds.labels, fmt="%d", newline="\n")
    if split is not None:
        (root / SPLITS_DIR).mkdir(exist_ok=True)
        payload = {k: getattr(split, k).tolist() for k in ("train", "val", "test")}
        (root / SPLITS_DIR / f"{split_name}.json").write_text(json.dumps(payload), encoding="ascii")
    return root


# --- 划分 ---

def random_split(n: int, fractions: Sequence[float] = (0.6, 0.2, 0.2), rng: Optional[Rng] = None) -> Split:
    """
    Uniform random permutation cut into ⌊f·n⌋-sized train and val blocks; the
    remainder goes to test.
    """
    if rng is None:
        raise ValueError("random_split needs an explicit rng")
    if len(fractions) != 3 or any(f <= 0 for f in fractions) or sum(fractions) > 1 + 1e-12:
        raise ValueError(f"fractions must be three positive numbers summing to at most 1, got {fractions}")
    n_train = int(np.floor(fractions[0] * n))
    n_val = int(np.floor(fractions[1] * n))
    if n_train < 1:
        raise ValueError(f"n={n} is too small for a non-empty training set at fraction {fractions[0]}")
    perm = rng.permutation(n)
    return Split(train=np.sort(perm[:n_train]),
                 val=np.sort(perm[n_train:n_train + n_val]),
                 test=np.sort(perm[n_train + n_val:]))


def sparse_split(labels: np.ndarray, per_class: int = 20, val_size: int = 500,
                 rng: Optional[Rng] = None) -> Split:
    """
    ``per_class`` training nodes per class, ``val_size`` validation nodes from
    the rest, everything else is test.
    """
    if rng is None:
        raise ValueError("sparse_split needs an explicit rng")
    labels = np.asarray(labels, dtype=np.int64)
    train = []
    for cls in range(int(labels.max()) + 1):
        members = np.flatnonzero(labels == cls)
        if members.size < per_class:
            raise ValueError(f"class {cls} has {members.size} nodes, fewer than per_class={per_class}")
        train.append(rng.choice(members, size=per_class, replace=False))
    train = np.sort(np.concatenate(train))
    rest = np.setdiff1d(np.arange(labels.size), train)
    if val_size > rest.size:
        raise ValueError(f"val_size={val_size} exceeds the {rest.size} nodes left after training selection")
    val = np.sort(rng.choice(rest, size=val_size, replace=False)) if val_size else np.zeros(0, dtype=np.int64)
    test = np.setdiff1d(rest, val)
    return Split(train=train, val=val, test=test)


# --- 合成数据 ---

def block_sizes(n: int, c: int) -> List[int]:
    base, extra = divmod(n, c)
    return [base + (1 if i < extra else 0) for i in range(c)]


def synthetic(n: int, d: int, c: int, p_in: float, p_out: float, rng: Rng, noise: float = 0.5) -> Dataset:
    """
    Stochastic block model with ``c`` equal blocks; features are a one-hot
    class signal (column ``label % d``) plus Gaussian noise.
    """
    if c < 2 or n < c or d < 1:
        raise ValueError(f"synthetic: need c >= 2, n >= c, d >= 1 (got n={n}, d={d}, c={c})")
    if not (0.0 <= p_out <= p_in <= 1.0):
        raise ValueError(f"synthetic: need 0 <= p_out <= p_in <= 1 (got p_in={p_in}, p_out={p_out})")
    sizes = block_sizes(n, c)
    probs = [[p_in if i == j else p_out for j in range(c)] for i in range(c)]
    sbm = nx.stochastic_block_model(sizes, probs, seed=int(rng.integers(2 ** 31 - 1)))
    labels = np.repeat(np.arange(c), sizes)
    features = np.zeros((n, d))
    features[np.arange(n), labels % d] = 1.0
    if noise > 0:
        features += noise * rng.standard_normal((n, d))
    graph = build_graph(n, list(sbm.edges()))
    return Dataset(graph=graph, features=features, labels=labels, num_classes=c, name=f"sbm-{n}-{c}")


def node_homophily(graph: Graph, labels: np.ndarray) -> float:
    """Mean over non-isolated nodes of the fraction of neighbours sharing the node's label."""
    adj = graph.adjacency
    if adj.nnz == 0:
        return float("nan")
    rows = np.repeat(np.arange(graph.n), np.diff(adj.indptr))
    same = (labels[rows] == labels[adj.indices]).astype(np.float64)
    deg = np.diff(adj.indptr)
    per_node = np.bincount(rows, weights=same, minlength=graph.n)
    has = deg > 0
    return float(np.mean(per_node[has] / deg[has]))
