import os
import sys
from pathlib import Path

import numpy as np
import pytest

# 将项目根目录添加到 Python 路径
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from dfagnn.core.graph import build_graph, normalized_operator  # noqa: E402
from dfagnn.core.numkit import STREAM_SYNTHETIC, derive_rng  # noqa: E402
from dfagnn.data.dataset import random_split, save_dataset, synthetic  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full benchmark runs on exported datasets")


def _benchmark_dir(name: str) -> Path:
    root = os.environ.get("DFAGNN_DATA_DIR")
    if not root or not (Path(root) / name / "graph.txt").is_file():
        pytest.skip(f"{name} export not found under DFAGNN_DATA_DIR")
    return Path(root) / name


@pytest.fixture
def benchmark_dir():
    """Dataset directory under DFAGNN_DATA_DIR, or skip the calling test."""
    return _benchmark_dir


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(1234))


@pytest.fixture
def six_node_graph():
    # two triangles joined by the edge (2, 3)
    return build_graph(6, [(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (4, 5), (3, 5)])


@pytest.fixture
def six_node_operator(six_node_graph):
    return normalized_operator(six_node_graph)


@pytest.fixture
def small_sbm():
    return synthetic(12, 5, 3, 0.7, 0.2, derive_rng(0, STREAM_SYNTHETIC))


@pytest.fixture
def sbm60():
    return synthetic(60, 8, 3, 0.4, 0.02, derive_rng(1, STREAM_SYNTHETIC))


@pytest.fixture
def sbm60_split(sbm60):
    return random_split(sbm60.num_nodes, (0.6, 0.2, 0.2), derive_rng(7, 0))


@pytest.fixture(scope="session")
def sbm300():
    # separable blocks for the short sanity runs
    return synthetic(300, 16, 3, 0.5, 0.01, derive_rng(2, STREAM_SYNTHETIC))


@pytest.fixture(scope="session")
def sbm300_split(sbm300):
    return random_split(sbm300.num_nodes, (0.6, 0.2, 0.2), derive_rng(3, 0))


@pytest.fixture
def minimal_dataset_dir(tmp_path):
    root = tmp_path / "minimal"
    root.mkdir()
    (root / "graph.txt").write_text("2 1\n0 1\n")
    (root / "features.txt").write_text("1.0 0.0\n0.0 1.0\n")
    (root / "labels.txt").write_text("0\n1\n")
    return root


@pytest.fixture
def sbm_dataset_dir(tmp_path, sbm60) -> Path:
    return save_dataset(sbm60, tmp_path / "sbm60")
