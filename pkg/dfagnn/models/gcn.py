"""
Bias-free L-layer GCN:

    H^(l) = S X^(l),  A^(l) = H^(l) W^(l),
    X^(l+1) = relu(A^(l))  for hidden layers,  X^(L) = A^(L-1),
    Ỹ = sigmoid(X^(L)).
"""
import logging
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from dfagnn.core.numkit import DenseMatrix, Rng, SparseMatrix, elementwise, matmul, random_matrix, spmm
from dfagnn.errors import ShapeError

logger = logging.getLogger(__name__)


@dataclass
class GcnParams:
    """
    :param layer_dims: [d, h_1, ..., h_{L-1}, c].
    :param weights: L matrices, W^(l) of shape (dims[l], dims[l+1]).
    """
    layer_dims: List[int]
    weights: List[DenseMatrix]

    def __post_init__(self):
        if len(self.weights) != len(self.layer_dims) - 1:
            raise ShapeError(f"{len(self.layer_dims)} dims need {len(self.layer_dims) - 1} weights, "
                             f"got {len(self.weights)}")
        for l, w in enumerate(self.weights):
            expected = (self.layer_dims[l], self.layer_dims[l + 1])
            if w.shape != expected:
                raise ShapeError(f"W^({l}) has shape {w.shape}, expected {expected}")

    @property
    def num_layers(self) -> int:
        return len(self.weights)

    def copy(self) -> "GcnParams":
        return GcnParams(list(self.layer_dims), [w.copy() for w in self.weights])


@dataclass
class ForwardCache:
    """
    Everything one forward pass produced.

    aggregated[l] = H^(l), preactivations[l] = H^(l) W^(l) (l < L);
    activations[l] = X^(l) for l = 0..L; prediction = sigmoid(X^(L)).
    """
    aggregated: List[DenseMatrix] = field(default_factory=list)
    preactivations: List[DenseMatrix] = field(default_factory=list)
    activations: List[DenseMatrix] = field(default_factory=list)
    prediction: DenseMatrix = None

    @property
    def num_layers(self) -> int:
        return len(self.aggregated)


def validate_dims(layer_dims: Sequence[int]) -> List[int]:
    dims = [int(x) for x in layer_dims]
    if len(dims) < 2 or any(x <= 0 for x in dims):
        raise ShapeError(f"layer_dims needs at least two positive entries, got {list(layer_dims)}")
    return dims


def init_params(layer_dims: Sequence[int], rng: Rng) -> GcnParams:
    """He fan-in initialisation: W^(l) ~ N(0, 2 / dims[l])."""
    dims = validate_dims(layer_dims)
    weights = [random_matrix(dims[l], dims[l + 1], np.sqrt(2.0 / dims[l]), rng) for l in range(len(dims) - 1)]
    logger.debug("[MODEL] %d-layer GCN, dims %s", len(weights), dims)
    return GcnParams(dims, weights)


def forward(params: GcnParams, s: SparseMatrix, x: DenseMatrix) -> ForwardCache:
    """Propagate layer by layer, caching every intermediate."""
    if x.shape[1] != params.layer_dims[0]:
        raise ShapeError(f"features have {x.shape[1]} columns, model expects {params.layer_dims[0]}")
    if s.shape != (x.shape[0], x.shape[0]):
        raise ShapeError(f"operator of shape {s.shape} does not match {x.shape[0]} nodes")

    cache = ForwardCache(activations=[x])
    last = params.num_layers - 1
    for l, w in enumerate(params.weights):
        h = spmm(s, cache.activations[l])
        a = matmul(h, w)
        cache.aggregated.append(h)
        cache.preactivations.append(a)
        cache.activations.append(a if l == last else elementwise("relu", a))
    cache.prediction = elementwise("sigmoid", cache.activations[-1])
    return cache


def predict(cache: ForwardCache) -> np.ndarray:
    """Row-wise argmax of Ỹ; ties go to the lowest class index."""
    return np.argmax(cache.prediction, axis=1).astype(np.int64)
