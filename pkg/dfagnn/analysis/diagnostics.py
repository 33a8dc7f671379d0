"""
Accuracy and alignment diagnostics.

Matrices are compared as flattened vectors under the Frobenius inner
product; angles are reported in degrees. A zero-norm operand yields 90° with
``degenerate=True``.
"""
import math
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from dfagnn.core.numkit import DenseMatrix, SparseMatrix, frobenius_inner, frobenius_norm
from dfagnn.errors import ShapeError
from dfagnn.models.gcn import ForwardCache, GcnParams


class AngleReading(NamedTuple):
    layer: int
    degrees: float
    degenerate: bool = False


class LayerCriteria(NamedTuple):
    layer: int
    p: float
    q: float
    degenerate: bool = False


@dataclass
class EpochRecord:
    """
    Metrics of one epoch, measured on the parameters before that epoch's update.

    Angle and criteria lists are empty unless alignment tracking was enabled.
    ``weight_angles`` is keyed by layer 1..L-1 (W^(0) has no feedback target);
    ``grad_angles`` by layer 0..L-1; ``dx_angles`` and the criteria by hidden
    activation 1..L-1.
    """
    epoch: int
    loss: float
    train_acc: float
    val_acc: float
    test_acc: float
    stage: int = 0
    weight_angles: List[AngleReading] = field(default_factory=list)
    grad_angles: List[AngleReading] = field(default_factory=list)
    dx_angles: List[AngleReading] = field(default_factory=list)
    criteria: List[LayerCriteria] = field(default_factory=list)
    final: bool = False


def accuracy(predicted: np.ndarray, labels: np.ndarray, index: np.ndarray) -> float:
    """Fraction of ``index`` where the prediction matches the label."""
    index = np.asarray(index)
    if index.size == 0:
        raise ValueError("accuracy over an empty index set")
    return float(np.mean(predicted[index] == labels[index]))


def angle_degrees(a: DenseMatrix, b: DenseMatrix) -> AngleReading:
    """Angle between ``a`` and ``b`` (layer field left at -1)."""
    if a.shape != b.shape:
        raise ShapeError(f"cannot compare shapes {a.shape} and {b.shape}")
    na, nb = frobenius_norm(a), frobenius_norm(b)
    if na == 0.0 or nb == 0.0:
        return AngleReading(-1, 90.0, True)
    cos = max(-1.0, min(1.0, frobenius_inner(a, b) / (na * nb)))
    return AngleReading(-1, math.degrees(math.acos(cos)))


def weight_alignment_angles(params: GcnParams, feedback: Sequence[DenseMatrix]) -> List[AngleReading]:
    """
    Angle of each W^(l) to its feedback-product target:
    output layer W^(L-1) against B^(L-1)ᵀ, interior layers W^(l) against B^(l)ᵀB^(l+1).

    ``feedback[k]`` holds B^(k+1).
    """
    L = params.num_layers
    if L < 2:
        raise ValueError("weight alignment needs at least two layers")
    out = []
    for l in range(1, L - 1):
        target = feedback[l - 1].T @ feedback[l]
        out.append(angle_degrees(params.weights[l], target)._replace(layer=l))
    out.append(angle_degrees(params.weights[L - 1], feedback[L - 2].T)._replace(layer=L - 1))
    return out


def gradient_alignment_angles(dfa, bp, on: str = "weights") -> List[AngleReading]:
    """
    Per-layer angle between two gradient sets.

    :param on: "weights" compares δW^(l); "delta_x" compares the update
        directions δX^(l) of the hidden activations.
    """
    if on == "weights":
        pairs = list(enumerate(zip(dfa.weights, bp.weights)))
    elif on == "delta_x":
        pairs = [(l + 1, ab) for l, ab in enumerate(zip(dfa.delta_x, bp.delta_x))]
    else:
        raise ValueError(f"unknown gradient set {on!r}")
    return [angle_degrees(a, b)._replace(layer=l) for l, (a, b) in pairs]


def layer_criteria(cache: ForwardCache, delta_x: Sequence[DenseMatrix], params: GcnParams,
                   e: DenseMatrix, s: SparseMatrix,
                   reference: Optional[Sequence[DenseMatrix]] = None) -> List[LayerCriteria]:
    """
    P^(l) = <δX, X^(l)> / ‖δX‖ and Q^(l) = <δX, C^(l)> / ‖δX‖ for each hidden
    activation, where C^(l) is the backpropagated gradient w.r.t. X^(l) for
    error ``e`` on the same cache.

    :param reference: precomputed C^(l) list, to skip the extra backward pass.
    """
    if reference is None:
        from dfagnn.pipeline.bp_trainer import backward
        reference = backward(params, cache, e, s).delta_x
    out = []
    for k, (dx, c) in enumerate(zip(delta_x, reference)):
        layer = k + 1
        norm = frobenius_norm(dx)
        if norm == 0.0:
            out.append(LayerCriteria(layer, 0.0, 0.0, True))
            continue
        out.append(LayerCriteria(layer,
                                 frobenius_inner(dx, cache.activations[layer]) / norm,
                                 frobenius_inner(dx, c) / norm))
    return out


def mean_confidence_interval(values: Sequence[float], level: float = 0.95) -> Tuple[float, float]:
    """
    Mean and Student-t half-width over per-seed results.

    The half-width is NaN for fewer than two finite values.
    """
    v = np.asarray(values, dtype=np.float64)
    v = v[np.isfinite(v)]
    if v.size == 0:
        return float("nan"), float("nan")
    mean = float(v.mean())
    if v.size < 2:
        return mean, float("nan")
    sem = float(v.std(ddof=1)) / math.sqrt(v.size)
    return mean, float(stats.t.ppf(0.5 + level / 2.0, df=v.size - 1) * sem)
