"""
Exact-gradient baseline: BCE loss, output error, manual backpropagation
through the GCN and the BP training loop (labelled nodes only).
"""
import logging
import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from dfagnn.analysis.diagnostics import EpochRecord, accuracy
from dfagnn.core.graph import normalized_operator
from dfagnn.core.numkit import (
    STREAM_PARAMS, DenseMatrix, SparseMatrix, all_finite, derive_rng, elementwise, matmul, spmm,
)
from dfagnn.data.dataset import Dataset, Split
from dfagnn.errors import ShapeError, TrainingDivergedError
from dfagnn.models.gcn import ForwardCache, GcnParams, forward, init_params, predict
from dfagnn.pipeline.optim import AdamState, adam_step

logger = logging.getLogger(__name__)

PRED_CLIP = 1e-12


class BpConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    lr: float = Field(0.01, gt=0)
    weight_decay: float = Field(5e-4, ge=0)
    epochs: int = Field(1000, ge=0)
    num_layers: int = Field(3, ge=1)
    hidden: int = Field(64, ge=1)
    log_every: int = Field(100, ge=0)


@dataclass
class Grads:
    """
    :param weights: δW^(l) per layer, shapes matching GcnParams.weights.
    :param delta_x: update direction for each hidden activation X^(1..L-1);
        ``delta_x[k]`` belongs to X^(k+1).
    """
    weights: List[DenseMatrix]
    delta_x: List[DenseMatrix] = field(default_factory=list)


@dataclass
class TrainResult:
    algorithm: str
    records: List[EpochRecord]
    params: GcnParams
    best_epoch: int
    best_val_acc: float
    test_acc: float
    seconds_per_epoch: float = 0.0
    feedback: Optional[List[DenseMatrix]] = None


def layer_dims_for(dataset: Dataset, num_layers: int, hidden: int) -> List[int]:
    return [dataset.num_features] + [hidden] * (num_layers - 1) + [dataset.num_classes]


def _as_mask(mask, n: int) -> np.ndarray:
    mask = np.asarray(mask)
    if mask.dtype == bool:
        return mask
    out = np.zeros(n, dtype=bool)
    out[mask] = True
    return out


def bce_loss(prediction: DenseMatrix, targets: DenseMatrix, mask) -> float:
    """
    Mean binary cross-entropy over the masked rows (summed over classes).

    Predictions are clipped to [1e-12, 1 - 1e-12] here only.
    """
    mask = _as_mask(mask, prediction.shape[0])
    n_rows = int(mask.sum())
    if n_rows == 0:
        raise ValueError("bce_loss over an empty node mask")
    p = np.clip(prediction[mask], PRED_CLIP, 1.0 - PRED_CLIP)
    y = targets[mask]
    return float(-np.sum(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)) / n_rows)


def output_error(prediction: DenseMatrix, targets: DenseMatrix, mask) -> DenseMatrix:
    """E = Ỹ - Y on masked rows, exact zeros elsewhere."""
    if prediction.shape != targets.shape:
        raise ShapeError(f"prediction {prediction.shape} and targets {targets.shape} differ")
    mask = _as_mask(mask, prediction.shape[0])
    e = np.zeros_like(prediction)
    e[mask] = prediction[mask] - targets[mask]
    return e


def backward(params: GcnParams, cache: ForwardCache, e: DenseMatrix, s: SparseMatrix) -> Grads:
    """
    Exact gradients of N·bce_loss for an already-masked output error ``e``.

    δA^(L-1) = E; then per layer δW^(l) = H^(l)ᵀ δA^(l),
    δX^(l) = Sᵀ δA^(l) W^(l)ᵀ, δA^(l-1) = δX^(l) ⊙ relu'(A^(l-1)).
    """
    L = params.num_layers
    if cache.num_layers != L:
        raise ShapeError(f"cache holds {cache.num_layers} layers, params {L}")
    for l in range(L):
        if cache.preactivations[l].shape[1] != params.layer_dims[l + 1]:
            raise ShapeError(f"cache layer {l} width {cache.preactivations[l].shape[1]} does not match "
                             f"params width {params.layer_dims[l + 1]}")
    if e.shape != cache.prediction.shape:
        raise ShapeError(f"error {e.shape} does not match prediction {cache.prediction.shape}")

    weights: List[Optional[DenseMatrix]] = [None] * L
    delta_x: List[Optional[DenseMatrix]] = [None] * (L - 1)
    delta_a = e
    for l in range(L - 1, -1, -1):
        weights[l] = matmul(cache.aggregated[l].T, delta_a)
        if l == 0:
            break
        dx = spmm(s, matmul(delta_a, params.weights[l].T), transpose_s=True)
        delta_x[l - 1] = dx
        delta_a = dx * elementwise("relu_derivative", cache.preactivations[l - 1])
    return Grads(weights=weights, delta_x=delta_x)


# --- 训练循环公共部分 ---

def _safe_accuracy(pred: np.ndarray, labels: np.ndarray, index: np.ndarray) -> float:
    return accuracy(pred, labels, index) if index.size else float("nan")


def evaluate_cache(cache: ForwardCache, dataset: Dataset, split: Split, y: DenseMatrix,
                   epoch: int, stage: int = 0, final: bool = False) -> EpochRecord:
    pred = predict(cache)
    return EpochRecord(
        epoch=epoch,
        loss=bce_loss(cache.prediction, y, split.train),
        train_acc=_safe_accuracy(pred, dataset.labels, split.train),
        val_acc=_safe_accuracy(pred, dataset.labels, split.val),
        test_acc=_safe_accuracy(pred, dataset.labels, split.test),
        stage=stage,
        final=final,
    )


def select_best(records: Sequence[EpochRecord]) -> EpochRecord:
    """Record with the highest validation accuracy; earliest wins ties, last record if val is empty."""
    vals = np.array([r.val_acc for r in records], dtype=np.float64)
    if np.all(np.isnan(vals)):
        return records[-1]
    return records[int(np.nanargmax(vals))]


def finish(algorithm: str, records: List[EpochRecord], params: GcnParams, elapsed: float, epochs: int) -> TrainResult:
    best = select_best(records)
    spe = elapsed / epochs if epochs else 0.0
    logger.info("[%s] best epoch %d: val %.4f test %.4f (%.2e s/epoch)",
                algorithm.upper(), best.epoch, best.val_acc, best.test_acc, spe)
    return TrainResult(algorithm=algorithm, records=records, params=params, best_epoch=best.epoch,
                       best_val_acc=best.val_acc, test_acc=best.test_acc, seconds_per_epoch=spe)


def check_finite(params: GcnParams, algorithm: str, epoch: int) -> None:
    if not all_finite(*params.weights):
        raise TrainingDivergedError(f"{algorithm} training diverged at epoch {epoch}: non-finite weights")


def train_bp(dataset: Dataset, split: Split, config: BpConfig, seed: int = 0,
             s: Optional[SparseMatrix] = None) -> TrainResult:
    """
    Backpropagation training with Adam on the training rows only.

    :param seed: run seed; weights come from its parameter stream.
    :param s: precomputed propagation operator (built from the graph if omitted).
    """
    split.validate(dataset.num_nodes)
    s = normalized_operator(dataset.graph) if s is None else s
    x = dataset.features
    y = dataset.one_hot()
    params = init_params(layer_dims_for(dataset, config.num_layers, config.hidden),
                         derive_rng(seed, STREAM_PARAMS))
    state = AdamState.zeros_like(params)
    records: List[EpochRecord] = []

    started = time.perf_counter()
    for epoch in range(config.epochs):
        cache = forward(params, s, x)
        record = evaluate_cache(cache, dataset, split, y, epoch)
        records.append(record)
        e = output_error(cache.prediction, y, split.train)
        grads = backward(params, cache, e, s)
        params, state = adam_step(state, params, grads, config.lr, config.weight_decay)
        check_finite(params, "bp", epoch)
        if config.log_every and epoch % config.log_every == 0:
            logger.info("[BP] epoch %d loss %.4f train %.4f val %.4f test %.4f",
                        epoch, record.loss, record.train_acc, record.val_acc, record.test_acc)
    elapsed = time.perf_counter() - started

    records.append(evaluate_cache(forward(params, s, x), dataset, split, y, config.epochs, final=True))
    return finish("bp", records, params, elapsed, config.epochs)
