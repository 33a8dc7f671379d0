"""
Direct feedback alignment for the GCN.

Every layer is updated from the output error directly: the error is pushed
through one shared chain of Sᵀ applications and projected into each hidden
width by a fixed random matrix B^(l) (c × dims[l]), so

    δW^(L-1) = H^(L-1)ᵀ R,
    δW^(l)   = H^(l)ᵀ (Sᵀ)^{L-1-l} R B^(l+1)     for l < L-1,

with R the (pseudo) error whose filtered rows are zeroed. No layer waits on
another's gradient.
"""
import logging
import time
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from dfagnn.analysis.diagnostics import (
    EpochRecord, gradient_alignment_angles, layer_criteria, weight_alignment_angles,
)
from dfagnn.core.graph import normalized_operator
from dfagnn.core.numkit import (
    STREAM_FEEDBACK, STREAM_PARAMS, DenseMatrix, Rng, SparseMatrix, derive_rng, elementwise, matmul,
    random_matrix, spmm,
)
from dfagnn.data.dataset import Dataset, Split
from dfagnn.errors import ShapeError
from dfagnn.models.gcn import ForwardCache, GcnParams, forward, init_params, validate_dims
from dfagnn.pipeline.bp_trainer import (
    Grads, TrainResult, backward, check_finite, evaluate_cache, finish, layer_dims_for, output_error,
)
from dfagnn.pipeline.optim import AdamState, adam_step
from dfagnn.pipeline.pseudo_error import SpreadConfig, compute_mask, rescale, spread_errors

logger = logging.getLogger(__name__)

FeedbackMats = List[DenseMatrix]


class FreezeStage(BaseModel):
    """``epochs`` consecutive epochs during which the listed layers (0-based) are not updated."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    epochs: int = Field(..., ge=1)
    frozen: Tuple[int, ...] = ()


class DfaConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    spread: SpreadConfig = SpreadConfig()
    lr: float = Field(0.01, gt=0)
    weight_decay: float = Field(5e-4, ge=0)
    epochs: int = Field(1000, ge=0)
    num_layers: int = Field(3, ge=2)
    hidden: int = Field(64, ge=1)
    use_error_generator: bool = True
    use_node_filter: bool = True
    freeze_schedule: Optional[Tuple[FreezeStage, ...]] = None
    modulate_by_activation_derivative: bool = False
    track_alignment: bool = False
    log_every: int = Field(100, ge=0)

    @model_validator(mode="after")
    def _check(self) -> "DfaConfig":
        if self.use_node_filter and not self.use_error_generator:
            raise ValueError("use_node_filter requires use_error_generator")
        for stage in self.freeze_schedule or ():
            bad = [l for l in stage.frozen if not 0 <= l < self.num_layers]
            if bad:
                raise ValueError(f"freeze schedule names layers {bad} outside 0..{self.num_layers - 1}")
        return self


def staged_schedule(num_layers: int, stage_epochs: Sequence[int]) -> Tuple[FreezeStage, ...]:
    """
    Three-stage experiment: train hidden layers with the output layer frozen,
    then only the output layer, then the hidden layers again.
    """
    if len(stage_epochs) != 3:
        raise ValueError(f"staged schedule needs three stage lengths, got {list(stage_epochs)}")
    out = (num_layers - 1,)
    hidden = tuple(range(num_layers - 1))
    return (FreezeStage(epochs=stage_epochs[0], frozen=out),
            FreezeStage(epochs=stage_epochs[1], frozen=hidden),
            FreezeStage(epochs=stage_epochs[2], frozen=out))


def stage_at(schedule: Optional[Sequence[FreezeStage]], epoch: int) -> Tuple[int, Tuple[int, ...]]:
    """(stage index, frozen layers) for ``epoch``; past the schedule nothing is frozen."""
    if not schedule:
        return 0, ()
    start = 0
    for i, stage in enumerate(schedule):
        if epoch < start + stage.epochs:
            return i, stage.frozen
        start += stage.epochs
    return len(schedule), ()


def init_feedback(layer_dims: Sequence[int], c: int, rng: Rng) -> FeedbackMats:
    """B^(l) ~ N(0, 1/c) entries (std 1/√c), shape (c, dims[l]) for l = 1..L-1."""
    dims = validate_dims(layer_dims)
    if dims[-1] != c:
        raise ShapeError(f"output width {dims[-1]} does not match class count {c}")
    scale = 1.0 / np.sqrt(c)
    return [random_matrix(c, dims[l], scale, rng) for l in range(1, len(dims) - 1)]


def dfa_grads(cache: ForwardCache, e_hat: DenseMatrix, mask: np.ndarray, feedback: FeedbackMats,
              s: SparseMatrix, modulate: bool = False) -> Grads:
    """
    Filtered direct-feedback updates.

    :param e_hat: (pseudo) error, n × c.
    :param mask: boolean keep-vector over nodes; dropped rows contribute nothing.
    :param modulate: multiply each projected term by relu' of its layer's preactivation.
    """
    L = cache.num_layers
    n = cache.prediction.shape[0]
    if e_hat.shape != cache.prediction.shape:
        raise ShapeError(f"e_hat {e_hat.shape} does not match prediction {cache.prediction.shape}")
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (n,):
        raise ShapeError(f"mask of shape {mask.shape} does not cover {n} nodes")
    if len(feedback) != L - 1:
        raise ShapeError(f"{L} layers need {L - 1} feedback matrices, got {len(feedback)}")

    r = np.where(mask[:, None], e_hat, 0.0)
    weights: List[Optional[DenseMatrix]] = [None] * L
    delta_x: List[Optional[DenseMatrix]] = [None] * (L - 1)
    weights[L - 1] = matmul(cache.aggregated[L - 1].T, r)
    chain = r
    for l in range(L - 2, -1, -1):
        chain = spmm(s, chain, transpose_s=True)
        dx = matmul(chain, feedback[l])
        delta_x[l] = dx
        if modulate:
            dx = dx * elementwise("relu_derivative", cache.preactivations[l])
        weights[l] = matmul(cache.aggregated[l].T, dx)
    return Grads(weights=weights, delta_x=delta_x)


def pseudo_error_step(cache: ForwardCache, e: DenseMatrix, train_mask: np.ndarray, s: SparseMatrix,
                      config: DfaConfig) -> Tuple[DenseMatrix, np.ndarray]:
    """(Ê, keep-mask) for one epoch according to the generator / filter switches."""
    if config.use_error_generator:
        e_hat = rescale(spread_errors(e, s, config.spread), e, train_mask)
    else:
        e_hat = e
    if config.use_node_filter:
        keep = compute_mask(cache.prediction, e_hat, config.spread.epsilon)
    elif config.use_error_generator:
        keep = np.ones(e.shape[0], dtype=bool)
    else:
        keep = train_mask
    return e_hat, keep


def _track(record: EpochRecord, params: GcnParams, feedback: FeedbackMats, cache: ForwardCache,
           grads: Grads, e: DenseMatrix, s: SparseMatrix) -> None:
    record.weight_angles = weight_alignment_angles(params, feedback)
    bp = backward(params, cache, e, s)
    record.grad_angles = gradient_alignment_angles(grads, bp)
    record.dx_angles = gradient_alignment_angles(grads, bp, on="delta_x")
    record.criteria = layer_criteria(cache, grads.delta_x, params, e, s, reference=bp.delta_x)


def train_dfa(dataset: Dataset, split: Split, config: DfaConfig, seed: int = 0,
              s: Optional[SparseMatrix] = None) -> TrainResult:
    """
    DFA-GNN training loop.

    Weights share the BP trainer's parameter stream for the same seed; the
    feedback matrices come from their own stream and never change.
    """
    split.validate(dataset.num_nodes)
    s = normalized_operator(dataset.graph) if s is None else s
    x = dataset.features
    y = dataset.one_hot()
    train_mask = split.mask("train", dataset.num_nodes)
    dims = layer_dims_for(dataset, config.num_layers, config.hidden)
    params = init_params(dims, derive_rng(seed, STREAM_PARAMS))
    feedback = init_feedback(dims, dataset.num_classes, derive_rng(seed, STREAM_FEEDBACK))
    state = AdamState.zeros_like(params)
    records: List[EpochRecord] = []

    started = time.perf_counter()
    for epoch in range(config.epochs):
        stage, frozen = stage_at(config.freeze_schedule, epoch)
        cache = forward(params, s, x)
        record = evaluate_cache(cache, dataset, split, y, epoch, stage=stage)
        e = output_error(cache.prediction, y, train_mask)
        e_hat, keep = pseudo_error_step(cache, e, train_mask, s, config)
        grads = dfa_grads(cache, e_hat, keep, feedback, s, config.modulate_by_activation_derivative)
        if config.track_alignment:
            _track(record, params, feedback, cache, grads, e, s)
        records.append(record)
        params, state = adam_step(state, params, grads, config.lr, config.weight_decay, frozen=frozen)
        check_finite(params, "dfa", epoch)
        if config.log_every and epoch % config.log_every == 0:
            logger.info("[DFA] epoch %d stage %d loss %.4f train %.4f val %.4f test %.4f kept %d/%d",
                        epoch, stage, record.loss, record.train_acc, record.val_acc, record.test_acc,
                        int(keep.sum()), keep.size)
    elapsed = time.perf_counter() - started

    final_stage, _ = stage_at(config.freeze_schedule, config.epochs)
    final = evaluate_cache(forward(params, s, x), dataset, split, y, config.epochs, stage=final_stage, final=True)
    if config.track_alignment:
        final.weight_angles = weight_alignment_angles(params, feedback)
    records.append(final)
    result = finish("dfa", records, params, elapsed, config.epochs)
    result.feedback = feedback
    return result
