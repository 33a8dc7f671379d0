"""
Adam with coupled L2 weight decay, one moment pair per weight matrix.
"""
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, List, Tuple

import numpy as np

from dfagnn.core.numkit import DenseMatrix
from dfagnn.errors import ShapeError
from dfagnn.models.gcn import GcnParams

if TYPE_CHECKING:
    from dfagnn.pipeline.bp_trainer import Grads


@dataclass
class AdamState:
    """
    First / second moments per layer and a per-layer step counter.

    Frozen layers keep their counter, so bias correction resumes where it
    stopped once the layer is unfrozen.
    """
    m: List[DenseMatrix]
    v: List[DenseMatrix]
    steps: List[int]

    @classmethod
    def zeros_like(cls, params: GcnParams) -> "AdamState":
        return cls(m=[np.zeros_like(w) for w in params.weights],
                   v=[np.zeros_like(w) for w in params.weights],
                   steps=[0] * params.num_layers)

    @property
    def t(self) -> int:
        return max(self.steps) if self.steps else 0


def adam_step(state: AdamState, params: GcnParams, grads: "Grads", lr: float, weight_decay: float = 0.0,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
              frozen: Iterable[int] = ()) -> Tuple[GcnParams, AdamState]:
    """
    One Adam update; returns new (params, state) and leaves the inputs untouched.

    :param frozen: layer indices skipped entirely (weights and moments unchanged).
    """
    if len(grads.weights) != params.num_layers or len(state.m) != params.num_layers:
        raise ShapeError(f"adam_step: {params.num_layers} layers, {len(grads.weights)} gradients, "
                         f"{len(state.m)} moment slots")
    frozen = set(frozen)
    new_w, new_m, new_v, new_steps = [], [], [], []
    for l, (w, g, m, v, t) in enumerate(zip(params.weights, grads.weights, state.m, state.v, state.steps)):
        if g.shape != w.shape:
            raise ShapeError(f"adam_step: gradient {g.shape} does not match W^({l}) {w.shape}")
        if l in frozen:
            new_w.append(w.copy())
            new_m.append(m.copy())
            new_v.append(v.copy())
            new_steps.append(t)
            continue
        t += 1
        g = g + weight_decay * w
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * (g * g)
        m_hat = m / (1.0 - beta1 ** t)
        v_hat = v / (1.0 - beta2 ** t)
        new_w.append(w - lr * m_hat / (np.sqrt(v_hat) + eps))
        new_m.append(m)
        new_v.append(v)
        new_steps.append(t)
    return GcnParams(list(params.layer_dims), new_w), AdamState(new_m, new_v, new_steps)
