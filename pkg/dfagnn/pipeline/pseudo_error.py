"""
Pseudo errors for unlabelled nodes.

Training-node residuals are spread over the graph with a label-spreading
iteration, rescaled to the mean L1 magnitude of the labelled residuals, and
then gated by a confidence mask on the corrected prediction Ỹ - Ê.
"""
import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from dfagnn.core.numkit import DenseMatrix, SparseMatrix, spmm
from dfagnn.errors import ShapeError


class SpreadConfig(BaseModel):
    """
    :param alpha: spreading weight in [0, 1); 1 - alpha is the restart weight on E.
    :param iterations: fixed number of spreading steps.
    :param epsilon: confidence threshold for the node mask.
    """
    model_config = ConfigDict(extra="forbid", frozen=True)

    alpha: float = Field(0.1, ge=0.0, lt=1.0)
    iterations: int = Field(50, ge=1)
    epsilon: float = Field(0.5, gt=0.0, lt=1.0)


def spread_errors(e: DenseMatrix, s: SparseMatrix, cfg: SpreadConfig) -> DenseMatrix:
    """Z ← (1-α)E + αSZ, ``cfg.iterations`` times from Z = E."""
    if s.shape != (e.shape[0], e.shape[0]):
        raise ShapeError(f"operator {s.shape} does not match error matrix {e.shape}")
    restart = (1.0 - cfg.alpha) * e
    z = e.copy()
    for _ in range(cfg.iterations):
        z = restart + cfg.alpha * spmm(s, z)
    return z


def rescale(z_star: DenseMatrix, e: DenseMatrix, labeled: np.ndarray) -> DenseMatrix:
    """
    η = mean L1 norm of the labelled rows of ``e``; every unlabelled row of
    ``z_star`` is scaled to L1 norm η (zero rows stay zero). Labelled rows are
    copied from ``e``.
    """
    labeled = np.asarray(labeled)
    if labeled.dtype == bool:
        labeled = np.flatnonzero(labeled)
    if labeled.size == 0:
        raise ValueError("rescale needs at least one labelled node")
    if z_star.shape != e.shape:
        raise ShapeError(f"z_star {z_star.shape} and e {e.shape} differ")

    eta = float(np.mean(np.abs(e[labeled]).sum(axis=1)))
    norms = np.abs(z_star).sum(axis=1, keepdims=True)
    scale = np.divide(eta, norms, out=np.zeros_like(norms), where=norms > 0)
    e_hat = z_star * scale
    e_hat[labeled] = e[labeled]
    return e_hat


def compute_mask(prediction: DenseMatrix, e_hat: DenseMatrix, epsilon: float) -> np.ndarray:
    """Keep node i iff exactly one entry of (Ỹ - Ê)ᵢ exceeds ``epsilon``."""
    if prediction.shape != e_hat.shape:
        raise ShapeError(f"prediction {prediction.shape} and e_hat {e_hat.shape} differ")
    corrected = prediction - e_hat
    return np.count_nonzero(corrected > epsilon, axis=1) == 1
