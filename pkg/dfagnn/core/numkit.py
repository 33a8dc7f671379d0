"""
Dense / sparse kernels shared by every other module.

DenseMatrix is a 2-D float64 numpy array, SparseMatrix a float64
``scipy.sparse.csr_matrix`` with sorted column indices, and Rng a
``numpy.random.Generator`` on PCG64. Gaussian draws come from numpy's
ziggurat ``standard_normal``, so a given seed yields the same stream on every
platform numpy supports.

All kernels are pure: inputs are never modified and results are freshly
allocated.
"""
from typing import Literal, Union

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from dfagnn.errors import ShapeError

DenseMatrix = np.ndarray
SparseMatrix = sp.csr_matrix
Rng = np.random.Generator

# --- 随机流编号 (每个用途独立的子流) ---
STREAM_SPLIT = 0
STREAM_PARAMS = 1
STREAM_FEEDBACK = 2
STREAM_ATTACK = 3
STREAM_SYNTHETIC = 4

ElementwiseKind = Literal["relu", "sigmoid", "relu_derivative"]


def make_rng(seed: int) -> Rng:
    """Root generator for ``seed``."""
    return np.random.Generator(np.random.PCG64(seed))


def derive_rng(seed: int, stream: int) -> Rng:
    """
    Child generator for one purpose (split, init, attack, ...) of a run.

    Children of the same seed never share state, so a job that only needs the
    attack stream does not shift the split stream.
    """
    seq = np.random.SeedSequence(seed, spawn_key=(stream,))
    return np.random.Generator(np.random.PCG64(seq))


def as_sparse(s: Union[sp.spmatrix, np.ndarray]) -> SparseMatrix:
    """Canonical CSR copy with sorted indices and summed duplicates."""
    out = sp.csr_matrix(s, dtype=np.float64, copy=True)
    out.sum_duplicates()
    out.sort_indices()
    return out


def matmul(a: DenseMatrix, b: DenseMatrix) -> DenseMatrix:
    """Dense product ``a @ b``."""
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    return np.ascontiguousarray(a @ b)


def spmm(s: SparseMatrix, x: DenseMatrix, transpose_s: bool = False) -> DenseMatrix:
    """
    Sparse-dense product S·X, or Sᵀ·X when ``transpose_s`` is set.

    :param s: CSR matrix.
    :param x: dense right operand.
    :param transpose_s: multiply by the transpose of ``s``.
    """
    inner = s.shape[0] if transpose_s else s.shape[1]
    if x.ndim != 2 or inner != x.shape[0]:
        flag = "Sᵀ" if transpose_s else "S"
        raise ShapeError(f"spmm: {flag} of shape {s.shape} cannot multiply {x.shape}")
    op = s.T if transpose_s else s
    return np.ascontiguousarray(op @ x, dtype=np.float64)


def random_matrix(rows: int, cols: int, scale: float, rng: Rng) -> DenseMatrix:
    """I.i.d. Gaussian matrix with mean 0 and standard deviation ``scale``."""
    if rows <= 0 or cols <= 0:
        raise ShapeError(f"random_matrix: dimensions must be positive, got ({rows}, {cols})")
    if not scale > 0:
        raise ValueError(f"random_matrix: scale must be positive, got {scale}")
    return rng.standard_normal((rows, cols)) * scale


def elementwise(kind: ElementwiseKind, x: DenseMatrix) -> DenseMatrix:
    """
    relu, sigmoid, or the relu subgradient (1 where x > 0, else 0; so 0 at the kink).
    """
    if kind == "relu":
        return np.maximum(x, 0.0)
    if kind == "sigmoid":
        return expit(x)
    if kind == "relu_derivative":
        return (x > 0).astype(np.float64)
    raise ValueError(f"unknown elementwise kind: {kind!r}")


def frobenius_inner(a: DenseMatrix, b: DenseMatrix) -> float:
    if a.shape != b.shape:
        raise ShapeError(f"frobenius_inner: shapes {a.shape} and {b.shape} differ")
    return float(np.vdot(a.ravel(), b.ravel()))


def frobenius_norm(a: DenseMatrix) -> float:
    return float(np.linalg.norm(a.ravel()))


def all_finite(*mats: DenseMatrix) -> bool:
    return all(bool(np.isfinite(m).all()) for m in mats)


if __name__ == '__main__':
    # 简单自检: 两节点完全图的 S
    s = as_sparse(np.array([[0.5, 0.5], [0.5, 0.5]]))
    print(spmm(s, np.eye(2)))
    print(random_matrix(2, 3, 1.0, make_rng(0)))
