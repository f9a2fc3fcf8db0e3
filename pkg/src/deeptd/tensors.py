"""Dense tensors with a fixed linearization convention.

A tensor of shape ``(d_1, ..., d_D)`` is identified with a vector of length
``prod(d_l)`` through the mixed-radix rule: the entry at (0-based) multi-index
``(j_1, ..., j_D)`` sits at linear position ``j_1 + d_1*j_2 + d_1*d_2*j_3 + ...``,
i.e. the first mode varies fastest.  ``tensorize`` and ``vectorize`` convert
between the two views and are exact inverses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

__all__ = [
    "TensorShape",
    "DenseTensor",
    "tensorize",
    "vectorize",
    "outer_product",
    "inner_product",
    "frobenius_norm",
    "contract_all_but",
]


@dataclass(frozen=True)
class TensorShape:
    """Mode sizes of a dense tensor.

    Parameters
    ----------
    dims : tuple of int
        Size of each mode, all >= 1.  The order of the modes is
        significant: mode 0 is the fastest-varying one in the linearized
        view.
    """

    dims: tuple[int, ...]

    def __post_init__(self) -> None:
        dims = tuple(int(d) for d in self.dims)
        if len(dims) == 0:
            raise ValueError("tensor shape needs at least one mode")
        if any(d < 1 for d in dims):
            raise ValueError(f"mode sizes must be positive, got {dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def order(self) -> int:
        """Number of modes."""
        return len(self.dims)

    @property
    def size(self) -> int:
        """Total number of entries, prod(dims)."""
        return math.prod(self.dims)


@dataclass(eq=False)
class DenseTensor:
    """Dense real tensor stored as a C-contiguous float64 array.

    ``data[j_1, ..., j_D]`` (0-based) is the entry at multi-index
    ``(j_1, ..., j_D)``.  Use :func:`tensorize` / :func:`vectorize` to move
    between the tensor and its canonical linearization.
    """

    shape: TensorShape
    data: np.ndarray

    def __post_init__(self) -> None:
        data = np.ascontiguousarray(self.data, dtype=np.float64)
        if data.shape != self.shape.dims:
            raise ValueError(
                f"data has shape {data.shape}, expected {self.shape.dims}"
            )
        if not np.all(np.isfinite(data)):
            raise ValueError("tensor entries must be finite")
        self.data = data


def tensorize(x: Sequence[float] | np.ndarray, shape: TensorShape) -> DenseTensor:
    """Fold a vector into a tensor of the given shape.

    Entry ``i`` of ``x`` lands at the multi-index whose digits are the
    mixed-radix expansion of ``i`` with bases ``(d_1, ..., d_D)``, least
    significant digit first.

    Parameters
    ----------
    x : array-like, 1-D
        Vector of length ``shape.size``.
    shape : TensorShape

    Returns
    -------
    DenseTensor
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got ndim={x.ndim}")
    if x.size != shape.size:
        raise ValueError(
            f"vector has length {x.size}, shape {shape.dims} needs {shape.size}"
        )
    return DenseTensor(shape, np.reshape(x, shape.dims, order="F"))


def vectorize(tensor: DenseTensor) -> np.ndarray:
    """Unfold a tensor into its canonical vector (inverse of tensorize)."""
    return np.ravel(tensor.data, order="F")


def outer_product(factors: Sequence[np.ndarray]) -> DenseTensor:
    """Rank-1 tensor with entries ``prod_l f_l[j_l]``.

    The product is accumulated mode by mode in ascending order, so the
    result is bit-for-bit reproducible.
    """
    if len(factors) == 0:
        raise ValueError("need at least one factor")
    vecs = [np.asarray(f, dtype=np.float64) for f in factors]
    for idx, v in enumerate(vecs):
        if v.ndim != 1 or v.size == 0:
            raise ValueError(f"factor {idx} must be a nonempty 1-D vector")
    data = reduce(np.multiply.outer, vecs)
    shape = TensorShape(tuple(v.size for v in vecs))
    return DenseTensor(shape, data)


def inner_product(a: DenseTensor, b: DenseTensor) -> float:
    """Entrywise inner product ``sum_j a_j * b_j``."""
    if a.shape.dims != b.shape.dims:
        raise ValueError(f"shape mismatch: {a.shape.dims} vs {b.shape.dims}")
    return float(np.dot(a.data.ravel(), b.data.ravel()))


def frobenius_norm(tensor: DenseTensor) -> float:
    """Frobenius norm, sqrt of the sum of squared entries."""
    return float(np.linalg.norm(tensor.data.ravel()))


def contract_all_but(
    tensor: DenseTensor, factors: Sequence[np.ndarray | None], mode: int
) -> np.ndarray:
    """Contract every mode except ``mode`` with the given vectors.

    Returns the vector ``w`` of length ``dims[mode]`` with
    ``w[v] = sum over all multi-indices with j_mode = v of
    T[j] * prod_{l != mode} f_l[j_l]``, so that ``<w, v> = <T, outer(f)>``
    when ``f_mode`` is replaced by ``v``.  ``factors[mode]`` is ignored and
    may be None.

    Parameters
    ----------
    tensor : DenseTensor
    factors : sequence of 1-D arrays
        One vector per mode; the entry at position ``mode`` is unused.
    mode : int
        0-based mode to leave free.
    """
    dims = tensor.shape.dims
    D = len(dims)
    if not 0 <= mode < D:
        raise ValueError(f"mode {mode} out of range for order-{D} tensor")
    if len(factors) != D:
        raise ValueError(f"expected {D} factors, got {len(factors)}")
    for l in range(D):
        if l == mode:
            continue
        f = factors[l]
        if f is None or np.ndim(f) != 1 or np.size(f) != dims[l]:
            raise ValueError(
                f"factor {l} must be a vector of length {dims[l]}"
            )
    cur = tensor.data
    # Trailing modes first: for a C-ordered array the last axis is
    # contiguous, so each step is a reshape view plus one matvec.
    for l in range(D - 1, mode, -1):
        cur = cur.reshape(-1, dims[l]) @ np.asarray(factors[l], dtype=np.float64)
    for l in range(0, mode):
        cur = np.asarray(factors[l], dtype=np.float64) @ cur.reshape(dims[l], -1)
    return cur.reshape(dims[mode])
