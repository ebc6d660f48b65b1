"""Dense multiway-array algebra: unfoldings, mode products, and products of vectors.

Tensors are plain ``numpy.ndarray`` objects in row-major (C) layout, first
index slowest.  Modes are indexed from zero.  The mode-``m`` unfolding has
``shape[m]`` rows and enumerates the remaining indices in increasing mode
order with the first remaining index varying fastest; ``fold`` inverts
exactly that layout.  With this convention, the row-major vectorization of
a superdiagonal core multiplied along every mode equals the column-wise
Khatri-Rao product of the factors times the core diagonal.
"""

from __future__ import annotations

from functools import reduce
from typing import Sequence

import numpy as np
from scipy.linalg import khatri_rao as _scipy_khatri_rao

__all__ = [
    "unfold",
    "fold",
    "mode_product",
    "outer_rank1",
    "khatri_rao",
    "concat_mode",
    "superdiagonal",
]


def _check_mode(ndim: int, mode: int) -> None:
    if not 0 <= mode < ndim:
        raise ValueError(f"mode {mode} out of range for a {ndim}-way tensor")


def unfold(tensor: np.ndarray, mode: int) -> np.ndarray:
    """Matricize ``tensor`` along ``mode``.

    Parameters
    ----------
    tensor : ndarray
        K-way array.
    mode : int
        Mode whose fibers become columns, ``0 <= mode < K``.

    Returns
    -------
    ndarray
        Matrix of shape ``(shape[mode], prod(other dims))``.
    """
    t = np.asarray(tensor)
    _check_mode(t.ndim, mode)
    return np.reshape(np.moveaxis(t, mode, 0), (t.shape[mode], -1), order="F")


def fold(matrix: np.ndarray, mode: int, shape: Sequence[int]) -> np.ndarray:
    """Invert :func:`unfold`: rebuild the tensor of ``shape`` from its unfolding."""
    shape = tuple(int(n) for n in shape)
    _check_mode(len(shape), mode)
    mat = np.asarray(matrix)
    rest = shape[:mode] + shape[mode + 1 :]
    expected = (shape[mode], int(np.prod(rest, dtype=np.int64)))
    if mat.shape != expected:
        raise ValueError(f"matrix of shape {mat.shape} cannot fold into {shape} along mode {mode}")
    t = np.reshape(mat, (shape[mode],) + rest, order="F")
    return np.moveaxis(t, 0, mode)


def mode_product(tensor: np.ndarray, matrix: np.ndarray, mode: int) -> np.ndarray:
    """Multiply ``tensor`` along ``mode`` by ``matrix``.

    Equivalent to folding ``matrix @ unfold(tensor, mode)`` back into place;
    the contraction is carried out directly so no unfolding is materialized.
    """
    t = np.asarray(tensor)
    u = np.asarray(matrix)
    _check_mode(t.ndim, mode)
    if u.ndim != 2 or u.shape[1] != t.shape[mode]:
        raise ValueError(
            f"matrix of shape {u.shape} does not act on mode {mode} of length {t.shape[mode]}"
        )
    return np.moveaxis(np.tensordot(u, t, axes=(1, mode)), 0, mode)


def outer_rank1(vectors: Sequence[np.ndarray]) -> np.ndarray:
    """Outer product of one vector per mode, yielding a rank-1 tensor."""
    vecs = [np.asarray(v) for v in vectors]
    if not vecs:
        raise ValueError("outer_rank1 needs at least one vector")
    if any(v.ndim != 1 for v in vecs):
        raise ValueError("outer_rank1 expects 1-D factors")
    return reduce(np.multiply.outer, vecs)


def khatri_rao(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Column-wise Kronecker product of two matrices with equal column counts."""
    a = np.atleast_2d(np.asarray(a))
    b = np.atleast_2d(np.asarray(b))
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"column-count mismatch: {a.shape[1]} vs {b.shape[1]}")
    return _scipy_khatri_rao(a, b)


def concat_mode(parts: Sequence[np.ndarray], mode: int) -> np.ndarray:
    """Concatenate tensors along ``mode`` in argument order.

    ``mode == ndim`` appends a fresh trailing mode, stacking equal-shape
    parts (used to collect snapshots); otherwise the parts must agree on
    every mode except ``mode``.
    """
    arrs = [np.asarray(p) for p in parts]
    if not arrs:
        raise ValueError("concat_mode needs at least one part")
    ndim = arrs[0].ndim
    if any(a.ndim != ndim for a in arrs):
        raise ValueError("parts must have the same number of modes")
    if mode == ndim:
        if any(a.shape != arrs[0].shape for a in arrs):
            raise ValueError("appending a new mode requires identical part shapes")
        return np.stack(arrs, axis=mode)
    _check_mode(ndim, mode)
    for a in arrs:
        if a.shape[:mode] + a.shape[mode + 1 :] != arrs[0].shape[:mode] + arrs[0].shape[mode + 1 :]:
            raise ValueError("part shapes differ on a non-concatenation mode")
    return np.concatenate(arrs, axis=mode)


def superdiagonal(values: np.ndarray, ndim: int) -> np.ndarray:
    """Tensor with ``values`` on the superdiagonal and zeros elsewhere."""
    values = np.asarray(values)
    if values.ndim != 1:
        raise ValueError("superdiagonal expects a 1-D value vector")
    if ndim < 1:
        raise ValueError("ndim must be at least 1")
    n = values.shape[0]
    out = np.zeros((n,) * ndim, dtype=np.result_type(values.dtype, np.float64))
    out[(np.arange(n),) * ndim] = values
    return out
