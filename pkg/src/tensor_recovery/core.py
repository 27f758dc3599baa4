"""Dense order-d tensors: index arithmetic, unfoldings, contractions.

Dense tensors are plain ``numpy.ndarray`` objects of dtype float64.  Every
flattening in the package uses the co-lexicographic order (first index
varies fastest, i.e. Fortran order).  With that convention the prefix
unfolding ``U^{1..i}`` is a plain reshape, which the tensor-train code
relies on.

Indices are 0-based in code.
"""

from __future__ import annotations

import csv
from collections.abc import Sequence
from pathlib import Path

import numpy as np

__all__ = [
    "as_tensor",
    "linearize",
    "delinearize",
    "vec",
    "unvec",
    "unfold",
    "fold",
    "inner",
    "norm",
    "mode_product",
    "outer",
    "numerical_rank",
    "write_csv",
    "read_csv",
]


def _check_shape(shape: Sequence[int]) -> tuple[int, ...]:
    shape = tuple(int(n) for n in shape)
    if len(shape) == 0:
        raise ValueError("tensor order must be at least 1")
    if any(n < 1 for n in shape):
        raise ValueError(f"all dimensions must be positive, got {shape}")
    return shape


def as_tensor(values, shape: Sequence[int] | None = None) -> np.ndarray:
    """Return ``values`` as a float64 array, optionally from a flat vector.

    A flat input is interpreted in the package's linearization order.
    """
    arr = np.asarray(values, dtype=np.float64)
    if shape is None:
        return arr
    shape = _check_shape(shape)
    if arr.size != int(np.prod(shape)):
        raise ValueError(f"{arr.size} values do not fill shape {shape}")
    return arr.reshape(shape, order="F")


def linearize(index: Sequence[int], shape: Sequence[int]) -> int:
    """Flat offset of a multi-index, first coordinate fastest."""
    shape = _check_shape(shape)
    if len(index) != len(shape):
        raise IndexError(f"index {tuple(index)} has wrong length for shape {shape}")
    offset = 0
    stride = 1
    for mu, n in zip(index, shape):
        if not 0 <= mu < n:
            raise IndexError(f"index {tuple(index)} out of range for shape {shape}")
        offset += int(mu) * stride
        stride *= n
    return offset


def delinearize(offset: int, shape: Sequence[int]) -> tuple[int, ...]:
    shape = _check_shape(shape)
    total = int(np.prod(shape))
    if not 0 <= offset < total:
        raise IndexError(f"offset {offset} out of range for {total} entries")
    index = []
    for n in shape:
        offset, mu = divmod(offset, n)
        index.append(mu)
    return tuple(index)


def vec(u: np.ndarray) -> np.ndarray:
    """Flat view of ``u`` in linearization order."""
    return np.asarray(u, dtype=np.float64).ravel(order="F")


def unvec(v: np.ndarray, shape: Sequence[int]) -> np.ndarray:
    return as_tensor(v, shape)


def _row_modes(row_modes, d: int, allow_all: bool) -> tuple[tuple[int, ...], tuple[int, ...]]:
    alpha = tuple(int(i) for i in row_modes)
    if not alpha:
        raise ValueError("row mode set must be nonempty")
    if len(set(alpha)) != len(alpha):
        raise ValueError(f"repeated modes in {alpha}")
    if any(not 0 <= i < d for i in alpha):
        raise ValueError(f"modes {alpha} out of range for order {d}")
    if len(alpha) == d and not allow_all:
        raise ValueError("row modes cover all modes; pass allow_all=True for vectorization")
    rest = tuple(i for i in range(d) if i not in alpha)
    return alpha, rest


def unfold(u: np.ndarray, row_modes, allow_all: bool = False) -> np.ndarray:
    """Matricisation ``U^alpha`` of ``u``.

    Rows are indexed by the modes in ``row_modes`` (in the given order),
    columns by the remaining modes in increasing order; both index groups
    are linearized co-lexicographically.
    """
    u = np.asarray(u, dtype=np.float64)
    alpha, rest = _row_modes(row_modes, u.ndim, allow_all)
    rows = int(np.prod([u.shape[i] for i in alpha]))
    return np.transpose(u, alpha + rest).reshape(rows, -1, order="F")


def fold(mat: np.ndarray, row_modes, shape: Sequence[int], allow_all: bool = False) -> np.ndarray:
    """Inverse of :func:`unfold`."""
    shape = _check_shape(shape)
    mat = np.asarray(mat, dtype=np.float64)
    alpha, rest = _row_modes(row_modes, len(shape), allow_all)
    rows = int(np.prod([shape[i] for i in alpha]))
    cols = int(np.prod([shape[i] for i in rest])) if rest else 1
    if mat.ndim == 1 and cols == 1:
        mat = mat.reshape(-1, 1)
    if mat.shape != (rows, cols):
        raise ValueError(f"matrix of shape {mat.shape} does not fold into {shape} with rows {alpha}")
    perm = alpha + rest
    permuted = mat.reshape([shape[i] for i in perm], order="F")
    return np.transpose(permuted, np.argsort(perm))


def _same_shape(u: np.ndarray, v: np.ndarray) -> None:
    if u.shape != v.shape:
        raise ValueError(f"shape mismatch: {u.shape} vs {v.shape}")


def inner(u: np.ndarray, v: np.ndarray) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    _same_shape(u, v)
    return float(np.dot(u.ravel(order="F"), v.ravel(order="F")))


def norm(u: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(u, dtype=np.float64).ravel()))


def mode_product(u: np.ndarray, mat: np.ndarray, mode: int) -> np.ndarray:
    """Contract mode ``mode`` of ``u`` with the columns of ``mat``.

    The result has ``mat.shape[0]`` in place of ``u.shape[mode]``.
    """
    u = np.asarray(u, dtype=np.float64)
    mat = np.atleast_2d(np.asarray(mat, dtype=np.float64))
    if not 0 <= mode < u.ndim:
        raise ValueError(f"mode {mode} out of range for order {u.ndim}")
    if mat.shape[1] != u.shape[mode]:
        raise ValueError(
            f"matrix with {mat.shape[1]} columns cannot act on mode {mode} of size {u.shape[mode]}"
        )
    out = np.tensordot(mat, u, axes=(1, mode))
    return np.moveaxis(out, 0, mode)


def outer(*vectors) -> np.ndarray:
    """Elementary tensor ``v1 ⊗ v2 ⊗ ... ⊗ vd``."""
    out = np.asarray(vectors[0], dtype=np.float64)
    for v in vectors[1:]:
        out = np.multiply.outer(out, np.asarray(v, dtype=np.float64))
    return out


def numerical_rank(singular_values: np.ndarray, rows: int, cols: int) -> int:
    """Count singular values above ``max(rows, cols) * eps * sigma_1``.

    Returns 0 for an all-zero spectrum; callers apply the rank-1 convention
    for zero tensors themselves.
    """
    s = np.asarray(singular_values, dtype=np.float64)
    if s.size == 0 or s[0] <= 0.0:
        return 0
    tol = max(rows, cols) * np.finfo(np.float64).eps * s[0]
    return int(np.count_nonzero(s > tol))


def write_csv(u: np.ndarray, path) -> None:
    """Debug dump: one line ``mu_1,...,mu_d,value`` per entry (1-based indices)."""
    u = np.asarray(u, dtype=np.float64)
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"mu{i + 1}" for i in range(u.ndim)] + ["value"])
        for offset, value in enumerate(u.ravel(order="F")):
            idx = delinearize(offset, u.shape)
            writer.writerow([mu + 1 for mu in idx] + [repr(float(value))])


def read_csv(path, shape: Sequence[int] | None = None) -> np.ndarray:
    """Read a tensor written by :func:`write_csv`.

    Missing entries are zero.  The shape defaults to the largest index seen
    in each mode.
    """
    rows = []
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for line in reader:
            if line:
                rows.append(([int(x) - 1 for x in line[:-1]], float(line[-1])))
    if shape is None:
        if not rows:
            raise ValueError(f"{path}: no entries and no shape given")
        d = len(rows[0][0])
        shape = tuple(max(idx[i] for idx, _ in rows) + 1 for i in range(d))
    u = np.zeros(_check_shape(shape))
    for idx, value in rows:
        if len(idx) != u.ndim or any(not 0 <= mu < n for mu, n in zip(idx, u.shape)):
            raise IndexError(f"{path}: index {tuple(i + 1 for i in idx)} out of range for {u.shape}")
        u[tuple(idx)] = value
    return u
