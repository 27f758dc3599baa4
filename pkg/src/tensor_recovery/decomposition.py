"""Tucker/HOSVD and tensor-train formats with hard-thresholding truncation.

TT cores are order-3 arrays of shape ``(r_{i-1}, n_i, r_i)`` with boundary
ranks 1, so that ``u[mu] = B_1[:, mu_1, :] @ ... @ B_d[:, mu_d, :]``.  All
reshapes of cores use the package-wide first-index-fastest order.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from .core import mode_product, numerical_rank, unfold

__all__ = [
    "TuckerTensor",
    "TTTensor",
    "CanonicalTensor",
    "validate_rank",
    "hosvd",
    "truncate_hosvd",
    "tucker_to_dense",
    "tt_svd",
    "tt_truncate",
    "tt_to_dense",
    "tt_entry",
    "tt_add",
    "tt_scale",
    "left_orthogonalize",
    "right_orthogonalize",
    "canonical_to_tt",
    "canonical_to_dense",
    "multilinear_rank",
    "truncation_bound",
    "tucker_ranks_to_tt",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TuckerTensor:
    """Core tensor contracted with one orthonormal factor per mode.

    ``sigma[i]`` holds the full singular spectrum of the mode-``i``
    unfolding of the tensor that was decomposed (not only the kept part),
    so truncation errors can be recomputed from it.
    """

    core: np.ndarray
    factors: tuple[np.ndarray, ...]
    sigma: tuple[np.ndarray, ...] = ()

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(f.shape[0] for f in self.factors)

    @property
    def ranks(self) -> tuple[int, ...]:
        return tuple(self.core.shape)

    @property
    def order(self) -> int:
        return len(self.factors)

    def to_dense(self) -> np.ndarray:
        return tucker_to_dense(self)


@dataclass(frozen=True)
class TTTensor:
    """Tensor train with optional orthogonality bookkeeping.

    ``ortho`` is ``None``, ``("left", i)`` meaning cores ``j < i`` are
    left-orthonormal, or ``("right", i)`` meaning cores ``j > i`` are
    right-orthonormal.  ``sigma[i]`` are the singular values at bond
    ``i`` recorded by the SVD sweep that produced the train, if any.
    """

    cores: tuple[np.ndarray, ...]
    ortho: tuple[str, int] | None = None
    sigma: tuple[np.ndarray, ...] = field(default=(), compare=False)

    def __post_init__(self):
        cores = tuple(np.asarray(c, dtype=np.float64) for c in self.cores)
        if not cores:
            raise ValueError("a tensor train needs at least one core")
        if cores[0].shape[0] != 1 or cores[-1].shape[2] != 1:
            raise ValueError("boundary ranks of a tensor train must be 1")
        for a, b in zip(cores[:-1], cores[1:]):
            if a.ndim != 3 or b.ndim != 3 or a.shape[2] != b.shape[0]:
                raise ValueError(f"incompatible neighbouring cores {a.shape} and {b.shape}")
        object.__setattr__(self, "cores", cores)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(c.shape[1] for c in self.cores)

    @property
    def ranks(self) -> tuple[int, ...]:
        return tuple(c.shape[2] for c in self.cores[:-1])

    @property
    def order(self) -> int:
        return len(self.cores)

    def to_dense(self) -> np.ndarray:
        return tt_to_dense(self)

    def __getitem__(self, index) -> float:
        return tt_entry(self, index)


@dataclass(frozen=True)
class CanonicalTensor:
    """Sum of ``R`` elementary tensors; ``factors[i]`` has shape ``(n_i, R)``."""

    factors: tuple[np.ndarray, ...]

    @property
    def terms(self) -> int:
        return self.factors[0].shape[1]

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(f.shape[0] for f in self.factors)


def validate_rank(rank: Sequence[int], shape: Sequence[int], fmt: str) -> tuple[int, ...]:
    """Check a rank tuple against a shape and return it as a tuple of ints."""
    rank = tuple(int(r) for r in rank)
    shape = tuple(shape)
    d = len(shape)
    if any(r < 1 for r in rank):
        raise ValueError(f"ranks must be positive, got {rank}")
    if fmt == "tucker":
        if len(rank) != d:
            raise ValueError(f"Tucker rank needs {d} entries, got {rank}")
        if any(r > n for r, n in zip(rank, shape)):
            raise ValueError(f"Tucker rank {rank} exceeds dimensions {shape}")
    elif fmt == "tt":
        if len(rank) != d - 1:
            raise ValueError(f"TT rank needs {d - 1} entries, got {rank}")
        for i, r in enumerate(rank):
            left = int(np.prod(shape[: i + 1]))
            right = int(np.prod(shape[i + 1 :]))
            if r > min(left, right):
                raise ValueError(f"TT rank {r} at bond {i + 1} exceeds min({left}, {right})")
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return rank


# ---------------------------------------------------------------- Tucker


def _mode_svds(u: np.ndarray):
    for i in range(u.ndim):
        mat = unfold(u, (i,))
        left, s, _ = np.linalg.svd(mat, full_matrices=True)
        yield mat.shape, left, s


def hosvd(u: np.ndarray) -> TuckerTensor:
    """Exact HOSVD with numerically detected multilinear ranks.

    A zero tensor yields ranks ``(1, ..., 1)`` and a zero core.
    """
    u = np.asarray(u, dtype=np.float64)
    factors, sigma = [], []
    for shape, left, s in _mode_svds(u):
        r = max(numerical_rank(s, *shape), 1)
        factors.append(left[:, :r])
        sigma.append(s)
    core = u
    for i, f in enumerate(factors):
        core = mode_product(core, f.T, i)
    return TuckerTensor(core, tuple(factors), tuple(sigma))


def truncate_hosvd(u: np.ndarray, rank: Sequence[int]) -> TuckerTensor:
    """Hard thresholding in the Tucker format (truncated HOSVD)."""
    u = np.asarray(u, dtype=np.float64)
    rank = validate_rank(rank, u.shape, "tucker")
    factors, sigma = [], []
    for (_, left, s), r in zip(_mode_svds(u), rank):
        factors.append(left[:, :r])
        sigma.append(s)
    core = u
    for i, f in enumerate(factors):
        core = mode_product(core, f.T, i)
    return TuckerTensor(core, tuple(factors), tuple(sigma))


def tucker_to_dense(t: TuckerTensor) -> np.ndarray:
    out = t.core
    for i, f in enumerate(t.factors):
        out = mode_product(out, f, i)
    return out


# ---------------------------------------------------------------- TT


def _left_unfold(core: np.ndarray) -> np.ndarray:
    a, n, b = core.shape
    return core.reshape(a * n, b, order="F")


def _right_unfold(core: np.ndarray) -> np.ndarray:
    a, n, b = core.shape
    return core.reshape(a, n * b, order="F")


def tt_svd(u: np.ndarray, rank: Sequence[int] | str | None = "exact") -> TTTensor:
    """Left-to-right SVD sweep producing a TT normal form.

    With ``rank="exact"`` (or ``None``) bond ranks are detected
    numerically and the decomposition reproduces ``u``.  With a target
    rank tuple, singular values beyond ``rank[i]`` are discarded at every
    step (hard thresholding).  The returned cores are left-orthonormal
    except the last one.
    """
    u = np.asarray(u, dtype=np.float64)
    shape = u.shape
    d = u.ndim
    exact = rank is None or (isinstance(rank, str) and rank == "exact")
    target = None if exact else validate_rank(rank, shape, "tt")

    cores, sigma = [], []
    r_prev = 1
    v = u.reshape(1, -1, order="F")
    for i in range(d - 1):
        mat = v.reshape(r_prev * shape[i], -1, order="F")
        left, s, right = np.linalg.svd(mat, full_matrices=False)
        if exact:
            r = max(numerical_rank(s, *mat.shape), 1)
        else:
            r = min(target[i], s.size)
        cores.append(left[:, :r].reshape(r_prev, shape[i], r, order="F"))
        sigma.append(s)
        v = s[:r, None] * right[:r]
        r_prev = r
    cores.append(v.reshape(r_prev, shape[-1], 1, order="F"))
    return TTTensor(tuple(cores), ("left", d - 1), tuple(sigma))


def tt_to_dense(t: TTTensor) -> np.ndarray:
    v = t.cores[0].reshape(t.shape[0], -1, order="F")
    for core in t.cores[1:]:
        a, n, b = core.shape
        v = (v @ _right_unfold(core)).reshape(-1, b, order="F")
    return v.reshape(t.shape, order="F")


def tt_entry(t: TTTensor, index: Sequence[int]) -> float:
    """Entry as the matrix product ``B_1(mu_1) ... B_d(mu_d)``."""
    if len(index) != t.order:
        raise IndexError(f"index {tuple(index)} has wrong length for order {t.order}")
    row = np.ones((1, 1))
    for core, mu in zip(t.cores, index):
        if not 0 <= mu < core.shape[1]:
            raise IndexError(f"index {tuple(index)} out of range for shape {t.shape}")
        row = row @ core[:, mu, :]
    return float(row[0, 0])


def left_orthogonalize(t: TTTensor, upto: int | None = None) -> TTTensor:
    """QR sweep making cores ``0..upto-1`` left-orthonormal (default: all but the last)."""
    d = t.order
    upto = d - 1 if upto is None else upto
    cores = list(t.cores)
    for i in range(upto):
        a, n, b = cores[i].shape
        q, r = np.linalg.qr(_left_unfold(cores[i]))
        cores[i] = q.reshape(a, n, q.shape[1], order="F")
        nxt = cores[i + 1]
        cores[i + 1] = np.einsum("ij,jkl->ikl", r, nxt)
    return TTTensor(tuple(cores), ("left", upto))


def right_orthogonalize(t: TTTensor, downto: int = 0) -> TTTensor:
    """LQ sweep making cores ``downto+1..d-1`` right-orthonormal."""
    cores = list(t.cores)
    for i in range(t.order - 1, downto, -1):
        a, n, b = cores[i].shape
        q, r = np.linalg.qr(_right_unfold(cores[i]).T)
        cores[i] = q.T.reshape(q.shape[1], n, b, order="F")
        cores[i - 1] = np.einsum("ijk,kl->ijl", cores[i - 1], r.T)
    return TTTensor(tuple(cores), ("right", downto))


def tt_truncate(t: TTTensor, rank: Sequence[int]) -> TTTensor:
    """TT rounding: hard thresholding computed on the cores.

    Right-orthogonalizes, then runs the left-to-right truncated SVD sweep.
    The bond singular values coincide with those :func:`tt_svd` would see
    on the dense tensor.
    """
    d = t.order
    rank = tuple(int(r) for r in rank)
    if len(rank) != d - 1 or any(r < 1 for r in rank):
        raise ValueError(f"invalid TT rank {rank} for order {d}")
    cores = list(right_orthogonalize(t).cores)
    sigma = []
    for i in range(d - 1):
        a, n, b = cores[i].shape
        left, s, right = np.linalg.svd(_left_unfold(cores[i]), full_matrices=False)
        r = min(rank[i], s.size)
        cores[i] = left[:, :r].reshape(a, n, r, order="F")
        cores[i + 1] = np.einsum("ij,jkl->ikl", s[:r, None] * right[:r], cores[i + 1])
        sigma.append(s)
    return TTTensor(tuple(cores), ("left", d - 1), tuple(sigma))


def tt_add(x: TTTensor, y: TTTensor) -> TTTensor:
    """Formal sum by block concatenation; ranks add."""
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    d = x.order
    if d == 1:
        return TTTensor((x.cores[0] + y.cores[0],))
    cores = []
    for i, (a, b) in enumerate(zip(x.cores, y.cores)):
        if i == 0:
            cores.append(np.concatenate([a, b], axis=2))
        elif i == d - 1:
            cores.append(np.concatenate([a, b], axis=0))
        else:
            ra0, n, ra1 = a.shape
            rb0, _, rb1 = b.shape
            block = np.zeros((ra0 + rb0, n, ra1 + rb1))
            block[:ra0, :, :ra1] = a
            block[ra0:, :, ra1:] = b
            cores.append(block)
    return TTTensor(tuple(cores))


def tt_scale(t: TTTensor, alpha: float) -> TTTensor:
    """Multiply by a scalar; the factor goes into the last core."""
    cores = list(t.cores)
    cores[-1] = alpha * cores[-1]
    return TTTensor(tuple(cores), t.ortho)


def truncation_bound(sigma: Sequence[np.ndarray], rank: Sequence[int]) -> float:
    """Sum over steps of the l2 norm of the discarded singular values."""
    return float(sum(np.sqrt(np.sum(np.asarray(s)[r:] ** 2)) for s, r in zip(sigma, rank)))


# ---------------------------------------------------------------- canonical


def canonical_to_dense(c: CanonicalTensor) -> np.ndarray:
    out = np.zeros(c.shape)
    for k in range(c.terms):
        term = c.factors[0][:, k]
        for f in c.factors[1:]:
            term = np.multiply.outer(term, f[:, k])
        out += term
    return out


def canonical_to_tt(c: CanonicalTensor) -> TTTensor:
    """Exact TT form with all bond ranks equal to the number of terms.

    The first core is a row of the first-mode factors, the last a column,
    and every interior core is diagonal in the term index.
    """
    factors = [np.asarray(f, dtype=np.float64) for f in c.factors]
    d = len(factors)
    R = c.terms
    if d == 1:
        return TTTensor((factors[0].sum(axis=1).reshape(1, -1, 1),))
    cores = [factors[0].reshape(1, -1, R)]
    for f in factors[1:-1]:
        n = f.shape[0]
        core = np.zeros((R, n, R))
        for k in range(R):
            core[k, :, k] = f[:, k]
        cores.append(core)
    cores.append(factors[-1].T.reshape(R, -1, 1))
    return TTTensor(tuple(cores))


# ---------------------------------------------------------------- ranks


def multilinear_rank(u: np.ndarray, fmt: str = "tucker") -> tuple[int, ...]:
    """Numerical ranks of the single-mode (Tucker) or prefix (TT) unfoldings."""
    u = np.asarray(u, dtype=np.float64)
    if fmt == "tucker":
        mats = [unfold(u, (i,)) for i in range(u.ndim)]
    elif fmt == "tt":
        mats = [u.reshape(int(np.prod(u.shape[: i + 1])), -1, order="F") for i in range(u.ndim - 1)]
    else:
        raise ValueError(f"unknown format {fmt!r}")
    ranks = []
    for mat in mats:
        s = np.linalg.svd(mat, compute_uv=False)
        ranks.append(max(numerical_rank(s, *mat.shape), 1))
    return tuple(ranks)


def tucker_ranks_to_tt(rank: Sequence[int], shape: Sequence[int] | None = None) -> tuple[int, ...]:
    """Generic TT ranks of a tensor with the given Tucker rank.

    Bond ``i`` is bounded by both the product of the leading and of the
    trailing Tucker ranks (and by the dimensions, when a shape is given).
    """
    rank = tuple(rank)
    out = []
    for i in range(len(rank) - 1):
        r = min(int(np.prod(rank[: i + 1])), int(np.prod(rank[i + 1 :])))
        if shape is not None:
            r = min(r, int(np.prod(shape[: i + 1])), int(np.prod(shape[i + 1 :])))
        out.append(r)
    return tuple(out)
