"""Random low-rank test tensors."""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from .decomposition import TTTensor, TuckerTensor, tt_to_dense, tucker_to_dense, validate_rank

__all__ = ["make_rng", "gen_random_tucker", "gen_random_tt", "random_unit_tensor"]


def make_rng(seed) -> np.random.Generator:
    """Accept an int, a sequence of ints (hierarchical key) or a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, (list, tuple)):
        return np.random.default_rng(np.random.SeedSequence([int(s) for s in seed]))
    return np.random.default_rng(seed)


def gen_random_tucker(shape: Sequence[int], rank: Sequence[int], seed=None):
    """Tucker tensor with a standard normal core and Haar-like factors.

    Factor ``j`` is made of the first ``r_j`` left singular vectors of an
    ``n_j x n_j`` standard normal matrix.  Returns ``(dense, tucker)``.
    """
    shape = tuple(int(n) for n in shape)
    rank = validate_rank(rank, shape, "tucker")
    rng = make_rng(seed)
    core = rng.standard_normal(rank)
    factors = []
    for n, r in zip(shape, rank):
        left, _, _ = np.linalg.svd(rng.standard_normal((n, n)))
        factors.append(left[:, :r])
    t = TuckerTensor(core, tuple(factors))
    return tucker_to_dense(t), t


def gen_random_tt(shape: Sequence[int], rank: Sequence[int], seed=None):
    """Tensor train with standard normal cores.  Returns ``(dense, tt)``."""
    shape = tuple(int(n) for n in shape)
    rank = validate_rank(rank, shape, "tt")
    rng = make_rng(seed)
    full = (1,) + rank + (1,)
    cores = tuple(rng.standard_normal((full[i], n, full[i + 1])) for i, n in enumerate(shape))
    t = TTTensor(cores)
    return tt_to_dense(t), t


def random_unit_tensor(shape, rank, fmt: str, seed=None) -> np.ndarray:
    """Unit-norm dense tensor drawn from the format's generator."""
    if fmt == "tucker":
        u, _ = gen_random_tucker(shape, rank, seed)
    elif fmt == "tt":
        u, _ = gen_random_tt(shape, rank, seed)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return u / np.linalg.norm(u)
