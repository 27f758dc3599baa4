"""Reference computations used by the tests.

Everything here is written directly against numpy and index loops so it
shares no code path with the package under test.
"""

import itertools

import numpy as np


def colex_indices(shape):
    """All multi-indices with the first coordinate varying fastest."""
    for rev in itertools.product(*[range(n) for n in reversed(shape)]):
        yield tuple(reversed(rev))


def enumerate_offset(index, shape):
    for k, idx in enumerate(colex_indices(shape)):
        if idx == tuple(index):
            return k
    raise IndexError(index)


def unfold_by_loops(u, alpha):
    """Matricisation built entry by entry from the index convention."""
    d = u.ndim
    rest = [i for i in range(d) if i not in alpha]
    rows = list(colex_indices([u.shape[i] for i in alpha]))
    cols = list(colex_indices([u.shape[i] for i in rest])) if rest else [()]
    out = np.zeros((len(rows), len(cols)))
    for a, ridx in enumerate(rows):
        for b, cidx in enumerate(cols):
            full = [0] * d
            for mode, mu in zip(alpha, ridx):
                full[mode] = mu
            for mode, mu in zip(rest, cidx):
                full[mode] = mu
            out[a, b] = u[tuple(full)]
    return out


def inner_by_loops(u, v):
    total = 0.0
    for idx in itertools.product(*[range(n) for n in u.shape]):
        total += u[idx] * v[idx]
    return total


def outer_sum(factors):
    """Dense sum of elementary tensors; ``factors[i]`` is ``(n_i, R)``."""
    shape = [f.shape[0] for f in factors]
    out = np.zeros(shape)
    for idx in itertools.product(*[range(n) for n in shape]):
        out[idx] = sum(np.prod([f[mu, k] for f, mu in zip(factors, idx)]) for k in range(factors[0].shape[1]))
    return out


def tt_entry_by_loops(cores, index):
    """Entry of a tensor train by explicit summation over bond indices."""
    ranks = [c.shape[0] for c in cores] + [1]
    total = 0.0
    for ks in itertools.product(*[range(r) for r in ranks[1:-1]]):
        ks = (0,) + ks + (0,)
        term = 1.0
        for i, core in enumerate(cores):
            term *= core[ks[i], index[i], ks[i + 1]]
        total += term
    return total


# ---------------------------------------------------------------- best approximation


def _top_left(mat, r):
    u, _, _ = np.linalg.svd(mat, full_matrices=False)
    return u[:, :r]


def best_tt3_error(u, rank, restarts, rng, iters=60):
    """Smallest error found by alternating exact block optima for order-3 TT.

    Alternates between the first-mode basis ``P`` (n1 x r1) and the
    last-mode basis ``W`` (n3 x r2); for each fixed one the remaining
    problem is a matrix best approximation solved by SVD.
    """
    n1, n2, n3 = u.shape
    r1, r2 = rank
    best = np.inf
    for _ in range(restarts):
        p = np.linalg.qr(rng.standard_normal((n1, r1)))[0]
        for _ in range(iters):
            reduced = np.einsum("ai,abc->ibc", p, u).reshape(r1 * n2, n3)
            w = _top_left(reduced.T, r2)
            reduced = np.einsum("abc,ck->abk", u, w).reshape(n1, n2 * r2)
            p = _top_left(reduced, r1)
        core = np.einsum("ai,abc->ibc", p, u).reshape(r1 * n2, n3)
        s = np.linalg.svd(core, compute_uv=False)
        approx_sq = np.sum(s[:r2] ** 2)
        err = np.sqrt(max(np.sum(u * u) - approx_sq, 0.0))
        best = min(best, err)
    return best


def best_tucker_error(u, rank, restarts, rng, iters=60):
    """Higher-order orthogonal iteration from random orthonormal starts."""
    d = u.ndim
    best = np.inf

    def project_all_but(factors, skip):
        out = u
        for j in range(d):
            if j != skip:
                out = np.moveaxis(np.tensordot(factors[j].T, out, axes=(1, j)), 0, j)
        return out

    for _ in range(restarts):
        factors = [np.linalg.qr(rng.standard_normal((n, r)))[0] for n, r in zip(u.shape, rank)]
        for _ in range(iters):
            for i in range(d):
                w = project_all_but(factors, i)
                mat = np.moveaxis(w, i, 0).reshape(u.shape[i], -1)
                factors[i] = _top_left(mat, rank[i])
        core = project_all_but(factors, d - 1)
        core = np.tensordot(factors[d - 1].T, core, axes=(1, d - 1))
        err = np.sqrt(max(np.sum(u * u) - np.sum(core * core), 0.0))
        best = min(best, err)
    return best


# ---------------------------------------------------------------- tangent space


def tangent_projector(cores):
    """Orthogonal projector onto the span of all first-order core variations.

    The tensor is multilinear in its cores, so the derivative along a
    variation of core ``i`` is the train with core ``i`` replaced by that
    variation.  Returns an ``N x N`` matrix acting on flat (first index
    fastest) tensors.
    """
    shape = [c.shape[1] for c in cores]
    cols = []
    for i, core in enumerate(cores):
        for flat in range(core.size):
            e = np.zeros(core.size)
            e[flat] = 1.0
            varied = list(cores)
            varied[i] = e.reshape(core.shape)
            dense = np.zeros(shape)
            for idx in colex_indices(shape):
                dense[idx] = tt_entry_by_loops(varied, idx)
            cols.append(dense.ravel(order="F"))
    jac = np.stack(cols, axis=1)
    left, s, _ = np.linalg.svd(jac, full_matrices=False)
    k = int(np.sum(s > 1e-10 * s[0]))
    q = left[:, :k]
    return q @ q.T, k
