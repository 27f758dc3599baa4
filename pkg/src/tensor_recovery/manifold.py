"""Tangent spaces and retraction on the manifold of fixed-rank tensor trains.

A tangent vector at ``u = U_1 ... U_{d-1} C_d`` (left-orthonormal ``U_i``)
is stored in gauged coordinates

    xi = sum_i  U_1 ... U_{i-1} dX_i V_{i+1} ... V_d

where ``V_j`` are the right-orthonormal cores of the same tensor and every
``dX_i`` with ``i < d`` satisfies ``U_i^T dX_i = 0`` in the left unfolding.
Under these conditions the ``d`` summands are mutually orthogonal and the
coordinates are isometric.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .core import numerical_rank
from .decomposition import (
    TTTensor,
    left_orthogonalize,
    right_orthogonalize,
    tt_add,
    tt_scale,
    tt_to_dense,
    tt_truncate,
)

__all__ = [
    "SingularPointError",
    "OrthoFrames",
    "TTTangent",
    "frames",
    "bond_singular_values",
    "is_full_rank",
    "pad_rank",
    "project_tangent",
    "tangent_terms",
    "tangent_to_dense",
    "tangent_to_tt",
    "gauge_residual",
    "retract",
]

logger = logging.getLogger(__name__)


class SingularPointError(ValueError):
    """Raised when the base point has a bond rank below its nominal rank."""


@dataclass(frozen=True)
class OrthoFrames:
    """Both orthogonal core families of one tensor train.

    ``left[i]`` (``i < d-1``) are left-orthonormal, ``left[-1]`` carries the
    norm; ``right[i]`` (``i > 0``) are right-orthonormal.  ``sigma[i]`` are
    the singular values of bond ``i``.
    """

    left: tuple[np.ndarray, ...]
    right: tuple[np.ndarray, ...]
    sigma: tuple[np.ndarray, ...]

    @property
    def ranks(self) -> tuple[int, ...]:
        return tuple(c.shape[2] for c in self.left[:-1])

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(c.shape[1] for c in self.left)


@dataclass(frozen=True)
class TTTangent:
    base: OrthoFrames
    deltas: tuple[np.ndarray, ...]

    @property
    def shape(self) -> tuple[int, ...]:
        return self.base.shape


def frames(t: TTTensor) -> OrthoFrames:
    """Left- and right-orthonormal core families plus bond singular values."""
    left = left_orthogonalize(t)
    cores = list(left.cores)
    right = [None] * len(cores)
    sigma = [None] * (len(cores) - 1)
    carry = cores[-1]
    for i in range(len(cores) - 1, 0, -1):
        a, n, b = carry.shape
        u, s, vt = np.linalg.svd(carry.reshape(a, n * b, order="F"), full_matrices=False)
        right[i] = vt.reshape(vt.shape[0], n, b, order="F")
        sigma[i - 1] = s
        carry = np.einsum("ijk,kl->ijl", cores[i - 1], u * s)
    right[0] = carry
    return OrthoFrames(tuple(left.cores), tuple(right), tuple(sigma))


def bond_singular_values(t: TTTensor) -> tuple[np.ndarray, ...]:
    return frames(t).sigma


def is_full_rank(fr: OrthoFrames) -> bool:
    for s, core in zip(fr.sigma, fr.left[:-1]):
        a, n, b = core.shape
        if s.size < b or numerical_rank(s, a * n, b) < b:
            return False
    return True


def pad_rank(t: TTTensor, rng: np.random.Generator, scale: float = 1e-8) -> TTTensor:
    """Move a rank-deficient train onto the fixed-rank manifold.

    Adds a random train of the same nominal ranks with norm
    ``scale * ||t||`` (``scale`` for a zero tensor) and rounds back to
    the nominal ranks.  The event is logged.
    """
    ranks = t.ranks
    size = float(np.linalg.norm(tt_to_dense(t)))
    amplitude = scale * (size if size > 0 else 1.0)
    cores = []
    prev = 1
    for i, n in enumerate(t.shape):
        nxt = ranks[i] if i < len(ranks) else 1
        cores.append(rng.standard_normal((prev, n, nxt)))
        prev = nxt
    noise = TTTensor(tuple(cores))
    noise = tt_scale(noise, amplitude / np.linalg.norm(tt_to_dense(noise)))
    logger.info("rank-deficient base point padded with noise of norm %.3g", amplitude)
    return tt_truncate(tt_add(t, noise), ranks)


def _left_interfaces(left: tuple[np.ndarray, ...]) -> list[np.ndarray]:
    """``L[i]`` is the (n_1...n_{i}, r_i) matrix of cores ``0..i-1``; ``L[0]`` is ``[[1]]``."""
    out = [np.ones((1, 1))]
    for core in left[:-1]:
        a, n, b = core.shape
        out.append((out[-1] @ core.reshape(a, n * b, order="F")).reshape(-1, b, order="F"))
    return out


def _right_interfaces(right: tuple[np.ndarray, ...]) -> list[np.ndarray]:
    """``R[i]`` is the (r_{i}, n_{i+1}...n_d) matrix of cores ``i+1..d-1``."""
    d = len(right)
    out = [None] * d
    out[d - 1] = np.ones((1, 1))
    for i in range(d - 1, 0, -1):
        a, n, b = right[i].shape
        out[i - 1] = (right[i].reshape(a * n, b, order="F") @ out[i]).reshape(a, -1, order="F")
    return out


def project_tangent(base, g: np.ndarray) -> TTTangent:
    """Orthogonal projection of a dense tensor onto the tangent space at ``base``.

    ``base`` may be a :class:`TTTensor` or precomputed :class:`OrthoFrames`.
    Raises :class:`SingularPointError` if the base is rank deficient.
    """
    fr = base if isinstance(base, OrthoFrames) else frames(base)
    if not is_full_rank(fr):
        raise SingularPointError(f"base point is rank deficient at nominal ranks {fr.ranks}")
    g = np.asarray(g, dtype=np.float64)
    if g.shape != fr.shape:
        raise ValueError(f"shape mismatch: {g.shape} vs {fr.shape}")
    lefts = _left_interfaces(fr.left)
    rights = _right_interfaces(fr.right)
    flat = g.reshape(-1, order="F")
    deltas = []
    for i, core in enumerate(fr.left):
        a, n, b = core.shape
        mat = flat.reshape(lefts[i].shape[0], -1, order="F")
        part = lefts[i].T @ mat
        part = part.reshape(a * n, -1, order="F") @ rights[i].T
        if i < len(fr.left) - 1:
            q = core.reshape(a * n, b, order="F")
            part = part - q @ (q.T @ part)
        deltas.append(part.reshape(a, n, b, order="F"))
    return TTTangent(fr, tuple(deltas))


def tangent_terms(xi: TTTangent) -> list[np.ndarray]:
    """The ``d`` dense summands of the product-rule expansion."""
    lefts = _left_interfaces(xi.base.left)
    rights = _right_interfaces(xi.base.right)
    shape = xi.shape
    terms = []
    for i, delta in enumerate(xi.deltas):
        a, n, b = delta.shape
        part = lefts[i] @ delta.reshape(a, n * b, order="F")
        part = part.reshape(-1, b, order="F") @ rights[i]
        terms.append(part.reshape(shape, order="F"))
    return terms


def tangent_to_dense(xi: TTTangent) -> np.ndarray:
    return sum(tangent_terms(xi))


def gauge_residual(xi: TTTangent) -> float:
    """Largest violation of ``U_i^T dX_i = 0`` over the gauged cores."""
    worst = 0.0
    for core, delta in zip(xi.base.left[:-1], xi.deltas[:-1]):
        a, n, b = core.shape
        q = core.reshape(a * n, b, order="F")
        dx = delta.reshape(a * n, b, order="F")
        worst = max(worst, float(np.abs(q.T @ dx).max()))
    return worst


def tangent_to_tt(xi: TTTangent, shift: TTTensor | None = None) -> TTTensor:
    """Tangent vector as a train of ranks ``2r`` (``+ base`` when ``shift`` is the base).

    With ``shift`` given, the last core of the base (left-orthogonal
    representation) is added to the last variation, which represents
    ``base + xi``.
    """
    left, right, deltas = xi.base.left, xi.base.right, list(xi.deltas)
    d = len(left)
    if shift is not None:
        deltas[-1] = deltas[-1] + left[-1]
    if d == 1:
        return TTTensor((deltas[0],))
    cores = []
    for i in range(d):
        if i == 0:
            cores.append(np.concatenate([deltas[0], left[0]], axis=2))
        elif i == d - 1:
            cores.append(np.concatenate([right[i], deltas[i]], axis=0))
        else:
            a, n, b = left[i].shape
            block = np.zeros((2 * a, n, 2 * b))
            block[:a, :, :b] = right[i]
            block[a:, :, :b] = deltas[i]
            block[a:, :, b:] = left[i]
            cores.append(block)
    return TTTensor(tuple(cores))


def retract(base: TTTensor, xi: TTTangent) -> TTTensor:
    """Map ``base + xi`` back to the manifold by rounding to the base ranks."""
    summed = tangent_to_tt(xi, shift=base)
    return tt_truncate(summed, base.ranks)
