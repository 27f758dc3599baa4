"""Linear measurement maps ``A: R^{n_1 x ... x n_d} -> R^m`` and TRIP probing.

Tensors enter the maps through their flat vector in the package's
linearization order, so a dense map is just an ``m x N`` matrix.
"""

from __future__ import annotations

import math
from collections.abc import Sequence

import numpy as np

from .core import as_tensor, vec
from .generators import make_rng, random_unit_tensor

__all__ = [
    "MeasurementMap",
    "MatrixMap",
    "GaussianMap",
    "SamplingMap",
    "IdentityMap",
    "map_from_dict",
    "estimate_tric",
    "offsupport_rank_one",
    "theorem2_m",
]


class MeasurementMap:
    """Common interface: ``apply``, ``adjoint`` and batched application."""

    shape: tuple[int, ...]
    m: int

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def _check_tensor(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        if u.shape != self.shape:
            raise ValueError(f"tensor of shape {u.shape} does not match map shape {self.shape}")
        return u

    def _check_vector(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64).ravel()
        if y.size != self.m:
            raise ValueError(f"measurement vector of length {y.size}, expected {self.m}")
        return y

    def apply(self, u) -> np.ndarray:
        return self.apply_flat(vec(self._check_tensor(u)))

    def adjoint(self, y) -> np.ndarray:
        return as_tensor(self.adjoint_flat(self._check_vector(y)), self.shape)

    def apply_flat(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def adjoint_flat(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def apply_columns(self, frame: np.ndarray) -> np.ndarray:
        """Apply the map to every column of an ``N x p`` matrix of flat tensors."""
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    def __call__(self, u) -> np.ndarray:
        return self.apply(u)


class MatrixMap(MeasurementMap):
    """Map given by an explicit ``m x N`` matrix."""

    def __init__(self, matrix, shape: Sequence[int]):
        self.shape = tuple(int(n) for n in shape)
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[1] != self.size:
            raise ValueError(f"matrix of shape {matrix.shape} does not act on {self.shape}")
        self.matrix = matrix
        self.matrix.setflags(write=False)
        self.m = matrix.shape[0]

    def apply_flat(self, x):
        return self.matrix @ x

    def adjoint_flat(self, y):
        return self.matrix.T @ y

    def apply_columns(self, frame):
        return self.matrix @ frame

    def to_dict(self) -> dict:
        raise TypeError("explicit matrix maps are not serializable; use GaussianMap")


class GaussianMap(MatrixMap):
    """I.i.d. ``N(0, 1/m)`` entries drawn from ``seed``.

    With ``orthonormal=True`` the rows are orthonormalized afterwards
    (requires ``m <= N``); with ``m = N`` this gives an isometry.
    """

    kind = "gaussian"

    def __init__(self, shape: Sequence[int], m: int, seed=0, orthonormal: bool = False):
        shape = tuple(int(n) for n in shape)
        m = int(m)
        if m < 1:
            raise ValueError("need at least one measurement")
        size = int(np.prod(shape))
        rng = make_rng(seed)
        matrix = rng.standard_normal((m, size)) / math.sqrt(m)
        if orthonormal:
            if m > size:
                raise ValueError(f"cannot orthonormalize {m} rows in dimension {size}")
            q, r = np.linalg.qr(matrix.T)
            matrix = (q * np.sign(np.diag(r))).T
        self.seed = seed
        self.orthonormal = orthonormal
        super().__init__(matrix, shape)

    def to_dict(self) -> dict:
        seed = list(self.seed) if isinstance(self.seed, (list, tuple)) else self.seed
        return {
            "kind": self.kind,
            "shape": list(self.shape),
            "m": self.m,
            "seed": seed,
            "orthonormal": self.orthonormal,
        }


class SamplingMap(MeasurementMap):
    """Entry sampling on an index set of ``m`` distinct positions.

    ``indices`` are flat offsets; if omitted they are drawn uniformly
    without replacement from ``seed``.
    """

    kind = "sampling"

    def __init__(self, shape: Sequence[int], m: int | None = None, seed=0, indices=None):
        self.shape = tuple(int(n) for n in shape)
        size = self.size
        if indices is None:
            if m is None or not 1 <= int(m) <= size:
                raise ValueError(f"sample count must lie in [1, {size}], got {m}")
            indices = make_rng(seed).permutation(size)[: int(m)]
        indices = np.asarray(indices, dtype=np.int64).ravel()
        if indices.size == 0:
            raise ValueError("empty sampling set")
        if np.unique(indices).size != indices.size:
            raise ValueError("sampling indices must be distinct")
        if indices.min() < 0 or indices.max() >= size:
            raise IndexError("sampling index out of range")
        self.indices = indices
        self.indices.setflags(write=False)
        self.m = indices.size
        self.seed = seed

    @property
    def multi_indices(self) -> np.ndarray:
        """``(m, d)`` array of 0-based multi-indices."""
        return np.stack(np.unravel_index(self.indices, self.shape, order="F"), axis=1)

    def apply_flat(self, x):
        return x[self.indices]

    def adjoint_flat(self, y):
        out = np.zeros(self.size)
        out[self.indices] = y
        return out

    def apply_columns(self, frame):
        return frame[self.indices]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "shape": list(self.shape),
            "m": self.m,
            "indices": self.indices.tolist(),
        }


class IdentityMap(MeasurementMap):
    """All ``N`` entries in linearization order."""

    kind = "identity"

    def __init__(self, shape: Sequence[int]):
        self.shape = tuple(int(n) for n in shape)
        self.m = self.size

    def apply_flat(self, x):
        return np.array(x, dtype=np.float64)

    def adjoint_flat(self, y):
        return np.array(y, dtype=np.float64)

    def apply_columns(self, frame):
        return np.array(frame, dtype=np.float64)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "shape": list(self.shape)}


def map_from_dict(data: dict) -> MeasurementMap:
    """Rebuild a map serialized with ``to_dict`` (Gaussian maps are regenerated)."""
    kind = data["kind"]
    if kind == "gaussian":
        seed = data["seed"]
        if isinstance(seed, list):
            seed = tuple(seed)
        return GaussianMap(data["shape"], data["m"], seed, data.get("orthonormal", False))
    if kind == "sampling":
        return SamplingMap(data["shape"], indices=data["indices"])
    if kind == "identity":
        return IdentityMap(data["shape"])
    raise ValueError(f"unknown map kind {kind!r}")


def estimate_tric(A: MeasurementMap, rank, fmt: str, samples: int, seed=0, extra=()):
    """Empirical lower bound on the tensor restricted isometry constant.

    Draws ``samples`` unit-norm tensors of the given rank (sample ``k`` uses
    seed ``(seed, k)``), plus any tensors in ``extra`` after normalization,
    and returns ``(max |‖Au‖² − 1|, ratios)`` where ``ratios`` holds
    ``‖Au‖²`` for every probe.
    """
    if samples < 1 and not extra:
        raise ValueError("need at least one probe tensor")
    if isinstance(seed, (list, tuple)):
        key = [int(s) for s in seed]
    else:
        key = [int(seed)]
    probes = [vec(random_unit_tensor(A.shape, rank, fmt, key + [k])) for k in range(samples)]
    for u in extra:
        u = np.asarray(u, dtype=np.float64)
        probes.append(vec(u) / np.linalg.norm(u))
    frame = np.stack(probes, axis=1)
    ratios = np.sum(A.apply_columns(frame) ** 2, axis=0)
    return float(np.max(np.abs(ratios - 1.0))), ratios


def offsupport_rank_one(A: SamplingMap) -> np.ndarray:
    """Unit rank-one coordinate tensor at the first position not sampled by ``A``.

    Its measurements vanish, so any sampling map with ``m < N`` has
    restricted isometry constant 1 at every rank.
    """
    missing = np.setdiff1d(np.arange(A.size), A.indices, assume_unique=True)
    if missing.size == 0:
        raise ValueError("the map samples every entry")
    u = np.zeros(A.size)
    u[missing[0]] = 1.0
    return as_tensor(u, A.shape)


def theorem2_m(fmt: str, n: int, r: int, d: int, delta: float, eps: float, C: float) -> int:
    """Gaussian measurement count sufficient for ``delta_r <= delta`` w.p. ``1 - eps``.

    ``C`` is the unspecified universal constant and must be supplied.
    """
    if min(n, r, d) < 1 or delta <= 0 or eps <= 0 or C <= 0:
        raise ValueError("all parameters must be positive")
    if fmt == "tt":
        first = d * n * r**2 * math.log(d * r)
    elif fmt == "tucker":
        first = (r**d + d * n * r) * math.log(d)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return int(math.ceil(C / delta**2 * max(first, math.log(1.0 / eps))))
