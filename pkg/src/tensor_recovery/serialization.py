"""JSON layouts for tensors in Tucker, TT and dense form.

Every array is stored as ``{"shape": [...], "values": [...]}`` with the
values flattened first-index-fastest (``"ordering": "F"``)::

    {"format": "tt", "shape": [n1, ..., nd], "ranks": [r1, ..., r_{d-1}],
     "ordering": "F", "cores": [array, ...]}

    {"format": "tucker", "shape": [...], "ranks": [...], "ordering": "F",
     "core": array, "factors": [array, ...], "sigma": [[...], ...]}

    {"format": "dense", "shape": [...], "ordering": "F", "values": [...]}
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .decomposition import TTTensor, TuckerTensor

__all__ = ["to_json_dict", "from_json_dict", "save", "load"]

ORDERING = "F"


def _pack(arr: np.ndarray) -> dict:
    arr = np.asarray(arr, dtype=np.float64)
    return {"shape": list(arr.shape), "values": arr.ravel(order="F").tolist()}


def _unpack(data: dict) -> np.ndarray:
    return np.asarray(data["values"], dtype=np.float64).reshape(data["shape"], order="F")


def to_json_dict(t) -> dict:
    if isinstance(t, TTTensor):
        return {
            "format": "tt",
            "shape": list(t.shape),
            "ranks": list(t.ranks),
            "ordering": ORDERING,
            "cores": [_pack(c) for c in t.cores],
        }
    if isinstance(t, TuckerTensor):
        return {
            "format": "tucker",
            "shape": list(t.shape),
            "ranks": list(t.ranks),
            "ordering": ORDERING,
            "core": _pack(t.core),
            "factors": [_pack(f) for f in t.factors],
            "sigma": [np.asarray(s).tolist() for s in t.sigma],
        }
    arr = np.asarray(t, dtype=np.float64)
    return {"format": "dense", "shape": list(arr.shape), "ordering": ORDERING, "values": arr.ravel(order="F").tolist()}


def from_json_dict(data: dict):
    if data.get("ordering", ORDERING) != ORDERING:
        raise ValueError(f"unsupported ordering {data['ordering']!r}")
    fmt = data.get("format")
    if fmt == "tt":
        return TTTensor(tuple(_unpack(c) for c in data["cores"]))
    if fmt == "tucker":
        sigma = tuple(np.asarray(s, dtype=np.float64) for s in data.get("sigma", []))
        return TuckerTensor(_unpack(data["core"]), tuple(_unpack(f) for f in data["factors"]), sigma)
    if fmt == "dense":
        return np.asarray(data["values"], dtype=np.float64).reshape(data["shape"], order="F")
    raise ValueError(f"unknown tensor format {fmt!r}")


def save(t, path) -> None:
    Path(path).write_text(json.dumps(to_json_dict(t)))


def load(path):
    return from_json_dict(json.loads(Path(path).read_text()))
