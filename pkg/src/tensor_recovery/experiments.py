"""Phase-transition experiments: random instances, sweeps, TRIC probes.

Seeds are hierarchical: trial ``k`` of a sweep with base seed ``s`` draws
its tensor from ``(s, k)`` and, at measurement count ``m``, its map from
``(s, k, m)``.  All grid points therefore share the same tensors, and any
single trial can be reproduced on its own.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .decomposition import tucker_ranks_to_tt, validate_rank
from .generators import gen_random_tt, gen_random_tucker
from .measurement import GaussianMap, SamplingMap, estimate_tric, offsupport_rank_one, theorem2_m
from .recovery import RecoveryConfig, als, rgi, tiht, to_dense

__all__ = [
    "ExperimentSpec",
    "SweepPoint",
    "SweepResult",
    "ProbeRequest",
    "measurement_count",
    "solver_rank",
    "make_instance",
    "make_map",
    "run_trial",
    "run_sweep",
    "sweep_csv",
    "write_sweep",
    "probe_map",
    "write_probe",
    "fmt_float",
    "CSV_COLUMNS",
]

CSV_COLUMNS = ("n_bar", "m", "trials", "successes", "success_rate", "mean_iters_success")
PROBE_COLUMNS = ("m", "draw", "delta_hat")
CALIBRATION_COLUMNS = ("m", "draws", "fraction_within_delta", "median_delta_hat", "max_delta_hat", "bound_m_C1", "implied_C")


def fmt_float(x) -> str:
    """Six significant digits, locale independent; empty for missing values."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return format(float(x), ".6g")


@dataclass
class ExperimentSpec:
    """One phase-transition experiment.

    ``rank`` is the Tucker rank of the generated tensors when
    ``generator == "tucker"`` (also for TT solvers, whose ranks are then
    derived), and the TT rank when ``generator == "matched"`` and
    ``format == "tt"``.
    """

    shape: tuple[int, ...] = (10, 10, 10)
    rank: tuple[int, ...] = (1, 1, 1)
    format: str = "tucker"
    solver: str = "tiht"
    measurement: str = "gaussian"
    grid: tuple[float, ...] = (3.0, 9.0)
    trials: int = 50
    success_threshold: float = 1e-4
    max_iter: int = 5000
    seed: int = 0
    step: str = "steepest"
    residual_tol: float = 1e-6
    generator: str = "tucker"
    projection: str = "hsvd"

    def __post_init__(self):
        self.shape = tuple(int(n) for n in self.shape)
        self.rank = tuple(int(r) for r in self.rank)
        self.grid = tuple(float(g) for g in self.grid)
        if any(not 0 < g <= 100 for g in self.grid):
            raise ValueError(f"grid entries must lie in (0, 100], got {self.grid}")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.success_threshold <= 0:
            raise ValueError("success threshold must be positive")
        if self.format not in ("tucker", "tt"):
            raise ValueError(f"unknown format {self.format!r}")
        if self.solver not in ("tiht", "rgi", "als"):
            raise ValueError(f"unknown solver {self.solver!r}")
        if self.solver == "rgi" and self.format != "tt":
            raise ValueError("the rgi solver needs format 'tt'")
        if self.measurement not in ("gaussian", "sampling"):
            raise ValueError(f"unknown measurement kind {self.measurement!r}")
        if self.generator not in ("tucker", "matched"):
            raise ValueError(f"unknown generator {self.generator!r}")
        gen_fmt = "tt" if (self.generator == "matched" and self.format == "tt") else "tucker"
        validate_rank(self.rank, self.shape, gen_fmt)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown experiment fields: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        out = asdict(self)
        for key in ("shape", "rank", "grid"):
            out[key] = list(out[key])
        return out


@dataclass
class SweepPoint:
    n_bar: float
    m: int
    trials: int
    successes: int
    mean_iters_success: float | None
    max_iters_success: int | None

    @property
    def success_rate(self) -> float:
        return self.successes / self.trials


@dataclass
class SweepResult:
    spec: ExperimentSpec
    points: list[SweepPoint]
    records: list[dict] = field(default_factory=list)

    @property
    def pct_max(self) -> float | None:
        """Largest fraction without a single success."""
        zero = [p.n_bar for p in self.points if p.successes == 0]
        return max(zero) if zero else None

    @property
    def pct_min(self) -> float | None:
        """Smallest fraction with every trial successful."""
        full = [p.n_bar for p in self.points if p.successes == p.trials]
        return min(full) if full else None

    def summary(self) -> dict:
        points = []
        for p in self.points:
            rate = p.success_rate
            band = 2.0 * math.sqrt(rate * (1.0 - rate) / p.trials)
            points.append(
                {
                    "n_bar": p.n_bar,
                    "m": p.m,
                    "trials": p.trials,
                    "successes": p.successes,
                    "success_rate": rate,
                    "band_low": max(0.0, rate - band),
                    "band_high": min(1.0, rate + band),
                    "mean_iters_success": p.mean_iters_success,
                    "max_iters_success": p.max_iters_success,
                }
            )
        return {"spec": self.spec.to_dict(), "pct_max": self.pct_max, "pct_min": self.pct_min, "points": points}


def measurement_count(shape, n_bar: float) -> int:
    """``ceil(N * n_bar / 100)``, computed without binary rounding surprises."""
    size = int(np.prod(shape))
    return int(math.ceil(round(size * n_bar / 100.0, 9)))


def solver_rank(spec: ExperimentSpec) -> tuple[int, ...]:
    if spec.format == "tucker":
        return spec.rank
    if spec.generator == "matched":
        return spec.rank
    return tucker_ranks_to_tt(spec.rank, spec.shape)


def make_instance(spec: ExperimentSpec, trial: int) -> np.ndarray:
    key = (spec.seed, trial)
    if spec.generator == "matched" and spec.format == "tt":
        u, _ = gen_random_tt(spec.shape, spec.rank, key)
    else:
        u, _ = gen_random_tucker(spec.shape, spec.rank, key)
    return u


def make_map(spec: ExperimentSpec, trial: int, m: int):
    key = (spec.seed, trial, m)
    if spec.measurement == "gaussian":
        return GaussianMap(spec.shape, m, key)
    return SamplingMap(spec.shape, m, key)


def run_trial(spec: ExperimentSpec, n_bar: float, trial: int, keep_report: bool = False) -> dict:
    """Generate, measure, solve and score one instance."""
    m = measurement_count(spec.shape, n_bar)
    u = make_instance(spec, trial)
    A = make_map(spec, trial, m)
    b = A.apply(u)
    config = RecoveryConfig(
        format=spec.format,
        rank=solver_rank(spec),
        max_iter=spec.max_iter,
        tol=spec.residual_tol,
        step=spec.step,
        projection=spec.projection,
        seed=spec.seed,
    )
    solve = {"tiht": tiht, "rgi": rgi, "als": als}[spec.solver]
    x, report = solve(A, b, config)
    x = to_dense(x)
    error = float(np.linalg.norm(x - u))
    norm_u = float(np.linalg.norm(u))
    record = {
        "n_bar": n_bar,
        "m": m,
        "trial": trial,
        "seed": [spec.seed, trial],
        "success": bool(error < spec.success_threshold),
        "converged": report.converged,
        "diverged": report.diverged,
        "iterations": report.iterations,
        "true_error": error,
        "relative_error": error / norm_u if norm_u > 0 else error,
        "residual": report.residual_history[-1],
    }
    if keep_report:
        record["report"] = report.to_dict()
        record["config"] = asdict(config)
    return record


def _aggregate(spec: ExperimentSpec, records: list[dict]) -> list[SweepPoint]:
    points = []
    for n_bar in spec.grid:
        rows = [r for r in records if r["n_bar"] == n_bar]
        wins = [r["iterations"] for r in rows if r["success"]]
        points.append(
            SweepPoint(
                n_bar=n_bar,
                m=measurement_count(spec.shape, n_bar),
                trials=len(rows),
                successes=len(wins),
                mean_iters_success=float(np.mean(wins)) if wins else None,
                max_iters_success=int(max(wins)) if wins else None,
            )
        )
    return points


def run_sweep(spec: ExperimentSpec, workers: int = 1) -> SweepResult:
    """Run every (grid point, trial) job; output is independent of ``workers``."""
    jobs = [(n_bar, k) for n_bar in spec.grid for k in range(spec.trials)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(lambda job: run_trial(spec, *job), jobs))
    else:
        records = [run_trial(spec, *job) for job in jobs]
    return SweepResult(spec, _aggregate(spec, records), records)


def sweep_csv(result: SweepResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for p in result.points:
        writer.writerow(
            [fmt_float(p.n_bar), p.m, p.trials, p.successes, fmt_float(p.success_rate), fmt_float(p.mean_iters_success)]
        )
    return buf.getvalue()


def _write(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def write_sweep(result: SweepResult, out) -> dict[str, Path]:
    """Write ``<out>.csv``, ``<out>.summary.json`` and ``<out>.trials.jsonl``."""
    out = Path(out)
    stem = out.with_suffix("") if out.suffix == ".csv" else out
    paths = {
        "csv": stem.with_name(stem.name + ".csv"),
        "summary": stem.with_name(stem.name + ".summary.json"),
        "trials": stem.with_name(stem.name + ".trials.jsonl"),
    }
    _write(paths["csv"], sweep_csv(result))
    _write(paths["summary"], json.dumps(result.summary(), indent=2) + "\n")
    _write(paths["trials"], "".join(json.dumps(r, sort_keys=True) + "\n" for r in result.records))
    return paths


# ---------------------------------------------------------------- TRIC probing


@dataclass
class ProbeRequest:
    shape: tuple[int, ...] = (10, 10, 10)
    rank: tuple[int, ...] = (1, 1)
    format: str = "tt"
    measurement: str = "gaussian"
    m_grid: tuple[int, ...] = (100, 200, 400)
    draws: int = 20
    samples: int = 1000
    seed: int = 0
    delta: float = 0.5
    eps: float = 0.1
    orthonormal: bool = False

    def __post_init__(self):
        self.shape = tuple(int(n) for n in self.shape)
        self.rank = tuple(int(r) for r in self.rank)
        self.m_grid = tuple(int(m) for m in self.m_grid)
        validate_rank(self.rank, self.shape, self.format)
        if self.draws < 1 or self.samples < 1:
            raise ValueError("draws and samples must be positive")
        if self.measurement not in ("gaussian", "sampling"):
            raise ValueError(f"unknown measurement kind {self.measurement!r}")


def probe_map(req: ProbeRequest) -> dict:
    """Empirical TRIC lower bounds across map draws and a calibration table.

    Sampling maps are additionally probed with a unit rank-one tensor
    outside the sampled set, which drives the estimate to 1.
    """
    rows = []
    for m in req.m_grid:
        for draw in range(req.draws):
            key = (req.seed, m, draw)
            if req.measurement == "gaussian":
                A = GaussianMap(req.shape, m, key, orthonormal=req.orthonormal)
                extra = ()
            else:
                A = SamplingMap(req.shape, m, key)
                extra = (offsupport_rank_one(A),) if m < A.size else ()
            delta_hat, _ = estimate_tric(A, req.rank, req.format, req.samples, key, extra=extra)
            rows.append({"m": m, "draw": draw, "delta_hat": delta_hat})

    n, r, d = max(req.shape), max(req.rank), len(req.shape)
    base = theorem2_m(req.format, n, r, d, req.delta, req.eps, 1.0)
    table = []
    for m in req.m_grid:
        vals = np.array([row["delta_hat"] for row in rows if row["m"] == m])
        table.append(
            {
                "m": m,
                "draws": int(vals.size),
                "fraction_within_delta": float(np.mean(vals <= req.delta)),
                "median_delta_hat": float(np.median(vals)),
                "max_delta_hat": float(vals.max()),
                "bound_m_C1": base,
                "implied_C": m / base,
            }
        )
    return {"request": asdict(req), "rows": rows, "calibration": table}


def write_probe(result: dict, out) -> dict[str, Path]:
    """Write ``<out>.csv`` (one line per map draw) and ``<out>.calibration.csv``."""
    out = Path(out)
    stem = out.with_suffix("") if out.suffix == ".csv" else out
    paths = {"csv": stem.with_name(stem.name + ".csv"), "calibration": stem.with_name(stem.name + ".calibration.csv")}

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(PROBE_COLUMNS)
    for row in result["rows"]:
        writer.writerow([row["m"], row["draw"], fmt_float(row["delta_hat"])])
    _write(paths["csv"], buf.getvalue())

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CALIBRATION_COLUMNS)
    for row in result["calibration"]:
        writer.writerow(
            [row["m"], row["draws"]]
            + [fmt_float(row[k]) for k in ("fraction_within_delta", "median_delta_hat", "max_delta_hat")]
            + [row["bound_m_C1"], fmt_float(row["implied_C"])]
        )
    _write(paths["calibration"], buf.getvalue())
    return paths
