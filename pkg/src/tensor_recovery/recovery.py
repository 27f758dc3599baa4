"""Low-rank tensor recovery from linear measurements.

Three solvers minimize ``J(v) = 0.5 * ||A v - b||^2`` over tensors of a
fixed Tucker or TT rank:

* :func:`tiht` - gradient step in the ambient space, then hard thresholding.
* :func:`rgi` - gradient step projected onto the tangent space of the
  current iterate, then a retraction (TT only).
* :func:`als` - block Gauss-Seidel over the components of the format.

Convergence is declared on the measurement residual only.  When the true
tensor is passed as ``truth`` the solvers additionally record the error
history and check ``||u^{n+1} - y^{n+1}|| <= ||u - y^{n+1}||`` at every
step; this is telemetry and never changes the iteration.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from functools import reduce

import numpy as np

from .core import mode_product, vec
from .decomposition import (
    TTTensor,
    TuckerTensor,
    multilinear_rank,
    right_orthogonalize,
    truncate_hosvd,
    tt_svd,
    tt_to_dense,
    tucker_to_dense,
    validate_rank,
)
from .generators import make_rng
from .manifold import frames, is_full_rank, pad_rank, project_tangent, retract, tangent_to_dense
from .measurement import IdentityMap, MeasurementMap

__all__ = [
    "RecoveryConfig",
    "RecoveryReport",
    "objective",
    "hard_threshold",
    "to_dense",
    "fit_rate",
    "tiht",
    "rgi",
    "als",
    "als_refine_step",
]

logger = logging.getLogger(__name__)


@dataclass
class RecoveryConfig:
    """Solver settings.

    ``tol`` is relative: a run converges once ``||A x - b|| <= tol * ||b||``.
    ``step`` is ``"fixed"`` (use ``alpha``) or ``"steepest"``
    (``alpha_n = ||g||^2 / ||A g||^2``).  ``init`` is ``"adjoint"``
    (``H_r(A^* b)``), ``"zero"`` or ``"given"``.  ``projection`` selects
    the TIHT thresholding operator: ``"hsvd"`` or ``"als"`` (one ALS
    half-sweep from the previous iterate).
    """

    format: str = "tucker"
    rank: tuple[int, ...] = (1, 1, 1)
    max_iter: int = 5000
    tol: float = 1e-6
    step: str = "fixed"
    alpha: float = 1.0
    init: str = "adjoint"
    projection: str = "hsvd"
    divergence: float = 1e3
    seed: int = 0
    debug: bool = False

    def __post_init__(self):
        self.rank = tuple(int(r) for r in self.rank)
        if self.format not in ("tucker", "tt"):
            raise ValueError(f"unknown format {self.format!r}")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.tol <= 0 or self.alpha <= 0 or self.divergence <= 0:
            raise ValueError("tolerances and step size must be positive")
        if self.step not in ("fixed", "steepest"):
            raise ValueError(f"unknown step rule {self.step!r}")
        if self.init not in ("adjoint", "zero", "given"):
            raise ValueError(f"unknown init rule {self.init!r}")
        if self.projection not in ("hsvd", "als"):
            raise ValueError(f"unknown projection {self.projection!r}")


@dataclass
class RecoveryReport:
    converged: bool = False
    diverged: bool = False
    iterations: int = 0
    residual_history: list[float] = field(default_factory=list)
    error_history: list[float] = field(default_factory=list)
    objective_history: list[float] = field(default_factory=list)
    condA_checked: int = 0
    condA_violations: int = 0
    condA_first_violation: int | None = None
    rate_estimate: float | None = None
    singular_repairs: int = 0
    rank_deficient_solves: int = 0
    monotonicity_violations: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def objective(A: MeasurementMap, v: np.ndarray, b: np.ndarray) -> float:
    r = A.apply(v) - np.asarray(b, dtype=np.float64)
    return 0.5 * float(r @ r)


def to_dense(t) -> np.ndarray:
    if isinstance(t, TuckerTensor):
        return tucker_to_dense(t)
    if isinstance(t, TTTensor):
        return tt_to_dense(t)
    return np.asarray(t, dtype=np.float64)


def hard_threshold(y: np.ndarray, fmt: str, rank):
    """``H_r(y)`` in the requested format; returns ``(format_tensor, dense)``."""
    t = truncate_hosvd(y, rank) if fmt == "tucker" else tt_svd(y, rank)
    return t, to_dense(t)


def fit_rate(values, start: int | None = None, stop: int | None = None) -> float | None:
    """Geometric rate ``rho`` from a least-squares fit of ``log(values)``."""
    vals = np.asarray(values[start:stop], dtype=np.float64)
    keep = vals > 0
    if np.count_nonzero(keep) < 2:
        return None
    n = np.arange(vals.size)[keep]
    slope = np.polyfit(n, np.log(vals[keep]), 1)[0]
    return float(math.exp(slope))


def _tail_rate(report: RecoveryReport) -> float | None:
    hist = report.error_history or report.residual_history
    if len(hist) < 3:
        return None
    return fit_rate(hist, len(hist) // 2)


def _ranks_within(x: np.ndarray, fmt: str, rank) -> bool:
    return all(a <= b for a, b in zip(multilinear_rank(x, fmt), rank))


def _step_size(A, g, config, direction=None) -> float:
    if config.step == "fixed":
        return config.alpha
    d = g if direction is None else direction
    ad = A.apply(d)
    denom = float(ad @ ad)
    if denom == 0.0:
        return config.alpha
    return float(np.sum(d * d)) / denom


def _check_condA(report, n, x_new, y, truth):
    report.condA_checked += 1
    if np.linalg.norm(x_new - y) > np.linalg.norm(truth - y):
        report.condA_violations += 1
        if report.condA_first_violation is None:
            report.condA_first_violation = n


def tiht(A: MeasurementMap, b, config: RecoveryConfig, init=None, truth=None, callback=None):
    """Tensor iterative hard thresholding.

    Iterates ``y = x + alpha * A^*(b - A x)``, ``x = R(y)`` where ``R`` is
    the truncated HOSVD / TT-SVD (or an ALS half-sweep when
    ``config.projection == "als"``).  ``callback(n, x, y, x_new)`` is
    invoked after every step.  Returns ``(format_tensor, report)``.
    """
    b = np.asarray(b, dtype=np.float64)
    rank = validate_rank(config.rank, A.shape, config.format)
    norm_b = float(np.linalg.norm(b))
    report = RecoveryReport()

    if init is not None:
        x_fmt = init if isinstance(init, (TuckerTensor, TTTensor)) else None
        x = to_dense(init)
        if x_fmt is None:
            x_fmt, x = hard_threshold(x, config.format, rank)
    elif config.init == "zero":
        x_fmt, x = None, np.zeros(A.shape)
    else:
        x_fmt, x = hard_threshold(A.adjoint(b), config.format, rank)

    def project(y, current):
        if config.projection == "als" and current is not None:
            new = als_refine_step(y, current)
            return new, to_dense(new)
        return hard_threshold(y, config.format, rank)

    res = b - A.apply(x)
    report.residual_history.append(float(np.linalg.norm(res)))
    if truth is not None:
        report.error_history.append(float(np.linalg.norm(x - truth)))

    for n in range(config.max_iter):
        if report.residual_history[-1] <= config.tol * norm_b:
            report.converged = True
            break
        g = A.adjoint(res)
        alpha = _step_size(A, g, config)
        y = x + alpha * g
        x_fmt, x_new = project(y, x_fmt)
        if truth is not None:
            _check_condA(report, n, x_new, y, truth)
        if config.debug and not _ranks_within(x_new, config.format, rank):
            raise AssertionError(f"iterate {n + 1} exceeds rank {rank}")
        if callback is not None:
            callback(n, x, y, x_new)
        x = x_new
        res = b - A.apply(x)
        report.iterations = n + 1
        report.residual_history.append(float(np.linalg.norm(res)))
        if truth is not None:
            report.error_history.append(float(np.linalg.norm(x - truth)))
        if report.residual_history[-1] > config.divergence * norm_b:
            report.diverged = True
            logger.info("TIHT diverged at iteration %d", n + 1)
            break
    else:
        report.converged = report.residual_history[-1] <= config.tol * norm_b

    report.rate_estimate = _tail_rate(report)
    if x_fmt is None:
        x_fmt, _ = hard_threshold(x, config.format, rank)
    return x_fmt, report


def rgi(A: MeasurementMap, b, config: RecoveryConfig, init=None, truth=None, callback=None):
    """Riemannian gradient iteration on fixed-rank tensor trains.

    ``x_{n+1} = R(x_n, P_{T_{x_n}}(alpha * A^*(b - A x_n)))`` with the
    rounding retraction.  Rank-deficient iterates are padded back onto the
    manifold (counted in ``report.singular_repairs``).
    """
    if config.format != "tt":
        raise ValueError("RGI is implemented for the TT format only")
    b = np.asarray(b, dtype=np.float64)
    rank = validate_rank(config.rank, A.shape, "tt")
    norm_b = float(np.linalg.norm(b))
    rng = make_rng([config.seed, 0x5247])
    report = RecoveryReport()

    if init is None:
        x_tt = tt_svd(A.adjoint(b), rank)
    elif isinstance(init, TTTensor):
        x_tt = init
    else:
        x_tt = tt_svd(to_dense(init), rank)
    if x_tt.ranks != rank:
        x_tt = tt_svd(tt_to_dense(x_tt), rank)

    def on_manifold(t):
        fr = frames(t)
        if fr.ranks != rank or not is_full_rank(fr):
            t = pad_rank(t if t.ranks == rank else tt_svd(tt_to_dense(t), rank), rng)
            report.singular_repairs += 1
            fr = frames(t)
        return t, fr

    x_tt, fr = on_manifold(x_tt)
    x = tt_to_dense(x_tt)
    res = b - A.apply(x)
    report.residual_history.append(float(np.linalg.norm(res)))
    if truth is not None:
        report.error_history.append(float(np.linalg.norm(x - truth)))

    for n in range(config.max_iter):
        if report.residual_history[-1] <= config.tol * norm_b:
            report.converged = True
            break
        g = A.adjoint(res)
        xi = project_tangent(fr, g)
        pg = tangent_to_dense(xi)
        alpha = _step_size(A, g, config, direction=pg)
        xi = type(xi)(xi.base, tuple(alpha * dx for dx in xi.deltas))
        x_tt = retract(x_tt, xi)
        x_tt, fr = on_manifold(x_tt)
        x_new = tt_to_dense(x_tt)
        if truth is not None:
            _check_condA(report, n, x_new, x + alpha * g, truth)
        if callback is not None:
            callback(n, x, x + alpha * g, x_new)
        x = x_new
        res = b - A.apply(x)
        report.iterations = n + 1
        report.residual_history.append(float(np.linalg.norm(res)))
        if truth is not None:
            report.error_history.append(float(np.linalg.norm(x - truth)))
        if report.residual_history[-1] > config.divergence * norm_b:
            report.diverged = True
            logger.info("RGI diverged at iteration %d", n + 1)
            break
    else:
        report.converged = report.residual_history[-1] <= config.tol * norm_b

    report.rate_estimate = _tail_rate(report)
    return x_tt, report


# ---------------------------------------------------------------- ALS


def _tt_frame(left_iface: np.ndarray, n: int, right_iface: np.ndarray) -> np.ndarray:
    """Flat tensors spanned by one TT core with the others fixed: ``N x (a n b)``."""
    a = left_iface.shape[1]
    b = right_iface.shape[0]
    frame = np.einsum("pa,mq,bs->pmsaqb", left_iface, np.eye(n), right_iface)
    rows = left_iface.shape[0] * n * right_iface.shape[1]
    return frame.reshape(rows, a * n * b, order="F")


def _tt_left_iface(cores, t):
    out = np.ones((1, 1))
    for core in cores[:t]:
        a, n, b = core.shape
        out = (out @ core.reshape(a, n * b, order="F")).reshape(-1, b, order="F")
    return out


def _tt_right_iface(cores, t):
    out = np.ones((1, 1))
    for core in reversed(cores[t + 1 :]):
        a, n, b = core.shape
        out = (core.reshape(a * n, b, order="F") @ out).reshape(a, -1, order="F")
    return out


def _tucker_core_frame(factors) -> np.ndarray:
    return reduce(np.kron, reversed(factors))


def _tucker_factor_frame(core, factors, i) -> np.ndarray:
    w = core
    for j, f in enumerate(factors):
        if j != i:
            w = mode_product(w, f, j)
    d = w.ndim
    n = factors[i].shape[0]
    wm = np.moveaxis(w, i, -1)
    frame = np.einsum("...k,pq->...pqk", wm, np.eye(n))
    frame = np.moveaxis(frame, d - 1, i)
    rows = int(np.prod(frame.shape[:d]))
    return frame.reshape(rows, -1, order="F")


class _BlockSolver:
    """Least-squares micro-steps with objective bookkeeping."""

    def __init__(self, A, b, report):
        self.A = A
        self.b = b
        self.report = report
        self.j0 = None
        self.last = None

    def record(self, value: float):
        if self.j0 is None:
            self.j0 = value
        elif value > self.last + 1e-12 * self.j0:
            self.report.monotonicity_violations += 1
            logger.warning("ALS objective increased: %.17g -> %.17g", self.last, value)
        self.last = value
        self.report.objective_history.append(value)

    def solve(self, frame: np.ndarray) -> np.ndarray:
        phi = self.A.apply_columns(frame)
        coef, _, rank, _ = np.linalg.lstsq(phi, self.b, rcond=None)
        if rank < phi.shape[1]:
            self.report.rank_deficient_solves += 1
            logger.info("ALS micro-step rank deficient (%d < %d); minimum-norm solution", rank, phi.shape[1])
        r = phi @ coef - self.b
        self.record(0.5 * float(r @ r))
        return coef


def _tt_half_sweep(cores, solver, order):
    d = len(cores)
    for t in order:
        a, n, b = cores[t].shape
        frame = _tt_frame(_tt_left_iface(cores, t), n, _tt_right_iface(cores, t))
        cores[t] = solver.solve(frame).reshape(a, n, b, order="F")
        if order[-1] > order[0] and t < d - 1:
            q, r = np.linalg.qr(cores[t].reshape(a * n, b, order="F"))
            cores[t] = q.reshape(a, n, q.shape[1], order="F")
            cores[t + 1] = np.einsum("ij,jkl->ikl", r, cores[t + 1])
        elif order[-1] < order[0] and t > 0:
            q, r = np.linalg.qr(cores[t].reshape(a, n * b, order="F").T)
            cores[t] = q.T.reshape(q.shape[1], n, b, order="F")
            cores[t - 1] = np.einsum("ijk,kl->ijl", cores[t - 1], r.T)


def _tucker_half_sweep(core, factors, solver, order):
    for comp in order:
        if comp == "core":
            core = solver.solve(_tucker_core_frame(factors)).reshape(core.shape, order="F")
        else:
            i = comp
            n, r = factors[i].shape
            f = solver.solve(_tucker_factor_frame(core, factors, i)).reshape(n, r, order="F")
            q, rr = np.linalg.qr(f)
            factors[i] = q
            core = mode_product(core, rr, i)
    return core, factors


def _initial_state(init, fmt, rank, A, b):
    if init is None:
        init, _ = hard_threshold(A.adjoint(b), fmt, rank)
    if fmt == "tt":
        if not isinstance(init, TTTensor):
            init = tt_svd(to_dense(init), rank)
        return list(right_orthogonalize(init).cores)
    if not isinstance(init, TuckerTensor):
        init = truncate_hosvd(to_dense(init), rank)
    factors, core = [], init.core
    for i, f in enumerate(init.factors):
        q, r = np.linalg.qr(f)
        factors.append(q)
        core = mode_product(core, r, i)
    return core, factors


def _run_als(A, b, fmt, rank, init, max_sweeps, tol, half_sweeps=None):
    b = np.asarray(b, dtype=np.float64)
    norm_b = float(np.linalg.norm(b))
    report = RecoveryReport()
    solver = _BlockSolver(A, b, report)
    state = _initial_state(init, fmt, rank, A, b)

    def current():
        if fmt == "tt":
            return TTTensor(tuple(state))
        return TuckerTensor(state[0], tuple(state[1]))

    x = to_dense(current())
    res = float(np.linalg.norm(A.apply(x) - b))
    report.residual_history.append(res)
    solver.record(0.5 * res**2)

    d = len(A.shape)
    if fmt == "tt":
        forward, backward = list(range(d)), list(range(d - 1, -1, -1))
    else:
        forward, backward = ["core"] + list(range(d)), list(range(d - 1, -1, -1)) + ["core"]

    # below this residual the micro-step objectives are rounding noise
    stop = max(tol, 100 * np.finfo(np.float64).eps) * norm_b
    halves = 0
    for sweep in range(max_sweeps):
        if res <= stop:
            report.converged = True
            break
        before = solver.last
        for order in (forward, backward):
            if fmt == "tt":
                _tt_half_sweep(state, solver, order)
            else:
                state = _tucker_half_sweep(state[0], state[1], solver, order)
            halves += 1
            if half_sweeps is not None and halves >= half_sweeps:
                break
        x = to_dense(current())
        res = float(np.linalg.norm(A.apply(x) - b))
        report.iterations = sweep + 1
        report.residual_history.append(res)
        if half_sweeps is not None and halves >= half_sweeps:
            break
        if before > 0 and (before - solver.last) < 1e-12 * before:
            break
    report.converged = report.converged or res <= stop
    report.rate_estimate = _tail_rate(report)
    logger.debug(
        "ALS run finished: %d micro-steps, %d objective increases",
        len(report.objective_history) - 1,
        report.monotonicity_violations,
    )
    return current(), report


def als(A: MeasurementMap, b, config: RecoveryConfig, init=None):
    """Alternating least squares over the components of the format.

    Every micro-step solves the least-squares problem for one component
    with the others fixed and orthogonalized, so ``J`` never increases.
    TT cores are visited left-to-right and then right-to-left; Tucker
    components as core, factors ``1..d``, then back.  A sweep counts as an
    iteration.  Stops on the residual tolerance (never tighter than
    ``100 * eps * ||b||``), a relative decrease of ``J`` below ``1e-12``
    over a sweep, or ``config.max_iter`` sweeps.
    """
    rank = validate_rank(config.rank, A.shape, config.format)
    return _run_als(A, b, config.format, rank, init, config.max_iter, config.tol)


def als_refine_step(y: np.ndarray, current):
    """One ALS half-sweep for ``min ||y - v||`` started at ``current``."""
    y = np.asarray(y, dtype=np.float64)
    fmt = "tt" if isinstance(current, TTTensor) else "tucker"
    if isinstance(current, TTTensor):
        rank = current.ranks
    elif isinstance(current, TuckerTensor):
        rank = current.ranks
    else:
        raise TypeError("current must be a TuckerTensor or TTTensor")
    out, _ = _run_als(IdentityMap(y.shape), vec(y), fmt, rank, current, 1, 1e-300, half_sweeps=1)
    return out
