"""Command-line entry point: ``tensor-recovery {sweep,trial,probe,decompose,version}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .core import read_csv
from .decomposition import hosvd, truncate_hosvd, tt_svd
from .experiments import ExperimentSpec, ProbeRequest, probe_map, run_sweep, run_trial, write_probe, write_sweep
from .serialization import load, save

logger = logging.getLogger("tensor_recovery")


class UsageError(Exception):
    pass


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.replace("x", ",").split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _experiment_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--spec", type=Path, help="JSON file with ExperimentSpec fields; flags override it")
    p.add_argument("--shape", type=_ints)
    p.add_argument("--rank", type=_ints)
    p.add_argument("--format", choices=("tucker", "tt"))
    p.add_argument("--solver", choices=("tiht", "rgi", "als"))
    p.add_argument("--map", dest="measurement", choices=("gaussian", "sampling"))
    p.add_argument("--trials", type=int)
    p.add_argument("--max-iter", dest="max_iter", type=int)
    p.add_argument("--tol", dest="success_threshold", type=float, help="absolute success threshold on ||u - u_hat||")
    p.add_argument("--residual-tol", dest="residual_tol", type=float)
    p.add_argument("--step", choices=("fixed", "steepest"))
    p.add_argument("--generator", choices=("tucker", "matched"))
    p.add_argument("--projection", choices=("hsvd", "als"))
    p.add_argument("--seed", type=int)


def _spec_from_args(args) -> ExperimentSpec:
    data = {}
    if args.spec is not None:
        try:
            data = json.loads(args.spec.read_text())
        except OSError as exc:
            raise OSError(f"cannot read {args.spec}: {exc.strerror}") from exc
    for key in (
        "shape", "rank", "format", "solver", "measurement", "trials", "max_iter",
        "success_threshold", "residual_tol", "step", "generator", "projection", "seed",
    ):
        value = getattr(args, key, None)
        if value is not None:
            data[key] = value
    if getattr(args, "grid", None) is not None:
        data["grid"] = args.grid
    try:
        return ExperimentSpec.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


def cmd_sweep(args) -> int:
    spec = _spec_from_args(args)
    result = run_sweep(spec, workers=args.workers)
    paths = write_sweep(result, args.out)
    if args.figure is not None:
        from .plotting import plot_phase_transition

        paths["figure"] = plot_phase_transition([result], args.figure)
    summary = {"pct_max": result.pct_max, "pct_min": result.pct_min, "files": {k: str(v) for k, v in paths.items()}}
    print(json.dumps(summary))
    return 0


def cmd_trial(args) -> int:
    spec = _spec_from_args(args)
    record = run_trial(spec, args.n_bar, args.index, keep_report=True)
    record["spec"] = spec.to_dict()
    text = json.dumps(record, indent=2)
    if args.out is not None:
        args.out.write_text(text + "\n")
    else:
        print(text)
    return 0


def cmd_probe(args) -> int:
    try:
        req = ProbeRequest(
            shape=args.shape,
            rank=args.rank,
            format=args.format,
            measurement=args.measurement,
            m_grid=args.m_grid,
            draws=args.draws,
            samples=args.samples,
            seed=args.seed,
            delta=args.delta,
            eps=args.eps,
            orthonormal=args.orthonormal,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    result = probe_map(req)
    paths = write_probe(result, args.out)
    if args.figure is not None:
        from .plotting import plot_probe

        paths["figure"] = plot_probe(result, args.figure)
    print(json.dumps({"calibration": result["calibration"], "files": {k: str(v) for k, v in paths.items()}}))
    return 0


def _read_dense(path: Path) -> np.ndarray:
    if path.suffix == ".npy":
        return np.load(path)
    if path.suffix == ".csv":
        return read_csv(path)
    data = load(path)
    if not isinstance(data, np.ndarray):
        raise UsageError(f"{path} holds a decomposed tensor; pass a dense tensor")
    return data


def cmd_decompose(args) -> int:
    try:
        u = _read_dense(args.input)
    except OSError as exc:
        raise OSError(f"cannot read {args.input}: {exc.strerror or exc}") from exc
    try:
        if args.format == "tucker":
            t = hosvd(u) if args.rank is None else truncate_hosvd(u, args.rank)
        else:
            t = tt_svd(u, "exact" if args.rank is None else args.rank)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    save(t, args.output)
    err = float(np.linalg.norm(t.to_dense() - u))
    print(json.dumps({"format": args.format, "ranks": list(t.ranks), "error": err, "output": str(args.output)}))
    return 0


def cmd_version(args) -> int:
    print(__version__)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tensor-recovery", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="phase-transition sweep over the measurement fraction")
    _experiment_args(p)
    p.add_argument("--grid", type=_floats, help="measurement percentages, e.g. 3,6,9,12")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", type=Path, required=True, help="output stem; writes .csv, .summary.json, .trials.jsonl")
    p.add_argument("--figure", type=Path, help="also render the phase-transition plot to this file")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("trial", help="run and report a single trial")
    _experiment_args(p)
    p.add_argument("--n-bar", dest="n_bar", type=float, required=True)
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_trial)

    p = sub.add_parser("probe", help="empirical TRIC estimates for random maps")
    p.add_argument("--shape", type=_ints, default=(10, 10, 10))
    p.add_argument("--rank", type=_ints, default=(1, 1))
    p.add_argument("--format", choices=("tucker", "tt"), default="tt")
    p.add_argument("--map", dest="measurement", choices=("gaussian", "sampling"), default="gaussian")
    p.add_argument("--m-grid", dest="m_grid", type=_ints, default=(100, 200, 400))
    p.add_argument("--draws", type=int, default=20)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--delta", type=float, default=0.5)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--orthonormal", action="store_true")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--figure", type=Path)
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("decompose", help="HOSVD / TT-SVD of a dense tensor file")
    p.add_argument("--input", type=Path, required=True, help="dense tensor as .json, .csv or .npy")
    p.add_argument("--format", choices=("tucker", "tt"), default="tt")
    p.add_argument("--rank", type=_ints, help="target rank; exact decomposition when omitted")
    p.add_argument("--output", type=Path, required=True)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("version", help="print the package version")
    p.set_defaults(func=cmd_version)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
