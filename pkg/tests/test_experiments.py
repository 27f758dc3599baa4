import csv
import io
import json
import math

import numpy as np
import pytest

from tensor_recovery.decomposition import multilinear_rank
from tensor_recovery.experiments import (
    CSV_COLUMNS,
    ExperimentSpec,
    ProbeRequest,
    SweepPoint,
    SweepResult,
    fmt_float,
    make_instance,
    measurement_count,
    probe_map,
    run_sweep,
    run_trial,
    solver_rank,
    sweep_csv,
    write_probe,
    write_sweep,
)
from tensor_recovery.generators import gen_random_tucker

SMALL = dict(shape=(5, 5, 5), rank=(1, 1, 1), trials=4, max_iter=300, seed=3)


class TestGenerator:
    def test_rank_one_structure(self):
        u, t = gen_random_tucker((4, 5, 6), (1, 1, 1), seed=1)
        assert t.core.shape == (1, 1, 1)
        for f in t.factors:
            assert np.linalg.norm(f) == pytest.approx(1.0, rel=1e-12)
        assert np.linalg.norm(u) == pytest.approx(abs(t.core.item()), rel=1e-12)

    def test_detected_rank_over_seeds(self):
        for s in range(100):
            u, _ = gen_random_tucker((10, 10, 10), (3, 3, 3), seed=s)
            assert multilinear_rank(u) == (3, 3, 3)

    def test_norm_equals_core_norm(self):
        u, t = gen_random_tucker((6, 7, 8), (2, 3, 4), seed=2)
        assert np.linalg.norm(u) == pytest.approx(np.linalg.norm(t.core), rel=1e-12)

    def test_factors_orthonormal(self):
        _, t = gen_random_tucker((6, 7, 8), (2, 3, 4), seed=2)
        for f in t.factors:
            np.testing.assert_allclose(f.T @ f, np.eye(f.shape[1]), atol=1e-12)

    def test_deterministic(self):
        assert np.array_equal(gen_random_tucker((4, 4, 4), (2, 2, 2), 9)[0], gen_random_tucker((4, 4, 4), (2, 2, 2), 9)[0])

    def test_rank_too_large(self):
        with pytest.raises(ValueError):
            gen_random_tucker((2, 3, 4), (3, 1, 1), seed=0)


class TestSpec:
    @pytest.mark.parametrize(
        "kwargs",
        [{"grid": (0.0,)}, {"grid": (101.0,)}, {"trials": 0}, {"solver": "rgi", "format": "tucker"},
         {"measurement": "fourier"}, {"rank": (11, 1, 1)}, {"success_threshold": 0.0}],
    )
    def test_rejects(self, kwargs):
        with pytest.raises(ValueError):
            ExperimentSpec(**kwargs)

    def test_dict_round_trip(self):
        spec = ExperimentSpec(**SMALL, grid=(10.0, 20.0))
        assert ExperimentSpec.from_dict(json.loads(json.dumps(spec.to_dict()))) == spec

    def test_unknown_field(self):
        with pytest.raises(ValueError):
            ExperimentSpec.from_dict({"shapes": [2, 2]})

    def test_defaults(self):
        spec = ExperimentSpec()
        assert (spec.trials, spec.success_threshold, spec.max_iter) == (50, 1e-4, 5000)

    @pytest.mark.parametrize("shape, n_bar, m", [((10, 10, 10), 9, 90), ((10, 10, 10), 3, 30), ((6, 10, 15), 8, 72), ((10, 10, 10), 0.15, 2)])
    def test_measurement_count(self, shape, n_bar, m):
        assert measurement_count(shape, n_bar) == m

    def test_tt_solver_rank_from_tucker_generator(self):
        assert solver_rank(ExperimentSpec(rank=(2, 5, 7), format="tt")) == (2, 7)
        assert solver_rank(ExperimentSpec(rank=(2, 3), format="tt", generator="matched")) == (2, 3)


class TestTrial:
    def test_full_measurements_succeed(self):
        spec = ExperimentSpec(shape=(6, 6, 6), rank=(1, 1, 1), seed=4)
        rec = run_trial(spec, 100.0, 0)
        assert rec["success"] and rec["m"] == 216

    def test_record_fields(self):
        rec = run_trial(ExperimentSpec(**SMALL), 40.0, 1, keep_report=True)
        assert {"n_bar", "m", "trial", "seed", "success", "iterations", "true_error", "relative_error", "residual", "report"} <= set(rec)
        assert len(rec["report"]["residual_history"]) == rec["iterations"] + 1
        json.dumps(rec)

    def test_reproducible_alone(self):
        spec = ExperimentSpec(**SMALL, grid=(30.0, 60.0))
        sweep = run_sweep(spec)
        again = run_trial(spec, 60.0, 2)
        assert [r for r in sweep.records if r["n_bar"] == 60.0 and r["trial"] == 2] == [again]

    def test_tensors_shared_across_grid(self):
        spec = ExperimentSpec(**SMALL)
        assert np.array_equal(make_instance(spec, 1), make_instance(spec, 1))
        assert not np.array_equal(make_instance(spec, 1), make_instance(spec, 2))

    @pytest.mark.parametrize("solver, fmt, rank", [("rgi", "tt", (1, 1)), ("als", "tt", (1, 1)), ("als", "tucker", (1, 1, 1))])
    def test_other_solvers(self, solver, fmt, rank):
        spec = ExperimentSpec(shape=(5, 5, 5), rank=rank, format=fmt, solver=solver, generator="matched", max_iter=200, seed=5)
        rec = run_trial(spec, 60.0, 0)
        assert rec["success"]

    def test_sampling_map_trial_runs(self):
        spec = ExperimentSpec(shape=(5, 5, 5), rank=(1, 1, 1), measurement="sampling", max_iter=50, seed=6)
        rec = run_trial(spec, 50.0, 0)
        assert rec["m"] == 63 and isinstance(rec["success"], bool)


def parse_csv(text):
    return list(csv.DictReader(io.StringIO(text)))


class TestSweep:
    def test_csv_columns_and_scan(self, tmp_path):
        spec = ExperimentSpec(**SMALL, grid=(2.0, 30.0, 80.0))
        result = run_sweep(spec)
        paths = write_sweep(result, tmp_path / "run")
        rows = parse_csv(paths["csv"].read_text())
        assert tuple(rows[0]) == CSV_COLUMNS
        for row, point in zip(rows, result.points):
            assert int(row["successes"]) <= int(row["trials"]) == spec.trials
            assert float(row["success_rate"]) == pytest.approx(point.success_rate, rel=1e-6)
        zero = [float(r["n_bar"]) for r in rows if int(r["successes"]) == 0]
        full = [float(r["n_bar"]) for r in rows if r["successes"] == r["trials"]]
        assert result.pct_max == (max(zero) if zero else None)
        assert result.pct_min == (min(full) if full else None)
        if result.pct_max is not None and result.pct_min is not None:
            assert result.pct_max < result.pct_min
        summary = json.loads(paths["summary"].read_text())
        assert summary["pct_min"] == result.pct_min
        assert len(paths["trials"].read_text().splitlines()) == 3 * spec.trials

    def test_success_rate_nondecreasing(self):
        spec = ExperimentSpec(**SMALL, grid=(2.0, 10.0, 30.0, 80.0))
        rates = [p.success_rate for p in run_sweep(spec).points]
        slack = 2 / math.sqrt(spec.trials)
        assert all(b >= a - slack for a, b in zip(rates, rates[1:]))

    def test_empty_grid(self, tmp_path):
        result = run_sweep(ExperimentSpec(**SMALL, grid=()))
        assert sweep_csv(result) == ",".join(CSV_COLUMNS) + "\n"
        assert result.pct_max is None and result.pct_min is None

    def test_thread_count_does_not_change_bytes(self):
        spec = ExperimentSpec(**SMALL, grid=(10.0, 40.0))
        assert sweep_csv(run_sweep(spec, workers=1)) == sweep_csv(run_sweep(spec, workers=4))

    def test_summary_bands(self):
        result = SweepResult(ExperimentSpec(**SMALL), [SweepPoint(5.0, 7, 4, 2, 10.0, 12)])
        point = result.summary()["points"][0]
        assert point["band_low"] == pytest.approx(0.0)
        assert point["band_high"] == pytest.approx(1.0)
        assert point["max_iters_success"] == 12

    def test_write_error_names_path(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("")
        result = run_sweep(ExperimentSpec(**SMALL, grid=()))
        with pytest.raises(OSError, match="file"):
            write_sweep(result, blocker / "sub" / "run")

    def test_table_row_grid(self, table_row_111):
        by_n = {p.n_bar: p for p in table_row_111.points}
        assert by_n[3.0].successes == 0
        assert by_n[9.0].success_rate >= 0.9


@pytest.mark.parametrize("x, text", [(1 / 3, "0.333333"), (123456789.0, "1.23457e+08"), (None, ""), (float("nan"), ""), (2.0, "2")])
def test_float_format(x, text):
    assert fmt_float(x) == text


class TestProbe:
    def test_orthonormal_full_map(self):
        res = probe_map(ProbeRequest(shape=(3, 3, 3), m_grid=(27,), draws=2, samples=50, orthonormal=True))
        assert max(r["delta_hat"] for r in res["rows"]) <= 1e-10

    def test_sampling_counterexample(self):
        res = probe_map(ProbeRequest(shape=(5, 5, 5), measurement="sampling", m_grid=(60,), draws=3, samples=20))
        assert all(r["delta_hat"] == 1.0 for r in res["rows"])

    def test_decreasing_in_m(self):
        res = probe_map(ProbeRequest(rank=(2, 2), m_grid=(100, 200, 400), draws=5, samples=200, seed=1))
        medians = [row["median_delta_hat"] for row in res["calibration"]]
        assert medians[0] > medians[1] > medians[2]

    def test_files(self, tmp_path):
        res = probe_map(ProbeRequest(shape=(4, 4, 4), m_grid=(20, 40), draws=2, samples=10))
        paths = write_probe(res, tmp_path / "p.csv")
        assert paths["csv"].read_text().startswith("m,draw,delta_hat\n")
        rows = parse_csv(paths["calibration"].read_text())
        assert [int(r["m"]) for r in rows] == [20, 40]

    def test_invalid(self):
        with pytest.raises(ValueError):
            ProbeRequest(draws=0)
