import json
import subprocess
import sys

import numpy as np
import pytest

from tensor_recovery import __version__
from tensor_recovery.cli import main
from tensor_recovery.core import write_csv
from tensor_recovery.generators import gen_random_tt
from tensor_recovery.serialization import load, save

SWEEP = ["sweep", "--shape", "5,5,5", "--rank", "1,1,1", "--trials", "3", "--max-iter", "200", "--seed", "7"]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_version(capsys):
    code, out, _ = run(capsys, "version")
    assert code == 0 and out.strip() == __version__


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "tensor_recovery", "version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip() == __version__


def test_sweep_writes_outputs(capsys, tmp_path):
    code, out, _ = run(capsys, *SWEEP, "--grid", "10,60", "--out", str(tmp_path / "s"))
    assert code == 0
    summary = json.loads(out)
    text = (tmp_path / "s.csv").read_text()
    assert text.splitlines()[0] == "n_bar,m,trials,successes,success_rate,mean_iters_success"
    assert len(text.splitlines()) == 3
    assert set(summary["files"]) == {"csv", "summary", "trials"}


def test_sweep_byte_identical_across_workers(capsys, tmp_path):
    for w in ("1", "3"):
        assert run(capsys, *SWEEP, "--grid", "20,50", "--workers", w, "--out", str(tmp_path / f"w{w}"))[0] == 0
    assert (tmp_path / "w1.csv").read_bytes() == (tmp_path / "w3.csv").read_bytes()


def test_sweep_figure(capsys, tmp_path):
    fig = tmp_path / "phase.png"
    code, out, _ = run(capsys, *SWEEP, "--grid", "20,60", "--out", str(tmp_path / "s"), "--figure", str(fig))
    assert code == 0
    assert fig.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    assert json.loads(out)["files"]["figure"] == str(fig)


def test_spec_file_with_override(capsys, tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"shape": [5, 5, 5], "rank": [1, 1, 1], "grid": [50], "trials": 5, "max_iter": 100}))
    code, _, _ = run(capsys, "sweep", "--spec", str(spec), "--trials", "2", "--out", str(tmp_path / "o"))
    assert code == 0
    assert json.loads((tmp_path / "o.summary.json").read_text())["spec"]["trials"] == 2


def test_recovery_failure_is_not_an_error(capsys, tmp_path):
    code, out, _ = run(capsys, *SWEEP, "--grid", "1", "--out", str(tmp_path / "f"))
    assert code == 0
    assert json.loads(out)["pct_max"] == 1.0


def test_trial(capsys):
    code, out, _ = run(capsys, "trial", "--shape", "5,5,5", "--rank", "1,1,1", "--n-bar", "60", "--index", "1", "--seed", "2")
    assert code == 0
    rec = json.loads(out)
    assert rec["trial"] == 1 and rec["m"] == 75 and "report" in rec and rec["spec"]["seed"] == 2


def test_probe(capsys, tmp_path):
    code, out, _ = run(capsys, "probe", "--shape", "4,4,4", "--m-grid", "20,40", "--draws", "2", "--samples", "10", "--out", str(tmp_path / "p"))
    assert code == 0
    assert len(json.loads(out)["calibration"]) == 2
    assert (tmp_path / "p.calibration.csv").exists()


@pytest.mark.parametrize("suffix", [".npy", ".csv", ".json"])
def test_decompose(capsys, tmp_path, suffix):
    u, _ = gen_random_tt((3, 4, 3), (2, 2), seed=1)
    src = tmp_path / f"u{suffix}"
    {".npy": lambda: np.save(src, u), ".csv": lambda: write_csv(u, src), ".json": lambda: save(u, src)}[suffix]()
    code, out, _ = run(capsys, "decompose", "--input", str(src), "--output", str(tmp_path / "t.json"))
    assert code == 0
    info = json.loads(out)
    assert info["ranks"] == [2, 2] and info["error"] <= 1e-10 * np.linalg.norm(u)
    assert np.allclose(load(tmp_path / "t.json").to_dense(), u, atol=1e-12)


def test_decompose_truncated_tucker(capsys, tmp_path):
    u, _ = gen_random_tt((3, 4, 3), (2, 2), seed=1)
    np.save(tmp_path / "u.npy", u)
    code, out, _ = run(capsys, "decompose", "--input", str(tmp_path / "u.npy"), "--format", "tucker", "--rank", "1,1,1", "--output", str(tmp_path / "t.json"))
    assert code == 0 and json.loads(out)["ranks"] == [1, 1, 1]


def test_missing_input_file(capsys, tmp_path):
    code, _, err = run(capsys, "decompose", "--input", str(tmp_path / "nope.npy"), "--output", str(tmp_path / "t.json"))
    assert code == 1 and "nope.npy" in err


def test_decomposed_input_rejected(capsys, tmp_path):
    _, t = gen_random_tt((3, 4, 3), (2, 2), seed=1)
    save(t, tmp_path / "t.json")
    code, _, err = run(capsys, "decompose", "--input", str(tmp_path / "t.json"), "--output", str(tmp_path / "o.json"))
    assert code == 2 and "dense" in err


def test_invalid_spec_values(capsys, tmp_path):
    code, _, err = run(capsys, "sweep", "--shape", "3,3,3", "--rank", "5,1,1", "--out", str(tmp_path / "x"))
    assert code == 2 and "rank" in err


def test_missing_spec_file(capsys, tmp_path):
    code, _, err = run(capsys, "sweep", "--spec", str(tmp_path / "none.json"), "--out", str(tmp_path / "x"))
    assert code == 1 and "none.json" in err


def test_bad_arguments_exit_nonzero(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["sweep", "--shape", "a,b"])
    assert exc.value.code != 0
