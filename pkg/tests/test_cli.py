import json
import math
import subprocess
import sys

import numpy as np
import pytest

from oscv.cli import CsvDataset, RunReport, emit_curve, ingest, main, read_curve
from oscv.errors import IngestionError
from oscv.kernels import Kernel
from oscv.selection import default_oscv_grid, find_local_minima, oscv_curve


def _write(path, rows, header=None):
    lines = ([header] if header else []) + [",".join(map(str, r)) for r in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture
def sample_csv(tmp_path):
    rng = np.random.default_rng(3)
    x = rng.uniform(10, 50, 80)
    y = np.sin(x / 6) + 0.1 * rng.standard_normal(80)
    return _write(tmp_path / "d.csv", zip(x, y), header="speed,mpg")


def test_ingest_too_few_rows(tmp_path):
    p = _write(tmp_path / "small.csv", [(1, 2), (2, 3), (3, 4)])
    with pytest.raises(IngestionError):
        ingest(CsvDataset(p))


def test_ingest_drops_bad_rows_and_shifts(tmp_path):
    rows = [(3, 1), (5, 2), ("x", 3), (4, "nan"), (7, 4), (9, 5), (11, 6)]
    d, warnings = ingest(CsvDataset(_write(tmp_path / "a.csv", rows)))
    assert d.n == 5
    assert d.x[0] == 0.0 and d.a == 8.0
    assert any("dropped 2" in w for w in warnings)


def test_ingest_duplicates(tmp_path):
    rows = [(1, 1), (2, 5), (2, 3), (2, 4), (3, 0), (4, 1)]
    d, warnings = ingest(CsvDataset(_write(tmp_path / "dup.csv", rows)))
    assert np.all(np.diff(d.x) > 0)
    assert any("perturbed 2 duplicate" in w for w in warnings)
    np.testing.assert_array_equal(d.y[1:4], [3, 4, 5])


def test_ingest_shuffled_equals_sorted(tmp_path):
    rows = [(i * 0.7, math.sin(i)) for i in range(12)]
    a, _ = ingest(CsvDataset(_write(tmp_path / "s.csv", rows)))
    rng = np.random.default_rng(0)
    shuffled = [rows[i] for i in rng.permutation(12)]
    b, _ = ingest(CsvDataset(_write(tmp_path / "u.csv", shuffled)))
    np.testing.assert_array_equal(a.x, b.x)
    np.testing.assert_array_equal(a.y, b.y)
    assert a.a == b.a


def test_ingest_columns_by_name_and_index(tmp_path, sample_csv):
    by_name, _ = ingest(CsvDataset(sample_csv, "speed", "mpg"))
    by_index, _ = ingest(CsvDataset(sample_csv, 0, 1))
    np.testing.assert_array_equal(by_name.y, by_index.y)
    with pytest.raises(IngestionError):
        ingest(CsvDataset(sample_csv, "weight", "mpg"))
    with pytest.raises(IngestionError):
        ingest(CsvDataset(tmp_path / "missing.csv"))


def test_emit_curve_roundtrip(tmp_path, sample_csv):
    d, _ = ingest(CsvDataset(sample_csv))
    curve = oscv_curve(d, Kernel.hb(), default_oscv_grid(d))
    out = tmp_path / "curve.txt"
    emit_curve(curve, out)
    lines = out.read_text().splitlines()
    assert len([line for line in lines if not line.startswith("#")]) == 200
    header, b, v = read_curve(out)
    np.testing.assert_array_equal(b, curve.grid.points)
    np.testing.assert_array_equal(np.isnan(v), np.isnan(curve.values))
    ok = ~np.isnan(v)
    np.testing.assert_array_equal(v[ok], curve.values[ok])
    assert any(line.endswith(" NA") for line in lines) == bool(curve.n_undefined)
    minima = [float(s) for s in header["local_minima"].split()]
    assert minima == [float(curve.grid.points[i]) for i in find_local_minima(curve.values, curve.tie_atol)]
    assert header["kernel"] == "hb"
    with pytest.raises(IngestionError):
        emit_curve(curve, tmp_path / "no" / "such" / "dir.txt")


def _run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def _kv(text):
    return dict(line.split("=", 1) for line in text.strip().splitlines())


def test_constants_command(capsys):
    code, out, _ = _run(capsys, "constants", "--k", "gaussian", "--h", "gaussian")
    assert code == 0
    kv = _kv(out)
    assert kv["C"] == "0.6168" and kv["C_star"] == "0.5284"


def test_solve_robust_command(capsys):
    code, out, _ = _run(capsys, "solve-robust", "--sigma", "10", "--bracket", "1e-6,1e-3")
    assert code == 0
    roots = [float(v) for v in _kv(out)["alphas"].split(",")]
    assert roots == pytest.approx([8.79985198548436e-5, 3.912884532000514e-4], rel=1e-9)


def test_functionals_and_thresholds(capsys):
    code, out, _ = _run(capsys, "functionals", "--kernel", "hi:robust", "--one-sided", "--tail-factor", "1.05")
    kv = _kv(out)
    assert code == 0 and kv["J"] == "1.4882" and abs(float(kv["tail_threshold"]) - 16.92) < 0.05
    code, out, _ = _run(capsys, "thresholds", "--json")
    doc = json.loads(out)
    assert (doc["outputs"]["n_r1"], doc["outputs"]["n_r2"], doc["outputs"]["n_r3"]) == (17, 195, 10)


def test_select_constant_data(capsys, tmp_path):
    p = _write(tmp_path / "c.csv", [(i, 3.5) for i in range(20)])
    code, out, _ = _run(capsys, "select", str(p), "--json")
    doc = json.loads(out)
    assert code == 0
    assert doc["outputs"]["criterion"] == 0.0
    assert doc["outputs"]["b_hat"] == 1.0


def test_select_methods(capsys, sample_csv):
    code, out, err = _run(capsys, "select", str(sample_csv), "--x-column", "speed", "--y-column", "mpg", "--method", "cv")
    kv = _kv(out)
    assert code == 0 and kv["b_hat"] == kv["h_hat"]
    code, out, _ = _run(capsys, "select", str(sample_csv), "--method", "oscv-robust", "--minimum", "largest-local", "--grid", "0.5:40:120:log")
    assert code == 0 and _kv(out)["rescale"] == "0.5217"


def test_curve_command(capsys, sample_csv, tmp_path):
    out_file = tmp_path / "c.txt"
    code, out, err = _run(capsys, "curve", str(sample_csv), "--method", "oscv-hb", "--out", str(out_file))
    assert code == 0 and out_file.exists()
    assert "undefined" in err


def test_json_is_byte_identical(capsys, sample_csv):
    args = ["simulate", "--n", "40", "--replications", "3", "--seed", "11", "--json"]
    _, a, _ = _run(capsys, *args)
    _, b, _ = _run(capsys, *args)
    assert a == b
    doc = json.loads(a)
    assert doc["seed"] == 11 and doc["version"] and list(doc) == sorted(doc)
    _, c, _ = _run(capsys, "select", str(sample_csv), "--json")
    _, d, _ = _run(capsys, "select", str(sample_csv), "--json")
    assert c == d


def test_json_number_format():
    r = RunReport("x", {}, {"v": 1 / 3, "nan": math.nan, "i": 3}, seed=1)
    doc = json.loads(r.to_json())
    assert doc["outputs"]["v"] == float(f"{1 / 3:.15g}")
    assert doc["outputs"]["nan"] is None and doc["outputs"]["i"] == 3


def test_error_exit_codes(capsys, tmp_path):
    code, _, err = _run(capsys, "select", str(tmp_path / "none.csv"))
    assert code == 1 and "IngestionError" in err
    code, out, _ = _run(capsys, "select", str(tmp_path / "none.csv"), "--json")
    assert code == 1 and "error" in json.loads(out)["outputs"]
    # warnings alone keep status 0
    p = _write(tmp_path / "w.csv", [(1, 1), (1, 2), (2, 1), (3, 2), (4, 0), (5, 1), (6, 2), ("bad", 1)])
    code, _, err = _run(capsys, "select", str(p))
    assert code == 0 and "warning" in err


@pytest.mark.parametrize(
    "argv",
    [
        ["constants", "--bogus"],
        ["nonsense"],
        ["select", "f.csv", "--method", "oscv-magic"],
        ["constants", "--k", "cauchy"],
        ["curve", "f.csv", "--out", "x", "--grid", "1:2:3"],
    ],
)
def test_usage_errors(argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 2


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "oscv.cli", "constants", "--h", "hb"], capture_output=True, text=True)
    assert res.returncode == 0
    assert "C=0.1932" in res.stdout
