import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from pietsch.cli import EXIT_INPUT, EXIT_NONCONVERGED, EXIT_OK, EXIT_TOLERANCE, format_float, main
from pietsch.core_model import build_instance
from pietsch.corpus import random_instance


@pytest.fixture
def trivial(tmp_path):
    path = tmp_path / "trivial.json"
    path.write_text(build_instance([[1.0]], [1.0], 2).to_json())
    return path


@pytest.fixture
def dense(tmp_path):
    path = tmp_path / "dense.json"
    path.write_text(random_instance(np.random.default_rng(1), 5, 6, 1.5, style="dense").to_json())
    return path


def test_pi_trivial(trivial, tmp_path):
    out = tmp_path / "pi.json"
    assert main(["pi", "--input", str(trivial), "--output", str(out)]) == EXIT_OK
    d = json.loads(out.read_text())
    assert d["pi"] == 1.0 and d["witness"]["weights"] == [1.0]
    assert d["schema_version"] == 1


def test_measure_then_verify(dense, tmp_path):
    cert = tmp_path / "cert.json"
    assert main(["measure", "-i", str(dense), "-o", str(cert)]) == EXIT_OK
    assert main(["verify", "-i", str(dense), "--certificate", str(cert), "-o", str(tmp_path / "v.json")]) == EXIT_OK
    d = json.loads(cert.read_text())
    d["c"] /= 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(d))
    assert main(["verify", "-i", str(dense), "--certificate", str(bad), "-o", str(tmp_path / "v2.json")]) == EXIT_TOLERANCE
    report = json.loads((tmp_path / "v2.json").read_text())
    assert not report["valid"] and report["worst_residual"] < 0


def test_measure_not_summing(tmp_path):
    path = tmp_path / "ns.json"
    path.write_text(build_instance([[1.0, 0.0]], [1.0, 1.0], 1).to_json())
    assert main(["measure", "-i", str(path), "-o", str(tmp_path / "c.json")]) == EXIT_TOLERANCE
    assert main(["pi", "-i", str(path), "-o", str(tmp_path / "p.json")]) == EXIT_OK
    assert json.loads((tmp_path / "p.json").read_text())["status"] == "not summing"


def test_duality_on_shipped_corpus(tmp_path):
    out = tmp_path / "dual.json"
    assert main(["duality", "-o", str(out)]) == EXIT_OK
    d = json.loads(out.read_text())
    assert d["all_ok"] and all(r["gap"] <= 1e-7 * (1 + r["pi"]) for r in d["reports"])


def test_duality_instance_list(dense, trivial, tmp_path):
    lst = tmp_path / "many.json"
    lst.write_text(json.dumps([json.loads(dense.read_text()), json.loads(trivial.read_text())]))
    assert main(["duality", "-i", str(lst), "-o", str(tmp_path / "d.json")]) == EXIT_OK
    assert len(json.loads((tmp_path / "d.json").read_text())["reports"]) == 2


def test_bruteforce(trivial, tmp_path):
    out = tmp_path / "bf.json"
    assert main(["bruteforce", "-i", str(trivial), "--bound", "4", "-o", str(out)]) == EXIT_OK
    d = json.loads(out.read_text())
    assert d["best_value"] == 1.0 and d["mode"] == "enumeration"


def test_validate_family_spec(tmp_path):
    spec = tmp_path / "lin.json"
    spec.write_text(json.dumps({"builder": "linear", "p": 2, "matrix": [[1, 2], [0, 1]],
                                "test_vectors": [[1, 0], [0, 1], [0, 0]], "scalars": [1, -2, 1]}))
    out = tmp_path / "val.json"
    assert main(["validate", "-i", str(spec), "-o", str(out)]) == EXIT_OK
    d = json.loads(out.read_text())
    assert d["s_superhomogeneous_ok"] and d["samples_checked"] >= 100


def test_exchange_circle(tmp_path):
    X = np.random.default_rng(0).standard_normal((16, 2))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    spec = tmp_path / "ex.json"
    spec.write_text(json.dumps({"p": 2, "operator": [[1, 0], [0, 1]], "test_vectors": X.tolist()}))
    hist = tmp_path / "hist.jsonl"
    assert main(["exchange", "-i", str(spec), "--oracle", "circle", "-o", str(hist)]) == EXIT_OK
    lines = [json.loads(line) for line in hist.read_text().splitlines()]
    assert lines[-1] == {"final_status": "converged"}
    assert lines[-2]["primal_value"] == pytest.approx(2.0, rel=1e-6)
    assert main(["exchange", "-i", str(spec), "--max-iter", "1", "--tol", "1e-15",
                 "-o", str(tmp_path / "h2.jsonl")]) == EXIT_NONCONVERGED
    assert main(["exchange", "-i", str(spec), "--oracle", "warp", "-o", str(hist)]) == EXIT_INPUT


@pytest.mark.parametrize(
    "payload, field",
    [
        ('{"p": 2, "r_matrix": [[1]]}', "s_vector"),
        ('{"p": 2, "r_matrix": [[1, -1]], "s_vector": [1, 1], "schema_version": 1}', "negative entry at (0,1)"),
        ("{not json", "line 1"),
        ('{"builder": "linear", "p": 1}', "matrix"),
    ],
)
def test_malformed_input(tmp_path, capsys, payload, field):
    path = tmp_path / "bad.json"
    path.write_text(payload)
    assert main(["pi", "-i", str(path)]) == EXIT_INPUT
    assert field in capsys.readouterr().err


def test_missing_file_and_bad_tol(tmp_path):
    assert main(["pi", "-i", str(tmp_path / "nope.json")]) == EXIT_INPUT
    assert main(["pi", "-i", "x", "--tol", "-1"]) == EXIT_INPUT


def test_byte_identical_reruns(dense, tmp_path):
    for cmd in ("pi", "measure", "duality", "bruteforce"):
        a, b = tmp_path / f"{cmd}a", tmp_path / f"{cmd}b"
        main([cmd, "-i", str(dense), "-o", str(a), "--bound", "3"])
        main([cmd, "-i", str(dense), "-o", str(b), "--bound", "3"])
        assert a.read_bytes() == b.read_bytes()


def test_float_format_17_digits():
    assert format_float(0.1) == "0.10000000000000001"
    assert float(format_float(1 / 3)) == 1 / 3
    with pytest.raises(ValueError):
        format_float(float("nan"))


def test_module_entry_point(trivial):
    proc = subprocess.run([sys.executable, "-m", "pietsch", "pi", "-i", str(trivial)],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["pi"] == 1.0


def test_suite_csv(tmp_path, monkeypatch):
    import pietsch.cli as cli

    # a small corpus keeps this test fast; the full run lives in the acceptance tests
    monkeypatch.setattr(cli, "acceptance_corpus", lambda seed: [random_instance(np.random.default_rng(seed), 3, 3, 2.0)])
    out = tmp_path / "suite.csv"
    assert main(["suite", "-o", str(out)]) == EXIT_OK
    rows = list(csv.DictReader(out.open()))
    assert list(rows[0]) == ["family", "m", "k", "p", "pi", "c", "gap", "status"]
    assert all(r["status"] == "ok" for r in rows)
    assert any(r["family"] == "linear-circle-720" for r in rows)
