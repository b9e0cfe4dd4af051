import json
import subprocess
import sys

import pytest

from w1plus.cli import main
from w1plus.geodesic import build_geodesic
from w1plus.graph_core import Measure
from w1plus.serialization import curve_from_document, curve_to_document, dumps, loads
from w1plus.verification import verify

from instances import diamond, path_graph, random_connected, random_measure


@pytest.fixture
def p2_files(tmp_path):
    (tmp_path / "p2.json").write_text(json.dumps({"vertices": [0, 1, 2], "edges": [[0, 1], [1, 2]]}))
    (tmp_path / "d0.json").write_text(json.dumps({"0": 1.0}))
    (tmp_path / "d2.json").write_text(json.dumps({"2": 1.0}))
    (tmp_path / "half.json").write_text(json.dumps({"2": 0.5}))
    return tmp_path


def _args(d, f1="d2.json"):
    return ["--graph", str(d / "p2.json"), "--f0", str(d / "d0.json"), "--f1", str(d / f1)]


def test_geodesic_output(p2_files, capsys):
    assert main(["geodesic", *_args(p2_files)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["f"]["1"] == [0.0, 2.0, -2.0]
    assert doc["w1"] == 2.0


def test_verify_exit_zero(p2_files, capsys):
    assert main(["verify", *_args(p2_files), "--out", str(p2_files / "out")]) == 0
    assert "overall: pass" in capsys.readouterr().out
    assert json.loads((p2_files / "out" / "verify.json").read_text())["passed"] is True


def test_verify_exit_three(p2_files, capsys):
    code = main(["verify", *_args(p2_files), "--tolerance", "criticality=1e-300"])
    # the P2 Dirac curve has a tiny but nonzero first-order residual
    assert code == 3
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "verification_failed" and "criticality" in err["failed"]


def test_w1_mismatched_mass_exit_one(p2_files, capsys):
    assert main(["w1", *_args(p2_files, "half.json")]) == 1
    assert json.loads(capsys.readouterr().err)["error"] == "invalid_measure"


def test_missing_file_and_bad_options(p2_files, capsys):
    assert main(["w1", "--graph", str(p2_files / "nope.json"), "--f0", "a", "--f1", "b"]) == 1
    assert json.loads(capsys.readouterr().err)["error"] == "validation"
    assert main(["entropy", *_args(p2_files), "--grid", "1"]) == 1
    assert main(["couple", *_args(p2_files), "--tol", "0"]) == 1


def test_no_convergence_exit_two(tmp_path, capsys):
    (tmp_path / "g.json").write_text(json.dumps({"vertices": [0, 1, 2], "edges": [[0, 1], [1, 2]]}))
    (tmp_path / "a.json").write_text(json.dumps({"0": 0.5, "1": 0.5}))
    (tmp_path / "b.json").write_text(json.dumps({"1": 0.5, "2": 0.5}))
    args = ["--graph", str(tmp_path / "g.json"), "--f0", str(tmp_path / "a.json"), "--f1", str(tmp_path / "b.json")]
    assert main(["couple", *args, "--max-iter", "1"]) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "no_convergence"


def test_other_subcommands(p2_files, capsys):
    out = p2_files / "out"
    for cmd in ("w1", "orient", "weights", "couple", "geodesic"):
        assert main([cmd, *_args(p2_files), "--out", str(out)]) == 0
    assert json.loads((out / "w1.json").read_text())["w1"] == 2.0
    assert json.loads((out / "orient.json").read_text())["edges"] == [[0, 1], [1, 2]]
    assert json.loads((out / "weights.json").read_text())["weights"]["vertices"] == {"0": 1, "1": 1, "2": 1}
    couple = json.loads((out / "couple.json").read_text())
    assert couple["pi"] == [{"x": 0, "y": 2, "mass": 1.0}]
    assert main(["sample", "--curve", str(out / "geodesic.json"), "--times", "0,0.5,1"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "t,vertex,mass" and "0.5,1,0.5" in lines
    assert main(["entropy", "--curve", str(out / "geodesic.json"), "--grid", "5"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "t,entropy" and len(lines) == 6
    assert main(["verify", "--curve", str(out / "geodesic.json")]) == 0


def test_module_entry_point(p2_files):
    res = subprocess.run([sys.executable, "-m", "w1plus", "w1", *_args(p2_files)], capture_output=True, text=True)
    assert res.returncode == 0 and json.loads(res.stdout)["w1"] == 2.0


def _residuals(rep):
    return {c.name: c.residual for c in rep.checks}


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_round_trip(seed):
    import numpy as np

    rng = np.random.default_rng(seed)
    g = random_connected(20, 6, rng)
    curve = build_geodesic(g, random_measure(g, 4, rng), random_measure(g, 4, rng))
    before = _residuals(verify(curve, seed=5))
    exact = loads(dumps(curve))
    assert exact.f == curve.f and exact.g == curve.g and exact.h == curve.h
    assert _residuals(verify(exact, seed=5)) == before
    floats = curve_from_document(json.loads(json.dumps(curve_to_document(curve, exact=False))))
    rep = verify(floats, seed=5)
    assert rep.passed
    for name, r in _residuals(rep).items():
        assert abs(r - before[name]) <= 1e-12 * max(1.0, abs(before[name])), name
    sr, sr2 = curve.scaling, floats.scaling
    for (x, y), m in sr2.coupling.mass.items():
        assert abs(m / float(sr2.product_mass(x, y)) - 1) <= 1e-9


def test_round_trip_with_string_vertices():
    g = diamond()
    curve = build_geodesic(g, Measure.dirac(g, 0), Measure.dirac(g, 3),
                           weights=[["o", "a", 2], ["a", "z", 2], ["o", "b", 1], ["b", "z", 1]])
    back = loads(dumps(curve))
    assert back.weights.kind == "custom" and back.f == curve.f
