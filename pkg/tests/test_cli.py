import json
import subprocess
import sys

import numpy as np
import pytest

from mvrisk.cli import main

U01 = "x1\n0\n1\n"
UM12 = "x1\n-1\n2\n"


@pytest.fixture
def files(tmp_path):
    def write(name, text):
        p = tmp_path / name
        p.write_text(text)
        return str(p)

    return write


def run(args, tmp_path, name="r.json"):
    out = tmp_path / name
    code = main([*args, "--out", str(out)])
    return code, json.loads(out.read_text())


class TestOrder:
    def test_reflexive_mpir(self, files, tmp_path):
        f = files("f.csv", "x1,x2,w\n0,1,1\n2,3,2\n")
        code, rep = run(["order", "--kind", "mpir", "--x", f, "--y", f], tmp_path)
        assert code == 0 and rep["holds"] == "true"

    def test_mpir_kernel(self, files, tmp_path):
        code, rep = run(["order", "--kind", "mpir", "--x", files("a.csv", U01), "--y", files("b.csv", UM12)], tmp_path)
        assert code == 0
        c = rep["certificate"]["coupling"]
        np.testing.assert_allclose(np.reshape(c["matrix"], c["shape"]), [[1 / 3, 1 / 6], [1 / 6, 1 / 3]], atol=1e-9)
        assert set(rep) >= {"command", "inputs", "parameters", "certificate", "tolerances", "seed", "runtime_ms"}
        assert len(rep["inputs"]["x"]["sha256"]) == 64

    def test_false_exit_code(self, files, tmp_path):
        code, rep = run(["order", "--kind", "mpir", "--x", files("a.csv", UM12), "--y", files("b.csv", U01)], tmp_path)
        assert code == 1 and rep["holds"] == "false"

    def test_undetermined_exit_code(self, files, tmp_path):
        code, rep = run(["order", "--kind", "strong-dispersive", "--x", files("a.csv", U01), "--y", files("b.csv", "x1\n0\n0.5\n")], tmp_path)
        assert code == 2 and rep["holds"] == "undetermined"

    def test_mubl_rotation(self, files, tmp_path):
        # 16-point grid, Y = 3U + rotation(U): D is the rotation field
        from mvrisk.dist import reference_measure

        U = reference_measure("grid", 16, 2).points
        X = 3 * U
        Y = 3 * U + np.stack([U[:, 1], -U[:, 0]], axis=1)
        to = lambda P: "x1,x2\n" + "".join(f"{float(a)!r},{float(b)!r}\n" for a, b in P)
        code, rep = run(["order", "--kind", "mubl", "--x", files("x.csv", to(X)), "--y", files("y.csv", to(Y)), "--ref", "grid:16"], tmp_path)
        assert code == 1
        assert rep["certificate"]["cycle_slack"] < 0

    def test_fusions(self, files, tmp_path):
        p = files("p.csv", "x1\n0\n1\n2\n3\n")
        steps = files("steps.json", json.dumps([{"indices": [2, 3], "beta": 0.0}]))
        code, rep = run(["order", "--kind", "mpir", "--x", p, "--y", p, "--fusions", steps], tmp_path)
        # the fused law is less risky than P, so it is not an MPIR of P
        assert code == 1

    def test_pareto(self, files, tmp_path):
        al = files("al.csv", "y1,a1,b1,w\n1,1,0,1\n2,2,0,1\n3,0,3,1\n4,0,4,1\n")
        code, rep = run(["order", "--kind", "pareto", "--input", al, "--ref", "grid:4"], tmp_path)
        assert code == 1 and rep["certificate"]["agree"] is True

    def test_c_comonotone(self, files, tmp_path):
        x = files("x.csv", "x1,x2\n0,0\n1,0\n0,1\n")
        y = files("y.csv", "x1,x2\n0,0\n0,-1\n1,0\n")
        code, rep = run(["order", "--kind", "c-comonotone", "--x", x, "--y", y], tmp_path)
        assert code == 1 and rep["certificate"]["cycle_slack"] == pytest.approx(-1.0)

    def test_dimension_mismatch(self, files, tmp_path):
        code, rep = run(["order", "--kind", "mpir", "--x", files("a.csv", U01), "--y", files("b.csv", "x1,x2\n0,0\n")], tmp_path)
        assert code == 3 and "dimension" in rep["error"]


class TestEval:
    def test_rdu(self, files, tmp_path):
        code, rep = run(["eval", "--functional", "rdu1d", "--distortion", "power:2", "--input", files("u.csv", U01)], tmp_path)
        assert code == 0 and rep["value"] == pytest.approx(0.25)

    def test_spec_file(self, files, tmp_path):
        spec = files("s.json", json.dumps({"functional": "rdu1d", "distortion": {"family": "power", "p": 2}}))
        code, rep = run(["eval", "--spec", spec, "--input", files("u.csv", "x1\n0\n0.5\n1\n")], tmp_path)
        assert rep["value"] == pytest.approx(5 / 18)
        assert "spec" in rep["inputs"]

    def test_multirdu(self, files, tmp_path):
        spec = files("s.json", json.dumps({"functional": "multirdu", "weight_map": {"family": "constant", "value": [1, 2]}}))
        code, rep = run(["eval", "--spec", spec, "--ref", "grid:16", "--input", files("u.csv", "x1,x2\n1,1\n3,0\n")], tmp_path)
        assert code == 0 and rep["value"] == pytest.approx(2 + 1)

    def test_yaari(self, files, tmp_path):
        spec = files("s.json", json.dumps({"functional": "yaari", "alphas": [1, 1], "phis": [{"family": "polynomial", "coefficients": [2, -2]}] * 2}))
        code, rep = run(["eval", "--spec", spec, "--input", files("u.csv", "x1,x2\n0,1\n1,0\n")], tmp_path)
        assert rep["value"] == pytest.approx(0.5)

    def test_malformed_csv(self, files, tmp_path):
        code, rep = run(["eval", "--distortion", "power:2", "--input", files("bad.csv", "x1,w\n0,1\n1,-1\n")], tmp_path)
        assert code == 3 and rep["line"] == 3

    def test_missing_file(self, tmp_path):
        code, rep = run(["eval", "--distortion", "power:2", "--input", str(tmp_path / "nope.csv")], tmp_path)
        assert code == 3

    def test_bad_json(self, files, tmp_path):
        spec = files("s.json", "{\n  oops\n}")
        code, rep = run(["eval", "--spec", spec, "--input", files("u.csv", U01)], tmp_path)
        assert code == 3 and rep["line"] == 2


class TestArtifacts:
    def test_quantile_csv(self, files, tmp_path):
        code, rep = run(["quantile", "--input", files("u.csv", "x1\n3\n1\n2\n0\n"), "--ref", "grid:4"], tmp_path, "q.json")
        lines = (tmp_path / "q.quantile.csv").read_text().splitlines()
        assert lines[0] == "u1,x1,w"
        assert [float(l.split(",")[1]) for l in lines[1:]] == [0, 1, 2, 3]

    def test_localutility_csv(self, files, tmp_path):
        code, rep = run(["localutility", "--distortion", "power:2", "--input", files("u.csv", U01)], tmp_path, "lu.json")
        lines = (tmp_path / "lu.lu.csv").read_text().splitlines()
        assert lines[:3] == ["x1,U", "-0.5,-1.25", "0.0,-0.25"]

    def test_insure(self, files, tmp_path):
        code, rep = run(["insure", "--distortion", "power:2", "--input", files("u.csv", "x1\n0\n0.5\n1\n")], tmp_path)
        assert rep["value"] == pytest.approx(1 / 12, abs=1e-9)


class TestAversionCompare:
    def test_pessimistic(self, tmp_path):
        code, rep = run(["aversion", "--test", "pessimistic", "--distortion", "power:0.5"], tmp_path)
        assert code == 1

    def test_concave_and_mmpir(self, files, tmp_path):
        f = files("u.csv", "x1\n0\n0.5\n1\n")
        assert run(["aversion", "--test", "concave", "--distortion", "power:2", "--input", f], tmp_path)[0] == 0
        assert run(["aversion", "--test", "mmpir", "--distortion", "power:0.5", "--input", f], tmp_path)[0] == 1

    def test_multirdu_tests(self, files, tmp_path):
        spec = files("s.json", json.dumps({"functional": "multirdu", "weight_map": {"family": "affine", "alpha": 1.0, "u0": [1, 1]}}))
        bad = files("b.json", json.dumps({"functional": "multirdu", "weight_map": {"family": "linear", "matrix": [[1, 0], [0, 1]]}}))
        x = files("x.csv", "x1,x2\n0,0\n1,0\n0,1\n")
        base = ["--input", x, "--ref", "grid:16", "--count", "5"]
        assert run(["aversion", "--test", "weak", "--spec", spec, *base], tmp_path)[0] == 0
        assert run(["aversion", "--test", "weak", "--spec", bad, *base], tmp_path)[0] == 1
        assert run(["aversion", "--test", "mu-mmpir", "--spec", bad, *base], tmp_path)[0] == 1
        assert run(["aversion", "--test", "mpir-averse", "--spec", spec, *base], tmp_path)[0] == 0

    def test_compare(self, files, tmp_path):
        a = files("a.json", json.dumps({"weight_map": {"family": "affine", "alpha": 1.0, "u0": [1, 1]}}))
        b = files("b.json", json.dumps({"weight_map": {"family": "affine", "alpha": 3.0, "u0": [1, 1]}}))
        code, rep = run(["compare", "--spec", a, "--spec-b", a, "--ref", "grid:16", "--count", "10"], tmp_path)
        assert code == 0 and rep["certificate"]["kernel_vectors"] > 0


class TestDeterminism:
    def test_reports_identical_except_runtime(self, files, tmp_path):
        args = ["order", "--kind", "mubl", "--x", files("a.csv", "x1\n0\n1\n2\n"), "--y", files("b.csv", "x1\n-1\n1\n4\n"), "--ref", "sobol:8", "--seed", "7"]
        _, r1 = run(args, tmp_path, "1.json")
        _, r2 = run(args, tmp_path, "1.json")
        r1.pop("runtime_ms"), r2.pop("runtime_ms")
        assert json.dumps(r1, sort_keys=True) == json.dumps(r2, sort_keys=True)
        assert r1["seed"] == 7

    def test_module_entry_point(self, files):
        proc = subprocess.run(
            [sys.executable, "-m", "mvrisk", "eval", "--distortion", "power:2", "--input", files("u.csv", U01)],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0
        assert json.loads(proc.stdout)["value"] == pytest.approx(0.25)
