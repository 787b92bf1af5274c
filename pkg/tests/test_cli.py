import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from ssplmm.cli import main
from ssplmm.document import DocumentError, MethodDocument
from ssplmm.methods import dlmm32, lmm32


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def _write(tmp_path, name, doc):
    path = tmp_path / name
    path.write_text(doc if isinstance(doc, str) else doc.to_json())
    return str(path)


class TestOptimize:
    def test_two_step_downwind(self, capsys):
        code, out = run(capsys, "optimize", "--family", "perturbed", "--k", "2", "--p", "2",
                        "--y", "4")
        doc = json.loads(out)
        assert code == 0
        assert doc["kind"] == "perturbed" and doc["k"] == 2 and doc["p"] == 2
        assert abs(doc["r"] - 0.3465) <= 1e-3
        assert len(doc["alpha"]) == 2 and len(doc["beta"]) == 3 and len(doc["beta_second"]) == 3
        assert doc["meta"]["tol"] == 1e-6

    def test_exit_codes(self, capsys):
        code, out = run(capsys, "optimize", "--family", "classical", "--k", "2", "--p", "2")
        assert code == 3 and json.loads(out) == {"status": "infeasible"}
        code, out = run(capsys, "optimize", "--family", "classical", "--k", "1", "--p", "1")
        assert code == 0 and json.loads(out)["r"] == pytest.approx(1.0)
        code, out = run(capsys, "optimize", "--family", "classical", "--k", "1", "--p", "1",
                        "--implicit")
        assert code == 4
        assert run(capsys, "optimize", "--family", "perturbed", "--k", "0", "--p", "2")[0] == 2
        with pytest.raises(SystemExit) as info:
            main(["optimize", "--family", "nonsense", "--k", "1", "--p", "1"])
        assert info.value.code == 2

    def test_pretty(self, capsys):
        code, out = run(capsys, "optimize", "--family", "classical", "--k", "1", "--p", "1",
                        "--pretty")
        assert code == 0 and out.count("\n") > 5


class TestRegion:
    def _rows(self, out):
        return list(csv.reader(io.StringIO(out)))

    def test_perturbed(self, capsys):
        code, out = run(capsys, "region", "--family", "perturbed", "--k", "2", "--p", "2",
                        "--ymin", "0.1", "--ymax", "10", "--n", "5", "--threads", "1")
        rows = self._rows(out)
        assert code == 0 and rows[0] == ["y", "C", "C_second"] and len(rows) == 6
        mid = rows[3]
        assert float(mid[0]) == pytest.approx(1.0) and float(mid[1]) == pytest.approx(0.5, abs=1e-3)

    def test_single_point_and_bad_range(self, capsys):
        code, out = run(capsys, "region", "--family", "perturbed", "--k", "2", "--p", "2",
                        "--ymin", "1", "--ymax", "1", "--n", "1")
        assert code == 0 and len(self._rows(out)) == 2
        assert run(capsys, "region", "--family", "perturbed", "--k", "2", "--p", "2",
                   "--ymin", "0", "--ymax", "1", "--n", "3")[0] == 2
        assert run(capsys, "region", "--family", "perturbed", "--k", "2", "--p", "2",
                   "--ymin", "2", "--ymax", "1", "--n", "3")[0] == 2

    def test_imex(self, capsys):
        code, out = run(capsys, "region", "--family", "imex", "--k", "3", "--p", "2",
                        "--ymin", "0.1", "--ymax", "10", "--n", "4")
        cs = [float(r[1]) for r in self._rows(out)[1:]]
        assert code == 0 and min(cs) >= 0 and max(cs) > 0

    def test_output_independent_of_threads(self, capsys, monkeypatch):
        args = ["region", "--family", "perturbed", "--k", "3", "--p", "2", "--n", "4"]
        _, one = run(capsys, *args, "--threads", "1")
        monkeypatch.setenv("THREADS", "3")
        _, many = run(capsys, *args)
        assert one == many
        monkeypatch.setenv("THREADS", "lots")
        assert run(capsys, *args)[0] == 2


class TestCertify:
    def test_downwind_table(self, capsys, tmp_path):
        path = _write(tmp_path, "d.json", MethodDocument.from_table(dlmm32(), 2))
        code, out = run(capsys, "certify", "--input", path, "--y", "1", "--order", "2")
        rep = json.loads(out)
        assert code == 0 and rep["order_ok"]
        assert rep["ssp"]["r"] == pytest.approx(2 / 7, abs=1e-15)

    def test_zero_coefficient_table(self, capsys, tmp_path):
        path = _write(tmp_path, "l.json", MethodDocument.from_table(lmm32(), 2))
        code, out = run(capsys, "certify", "--input", path)
        assert code == 0 and json.loads(out)["ssp"]["r"] == 0.0

    def test_order_failure(self, capsys, tmp_path):
        path = _write(tmp_path, "d.json", MethodDocument.from_table(dlmm32(), 2))
        assert run(capsys, "certify", "--input", path, "--order", "3")[0] == 5

    @pytest.mark.parametrize("text", [
        '{"kind": "classical", "k": 1, "p": 1, "alpha": [0], "beta": [0, 0]}',
        '{"kind": "classical", "k": 2, "alpha": [1.0], "beta": [0, 0, 0]}',
        '{"kind": "weird", "k": 1, "alpha": [1], "beta": [1, 0]}',
        "not json",
        "[1, 2]",
    ])
    def test_malformed(self, capsys, tmp_path, text):
        assert run(capsys, "certify", "--input", _write(tmp_path, "bad.json", text))[0] == 2

    def test_missing_file(self, capsys, tmp_path):
        assert run(capsys, "certify", "--input", str(tmp_path / "none.json"))[0] == 2

    @pytest.mark.parametrize("family,k,p,y,extra", [
        ("perturbed", 2, 2, "4", []), ("perturbed", 5, 3, "0.5", ["--implicit"]),
        ("additive", 4, 2, "1", []), ("imex", 3, 2, "1", []), ("classical", 4, 3, "1", []),
    ])
    def test_round_trip(self, capsys, tmp_path, family, k, p, y, extra):
        _, out = run(capsys, "optimize", "--family", family, "--k", str(k), "--p", str(p),
                     "--y", y, *extra)
        doc = json.loads(out)
        code, rep = run(capsys, "certify", "--input", _write(tmp_path, "m.json", out))
        rep = json.loads(rep)
        assert code == 0 and rep["order_ok"]
        assert abs(rep["ssp"]["r"] - doc["r"]) <= 1e-9
        if family == "perturbed":
            assert rep["nonzero_bound_ok"]
        if family == "additive":
            assert rep["beta_equality_ok"]


class TestIntegrate:
    def test_downwind_sweep(self, capsys):
        code, out = run(capsys, "integrate", "--problem", "cubic", "--method", "dlmm32",
                        "--dt", str(8 / 7), "--steps", "1000")
        rep = json.loads(out)
        assert code == 0 and rep["monotone"] and rep["max_violation"] == 0.0

    def test_optimal_table(self, capsys, tmp_path):
        _, doc = run(capsys, "optimize", "--family", "perturbed", "--k", "2", "--p", "2",
                     "--y", "4")
        path = _write(tmp_path, "m.json", doc)
        code, out = run(capsys, "integrate", "--problem", "cubic", "--method", path,
                        "--dt", "1.386", "--steps", "1000")
        assert code == 0 and json.loads(out)["monotone"]

    def test_zero_steps_and_csv(self, capsys, tmp_path):
        out_csv = tmp_path / "t.csv"
        code, out = run(capsys, "integrate", "--problem", "leveque-yee", "--method", "dlmm32",
                        "--dt", "0.001", "--steps", "0", "--m", "20", "--mu", "5",
                        "--out", str(out_csv))
        rep = json.loads(out)
        assert code == 0 and rep["monotone"] and rep["max_violation"] == 0
        rows = list(csv.reader(out_csv.open()))
        assert rows[0][:3] == ["n", "t", "u0"] and len(rows) == 3 and len(rows[0]) == 22

    def test_max_dt(self, capsys):
        code, out = run(capsys, "integrate", "--problem", "cubic", "--method", "forward-euler",
                        "--dt", "1", "--steps", "200", "--find-max-dt", "--dt-bracket", "1", "8")
        assert code == 0 and json.loads(out)["max_monotone_dt"] >= 4 - 1e-2

    def test_imex_problem(self, capsys, tmp_path):
        _, doc = run(capsys, "optimize", "--family", "imex", "--k", "3", "--p", "2",
                     "--y", "0.5")
        path = _write(tmp_path, "m.json", doc)
        code, out = run(capsys, "integrate", "--problem", "leveque-yee-imex", "--method", path,
                        "--dt", "0.002", "--steps", "100", "--m", "100", "--mu", "66.6")
        assert code == 0 and json.loads(out)["monotone"]

    def test_newton_failure_exit(self, capsys, monkeypatch):
        import ssplmm.cli as cli
        from ssplmm.integrate import NewtonError

        def fail(*args, **kwargs):
            raise NewtonError(0.5, 50)

        monkeypatch.setattr(cli, "integrate", fail)
        code, out = run(capsys, "integrate", "--problem", "cubic", "--method", "dlmm32",
                        "--dt", "0.5", "--steps", "5")
        assert code == 6
        rep = json.loads(out)
        assert rep["status"] == "newton-failure" and rep["residual"] == 0.5

    def test_usage_errors(self, capsys):
        assert run(capsys, "integrate", "--problem", "cubic", "--method", "nope",
                   "--dt", "1")[0] == 2
        assert run(capsys, "integrate", "--problem", "cubic", "--method", "dlmm32",
                   "--dt", "-1")[0] == 2
        assert run(capsys, "integrate", "--problem", "cubic", "--method", "dlmm32",
                   "--dt", "1", "--u0", "2")[0] == 2


class TestDocument:
    def test_lossless_round_trip(self):
        rng = np.random.default_rng(0)
        alpha = rng.random(4)
        alpha /= alpha.sum()
        doc = MethodDocument("perturbed", 4, 2, 1.0 / 3, 0.1, 0.1 / 3, list(alpha),
                             list(rng.random(5)) [:4] + [0.0], list(rng.random(4)) + [0.0])
        back = MethodDocument.from_json(doc.to_json())
        assert back.alpha == doc.alpha and back.beta == doc.beta
        assert back.y == doc.y and back.r_second == doc.r_second

    def test_rejects_sum(self):
        with pytest.raises(DocumentError):
            MethodDocument.from_json('{"kind":"classical","k":1,"alpha":[0.5],"beta":[1,0]}')


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "ssplmm", "optimize", "--family", "classical",
                           "--k", "2", "--p", "2"], capture_output=True, text=True)
    assert proc.returncode == 3
