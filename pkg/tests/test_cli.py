import json
import shutil
import subprocess

import numpy as np
import pytest

from spdmeans.cli import EXIT_CERT, EXIT_INPUT, EXIT_NONCONV, EXIT_OK, main, run_command
from spdmeans.fileio import (
    InputError,
    decode_matrix,
    dumps,
    encode_matrix,
    parse_problem,
    problem_from_dict,
    problem_to_dict,
    read_matrix_file,
    write_json,
)
from spdmeans.harness import random_spd
from spdmeans.meansm import MeanProblem, karcher_mean


def problem_doc(mats, weights=None):
    m = len(mats)
    return {"schema_version": 1, "n": len(mats[0]), "m": m,
            "weights": weights or [1.0 / m] * m,
            "matrices": [np.asarray(A).tolist() for A in mats]}


@pytest.fixture
def pfile(tmp_path):
    def make(doc, name="p.json"):
        path = tmp_path / name
        path.write_text(json.dumps(doc))
        return str(path)
    return make


class TestProblemFiles:
    def test_round_trip_bitwise(self, rng, tmp_path):
        P = MeanProblem([0.3, 0.7], [random_spd(3, 1e3, rng), random_spd(3, 1e3, rng)])
        path = tmp_path / "p.json"
        write_json(path, problem_to_dict(P, ["a", "b"]))
        Q = parse_problem(path)
        np.testing.assert_array_equal(Q.weights, P.weights)
        for A, B in zip(P.matrices, Q.matrices):
            np.testing.assert_array_equal(A, B)

    def test_matrix_codec(self, rng):
        M = rng.standard_normal((3, 3)) * 1e-300
        np.testing.assert_array_equal(decode_matrix(encode_matrix(M)), M)

    def test_valid(self, pfile):
        P = parse_problem(pfile(problem_doc([np.eye(2), 2 * np.eye(2)])))
        assert P.m == 2

    def test_weight_sum(self, pfile):
        with pytest.raises(InputError, match="weights sum"):
            parse_problem(pfile(problem_doc([np.eye(2), np.eye(2)], [0.3, 0.3])))

    def test_small_weight_drift_renormalized(self):
        with pytest.warns(UserWarning, match="renormalized"):
            P = problem_from_dict(problem_doc([np.eye(2), np.eye(2)], [0.5, 0.5 + 5e-9]))
        assert P.weights.sum() == pytest.approx(1.0, abs=1e-15)

    def test_not_positive_definite(self, pfile):
        with pytest.raises(InputError, match="matrix 1 not positive definite"):
            parse_problem(pfile(problem_doc([np.eye(2), np.diag([1.0, -1.0])])))

    def test_symmetry(self, pfile):
        with pytest.raises(InputError, match=r"symmetry violation at \(0,1\)"):
            parse_problem(pfile(problem_doc([np.eye(2), [[1.0, 0.2], [0.1, 1.0]]])))

    def test_json_position(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"n": 2,\n "m": }')
        with pytest.raises(InputError, match="line 2 column"):
            parse_problem(path)

    def test_missing_field_and_schema(self):
        doc = problem_doc([np.eye(2)])
        del doc["weights"]
        with pytest.raises(InputError, match="missing field"):
            problem_from_dict(doc)
        doc = problem_doc([np.eye(2)])
        doc["schema_version"] = 99
        with pytest.raises(InputError, match="schema_version"):
            problem_from_dict(doc)

    def test_dumps_encodes_non_finite(self):
        text = dumps({"x": float("inf"), "M": np.eye(2)})
        assert json.loads(text)["x"] == "inf"


class TestCommands:
    def test_gen_then_karcher(self, tmp_path):
        p, r = str(tmp_path / "p.json"), str(tmp_path / "r.json")
        assert main(["gen", "--n", "3", "--m", "3", "--cond", "50", "--seed", "1", "--out", p]) == 0
        assert main(["mean", "--kind", "karcher", "--input", p, "--out", r]) == EXIT_OK
        rep = json.loads(open(r).read())
        assert rep["results"]["converged"] and rep["results"]["residual"] <= 1e-12
        X = read_matrix_file(r)
        np.testing.assert_array_equal(X, karcher_mean(parse_problem(p)).solution)
        assert rep["tolerances"]["tol"] == 1e-12 and rep["citations"]
        assert p in rep["inputs"]

    @pytest.mark.parametrize("kind", ["arithmetic", "harmonic", "log-euclidean", "wasserstein"])
    def test_mean_kinds(self, pfile, rng, kind):
        p = pfile(problem_doc([random_spd(2, 10, rng), random_spd(2, 10, rng)]))
        code, rep = run_command(["mean", "--kind", kind, "--input", p])
        assert code == EXIT_OK and "solution" in rep["results"]

    def test_mean_power_and_generalized(self, pfile, rng):
        p = pfile(problem_doc([random_spd(2, 10, rng), random_spd(2, 10, rng)]))
        assert run_command(["mean", "--kind", "power", "--t", "0.5", "--input", p])[0] == EXIT_OK
        assert run_command(["mean", "--kind", "power", "--input", p])[0] == EXIT_INPUT
        code, _ = run_command(["mean", "--kind", "generalized", "--g", "x-1", "--input", p])
        assert code == EXIT_OK

    @pytest.mark.parametrize("kind,extra", [("geo", []), ("spectral", []), ("wasserstein", []),
                                            ("alt", ["--f", "harmonic"])])
    def test_mean2(self, pfile, rng, kind, extra):
        p = pfile(problem_doc([random_spd(3, 10, rng), random_spd(3, 10, rng)]))
        code, rep = run_command(["mean2", "--kind", kind, "--t", "0.3", "--input", p] + extra)
        assert code == EXIT_OK
        assert rep["results"].get("equation_residual", 0.0) <= 1e-10

    def test_solve_and_nonconvergence(self, pfile, rng):
        p = pfile(problem_doc([random_spd(3, 50, rng) for _ in range(3)]))
        code, rep = run_command(["solve", "--input", p])
        assert code == EXIT_OK and rep["results"]["converged"]
        code, rep = run_command(["solve", "--input", p, "--max-iter", "1"])
        assert code == EXIT_NONCONV and not rep["results"]["converged"]

    def test_solve_from_x0(self, pfile, rng, tmp_path):
        p = pfile(problem_doc([random_spd(2, 10, rng) for _ in range(2)]))
        x0 = tmp_path / "x0.json"
        x0.write_text(json.dumps({"matrix": np.eye(2).tolist()}))
        code, rep = run_command(["solve", "--input", p, "--x0", str(x0), "--method", "newton"])
        assert code == EXIT_OK and str(x0) in rep["inputs"]

    def test_explore(self, pfile, rng):
        p = pfile(problem_doc([random_spd(2, 10, rng) for _ in range(3)]))
        code, rep = run_command(["explore", "--input", p, "--starts", "4", "--seed", "1"])
        assert code == EXIT_OK and len(rep["results"]["clusters"]) == 1

    def test_input_errors(self, pfile, tmp_path):
        assert run_command(["mean", "--kind", "median"])[0] == EXIT_INPUT
        assert run_command(["mean", "--kind", "karcher"])[0] == EXIT_INPUT
        assert run_command(["mean", "--kind", "karcher", "--input", str(tmp_path / "no")])[0] == EXIT_INPUT
        bad = pfile(problem_doc([np.eye(2), np.eye(2)], [0.3, 0.3]))
        code, rep = run_command(["mean", "--kind", "karcher", "--input", bad])
        assert code == EXIT_INPUT and "weights sum" in rep["error"]
        assert run_command(["frobnicate"])[0] == EXIT_INPUT
        assert run_command(["mean", "--kind", "karcher", "--tol", "0", "--input", bad])[0] == EXIT_INPUT

    def test_main_reports_errors_on_stderr(self, capsys):
        assert main(["mean", "--kind", "median"]) == EXIT_INPUT
        assert "error:" in capsys.readouterr().err

    def test_counterexample(self, tmp_path):
        code, rep = run_command(["counterexample", "reproduce", "--samples", "512"])
        res = rep["results"]
        assert code == EXIT_OK and res["reproduced"]
        assert res["residual_X0"] <= 1e-12 and res["certificate"]["certified"]
        assert res["thompson_X_star_X0"] > 0.1

    def test_counterexample_build_and_certify(self, tmp_path):
        out = str(tmp_path / "inst.json")
        assert main(["counterexample", "build", "--out", out]) == EXIT_OK
        assert parse_problem(out).m == 3
        code, _ = run_command(["counterexample", "certify", "--samples", "256"])
        assert code == EXIT_OK
        code, rep = run_command(["counterexample", "certify", "--samples", "256",
                                 "--rect", "2.1124743,2.1234743,0.5194188906,0.5254188906"])
        assert code == EXIT_CERT and not rep["results"]["certified"]
        assert run_command(["counterexample", "certify", "--rect", "1,0,0,1"])[0] == EXIT_INPUT

    def test_verify(self):
        code, rep = run_command(["verify", "--suite", "two-var-chain", "--trials", "100", "--seed", "7"])
        assert code == EXIT_OK and rep["results"]["passes"] == 100

    def test_verify_failure_exit(self):
        code, rep = run_command(["verify", "--suite", "multi-chain", "--trials", "10",
                                 "--seed", "3", "--check-tol", "0"])
        assert code == EXIT_CERT and rep["results"]["failures"]

    def test_conjecture(self):
        code, rep = run_command(["conjecture", "--id", "s-wlog-omega", "--trials", "5", "--seed", "1"])
        assert code == EXIT_OK and rep["results"]["violations"] == 0
        assert "evidence" in rep["results"]["label"]

    def test_byte_identical_except_timing(self, tmp_path):
        p = str(tmp_path / "p.json")
        main(["gen", "--n", "3", "--m", "2", "--seed", "4", "--out", p])
        outs = []
        for k in range(2):
            r = str(tmp_path / f"r{k}.json")
            assert main(["solve", "--input", p, "--out", r]) == EXIT_OK
            doc = json.loads(open(r).read())
            doc.pop("timing")
            doc["command"] = [c for c in doc["command"] if c != r]
            outs.append(dumps(doc))
        assert outs[0] == outs[1]

    @pytest.mark.skipif(shutil.which("spdmeans") is None, reason="console script not installed")
    def test_console_script(self):
        proc = subprocess.run(["spdmeans", "gen", "--n", "2", "--m", "2"], capture_output=True,
                              text=True, check=False)
        assert proc.returncode == 0 and json.loads(proc.stdout)["m"] == 2
