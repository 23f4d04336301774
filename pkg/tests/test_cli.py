import json
import subprocess
import sys

import pytest

from magicomm.cli import main


def _json(capsys, argv):
    code = main(argv + ["--format", "json"])
    out = capsys.readouterr().out
    return code, json.loads(out) if out.strip() else None


def test_verify_exhaustive(capsys, data_dir):
    code, rep = _json(capsys, ["verify", "--circuit", str(data_dir / "equality2.qc"), "--exhaustive"])
    assert code == 0
    assert rep["status"] == "ok"
    assert rep["result"]["inputs_checked"] == 16
    assert rep["command"] == ["verify"]
    assert len(rep["inputs"]["circuit"]) == 64


def test_verify_sampled(capsys, data_dir):
    code, rep = _json(capsys, ["verify", "--circuit", str(data_dir / "equality3.qc"), "--seeds", "20"])
    assert code == 0 and not rep["result"]["exhaustive"]


def test_compile_pdt_reports_bounds(capsys, data_dir):
    code, rep = _json(capsys, ["compile-pdt", "--circuit", str(data_dir / "equality1.qc")])
    assert code == 0
    res = rep["result"]
    assert res["bounds_hold"] and res["smp_cost_bits"] == 2 * res["depth"]


def test_syntax_error_exit_code(capsys, data_dir):
    code = main(["compile-pdt", "--circuit", str(data_dir / "bad.qc")])
    err = capsys.readouterr().err
    assert code == 2
    assert "line 5" in err


def test_usage_errors(capsys, data_dir):
    assert main(["compile-pdt"]) == 2
    assert main(["frobnicate"]) == 2
    assert main(["compile-pdt", "--circuit", str(data_dir / "missing.qc")]) == 2
    assert main(["compile-pdt", "--circuit", str(data_dir / "equality1.qc"), "--split", "3,3"]) == 2
    capsys.readouterr()


def test_gh_eval_and_search(capsys, data_dir):
    code, rep = _json(capsys, ["gh", "eval", "--protocol", str(data_dir / "gh_xor.json"), "--x", "1", "--y", "0"])
    assert code == 0 and rep["result"]["output"] == 1
    code, rep = _json(capsys, ["gh", "search", "--table", "0110"])
    assert code == 0 and rep["result"]["pipes"] == 3
    code, rep = _json(capsys, ["gh", "search", "--table", "0110", "--max-pipes", "2"])
    assert code == 1 and not rep["result"]["found"]
    assert main(["gh", "search", "--table", "011"]) == 2
    capsys.readouterr()


def test_gh_compose(capsys, data_dir):
    argv = ["gh", "compose", "--protocol", str(data_dir / "gh_and.json"),
            "--protocol", str(data_dir / "gh_xor.json"), "--c", "1"]
    code, rep = _json(capsys, argv)
    assert code == 0
    res = rep["result"]
    assert res["correct"] and res["bound_check"]
    assert res["pipe_bound"] == 4 * (2 + 3) + 1


def test_psm_run_and_audit(capsys, data_dir):
    spec = str(data_dir / "xor_d0.spec")
    code, rep = _json(capsys, ["psm", "run", "--spec", spec, "--x", "1", "--y", "0", "--seed", "3"])
    assert code == 0
    assert rep["result"]["transcript"]["output"] == 1
    assert rep["result"]["cost"]["quantum_messages_to_referee"] == 0
    code, rep = _json(capsys, ["psm", "audit", "--spec", spec])
    assert code == 0 and rep["result"]["passes"]
    assert main(["psm", "run", "--spec", spec, "--x", "11"]) == 2
    capsys.readouterr()


def test_psm_audit_is_reproducible(capsys, data_dir):
    argv = ["psm", "audit", "--spec", str(data_dir / "abcd2.spec"), "--seeds", "2000", "--seed", "7",
            "--format", "json"]
    assert main(argv) == 0
    first = capsys.readouterr().out
    assert main(argv) == 0
    assert capsys.readouterr().out == first


@pytest.mark.parametrize(
    "argv",
    [
        ["problems", "abcd", "--n", "2", "--case", "high"],
        ["problems", "abcd", "--n", "4", "--case", "low"],
        ["problems", "forrelation", "--n", "16"],
        ["problems", "equality", "--n", "2"],
        ["problems", "index", "--n", "4"],
        ["problems", "multiplexer", "--k", "3"],
    ],
)
def test_problems_commands(capsys, argv):
    code, rep = _json(capsys, argv)
    assert code == 0 and rep["status"] == "ok"


def test_text_format(capsys, data_dir):
    assert main(["gh", "eval", "--protocol", str(data_dir / "gh_and.json"), "--x", "1", "--y", "1"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("magicomm ")
    assert "spills on bob side" in out


def test_module_entry_point(data_dir):
    proc = subprocess.run(
        [sys.executable, "-m", "magicomm", "problems", "forrelation", "--n", "8", "--format", "json"],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["result"]["n"] == 8


def test_inputs_are_not_modified(capsys, data_dir):
    path = data_dir / "equality2.qc"
    before = path.read_bytes()
    main(["verify", "--circuit", str(path), "--exhaustive"])
    capsys.readouterr()
    assert path.read_bytes() == before
