import io

import pytest

from dcsens.cli import RunConfig, parse_config, run

from conftest import DIAGRAMS

MINI = str(DIAGRAMS / "mini_umbrella.yaml")
REPORT = str(DIAGRAMS / "report_umbrella.yaml")
GATHER = str(DIAGRAMS / "gather_umbrella.yaml")


def cli(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def test_evaluate_mini():
    code, out, err = cli("evaluate", MINI)
    assert code == 0 and not err
    assert "ce=70.00" in out and "meu=0.7\n" in out and "strategy.B=take" in out and "p_evidence=1\n" in out


def test_evaluate_evidence():
    code, out, _ = cli("evaluate", REPORT, "--evidence", "R=rainy")
    assert code == 0
    assert "strategy.B[R=rainy]=take" in out


def test_voi_mini():
    code, out, _ = cli("voi", MINI, "--vars", "W")
    assert code == 0 and "voi=18.00" in out and "methods_agree=true" in out


def test_intervals_extensive():
    code, out, _ = cli("intervals", GATHER, "--exact")
    assert code == 0
    for key in ("tau1.tight", "tau1.weak", "tau1.exact", "tau2.tight", "tau2.weak"):
        assert key in out


def test_plot_csv():
    code, out, _ = cli("plot", MINI, "--meta", "theta_sun", "--resolution", "0.25")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "tau,ce_problem,ce_strategy,opt_strategy"
    assert len(lines) == 6 and lines[-1].startswith("1,100,70,")


def test_plot_strategy_file(tmp_path):
    f = tmp_path / "s.yaml"
    f.write_text("B: leave\n")
    code, out, _ = cli("plot", MINI, "--meta", "theta_sun", "--resolution", "0.5", "--strategy", str(f))
    assert code == 0
    assert out.splitlines()[1].split(",")[2] == "0"


def test_plot_bad_strategy_file(tmp_path):
    f = tmp_path / "s.yaml"
    f.write_text("B: fly\n")
    code, _, err = cli("plot", MINI, "--meta", "theta_sun", "--strategy", str(f))
    assert code == 2 and "unknown alternative" in err


@pytest.mark.parametrize("path", [MINI, REPORT, GATHER])
@pytest.mark.parametrize("cmd", [["evaluate"], ["voi", "--vars", "W"], ["intervals", "--exact"], ["compile"],
                                 ["plot", "--meta", None, "--resolution", "0.1"]])
def test_oracle_flag_agrees(path, cmd):
    if cmd[0] == "plot":
        meta = {MINI: "theta_sun", REPORT: "theta_sunny", GATHER: "tau1"}[path]
        cmd = [c if c is not None else meta for c in cmd]
    code, out, _ = cli(cmd[0], path, *cmd[1:], "--oracle")
    assert code == 0
    check = [ln for ln in out.splitlines() if "oracle_agree=" in ln]
    assert len(check) == 1 and "oracle_agree=true delta=" in check[0]


def test_compile_emit_graph(tmp_path):
    g = tmp_path / "c.dot"
    code, out, _ = cli("compile", REPORT, "--emit-graph", str(g))
    assert code == 0 and "max_nodes=2" in out
    assert g.read_text().startswith("digraph")


def test_csv_format():
    code, out, _ = cli("evaluate", MINI, "--format", "csv")
    assert out.splitlines()[0] == "key,value" and "ce,70.00" in out


def test_output_file(tmp_path):
    p = tmp_path / "out.txt"
    code, out, _ = cli("evaluate", MINI, "--output", str(p))
    assert code == 0 and out == "" and "ce=70.00" in p.read_text()


def test_exit_codes(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("format: 1\nvariables:\n  - {id: X, kind: chance, outcomes: [a, b]}\n"
                   "chance:\n  - {variable: X, parents: [], cpt: [0.5, 0.4]}\n")
    code, out, err = cli("validate", str(bad))
    assert code == 1 and "row sum" in err and out == ""
    assert cli("evaluate", str(tmp_path / "missing.yaml"))[0] == 1
    assert cli("voi", MINI, "--vars", "B")[0] == 2
    assert cli("voi", GATHER, "--vars", "R")[0] == 2
    assert cli("plot", MINI, "--meta", "nope")[0] == 2
    assert cli("evaluate", MINI, "--evidence", "W")[0] == 2
    assert cli("evaluate", MINI, "--evidence", "B=take")[0] == 1
    assert cli("plot", MINI, "--meta", "theta_sun", "--resolution", "0")[0] == 2


def test_belief_network_queries(tmp_path):
    p = tmp_path / "bn.yaml"
    p.write_text("format: 1\nvariables:\n  - {id: X, kind: chance, outcomes: [a, b]}\n"
                 "chance:\n  - {variable: X, parents: [], cpt: [0.5, 0.5]}\n")
    assert cli("compile", str(p))[0] == 0
    assert cli("evaluate", str(p))[0] == 2


def test_determinism():
    a = cli("intervals", GATHER, "--exact")
    b = cli("intervals", GATHER, "--exact")
    assert a == b


def test_run_config_ranges():
    with pytest.raises(ValueError):
        RunConfig(input=MINI, command="evaluate", resolution=0.7)
    with pytest.raises(ValueError):
        RunConfig(input=MINI, command="bogus")
    cfg = parse_config(["voi", MINI, "--vars", "W, X", "--cap", "8"])
    assert cfg.variables == ("W", "X") and cfg.cap == 8
