import json

import pytest

from bandit_lab.cli import main
from bandit_lab.harness import CSV_COLUMNS, strip_timing


def test_net(capsys, tmp_path):
    out = tmp_path / "net.csv"
    assert main(["net", "--dim", "2", "--delta", "0.1", "--samples", "2000", "--csv", str(out)]) == 0
    text = capsys.readouterr().out
    assert "vertices          64" in text and "pass" in text
    assert out.read_text().startswith("dim,delta,vertices")


def test_verify_group(capsys, tmp_path):
    js = tmp_path / "g.json"
    assert main(["verify-group", "--kind", "permutation", "--dim", "3", "--json", str(js)]) == 0
    assert "|G|=6" in capsys.readouterr().out
    assert len(json.loads(js.read_text())["elements"]) == 6
    assert main(["verify-group", "--kind", "dihedral8", "--dim", "3"]) == 2


def test_graph_stats(capsys):
    assert main(["graph-stats", "--group", "dihedral8", "--dim", "2", "--delta", "0.1", "0.05"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].startswith("delta,V,V_D,clique_count,ratio")
    assert len(lines) == 3


def test_graph_stats_tree_engine(capsys):
    assert main(["graph-stats", "--group", "reflect1d", "--dim", "1", "--delta", "0.05", "--engine", "tree"]) == 0
    assert "tree" in capsys.readouterr().out


def test_ensemble(capsys, tmp_path):
    js = tmp_path / "e.json"
    assert main(["ensemble", "--group", "reflect1d", "--delta", "0.05", "--index", "0", "--json", str(js)]) == 0
    out = capsys.readouterr().out
    assert "strict packing W" in out and "lipschitz  pass" in out
    assert json.loads(js.read_text())["descriptor"]["kind"] == "bump"


def test_run_with_config_and_flags(capsys, tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text('dim = 1\ngroup = "reflect1d"\nhorizon = 300\nreplications = 2\n')
    out = tmp_path / "r.csv"
    trace = tmp_path / "t.csv"
    assert main(["run", "--config", str(cfg), "--horizon", "500", "--seed", "0", "--output", str(out),
                 "--trace", str(trace)]) == 0
    text = capsys.readouterr().out
    assert "n=500 reps=2" in text
    rows = out.read_bytes().decode().split("\r\n")
    assert rows[0] == ",".join(CSV_COLUMNS) and len(rows) == 4
    assert len(trace.read_bytes().decode().split("\r\n")) == 502


def test_run_finite_warmup(capsys):
    assert main(["run", "--algo", "invariant-ucb1", "--group", "shift3", "--arms", "12", "--horizon", "500",
                 "--seed", "0"]) == 0
    assert "invariant-ucb1" in capsys.readouterr().out


def test_sweep_deterministic(capsys, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["sweep", "--dim", "2", "--instance", "smooth", "--instance-group", "dihedral8", "--groups",
            "trivial,dihedral8", "--horizon", "300", "--replications", "2", "--seed", "0", "--clique-stats"]
    assert main(args + ["--output", str(a)]) == 0
    assert main(args + ["--output", str(b)]) == 0
    assert strip_timing(a.read_text()) == strip_timing(b.read_text())
    assert len(a.read_bytes().decode().split("\r\n")) == 6


def test_ratio_checks_cli(capsys, tmp_path):
    out = tmp_path / "l.csv"
    assert main(["lemma-checks", "--group", "dihedral4", "--dim", "2", "--deltas", "0.1", "0.05",
                 "--csv", str(out)]) == 0
    assert "domain_cover_band" in capsys.readouterr().out
    assert out.read_text().startswith("delta,V,VD,cliques")


def test_bad_subcommand():
    with pytest.raises(SystemExit):
        main(["zoom"])
