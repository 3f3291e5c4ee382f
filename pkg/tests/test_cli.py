import csv
import json

import networkx as nx
import pytest

from subnav.cli import EXIT_GENERATION, EXIT_MISSING, EXIT_PARSE, EXIT_VALIDATION, main
from subnav.graph import write_edge_list
from subnav.heuristics import brute_force
from subnav.metrics import FIELDS, read_metrics

from conftest import graph_of

PIPELINE = [["split"], ["solve", "--which", "train"], ["solve", "--which", "test"], ["gen-dataset"],
            ["train-encoder"], ["train-agent"], ["evaluate"], ["baseline"], ["export-embedding"], ["report"]]

TINY = """graph = {graph}
problem = {problem}
b = 5
M = 30
K = 4
n_per_class = 8
train_fraction = 0.5
hidden = 6
out_dim = 4
epochs = 3
batch = 16
T_train = 15
episodes = 1
c = 5
batch = 8
beta = 5
T_test = 5
test_episodes = 2
n_sim = 100
n_rr = 500
classifier_epochs = 5
gcomb_L = 2
budgets = 1,2,5
"""


def tiny_config(tmp_path, problem="MVC"):
    edges = tmp_path / "ba.edges"
    edges.write_text("".join(f"{u} {v}\n" for u, v in nx.barabasi_albert_graph(300, 3, seed=0).edges()))
    cfg = tmp_path / f"{problem}.cfg"
    cfg.write_text(TINY.format(graph=edges, problem=problem))
    return cfg


def run(cfg, out, *cmd, seed=None):
    argv = ["--config", str(cfg), "--out-dir", str(out)] + (["--seed", str(seed)] if seed is not None else [])
    return main(argv + list(cmd))


@pytest.mark.parametrize("problem", ["MVC", "BMC", "IM"])
def test_full_pipeline(tmp_path, problem):
    cfg, out = tiny_config(tmp_path, problem), tmp_path / "out"
    for cmd in PIPELINE:
        assert run(cfg, out, *cmd) == 0, cmd
    for name in ("metrics.csv", "episodes.csv", "baseline_metrics.csv", "multibudget.csv"):
        with open(out / name) as fh:
            assert tuple(next(csv.reader(fh))) == FIELDS
    assert [r.method for r in read_metrics(out / "baseline_metrics.csv")] == ["gnn-r", "gnn-t", "gcomb-p"]
    assert [r.budget for r in read_metrics(out / "multibudget.csv")] == [1, 2, 5]
    with open(out / "embedding.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 32 and set(rows[0]) == {"x", "y", "label"}
    assert len(json.loads((out / "subgraphs.json").read_text())["episodes"]) == 2


def test_identity_evaluation(tmp_path):
    cfg, out = tiny_config(tmp_path), tmp_path / "out"
    for cmd in PIPELINE[:3]:
        assert run(cfg, out, *cmd) == 0
    assert run(cfg, out, "evaluate", "--method", "identity") == 0
    (row,) = read_metrics(out / "metrics.csv")
    assert (row.method, row.ratio, row.P_V, row.P_E) == ("identity", 1.0, 0.0, 0.0)


def test_report_on_subgraph_containing_optimum(tmp_path):
    # ten small stars; the best b centres cover the most edges
    leaves = [1, 1, 1, 1, 1, 2, 2, 3, 3, 4]
    edges = [(100 * c, 100 * c + i) for c, k in enumerate(leaves, 1) for i in range(1, k + 1)]
    g = graph_of(edges)
    out = tmp_path / "out"
    out.mkdir()
    write_edge_list(g, out / "test.edges")
    centres = [100 * c for c in range(1, 11)]
    for b in (1, 5):
        best = brute_force("MVC", g, b)
        assert {int(g.labels[v]) for v in best.vertices} <= set(centres)
    (out / "subgraphs.json").write_text(json.dumps({"episodes": [{"X": centres}]}))
    cfg = tmp_path / "r.cfg"
    cfg.write_text("problem = MVC\n")
    assert run(cfg, out, "report", "--budgets", "1,5,10") == 0
    assert all(r.ratio >= 1 - 1e-12 for r in read_metrics(out / "multibudget.csv"))


def test_missing_artifact_names_producer(tmp_path, capsys):
    cfg = tiny_config(tmp_path)
    assert run(cfg, tmp_path / "empty", "gen-dataset") == EXIT_MISSING
    assert "subnav split" in capsys.readouterr().err


def test_parse_and_validation_codes(tmp_path):
    bad = tmp_path / "bad.edges"
    bad.write_text("0 1\n1 two\n")
    cfg = tmp_path / "c.cfg"
    cfg.write_text(f"graph = {bad}\n")
    assert run(cfg, tmp_path / "o", "split") == EXIT_PARSE
    bad.write_text("0 1 -1\n")
    cfg.write_text(f"graph = {bad}\nweighted = true\n")
    assert run(cfg, tmp_path / "o", "split") == EXIT_VALIDATION
    cfg.write_text("unknown_key = 1\n")
    assert run(cfg, tmp_path / "o", "split") == EXIT_PARSE


def test_generation_error_code(tmp_path):
    edges = tmp_path / "star.edges"
    edges.write_text("".join(f"0 {i}\n" for i in range(1, 80)))
    cfg = tmp_path / "c.cfg"
    cfg.write_text(f"graph = {edges}\nb = 1\nM = 3\nn_per_class = 2\ntrain_fraction = 0.5\n")
    out = tmp_path / "o"
    assert run(cfg, out, "split") == 0
    assert run(cfg, out, "solve") == 0
    assert run(cfg, out, "gen-dataset") == EXIT_GENERATION


def test_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["no-such-command"])
    assert exc.value.code == 2
