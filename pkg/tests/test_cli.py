import json

import pytest

from fairim.cli import main

TINY = {"embedding_dim": 4, "hidden": [16], "critic_hidden": [4], "pretrain_epochs": 3,
        "critic_pretrain_steps": 3, "adversarial_epochs": 3}


@pytest.fixture
def graph_dir(tmp_path):
    assert main(["--seed", "5", "--out", str(tmp_path / "g"), "generate", "--n", "40",
                 "--p-intra-a", "0.2", "--p-intra-b", "0.2", "--p-inter", "0.02"]) == 0
    return tmp_path / "g"


def graph_args(d):
    return ["--edges", str(d / "graph.edges"), "--attributes", str(d / "attributes.csv")]


def test_generate_outputs(graph_dir):
    manifest = json.loads((graph_dir / "manifest.json").read_text())
    assert manifest["seed"] == 5 and manifest["params"]["n"] == 40
    assert (graph_dir / "attributes.csv").read_text().startswith("node_id,group\n0,A\n")
    assert (graph_dir / "graph.edges").read_text().startswith("#n 40\n")


def test_generate_is_seeded(tmp_path):
    for name in ("a", "b"):
        main(["generate", "--n", "30", "--seed", "9", "--out", str(tmp_path / name)])
    assert (tmp_path / "a" / "graph.edges").read_bytes() == (tmp_path / "b" / "graph.edges").read_bytes()


def test_full_pipeline(graph_dir, tmp_path):
    hyper = tmp_path / "h.json"
    hyper.write_text(json.dumps(TINY))
    t, s, b = tmp_path / "t", tmp_path / "s", tmp_path / "b"
    assert main(["train", *graph_args(graph_dir), "--config", str(hyper), "--out", str(t)]) == 0
    assert (t / "losses.csv").read_text().splitlines()[0] == "phase,epoch,recon,gap_group,embedder_total"
    assert main(["embed", "--checkpoint", str(t / "checkpoint.json"), "--edges", str(graph_dir / "graph.edges"),
                 "--out", str(t)]) == 0
    assert (t / "embedding.csv").read_text().startswith("node_id,z_0,z_1,z_2,z_3\n")
    assert main(["select", "--embedding", str(t / "embedding.csv"), *graph_args(graph_dir),
                 "--budget", "4", "--k", "2", "--out", str(s)]) == 0
    assert len((s / "seeds.txt").read_text().split()) == 4
    assert json.loads((s / "selection.json").read_text())["method"] == "fair_selection"
    assert main(["simulate", *graph_args(graph_dir), "--seeds-file", str(s / "seeds.txt"), "--p", "0.1",
                 "--rollouts", "200", "--out", str(s)]) == 0
    rep = json.loads((s / "influence.json").read_text())
    assert rep["rollouts"] == 200 and len(rep["seeds"]) == 4
    assert (s / "influence.csv").read_text().count("\n") == 2
    assert main(["baseline", "--edges", str(graph_dir / "graph.edges"), "--method", "greedy", "--budget", "3",
                 "--p", "0.1", "--rollouts", "100", "--out", str(b)]) == 0
    assert (b / "trace.csv").read_text().splitlines()[0] == "iteration,node,marginal_gain,gain_stderr,evaluations"


def test_normal_select_and_degree_baseline(graph_dir, tmp_path):
    assert main(["train", *graph_args(graph_dir), "--mode", "plain", "--out", str(tmp_path),
                 "--config", str(_write(tmp_path / "h.json", TINY))]) == 0
    assert main(["select", "--checkpoint", str(tmp_path / "checkpoint.json"), "--edges", str(graph_dir / "graph.edges"),
                 "--method", "normal", "--budget", "3", "--out", str(tmp_path)]) == 0
    assert main(["baseline", "--edges", str(graph_dir / "graph.edges"), "--method", "degree", "--budget", "2",
                 "--out", str(tmp_path / "d")]) == 0


def _write(path, doc):
    path.write_text(json.dumps(doc))
    return path


def test_experiment_and_report(graph_dir, tmp_path, capsys):
    cfg = _write(tmp_path / "exp.json", {
        "dataset": {"type": "files", "edges": str(graph_dir / "graph.edges"),
                    "attributes_file": str(graph_dir / "attributes.csv")},
        "attributes": ["group"], "methods": ["degree", "random"], "budgets": [1, 2], "rollouts": 50, "trials": 2,
    })
    out = tmp_path / "run"
    assert main(["experiment", "--config", str(cfg), "--out", str(out), "--seed", "3"]) == 0
    assert json.loads((out / "manifest.json").read_text())["master_seed"] == 3
    capsys.readouterr()
    assert main(["report", "--out", str(out)]) == 0
    assert "degree" in capsys.readouterr().out


def test_exit_code_config_error(tmp_path):
    bad = _write(tmp_path / "bad.json", {"dataset": {"type": "sbm"}, "attributes": ["group"], "methods": []})
    assert main(["experiment", "--config", str(bad), "--out", str(tmp_path)]) == 2
    (tmp_path / "broken.json").write_text("{")
    assert main(["train", "--config", str(tmp_path / "broken.json"), "--edges", "x"]) == 2
    assert main(["generate", "--r", "1.5", "--out", str(tmp_path)]) == 2


def test_exit_code_data_error(tmp_path):
    assert main(["simulate", "--edges", str(tmp_path / "missing"), "--p", "0.1", "--seeds-file", "s"]) == 3
    (tmp_path / "loop.edges").write_text("1 1\n")
    assert main(["baseline", "--edges", str(tmp_path / "loop.edges"), "--method", "degree", "--budget", "1"]) == 3
    assert main(["report", "--out", str(tmp_path / "nothing")]) == 3


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_exit_code_numerical_failure(graph_dir, tmp_path):
    hyper = _write(tmp_path / "h.json", {**TINY, "lr_embedder": 1e300, "recon_loss": "mse"})
    assert main(["train", *graph_args(graph_dir), "--mode", "plain", "--config", str(hyper),
                 "--out", str(tmp_path)]) == 4


def test_usage_error_exits_two():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_global_flags_after_subcommand(tmp_path):
    assert main(["generate", "--n", "20", "--seed", "4", "--out", str(tmp_path / "x")]) == 0
    assert json.loads((tmp_path / "x" / "manifest.json").read_text())["seed"] == 4
