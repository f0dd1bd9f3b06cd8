import json
import math

import pytest

from blockdiff.cli import main
from blockdiff.io import read_graphs

TINY = {
    "t_max": 4,
    "seed": 1,
    "checkpoint_every": 1,
    "model": {"layers": 1, "node_dim": 16, "edge_dim": 8, "heads": 2, "max_block_id": 16, "max_degree": 20,
              "max_block_size": 20},
    "train": {"epochs": 2, "batch_size": 8},
}


@pytest.fixture
def community(tmp_path):
    path = tmp_path / "comm.jsonl"
    assert main(["gen-data", "--kind", "community", "--count", "10", "--out", str(path), "--seed", "0"]) == 0
    return path


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(TINY))
    return path


def test_gen_data_grid(tmp_path, capsys):
    out = tmp_path / "grids.jsonl"
    assert main(["gen-data", "--kind", "grid", "--count", "100", "--out", str(out)]) == 0
    assert len(read_graphs(out)) == 100
    assert "wrote 100 grid graphs" in capsys.readouterr().out


def test_gen_data_split(tmp_path):
    out = tmp_path / "c.jsonl"
    assert main(["gen-data", "--kind", "caveman", "--count", "20", "--out", str(out), "--split"]) == 0
    sizes = [len(read_graphs(tmp_path / f"c.{p}.jsonl")) for p in ("train", "val", "test")]
    assert sizes == [13, 3, 4]


def test_gen_data_bad_params(tmp_path):
    out = str(tmp_path / "x.jsonl")
    assert main(["gen-data", "--kind", "grid", "--count", "2", "--out", out, "--params", '{"side_min": 0}']) == 1
    assert main(["gen-data", "--kind", "grid", "--count", "2", "--out", out, "--params", '{"depth": 2}']) == 1


def test_decompose(tmp_path, capsys):
    grids = tmp_path / "grids.jsonl"
    main(["gen-data", "--kind", "grid", "--count", "3", "--out", str(grids)])
    capsys.readouterr()
    assert main(["decompose", "--in", str(grids), "--k-hops", "1"]) == 0
    rows = json.loads(capsys.readouterr().out)
    assert len(rows) == 3 and all(sum(r["block_sizes"]) == r["n"] for r in rows)


@pytest.mark.parametrize("argv", [
    [],
    ["frobnicate"],
    ["gen-data", "--kind", "grid"],
    ["gen-data", "--kind", "lobster", "--count", "1", "--out", "x"],
    ["sample", "--checkpoint"],
])
def test_usage_errors_exit_one(argv, capsys):
    assert main(argv) == 1
    assert "usage" in capsys.readouterr().err.lower()


def test_missing_file_is_validation_error(tmp_path):
    assert main(["decompose", "--in", str(tmp_path / "nope.jsonl")]) == 1


def test_bad_config_exit_one(tmp_path, community):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"k_hopz": 2}))
    assert main(["train", "--config", str(cfg), "--dataset", str(community)]) == 1


def test_undersized_config_rejected_before_training(tmp_path, community, config):
    cfg = dict(TINY, model=dict(TINY["model"], max_block_size=4))
    path = tmp_path / "small.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / "run"
    assert main(["train", "--config", str(path), "--dataset", str(community), "--out", str(out)]) == 1
    assert not (out / "checkpoint.ckpt").exists()


def test_corrupt_checkpoint_exit_one(tmp_path):
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b"PARD\x01")
    assert main(["sample", "--checkpoint", str(bad), "--out", str(tmp_path / "s.jsonl")]) == 1


def test_train_sample_eval_pipeline(tmp_path, community, config, capsys):
    run = tmp_path / "run"
    assert main(["train", "--config", str(config), "--dataset", str(community), "--out", str(run)]) == 0
    assert (run / "checkpoint.ckpt").exists()
    metrics = [json.loads(x) for x in (run / "metrics.jsonl").read_text().splitlines()]
    assert [m["epoch"] for m in metrics] == [0, 1]

    samples = tmp_path / "samples.jsonl"
    trace = tmp_path / "trace.json"
    assert main(["sample", "--checkpoint", str(run / "checkpoint.ckpt"), "--count", "3", "--out", str(samples),
                 "--trace", str(trace), "--max-nodes", "24"]) == 0
    assert len(read_graphs(samples)) == 3
    assert len(json.loads(trace.read_text())) == 3

    report = tmp_path / "eval.json"
    assert main(["eval", "--generated", str(samples), "--reference", str(community), "--out", str(report),
                 "--histograms"]) == 0
    data = json.loads(report.read_text())
    assert all(math.isfinite(data[k]) for k in ("degree_mmd", "clustering_mmd", "orbit_mmd"))
    assert len(data["histograms"]["degree"]["generated"]) == 3

    # resume continues from the saved epoch
    assert main(["train", "--config", str(config), "--dataset", str(community), "--out", str(run),
                 "--resume", str(run / "checkpoint.ckpt"), "--epochs", "3"]) == 0
    assert "trained 3 epochs" in capsys.readouterr().out


def test_demo_symmetry(capsys):
    assert main(["demo-symmetry", "--seed", "0"]) == 0
    out = capsys.readouterr().out
    assert out.count("edge (") == 8
    assert "target unreachable" in out


def test_ablate_smoke(tmp_path, community, config):
    out = tmp_path / "abl.json"
    assert main(["ablate", "--config", str(config), "--train", str(community), "--test", str(community),
                 "--k-hops", "0,1", "--steps", "4", "--seeds", "0", "--samples", "2", "--epochs", "1",
                 "--out", str(out)]) == 0
    table = json.loads(out.read_text())
    assert len(table["runs"]) == 2 and {r["k_hops"] for r in table["runs"]} == {0, 1}
