import json

from pmemix.cli import main
from pmemix.data import read_csv


def test_generate_partition_train_report(tmp_path, capsys):
    data = tmp_path / "data.csv"
    part = tmp_path / "part.csv"
    assert main(["generate", "--n", "300", "--d", "5", "--k", "3", "--out", str(data)]) == 0
    assert main(["partition", "--input", str(data), "--simulator", "bernoulli",
                 "--seed", "1", "--out", str(part)]) == 0
    labels = read_csv(part).labels
    assert (labels.values < 0).any() and labels.n_classes == 3

    out = tmp_path / "run"
    assert main(["train", "--data", str(data), "--n-train", "150", "--n-test", "150",
                 "--strategy", "mixup_pme", "--alpha", "0.8", "--epochs", "2",
                 "--seed", "4", "--num-seeds", "2", "--out", str(out)]) == 0
    doc = json.loads((out / "results.json").read_text())
    assert doc["config"]["pme_alpha"] == 0.8
    assert [s["seed"] for s in doc["seeds"]] == [4, 5]

    capsys.readouterr()
    assert main(["report", "--results", str(out / "results.json")]) == 0
    assert capsys.readouterr().out == (out / "results.txt").read_text()


def test_config_file_with_overrides(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "strategy": "vanilla", "n_train": 100, "n_test": 100, "epochs": 5, "seeds": [0],
        "synthetic": {"n": 200, "d": 4, "k": 2, "rates": [0.5, 0.4]},
    }))
    out = tmp_path / "o"
    assert main(["train", "--config", str(cfg), "--epochs", "1", "--batch-size", "16",
                 "--lr", "0.01", "--threshold", "0.4", "--out", str(out)]) == 0
    doc = json.loads((out / "results.json").read_text())
    c = doc["config"]
    assert (c["epochs"], c["batch_size"], c["lr"], c["threshold"]) == (1, 16, 0.01, 0.4)
    assert len(doc["seeds"][0]["epochs"]) == 1


def test_errors_return_nonzero(tmp_path, capsys):
    assert main(["train", "--strategy", "oracle", "--simulator", "bernoulli",
                 "--out", str(tmp_path)]) == 2
    assert "simulator must be 'none'" in capsys.readouterr().err
    assert main(["report", "--results", str(tmp_path / "missing.json")]) == 2


def test_suite_keeps_oracle_under_explicit_simulator(tmp_path):
    out = tmp_path / "s"
    assert main(["train", "--strategy", "vanilla,oracle", "--simulator", "bernoulli",
                 "--n-train", "100", "--n-test", "100", "--epochs", "1", "--num-seeds", "1",
                 "--out", str(out)]) == 0
    doc = json.loads((out / "results.json").read_text())
    assert set(doc["runs"]) == {"vanilla", "oracle"}
    assert doc["runs"]["vanilla"]["config"]["simulator"] == "bernoulli"
