import json
from dataclasses import replace

import numpy as np
import pytest

from pmemix.augment import MixConfig, mixup_pme_batch
from pmemix.data import SyntheticSpec, write_csv, generate_synthetic
from pmemix.errors import ConfigurationError
from pmemix.experiment import (
    ExperimentConfig,
    SeedResult,
    _grouped_batches,
    format_alpha_k,
    parse_alpha_k,
    prepare_data,
    render_table,
    report,
    run_experiment,
    run_suite,
    run_sweep,
    train_epoch,
)
from pmemix.labels import ClassWeights, PartialLabelMatrix
from pmemix.metrics import evaluate
from pmemix.nn import AdamState, Layer, Network, masked_weighted_bce
from pmemix.rng import Rng

SMALL = dict(n_train=200, n_test=200, epochs=3, seeds=[0], batch_size=32,
             synthetic=SyntheticSpec(n=400, d=6, k=3, rates=(0.4, 0.3, 0.2)))


def small(**kw):
    return ExperimentConfig(**{**SMALL, **kw})


@pytest.mark.parametrize("kw", [
    dict(strategy="oracle", simulator="single_class"),
    dict(strategy="mixup", simulator="bernoulli"),
    dict(strategy="amp"),
    dict(strategy="amp", alpha_k=[0.6, 0.7]),
    dict(strategy="mixup_pme", pme_alpha=0.3),
    dict(strategy="nope"),
    dict(epochs=0),
])
def test_config_contradictions(kw):
    with pytest.raises(ConfigurationError):
        run_experiment(small(**kw))


def test_config_round_trip(tmp_path):
    cfg = small(strategy="amp", alpha_k=[0.6, 0.7, 0.8])
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert ExperimentConfig.load(path) == cfg
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_dict({"strategyy": "vanilla"})


def test_worked_pair_trace_zeroes_masked_gradients():
    y1 = PartialLabelMatrix.from_tokens([["1", "?", "0", "?"]])
    y2 = PartialLabelMatrix.from_tokens([["1", "1", "?", "?"]])
    net = Network.init([3, 5, 4], Rng(0))
    vb = mixup_pme_batch(np.ones((1, 3)), y1, np.zeros((1, 3)), y2, MixConfig(), lam=0.75)
    np.testing.assert_array_equal(vb.targets, [[1.0, 0.625, 0.125, 0.5]])
    np.testing.assert_array_equal(vb.mask, [[1, 0, 1, 0]])
    _, grad = masked_weighted_bce(net.forward(vb.inputs), vb.targets, vb.mask, 0.5, 0.5)
    assert grad[0, 1] == 0.0 and grad[0, 3] == 0.0
    assert grad[0, 0] != 0.0 and grad[0, 2] != 0.0


def test_epochs_one():
    res = run_experiment(small(epochs=1))
    assert [s.best_epoch for s in res.seeds] == [1]


def test_best_is_max_over_epochs():
    res = run_experiment(small(epochs=4, seeds=[0, 1]))
    for s in res.seeds:
        assert s.best_mean_f1 == max(r.mean_f1 for r in s.epochs)
        assert s.epochs[s.best_epoch - 1].mean_f1 == s.best_mean_f1
    assert res.mean_best_f1 == pytest.approx(np.mean([s.best_mean_f1 for s in res.seeds]))


def test_best_f1_monotone_when_appending():
    rng = np.random.default_rng(0)
    labels = PartialLabelMatrix(rng.integers(0, 2, size=(20, 3)).astype(np.int8))
    s = SeedResult(seed=0)
    best = []
    for epoch in range(1, 15):
        s.append_epoch(evaluate(rng.random((20, 3)), labels, epoch=epoch), loss=0.0)
        best.append(s.best_mean_f1)
    assert all(a <= b for a, b in zip(best, best[1:]))


def test_seed_isolation():
    a = prepare_data(small(seeds=[0]))
    b = prepare_data(small(seeds=[5, 6]))
    assert a.train.features.tobytes() == b.train.features.tobytes()
    assert a.labels == b.labels
    c = prepare_data(small(data_seed=1))
    assert c.labels != a.labels


def test_holdout_validation_run():
    res = run_experiment(small(holdout_validation=True))
    seed = res.seeds[0]
    assert len(seed.validation) == 3
    assert seed.best_selection_f1 == max(r.mean_f1 for r in seed.validation)
    assert "validation" in res.to_dict()["seeds"][0]


def test_csv_data_source(tmp_path):
    ds = generate_synthetic(SyntheticSpec(n=300, d=4, k=2, rates=(0.5, 0.3)), seed=0)
    path = tmp_path / "d.csv"
    write_csv(ds, path)
    res = run_experiment(ExperimentConfig(data_csv=str(path), n_train=150, n_test=150,
                                          epochs=2, seeds=[0], strategy="mixup_pme"))
    assert res.class_names == ["class0", "class1"]


def test_amp_batches_grouped_by_base_class():
    subsets = np.repeat(np.arange(3), 10)
    order = Rng(0).permutation(30)
    batches = _grouped_batches(order, subsets, 4, Rng(1))
    assert sorted(np.concatenate(batches).tolist()) == list(range(30))
    for b in batches:
        assert len(set(subsets[b].tolist())) == 1


def test_mixup_skips_class_without_pairs():
    labels = PartialLabelMatrix([[1, -1], [0, -1], [1, -1], [-1, 1]])
    net = Network.init([2, 3, 2], Rng(0))
    opt = AdamState.for_network(net)
    with pytest.warns(UserWarning, match="class 1"):
        train_epoch(net, opt, np.ones((4, 2)), labels, "mixup", MixConfig("mixup"),
                    ClassWeights.uniform(2), Rng(0))
    assert opt.step == 1


def test_mixup_trains_one_class_at_a_time():
    # gradient of the untrained class column must stay zero: check the last
    # layer's bias for class 1 is untouched when class 1 has no pairs
    labels = PartialLabelMatrix([[1, -1], [0, -1], [1, -1], [-1, 1]])
    net = Network.init([2, 3, 2], Rng(0))
    before = net.layers[-1].bias.copy()
    with pytest.warns(UserWarning):
        train_epoch(net, AdamState.for_network(net), np.ones((4, 2)), labels, "mixup",
                    MixConfig("mixup"), ClassWeights.uniform(2), Rng(0))
    assert net.layers[-1].bias[1] == before[1]
    assert net.layers[-1].bias[0] != before[0]


def test_report_files_and_rerender(tmp_path):
    res = run_experiment(small())
    json_path, txt_path = report(res, tmp_path)
    doc = json.loads(json_path.read_text())
    assert doc["format_version"] == 1 and doc["kind"] == "run"
    table = txt_path.read_text()
    assert render_table(doc) == table
    header = table.splitlines()[0]
    assert [c.strip() for c in header.strip("|").split("|")] == ["Model", "class0", "class1", "class2", "Average"]


def test_suite_skips_inapplicable_strategies():
    doc = run_suite(small(simulator="bernoulli", epochs=1))
    assert set(doc["runs"]) == {"vanilla", "mixup_pme", "oracle"}
    assert set(doc["skipped"]) == {"mixup", "amp"}
    assert doc["runs"]["oracle"]["config"]["simulator"] == "none"
    rows = render_table(doc).splitlines()[2:]
    assert [r.split("|")[1].strip() for r in rows] == ["vanilla", "mixup_pme", "oracle"]


def test_sweep_document():
    doc = run_sweep(small(epochs=2), alphas=(0.5, 0.7, 0.9))
    assert [r["alpha"] for r in doc["rows"]] == [0.5, 0.7, 0.9]
    for k, best in enumerate(doc["best_alpha_k"]):
        scores = [r["per_class_f1"][k] for r in doc["rows"]]
        assert best == doc["rows"][int(np.argmax(scores))]["alpha"]
    table = render_table(doc)
    assert table.splitlines()[-1].startswith("| argmax")


def test_alpha_k_parsing(tmp_path):
    assert parse_alpha_k("0=0.6,1=0.9") == [0.6, 0.9]
    assert parse_alpha_k("b=0.7, a=0.55", ["a", "b"]) == [0.55, 0.7]
    path = tmp_path / "ak.txt"
    path.write_text(format_alpha_k([0.5, 0.75, 0.95]) + "\n")
    assert parse_alpha_k(f"@{path}") == [0.5, 0.75, 0.95]
    for bad in ("0=0.6,2=0.7", "x=0.5", "0:0.5", ""):
        with pytest.raises(ConfigurationError):
            parse_alpha_k(bad, ["a", "b", "c"])
