import subprocess
import sys

import numpy as np
import pytest

from evosnn import persistence as P
from evosnn.cli import DATA_DIR_ENV, main
from evosnn.encoding import EncoderSpec, VariableRange
from evosnn.evolution import ScoredNetwork
from evosnn.inference import Dataset, Run
from evosnn.network import Network, Neuron
from helpers import random_network

SPEC2 = EncoderSpec(scheme="rate", tau=4,
                    ranges=(VariableRange(0.0, 1.0), VariableRange(0.0, 1.0)))


def _fields(out: str) -> dict:
    fields = {}
    for line in out.splitlines():
        if line.startswith("rank,"):
            break
        if ": " in line:
            key, value = line.split(": ", 1)
            fields[key] = value
    return fields


def _toy_data_dir(tmp_path, name="toy"):
    rng = np.random.default_rng(0)
    runs = [Run(observations=rng.random((12, 2)),
                labels=[0] * 6 + [1] * 6, stride_seconds=1.0, id=f"r{i}")
            for i in range(3)]
    ds = Dataset(runs=runs, ranges=SPEC2.ranges, stride_seconds=1.0)
    P.save_dataset(ds, tmp_path / name)
    return tmp_path / name


def _silent_network():
    return Network(
        neurons=[Neuron(0, 0, 0, "input"), Neuron(1, 0, 0, "input"),
                 Neuron(2, 255, 0, "output")],
        synapses=[], input_order=[0, 1], output=2)


def test_datagen_writes_loadable_dataset(tmp_path, capsys):
    out = tmp_path / "data"
    code = main(["datagen", "--preset", "easy", "--out", str(out),
                 "--background", "2", "--source", "2", "--seed", "5"])
    assert code == 0
    fields = _fields(capsys.readouterr().out)
    assert fields["seed"] == "5"
    assert fields["dataset_format_version"] == "1"
    ds = P.load_dataset(out)
    assert len(ds.runs) == 4


def test_datagen_byte_identical_per_seed(tmp_path):
    for name in ("one", "two"):
        assert main(["datagen", "--preset", "easy", "--out",
                     str(tmp_path / name), "--background", "1", "--source",
                     "1", "--seed", "9"]) == 0
    for f in sorted((tmp_path / "one").iterdir()):
        assert f.read_bytes() == (tmp_path / "two" / f.name).read_bytes()


def test_datagen_bad_preset_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as err:
        main(["datagen", "--preset", "medium", "--out", str(tmp_path / "x")])
    assert err.value.code == 1


def test_missing_data_flag_is_usage_error(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv(DATA_DIR_ENV, raising=False)
    code = main(["train", "--out", str(tmp_path / "out")])
    assert code == 1
    assert "--data" in capsys.readouterr().err


def test_data_dir_env_default(tmp_path, capsys, monkeypatch):
    data = _toy_data_dir(tmp_path)
    net_path = tmp_path / "net.json"
    P.save_network(_silent_network(), net_path, encoder=SPEC2)
    monkeypatch.setenv(DATA_DIR_ENV, str(data))
    assert main(["eval", "--network", str(net_path)]) == 0


def test_train_eval_roc_round_trip(tmp_path, capsys):
    data = tmp_path / "data"
    assert main(["datagen", "--preset", "easy", "--out", str(data),
                 "--background", "2", "--source", "2", "--seed", "3"]) == 0
    out = tmp_path / "model"
    code = main(["train", "--data", str(data), "--out", str(out),
                 "--epochs", "2", "--population", "8", "--tau", "8",
                 "--seed", "4", "--jobs", "2"])
    assert code == 0
    fields = _fields(capsys.readouterr().out)
    assert fields["seed"] == "4"
    assert "best_fitness" in fields
    loaded = P.load_network(out / "best_network.json")
    assert loaded.encoder is not None
    assert loaded.provenance["seed"] == 4
    pop = P.load_population(out / "population.json")
    assert len(pop.members) == 8
    history = (out / "history.csv").read_text().splitlines()
    assert history[0].startswith("epoch,")
    assert len(history) == 3

    code = main(["eval", "--network", str(out / "best_network.json"),
                 "--data", str(data), "--auto-theta"])
    assert code == 0
    fields = _fields(capsys.readouterr().out)
    assert "mcc" in fields and "far_per_hour" in fields

    roc_path = tmp_path / "roc.csv"
    code = main(["roc", "--network", str(out / "best_network.json"),
                 "--data", str(data), "--out", str(roc_path)])
    assert code == 0
    rows = roc_path.read_text().splitlines()
    assert rows[0] == "theta,far_per_hour,tpr"
    thetas = [int(r.split(",")[0]) for r in rows[1:]]
    assert thetas == sorted(thetas)


def test_train_outputs_deterministic(tmp_path):
    data = tmp_path / "data"
    assert main(["datagen", "--preset", "easy", "--out", str(data),
                 "--background", "1", "--source", "2", "--seed", "1"]) == 0
    for name in ("a", "b"):
        assert main(["train", "--data", str(data), "--out",
                     str(tmp_path / name), "--epochs", "2", "--population",
                     "6", "--tau", "8", "--seed", "7"]) == 0
    assert ((tmp_path / "a" / "best_network.json").read_bytes()
            == (tmp_path / "b" / "best_network.json").read_bytes())


def test_eval_silent_network_scores_zero(tmp_path, capsys):
    data = _toy_data_dir(tmp_path)
    net_path = tmp_path / "net.json"
    P.save_network(_silent_network(), net_path, encoder=SPEC2)
    code = main(["eval", "--network", str(net_path), "--data", str(data)])
    assert code == 0
    fields = _fields(capsys.readouterr().out)
    assert fields["recall"] == "0.0"
    assert fields["far_per_hour"] == "0.0"


def test_eval_window_seconds_to_steps(tmp_path, capsys):
    data = tmp_path / "data"
    assert main(["datagen", "--preset", "easy", "--out", str(data),
                 "--background", "1", "--source", "1", "--seed", "2",
                 "--stride-seconds", "0.5"]) == 0
    net_path = tmp_path / "net.json"
    spec = EncoderSpec(scheme="rate", tau=4,
                       ranges=tuple(VariableRange(0.0, 40.0)
                                    for _ in range(8)))
    net = Network(
        neurons=[Neuron(i, 0, 0, "input") for i in range(8)]
        + [Neuron(8, 255, 0, "output")],
        synapses=[], input_order=list(range(8)), output=8)
    P.save_network(net, net_path, encoder=spec)
    code = main(["eval", "--network", str(net_path), "--data", str(data),
                 "--window-seconds", "20"])
    assert code == 0
    fields = _fields(capsys.readouterr().out)
    assert fields["window_steps"] == "40"


def test_eval_min_mcc_gate(tmp_path, capsys):
    data = _toy_data_dir(tmp_path)
    net_path = tmp_path / "net.json"
    P.save_network(_silent_network(), net_path, encoder=SPEC2)
    code = main(["eval", "--network", str(net_path), "--data", str(data),
                 "--min-mcc", "0.5"])
    assert code == 3
    assert "gate" in capsys.readouterr().err


def test_eval_missing_network_is_data_error(tmp_path, capsys):
    data = _toy_data_dir(tmp_path)
    code = main(["eval", "--network", str(tmp_path / "nope.json"),
                 "--data", str(data)])
    assert code == 2


def test_predict_stdout_and_file(tmp_path, capsys):
    data = _toy_data_dir(tmp_path)
    net_path = tmp_path / "net.json"
    P.save_network(_silent_network(), net_path, encoder=SPEC2)
    run_csv = data / "r0.csv"
    code = main(["predict", "--network", str(net_path), "--run",
                 str(run_csv)])
    assert code == 0
    out = capsys.readouterr().out
    assert "run_id,t,z,y,label" in out
    assert "positive_steps: 0" in out
    out_path = tmp_path / "trace.csv"
    code = main(["predict", "--network", str(net_path), "--run",
                 str(run_csv), "--out", str(out_path)])
    assert code == 0
    assert out_path.read_text().startswith("run_id,t,z,y,label\n")


def test_ensemble_search_three_network_population(tmp_path, capsys):
    data = _toy_data_dir(tmp_path)
    rng = np.random.default_rng(8)
    scored = [ScoredNetwork(network=random_network(rng), fitness=0.5 + 0.1 * i,
                            metrics={}) for i in range(3)]
    pop_path = tmp_path / "pop.json"
    P.save_population(scored, pop_path, encoder=SPEC2, epoch=0)
    out_path = tmp_path / "best_ensemble.json"
    code = main(["ensemble-search", "--population", str(pop_path),
                 "--data", str(data), "--top-fraction", "1.0",
                 "--far-target", "1000", "--out", str(out_path)])
    assert code == 0
    captured = capsys.readouterr().out
    fields = _fields(captured)
    assert fields["member_sets"] == "4"
    assert fields["winner"] in ("ensemble", "single")
    table = [l for l in captured.splitlines() if l and l[0].isdigit()]
    assert len(table) == 9  # 3 pairs x 2 votes + 1 trio x 3 votes
    ens, enc = P.load_ensemble(out_path)
    assert enc == SPEC2
    assert len(ens.members) in (2, 3)


def test_ensemble_search_needs_two_networks(tmp_path, capsys):
    data = _toy_data_dir(tmp_path)
    rng = np.random.default_rng(9)
    pop_path = tmp_path / "pop.json"
    P.save_population([ScoredNetwork(network=random_network(rng),
                                     fitness=0.5, metrics={})],
                      pop_path, encoder=SPEC2)
    code = main(["ensemble-search", "--population", str(pop_path),
                 "--data", str(data), "--far-target", "10"])
    assert code == 2


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "evosnn", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "datagen" in proc.stdout
