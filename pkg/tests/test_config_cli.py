import csv
import json

import numpy as np
import pytest

from beamvq.cli import main
from beamvq.config import ExperimentConfig
from beamvq.data import load_dataset
from beamvq.errors import ConfigError

TINY = """
[data]
height = 16
width = 16
steps = 60
seeds = 0
t_in = 2
t_out = 4

[model]
widths = 8, 8

[bank]
size = 32
dim = 8

[beam]
width = 3

[train]
epochs = 6
e1 = 2
e2 = 4
mid_every = 2
late_every = 1
batch_size = 16
gen_max_inputs = 3
val_every = 2

[experiment]
seeds = 0
eval_max = 4
"""


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    (d / "tiny.ini").write_text(TINY)
    assert main(["gen-data", "--config", str(d / "tiny.ini"), "--out", str(d / "data")]) == 0
    assert main(["train", "--config", str(d / "tiny.ini"), "--data", str(d / "data"), "--out", str(d / "run")]) == 0
    return d


# -- config ---------------------------------------------------------------------------


def test_defaults_are_canonical_and_hash_stable():
    a, b = ExperimentConfig.defaults(), ExperimentConfig.from_string("")
    assert a.hash() == b.hash() and len(a.hash()) == 64
    assert ExperimentConfig.from_string(a.to_ini()).hash() == a.hash()
    assert ExperimentConfig.from_string("[beam]\nwidth = 10\n").hash() != a.hash()


def test_unknown_section_and_key_rejected():
    with pytest.raises(ConfigError, match="section"):
        ExperimentConfig.from_string("[bogus]\nx = 1\n")
    with pytest.raises(ConfigError, match="widht"):
        ExperimentConfig.from_string("[beam]\nwidht = 3\n")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_string("[beam]\nwidth = three\n")


@pytest.mark.parametrize("text", [
    "[data]\nheight = 30\n",  # 30 is not divisible by the encoder's downsampling
    "[beam]\nchunk = 3\n",  # does not divide t_out
    "[beam]\nscorer = vibes\n",
    "[train]\ne1 = 300\ne2 = 200\n",
    "[experiment]\nvariants = nope\n",
])
def test_invalid_configs(text):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_string(text)


def test_views_follow_values():
    cfg = ExperimentConfig.from_string(TINY)
    assert cfg.backbone().code_dim == 8 and cfg.backbone().widths == (8, 8)
    assert cfg.train().schedule.generation_epochs() == [2, 4, 5]
    assert cfg.data().t_out == 4
    assert cfg.override("beam", "width", 2)["beam"]["width"] == 2
    with pytest.raises(ConfigError):
        cfg.override("beam", "depth", 2)


# -- CLI ---------------------------------------------------------------------------------


def test_gen_data_outputs_and_determinism(workdir, tmp_path, capsys):
    man = json.loads((workdir / "data" / "manifest.json").read_text())
    assert set(man["splits"]) == {"train", "val", "test"} and man["max_volume_drift"] < 1e-6
    assert main(["gen-data", "--config", str(workdir / "tiny.ini"), "--out", str(tmp_path / "again")]) == 0
    for k in ("train", "val", "test"):
        a = (workdir / "data" / f"{k}.bvqd").read_bytes()
        assert a == (tmp_path / "again" / f"{k}.bvqd").read_bytes()
    assert "volume conservation" in capsys.readouterr().out


def test_output_dir_overwrite_refused(workdir):
    assert main(["gen-data", "--config", str(workdir / "tiny.ini"), "--out", str(workdir / "data")]) == 2


def test_bad_config_exit_code(tmp_path):
    (tmp_path / "bad.ini").write_text("[model]\nwobble = 1\n")
    assert main(["gen-data", "--config", str(tmp_path / "bad.ini"), "--out", str(tmp_path / "o")]) == 2


def test_missing_dataset_exit_code(workdir, tmp_path):
    assert main(["eval", "--dataset", str(tmp_path / "none.bvqd"), "--checkpoint",
                 str(workdir / "run" / "model.bvqp"), "--out", str(tmp_path / "e")]) == 3


def test_train_outputs(workdir):
    run = workdir / "run"
    for name in ("model.bvqp", "model.bvqp.json", "report.json", "config.ini", "epochs.csv"):
        assert (run / name).exists(), name
    rep = json.loads((run / "report.json").read_text())
    assert rep["config_hash"] == ExperimentConfig.from_string(TINY).hash()
    assert rep["decode_calls"] == rep["expected_states"]


def test_predict_and_eval(workdir, tmp_path):
    ck, test = workdir / "run" / "model.bvqp", workdir / "data" / "test.bvqd"
    assert main(["predict", "--checkpoint", str(ck), "--input", str(test), "--beam", "2",
                 "--out", str(tmp_path / "pred")]) == 0
    man = json.loads((tmp_path / "pred" / "manifest.json").read_text())
    assert man["decode_calls"] == man["expected_states"]
    n = len(load_dataset(test))
    assert man["expected_states"] == n * 4 * 2 * 2
    trace = (tmp_path / "pred" / "trace.jsonl").read_text().splitlines()
    assert len(trace) == n * 4
    assert main(["eval", "--dataset", str(test), "--predictions", str(tmp_path / "pred" / "forecast.bvqd"),
                 "--checkpoint", str(ck), "--out", str(tmp_path / "ev")]) == 0
    rows = list(csv.DictReader(open(tmp_path / "ev" / "leadtime.csv")))
    assert [int(r["step"]) for r in rows] == [1, 2, 3, 4]
    assert main(["predict", "--checkpoint", str(ck), "--input", str(test), "--chunk", "2",
                 "--out", str(tmp_path / "bad")]) == 2


def test_eval_truth_against_itself(workdir, tmp_path):
    test = workdir / "data" / "test.bvqd"
    assert main(["eval", "--dataset", str(test), "--predictions", str(test), "--out", str(tmp_path / "ev")]) == 0
    m = json.loads((tmp_path / "ev" / "metrics.json").read_text())
    assert m["mse"] == 0.0 and m["ssim"] == pytest.approx(1.0)
    a = np.loadtxt(tmp_path / "ev" / "spectrum_pred.csv", delimiter=",", skiprows=1)
    b = np.loadtxt(tmp_path / "ev" / "spectrum_true.csv", delimiter=",", skiprows=1)
    np.testing.assert_array_equal(a, b)


def test_eval_needs_a_source(workdir, tmp_path):
    assert main(["eval", "--dataset", str(workdir / "data" / "test.bvqd"), "--out", str(tmp_path / "e")]) == 2


@pytest.mark.slow
def test_ablate_rows(workdir, tmp_path):
    assert main(["ablate", "--config", str(workdir / "tiny.ini"), "--data", str(workdir / "data"),
                 "--out", str(tmp_path / "abl")]) == 0
    rows = list(csv.DictReader(open(tmp_path / "abl" / "comparison.csv")))
    assert [r["variant"] for r in rows] == ["base", "beamvq", "wo_beams", "wo_selft", "w_mse"]
    assert len({tuple(r.values()) for r in rows}) == 5
