import hashlib
import xml.etree.ElementTree as ET

import pytest

from qrsnap import config as config_mod
from qrsnap.cli import main
from qrsnap.data import load_qrds
from qrsnap.ensemble import read_manifest
from qrsnap.schedule import SchedulePlan, lr_at

TINY = """\
# tiny desk run
data_path = data.qrds
synth_per_class = 10
synth_size = 12
architecture = input 3x12x12; conv 4 k3 p1; relu; maxpool 2; flatten; dense 4
epochs_per_cycle = 2
batch_size = 8
test_fraction = 0.25
sweep_noise_levels = 20,60
sweep_blur_levels = 1,5
"""


@pytest.fixture
def workdir(tmp_path):
    (tmp_path / "run.cfg").write_text(TINY)
    return tmp_path


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run(*argv):
    return main([str(a) for a in argv])


def test_gen_data(workdir):
    cfg = workdir / "run.cfg"
    assert run("gen-data", "--config", cfg, "--out", workdir / "data.qrds") == 0
    ds = load_qrds(workdir / "data.qrds")
    assert len(ds) == 40
    first = sha(workdir / "data.qrds")
    assert run("gen-data", "--config", cfg, "--out", workdir / "data.qrds") == 0
    assert sha(workdir / "data.qrds") == first
    assert run("gen-data", "--config", cfg, "--out", workdir / "missing" / "d.qrds") == 2


def test_bad_config_key(workdir, capsys):
    (workdir / "bad.cfg").write_text("batch_sise = 3\n")
    assert run("gen-data", "--config", workdir / "bad.cfg", "--out", workdir / "d.qrds") == 2
    assert "batch_sise" in capsys.readouterr().err
    assert not (workdir / "d.qrds").exists()


def test_bad_config_value(workdir, capsys):
    (workdir / "bad.cfg").write_text("momentum = 1.5\n")
    assert run("train", "--config", workdir / "bad.cfg", "--out", workdir / "o") == 2
    assert not (workdir / "o").exists()
    (workdir / "bad.cfg").write_text("cycles = noise,jpeg\n")
    assert run("train", "--config", workdir / "bad.cfg", "--out", workdir / "o") == 2
    assert "cycles" in capsys.readouterr().err


def test_config_defaults_and_seed_override():
    cfg = config_mod.build({}, seed=11)
    assert cfg.seed == 11 and cfg.train.seed == 11
    assert cfg.train.batch_size == 32 and cfg.train.cycles[0].alpha0 == 0.05
    assert [c.specialty for c in cfg.train.cycles] == ["gaussian_noise", "gaussian_blur"]
    assert cfg.train.cycles[0].epochs == 32
    with pytest.raises(config_mod.ConfigError, match="top_k"):
        config_mod.build({"top_k": "0"})
    with pytest.raises(config_mod.ConfigError, match="line 2"):
        config_mod.parse_text("seed = 1\nnot a pair\n")


def test_train_sweep_report_pipeline(workdir):
    cfg = workdir / "run.cfg"
    assert run("gen-data", "--config", cfg, "--out", workdir / "data.qrds") == 0
    assert run("train", "--config", cfg, "--mode", "gspecialist", "--out", workdir / "g") == 0
    assert run("train", "--config", cfg, "--mode", "baseline", "--out", workdir / "b") == 0
    assert [s for _, s, _ in read_manifest(workdir / "g" / "gspecialist.manifest")] == ["gaussian_noise", "gaussian_blur"]
    assert [s for _, s, _ in read_manifest(workdir / "b" / "baseline.manifest")] == ["pristine", "pristine"]

    log = (workdir / "g" / "gspecialist-log.csv").read_text().splitlines()
    assert log[0] == "iteration,cycle,lr,loss"
    lrs = [float(line.split(",")[2]) for line in log[1:]]
    plan = SchedulePlan(0.05, len(lrs), 2)
    assert lrs == [lr_at(t, plan) for t in range(1, len(lrs) + 1)]
    b_log = (workdir / "b" / "baseline-log.csv").read_text().splitlines()
    assert len(b_log) == len(log)

    out = workdir / "sweep.csv"
    args = ("sweep", "--config", cfg, "--out", out, workdir / "g" / "gspecialist.manifest", workdir / "b" / "baseline.manifest")
    assert run(*args) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "model,family,level,top1,topk,n" and len(lines) == 1 + 2 * 5
    first = sha(out)
    assert run(*args) == 0 and sha(out) == first
    rows = [line.split(",") for line in lines[1:]]
    for tag in ("gspecialist", "baseline"):
        clean = next(r for r in rows if r[0] == tag and r[1] == "clean")
        blur1 = next(r for r in rows if r[0] == tag and r[1] == "gaussian_blur" and r[2] == "1")
        assert clean[3:] == blur1[3:]

    svg = workdir / "chart.svg"
    assert run("report", out, "--out", svg) == 0
    root = ET.parse(svg).getroot()
    assert len(root.findall("{http://www.w3.org/2000/svg}polyline")) == 4


def test_sweep_unreadable_snapshot(workdir, capsys):
    cfg = workdir / "run.cfg"
    run("gen-data", "--config", cfg, "--out", workdir / "data.qrds")
    (workdir / "m.manifest").write_text("1 pristine gone.qrwt\n")
    assert run("sweep", "--config", cfg, "--out", workdir / "s.csv", workdir / "m.manifest") == 3
    assert "gone.qrwt" in capsys.readouterr().err
    (workdir / "broken.qrwt").write_bytes(b"QRWT\x01")
    (workdir / "m.manifest").write_text("1 pristine broken.qrwt\n")
    assert run("sweep", "--config", cfg, "--out", workdir / "s.csv", workdir / "m.manifest") == 3


def test_train_missing_dataset(workdir):
    assert run("train", "--config", workdir / "run.cfg", "--out", workdir / "o") == 3


def test_report_errors(workdir, capsys):
    bad = workdir / "s.csv"
    bad.write_text("model,family,level,top1,topk,n\n")
    assert run("report", bad, "--out", workdir / "c.svg") == 4
    bad.write_text("model,family,level,top1,topk,n\nm,clean,0,0.5,0.5,10\nm,gaussian_blur,x,0.5,0.5,10\n")
    assert run("report", bad, "--out", workdir / "c.svg") == 4
    assert "line 3" in capsys.readouterr().err


def test_bad_threads_env(workdir, monkeypatch, capsys):
    monkeypatch.setenv("THREADS", "two")
    assert run("gen-data", "--config", workdir / "run.cfg", "--out", workdir / "d.qrds") == 2
    assert "THREADS" in capsys.readouterr().err
    monkeypatch.setenv("THREADS", "1")
    assert run("gen-data", "--config", workdir / "run.cfg", "--out", workdir / "d.qrds") == 0


def test_config_synth_keys_match_dataclass_defaults():
    from qrsnap.data import SynthConfig
    from qrsnap.trainer import TrainConfig

    cfg = config_mod.build({})
    assert cfg.synth == SynthConfig()
    assert cfg.train.momentum == TrainConfig().momentum
