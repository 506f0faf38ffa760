import xml.etree.ElementTree as ET

import numpy as np
import pytest

from qrsnap.data import Dataset, SynthConfig, generate_synthetic
from qrsnap.distortion import BLUR, NOISE, DistortionSpec
from qrsnap.evaluation import CSV_HEADER, SweepGrid, distort_test_set, evaluate, read_sweep_csv, sweep
from qrsnap.report import render_svg


class OracleModel:
    """Puts all mass on the true label, looked up by image bytes of the clean set."""

    def __init__(self, labels, k):
        self.labels, self.k = labels, k

    def predict_batch(self, images):
        return np.eye(self.k)[self.labels[: len(images)]]


class RandomModel:
    def __init__(self, k, seed):
        self.k, self.seed = k, seed

    def predict_batch(self, images):
        # deterministic per input content, random over images
        seeds = [int(abs(img.sum()) * 1e6) % 2**32 for img in images]
        return np.stack([np.random.default_rng(s + self.seed).dirichlet(np.ones(self.k)) for s in seeds])


class Recorder:
    def __init__(self, k=4):
        self.seen, self.k = [], k

    def predict_batch(self, images):
        self.seen.append(images.copy())
        return np.full((len(images), self.k), 1 / self.k)


@pytest.fixture(scope="module")
def test_set():
    return generate_synthetic(SynthConfig(per_class=25, size=12, seed=1))


def test_perfect_predictor(test_set):
    model = OracleModel(test_set.labels, 4)
    for spec in (None, DistortionSpec(NOISE, 100), DistortionSpec(BLUR, 15)):
        assert evaluate(model, test_set, spec, 3, 0) == (1.0, 1.0)


def test_random_predictor_is_at_chance():
    ds = generate_synthetic(SynthConfig(per_class=500, size=8, seed=2))
    top1, top3 = evaluate(RandomModel(4, 0), ds, DistortionSpec(NOISE, 30), 3, 0)
    n = len(ds)
    assert abs(top1 - 0.25) <= 3 * np.sqrt(0.25 * 0.75 / n)
    assert abs(top3 - 0.75) <= 3 * np.sqrt(0.25 * 0.75 / n)
    assert top1 <= top3


def test_empty_test_set():
    empty = Dataset(np.zeros((0, 4, 4, 3)), np.zeros(0, int), ["a"])
    with pytest.raises(ValueError):
        evaluate(OracleModel(np.zeros(0, int), 1), empty, None, 1, 0)


def test_paired_images_across_models(test_set):
    a, b = Recorder(), Recorder()
    sweep([("a", a), ("b", b)], test_set, SweepGrid((50,), (5,), True), 3, 9)
    assert len(a.seen) == 3
    for x, y in zip(a.seen, b.seen):
        assert x.tobytes() == y.tobytes()


def test_noise_draws_depend_on_seed_and_index(test_set):
    spec = DistortionSpec(NOISE, 40)
    a = distort_test_set(test_set.images, spec, 1)
    assert a.tobytes() == distort_test_set(test_set.images, spec, 1).tobytes()
    assert a.tobytes() != distort_test_set(test_set.images, spec, 2).tobytes()
    sub = distort_test_set(test_set.images[:5], spec, 1)
    assert sub.tobytes() == a[:5].tobytes()


def test_sweep_cardinality_and_determinism(test_set):
    models = [("g", RandomModel(4, 1)), ("b", RandomModel(4, 2))]
    rep = sweep(models, test_set, SweepGrid(), 3, 5)
    assert len(rep.rows) == 2 * (10 + 8 + 1) == 38
    assert rep.to_csv() == sweep(models, test_set, SweepGrid(), 3, 5).to_csv()
    by = {(r.model, r.family, r.level): r for r in rep.rows}
    for tag in ("g", "b"):
        blur1, clean = by[tag, BLUR, 1], by[tag, "clean", 0]
        assert (blur1.top1, blur1.topk, blur1.n) == (clean.top1, clean.topk, clean.n)
    assert all(r.top1 <= r.topk and r.n == len(test_set) for r in rep.rows)


def test_csv_format(test_set):
    rep = sweep([("m", RandomModel(4, 0))], test_set, SweepGrid((10,), (3,), True), 2, 0)
    text = rep.to_csv()
    lines = text.split("\n")
    assert lines[0] == CSV_HEADER and text.endswith("\n") and "\r" not in text
    assert lines[1].startswith("m,clean,0,") and lines[2].startswith("m,gaussian_noise,10,")
    for line in lines[1:-1]:
        fields = line.split(",")
        assert len(fields[3].split(".")[1]) == 6 and len(fields[4].split(".")[1]) == 6
    assert read_sweep_csv(text) == [type(r)(r.model, r.family, r.level, round(r.top1, 6), round(r.topk, 6), r.n) for r in rep.rows]


def test_read_sweep_csv_errors():
    with pytest.raises(ValueError, match="line 2"):
        read_sweep_csv(CSV_HEADER + "\n")
    with pytest.raises(ValueError, match="line 3"):
        read_sweep_csv(CSV_HEADER + "\nm,clean,0,0.5,0.5,10\nm,clean,zero,0.5,0.5,10\n")
    with pytest.raises(ValueError, match="line 1"):
        read_sweep_csv("model,family\n")


def test_svg_polylines(test_set):
    rep = sweep([("g", RandomModel(4, 1)), ("b", RandomModel(4, 2))], test_set, SweepGrid(), 3, 0)
    svg = render_svg(rep.rows)
    root = ET.fromstring(svg.split("\n", 1)[1])
    ns = "{http://www.w3.org/2000/svg}"
    assert root.tag == f"{ns}svg" and root.get("version") == "1.1"
    assert len(root.findall(f"{ns}polyline")) == 4
