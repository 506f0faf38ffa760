"""Flat ``key = value`` run configuration with '#' comments.

Every key has a default; unknown keys and malformed values are rejected as a
whole before any command does work.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .autodiff import Architecture
from .data import SynthConfig
from .distortion import DEFAULT_BLUR_LEVELS, DEFAULT_NOISE_LEVELS, LevelFamily
from .evaluation import SweepGrid
from .mixup import MixPolicy
from .schedule import make_cycle_plan
from .trainer import TrainConfig


class ConfigError(ValueError):
    pass


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(",") if x.strip())


def _bool(text: str) -> bool:
    if text.lower() in ("1", "true", "yes", "on"):
        return True
    if text.lower() in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _csv(values) -> str:
    return ",".join(str(v) for v in values)


DEFAULTS: dict[str, str] = {
    # data
    "data_path": "data.qrds",
    "test_fraction": "0.2",
    "split_seed": "0",
    "synth_classes": "disk,square,cross,stripes",
    "synth_per_class": "625",
    "synth_size": "32",
    "synth_channels": "3",
    "synth_background_noise": "0.0",
    "synth_contrast": "0.4",
    "synth_seed": "0",
    # model and training
    "architecture": "",
    "batch_size": "32",
    "alpha0": "0.05",
    "momentum": "0.0",
    "epochs_per_cycle": "32",
    "cycles": "noise,blur",
    "noise_levels": _csv(DEFAULT_NOISE_LEVELS),
    "blur_levels": _csv(DEFAULT_BLUR_LEVELS),
    "mix_lambda": "uniform",
    "mix_pairing": "same",
    "mix_scope": "batch",
    "seed": "0",
    # evaluation
    "sweep_noise_levels": _csv(DEFAULT_NOISE_LEVELS),
    "sweep_blur_levels": _csv(DEFAULT_BLUR_LEVELS),
    "sweep_clean": "true",
    "top_k": "3",
}


@dataclass
class RunConfig:
    values: dict[str, str]
    base_dir: Path
    synth: SynthConfig
    train: TrainConfig
    grid: SweepGrid
    test_fraction: float
    split_seed: int
    top_k: int
    seed: int

    @property
    def data_path(self) -> Path:
        p = Path(self.values["data_path"])
        return p if p.is_absolute() else self.base_dir / p


def parse_text(text: str) -> dict[str, str]:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected key = value")
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key {key!r} (line {lineno})")
        values[key] = value.strip()
    return values


def _family(name: str, noise: LevelFamily, blur: LevelFamily) -> LevelFamily | None:
    if name == "noise":
        return noise
    if name == "blur":
        return blur
    if name == "pristine":
        return None
    raise ValueError(f"unknown cycle family {name!r}; use noise, blur or pristine")


def build(values: dict[str, str], base_dir: Path = Path("."), seed: int | None = None) -> RunConfig:
    v = dict(DEFAULTS)
    for key in values:
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key {key!r}")
    v.update(values)
    if seed is not None:
        v["seed"] = str(seed)

    def get(key, parse):
        try:
            return parse(v[key])
        except ValueError as exc:
            raise ConfigError(f"invalid value for {key}: {exc}") from None

    def check(key, build_fn):
        try:
            return build_fn()
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"invalid value for {key}: {exc}") from None

    synth = check(
        "synth_*",
        lambda: SynthConfig(
            classes=get("synth_classes", lambda t: tuple(x.strip() for x in t.split(",") if x.strip())),
            per_class=get("synth_per_class", int),
            size=get("synth_size", int),
            channels=get("synth_channels", int),
            background_noise=get("synth_background_noise", float),
            contrast=get("synth_contrast", float),
            seed=get("synth_seed", int),
        ),
    )
    noise = get("noise_levels", lambda t: LevelFamily.noise(_ints(t)))
    blur = get("blur_levels", lambda t: LevelFamily.blur(_ints(t)))
    families = get("cycles", lambda t: [_family(x.strip(), noise, blur) for x in t.split(",") if x.strip()])
    epochs = get("epochs_per_cycle", int)
    alpha0 = get("alpha0", float)
    cycles = check("cycles", lambda: make_cycle_plan(families, epochs, alpha0))
    policy = get("mix_lambda", lambda t: MixPolicy.parse(t, v["mix_pairing"], v["mix_scope"]))
    arch = get("architecture", lambda t: Architecture.parse(t) if t else None)
    batch_size = get("batch_size", int)
    momentum = get("momentum", float)
    seed_value = get("seed", int)
    train = check(
        "batch_size/momentum",
        lambda: TrainConfig(tuple(cycles), batch_size, momentum, seed_value, policy, arch),
    )
    grid = check(
        "sweep_*",
        lambda: SweepGrid(_ints(v["sweep_noise_levels"]), _ints(v["sweep_blur_levels"]), _bool(v["sweep_clean"])),
    )
    test_fraction = get("test_fraction", float)
    if not 0 < test_fraction < 1:
        raise ConfigError("invalid value for test_fraction: must lie in (0, 1)")
    top_k = get("top_k", int)
    if top_k < 1:
        raise ConfigError("invalid value for top_k: must be >= 1")
    split_seed = get("split_seed", int)
    return RunConfig(v, Path(base_dir), synth, train, grid, test_fraction, split_seed, top_k, seed_value)


def load(path: str | Path | None, seed: int | None = None) -> RunConfig:
    if path is None:
        return build({}, Path("."), seed)
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return build(parse_text(text), path.parent, seed)
