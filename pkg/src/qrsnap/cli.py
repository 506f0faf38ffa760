"""Command line: gen-data, train, sweep, report.

Exit codes: 0 ok, 2 config error, 3 I/O or model error, 4 data-format error.
Set THREADS=1 for the fully deterministic single-threaded mode.
"""

from __future__ import annotations

import argparse
import hashlib
import logging
import os
import sys
from contextlib import nullcontext
from pathlib import Path

from . import config as config_mod
from .data import DataFormatError, generate_synthetic, load_qrds, save_qrds, split
from .ensemble import load_ensemble, save_ensemble
from .evaluation import read_sweep_csv, sweep
from .report import render_svg
from .trainer import LogRow, train_baseline, train_gspecialist
from .weights import WeightFormatError

log = logging.getLogger("qrsnap")

EXIT_CONFIG, EXIT_IO, EXIT_FORMAT = 2, 3, 4


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _config(args) -> config_mod.RunConfig:
    try:
        return config_mod.load(args.config, args.seed)
    except config_mod.ConfigError as exc:
        raise CliError(EXIT_CONFIG, str(exc)) from None


def _load_data(cfg: config_mod.RunConfig):
    path = cfg.data_path
    try:
        return load_qrds(path)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read dataset {path}: {exc.strerror}") from None
    except DataFormatError as exc:
        raise CliError(EXIT_FORMAT, f"{path}: {exc}") from None


def cmd_gen_data(args) -> int:
    cfg = _config(args)
    out = Path(args.out)
    if not out.parent.is_dir():
        raise CliError(EXIT_CONFIG, f"output directory {out.parent} does not exist")
    ds = generate_synthetic(cfg.synth)
    save_qrds(ds, out)
    print(f"{out}: {len(ds)} images, {ds.num_classes} classes, sha256 {_digest(out)}")
    return 0


def write_log_csv(rows: list[LogRow], path: Path) -> None:
    lines = ["iteration,cycle,lr,loss"] + [f"{r.iteration},{r.cycle},{r.lr!r},{r.loss!r}" for r in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_train(args) -> int:
    cfg = _config(args)
    ds = _load_data(cfg)
    try:
        train_set, _ = split(ds, cfg.test_fraction, cfg.split_seed)
    except ValueError as exc:
        raise CliError(EXIT_CONFIG, f"cannot split dataset: {exc}") from None
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot create {out}: {exc.strerror}") from None
    fn = train_gspecialist if args.mode == "gspecialist" else train_baseline
    rows: list[LogRow] = []
    try:
        model = fn(train_set, cfg.train, rows)
    except ValueError as exc:
        raise CliError(EXIT_CONFIG, f"invalid training plan: {exc}") from None
    manifest = save_ensemble(model, out, args.mode)
    write_log_csv(rows, out / f"{args.mode}-log.csv")
    print(f"{manifest}: {len(model)} snapshot(s) {','.join(model.specialties)}; {len(rows)} iterations")
    return 0


def _parse_manifest_arg(text: str) -> tuple[str, Path]:
    tag, sep, path = text.partition("=")
    if sep and tag and "/" not in tag:
        return tag, Path(path)
    p = Path(text)
    return p.stem, p


def cmd_sweep(args) -> int:
    cfg = _config(args)
    models = []
    for arg in args.manifests:
        tag, path = _parse_manifest_arg(arg)
        try:
            models.append((tag, load_ensemble(path)))
        except OSError as exc:
            raise CliError(EXIT_IO, f"cannot read {exc.filename or path}: {exc.strerror}") from None
        except (WeightFormatError, ValueError) as exc:
            raise CliError(EXIT_IO, f"bad model in {path}: {exc}") from None
    ds = _load_data(cfg)
    _, test = split(ds, cfg.test_fraction, cfg.split_seed)
    k = min(cfg.top_k, ds.num_classes)
    try:
        report = sweep(models, test, cfg.grid, k, cfg.seed)
    except ValueError as exc:  # e.g. model/data shape mismatch
        raise CliError(EXIT_IO, str(exc)) from None
    out = Path(args.out)
    try:
        report.write_csv(out)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write {out}: {exc.strerror}") from None
    print(f"{out}: {len(report.rows)} rows, sha256 {_digest(out)}")
    return 0


def cmd_report(args) -> int:
    src = Path(args.csv)
    try:
        text = src.read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read {src}: {exc.strerror}") from None
    try:
        rows = read_sweep_csv(text)
    except ValueError as exc:
        raise CliError(EXIT_FORMAT, f"{src}: {exc}") from None
    Path(args.out).write_text(render_svg(rows), encoding="utf-8")
    print(f"{args.out}: chart of {len({r.model for r in rows})} model(s)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qrsnap", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key=value config file (defaults apply when omitted)")
        p.add_argument("--seed", type=int, help="overrides the config seed")

    p = sub.add_parser("gen-data", help="generate the synthetic dataset as a QRDS file")
    common(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train a G-Specialist or pristine baseline ensemble")
    common(p)
    p.add_argument("--mode", choices=("gspecialist", "baseline"), default="gspecialist")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="evaluate ensembles over the distortion grid")
    common(p)
    p.add_argument("manifests", nargs="+", help="manifest path, or tag=path")
    p.add_argument("--out", required=True, help="output CSV")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="render a sweep CSV as SVG line charts")
    p.add_argument("csv")
    p.add_argument("--out", required=True, help="output SVG")
    p.set_defaults(func=cmd_report)
    return parser


def _thread_limit():
    threads = os.environ.get("THREADS")
    if not threads:
        return nullcontext()
    try:
        n = int(threads)
    except ValueError:
        raise CliError(EXIT_CONFIG, f"THREADS must be a positive integer, got {threads!r}") from None
    if n < 1:
        raise CliError(EXIT_CONFIG, f"THREADS must be a positive integer, got {threads!r}")
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        with _thread_limit():
            return args.func(args)
    except CliError as exc:
        print(f"qrsnap {args.command}: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
