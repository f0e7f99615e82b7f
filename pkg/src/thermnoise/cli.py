"""Command-line entry point.

Exit codes: 0 success, 1 structural or configuration error, 2 validation
failure.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import report
from .config import DATA_ROOT_ENV, RunConfig, build_section, load_config_file, resolve_config
from .errors import DataValidationError, ThermNoiseError
from .evaluation import baseline_report, run_sweep
from .ingest import (
    Dataset,
    Segment,
    SynthSpec,
    infer_shape,
    load_activity_dataset,
    synth_dataset,
    validate_dataset,
    write_activity_dataset,
)
from .noise import NoisePlan, inject, measure_snr, noise_histogram

log = logging.getLogger("thermnoise")

EXIT_OK, EXIT_STRUCTURAL, EXIT_VALIDATION = 0, 1, 2


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def _seed(args, local: str = "seed"):
    val = getattr(args, local, None)
    return val if val is not None else args.global_seed


def cmd_ingest(args) -> int:
    root = args.root or os.environ.get(DATA_ROOT_ENV)
    if root is None:
        _err(f"--root not given and ${DATA_ROOT_ENV} is unset")
        return EXIT_STRUCTURAL
    try:
        shape = infer_shape(root)
        ds = load_activity_dataset(root, shape, strict=False)
    except DataValidationError as exc:
        _err(str(exc))
        return EXIT_VALIDATION
    except ThermNoiseError as exc:
        _err(str(exc))
        return EXIT_STRUCTURAL
    rep = validate_dataset(ds)
    if not args.check_only:
        print(
            f"{len(ds)} segments, {ds.n_classes} classes, {len(set(ds.subjects.tolist()))} subjects, "
            f"{len(ds.channels)} channels x {shape.n_samples} samples @ {ds.sample_rate_hz:g} Hz"
        )
        print(f"checksum {ds.checksum()}")
    print(rep.to_json() if args.json else rep.summary())
    return EXIT_OK if rep.ok else EXIT_VALIDATION


def load_data(cfg: RunConfig) -> Dataset:
    if cfg.data_root is not None:
        return load_activity_dataset(cfg.data_root, cfg.shape)
    return synth_dataset(cfg.synth, cfg.synth_seed)


def _resolve(args, snr_grid=None, trials=None) -> RunConfig:
    raw = load_config_file(args.config)
    if args.output:
        raw["output"] = args.output
    return resolve_config(raw, seed=args.global_seed, snr_grid=snr_grid, trials=trials)


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    log.info("wrote %s", path)


def cmd_baseline(args) -> int:
    try:
        cfg = _resolve(args)
        ds = load_data(cfg)
        r = baseline_report(
            ds, cfg.models, cfg.eval, cfg.features, jobs=args.jobs, config=cfg.echo(), master_seed=cfg.noise.master_seed
        )
    except DataValidationError as exc:
        _err(str(exc))
        return EXIT_VALIDATION
    except ThermNoiseError as exc:
        _err(str(exc))
        return EXIT_STRUCTURAL
    out = Path(cfg.output)
    _write(out / "baseline_report.json", report.emit_json(r))
    _write(out / "baseline.csv", report.emit_baseline_csv(r))
    print(report.format_table2(r))
    return EXIT_OK


def _parse_snr(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"--snr expects comma-separated numbers, got {text!r}") from None


def cmd_sweep(args) -> int:
    try:
        cfg = _resolve(args, snr_grid=args.snr, trials=args.trials)
        ds = load_data(cfg)
        r = run_sweep(ds, cfg.models, cfg.snr_grid, cfg.noise, cfg.eval, cfg.features, jobs=args.jobs, config=cfg.echo())
    except DataValidationError as exc:
        _err(str(exc))
        return EXIT_VALIDATION
    except ThermNoiseError as exc:
        _err(str(exc))
        return EXIT_STRUCTURAL
    out = Path(cfg.output)
    _write(out / "report.json", report.emit_json(r))
    _write(out / "table3.csv", report.emit_table3_csv(r))
    _write(out / "trend.csv", report.emit_trend_csv(r))
    print(report.format_table2(r))
    print()
    print(report.format_table3(r))
    return EXIT_OK


def _read_segment_csv(path) -> np.ndarray:
    try:
        arr = np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float64)
    except ValueError as exc:
        raise DataValidationError(f"{path}: {exc}") from None
    if arr.size == 0:
        raise DataValidationError(f"{path}: empty segment")
    if not np.all(np.isfinite(arr)):
        raise DataValidationError(f"{path}: non-finite values")
    return arr


def cmd_inject(args) -> int:
    src = Path(args.inp)
    if not src.is_file():
        _err(f"input file not found: {src}")
        return EXIT_STRUCTURAL
    try:
        clean = _read_segment_csv(src)
        plan = NoisePlan(args.snr, trials=1, master_seed=_seed(args))
    except ThermNoiseError as exc:
        _err(str(exc))
        return EXIT_STRUCTURAL
    res = inject(Segment(clean, 0, 0, 0), plan, trial=0)
    for w in res.warnings:
        print(f"warning: {w}", file=sys.stderr)
    noisy = res.segment.samples
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(out, noisy, fmt="%.17g", delimiter=",")
    noise = noisy - clean
    if args.hist:
        _write(Path(args.hist), noise_histogram(noise, args.bins).to_csv())
    active = [c for c in range(clean.shape[1]) if c not in res.zero_power_channels]
    if active:
        snr = measure_snr(clean[:, active], noisy[:, active])
        print(f"measured SNR over active channels: {snr:.3f} dB (target {args.snr:g} dB)")
    return EXIT_OK


def cmd_synth(args) -> int:
    try:
        raw = load_config_file(args.spec)
        if isinstance(raw.get("synth"), dict):
            raw = raw["synth"]
        raw = {k: v for k, v in raw.items() if k != "seed"}
        spec = build_section(SynthSpec, raw, "synth")
        spec.validate()
    except ThermNoiseError as exc:
        _err(str(exc))
        return EXIT_STRUCTURAL
    seed = _seed(args)
    ds = synth_dataset(spec, seed)
    out = Path(args.out)
    if out.exists() and any(out.iterdir()):
        _err(f"output directory is not empty: {out}")
        return EXIT_STRUCTURAL
    write_activity_dataset(ds, out)
    print(f"wrote {len(ds)} segments to {out} (seed {seed})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="thermnoise", description=__doc__.splitlines()[0])
    p.add_argument("--seed", dest="global_seed", type=int, default=None, help="override every seed")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", help="load and validate a dataset tree")
    s.add_argument("--root", help=f"dataset root (default ${DATA_ROOT_ENV})")
    s.add_argument("--check-only", action="store_true", help="print only the validation report")
    s.add_argument("--json", action="store_true", help="validation report as JSON")
    s.set_defaults(func=cmd_ingest)

    jobs_default = os.cpu_count() or 1
    for name, func, helptext in (
        ("baseline", cmd_baseline, "clean k-fold accuracy per model"),
        ("sweep", cmd_sweep, "noise-injection robustness sweep (loss per model and SNR)"),
    ):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--config", required=True)
        s.add_argument("--output", help="output directory (overrides config)")
        s.add_argument("--jobs", type=int, default=jobs_default, help="parallel fold workers")
        s.set_defaults(func=func)
        if name == "sweep":
            s.add_argument("--snr", type=_parse_snr, help="comma-separated SNR grid in dB")
            s.add_argument("--trials", type=int, help="noise draws per SNR")

    s = sub.add_parser("inject", help="add calibrated noise to one segment CSV")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--snr", type=float, required=True)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--out", required=True)
    s.add_argument("--hist", help="write noise histogram CSV here")
    s.add_argument("--bins", type=int, default=50)
    s.set_defaults(func=cmd_inject)

    s = sub.add_parser("synth", help="write a synthetic dataset tree")
    s.add_argument("--spec", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=None)
    s.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if getattr(args, "seed", None) is None and args.global_seed is None and args.command in ("inject", "synth"):
        args.seed = 0
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
