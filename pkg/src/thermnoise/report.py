"""JSON reports and the CSV views derived from them.

Document layout::

    {
      "header": {"schema_version", "timestamp", "toolkit_version", "timings"},
      "body":   {"schema_version", "run_id", "master_seed", "dataset_checksum",
                 "config", "baseline": [cell...], "sweep": [cell...],
                 "model_cards": {...}}
    }

Only ``body`` is covered by the determinism contract: identical runs give
byte-identical ``body_bytes``. Floats in the body carry 6 significant
digits; an SNR of +inf is written as the string ``"inf"``. The JSON is the
source of truth, and every CSV number is derived from the rounded JSON
value.
"""
from __future__ import annotations

import datetime as _dt
import json
import math

from . import __version__
from .errors import ThermNoiseError
from .evaluation import CellResult, RobustnessReport

SCHEMA_VERSION = 1


class ReportError(ThermNoiseError):
    """The report lacks data needed for the requested view."""


def round_sig(x: float, digits: int = 6) -> float:
    if x == 0 or not math.isfinite(x):
        return x
    return float(f"{x:.{digits}g}")


def _round_tree(obj):
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, float):
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return round_sig(obj)
    if isinstance(obj, dict):
        return {str(k): _round_tree(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_tree(v) for v in obj]
    # numpy scalars
    if hasattr(obj, "item"):
        return _round_tree(obj.item())
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _cell_dict(c: CellResult) -> dict:
    return _round_tree(c.to_dict())


def _cell_from(d: dict) -> CellResult:
    snr = d["snr_db"]
    if isinstance(snr, str):
        snr = float(snr)
    return CellResult(
        model=d["model"],
        snr_db=snr,
        clean_accuracy=d["clean_accuracy"],
        noisy_accuracy_mean=d["noisy_accuracy_mean"],
        noisy_accuracy_std=d["noisy_accuracy_std"],
        loss_pp=d["loss_pp"],
    )


def report_body(r: RobustnessReport) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "run_id": r.run_id,
        "master_seed": int(r.master_seed),
        "dataset_checksum": r.dataset_checksum,
        "config": _round_tree(r.config),
        "baseline": [_cell_dict(c) for c in r.baseline],
        "sweep": [_cell_dict(c) for c in r.sweep],
        "model_cards": _round_tree(r.model_cards),
    }


def body_bytes(body: dict) -> bytes:
    return json.dumps(body, sort_keys=True, indent=2, allow_nan=False).encode()


def emit_json(r: RobustnessReport, timestamp: str | None = None) -> str:
    if timestamp is None:
        timestamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    doc = {
        "header": {
            "schema_version": SCHEMA_VERSION,
            "timestamp": timestamp,
            "toolkit_version": __version__,
            "timings": _round_tree(r.timings),
        },
        "body": report_body(r),
    }
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"


def parse_json(text: str) -> RobustnessReport:
    doc = json.loads(text)
    if "body" not in doc or doc["body"].get("schema_version") != SCHEMA_VERSION:
        raise ReportError("not a report document (missing body or schema_version)")
    b = doc["body"]
    config = _restore_inf(b["config"])
    return RobustnessReport(
        run_id=b["run_id"],
        master_seed=b["master_seed"],
        config=config,
        dataset_checksum=b["dataset_checksum"],
        baseline=[_cell_from(c) for c in b["baseline"]],
        sweep=[_cell_from(c) for c in b["sweep"]],
        timings=doc.get("header", {}).get("timings", {}),
        model_cards=b.get("model_cards", {}),
    )


def _restore_inf(obj):
    if obj == "inf":
        return math.inf
    if isinstance(obj, dict):
        return {k: _restore_inf(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_restore_inf(v) for v in obj]
    return obj


def rounded(r: RobustnessReport) -> RobustnessReport:
    """The report as it reads back from JSON (6 significant digits)."""
    return parse_json(emit_json(r, timestamp=""))


def _snr_label(snr: float) -> str:
    return "infdB" if math.isinf(snr) else f"{snr:g}dB"


def _fmt2(x: float) -> str:
    s = f"{x:.2f}"
    return "0.00" if s == "-0.00" else s


def emit_baseline_csv(r: RobustnessReport) -> str:
    lines = ["model,accuracy_mean,accuracy_std"]
    for c in rounded(r).baseline:
        lines.append(f"{c.model},{c.clean_accuracy!r},{c.noisy_accuracy_std!r}")
    return "\n".join(lines) + "\n"


def emit_table3_csv(r: RobustnessReport) -> str:
    """Wide loss grid: one row per model, one column per SNR."""
    rr = rounded(r)
    if not rr.sweep:
        raise ReportError("report has no sweep cells; run a sweep first")
    grid = rr.snr_grid
    lines = ["model," + ",".join(_snr_label(s) for s in grid)]
    for model in rr.models:
        row = [model]
        for snr in grid:
            try:
                row.append(_fmt2(rr.cell(model, snr).loss_pp))
            except KeyError:
                raise ReportError(f"missing sweep cell for model {model!r} at {snr:g} dB") from None
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def emit_trend_csv(r: RobustnessReport) -> str:
    """Long-form (snr_db, model, loss_pp) rows sorted by model, then SNR descending."""
    rr = rounded(r)
    if not rr.sweep:
        raise ReportError("report has no sweep cells; run a sweep first")
    rows = sorted(rr.sweep, key=lambda c: (c.model, -c.snr_db))
    lines = ["snr_db,model,loss_pp"]
    for c in rows:
        snr = "inf" if math.isinf(c.snr_db) else json.dumps(c.snr_db)
        lines.append(f"{snr},{c.model},{json.dumps(c.loss_pp)}")
    return "\n".join(lines) + "\n"


def format_table2(r: RobustnessReport) -> str:
    width = max(len(c.model) for c in r.baseline)
    lines = [f"{'Model':<{width}}  Accuracy", f"{'-' * width}  --------"]
    for c in r.baseline:
        lines.append(f"{c.model:<{width}}  {100 * c.clean_accuracy:6.2f}%  (std {100 * c.noisy_accuracy_std:.2f})")
    return "\n".join(lines)


def format_table3(r: RobustnessReport) -> str:
    grid = r.snr_grid
    width = max(len(m) for m in r.models)
    head = f"{'Model':<{width}}  " + "  ".join(f"{_snr_label(s):>8}" for s in grid)
    lines = [head]
    for m in r.models:
        lines.append(f"{m:<{width}}  " + "  ".join(f"{r.cell(m, s).loss_pp:8.2f}" for s in grid))
    return "\n".join(lines)
