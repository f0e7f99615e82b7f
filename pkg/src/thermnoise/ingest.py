"""Loading, validating and synthesizing segmented multi-channel sensor data.

On-disk layout (the public 19-activity convention)::

    root/a01/p1/s01.txt ... root/a19/p8/s60.txt

Each file holds one segment: ``n_samples`` rows of ``n_channels``
comma-separated reals. Channel columns are ordered unit-major, then sensor
kind (accelerometer, gyroscope, magnetometer), then axis (x, y, z).
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataValidationError, ParseError, StructuralError

SENSOR_KINDS = ("accelerometer", "gyroscope", "magnetometer")
AXES = ("x", "y", "z")
N_UNITS = 5


@dataclass(frozen=True)
class ChannelMeta:
    tracker_unit: int
    sensor_kind: str
    axis: str

    @property
    def name(self) -> str:
        return f"u{self.tracker_unit}_{self.sensor_kind[:3]}_{self.axis}"


def standard_channels(n_channels: int = 45) -> list[ChannelMeta]:
    """First ``n_channels`` entries of the unit/kind/axis channel ordering."""
    full = [
        ChannelMeta(unit, kind, axis)
        for unit in range(1, N_UNITS + 1)
        for kind in SENSOR_KINDS
        for axis in AXES
    ]
    if not 1 <= n_channels <= len(full):
        raise ConfigError(f"n_channels must be in [1, {len(full)}], got {n_channels}")
    return full[:n_channels]


@dataclass(frozen=True, eq=False)
class Segment:
    samples: np.ndarray  # (n_samples, n_channels), read-only
    label: int
    subject: int
    segment_index: int

    def __post_init__(self):
        arr = np.array(self.samples, dtype=np.float64, copy=True)
        if arr.ndim != 2:
            raise DataValidationError(f"segment samples must be 2-D, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def n_channels(self) -> int:
        return self.samples.shape[1]

    def with_samples(self, samples: np.ndarray) -> "Segment":
        return Segment(samples, self.label, self.subject, self.segment_index)


@dataclass(frozen=True, eq=False)
class Dataset:
    segments: tuple[Segment, ...]
    channels: tuple[ChannelMeta, ...]
    sample_rate_hz: float
    n_classes: int

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        object.__setattr__(self, "channels", tuple(self.channels))

    def __len__(self) -> int:
        return len(self.segments)

    @cached_property
    def signals(self) -> np.ndarray:
        """All segments stacked, shape (n_segments, n_samples, n_channels)."""
        if not self.segments:
            return np.empty((0, 0, len(self.channels)))
        out = np.stack([s.samples for s in self.segments])
        out.setflags(write=False)
        return out

    @cached_property
    def labels(self) -> np.ndarray:
        out = np.array([s.label for s in self.segments], dtype=np.int64)
        out.setflags(write=False)
        return out

    @cached_property
    def subjects(self) -> np.ndarray:
        out = np.array([s.subject for s in self.segments], dtype=np.int64)
        out.setflags(write=False)
        return out

    def subset(self, indices) -> "Dataset":
        return Dataset(
            tuple(self.segments[i] for i in indices),
            self.channels,
            self.sample_rate_hz,
            self.n_classes,
        )

    def checksum(self) -> str:
        """SHA-256 over labels, subjects and raw sample bytes, in segment order."""
        h = hashlib.sha256()
        for seg in self.segments:
            h.update(np.array([seg.label, seg.subject, seg.segment_index], dtype="<i8").tobytes())
            h.update(np.ascontiguousarray(seg.samples, dtype="<f8").tobytes())
        return h.hexdigest()

    def equals(self, other: "Dataset") -> bool:
        if (
            len(self) != len(other)
            or self.channels != other.channels
            or self.sample_rate_hz != other.sample_rate_hz
            or self.n_classes != other.n_classes
        ):
            return False
        return self.checksum() == other.checksum()


@dataclass(frozen=True)
class ShapeConfig:
    """Expected directory dimensions for :func:`load_activity_dataset`."""

    n_classes: int = 19
    n_subjects: int = 8
    n_segments: int = 60
    n_samples: int = 125
    n_channels: int = 45
    sample_rate_hz: float = 25.0


def _parse_segment_file(path: Path, n_rows: int, n_cols: int, strict: bool = True) -> np.ndarray:
    out = np.empty((n_rows, n_cols), dtype=np.float64)
    row = 0
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if row >= n_rows:
                raise ParseError(f"{path}:{lineno}: expected {n_rows} rows, found more")
            parts = line.split(",")
            if len(parts) != n_cols:
                raise ParseError(
                    f"{path}:{lineno}: expected {n_cols} columns, found {len(parts)}"
                )
            try:
                out[row] = [float(p) for p in parts]
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: non-numeric value ({exc})") from None
            if strict and not np.all(np.isfinite(out[row])):
                raise DataValidationError(f"{path}:{lineno}: non-finite value")
            row += 1
    if row != n_rows:
        raise ParseError(f"{path}: expected {n_rows} rows, found {row}")
    return out


def load_activity_dataset(root, expected: ShapeConfig | None = None, strict: bool = True) -> Dataset:
    """Read ``root/aNN/pN/sNN.txt`` into a :class:`Dataset`.

    Segments come back ordered by (class, subject, segment index) and the
    label of each segment is the number in its ``aNN`` directory. With
    ``strict=False`` non-finite values are kept so that
    :func:`validate_dataset` can report them.
    """
    expected = expected or ShapeConfig()
    root = Path(root)
    if not root.is_dir():
        raise StructuralError(f"dataset root not found: {root}")
    segments = []
    for c in range(1, expected.n_classes + 1):
        cdir = root / f"a{c:02d}"
        if not cdir.is_dir():
            raise StructuralError(f"missing class directory: {cdir}")
        for p in range(1, expected.n_subjects + 1):
            pdir = cdir / f"p{p}"
            if not pdir.is_dir():
                raise StructuralError(f"missing subject directory: {pdir}")
            for s in range(1, expected.n_segments + 1):
                fpath = pdir / f"s{s:02d}.txt"
                if not fpath.is_file():
                    raise StructuralError(f"missing segment file: {fpath}")
                data = _parse_segment_file(fpath, expected.n_samples, expected.n_channels, strict)
                segments.append(Segment(data, c, p, s))
    return Dataset(
        tuple(segments),
        tuple(standard_channels(expected.n_channels)),
        expected.sample_rate_hz,
        expected.n_classes,
    )


def infer_shape(root, sample_rate_hz: float = 25.0) -> ShapeConfig:
    """Read dimensions off an existing tree (class/subject/segment counts,
    rows and columns of the first segment file)."""
    root = Path(root)
    if not root.is_dir():
        raise StructuralError(f"dataset root not found: {root}")
    n_classes = len([d for d in root.glob("a[0-9][0-9]") if d.is_dir()])
    first = root / "a01"
    if n_classes == 0 or not first.is_dir():
        raise StructuralError(f"no class directories (a01, a02, ...) under {root}")
    n_subjects = len([d for d in first.glob("p[0-9]*") if d.is_dir()])
    if n_subjects == 0:
        raise StructuralError(f"no subject directories under {first}")
    n_segments = len(list((first / "p1").glob("s[0-9][0-9].txt")))
    if n_segments == 0:
        raise StructuralError(f"no segment files under {first / 'p1'}")
    sample = first / "p1" / "s01.txt"
    if not sample.is_file():
        raise StructuralError(f"missing segment file: {sample}")
    rows = [ln for ln in sample.read_text().splitlines() if ln.strip()]
    if not rows:
        raise ParseError(f"{sample}: empty segment file")
    return ShapeConfig(n_classes, n_subjects, n_segments, len(rows), len(rows[0].split(",")), sample_rate_hz)


def write_activity_dataset(ds: Dataset, root) -> None:
    """Write ``ds`` in the directory layout read by :func:`load_activity_dataset`."""
    root = Path(root)
    for seg in ds.segments:
        pdir = root / f"a{seg.label:02d}" / f"p{seg.subject}"
        pdir.mkdir(parents=True, exist_ok=True)
        # %.17g round-trips float64 exactly
        np.savetxt(pdir / f"s{seg.segment_index:02d}.txt", seg.samples, fmt="%.17g", delimiter=",")


@dataclass
class CheckResult:
    name: str
    passed: bool
    severity: str = "error"  # "error" or "warning"
    findings: list[str] = field(default_factory=list)


@dataclass
class ValidationReport:
    checks: list[CheckResult]

    @property
    def ok(self) -> bool:
        """True when no error-severity check failed (warnings allowed)."""
        return all(c.passed or c.severity == "warning" for c in self.checks)

    @property
    def warnings(self) -> list[CheckResult]:
        return [c for c in self.checks if not c.passed and c.severity == "warning"]

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "checks": [
                {"name": c.name, "passed": c.passed, "severity": c.severity, "findings": c.findings}
                for c in self.checks
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def summary(self) -> str:
        lines = []
        for c in self.checks:
            status = "PASS" if c.passed else ("WARN" if c.severity == "warning" else "FAIL")
            lines.append(f"[{status}] {c.name}")
            lines.extend(f"    {f}" for f in c.findings[:20])
            if len(c.findings) > 20:
                lines.append(f"    ... {len(c.findings) - 20} more")
        return "\n".join(lines)


def _coords(seg: Segment, pos: int) -> str:
    return f"segment #{pos} (class {seg.label}, subject {seg.subject}, index {seg.segment_index})"


def validate_dataset(ds: Dataset) -> ValidationReport:
    """Run every dataset check and collect findings; never raises."""
    finite = CheckResult("finiteness", True)
    shape = CheckResult("shape_uniformity", True)
    coverage = CheckResult("label_coverage", True)
    dupes = CheckResult("duplicate_segments", True, severity="warning")

    n_channels = len(ds.channels)
    ref_samples = ds.segments[0].n_samples if ds.segments else None
    seen: dict[bytes, int] = {}
    present = set()
    for pos, seg in enumerate(ds.segments):
        arr = seg.samples
        if arr.shape != (ref_samples, n_channels):
            shape.passed = False
            shape.findings.append(f"{_coords(seg, pos)}: shape {arr.shape}, expected {(ref_samples, n_channels)}")
        bad = np.argwhere(~np.isfinite(arr))
        if len(bad):
            finite.passed = False
            t, ch = bad[0]
            finite.findings.append(
                f"{_coords(seg, pos)}: {len(bad)} non-finite value(s), first at sample {t}, channel {ch}"
            )
        if not 1 <= seg.label <= ds.n_classes:
            coverage.passed = False
            coverage.findings.append(f"{_coords(seg, pos)}: label outside [1, {ds.n_classes}]")
        present.add(seg.label)
        key = hashlib.sha256(np.ascontiguousarray(arr).tobytes() + str(arr.shape).encode()).digest()
        if key in seen:
            dupes.passed = False
            first = seen[key]
            dupes.findings.append(
                f"{_coords(seg, pos)} is identical to {_coords(ds.segments[first], first)}"
            )
        else:
            seen[key] = pos
    missing = sorted(set(range(1, ds.n_classes + 1)) - present)
    if missing:
        coverage.passed = False
        coverage.findings.append(f"classes with no segments: {missing}")
    if len(set(ds.channels)) != len(ds.channels):
        shape.passed = False
        shape.findings.append("duplicate channel metadata entries")
    return ValidationReport([finite, shape, coverage, dupes])


@dataclass(frozen=True)
class SynthSpec:
    n_classes: int = 4
    n_subjects: int = 2
    segments_per_cell: int = 15
    n_channels: int = 6
    n_samples: int = 50
    sample_rate_hz: float = 25.0

    def validate(self) -> None:
        if self.n_classes < 2:
            raise ConfigError("synth: n_classes must be >= 2")
        if self.n_subjects < 1:
            raise ConfigError("synth: n_subjects must be >= 1")
        if self.segments_per_cell < 1:
            raise ConfigError("synth: segments_per_cell must be >= 1")
        if not 1 <= self.n_channels <= 45:
            raise ConfigError("synth: n_channels must be in [1, 45]")
        if self.n_samples < 2:
            raise ConfigError("synth: n_samples must be >= 2")
        if not (self.sample_rate_hz > 0 and math.isfinite(self.sample_rate_hz)):
            raise ConfigError("synth: sample_rate_hz must be positive")
        if self.segments_per_cell > 99:
            raise ConfigError("synth: segments_per_cell must be <= 99 (sNN file naming)")


def synth_dataset(spec: SynthSpec, seed: int) -> Dataset:
    """Deterministic sinusoid-plus-jitter dataset with separable classes.

    Each class ``c`` gets a frequency drawn from its own band in
    ``[0.5 Hz, 0.4 * sample_rate]``; each (class, channel) pair gets an
    amplitude, phase and offset. Every segment adds Gaussian jitter with
    standard deviation ``0.05 * amplitude``.
    """
    spec.validate()
    rng = np.random.default_rng(np.random.SeedSequence(seed & (2**64 - 1)))
    C, J = spec.n_classes, spec.n_channels
    f_lo, f_hi = 0.5, 0.4 * spec.sample_rate_hz
    width = (f_hi - f_lo) / C
    freq = f_lo + width * (np.arange(C) + 0.25 + 0.5 * rng.random(C))
    amp = rng.uniform(0.5, 2.0, size=(C, J))
    phase = rng.uniform(0.0, 2 * np.pi, size=(C, J))
    offset = rng.uniform(-1.0, 1.0, size=(C, J))

    t = np.arange(spec.n_samples)[:, None]
    segments = []
    for c in range(C):
        base = amp[c] * np.sin(2 * np.pi * freq[c] * t / spec.sample_rate_hz + phase[c]) + offset[c]
        for p in range(1, spec.n_subjects + 1):
            for s in range(1, spec.segments_per_cell + 1):
                jitter = rng.standard_normal(base.shape) * (0.05 * amp[c])
                segments.append(Segment(base + jitter, c + 1, p, s))
    return Dataset(tuple(segments), tuple(standard_channels(J)), spec.sample_rate_hz, C)
