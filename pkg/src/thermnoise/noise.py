"""SNR arithmetic and seeded additive white Gaussian noise.

Random streams
--------------
Every noise vector comes from a counter-based stream identified by a 64-bit
``stream_seed``. Stream ``s`` is the splitmix64 sequence started at
``fmix64(s)``: output ``i`` is ``fmix64(fmix64(s) + (i + 1) * GOLDEN)`` where
``fmix64`` is the splitmix64 finalizer and ``GOLDEN = 0x9E3779B97F4A7C15``.
Consecutive output pairs ``(a, b)`` become uniforms
``u1 = ((a >> 11) + 1) / 2**53`` in (0, 1] and ``u2 = (b >> 11) / 2**53`` in
[0, 1), and Box-Muller turns each pair into two standard normals
``sqrt(-2 ln u1) * (cos 2 pi u2, sin 2 pi u2)``, emitted in that order.

Channel streams are keyed by ``mix64(master_seed, trial, label, subject,
segment_index, channel)``, where ``mix64`` folds each word into a running
hash with ``h = fmix64(h ^ (word + GOLDEN + (h << 6) + (h >> 2)))``. The key
does not include the SNR, so one trial reuses the same unit-variance draws
at every SNR and only the scale changes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, UndefinedSNRError
from .ingest import Segment

GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_U64 = np.uint64
_MASK = (1 << 64) - 1


def _fmix64(x: np.ndarray) -> np.ndarray:
    x = x.astype(_U64, copy=True)
    x ^= x >> _U64(30)
    x *= _U64(_M1)
    x ^= x >> _U64(27)
    x *= _U64(_M2)
    x ^= x >> _U64(31)
    return x


def mix64(*words) -> np.ndarray:
    """Avalanche-combine integer words (scalars or broadcastable arrays)."""
    arrays = [
        np.asarray(int(w) & _MASK, dtype=_U64) if np.ndim(w) == 0 else np.asarray(w).astype(_U64)
        for w in words
    ]
    with np.errstate(over="ignore"):
        h = np.zeros(np.broadcast_shapes(*(a.shape for a in arrays)), dtype=_U64)
        for w in arrays:
            h = _fmix64(h ^ (w + _U64(GOLDEN) + (h << _U64(6)) + (h >> _U64(2))))
    return h


def _normals(stream_seeds: np.ndarray, n: int) -> np.ndarray:
    """Standard normals, shape ``stream_seeds.shape + (n,)``."""
    seeds = np.asarray(stream_seeds, dtype=_U64)
    n_pairs = (n + 1) // 2
    with np.errstate(over="ignore"):
        start = _fmix64(seeds)[..., None]
        counter = np.arange(1, 2 * n_pairs + 1, dtype=_U64)
        raw = _fmix64(start + counter * _U64(GOLDEN))
    a = raw[..., 0::2] >> _U64(11)
    b = raw[..., 1::2] >> _U64(11)
    u1 = (a.astype(np.float64) + 1.0) * 2.0**-53
    u2 = b.astype(np.float64) * 2.0**-53
    r = np.sqrt(-2.0 * np.log(u1))
    out = np.empty(seeds.shape + (2 * n_pairs,), dtype=np.float64)
    out[..., 0::2] = r * np.cos(2 * np.pi * u2)
    out[..., 1::2] = r * np.sin(2 * np.pi * u2)
    return out[..., :n]


def mean_power(samples) -> float:
    """Mean square of ``samples`` (DC included)."""
    x = np.asarray(samples, dtype=np.float64)
    if x.size == 0:
        raise ValueError("mean_power of an empty vector")
    return float(np.mean(x * x))


def sigma_for_snr(power: float, snr_db: float) -> float:
    """Noise standard deviation giving ``snr_db`` against a signal of ``power``."""
    if power < 0:
        raise ValueError(f"signal power must be >= 0, got {power}")
    if math.isinf(snr_db) and snr_db > 0:
        return 0.0
    return math.sqrt(power * 10.0 ** (-snr_db / 10.0))


def gaussian_noise(n: int, sigma: float, stream_seed: int) -> np.ndarray:
    """``n`` draws from N(0, sigma**2) on stream ``stream_seed`` (see module doc)."""
    if n < 0 or sigma < 0:
        raise ValueError("n and sigma must be non-negative")
    if n == 0:
        return np.zeros(0)
    seed = np.asarray(int(stream_seed) & _MASK, dtype=_U64)
    return sigma * _normals(seed, n)


@dataclass(frozen=True)
class NoisePlan:
    """Target SNR and randomness for one injection setting.

    ``snr_db = inf`` disables noise; it is the sentinel for a clean pass
    through the noisy code path.
    """

    snr_db: float
    trials: int = 5
    master_seed: int = 0
    scope: str = field(default="per_channel_per_segment", init=False)

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if math.isnan(self.snr_db) or self.snr_db == -math.inf:
            raise ConfigError(f"snr_db must be finite or +inf, got {self.snr_db}")


@dataclass(frozen=True)
class InjectionResult:
    segment: Segment
    sigma: np.ndarray  # per channel
    zero_power_channels: tuple[int, ...]

    @property
    def warnings(self) -> list[str]:
        return [f"channel {c}: zero signal power, SNR undefined, no noise added" for c in self.zero_power_channels]


def channel_stream_seeds(master_seed: int, trial: int, keys: np.ndarray, n_channels: int) -> np.ndarray:
    """Stream seeds of shape (n_segments, n_channels) for segment identity ``keys``.

    ``keys`` is an integer array of (label, subject, segment_index) rows.
    """
    keys = np.asarray(keys, dtype=np.int64).reshape(-1, 3)
    ch = np.arange(n_channels, dtype=np.int64)[None, :]
    return mix64(master_seed, trial, keys[:, 0:1], keys[:, 1:2], keys[:, 2:3], ch)


def inject_signals(signals: np.ndarray, keys: np.ndarray, plan: NoisePlan, trial: int):
    """Vectorized injection over a stack of segments.

    Parameters
    ----------
    signals : ndarray of shape (n_segments, n_samples, n_channels)
    keys : ndarray of shape (n_segments, 3)
        (label, subject, segment_index) of each segment.

    Returns
    -------
    noisy : ndarray, same shape as ``signals``
    sigma : ndarray of shape (n_segments, n_channels)
    """
    if not 0 <= trial < plan.trials:
        raise ValueError(f"trial {trial} outside [0, {plan.trials})")
    x = np.asarray(signals, dtype=np.float64)
    power = np.mean(x * x, axis=1)
    if math.isinf(plan.snr_db):
        return x.copy(), np.zeros_like(power)
    sigma = np.sqrt(power * 10.0 ** (-plan.snr_db / 10.0))
    seeds = channel_stream_seeds(plan.master_seed, trial, keys, x.shape[2])
    z = _normals(seeds, x.shape[1])  # (n_seg, n_ch, n_samples)
    noisy = x + np.transpose(z, (0, 2, 1)) * sigma[:, None, :]
    return noisy, sigma


def inject(segment: Segment, plan: NoisePlan, trial: int) -> InjectionResult:
    """Add per-channel noise calibrated to ``plan.snr_db`` to one segment.

    Each channel's power is estimated over this segment alone. Channels with
    zero power pass through untouched and are reported in the result.
    """
    key = np.array([[segment.label, segment.subject, segment.segment_index]])
    noisy, sigma = inject_signals(segment.samples[None], key, plan, trial)
    zero = tuple(int(c) for c in np.flatnonzero(np.mean(segment.samples**2, axis=0) == 0))
    return InjectionResult(segment.with_samples(noisy[0]), sigma[0], zero)


def measure_snr(clean, noisy) -> float:
    """SNR in dB of ``noisy`` against its clean reference."""
    c = np.asarray(clean, dtype=np.float64)
    n = np.asarray(noisy, dtype=np.float64)
    if c.shape != n.shape or c.size == 0:
        raise ValueError("clean and noisy must be non-empty with equal shapes")
    ps = mean_power(c)
    pn = mean_power(n - c)
    if ps == 0 or pn == 0:
        raise UndefinedSNRError(f"SNR undefined (signal power {ps}, noise power {pn})")
    return 10.0 * math.log10(ps / pn)


@dataclass(frozen=True)
class NoiseStats:
    sample_mean: float
    sample_variance: float
    measured_snr_db: float | None


def noise_stats(clean, noisy) -> NoiseStats:
    diff = np.asarray(noisy, dtype=np.float64) - np.asarray(clean, dtype=np.float64)
    try:
        snr = measure_snr(clean, noisy)
    except UndefinedSNRError:
        snr = None
    return NoiseStats(float(diff.mean()), float(diff.var()), snr)


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    counts: np.ndarray

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    def to_csv(self) -> str:
        lines = ["bin_center,count"]
        lines += [f"{c:.6g},{int(n)}" for c, n in zip(self.centers, self.counts)]
        return "\n".join(lines) + "\n"


def noise_histogram(noise, bins: int) -> Histogram:
    """Equal-width histogram spanning [min, max] of ``noise``."""
    x = np.asarray(noise, dtype=np.float64).ravel()
    if x.size == 0:
        raise ValueError("histogram of an empty vector")
    if bins < 1:
        raise ValueError("bins must be >= 1")
    counts, edges = np.histogram(x, bins=bins)
    return Histogram(edges, counts)
