import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from thermnoise.errors import ConfigError, UndefinedSNRError
from thermnoise.ingest import Segment
from thermnoise.noise import (
    NoisePlan,
    channel_stream_seeds,
    gaussian_noise,
    inject,
    inject_signals,
    mean_power,
    measure_snr,
    mix64,
    noise_histogram,
    noise_stats,
    sigma_for_snr,
)

finite = st.floats(-1e6, 1e6, allow_nan=False)


@pytest.mark.parametrize("x, p", [([1, 1, 1, 1], 1.0), ([0, 0, 0], 0.0), ([3, -4], 12.5)])
def test_mean_power(x, p):
    assert mean_power(x) == p


def test_mean_power_empty():
    with pytest.raises(ValueError):
        mean_power([])


@given(st.lists(finite, min_size=1, max_size=50))
def test_mean_power_nonnegative(xs):
    assert mean_power(xs) >= 0


@pytest.mark.parametrize("power, snr, sigma", [(1.0, 0.0, 1.0), (4.0, 20.0, 0.2), (0.0, 13.0, 0.0)])
def test_sigma_for_snr(power, snr, sigma):
    assert sigma_for_snr(power, snr) == pytest.approx(sigma, rel=1e-12)


def test_sigma_for_snr_negative_power():
    with pytest.raises(ValueError):
        sigma_for_snr(-1.0, 10)


@given(st.floats(1e-6, 1e6), st.floats(-10, 60))
def test_sigma_roundtrip(power, snr):
    s = sigma_for_snr(power, snr)
    assert s > 0
    assert 10 * math.log10(power / s**2) == pytest.approx(snr, abs=1e-9)


def test_gaussian_noise_edge_cases():
    assert gaussian_noise(0, 1.0, 3).shape == (0,)
    assert gaussian_noise(5, 0.0, 3).tolist() == [0.0] * 5


def test_gaussian_noise_deterministic_and_prefix_stable():
    a = gaussian_noise(11, 1.0, 99)
    assert np.array_equal(a, gaussian_noise(11, 1.0, 99))
    # counter-based stream: a shorter draw is a prefix of a longer one
    assert np.array_equal(gaussian_noise(7, 1.0, 99), a[:7])
    assert not np.array_equal(a, gaussian_noise(11, 1.0, 100))


def test_gaussian_noise_moments():
    x = gaussian_noise(10**6, 1.0, 42)
    # 3-sigma standard-error bounds: 3/sqrt(n) = 0.003 for the mean, 3*sqrt(2/n) ~ 0.0042 for the variance
    assert abs(x.mean()) <= 0.004
    assert abs(x.var() - 1.0) <= 0.01


def test_gaussian_noise_tails_look_normal():
    x = gaussian_noise(200_000, 1.0, 5)
    # P(|Z| > 1) = 0.3173, P(|Z| > 2) = 0.0455
    assert abs(np.mean(np.abs(x) > 1) - 0.3173) < 0.005
    assert abs(np.mean(np.abs(x) > 2) - 0.0455) < 0.002


def test_mix64_avalanche():
    base = int(mix64(1, 2, 3))
    flipped = [int(mix64(1 ^ (1 << b), 2, 3)) for b in range(64)]
    changed = [bin(base ^ f).count("1") for f in flipped]
    assert 20 < np.mean(changed) < 44
    assert len({int(mix64(0, t, 0)) for t in range(1000)}) == 1000


def test_mix64_broadcasts():
    seeds = channel_stream_seeds(5, 0, np.array([[1, 1, 1], [1, 1, 2]]), 4)
    assert seeds.shape == (2, 4)
    assert len(set(seeds.ravel().tolist())) == 8
    assert int(seeds[1, 2]) == int(mix64(5, 0, 1, 1, 2, 2))


def _sine_segment(n=125, channels=1, amp=1.0, index=1):
    t = np.arange(n)
    cols = [amp * np.sin(2 * np.pi * (1.3 + 0.1 * c) * t / 25 + c) for c in range(channels)]
    return Segment(np.stack(cols, axis=1), 1, 1, index)


def test_inject_zero_segment_passes_through():
    seg = Segment(np.zeros((125, 45)), 1, 1, 1)
    res = inject(seg, NoisePlan(5.0, 1, 0), 0)
    assert np.array_equal(res.segment.samples, seg.samples)
    assert res.zero_power_channels == tuple(range(45))
    assert len(res.warnings) == 45


def test_inject_deterministic_and_pure():
    seg = _sine_segment(channels=3)
    before = seg.samples.copy()
    plan = NoisePlan(10.0, 3, 1234)
    a = inject(seg, plan, 2).segment.samples
    b = inject(seg, plan, 2).segment.samples
    assert a.tobytes() == b.tobytes()
    assert np.array_equal(seg.samples, before)
    assert not np.array_equal(a, inject(seg, plan, 1).segment.samples)
    assert not np.array_equal(a, inject(seg, NoisePlan(10.0, 3, 1235), 2).segment.samples)


def test_inject_trial_out_of_range():
    with pytest.raises(ValueError):
        inject(_sine_segment(), NoisePlan(10.0, 2, 0), 2)


def test_inject_infinite_snr_is_identity():
    seg = _sine_segment(channels=2)
    res = inject(seg, NoisePlan(math.inf, 1, 0), 0)
    assert np.array_equal(res.segment.samples, seg.samples)


def test_noise_plan_validation():
    with pytest.raises(ConfigError):
        NoisePlan(10.0, 0, 0)
    with pytest.raises(ConfigError):
        NoisePlan(float("nan"), 1, 0)


def test_inject_5db_single_segment():
    seg = _sine_segment()
    noisy = inject(seg, NoisePlan(5.0, 1, 77), 0).segment.samples
    assert abs(measure_snr(seg.samples[:, 0], noisy[:, 0]) - 5.0) <= 2.0


def test_inject_5db_averaged_over_1000_segments():
    t = np.arange(125)
    sig = np.sin(2 * np.pi * 1.3 * t / 25)[None, :, None] * np.ones((1000, 1, 1))
    keys = np.stack([np.ones(1000), np.ones(1000), np.arange(1000)], axis=1)
    noisy, _ = inject_signals(sig, keys, NoisePlan(5.0, 1, 8), 0)
    snrs = [measure_snr(sig[i, :, 0], noisy[i, :, 0]) for i in range(1000)]
    assert abs(np.mean(snrs) - 5.0) <= 0.1


def test_inject_matches_batch_path():
    segs = [_sine_segment(channels=3, index=i) for i in range(1, 4)]
    plan = NoisePlan(20.0, 2, 3)
    stacked = np.stack([s.samples for s in segs])
    keys = np.array([[s.label, s.subject, s.segment_index] for s in segs])
    batch, _ = inject_signals(stacked, keys, plan, 1)
    for i, s in enumerate(segs):
        assert np.array_equal(inject(s, plan, 1).segment.samples, batch[i])


def test_measure_snr_examples():
    assert measure_snr([1, 1, 1, 1], [2, 0, 2, 0]) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(UndefinedSNRError):
        measure_snr([1, 2, 3], [1, 2, 3])
    with pytest.raises(UndefinedSNRError):
        measure_snr([0, 0], [1, 1])


def test_measure_snr_roundtrip_long_channel():
    t = np.arange(100_000)
    clean = 0.7 * np.sin(2 * np.pi * 0.037 * t) + 0.2
    seg = Segment(clean[:, None], 1, 1, 1)
    noisy = inject(seg, NoisePlan(20.0, 1, 4), 0).segment.samples[:, 0]
    assert abs(measure_snr(clean, noisy) - 20.0) <= 0.5


def test_zero_mean_and_channel_independence():
    n_seg, n = 1000, 100
    sig = np.ones((n_seg, n, 3))
    keys = np.stack([np.ones(n_seg), np.ones(n_seg), np.arange(n_seg)], axis=1)
    noisy, sigma = inject_signals(sig, keys, NoisePlan(0.0, 1, 21), 0)
    noise = noisy - sig  # sigma = 1 everywhere at 0 dB on unit DC
    assert np.allclose(sigma, 1.0)
    pooled = noise.reshape(-1, 3)
    N = len(pooled)
    assert np.all(np.abs(pooled.mean(axis=0)) <= 4 / np.sqrt(N))
    corr = np.corrcoef(pooled.T)
    assert np.all(np.abs(corr[np.triu_indices(3, 1)]) <= 0.02)


def test_noise_stats():
    clean = np.ones(50_000)
    noisy = inject(Segment(clean[:, None], 1, 1, 1), NoisePlan(10.0, 1, 2), 0).segment.samples[:, 0]
    st_ = noise_stats(clean, noisy)
    assert abs(st_.sample_mean) < 4 * np.sqrt(0.1 / 50_000)
    assert st_.sample_variance == pytest.approx(0.1, rel=0.03)
    assert st_.measured_snr_db == pytest.approx(10.0, abs=0.2)
    assert noise_stats(np.zeros(3), np.ones(3)).measured_snr_db is None


class TestHistogram:
    def test_constant_input_single_bin(self):
        h = noise_histogram([0, 0, 0, 0], 1)
        assert h.counts.tolist() == [4]

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            noise_histogram([], 3)

    def test_bell_shape(self):
        h = noise_histogram(gaussian_noise(100_000, 1.0, 9), 100)
        assert abs(h.centers[np.argmax(h.counts)]) <= 0.1
        assert h.counts.sum() == 100_000

    @settings(max_examples=50)
    @given(st.lists(finite, min_size=1, max_size=200), st.integers(1, 40))
    def test_conservation(self, xs, bins):
        h = noise_histogram(xs, bins)
        assert h.counts.sum() == len(xs)
        assert len(h.edges) == bins + 1
        if min(xs) < max(xs):
            assert h.edges[0] == min(xs) and h.edges[-1] == max(xs)

    def test_csv(self):
        text = noise_histogram([0.0, 1.0, 1.0, 2.0], 2).to_csv()
        assert text.splitlines() == ["bin_center,count", "0.5,1", "1.5,3"]
