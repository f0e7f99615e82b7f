import dataclasses
import math

import numpy as np
import pytest

from thermnoise import report
from thermnoise.errors import ConfigError
from thermnoise.evaluation import (
    DEFAULT_SNR_GRID,
    EvalConfig,
    EvalError,
    accuracy,
    baseline_report,
    fit_fold,
    make_splits,
    run_baseline,
    run_sweep,
    stratified_kfold,
)
from thermnoise.models import GnbSpec, KnnSpec, TreeSpec, default_specs
from thermnoise.noise import NoisePlan
from thermnoise.pipeline import FeatureConfig


@pytest.fixture(scope="module")
def sweep(synth4):
    return run_sweep(synth4, default_specs(0), DEFAULT_SNR_GRID, NoisePlan(math.inf, 3, 0), EvalConfig())


class TestSplits:
    def test_accuracy(self):
        assert accuracy([1, 2, 3, 4], [1, 2, 3, 4]) == 1.0
        assert accuracy([1, 2, 3, 4], [1, 2, 0, 0]) == 0.5
        with pytest.raises(ValueError):
            accuracy([], [])

    def test_small_kfold(self):
        y = np.repeat([1, 2], 10)
        folds = stratified_kfold(y, 5, 0)
        for f in range(5):
            assert np.bincount(y[folds == f], minlength=3)[1:].tolist() == [2, 2]

    def test_full_size_kfold(self):
        y = np.repeat(np.arange(1, 20), 480)
        folds = stratified_kfold(y, 5, 3)
        for f in range(5):
            assert np.all(np.bincount(y[folds == f], minlength=20)[1:] == 96)

    def test_uneven_counts_differ_by_one(self):
        y = np.array([1] * 7 + [2] * 6 + [3] * 11)
        folds = stratified_kfold(y, 5, 1)
        sizes = np.bincount(folds)
        assert sizes.max() - sizes.min() <= 1
        for c in (1, 2, 3):
            per = np.bincount(folds[y == c], minlength=5)
            assert per.max() - per.min() <= 1

    def test_class_smaller_than_k(self):
        with pytest.raises(ConfigError, match=r"\[3\]"):
            stratified_kfold(np.array([1] * 5 + [2] * 5 + [3] * 4), 5, 0)

    def test_partition_and_seed(self):
        y = np.repeat([1, 2, 3], 12)
        splits = make_splits(y, EvalConfig(k=4, shuffle_seed=2))
        val = np.sort(np.concatenate([v for _, v in splits]))
        assert np.array_equal(val, np.arange(36))
        for tr, va in splits:
            assert not set(tr) & set(va)
        a = stratified_kfold(y, 4, 2)
        assert np.array_equal(a, stratified_kfold(y, 4, 2))
        assert not np.array_equal(a, stratified_kfold(y, 4, 3))

    def test_holdout(self):
        y = np.repeat([1, 2], [10, 20])
        (tr, te), = make_splits(y, EvalConfig(mode="holdout", holdout_fraction=0.2))
        assert np.bincount(y[te]).tolist() == [0, 2, 4]
        assert len(tr) + len(te) == 30


class TestHarness:
    def test_degenerate_rig_scores_one(self, synth4):
        # train == validation with 1-NN must reproduce every label
        idx = np.arange(len(synth4))
        pipes, (m,) = fit_fold(synth4.signals, synth4.labels, idx, [KnnSpec(k=1, pca_target=None)], FeatureConfig(), 4, 0)
        pred = m.predict(pipes[(True, None)].transform(synth4.signals))
        assert accuracy(synth4.labels, pred) == 1.0

    def test_synthetic_separability(self, sweep):
        for c in sweep.baseline:
            assert c.clean_accuracy >= 0.95, c
        for m in sweep.models:
            assert abs(sweep.cell(m, 40.0).loss_pp) <= 1.0

    def test_grid_complete(self, sweep):
        assert sweep.models == ["DNN", "DTC+PCA", "RFC", "KNN+PCA", "GNB"]
        assert sweep.snr_grid == list(DEFAULT_SNR_GRID)
        assert len(sweep.sweep) == 25
        for c in sweep.sweep:
            assert c.loss_pp == pytest.approx(100 * (c.noisy_accuracy_mean - c.clean_accuracy), abs=1e-9)

    def test_monotone_degradation(self, sweep):
        for m in sweep.models:
            acc = [sweep.cell(m, s).noisy_accuracy_mean for s in DEFAULT_SNR_GRID]
            for hi, lo in zip(acc, acc[1:]):
                assert lo <= hi + 0.01, (m, acc)

    def test_baseline_matches_sweep_clean(self, synth4, sweep):
        cells = run_baseline(synth4, default_specs(0), EvalConfig())
        assert [c.clean_accuracy for c in cells] == [c.clean_accuracy for c in sweep.baseline]

    def test_inf_sentinel_is_exact(self, synth4):
        specs = [GnbSpec(), TreeSpec()]
        r = run_sweep(synth4, specs, [math.inf], NoisePlan(math.inf, 2, 0), EvalConfig())
        for c in r.sweep:
            assert c.loss_pp == 0.0
            assert c.noisy_accuracy_mean == c.clean_accuracy
            assert c.noisy_accuracy_std == 0.0

    def test_jobs_invariant(self, synth4):
        specs = [GnbSpec(), KnnSpec(), TreeSpec()]
        a = run_sweep(synth4, specs, [20, 5], NoisePlan(math.inf, 2, 1), EvalConfig(), jobs=1)
        b = run_sweep(synth4, specs, [20, 5], NoisePlan(math.inf, 2, 1), EvalConfig(), jobs=3)
        assert report.body_bytes(report.report_body(a)) == report.body_bytes(report.report_body(b))

    def test_holdout_mode(self, synth4):
        cells = run_baseline(synth4, [GnbSpec()], EvalConfig(mode="holdout"))
        assert cells[0].clean_accuracy >= 0.95 and cells[0].noisy_accuracy_std == 0.0

    def test_baseline_report_has_empty_sweep(self, synth4):
        r = baseline_report(synth4, [GnbSpec()], EvalConfig())
        assert r.sweep == [] and len(r.baseline) == 1
        assert "GNB" in r.model_cards

    def test_duplicate_names_rejected(self, synth4):
        with pytest.raises(ConfigError):
            run_baseline(synth4, [GnbSpec(), GnbSpec()], EvalConfig())

    def test_fit_failure_is_tagged(self, synth4):
        # constant signals make PCA fail with zero variance
        flat = dataclasses.replace(
            synth4, segments=tuple(s.with_samples(np.ones_like(s.samples)) for s in synth4.segments)
        )
        with pytest.raises(EvalError, match=r"model DTC\+PCA, fold 0"):
            run_baseline(flat, [TreeSpec(scale=False)], EvalConfig())


class TestLeakageGuard:
    def test_validation_mutation_leaves_fitted_state(self, synth4):
        (tr, va), *_ = make_splits(synth4.labels, EvalConfig())
        specs = default_specs(0)
        signals = synth4.signals.copy()
        p1, m1 = fit_fold(signals, synth4.labels, tr, specs, FeatureConfig(), 4, 0)
        signals[va] = np.random.default_rng(0).standard_normal(signals[va].shape) * 1e3
        p2, m2 = fit_fold(signals, synth4.labels, tr, specs, FeatureConfig(), 4, 0)
        for k in p1:
            assert p1[k].state_bytes() == p2[k].state_bytes()
        for a, b in zip(m1, m2):
            assert a.state_bytes() == b.state_bytes()
