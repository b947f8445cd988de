import numpy as np
import pytest

from facesync.errors import (
    LengthMismatch,
    SubjectMismatch,
    TooFewSamples,
    UnknownChannel,
)
from facesync.evaluation import (
    compare_to_baseline,
    load_feature_groups,
    paired_t_test,
    subject_metrics,
    suppress_channels,
    suppression_study,
    t_sf,
)
from facesync.features import N_FEATURES, StandardizationStats, WindowSample
from facesync.training import PredictionRow


def rows_from(y_true, y_pred, sid="s0", vid="v0"):
    return [PredictionRow(subject_id=sid, video_id=vid, t_end=10.0 + i,
                          y_pred=float(p), y_true=float(y))
            for i, (y, p) in enumerate(zip(y_true, y_pred))]


class TestTSf:
    def test_df1_matches_arctan_form(self):
        # two-tailed p for df=1: p = 1 - (2/pi) * arctan(|t|)
        for t in (0.3, 1.0, 2.5, 10.0):
            expect = 1.0 - 2.0 / np.pi * np.arctan(t)
            assert t_sf(t, 1) == pytest.approx(expect, abs=1e-6)

    def test_df2_matches_closed_form(self):
        # two-tailed p for df=2: p = 1 - t / sqrt(t^2 + 2)
        for t in (0.5, 1.7, 3.4641016151377544):
            expect = 1.0 - t / np.sqrt(t * t + 2.0)
            assert t_sf(t, 2) == pytest.approx(expect, abs=1e-6)

    def test_symmetric_in_t(self):
        assert t_sf(2.0, 5) == pytest.approx(t_sf(-2.0, 5), abs=1e-15)

    def test_zero_t_gives_one(self):
        assert t_sf(0.0, 4) == pytest.approx(1.0, abs=1e-12)


class TestPairedT:
    def test_reference_example(self):
        # d = [1, 2, 3]: mean 2, sd 1, t = 2*sqrt(3) ~ 3.4641, p ~ 0.0742
        res = paired_t_test([2.0, 4.0, 6.0], [1.0, 2.0, 3.0])
        assert res.df == 2
        assert res.t == pytest.approx(3.4641, abs=1e-4)
        assert res.p == pytest.approx(0.0742, abs=1e-4)

    def test_antisymmetry(self):
        a, b = [1.0, 3.0, 2.5, 4.0], [0.5, 2.0, 3.0, 3.0]
        r1 = paired_t_test(a, b)
        r2 = paired_t_test(b, a)
        assert r1.t == pytest.approx(-r2.t)
        assert r1.p == pytest.approx(r2.p)

    def test_zero_variance_identical(self):
        res = paired_t_test([1.0, 2.0], [1.0, 2.0])
        assert res.zero_variance and res.p == 1.0

    def test_zero_variance_constant_shift(self):
        res = paired_t_test([2.0, 3.0], [1.0, 2.0])
        assert res.zero_variance and res.p == 0.0 and res.t == np.inf

    def test_too_few_pairs(self):
        with pytest.raises(LengthMismatch):
            paired_t_test([1.0], [2.0])


class TestSubjectMetrics:
    def test_values(self):
        rows = rows_from([0.0, 1.0, 0.5, 0.5], [0.1, 0.9, 0.5, 0.7])
        (m,) = subject_metrics(rows)
        assert m.mae == pytest.approx(0.1)
        y = np.array([0.0, 1.0, 0.5, 0.5])
        p = np.array([0.1, 0.9, 0.5, 0.7])
        expect_r2 = 1 - ((y - p) ** 2).sum() / ((y - y.mean()) ** 2).sum()
        assert m.r2 == pytest.approx(expect_r2)

    def test_constant_targets_nan_r2(self):
        rows = rows_from([0.5, 0.5, 0.5], [0.4, 0.5, 0.6])
        (m,) = subject_metrics(rows)
        assert np.isnan(m.r2)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(0)
        rows = []
        for sid in ("a", "b", "c"):
            rows += rows_from(rng.uniform(size=5), rng.uniform(size=5), sid=sid)
        m1 = subject_metrics(rows)
        m2 = subject_metrics(rows[::-1])
        for a, b in zip(m1, m2):
            assert a.subject_id == b.subject_id
            assert a.mae == pytest.approx(b.mae, abs=1e-12)
            assert a.r2 == pytest.approx(b.r2, abs=1e-12)

    def test_single_row_subject_raises(self):
        with pytest.raises(TooFewSamples):
            subject_metrics(rows_from([0.5], [0.5]))


class TestCompareToBaseline:
    def build(self, n_sub=4, seed=1):
        rng = np.random.default_rng(seed)
        model, base = [], []
        for i in range(n_sub):
            y = rng.uniform(size=6)
            model += rows_from(y, y + rng.normal(0, 0.05, 6), sid=f"s{i}")
            base += rows_from(y, np.full(6, 0.5), sid=f"s{i}")
        return model, base

    def test_report_fields(self):
        model, base = self.build()
        rep = compare_to_baseline(model, base)
        assert len(rep.per_subject) == 4
        assert rep.model_mae_mean < rep.baseline_mae_mean
        assert rep.percent_change < 0
        assert 0.0 <= rep.ttest.p <= 1.0
        d = rep.as_dict()
        assert set(d) >= {"per_subject", "model_mae", "baseline_mae",
                          "percent_change", "t", "p", "df"}

    def test_row_key_mismatch_raises(self):
        model, base = self.build()
        with pytest.raises(SubjectMismatch):
            compare_to_baseline(model, base[:-1])


def make_samples(n=8, sids=("s0", "s1")):
    rng = np.random.default_rng(2)
    return [WindowSample(subject_id=sids[i % len(sids)], video_id="v0",
                         t_end=10.0 + i, x=rng.normal(size=(40, N_FEATURES)),
                         y=float(rng.uniform()))
            for i in range(n)]


class TestSuppression:
    def test_feature_groups_cover_declared_channels(self):
        groups = load_feature_groups()
        assert groups["none"] == []
        assert "eyes" in groups and "head" in groups
        for name, chans in groups.items():
            assert all(0 <= c < N_FEATURES for c in chans)

    def test_suppress_replaces_with_train_mean(self):
        samples = make_samples(2)
        stats = StandardizationStats(mean=np.arange(N_FEATURES, dtype=float),
                                     std=np.ones(N_FEATURES))
        out = suppress_channels(samples, [0, 5], stats)
        assert np.all(out[0].x[:, 0] == 0.0) and np.all(out[0].x[:, 5] == 5.0)
        untouched = [c for c in range(N_FEATURES) if c not in (0, 5)]
        assert np.array_equal(out[0].x[:, untouched], samples[0].x[:, untouched])

    def test_suppress_idempotent(self):
        samples = make_samples(2)
        stats = StandardizationStats.identity()
        once = suppress_channels(samples, [1, 2, 3], stats)
        twice = suppress_channels(once, [1, 2, 3], stats)
        for a, b in zip(once, twice):
            assert np.array_equal(a.x, b.x)

    def test_unknown_channel_raises(self):
        with pytest.raises(UnknownChannel):
            suppress_channels(make_samples(1), [N_FEATURES],
                              StandardizationStats.identity())

    def test_study_none_group_exactly_zero(self):
        from facesync.features import DatasetSplit
        from facesync.nn import ModelConfig
        from facesync.training import TrainConfig, train
        samples = make_samples(24, sids=("s0", "s1", "s2"))
        split = DatasetSplit(train=samples, val=[], test=[])
        art = train(split, ModelConfig(seed=0), TrainConfig(epochs=2, seed=0))
        rep = suppression_study(art, samples,
                                groups={"none": [], "brows": [1, 2, 3, 4]})
        by_name = {g.group: g for g in rep.groups}
        none = by_name["none"]
        assert none.mean_pct_dmae == 0.0
        assert all(v == 0.0 for v in none.per_subject_pct_dmae.values())
        assert none.ttest.p == 1.0
        assert set(by_name["brows"].per_subject_pct_dmae) == {"s0", "s1", "s2"}
