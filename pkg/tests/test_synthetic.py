import numpy as np
import pytest

from facesync.canonical import align_stream, iris_xy
from facesync.errors import BadConfig
from facesync.features import blendshape_names
from facesync.isc import Cohort, time_resolved_isc
from facesync.resample import WindowSpec, lowpass_resample
from facesync.synthetic import SynthConfig, generate_cohort, schedule_weight


def small_cfg(**kw):
    base = dict(n_subjects=3, duration_s=60.0, frame_rate=20.0, seed=11)
    base.update(kw)
    return SynthConfig(**base)


def isc_traces(streams, model):
    aligned = [align_stream(s, model) for s in streams]
    series = []
    for a in aligned:
        v, names = iris_xy(a, model)
        series.append(lowpass_resample(a.t, v, 4.0, 2.0, observed=a.valid,
                                       in_rate=a.nominal_rate,
                                       channel_names=names))
    cohort = Cohort(video_id=streams[0].video_id,
                    subject_ids=[a.subject_id for a in aligned], series=series)
    return time_resolved_isc(cohort, WindowSpec())


def mean_isc(streams, model):
    traces = isc_traces(streams, model)
    vals = np.concatenate([tr.values[tr.valid] for tr in traces])
    return float(vals.mean())


class TestConfig:
    def test_too_few_subjects(self):
        with pytest.raises(BadConfig):
            SynthConfig(n_subjects=2)

    def test_too_short(self):
        with pytest.raises(BadConfig):
            SynthConfig(duration_s=10.0)

    def test_unknown_schedule(self):
        with pytest.raises(BadConfig):
            SynthConfig(schedule="bored")


class TestDeterminism:
    def test_same_seed_byte_identical(self, model):
        s1, sched1 = generate_cohort(small_cfg(), model)
        s2, sched2 = generate_cohort(small_cfg(), model)
        assert sched1 == sched2
        for a, b in zip(s1, s2):
            assert a.landmarks.tobytes() == b.landmarks.tobytes()
            assert a.blendshapes.tobytes() == b.blendshapes.tobytes()
            assert a.t.tobytes() == b.t.tobytes()

    def test_different_seed_differs(self, model):
        s1, _ = generate_cohort(small_cfg(seed=1), model)
        s2, _ = generate_cohort(small_cfg(seed=2), model)
        assert s1[0].landmarks.tobytes() != s2[0].landmarks.tobytes()


class TestStreams:
    def test_stream_contract(self, model):
        streams, schedules = generate_cohort(small_cfg(), model)
        assert [s.subject_id for s in streams] == ["s00", "s01", "s02"]
        for s in streams:
            assert s.landmarks.shape == (1200, 478, 3)
            assert s.blendshapes.shape == (1200, 52)
            assert s.valid.all()
            assert (s.blendshapes >= 0).all() and (s.blendshapes <= 1).all()
            # faces stay roughly centred in the normalized frame
            assert 0.2 < np.median(s.landmarks[:, :, 0]) < 0.8
        assert set(schedules) == {"s00", "s01", "s02"}

    def test_schedules_tile_duration(self, model):
        _, schedules = generate_cohort(small_cfg(schedule="mixed"), model)
        for segs in schedules.values():
            assert segs[0][0] == 0.0
            assert segs[-1][1] == pytest.approx(60.0)
            states = [st for _, _, st in segs]
            assert all(a != b for a, b in zip(states, states[1:]))
            for (_, e0, _), (s1, _, _) in zip(segs, segs[1:]):
                assert e0 == pytest.approx(s1)


class TestScheduleWeight:
    def test_plateaus(self):
        t = np.arange(0, 60, 0.05)
        segs = [(0.0, 30.0, "attentive"), (30.0, 60.0, "distracted")]
        w = schedule_weight(segs, t)
        assert np.allclose(w[(t > 2) & (t < 28)], 1.0)
        assert np.allclose(w[(t > 32) & (t < 58)], 0.0)
        ramp = w[(t > 29) & (t < 31)]
        assert ((ramp > 0.01) & (ramp < 0.99)).any()

    def test_range(self):
        t = np.arange(0, 60, 0.05)
        segs = [(0.0, 20.0, "distracted"), (20.0, 45.0, "attentive"),
                (45.0, 60.0, "distracted")]
        w = schedule_weight(segs, t)
        assert (w >= 0).all() and (w <= 1).all()


class TestPlantedIscStructure:
    def test_attentive_cohort_high_isc(self, model):
        streams, _ = generate_cohort(small_cfg(schedule="attentive"), model)
        assert mean_isc(streams, model) > 0.8

    def test_distracted_cohort_low_isc(self, model):
        vals = []
        for seed in range(5):
            streams, _ = generate_cohort(
                small_cfg(schedule="distracted", seed=seed), model)
            vals.append(mean_isc(streams, model))
        assert np.mean(vals) < 0.1

    def test_zero_coupling_kills_isc(self, model):
        streams, _ = generate_cohort(
            small_cfg(schedule="attentive", coupling=0.0), model)
        assert mean_isc(streams, model) < 0.1

    def test_mixed_schedule_recovered(self, model):
        cfg = small_cfg(schedule="mixed", duration_s=120.0, seed=5)
        streams, schedules = generate_cohort(cfg, model)
        traces = isc_traces(streams, model)
        for tr in traces:
            w = schedule_weight(np.array(schedules[tr.subject_id], dtype=object),
                                tr.times - 5.0)  # window centres
            mask = tr.valid & ((w > 0.9) | (w < 0.1))
            r = np.corrcoef(tr.values[mask], w[mask])[0, 1]
            assert r > 0.5


class TestInformativeGroups:
    def test_eye_blendshapes_track_gaze(self, model):
        streams, _ = generate_cohort(small_cfg(schedule="attentive"), model)
        names = blendshape_names()
        i_out = names.index("eyeLookOutLeft")
        i_in = names.index("eyeLookInLeft")
        # the two channels mirror each other around the 0.3 baseline
        # (excursions past the [0, 1] clip break the symmetry occasionally)
        s = streams[0].blendshapes
        mirrored = np.abs(s[:, i_out] + s[:, i_in] - 0.6) < 1e-9
        assert mirrored.mean() > 0.95
        assert s[:, i_out].std() > 0.05

    def test_head_amplitude_rises_when_distracted(self, model):
        att, _ = generate_cohort(small_cfg(schedule="attentive", seed=3), model)
        dis, _ = generate_cohort(small_cfg(schedule="distracted", seed=3), model)

        def pose_motion(stream):
            a = align_stream(stream, model)
            return np.abs(np.diff(a.poses[:, :3, :], axis=0)).mean()

        assert pose_motion(dis[0]) > 3 * pose_motion(att[0])

    def test_uninformative_groups_flat(self, model):
        """Without 'mouth' in signal_groups its channels ignore the schedule."""
        cfg = small_cfg(schedule="mixed", seed=9, signal_groups=("eyes",))
        streams, schedules = generate_cohort(cfg, model)
        names = blendshape_names()
        s = streams[0]
        w = schedule_weight(schedules["s00"], s.t)
        jaw = s.blendshapes[:, names.index("jawOpen")]
        assert abs(np.corrcoef(jaw, w)[0, 1]) < 0.35  # no planted dependence

    def test_mouth_group_modulated_when_informative(self, model):
        cfg = small_cfg(schedule="mixed", seed=9, signal_groups=("eyes", "mouth"))
        streams, schedules = generate_cohort(cfg, model)
        names = blendshape_names()
        s = streams[0]
        w = schedule_weight(schedules["s00"], s.t)
        jaw = s.blendshapes[:, names.index("jawOpen")]
        assert np.corrcoef(jaw, 1 - w)[0, 1] > 0.8
