import numpy as np
import pytest

from facesync.errors import BadCutoff, TooShort
from facesync.resample import (
    UniformSeries,
    WindowSpec,
    design_lowpass,
    lowpass_resample,
    sliding_windows,
)

IN_RATE = 30.0
OUT_RATE = 4.0
CUTOFF = 2.0


def sine(freq, duration=60.0, rate=IN_RATE):
    t = np.arange(int(duration * rate)) / rate
    return t, np.sin(2 * np.pi * freq * t)


def passband_amplitude(freq):
    t, x = sine(freq)
    out = lowpass_resample(t, x, OUT_RATE, CUTOFF, in_rate=IN_RATE)
    # measure amplitude away from the edges
    core = out.values[20:-20, 0]
    return np.abs(core).max()


class TestFilterDesign:
    def test_unit_dc_gain(self):
        taps = design_lowpass(IN_RATE, CUTOFF)
        assert taps.sum() == pytest.approx(1.0, abs=1e-15)

    def test_symmetric(self):
        taps = design_lowpass(IN_RATE, CUTOFF)
        assert np.allclose(taps, taps[::-1])

    def test_bad_cutoff(self):
        with pytest.raises(BadCutoff):
            design_lowpass(IN_RATE, 0.0)
        with pytest.raises(BadCutoff):
            design_lowpass(IN_RATE, 16.0)


class TestResponse:
    def test_passband_01hz_within_2pct(self):
        assert passband_amplitude(0.1) == pytest.approx(1.0, rel=0.02)

    def test_stopband_10hz_attenuated_20db(self):
        assert passband_amplitude(10.0) < 10 ** (-20 / 20)

    def test_dc_exact(self):
        t = np.arange(int(60 * IN_RATE)) / IN_RATE
        x = np.full_like(t, 0.73)
        out = lowpass_resample(t, x, OUT_RATE, CUTOFF, in_rate=IN_RATE)
        assert np.abs(out.values - 0.73).max() < 1e-12

    def test_zero_phase(self):
        # a slow sine keeps its phase: peak position unchanged
        t, x = sine(0.1, duration=40.0)
        out = lowpass_resample(t, x, OUT_RATE, CUTOFF, in_rate=IN_RATE)
        tt = out.times
        core = slice(20, -20)
        k = np.argmax(out.values[core, 0])
        t_peak = tt[core][k]
        assert abs(((t_peak - 2.5) % 10.0 + 5.0) % 10.0 - 5.0) < 0.3


class TestResampleMechanics:
    def test_output_grid(self):
        t = np.arange(300) / IN_RATE
        out = lowpass_resample(t, np.zeros_like(t), OUT_RATE, CUTOFF, in_rate=IN_RATE)
        assert out.rate == OUT_RATE
        assert out.t0 == 0.0
        assert np.allclose(np.diff(out.times), 1 / OUT_RATE)

    def test_multichannel_shapes(self):
        t = np.arange(300) / IN_RATE
        vals = np.random.default_rng(0).normal(size=(300, 3))
        out = lowpass_resample(t, vals, OUT_RATE, CUTOFF, in_rate=IN_RATE,
                               channel_names=["a", "b", "c"])
        assert out.values.shape[1] == 3
        assert out.channel_names == ["a", "b", "c"]

    def test_too_short_raises(self):
        with pytest.raises(TooShort):
            lowpass_resample([0.0, 0.01], [0.0, 0.0], OUT_RATE, CUTOFF, in_rate=IN_RATE)

    def test_cutoff_above_output_nyquist_raises(self):
        t = np.arange(300) / IN_RATE
        with pytest.raises(BadCutoff):
            lowpass_resample(t, np.zeros_like(t), OUT_RATE, 3.0, in_rate=IN_RATE)

    def test_unobserved_region_invalid(self):
        t = np.arange(900) / IN_RATE
        observed = np.ones(900, dtype=bool)
        observed[300:600] = False  # 10 s of interpolated samples
        out = lowpass_resample(t, np.zeros_like(t), OUT_RATE, CUTOFF,
                               observed=observed, in_rate=IN_RATE)
        mid = (out.times > 12) & (out.times < 18)
        assert not out.valid[mid].any()
        edges = (out.times < 8) | (out.times > 22)
        assert out.valid[edges].all()


class TestSlidingWindows:
    def make_series(self, n, rate=OUT_RATE, ch=2):
        return UniformSeries(rate=rate, t0=0.0,
                             values=np.arange(n * ch, dtype=float).reshape(n, ch),
                             valid=np.ones(n, dtype=bool))

    def test_window_count_60s(self):
        # 60 s at 4 Hz -> 241 samples -> 51 windows of 10 s stepped by 1 s
        s = self.make_series(241)
        w = sliding_windows(s, WindowSpec())
        assert len(w) == 51
        assert w.t_end[0] == pytest.approx(10.0)
        assert w.t_end[-1] == pytest.approx(60.0)

    def test_block_contents(self):
        s = self.make_series(20)
        w = sliding_windows(s, WindowSpec(length_s=2.0, step_s=1.0))
        assert w.blocks.shape == (4, 8, 2)
        assert np.array_equal(w.blocks[1], s.values[4:12])

    def test_invalid_sample_invalidates_window(self):
        s = self.make_series(241)
        s.valid[100] = False
        w = sliding_windows(s, WindowSpec())
        hit = (np.arange(51) * 4 <= 100) & (100 < np.arange(51) * 4 + 40)
        assert np.array_equal(~w.valid, hit)

    def test_too_short_raises(self):
        with pytest.raises(TooShort):
            sliding_windows(self.make_series(39), WindowSpec())

    def test_non_integer_window_raises(self):
        with pytest.raises(ValueError):
            sliding_windows(self.make_series(100, rate=3.3), WindowSpec())
