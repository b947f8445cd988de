"""Anti-aliased resampling to a uniform low rate, and sliding windows.

The filter is a zero-phase symmetric FIR (Hamming-windowed sinc, unit DC
gain) applied on a uniform grid at the input's nominal rate; the filtered
signal is then sampled on the output grid. Zero phase matters: ISC compares
subjects sample-by-sample, so any phase lag would decorrelate them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import signal as sps
from scipy.ndimage import convolve1d

from .errors import BadCutoff, TooShort

DEFAULT_OUT_RATE = 4.0
DEFAULT_CUTOFF = 2.0


@dataclass
class UniformSeries:
    rate: float
    t0: float
    values: np.ndarray  # (n, channels)
    valid: np.ndarray   # (n,)
    channel_names: list = field(default_factory=list)

    def __len__(self):
        return len(self.values)

    @property
    def times(self):
        return self.t0 + np.arange(len(self.values)) / self.rate

    @property
    def duration_s(self):
        return len(self.values) / self.rate


@dataclass(frozen=True)
class WindowSpec:
    length_s: float = 10.0
    step_s: float = 1.0

    def __post_init__(self):
        if self.length_s <= 0 or self.step_s <= 0:
            raise ValueError("window length and step must be > 0")

    def sample_counts(self, rate):
        len_f = self.length_s * rate
        step_f = self.step_s * rate
        len_n, step_n = round(len_f), round(step_f)
        if abs(len_f - len_n) > 1e-9 or abs(step_f - step_n) > 1e-9:
            raise ValueError(
                f"window length/step ({self.length_s}s/{self.step_s}s) must be "
                f"integer sample counts at {rate} Hz")
        return len_n, max(step_n, 1)


@dataclass
class Windows:
    """Sliding-window view of a UniformSeries.

    ``blocks[k]`` covers samples [k*step_n, k*step_n + len_n); ``t_end[k]``
    is the window END time, so each value summarizes the preceding
    ``length_s`` seconds.
    """

    blocks: np.ndarray  # (k, len_n, channels)
    t_end: np.ndarray   # (k,)
    valid: np.ndarray   # (k,)
    spec: WindowSpec
    rate: float

    def __len__(self):
        return len(self.blocks)


def design_lowpass(in_rate, cutoff):
    """Symmetric FIR low-pass with exactly unit DC gain."""
    if cutoff <= 0:
        raise BadCutoff(f"cutoff must be > 0, got {cutoff}")
    if cutoff >= in_rate / 2:
        raise BadCutoff(f"cutoff {cutoff} Hz exceeds input Nyquist {in_rate / 2} Hz")
    numtaps = 2 * int(np.ceil(2.0 * in_rate / cutoff)) + 1
    taps = sps.firwin(numtaps, cutoff, fs=in_rate, window="hamming")
    return taps / taps.sum()


def lowpass_resample(times, values, out_rate, cutoff, observed=None,
                     in_rate=None, channel_names=None):
    """Filter irregular samples and resample onto ``t0 + k/out_rate``.

    ``times`` (n,), ``values`` (n, ch) or (n,). ``observed`` marks samples
    that were actually measured (vs interpolated); an output sample is valid
    only when at least half of its filter support is observed.
    """
    times = np.asarray(times, dtype=np.float64)
    values = np.atleast_2d(np.asarray(values, dtype=np.float64).T).T
    if values.ndim != 2 or len(values) != len(times):
        raise ValueError("values must be (n_samples, n_channels)")
    if observed is None:
        observed = np.ones(len(times), dtype=bool)
    if cutoff > out_rate / 2:
        raise BadCutoff(f"cutoff {cutoff} Hz exceeds output Nyquist {out_rate / 2} Hz")
    duration = times[-1] - times[0] if len(times) else 0.0
    if len(times) < 2 or duration < 1.0 / out_rate:
        raise TooShort(f"need at least {1.0 / out_rate:.3f}s of input, got {duration:.3f}s")
    if in_rate is None:
        in_rate = round(1.0 / float(np.median(np.diff(times))), 3)

    # uniform intermediate grid at the input's nominal rate
    n_uni = int(np.floor(duration * in_rate)) + 1
    t_uni = times[0] + np.arange(n_uni) / in_rate
    uni = np.empty((n_uni, values.shape[1]))
    for c in range(values.shape[1]):
        uni[:, c] = np.interp(t_uni, times, values[:, c])

    # a uniform sample counts as observed if a measured input sample lies
    # within 3/4 of the nominal interval
    obs_times = times[np.asarray(observed, dtype=bool)]
    if len(obs_times):
        idx = np.searchsorted(obs_times, t_uni)
        left = obs_times[np.clip(idx - 1, 0, len(obs_times) - 1)]
        right = obs_times[np.clip(idx, 0, len(obs_times) - 1)]
        dist = np.minimum(np.abs(t_uni - left), np.abs(t_uni - right))
        uni_obs = dist <= 0.75 / in_rate
    else:
        uni_obs = np.zeros(n_uni, dtype=bool)

    taps = design_lowpass(in_rate, cutoff)
    filtered = convolve1d(uni, taps, axis=0, mode="reflect")
    support = convolve1d(uni_obs.astype(np.float64),
                         np.full(len(taps), 1.0 / len(taps)), mode="reflect")

    t0 = float(times[0])
    n_out = int(np.floor(duration * out_rate)) + 1
    t_out = t0 + np.arange(n_out) / out_rate
    out = np.empty((n_out, values.shape[1]))
    for c in range(values.shape[1]):
        out[:, c] = np.interp(t_out, t_uni, filtered[:, c])
    valid = np.interp(t_out, t_uni, support) >= 0.5
    return UniformSeries(rate=float(out_rate), t0=t0, values=out, valid=valid,
                         channel_names=list(channel_names or []))


def sliding_windows(series, spec=WindowSpec()):
    """Cut ``series`` into overlapping windows (integer sample arithmetic)."""
    len_n, step_n = spec.sample_counts(series.rate)
    n = len(series)
    if n < len_n:
        raise TooShort(
            f"series of {n / series.rate:.3f}s shorter than window {spec.length_s}s")
    count = (n - len_n) // step_n + 1
    starts = np.arange(count) * step_n
    sv, ss = series.values, series.values.strides
    blocks = np.lib.stride_tricks.as_strided(
        sv, shape=(count, len_n, sv.shape[1]),
        strides=(ss[0] * step_n, ss[0], ss[1]), writeable=False)
    valid = np.array([series.valid[s:s + len_n].all() for s in starts])
    t_end = series.t0 + (starts + len_n) / series.rate
    return Windows(blocks=blocks, t_end=t_end, valid=valid, spec=spec,
                   rate=series.rate)
