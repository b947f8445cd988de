"""Deterministic synthetic multi-subject cohorts with known attention structure.

Subjects share a smooth latent gaze signal while "attentive" and move their
irises with independent noise of equal variance while "distracted", so
windowed iris ISC recovers the planted schedule. Feature groups listed in
``signal_groups`` carry information the regressor can exploit: eye
blendshapes follow the subject's own iris dynamics, and head motion
amplitude rises when distracted. Everything is a pure function of the seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .canonical import load_canonical_model
from .errors import BadConfig
from .features import blendshape_names
from .landmark_io import FrameStream

FRAME_SCALE = 0.02         # canonical cm -> normalized frame coordinates
FRAME_CENTER = (0.5, 0.5, 0.0)


@dataclass
class SynthConfig:
    n_subjects: int = 6
    duration_s: float = 180.0
    frame_rate: float = 30.0
    video_id: str = "vid0"
    schedule: str = "mixed"          # mixed | attentive | distracted
    segment_s: tuple = (20.0, 40.0)  # attention segment length range
    coupling: float = 1.0
    noise_sd: float = 0.1
    n_sinusoids: int = 8
    latent_band: tuple = (0.05, 1.0)
    gaze_amp_cm: float = 1.0
    signal_groups: tuple = ("eyes", "head")
    landmark_noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_subjects < 3:
            raise BadConfig(f"need >= 3 subjects, got {self.n_subjects}")
        if self.duration_s < 30:
            raise BadConfig(f"need >= 30s duration, got {self.duration_s}")
        if self.schedule not in ("mixed", "attentive", "distracted"):
            raise BadConfig(f"unknown schedule {self.schedule!r}")


def _sinusoid_mix(rng, t, band, n_components):
    """Unit-variance sum of random sinusoids within a frequency band."""
    freqs = rng.uniform(band[0], band[1], n_components)
    phases = rng.uniform(0, 2 * np.pi, n_components)
    amps = rng.uniform(0.5, 1.0, n_components)
    sig = np.zeros_like(t)
    for f, ph, a in zip(freqs, phases, amps):
        sig += a * np.sin(2 * np.pi * f * t + ph)
    return sig / max(sig.std(), 1e-12)


def _make_schedule(rng, cfg):
    """Alternating (start, end, state) segments; state is 'attentive' or
    'distracted'."""
    if cfg.schedule == "attentive":
        return [(0.0, cfg.duration_s, "attentive")]
    if cfg.schedule == "distracted":
        return [(0.0, cfg.duration_s, "distracted")]
    segs = []
    state = "attentive" if rng.random() < 0.5 else "distracted"
    t = 0.0
    while t < cfg.duration_s:
        dur = rng.uniform(*cfg.segment_s)
        segs.append((t, min(t + dur, cfg.duration_s), state))
        t += dur
        state = "distracted" if state == "attentive" else "attentive"
    return segs


def schedule_weight(segments, times, ramp_s=1.0):
    """Attention weight in [0, 1] at the given times (1 = attentive), with
    linear ramps at segment boundaries."""
    w = np.zeros_like(times)
    for t0, t1, state in segments:
        if state == "attentive":
            w[(times >= t0) & (times < t1)] = 1.0
    if ramp_s > 0 and len(times) > 1:
        dt = float(times[1] - times[0])
        k = max(int(round(ramp_s / dt)), 1)
        kernel = np.full(k, 1.0 / k)
        w = np.convolve(np.pad(w, (k, k), mode="edge"), kernel, mode="same")[k:-k]
    return np.clip(w, 0.0, 1.0)


def _rotation(yaw, pitch, roll):
    cy, sy = np.cos(yaw), np.sin(yaw)
    cp, sp = np.cos(pitch), np.sin(pitch)
    cr, sr = np.cos(roll), np.sin(roll)
    # (n,3,3) composed Rz(roll) @ Rx(pitch) @ Ry(yaw)
    Ry = np.stack([np.stack([cy, np.zeros_like(cy), sy], -1),
                   np.stack([np.zeros_like(cy), np.ones_like(cy), np.zeros_like(cy)], -1),
                   np.stack([-sy, np.zeros_like(cy), cy], -1)], -2)
    Rx = np.stack([np.stack([np.ones_like(cp), np.zeros_like(cp), np.zeros_like(cp)], -1),
                   np.stack([np.zeros_like(cp), cp, -sp], -1),
                   np.stack([np.zeros_like(cp), sp, cp], -1)], -2)
    Rz = np.stack([np.stack([cr, -sr, np.zeros_like(cr)], -1),
                   np.stack([sr, cr, np.zeros_like(cr)], -1),
                   np.stack([np.zeros_like(cr), np.zeros_like(cr), np.ones_like(cr)], -1)], -2)
    return Rz @ Rx @ Ry


def generate_cohort(cfg, model=None):
    """Build one FrameStream per subject plus the ground-truth schedules.

    Returns (streams, schedules) with ``schedules[subject_id]`` the
    (start, end, state) segments planted for that subject.
    """
    if model is None:
        model = load_canonical_model()
    names = blendshape_names()
    name_idx = {n: i for i, n in enumerate(names)}
    n = int(round(cfg.duration_s * cfg.frame_rate))
    t = np.arange(n) / cfg.frame_rate

    root = np.random.SeedSequence(cfg.seed)
    latent_rng = np.random.default_rng(root.spawn(1)[0])
    latent = np.stack([
        _sinusoid_mix(latent_rng, t, cfg.latent_band, cfg.n_sinusoids),
        _sinusoid_mix(latent_rng, t, cfg.latent_band, cfg.n_sinusoids),
    ], axis=1)  # (n, 2) shared gaze trajectory

    subject_seeds = root.spawn(cfg.n_subjects + 1)[1:]
    distract_sd = np.sqrt(cfg.coupling ** 2 + cfg.noise_sd ** 2)

    streams = []
    schedules = {}
    C = model.points
    iris_ids = model.iris_ids
    for si in range(cfg.n_subjects):
        rng = np.random.default_rng(subject_seeds[si])
        sid = f"s{si:02d}"
        segments = _make_schedule(rng, cfg)
        schedules[sid] = segments
        w = schedule_weight(segments, t)

        # iris trajectory: shared latent while attentive, independent noise
        # of equal variance while distracted
        eps = rng.normal(0.0, cfg.noise_sd, (n, 2))
        eta = rng.normal(0.0, distract_sd, (n, 2))
        gaze = cfg.gaze_amp_cm * (w[:, None] * (cfg.coupling * latent + eps)
                                  + (1 - w[:, None]) * eta)

        # head pose: slow rigid motion, larger while distracted when the
        # head group is informative
        base_amp = 0.015
        dis_amp = 0.10 if "head" in cfg.signal_groups else base_amp
        amp = base_amp * w + dis_amp * (1 - w)
        angles = np.stack([
            _sinusoid_mix(rng, t, (0.02, 0.3), 5),
            _sinusoid_mix(rng, t, (0.02, 0.3), 5),
            _sinusoid_mix(rng, t, (0.02, 0.3), 5),
        ], axis=1) * amp[:, None]
        trans_cm = np.stack([
            _sinusoid_mix(rng, t, (0.02, 0.2), 4),
            _sinusoid_mix(rng, t, (0.02, 0.2), 4),
            _sinusoid_mix(rng, t, (0.02, 0.2), 4),
        ], axis=1) * (amp[:, None] * 8.0)

        pts = np.broadcast_to(C, (n, *C.shape)).copy()
        pts[:, iris_ids, 0] += gaze[:, 0:1]
        pts[:, iris_ids, 1] += gaze[:, 1:2]
        Q = _rotation(angles[:, 0], angles[:, 1], angles[:, 2])
        X = FRAME_SCALE * np.einsum("nlk,nmk->nlm", pts, Q)
        X += FRAME_SCALE * trans_cm[:, None, :]
        X += np.asarray(FRAME_CENTER)
        if cfg.landmark_noise > 0:
            X += rng.normal(0.0, cfg.landmark_noise, X.shape)

        bs = _blendshapes(rng, cfg, name_idx, t, w, gaze)
        streams.append(FrameStream(
            subject_id=sid, video_id=cfg.video_id,
            nominal_rate=cfg.frame_rate, t=t.copy(), landmarks=X,
            blendshapes=bs, valid=np.ones(n, dtype=bool)))
    return streams, schedules


def _blendshapes(rng, cfg, name_idx, t, w, gaze):
    """52 blendshape channels: small smooth baselines everywhere, with
    informative groups modulated by gaze dynamics or attention state."""
    n = len(t)
    bs = np.empty((n, 52))
    for c in range(52):
        base = rng.uniform(0.1, 0.35)
        bs[:, c] = base + 0.02 * _sinusoid_mix(rng, t, (0.05, 1.5), 4)

    if "eyes" in cfg.signal_groups:
        gx = gaze[:, 0] / cfg.gaze_amp_cm
        gy = gaze[:, 1] / cfg.gaze_amp_cm
        gain = 0.12
        for side in ("Left", "Right"):
            bs[:, name_idx[f"eyeLookOut{side}"]] = 0.3 + gain * gx
            bs[:, name_idx[f"eyeLookIn{side}"]] = 0.3 - gain * gx
            bs[:, name_idx[f"eyeLookUp{side}"]] = 0.3 + gain * gy
            bs[:, name_idx[f"eyeLookDown{side}"]] = 0.3 - gain * gy

    modulated = {
        "brows": ("browInnerUp", "browDownLeft", "browDownRight"),
        "cheeks": ("cheekSquintLeft", "cheekSquintRight"),
        "mouth": ("mouthPressLeft", "mouthPressRight", "jawOpen"),
        "nose": ("noseSneerLeft", "noseSneerRight"),
    }
    for group, chans in modulated.items():
        if group in cfg.signal_groups:
            for name in chans:
                bs[:, name_idx[name]] += 0.2 * (1 - w)

    return np.clip(bs, 0.0, 1.0)
