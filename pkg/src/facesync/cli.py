"""Batch command-line front end wiring all modules into reproducible runs.

Every subcommand resolves its settings from (in increasing precedence)
built-in defaults, an optional YAML config file, and command-line flags.
Each run writes a ``run.json`` next to its outputs capturing the resolved
config, package versions, seeds, and input digests. Failures exit non-zero
with one machine-readable ``ERROR <module-qualified code>: message`` line.
"""

from __future__ import annotations

import copy
import csv
import functools
import hashlib
import json
import os
import sys

import click
import numpy as np
import yaml

from . import __version__
from .canonical import align_stream, iris_xy, load_canonical_model
from .errors import FaceSyncError, TooFewSubjects
from .evaluation import (
    compare_to_baseline,
    load_feature_groups,
    subject_metrics,
    suppression_study,
)
from .features import (
    assemble_features,
    build_dataset,
    load_dataset,
    save_dataset,
    split_by_subject_counts,
    split_by_time,
    standardize,
)
from .isc import Cohort, time_resolved_isc
from .landmark_io import (
    fill_gaps,
    parse_frame_stream,
    serialize_frame_stream,
    stream_path_ids,
    validate_stream,
)
from .nn import ModelConfig
from .resample import WindowSpec, lowpass_resample
from .synthetic import SynthConfig, generate_cohort
from .training import (
    TrainConfig,
    baseline_mean,
    load_artifact,
    predict,
    save_artifact,
    train,
)

CONFIG_VERSION = 1

DEFAULT_CONFIG = {
    "version": CONFIG_VERSION,
    "window": {"length_s": 10.0, "step_s": 1.0},
    "resample": {"out_rate": 4.0, "cutoff": 2.0, "max_gap_s": 1.0},
    "split": {"mode": "by_subject_counts", "n_val": 2, "n_test": 2,
              "test_fraction": 0.2, "purge_s": 10.0, "seed": 0},
    "model": {"architecture": "hybrid", "seed": 0},
    "train": {"epochs": 150, "batch_size": 64, "learning_rate": 1e-3,
              "seed": 0, "threads": 1},
    "paths": {"canonical_model": None, "feature_groups": None},
}


# --- plumbing ----------------------------------------------------------------

def _fail(code, message):
    click.echo(f"ERROR {code}: {message}", err=True)
    sys.exit(1)


def handle_errors(fn):
    """Surface module errors as one machine-readable line + non-zero exit."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except FaceSyncError as e:
            _fail(e.code, e)
        except OSError as e:
            _fail("cli.io_error", e)

    return wrapper


def _deep_merge(base, override):
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = v
    return out


def resolve_config(config_path, overrides=None):
    """defaults <- YAML file <- CLI flags, command line wins."""
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if config_path:
        with open(config_path) as f:
            user = yaml.safe_load(f) or {}
        version = user.get("version")
        if version is not None and int(version) != CONFIG_VERSION:
            _fail("cli.bad_config_version",
                  f"config schema version {version}, expected {CONFIG_VERSION}")
        cfg = _deep_merge(cfg, user)
    if overrides:
        cfg = _deep_merge(cfg, {k: v for k, v in overrides.items() if v})
    return cfg


def _threads(opt):
    if opt is not None:
        return int(opt)
    return int(os.environ.get("ATTN_THREADS", "1"))


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_run_json(out_dir, command, config, inputs, seeds=None):
    """Reproducibility record: config, versions, seeds, input digests."""
    import scipy

    os.makedirs(out_dir, exist_ok=True)
    record = {
        "command": command,
        "config": config,
        "versions": {
            "facesync": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": ".".join(str(v) for v in sys.version_info[:3]),
        },
        "seeds": seeds or {},
        "input_digests": {p: _sha256(p) for p in sorted(inputs)},
    }
    with open(os.path.join(out_dir, "run.json"), "w") as f:
        json.dump(record, f, indent=1, sort_keys=True)
    return record


def _stream_files(input_dir):
    files = sorted(
        os.path.join(input_dir, f)
        for f in os.listdir(input_dir) if f.endswith(".jsonl"))
    if not files:
        _fail("cli.no_streams", f"no .jsonl stream files in {input_dir}")
    return files


def _load_streams(input_dir):
    streams = []
    for path in _stream_files(input_dir):
        subject_id, video_id = stream_path_ids(path)
        with open(path) as f:
            streams.append(parse_frame_stream(f, subject_id, video_id))
    return streams


def _align_all(streams, cfg):
    model = load_canonical_model(cfg["paths"]["canonical_model"])
    aligned = [
        align_stream(fill_gaps(s, max_gap_s=cfg["resample"]["max_gap_s"]), model)
        for s in streams
    ]
    return aligned, model


def _isc_traces(aligned, model, cfg):
    """Group aligned streams by video and run the ISC engine per cohort."""
    spec = WindowSpec(length_s=cfg["window"]["length_s"],
                      step_s=cfg["window"]["step_s"])
    by_video = {}
    for a in aligned:
        by_video.setdefault(a.video_id, []).append(a)
    traces = []
    for video_id, group in sorted(by_video.items()):
        if len(group) < 2:
            raise TooFewSubjects(
                f"video {video_id!r} has {len(group)} subject(s); ISC needs >= 2")
        series = []
        for a in group:
            values, names = iris_xy(a, model)
            series.append(lowpass_resample(
                a.t, values, out_rate=cfg["resample"]["out_rate"],
                cutoff=cfg["resample"]["cutoff"], observed=a.valid,
                in_rate=a.nominal_rate, channel_names=names))
        cohort = Cohort(video_id=video_id,
                        subject_ids=[a.subject_id for a in group],
                        series=series)
        traces.extend(time_resolved_isc(cohort, spec))
    return traces, spec


def _write_trace_csv(path, traces):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["subject_id", "t", "isc", "valid"])
        for tr in traces:
            for t, v, ok in zip(tr.times, tr.values, tr.valid):
                w.writerow([tr.subject_id, repr(float(t)),
                            repr(float(v)), int(ok)])


def _build_split(samples, cfg):
    split_cfg = cfg["split"]
    if split_cfg["mode"] == "by_subject_counts":
        return split_by_subject_counts(
            samples, n_val=split_cfg["n_val"], n_test=split_cfg["n_test"],
            seed=split_cfg["seed"])
    if split_cfg["mode"] == "by_time":
        return split_by_time(
            samples, test_fraction=split_cfg["test_fraction"],
            purge_s=split_cfg["purge_s"],
            length_s=cfg["window"]["length_s"])
    _fail("cli.bad_split_mode", f"unknown split mode {split_cfg['mode']!r}")


def _split_rows(dataset_dir, which):
    split, stats = load_dataset(dataset_dir)
    rows = getattr(split, which)
    if not rows:
        _fail("dataset.empty_split", f"split {which!r} of {dataset_dir} is empty")
    return split, stats, rows


def _write_predictions_csv(path, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["subject_id", "video_id", "t_end", "y_pred", "y_true"])
        for r in rows:
            w.writerow([r.subject_id, r.video_id, repr(r.t_end),
                        repr(r.y_pred), repr(r.y_true)])


# --- commands ----------------------------------------------------------------

@click.group()
@click.version_option(version=__version__, prog_name="facesync")
def main():
    """Attention estimation from webcam face dynamics."""


@main.command()
@click.argument("streams", nargs=-1, required=True,
                type=click.Path(exists=True, dir_okay=False))
@handle_errors
def validate(streams):
    """Parse stream files and print one JSON report line per file."""
    for path in streams:
        subject_id, video_id = stream_path_ids(path)
        with open(path) as f:
            stream = parse_frame_stream(f, subject_id, video_id)
        report = validate_stream(stream)
        click.echo(json.dumps({"file": path, "subject_id": subject_id,
                               "video_id": video_id, **report.as_dict()}))


@main.command()
@click.argument("stream", type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--out", required=True, type=click.Path(),
              help="Output .npz with canonical landmarks and poses.")
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--max-gap-s", type=float, default=None)
@handle_errors
def align(stream, out, config_path, max_gap_s):
    """Fit per-frame affine poses and emit canonical-space landmarks."""
    cfg = resolve_config(config_path)
    if max_gap_s is not None:
        cfg["resample"]["max_gap_s"] = max_gap_s
    subject_id, video_id = stream_path_ids(stream)
    with open(stream) as f:
        fs = parse_frame_stream(f, subject_id, video_id)
    model = load_canonical_model(cfg["paths"]["canonical_model"])
    aligned = align_stream(fill_gaps(fs, max_gap_s=cfg["resample"]["max_gap_s"]), model)
    np.savez(out, t=aligned.t, Y=aligned.Y, poses=aligned.poses,
             blendshapes=aligned.blendshapes, valid=aligned.valid,
             subject_id=subject_id, video_id=video_id)
    write_run_json(os.path.dirname(os.path.abspath(out)), "align", cfg, [stream])
    click.echo(f"aligned {len(aligned)} frames -> {out}")


@main.command()
@click.argument("input_dir", type=click.Path(exists=True, file_okay=False))
@click.option("-o", "--out", required=True, type=click.Path(),
              help="Output CSV (single video) or directory (one CSV per video).")
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--threads", type=int, default=None)
@handle_errors
def isc(input_dir, out, config_path, threads):
    """Compute per-subject time-resolved ISC traces (CSV: subject_id,t,isc,valid)."""
    from threadpoolctl import threadpool_limits

    cfg = resolve_config(config_path)
    files = _stream_files(input_dir)
    with threadpool_limits(limits=_threads(threads)):
        streams = _load_streams(input_dir)
        aligned, model = _align_all(streams, cfg)
        traces, _spec = _isc_traces(aligned, model, cfg)
    videos = sorted({tr.video_id for tr in traces})
    if out.endswith(".csv"):
        if len(videos) != 1:
            _fail("cli.ambiguous_output",
                  f"{len(videos)} videos found; pass a directory for --out")
        _write_trace_csv(out, traces)
        out_dir = os.path.dirname(os.path.abspath(out))
    else:
        os.makedirs(out, exist_ok=True)
        for vid in videos:
            _write_trace_csv(os.path.join(out, f"isc_{vid}.csv"),
                             [tr for tr in traces if tr.video_id == vid])
        out_dir = out
    write_run_json(out_dir, "isc", cfg, files)
    click.echo(f"wrote ISC traces for {len(videos)} video(s)")


@main.command("build-dataset")
@click.argument("input_dir", type=click.Path(exists=True, file_okay=False))
@click.option("-o", "--out", "out_dir", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--split-mode", type=click.Choice(["by_subject_counts", "by_time"]),
              default=None)
@click.option("--n-val", type=int, default=None)
@click.option("--n-test", type=int, default=None)
@click.option("--test-fraction", type=float, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--threads", type=int, default=None)
@handle_errors
def build_dataset_cmd(input_dir, out_dir, config_path, split_mode, n_val,
                      n_test, test_fraction, seed, threads):
    """Assemble 64-channel feature windows, join ISC targets, split and save."""
    from threadpoolctl import threadpool_limits

    cfg = resolve_config(config_path)
    for key, value in (("mode", split_mode), ("n_val", n_val),
                       ("n_test", n_test), ("test_fraction", test_fraction),
                       ("seed", seed)):
        if value is not None:
            cfg["split"][key] = value
    files = _stream_files(input_dir)
    with threadpool_limits(limits=_threads(threads)):
        streams = _load_streams(input_dir)
        aligned, model = _align_all(streams, cfg)
        traces, spec = _isc_traces(aligned, model, cfg)
        features = [assemble_features(a, out_rate=cfg["resample"]["out_rate"],
                                      cutoff=cfg["resample"]["cutoff"])
                    for a in aligned]
        samples, dropped = build_dataset(features, traces, spec)
        split = _build_split(samples, cfg)
        _, stats = standardize(split.train)
    save_dataset(split, stats, out_dir, window_spec=spec,
                 extra={"dropped": dropped})
    write_run_json(out_dir, "build-dataset", cfg, files,
                   seeds={"split": cfg["split"]["seed"]})
    click.echo(f"dataset: train={len(split.train)} val={len(split.val)} "
               f"test={len(split.test)} dropped={dropped} -> {out_dir}")


@main.command("train")
@click.argument("dataset_dir", type=click.Path(exists=True, file_okay=False))
@click.option("-o", "--out", required=True, type=click.Path(),
              help="Output model artifact (.fsyn).")
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--arch", type=click.Choice(["hybrid", "mlp"]), default=None)
@click.option("--epochs", type=int, default=None)
@click.option("--batch-size", type=int, default=None)
@click.option("--learning-rate", type=float, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--threads", type=int, default=None)
@click.option("--history", type=click.Path(), default=None,
              help="Optional CSV of per-epoch train/val losses.")
@handle_errors
def train_cmd(dataset_dir, out, config_path, arch, epochs, batch_size,
              learning_rate, seed, threads, history):
    """Train the regressor; the artifact keeps the best-validation epoch."""
    cfg = resolve_config(config_path)
    if arch is not None:
        cfg["model"]["architecture"] = arch
    for key, value in (("epochs", epochs), ("batch_size", batch_size),
                       ("learning_rate", learning_rate), ("seed", seed)):
        if value is not None:
            cfg["train"][key] = value
    cfg["train"]["threads"] = _threads(threads)
    if seed is not None:
        cfg["model"]["seed"] = seed

    split, stats, _ = _split_rows(dataset_dir, "train")
    mconfig = ModelConfig(architecture=cfg["model"]["architecture"],
                          seed=cfg["model"]["seed"])
    tconfig = TrainConfig(epochs=cfg["train"]["epochs"],
                          batch_size=cfg["train"]["batch_size"],
                          learning_rate=cfg["train"]["learning_rate"],
                          seed=cfg["train"]["seed"],
                          threads=cfg["train"]["threads"])
    artifact = train(split, mconfig, tconfig, stats=stats)
    save_artifact(artifact, out)
    if history:
        with open(history, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["epoch", "train_loss", "val_loss"])
            for i, (tl, vl) in enumerate(zip(artifact.meta["train_losses"],
                                             artifact.meta["val_losses"])):
                w.writerow([i, repr(tl), repr(vl)])
    write_run_json(os.path.dirname(os.path.abspath(out)), "train", cfg,
                   [os.path.join(dataset_dir, "manifest.json")],
                   seeds={"model": cfg["model"]["seed"],
                          "train": cfg["train"]["seed"]})
    click.echo(f"trained {mconfig.architecture} "
               f"(best epoch {artifact.meta['best_epoch']}, "
               f"val loss {min(artifact.meta['val_losses']):.6f}) -> {out}")


@main.command("predict")
@click.argument("model_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("dataset_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--split", "which", type=click.Choice(["train", "val", "test"]),
              default="test", show_default=True)
@click.option("-o", "--out", required=True, type=click.Path())
@click.option("--clamp01", is_flag=True, help="Clamp predictions into [0,1].")
@handle_errors
def predict_cmd(model_path, dataset_dir, which, out, clamp01):
    """Run inference on one dataset split and write predictions CSV."""
    artifact = load_artifact(model_path)
    _, _, rows = _split_rows(dataset_dir, which)
    predictions = predict(artifact, rows, clamp01=clamp01)
    _write_predictions_csv(out, predictions)
    write_run_json(os.path.dirname(os.path.abspath(out)), "predict",
                   {"split": which, "clamp01": clamp01}, [model_path])
    click.echo(f"wrote {len(predictions)} predictions -> {out}")


@main.command("evaluate")
@click.argument("model_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("dataset_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--split", "which", type=click.Choice(["train", "val", "test"]),
              default="test", show_default=True)
@click.option("-o", "--out", "out_dir", required=True, type=click.Path())
@click.option("--emit-plots", is_flag=True,
              help="Write per-figure CSVs shaped for external plotting.")
@handle_errors
def evaluate_cmd(model_path, dataset_dir, which, out_dir, emit_plots):
    """Per-subject MAE/R^2 vs the naive-mean baseline, with paired t-test."""
    artifact = load_artifact(model_path)
    split, _, rows = _split_rows(dataset_dir, which)
    model_rows = predict(artifact, rows)
    baseline = baseline_mean([s.y for s in split.train])
    report = compare_to_baseline(model_rows, baseline.predict(rows))
    metrics = subject_metrics(model_rows)

    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "evaluation.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["subject_id", "model_mae", "baseline_mae", "model_r2", "n_samples"])
        r2 = {m.subject_id: (m.r2, m.n_samples) for m in metrics}
        for sid, m_mae, b_mae in report.per_subject:
            w.writerow([sid, repr(m_mae), repr(b_mae),
                        repr(r2[sid][0]), r2[sid][1]])
    summary = {
        "split": which,
        "comparison": report.as_dict(),
        "mean_r2": float(np.nanmean([m.r2 for m in metrics])),
    }
    with open(os.path.join(out_dir, "summary.json"), "w") as f:
        json.dump(summary, f, indent=1, sort_keys=True)
    if emit_plots:
        with open(os.path.join(out_dir, "plot_mae_per_subject.csv"), "w",
                  newline="") as f:
            w = csv.writer(f)
            w.writerow(["subject_id", "model_mae", "baseline_mae"])
            for sid, m_mae, b_mae in report.per_subject:
                w.writerow([sid, repr(m_mae), repr(b_mae)])
    write_run_json(out_dir, "evaluate", {"split": which}, [model_path])
    click.echo(f"model MAE {report.model_mae_mean:.4f} vs baseline "
               f"{report.baseline_mae_mean:.4f} "
               f"({report.percent_change:+.1f}%, p={report.ttest.p:.4g})")


@main.command("suppress")
@click.argument("model_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("dataset_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--split", "which", type=click.Choice(["train", "val", "test"]),
              default="test", show_default=True)
@click.option("-o", "--out", "out_dir", required=True, type=click.Path())
@click.option("--groups", "groups_path", type=click.Path(exists=True),
              default=None, help="JSON feature-group map override.")
@click.option("--emit-plots", is_flag=True)
@handle_errors
def suppress_cmd(model_path, dataset_dir, which, out_dir, groups_path, emit_plots):
    """Feature-suppression study: %MAE change when muting channel groups."""
    artifact = load_artifact(model_path)
    _, _, rows = _split_rows(dataset_dir, which)
    groups = load_feature_groups(groups_path)
    report = suppression_study(artifact, rows, groups)

    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "suppression.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["group", "mean_pct_dmae", "t", "p", "df"])
        for g in report.groups:
            w.writerow([g.group, repr(g.mean_pct_dmae), repr(g.ttest.t),
                        repr(g.ttest.p), g.ttest.df])
    with open(os.path.join(out_dir, "summary.json"), "w") as f:
        json.dump({"split": which, "groups": report.as_dict()}, f,
                  indent=1, sort_keys=True)
    if emit_plots:
        with open(os.path.join(out_dir, "plot_suppression.csv"), "w",
                  newline="") as f:
            w = csv.writer(f)
            w.writerow(["group", "subject_id", "pct_dmae"])
            for g in report.groups:
                for sid, pct in sorted(g.per_subject_pct_dmae.items()):
                    w.writerow([g.group, sid, repr(pct)])
    write_run_json(out_dir, "suppress", {"split": which}, [model_path])
    for g in report.groups:
        click.echo(f"{g.group:8s} {g.mean_pct_dmae:+8.2f}% p={g.ttest.p:.4g}")


@main.command("synth")
@click.option("-o", "--out", "out_dir", required=True, type=click.Path())
@click.option("--subjects", type=int, default=6, show_default=True)
@click.option("--duration", type=float, default=180.0, show_default=True)
@click.option("--frame-rate", type=float, default=30.0, show_default=True)
@click.option("--videos", type=int, default=1, show_default=True)
@click.option("--schedule", type=click.Choice(["mixed", "attentive", "distracted"]),
              default="mixed", show_default=True)
@click.option("--signal-groups", default="eyes,head", show_default=True,
              help="Comma-separated feature groups carrying target signal.")
@click.option("--seed", type=int, default=0, show_default=True)
@handle_errors
def synth_cmd(out_dir, subjects, duration, frame_rate, videos, schedule,
              signal_groups, seed):
    """Generate a deterministic synthetic cohort as frame-stream files."""
    os.makedirs(out_dir, exist_ok=True)
    groups = tuple(g for g in signal_groups.split(",") if g)
    all_schedules = {}
    written = []
    for vi in range(videos):
        cfg = SynthConfig(n_subjects=subjects, duration_s=duration,
                          frame_rate=frame_rate, video_id=f"vid{vi}",
                          schedule=schedule, signal_groups=groups,
                          seed=seed + vi)
        streams, schedules = generate_cohort(cfg)
        all_schedules[cfg.video_id] = schedules
        for stream in streams:
            path = os.path.join(out_dir,
                                f"{stream.subject_id}__{stream.video_id}.jsonl")
            with open(path, "w") as f:
                serialize_frame_stream(stream, f)
            written.append(path)
    with open(os.path.join(out_dir, "schedules.json"), "w") as f:
        json.dump(all_schedules, f, indent=1, sort_keys=True)
    run_cfg = {"subjects": subjects, "duration": duration,
               "frame_rate": frame_rate, "videos": videos,
               "schedule": schedule, "signal_groups": list(groups)}
    write_run_json(out_dir, "synth", run_cfg, [], seeds={"synth": seed})
    click.echo(f"wrote {len(written)} streams ({videos} video(s)) -> {out_dir}")


@main.command("pipeline")
@click.argument("input_dir", type=click.Path(exists=True, file_okay=False))
@click.option("-o", "--out", "out_dir", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--arch", type=click.Choice(["hybrid", "mlp"]), default=None)
@click.option("--epochs", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--threads", type=int, default=None)
@click.option("--emit-plots", is_flag=True)
@handle_errors
def pipeline_cmd(input_dir, out_dir, config_path, arch, epochs, seed, threads,
                 emit_plots):
    """End to end: streams -> ISC -> dataset -> train -> evaluate -> suppress."""
    from threadpoolctl import threadpool_limits

    cfg = resolve_config(config_path)
    if arch is not None:
        cfg["model"]["architecture"] = arch
    if epochs is not None:
        cfg["train"]["epochs"] = epochs
    if seed is not None:
        cfg["split"]["seed"] = cfg["model"]["seed"] = cfg["train"]["seed"] = seed
    cfg["train"]["threads"] = _threads(threads)

    files = _stream_files(input_dir)
    os.makedirs(out_dir, exist_ok=True)
    with threadpool_limits(limits=cfg["train"]["threads"]):
        streams = _load_streams(input_dir)
        aligned, model = _align_all(streams, cfg)
        traces, spec = _isc_traces(aligned, model, cfg)
        for vid in sorted({tr.video_id for tr in traces}):
            _write_trace_csv(os.path.join(out_dir, f"isc_{vid}.csv"),
                             [tr for tr in traces if tr.video_id == vid])
        features = [assemble_features(a, out_rate=cfg["resample"]["out_rate"],
                                      cutoff=cfg["resample"]["cutoff"])
                    for a in aligned]
        samples, dropped = build_dataset(features, traces, spec)
        split = _build_split(samples, cfg)
        _, stats = standardize(split.train)
        dataset_dir = os.path.join(out_dir, "dataset")
        save_dataset(split, stats, dataset_dir, window_spec=spec,
                     extra={"dropped": dropped})

        mconfig = ModelConfig(architecture=cfg["model"]["architecture"],
                              seed=cfg["model"]["seed"])
        tconfig = TrainConfig(epochs=cfg["train"]["epochs"],
                              batch_size=cfg["train"]["batch_size"],
                              learning_rate=cfg["train"]["learning_rate"],
                              seed=cfg["train"]["seed"],
                              threads=cfg["train"]["threads"])
        artifact = train(split, mconfig, tconfig, stats=stats)
        model_path = os.path.join(out_dir, "model.fsyn")
        save_artifact(artifact, model_path)

        model_rows = predict(artifact, split.test)
        baseline = baseline_mean([s.y for s in split.train])
        report = compare_to_baseline(model_rows, baseline.predict(split.test))
        suppression = suppression_study(artifact, split.test)

    summary = {
        "dataset": {"train": len(split.train), "val": len(split.val),
                    "test": len(split.test), "dropped": dropped},
        "best_epoch": artifact.meta["best_epoch"],
        "comparison": report.as_dict(),
        "suppression": suppression.as_dict(),
    }
    with open(os.path.join(out_dir, "report.json"), "w") as f:
        json.dump(summary, f, indent=1, sort_keys=True)
    _write_predictions_csv(os.path.join(out_dir, "predictions.csv"), model_rows)
    if emit_plots:
        with open(os.path.join(out_dir, "plot_suppression.csv"), "w",
                  newline="") as f:
            w = csv.writer(f)
            w.writerow(["group", "subject_id", "pct_dmae"])
            for g in suppression.groups:
                for sid, pct in sorted(g.per_subject_pct_dmae.items()):
                    w.writerow([g.group, sid, repr(pct)])
    write_run_json(out_dir, "pipeline", cfg, files,
                   seeds={"split": cfg["split"]["seed"],
                          "model": cfg["model"]["seed"],
                          "train": cfg["train"]["seed"]})
    click.echo(f"model MAE {report.model_mae_mean:.4f} vs baseline "
               f"{report.baseline_mae_mean:.4f} "
               f"({report.percent_change:+.1f}%, p={report.ttest.p:.4g})")


if __name__ == "__main__":
    main()
