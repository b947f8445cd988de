"""Command-line entry point: ``extract <video> --subject S --video V --out p``."""

from __future__ import annotations

import json
import sys

import click

from .backends import make_backend
from .errors import ExtractError
from .extract import ExtractionJob, extract


@click.command("extract")
@click.argument("video", type=click.Path(exists=True, dir_okay=False))
@click.option("--subject", "subject_id", required=True,
              help="Subject identifier for the emitted stream.")
@click.option("--video", "video_id", required=True,
              help="Video/stimulus identifier for the emitted stream.")
@click.option("--out", "out_path", required=True, type=click.Path(),
              help="Output frame-stream .jsonl path.")
@click.option("--backend", "backend_name", default="template",
              show_default=True, type=click.Choice(["template", "mediapipe"]))
def extract_cmd(video, subject_id, video_id, out_path, backend_name):
    """Run the face landmark backend on VIDEO and emit a frame stream."""
    try:
        job = ExtractionJob(video_path=video, subject_id=subject_id,
                            video_id=video_id, out_path=out_path)
        summary = extract(job, backend=make_backend(backend_name))
    except ExtractError as e:
        click.echo(f"ERROR {e.code}: {e}", err=True)
        sys.exit(1)
    click.echo(json.dumps(summary))


if __name__ == "__main__":
    extract_cmd()
