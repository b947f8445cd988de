"""Acceptance gate for the extractor: the cross-package format contract.

The extractor must emit, from the bundled sample clip, a frame stream that
the facesync package parses and validates unmodified, with full 478/52
arity on every line and at least 50% frame coverage.
"""

import json

import pytest

facesync = pytest.importorskip("facesync")

from facesync.canonical import align_stream, load_canonical_model
from facesync.landmark_io import fill_gaps, parse_frame_stream, validate_stream

from faceextract.extract import ExtractionJob, extract


def test_extractor_contract(sample_clip, tmp_path, capsys):
    out = tmp_path / "s00__clip0.jsonl"
    summary = extract(ExtractionJob(video_path=sample_clip, subject_id="s00",
                                    video_id="clip0", out_path=str(out)))
    ok = True

    # full arity on every emitted line
    lines = out.read_text().splitlines()
    arity = all(len(r["lm"]) == 478 and len(r["bs"]) == 52
                and all(len(p) == 3 for p in r["lm"])
                for r in map(json.loads, lines))
    ok &= arity

    # coverage floor
    ok &= summary["coverage"] >= 0.5

    # parses and validates in the primary package unmodified
    with open(out) as f:
        stream = parse_frame_stream(f, "s00", "clip0")
    report = validate_stream(stream)
    ok &= report.frame_count == len(lines)
    ok &= report.out_of_range_blendshape_count == 0

    # flows into the primary alignment stage
    aligned = align_stream(fill_gaps(stream), load_canonical_model())
    ok &= len(aligned) == len(stream)

    with capsys.disabled():
        print(f"[SECONDARY] Extractor contract — arity 478/52 every line, "
              f"coverage {summary['coverage']:.0%}, parses+aligns in primary: "
              f"{'PASS' if ok else 'FAIL'}")
    assert ok
