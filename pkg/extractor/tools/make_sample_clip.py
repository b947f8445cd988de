"""Render the bundled deterministic sample clip.

A schematic face (bright ellipse with two dark eye dots) drifts and
breathes over a dark background for four seconds at 15 fps. The first
several frames are empty so extraction exercises face-absent handling
while staying well above the 50% coverage floor.

Usage: python3 tools/make_sample_clip.py [out.avi]
"""

import sys

import cv2
import numpy as np

SIZE = 96
FPS = 15.0
N_FRAMES = 60
EMPTY_PREFIX = 5  # leading frames with no face


def render_frame(i):
    frame = np.full((SIZE, SIZE, 3), 20, np.uint8)
    if i < EMPTY_PREFIX:
        return frame
    t = i / FPS
    cx = SIZE / 2 + 8 * np.sin(2 * np.pi * 0.3 * t)
    cy = SIZE / 2 + 5 * np.cos(2 * np.pi * 0.2 * t)
    rx = 24 + 3 * np.sin(2 * np.pi * 0.15 * t)
    ry = 1.25 * rx
    cv2.ellipse(frame, (int(round(cx)), int(round(cy))),
                (int(round(rx)), int(round(ry))), 0, 0, 360,
                (180, 190, 200), thickness=-1)
    for side in (-1, 1):
        ex = int(round(cx + side * 0.45 * rx))
        ey = int(round(cy - 0.25 * ry))
        cv2.circle(frame, (ex, ey), 2, (30, 30, 30), thickness=-1)
    return frame


def main(out_path):
    writer = cv2.VideoWriter(out_path, cv2.VideoWriter_fourcc(*"MJPG"),
                             FPS, (SIZE, SIZE))
    if not writer.isOpened():
        raise SystemExit(f"cannot open video writer for {out_path}")
    for i in range(N_FRAMES):
        writer.write(render_frame(i))
    writer.release()
    print(f"wrote {N_FRAMES} frames -> {out_path}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else
         "src/faceextract/data/sample_clip.avi")
