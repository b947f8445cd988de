"""Generate the packaged data files.

Run once from the repo root; outputs land in src/facesync/data/. The
canonical face model is a procedurally built stand-in with the tracker's
landmark topology: 478 points in metric space (cm), iris ids 468-477, and a
hand-placed rigid (stable) subset at conventional indices.
"""

import json
import os

import numpy as np

OUT = os.path.join(os.path.dirname(__file__), "..", "src", "facesync", "data")

# semantic anchors: index -> (x, y, z) in cm, x to the subject's left,
# y up, z out of the face
ANCHORS = {
    4: (0.0, 0.5, 6.5),     # nose tip
    5: (0.0, 1.2, 6.1),     # lower nose bridge
    195: (0.0, 2.0, 5.7),   # mid nose bridge
    197: (0.0, 2.6, 5.4),   # upper nose bridge
    6: (0.0, 3.1, 5.2),     # nasion
    168: (0.0, 3.6, 5.0),   # between brows
    33: (-4.4, 2.9, 4.0),   # right eye outer corner
    133: (-1.6, 2.8, 4.8),  # right eye inner corner
    362: (1.6, 2.8, 4.8),   # left eye inner corner
    263: (4.4, 2.9, 4.0),   # left eye outer corner
    10: (0.0, 8.6, 3.6),    # top of forehead
    151: (0.0, 6.8, 4.6),   # mid forehead
    109: (-3.0, 7.2, 3.6),  # right forehead
    338: (3.0, 7.2, 3.6),   # left forehead
    127: (-6.6, 2.3, 1.2),  # right temple
    356: (6.6, 2.3, 1.2),   # left temple
}
STABLE_IDS = [4, 5, 195, 197, 6, 168, 33, 133, 362, 263, 10, 151, 109, 338, 127, 356]

# iris: 5 points per eye (center + 4 compass points), right eye first
IRIS = {}
for base, cx in ((468, -3.0), (473, 3.0)):
    IRIS[base] = (cx, 2.85, 4.55)
    IRIS[base + 1] = (cx + 0.55, 2.85, 4.50)
    IRIS[base + 2] = (cx, 3.40, 4.50)
    IRIS[base + 3] = (cx - 0.55, 2.85, 4.50)
    IRIS[base + 4] = (cx, 2.30, 4.50)
IRIS_IDS = list(range(468, 478))


def make_canonical_model():
    rng = np.random.default_rng(20240601)
    pts = np.zeros((478, 3))
    # scatter the remaining points over the front half of a face ellipsoid
    a, b, c = 7.2, 9.5, 6.4
    free = [i for i in range(478) if i not in ANCHORS and i not in IRIS]
    u = rng.uniform(-0.96, 0.96, size=len(free))
    v = rng.uniform(-0.96, 0.96, size=len(free))
    keep = u * u + v * v < 0.96
    while not np.all(keep):
        u[~keep] = rng.uniform(-0.96, 0.96, size=int((~keep).sum()))
        v[~keep] = rng.uniform(-0.96, 0.96, size=int((~keep).sum()))
        keep = u * u + v * v < 0.96
    x = a * u
    y = b * v - 1.0
    z = c * np.sqrt(np.clip(1 - u * u - v * v, 0, None))
    pts[free, 0], pts[free, 1], pts[free, 2] = x, y, z
    for idx, p in {**ANCHORS, **IRIS}.items():
        pts[idx] = p
    return {
        "version": 1,
        "units": "cm",
        "points": np.round(pts, 4).tolist(),
        "stable_ids": STABLE_IDS,
        "iris_ids": IRIS_IDS,
    }


BLENDSHAPE_NAMES = [
    "_neutral",
    "browDownLeft", "browDownRight", "browInnerUp",
    "browOuterUpLeft", "browOuterUpRight",
    "cheekPuff", "cheekSquintLeft", "cheekSquintRight",
    "eyeBlinkLeft", "eyeBlinkRight",
    "eyeLookDownLeft", "eyeLookDownRight",
    "eyeLookInLeft", "eyeLookInRight",
    "eyeLookOutLeft", "eyeLookOutRight",
    "eyeLookUpLeft", "eyeLookUpRight",
    "eyeSquintLeft", "eyeSquintRight",
    "eyeWideLeft", "eyeWideRight",
    "jawForward", "jawLeft", "jawOpen", "jawRight",
    "mouthClose", "mouthDimpleLeft", "mouthDimpleRight",
    "mouthFrownLeft", "mouthFrownRight", "mouthFunnel",
    "mouthLeft", "mouthLowerDownLeft", "mouthLowerDownRight",
    "mouthPressLeft", "mouthPressRight", "mouthPucker",
    "mouthRight", "mouthRollLower", "mouthRollUpper",
    "mouthShrugLower", "mouthShrugUpper",
    "mouthSmileLeft", "mouthSmileRight",
    "mouthStretchLeft", "mouthStretchRight",
    "mouthUpperUpLeft", "mouthUpperUpRight",
    "noseSneerLeft", "noseSneerRight",
]

GROUP_PATTERNS = {
    "eyes": ["eyeLook", "eyeBlink", "eyeSquint", "eyeWide"],
    "brows": ["brow"],
    "cheeks": ["cheek"],
    "mouth": ["mouth", "jaw"],
    "nose": ["noseSneer"],
}


def main():
    os.makedirs(OUT, exist_ok=True)
    assert len(BLENDSHAPE_NAMES) == 52
    with open(os.path.join(OUT, "canonical_face_model.json"), "w") as f:
        json.dump(make_canonical_model(), f)
    with open(os.path.join(OUT, "blendshape_names.json"), "w") as f:
        json.dump({"version": 1, "names": BLENDSHAPE_NAMES}, f, indent=1)

    groups = {"none": []}
    for name, prefixes in GROUP_PATTERNS.items():
        groups[name] = [i for i, n in enumerate(BLENDSHAPE_NAMES)
                        if any(n.startswith(p) for p in prefixes)]
    groups["head"] = list(range(52, 64))
    with open(os.path.join(OUT, "feature_groups.json"), "w") as f:
        json.dump({"version": 1, "groups": groups}, f, indent=1)
    print("wrote data files to", OUT)


if __name__ == "__main__":
    main()
