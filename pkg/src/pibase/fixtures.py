"""Deterministic end-to-end replay fixture builder.

Produces, under a destination directory: a trained toy cascade, a motion
replay file with three events (no face / enrolled face / unknown face),
the matching frame directory, and the enrollment images for the known
person. Also usable as ``python -m pibase.fixtures DEST``.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from pibase.detector import (
    CascadeTargets,
    DetectParams,
    generate_features,
    iou,
    save_cascade,
    scan_raw,
    train_cascade,
)
from pibase.imaging import Rect, resize_bilinear, save_pgm
from pibase.synthetic import FACE_SIZE, ToyIdentity, make_frame, noise_patch, toy_face

FRAME_W = 320
FRAME_H = 240
KNOWN_PERSON = "kim"
KNOWN_FACE_AT = (140, 96)
INTRUDER_FACE_AT = (64, 48)

# Replay scans use a tight stride and a lenient neighbor count: toy faces
# produce only a handful of raw hits in an otherwise flat frame.
DETECT_ARGS = {"scale_factor": 1.25, "step": 1.0, "min_neighbors": 2, "min_size": 24}


def train_replay_cascade(
    seed: int = 7,
    n_identities: int = 20,
    per_identity: int = 10,
    n_negatives: int = 400,
    pool_step: int = 24,
    overall_fpr: float = 0.02,
    mining_rounds: int = 4,
):
    """Toy cascade hardened for frame scanning.

    Starts from noise negatives, then repeatedly mines the cascade's own
    false-positive scan windows (off-center and wrong-scale crops around
    training faces) back into the negative set. That keeps detections
    tight around true face positions instead of smearing across scales.
    """
    rng = np.random.default_rng(seed)
    positives = []
    for ident in range(n_identities):
        identity = ToyIdentity.from_seed(seed * 1000 + ident)
        positives.extend(toy_face(identity, rng) for _ in range(per_identity))
    negatives = [noise_patch(rng) for _ in range(n_negatives)]
    pool = generate_features(FACE_SIZE, FACE_SIZE)[::pool_step]
    targets = CascadeTargets(
        per_stage_tpr=0.995, per_stage_fpr=0.5, overall_fpr=overall_fpr
    )

    mine_frames = []
    for i in range(10):
        identity = ToyIdentity.from_seed(seed * 1000 + (i % n_identities))
        face = toy_face(identity, rng)
        x = 36 + 34 * (i % 6)
        y = 28 + 30 * (i % 5)
        mine_frames.append(
            (make_frame(FRAME_W, FRAME_H, patches=((face, x, y),)), Rect(x, y, FACE_SIZE, FACE_SIZE))
        )

    scan_params = DetectParams(min_neighbors=1, step=1.0)
    model = None
    for _ in range(mining_rounds):
        model = train_cascade(
            positives, negatives, pool, targets,
            metadata={"seed": seed, "pool_step": pool_step},
        )
        mined = []
        for frame, truth in mine_frames:
            for hit in scan_raw(model, frame, scan_params):
                if iou(hit.rect, truth) < 0.5:
                    crop = frame.crop(hit.rect)
                    mined.append(resize_bilinear(crop, FACE_SIZE, FACE_SIZE))
        if len(mined) < 10:
            break
        negatives.extend(mined[:1200])
    return model


def build_fixture(dest: str | Path, seed: int = 7, burst_count: int = 2, cascade=None) -> dict:
    dest = Path(dest)
    frames_dir = dest / "frames"
    enroll_dir = dest / "enroll" / KNOWN_PERSON
    frames_dir.mkdir(parents=True, exist_ok=True)
    enroll_dir.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(seed + 100)
    known = ToyIdentity.from_seed(seed * 1000 + 777)
    intruder = ToyIdentity.from_seed(seed * 1000 + 888)
    known_face = toy_face(known, rng)
    intruder_face = toy_face(intruder, rng)

    blank_frame = make_frame(FRAME_W, FRAME_H)
    known_frame = make_frame(
        FRAME_W, FRAME_H, patches=((known_face, *KNOWN_FACE_AT),)
    )
    intruder_frame = make_frame(
        FRAME_W, FRAME_H, patches=((intruder_face, *INTRUDER_FACE_AT),)
    )

    sequence = (
        [blank_frame] * burst_count
        + [known_frame] * burst_count
        + [intruder_frame] * burst_count
    )
    for i, frame in enumerate(sequence):
        (frames_dir / f"{i:03d}.pgm").write_bytes(save_pgm(frame))

    motion_lines = [
        "# replay: blank, enrolled face, unknown face",
        "2026-03-01T08:00:00Z",
        "2026-03-01T08:05:00Z",
        "2026-03-01T08:10:00Z",
    ]
    (dest / "motion.txt").write_text("\n".join(motion_lines) + "\n", encoding="utf-8")

    # the known person enrolls with the very frame the replay will show
    enroll_path = enroll_dir / "kim-001.pgm"
    enroll_path.write_bytes(save_pgm(known_frame))

    if cascade is None:
        cascade = train_replay_cascade(seed=seed)
    cascade_path = dest / "cascade.json"
    cascade_path.write_bytes(save_cascade(cascade))

    manifest = {
        "cascade": "cascade.json",
        "motion": "motion.txt",
        "frames": "frames",
        "burst_count": burst_count,
        "known_person": KNOWN_PERSON,
        "enroll_images": [str(enroll_path.relative_to(dest))],
        "intruder_frame": f"frames/{2 * burst_count:03d}.pgm",
        "detect": DETECT_ARGS,
        "threshold": 0.35,
        "seed": seed,
    }
    (dest / "manifest.json").write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    return manifest


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="build the e2e replay fixture")
    parser.add_argument("dest")
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--burst-count", type=int, default=2)
    args = parser.parse_args(argv)
    manifest = build_fixture(args.dest, seed=args.seed, burst_count=args.burst_count)
    json.dump(manifest, sys.stdout)
    sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
