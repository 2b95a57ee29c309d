"""Synthetic face patches and scene frames for desk-scale training and replay.

A "toy face" is a 24x24 patch with two dark eye blocks under a bright brow
band and a mouth bar, overlaid with a per-identity texture (fixed by the
identity seed) plus per-image noise. Negatives are pure uniform noise.
Frames are flat backgrounds with patches pasted in, so background windows
fall below the detector's variance gate and scans stay fast.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from pibase.imaging import GrayImage, Rect, resize_nearest

FACE_SIZE = 24


@dataclass(frozen=True)
class ToyIdentity:
    """Deterministic per-person appearance parameters."""

    seed: int
    eye_dx: int
    eye_dy: int
    eye_level: int
    mouth_level: int
    texture: np.ndarray

    @classmethod
    def from_seed(cls, seed: int) -> "ToyIdentity":
        rng = np.random.default_rng(seed)
        return cls(
            seed=seed,
            eye_dx=int(rng.integers(-1, 2)),
            eye_dy=int(rng.integers(-1, 2)),
            eye_level=int(rng.integers(30, 70)),
            mouth_level=int(rng.integers(70, 115)),
            texture=rng.integers(-25, 26, size=(FACE_SIZE, FACE_SIZE)).astype(np.int16),
        )


def toy_face(identity: ToyIdentity, rng: np.random.Generator) -> GrayImage:
    """One noisy 24x24 sample of an identity."""
    canvas = np.full((FACE_SIZE, FACE_SIZE), 185.0)
    canvas[0:6, :] = 215.0  # brow band
    ey, ex = identity.eye_dy, identity.eye_dx
    canvas[7 + ey : 12 + ey, 3 + ex : 9 + ex] = identity.eye_level
    canvas[7 + ey : 12 + ey, 15 + ex : 21 + ex] = identity.eye_level
    canvas[13:16, 10:14] = 150.0  # nose shadow
    canvas[17:21, 7:17] = identity.mouth_level
    canvas += identity.texture * 0.6
    canvas += rng.integers(-8, 9, size=canvas.shape)
    return GrayImage(np.clip(canvas, 0, 255).astype(np.uint8))


def noise_patch(rng: np.random.Generator, size: int = FACE_SIZE) -> GrayImage:
    """A pure-noise negative sample."""
    return GrayImage(rng.integers(0, 256, size=(size, size)).astype(np.uint8))


def toy_dataset(
    n_identities: int,
    per_identity: int,
    n_negatives: int,
    seed: int = 0,
) -> tuple[list[GrayImage], list[GrayImage], list[int]]:
    """Positives grouped by identity, plus noise negatives and labels."""
    rng = np.random.default_rng(seed)
    positives: list[GrayImage] = []
    labels: list[int] = []
    for ident in range(n_identities):
        identity = ToyIdentity.from_seed(seed * 1000 + ident)
        for _ in range(per_identity):
            positives.append(toy_face(identity, rng))
            labels.append(ident)
    negatives = [noise_patch(rng) for _ in range(n_negatives)]
    return positives, negatives, labels


def make_frame(
    width: int,
    height: int,
    background: int = 128,
    patches: tuple[tuple[GrayImage, int, int], ...] = (),
) -> GrayImage:
    """A flat frame with patches pasted at (x, y) positions."""
    canvas = np.full((height, width), background, dtype=np.uint8)
    for patch, x, y in patches:
        if x < 0 or y < 0 or x + patch.width > width or y + patch.height > height:
            raise ValueError(f"patch at ({x}, {y}) does not fit in {width}x{height}")
        canvas[y : y + patch.height, x : x + patch.width] = patch.pixels
    return GrayImage(canvas)


def embed_face(
    frame_w: int,
    frame_h: int,
    face: GrayImage,
    x: int,
    y: int,
    upscale: int = 1,
    background: int = 128,
) -> tuple[GrayImage, Rect]:
    """Paste a (possibly upscaled) face into a flat frame; returns ground truth."""
    patch = face if upscale == 1 else resize_nearest(face, face.width * upscale, face.height * upscale)
    frame = make_frame(frame_w, frame_h, background, ((patch, x, y),))
    return frame, Rect(x, y, patch.width, patch.height)
