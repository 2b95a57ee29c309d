"""Haar feature enumeration and evaluation over integral images.

Five classic rectangle arrangements are enumerated exhaustively inside a
base window. Rect weights balance to zero over equal-area partitions, so
every feature evaluates to exactly 0 on a constant image. The first listed
rect of each arrangement is the one expected to be brighter on a face-like
pattern, which fixes the sign convention.
"""

from __future__ import annotations

from dataclasses import dataclass

from pibase.imaging import BoundsError, IntegralImage, Rect, rect_sum

TWO_H = "two-rect-horizontal"
TWO_V = "two-rect-vertical"
THREE_H = "three-rect-horizontal"
THREE_V = "three-rect-vertical"
FOUR = "four-rect-checker"

FEATURE_KINDS = (TWO_H, TWO_V, THREE_H, THREE_V, FOUR)

# Block grid each kind subdivides its bounding box into (columns, rows).
_KIND_GRID = {
    TWO_H: (2, 1),
    TWO_V: (1, 2),
    THREE_H: (3, 1),
    THREE_V: (1, 3),
    FOUR: (2, 2),
}


@dataclass(frozen=True)
class HaarFeature:
    """Signed sum of adjacent rectangles in base-window coordinates."""

    kind: str
    rects: tuple[tuple[Rect, int], ...]

    def __post_init__(self):
        if self.kind not in FEATURE_KINDS:
            raise ValueError(f"unknown feature kind {self.kind!r}")
        if not self.rects:
            raise ValueError("feature must have at least one rect")


def _blocks(kind: str, x: int, y: int, w: int, h: int) -> tuple[tuple[Rect, int], ...]:
    """Weighted rects for a feature whose bounding box is (x, y, w, h)."""
    if kind == TWO_H:
        bw = w // 2
        return (
            (Rect(x, y, bw, h), +1),
            (Rect(x + bw, y, bw, h), -1),
        )
    if kind == TWO_V:
        bh = h // 2
        return (
            (Rect(x, y, w, bh), +1),
            (Rect(x, y + bh, w, bh), -1),
        )
    if kind == THREE_H:
        bw = w // 3
        return (
            (Rect(x, y, bw, h), +1),
            (Rect(x + bw, y, bw, h), -2),
            (Rect(x + 2 * bw, y, bw, h), +1),
        )
    if kind == THREE_V:
        bh = h // 3
        return (
            (Rect(x, y, w, bh), +1),
            (Rect(x, y + bh, w, bh), -2),
            (Rect(x, y + 2 * bh, w, bh), +1),
        )
    if kind == FOUR:
        bw, bh = w // 2, h // 2
        return (
            (Rect(x, y, bw, bh), +1),
            (Rect(x + bw, y, bw, bh), -1),
            (Rect(x, y + bh, bw, bh), -1),
            (Rect(x + bw, y + bh, bw, bh), +1),
        )
    raise ValueError(f"unknown feature kind {kind!r}")


def generate_features(base_w: int, base_h: int) -> list[HaarFeature]:
    """Exhaustively enumerate all five kinds inside the base window.

    Order is deterministic: kind, then box width, height, x, y.
    """
    if base_w < 4 or base_h < 4:
        raise ValueError("base window must be at least 4x4")
    features: list[HaarFeature] = []
    for kind in FEATURE_KINDS:
        gx, gy = _KIND_GRID[kind]
        for w in range(gx, base_w + 1, gx):
            for h in range(gy, base_h + 1, gy):
                for x in range(0, base_w - w + 1):
                    for y in range(0, base_h - h + 1):
                        features.append(HaarFeature(kind, _blocks(kind, x, y, w, h)))
    return features


def count_features(base_w: int, base_h: int) -> int:
    """Size of the exhaustive enumeration, without materializing it."""
    if base_w < 4 or base_h < 4:
        raise ValueError("base window must be at least 4x4")
    total = 0
    for gx, gy in _KIND_GRID.values():
        for w in range(gx, base_w + 1, gx):
            for h in range(gy, base_h + 1, gy):
                total += (base_w - w + 1) * (base_h - h + 1)
    return total


def scale_rect(r: Rect, origin_x: int, origin_y: int, scale: float) -> Rect:
    """Place a base-window rect at a scaled window position.

    Corners are scaled and rounded half-up independently, which keeps
    adjacent partition rects adjacent and preserves exact weight balance
    at integer scales.
    """
    x0 = int(r.x * scale + 0.5)
    y0 = int(r.y * scale + 0.5)
    x1 = int((r.x + r.w) * scale + 0.5)
    y1 = int((r.y + r.h) * scale + 0.5)
    if x1 <= x0 or y1 <= y0:
        raise ValueError(f"rect {r} collapses at scale {scale}")
    return Rect(origin_x + x0, origin_y + y0, x1 - x0, y1 - y0)


def eval_feature(
    f: HaarFeature,
    ii: IntegralImage,
    origin: tuple[int, int],
    scale: float = 1.0,
    inv_norm: float = 1.0,
) -> float:
    """Weighted rect-sum response of ``f`` at a window, times ``inv_norm``.

    ``inv_norm`` is the reciprocal of the window's pixel standard
    deviation when variance normalization is wanted; pass 1.0 to skip.
    """
    if inv_norm <= 0:
        raise ValueError("inv_norm must be positive")
    ox, oy = origin
    total = 0
    for r, weight in f.rects:
        placed = scale_rect(r, ox, oy, scale)
        if placed.x < 0 or placed.y < 0 or placed.x2 > ii.width or placed.y2 > ii.height:
            raise BoundsError(f"scaled rect {placed} outside {ii.width}x{ii.height}")
        total += weight * rect_sum(ii, placed)
    return total * inv_norm
