"""Multiscale sliding-window detection with neighbor grouping.

Scales are handled with an image pyramid: for each scale the image is
downsized (bilinear) and the base window slides across it, so every
evaluated window lives in the same domain the cascade was trained on.
Windows whose pixel variance falls below 1 are discarded before any
feature is computed. Raw hits are mapped back to original coordinates,
merged with a union-find over IoU >= 0.3, and each surviving group of at
least ``min_neighbors`` members becomes one averaged box.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from pibase.imaging import GrayImage, Rect, integral, integral_squared, resize_bilinear
from pibase.detector.model import CascadeModel

_GROUP_IOU = 0.3


@dataclass(frozen=True)
class DetectParams:
    scale_factor: float = 1.25
    step: float = 1.0
    min_neighbors: int = 3
    min_size: int = 24


@dataclass(frozen=True)
class DetectionBox:
    rect: Rect
    scale: float
    neighbor_count: int


def iou(a: Rect, b: Rect) -> float:
    """Intersection-over-union of two rects."""
    ix = max(0, min(a.x2, b.x2) - max(a.x, b.x))
    iy = max(0, min(a.y2, b.y2) - max(a.y, b.y))
    inter = ix * iy
    if inter == 0:
        return 0.0
    return inter / (a.area + b.area - inter)


def _window_sums(table: np.ndarray, xs: np.ndarray, ys: np.ndarray, w: int, h: int):
    return (
        table[ys + h, xs + w]
        - table[ys, xs + w]
        - table[ys + h, xs]
        + table[ys, xs]
    )


def _scan_level(model: CascadeModel, level: GrayImage, stride: int) -> list[tuple[int, int]]:
    """Level-coordinate origins of windows accepted by the whole cascade."""
    table = integral(level).table
    sq_table = integral_squared(level).table
    bw, bh = model.base_w, model.base_h

    xs = np.arange(0, level.width - bw + 1, stride, dtype=np.int64)
    ys = np.arange(0, level.height - bh + 1, stride, dtype=np.int64)
    gx, gy = np.meshgrid(xs, ys)  # row-major: y outer, x inner
    gx = gx.ravel()
    gy = gy.ravel()

    area = bw * bh
    s1 = _window_sums(table, gx, gy, bw, bh).astype(np.float64)
    s2 = _window_sums(sq_table, gx, gy, bw, bh).astype(np.float64)
    mean = s1 / area
    var = s2 / area - mean * mean
    keep = var >= 1.0
    gx, gy = gx[keep], gy[keep]
    inv_norm = 1.0 / np.sqrt(var[keep])

    for stage in model.stages:
        if gx.size == 0:
            break
        scores = np.zeros(gx.size, dtype=np.float64)
        for wc in stage.weak:
            acc = np.zeros(gx.size, dtype=np.int64)
            for r, weight in wc.feature.rects:
                acc += weight * (
                    table[gy + r.y2, gx + r.x2]
                    - table[gy + r.y, gx + r.x2]
                    - table[gy + r.y2, gx + r.x]
                    + table[gy + r.y, gx + r.x]
                )
            values = acc * inv_norm
            votes = np.where(wc.polarity * values < wc.polarity * wc.threshold, 1.0, -1.0)
            scores += wc.alpha * votes
        passed = scores >= stage.threshold
        gx, gy, inv_norm = gx[passed], gy[passed], inv_norm[passed]

    return list(zip(gx.tolist(), gy.tolist()))


def scan_raw(
    model: CascadeModel, img: GrayImage, params: DetectParams | None = None
) -> list[DetectionBox]:
    """Ungrouped cascade acceptances in original-image coordinates."""
    params = params or DetectParams()
    if params.scale_factor <= 1.0:
        raise ValueError("scale_factor must be > 1.0")
    if params.step < 1:
        raise ValueError("step must be >= 1")
    if img.width < model.base_w or img.height < model.base_h:
        return []

    hits: list[DetectionBox] = []
    scale = max(1.0, params.min_size / model.base_w)
    stride = max(1, int(params.step + 0.5))
    while True:
        level_w = int(img.width / scale + 0.5)
        level_h = int(img.height / scale + 0.5)
        if level_w < model.base_w or level_h < model.base_h:
            break
        level = img if scale == 1.0 else resize_bilinear(img, level_w, level_h)
        win_w = int(model.base_w * scale + 0.5)
        win_h = int(model.base_h * scale + 0.5)
        for lx, ly in _scan_level(model, level, stride):
            x = min(int(lx * scale + 0.5), img.width - win_w)
            y = min(int(ly * scale + 0.5), img.height - win_h)
            hits.append(DetectionBox(Rect(x, y, win_w, win_h), scale, 1))
        scale *= params.scale_factor
    return hits


def detect(
    model: CascadeModel, img: GrayImage, params: DetectParams | None = None
) -> list[DetectionBox]:
    """Scan all positions and scales, then group raw hits into boxes."""
    params = params or DetectParams()
    if params.min_neighbors < 1:
        raise ValueError("min_neighbors must be >= 1")
    return _group_hits(scan_raw(model, img, params), img, params.min_neighbors)


def _group_hits(
    hits: list[DetectionBox], img: GrayImage, min_neighbors: int
) -> list[DetectionBox]:
    if not hits:
        return []
    n = len(hits)
    x1 = np.array([h.rect.x for h in hits], dtype=np.float64)
    y1 = np.array([h.rect.y for h in hits], dtype=np.float64)
    ws = np.array([h.rect.w for h in hits], dtype=np.float64)
    hs = np.array([h.rect.h for h in hits], dtype=np.float64)
    scales = np.array([h.scale for h in hits], dtype=np.float64)
    x2 = x1 + ws
    y2 = y1 + hs
    areas = ws * hs

    parent = list(range(n))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    # pairwise IoU one row at a time keeps memory bounded for large hit counts
    for i in range(n - 1):
        ix = np.minimum(x2[i], x2[i + 1 :]) - np.maximum(x1[i], x1[i + 1 :])
        iy = np.minimum(y2[i], y2[i + 1 :]) - np.maximum(y1[i], y1[i + 1 :])
        inter = np.clip(ix, 0, None) * np.clip(iy, 0, None)
        ious = inter / (areas[i] + areas[i + 1 :] - inter)
        for off in np.nonzero(ious >= _GROUP_IOU)[0]:
            j = i + 1 + int(off)
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)

    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)

    boxes = []
    for members in groups.values():
        if len(members) < min_neighbors:
            continue
        idx = np.array(members)
        x = int(np.mean(x1[idx]) + 0.5)
        y = int(np.mean(y1[idx]) + 0.5)
        w = max(1, int(np.mean(ws[idx]) + 0.5))
        h = max(1, int(np.mean(hs[idx]) + 0.5))
        w = min(w, img.width - x)
        h = min(h, img.height - y)
        boxes.append(DetectionBox(Rect(x, y, w, h), float(np.mean(scales[idx])), len(members)))

    boxes.sort(key=lambda b: (b.rect.y, b.rect.x, b.rect.w, b.rect.h))
    return boxes
