"""Independent brute-force reference implementations used to check the
package's fast paths. These deliberately use plain loops and their own
bookkeeping rather than calling back into the code under test."""

from __future__ import annotations

import math


def naive_integral(pixels) -> list[list[int]]:
    """(h+1)x(w+1) prefix table via an explicit quadruple loop."""
    h = len(pixels)
    w = len(pixels[0])
    table = [[0] * (w + 1) for _ in range(h + 1)]
    for y in range(1, h + 1):
        for x in range(1, w + 1):
            total = 0
            for yy in range(y):
                for xx in range(x):
                    total += int(pixels[yy][xx])
            table[y][x] = total
    return table


def naive_rect_sum(pixels, x: int, y: int, w: int, h: int) -> int:
    total = 0
    for yy in range(y, y + h):
        for xx in range(x, x + w):
            total += int(pixels[yy][xx])
    return total


def naive_lbp(pixels) -> list[list[int]]:
    """8-bit codes for interior pixels; clockwise from top-left, MSB first."""
    h = len(pixels)
    w = len(pixels[0])
    out = []
    for y in range(1, h - 1):
        row = []
        for x in range(1, w - 1):
            c = int(pixels[y][x])
            neighbors = [
                int(pixels[y - 1][x - 1]),  # top-left
                int(pixels[y - 1][x]),      # top
                int(pixels[y - 1][x + 1]),  # top-right
                int(pixels[y][x + 1]),      # right
                int(pixels[y + 1][x + 1]),  # bottom-right
                int(pixels[y + 1][x]),      # bottom
                int(pixels[y + 1][x - 1]),  # bottom-left
                int(pixels[y][x - 1]),      # left
            ]
            code = 0
            for value in neighbors:
                code = code * 2 + (1 if value >= c else 0)
            row.append(code)
        out.append(row)
    return out


def count_features(base_w: int, base_h: int) -> int:
    """Exhaustive position/size enumeration for the five kinds."""
    total = 0
    for unit_w, unit_h in ((2, 1), (1, 2), (3, 1), (1, 3), (2, 2)):
        for w in range(unit_w, base_w + 1):
            if w % unit_w:
                continue
            for h in range(unit_h, base_h + 1):
                if h % unit_h:
                    continue
                total += (base_w - w + 1) * (base_h - h + 1)
    return total


def best_stump(values, weights, labels):
    """Exhaustive stump search matching the trainer's documented order.

    Candidates per feature, in priority order: polarity +1 with a sentinel
    below the minimum, then midpoint cuts between adjacent distinct sorted
    values plus a sentinel above the maximum; then the same for polarity
    -1. Returns (feature_index, threshold, polarity, error).
    """
    n = len(labels)
    best = None
    for fi, row in enumerate(values):
        sorted_vals = sorted(row[i] for i in range(n))
        # order: +1 sentinel-low, +1 cuts, +1 sentinel-high, then the same for -1
        ordered = []
        for polarity in (1, -1):
            ordered.append((polarity, sorted_vals[0] - 1.0))
            for k in range(n - 1):
                if sorted_vals[k] < sorted_vals[k + 1]:
                    ordered.append((polarity, (sorted_vals[k] + sorted_vals[k + 1]) / 2.0))
            ordered.append((polarity, sorted_vals[-1] + 1.0))
        for polarity, theta in ordered:
            err = 0.0
            for i in range(n):
                vote = 1 if polarity * row[i] < polarity * theta else -1
                if vote != labels[i]:
                    err += weights[i]
            if best is None or err < best[3]:
                best = (fi, theta, polarity, err)
    return best


def chi_square(a, b) -> float:
    total = 0.0
    for x, y in zip(a, b):
        if x + y > 0:
            total += (x - y) ** 2 / (x + y)
    return total


def euclidean(a, b) -> float:
    return math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))


def nearest_entry(entry_vectors, query):
    """(index, distance) by linear chi-square scan, first minimum wins."""
    best_idx = 0
    best_dist = chi_square(entry_vectors[0], query)
    for i in range(1, len(entry_vectors)):
        d = chi_square(entry_vectors[i], query)
        if d < best_dist:
            best_idx, best_dist = i, d
    return best_idx, best_dist
