"""Grayscale rasters, binary PGM I/O, integral images and rectangle sums.

Pixel data is held as read-only uint8 numpy arrays in row-major order, so
images can be shared across threads freely. Integral tables carry a zero
top row and left column, making every rectangle sum four lookups with no
branching.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "BoundsError",
    "FormatError",
    "GrayImage",
    "IntegralImage",
    "Rect",
    "integral",
    "integral_squared",
    "load_pgm",
    "rect_sum",
    "resize_bilinear",
    "resize_nearest",
    "round_half_up",
    "save_pgm",
    "to_gray",
]


class FormatError(ValueError):
    """Malformed serialized payload (PGM header, model file, ...)."""


class BoundsError(ValueError):
    """A rectangle or coordinate falls outside its host image."""


def round_half_up(values):
    """Round floats with ties going up (0.5 -> 1), elementwise."""
    return np.floor(np.asarray(values, dtype=np.float64) + 0.5)


@dataclass(frozen=True)
class Rect:
    """Axis-aligned pixel rectangle; (x, y) is the top-left corner."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w < 1 or self.h < 1:
            raise ValueError(f"rect extent must be at least 1x1, got {self.w}x{self.h}")

    @property
    def area(self) -> int:
        return self.w * self.h

    @property
    def x2(self) -> int:
        return self.x + self.w

    @property
    def y2(self) -> int:
        return self.y + self.h


class GrayImage:
    """Immutable 8-bit luminance raster."""

    __slots__ = ("pixels",)

    def __init__(self, pixels):
        arr = np.asarray(pixels)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("image must be 2-D with width and height >= 1")
        if arr.dtype != np.uint8:
            if not np.issubdtype(arr.dtype, np.integer):
                raise ValueError("pixel values must be integers")
            if arr.size and (int(arr.min()) < 0 or int(arr.max()) > 255):
                raise ValueError("pixel values must lie in [0, 255]")
            arr = arr.astype(np.uint8)
        else:
            arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    def __setattr__(self, name, value):
        raise AttributeError("GrayImage is immutable")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def contains(self, r: Rect) -> bool:
        return r.x >= 0 and r.y >= 0 and r.x2 <= self.width and r.y2 <= self.height

    def crop(self, r: Rect) -> "GrayImage":
        if not self.contains(r):
            raise BoundsError(f"crop {r} outside {self.width}x{self.height} image")
        return GrayImage(self.pixels[r.y : r.y2, r.x : r.x2])

    def __eq__(self, other) -> bool:
        if not isinstance(other, GrayImage):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )

    def __hash__(self):
        return hash((self.pixels.shape, self.pixels.tobytes()))

    def __repr__(self) -> str:
        return f"GrayImage({self.width}x{self.height})"


class IntegralImage:
    """Prefix-sum table with a zero border row/column.

    ``table[y, x]`` is the sum of all pixels strictly above and left of
    (x, y), so the table is one larger than the image along each axis.
    """

    __slots__ = ("table",)

    def __init__(self, table: np.ndarray):
        table = np.asarray(table, dtype=np.int64)
        if table.ndim != 2 or table.shape[0] < 2 or table.shape[1] < 2:
            raise ValueError("integral table must be (height+1) x (width+1)")
        table = table.copy()
        table.setflags(write=False)
        object.__setattr__(self, "table", table)

    def __setattr__(self, name, value):
        raise AttributeError("IntegralImage is immutable")

    @property
    def width(self) -> int:
        return self.table.shape[1] - 1

    @property
    def height(self) -> int:
        return self.table.shape[0] - 1


def load_pgm(data: bytes) -> GrayImage:
    """Parse a binary PGM ("P5") payload with maxval <= 255.

    Comments ("#" to end of line) are accepted between header tokens.
    """
    if not isinstance(data, (bytes, bytearray, memoryview)):
        raise FormatError("PGM payload must be bytes")
    data = bytes(data)
    if not data.startswith(b"P5"):
        raise FormatError("not a binary PGM (P5) payload")

    whitespace = b" \t\r\n\x0b\x0c"

    def next_token(pos: int) -> tuple[bytes, int]:
        while pos < len(data):
            ch = data[pos : pos + 1]
            if ch in whitespace:
                pos += 1
            elif ch == b"#":
                nl = data.find(b"\n", pos)
                if nl == -1:
                    raise FormatError("unterminated comment in PGM header")
                pos = nl + 1
            else:
                break
        start = pos
        while pos < len(data) and data[pos : pos + 1] not in whitespace and data[pos : pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise FormatError("truncated PGM header")
        return data[start:pos], pos

    pos = 2
    fields = []
    for _ in range(3):
        token, pos = next_token(pos)
        try:
            fields.append(int(token))
        except ValueError:
            raise FormatError(f"non-numeric PGM header token {token!r}") from None
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise FormatError(f"invalid PGM dimensions {width}x{height}")
    if not 0 < maxval <= 255:
        raise FormatError(f"unsupported PGM maxval {maxval}")

    if pos >= len(data) or data[pos : pos + 1] not in whitespace:
        raise FormatError("missing whitespace before PGM raster")
    pos += 1

    expected = width * height
    payload = data[pos : pos + expected]
    if len(payload) < expected:
        raise FormatError(
            f"PGM raster truncated: expected {expected} bytes, got {len(payload)}"
        )
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
    return GrayImage(pixels)


def save_pgm(img: GrayImage) -> bytes:
    """Serialize to binary PGM with maxval 255."""
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + img.pixels.tobytes()


def to_gray(rgb: bytes, width: int, height: int) -> GrayImage:
    """Convert an interleaved 8-bit RGB raster to grayscale.

    Uses BT.601 luma weights with round-half-up, computed in exact integer
    arithmetic: luma = (299*R + 587*G + 114*B + 500) // 1000.
    """
    if len(rgb) % 3 != 0:
        raise FormatError("RGB payload length not divisible by 3")
    if len(rgb) != 3 * width * height:
        raise FormatError(
            f"RGB payload is {len(rgb)} bytes, expected {3 * width * height}"
        )
    arr = np.frombuffer(bytes(rgb), dtype=np.uint8).reshape(-1, 3).astype(np.int64)
    luma = (299 * arr[:, 0] + 587 * arr[:, 1] + 114 * arr[:, 2] + 500) // 1000
    return GrayImage(luma.reshape(height, width).astype(np.uint8))


def integral(img: GrayImage) -> IntegralImage:
    """Build the inclusive prefix-sum table of an image."""
    return _prefix_table(img.pixels.astype(np.int64))


def integral_squared(img: GrayImage) -> IntegralImage:
    """Prefix-sum table of squared pixel values (for window variance)."""
    px = img.pixels.astype(np.int64)
    return _prefix_table(px * px)


def _prefix_table(values: np.ndarray) -> IntegralImage:
    h, w = values.shape
    table = np.zeros((h + 1, w + 1), dtype=np.int64)
    np.cumsum(values, axis=0, dtype=np.int64, out=table[1:, 1:])
    np.cumsum(table[1:, 1:], axis=1, out=table[1:, 1:])
    return IntegralImage(table)


def rect_sum(ii: IntegralImage, r: Rect) -> int:
    """Exact sum of the pixels inside ``r`` via four table lookups."""
    if r.x < 0 or r.y < 0 or r.x2 > ii.width or r.y2 > ii.height:
        raise BoundsError(f"rect {r} outside {ii.width}x{ii.height} image")
    t = ii.table
    return int(t[r.y2, r.x2] - t[r.y, r.x2] - t[r.y2, r.x] + t[r.y, r.x])


def resize_nearest(img: GrayImage, new_w: int, new_h: int) -> GrayImage:
    """Nearest-neighbor resize; integer upscales duplicate pixels exactly."""
    if new_w < 1 or new_h < 1:
        raise ValueError("target size must be at least 1x1")
    xs = (np.arange(new_w) * img.width) // new_w
    ys = (np.arange(new_h) * img.height) // new_h
    return GrayImage(img.pixels[np.ix_(ys, xs)])


def resize_bilinear(img: GrayImage, new_w: int, new_h: int) -> GrayImage:
    """Bilinear resize using the pixel-center convention, round-half-up."""
    if new_w < 1 or new_h < 1:
        raise ValueError("target size must be at least 1x1")
    src = img.pixels.astype(np.float64)

    def axis_coords(new_n: int, old_n: int):
        coords = (np.arange(new_n) + 0.5) * old_n / new_n - 0.5
        coords = np.clip(coords, 0.0, old_n - 1.0)
        lo = np.floor(coords).astype(np.int64)
        hi = np.minimum(lo + 1, old_n - 1)
        frac = coords - lo
        return lo, hi, frac

    x0, x1, fx = axis_coords(new_w, img.width)
    y0, y1, fy = axis_coords(new_h, img.height)
    fx = fx[np.newaxis, :]
    fy = fy[:, np.newaxis]
    top = src[np.ix_(y0, x0)] * (1.0 - fx) + src[np.ix_(y0, x1)] * fx
    bottom = src[np.ix_(y1, x0)] * (1.0 - fx) + src[np.ix_(y1, x1)] * fx
    out = top * (1.0 - fy) + bottom * fy
    out = np.clip(round_half_up(out), 0, 255).astype(np.uint8)
    return GrayImage(out)
