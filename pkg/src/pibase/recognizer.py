"""LBPH face recognition.

Every pixel's 3x3 neighborhood is thresholded against its center to form
an 8-bit code (a neighbor >= center sets its bit; bits run clockwise from
the top-left neighbor with the top-left as the most significant bit).
Per-cell histograms of those codes, normalized by cell pixel count and
concatenated row-major, form the face descriptor. Recognition is a
nearest-neighbor scan over a labeled master list; the best distance is
reported as the confidence, where lower is better and anything above the
caller's threshold maps to UNKNOWN.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from pibase.imaging import BoundsError, FormatError, GrayImage, resize_bilinear

UNKNOWN = -1

DEFAULT_GRID = (8, 8)
DEFAULT_FACE_SIZE = (100, 100)
DEFAULT_THRESHOLD = 0.35
HIST_BINS = 256

# Bit weights clockwise from the top-left neighbor, MSB first.
_NEIGHBOR_OFFSETS = (
    (-1, -1, 128),  # top-left
    (-1, 0, 64),    # top
    (-1, 1, 32),    # top-right
    (0, 1, 16),     # right
    (1, 1, 8),      # bottom-right
    (1, 0, 4),      # bottom
    (1, -1, 2),     # bottom-left
    (0, -1, 1),     # left
)


class LbpImage:
    """Grid of 8-bit neighborhood codes; one pixel of border is dropped."""

    __slots__ = ("codes",)

    def __init__(self, codes: np.ndarray):
        codes = np.asarray(codes, dtype=np.uint8).copy()
        if codes.ndim != 2 or codes.shape[0] < 1 or codes.shape[1] < 1:
            raise ValueError("LBP code grid must be 2-D and non-empty")
        codes.setflags(write=False)
        object.__setattr__(self, "codes", codes)

    def __setattr__(self, name, value):
        raise AttributeError("LbpImage is immutable")

    @property
    def width(self) -> int:
        return self.codes.shape[1]

    @property
    def height(self) -> int:
        return self.codes.shape[0]


def lbp_code(img: GrayImage, x: int, y: int) -> int:
    """Code of the interior pixel (x, y)."""
    if not (1 <= x <= img.width - 2 and 1 <= y <= img.height - 2):
        raise BoundsError(f"({x}, {y}) is not interior to {img.width}x{img.height}")
    px = img.pixels
    center = int(px[y, x])
    code = 0
    for dy, dx, bit in _NEIGHBOR_OFFSETS:
        if int(px[y + dy, x + dx]) >= center:
            code |= bit
    return code


def lbp_image(img: GrayImage) -> LbpImage:
    """Code every interior pixel (vectorized)."""
    if img.width < 3 or img.height < 3:
        raise ValueError(f"image must be at least 3x3, got {img.width}x{img.height}")
    return LbpImage(_lbp_array(img.pixels))


def _lbp_array(px: np.ndarray) -> np.ndarray:
    h, w = px.shape
    center = px[1 : h - 1, 1 : w - 1]
    codes = np.zeros(center.shape, dtype=np.uint8)
    for dy, dx, bit in _NEIGHBOR_OFFSETS:
        neighbor = px[1 + dy : h - 1 + dy, 1 + dx : w - 1 + dx]
        codes |= (neighbor >= center).astype(np.uint8) * np.uint8(bit)
    return codes


def grid_histograms(lbp: LbpImage, grid_x: int, grid_y: int) -> np.ndarray:
    """Concatenated per-cell normalized histograms, cells in row-major order.

    Remainder pixels go to the last cell along each axis; each cell's 256
    bins are divided by the cell's pixel count so they sum to 1.
    """
    if grid_x < 1 or grid_y < 1:
        raise ValueError("grid must be at least 1x1")
    if lbp.width < grid_x or lbp.height < grid_y:
        raise ValueError(
            f"grid {grid_x}x{grid_y} larger than code grid {lbp.width}x{lbp.height}"
        )
    cell_w = lbp.width // grid_x
    cell_h = lbp.height // grid_y
    out = np.empty(grid_x * grid_y * HIST_BINS, dtype=np.float64)
    idx = 0
    for gy in range(grid_y):
        y0 = gy * cell_h
        y1 = lbp.height if gy == grid_y - 1 else y0 + cell_h
        for gx in range(grid_x):
            x0 = gx * cell_w
            x1 = lbp.width if gx == grid_x - 1 else x0 + cell_w
            cell = lbp.codes[y0:y1, x0:x1]
            counts = np.bincount(cell.ravel(), minlength=HIST_BINS)
            out[idx : idx + HIST_BINS] = counts / cell.size
            idx += HIST_BINS
    return out


def hist_distance(a: np.ndarray, b: np.ndarray, metric: str = "chi-square") -> float:
    """Distance between two feature vectors; 0 iff they are equal."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"vector lengths differ: {a.shape} vs {b.shape}")
    if metric == "chi-square":
        denom = a + b
        mask = denom > 0
        diff = a[mask] - b[mask]
        return float(np.sum(diff * diff / denom[mask]))
    if metric == "euclidean":
        diff = a - b
        return float(math.sqrt(np.sum(diff * diff)))
    raise ValueError(f"unknown metric {metric!r}")


@dataclass(frozen=True)
class RecognitionResult:
    """Best-match label (or UNKNOWN) and its distance-valued confidence."""

    label_id: int
    confidence: float

    @property
    def is_unknown(self) -> bool:
        return self.label_id == UNKNOWN


@dataclass
class RecognizerModel:
    """Labeled master list of face descriptors.

    One entry per training image; ``label_map`` translates numeric label
    ids (assigned by first appearance of a person's name) back to names.
    """

    grid: tuple[int, int]
    face_size: tuple[int, int]
    entries: list[tuple[int, np.ndarray]]
    label_map: dict[int, str]
    _matrix: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        expected = self.grid[0] * self.grid[1] * HIST_BINS
        for label, vec in self.entries:
            if vec.shape != (expected,):
                raise ValueError(
                    f"entry vector length {vec.shape} does not match grid {self.grid}"
                )
            if label not in self.label_map:
                raise ValueError(f"label {label} missing from label map")

    def entry_matrix(self) -> np.ndarray:
        if self._matrix is None:
            object.__setattr__(self, "_matrix", np.stack([v for _, v in self.entries]))
        return self._matrix

    def label_name(self, label_id: int) -> str:
        return "UNKNOWN" if label_id == UNKNOWN else self.label_map[label_id]


def describe(img: GrayImage, grid: tuple[int, int], face_size: tuple[int, int]) -> np.ndarray:
    """Resize a crop to the canonical face size and build its descriptor."""
    face = resize_bilinear(img, face_size[0], face_size[1])
    return grid_histograms(lbp_image(face), grid[0], grid[1])


def train(
    samples: list[tuple[str, GrayImage]],
    grid: tuple[int, int] = DEFAULT_GRID,
    face_size: tuple[int, int] = DEFAULT_FACE_SIZE,
) -> RecognizerModel:
    """Build a master list from (person name, face crop) pairs."""
    if not samples:
        raise ValueError("at least one training sample is required")
    label_map: dict[int, str] = {}
    name_to_id: dict[str, int] = {}
    entries: list[tuple[int, np.ndarray]] = []
    for name, img in samples:
        if name not in name_to_id:
            name_to_id[name] = len(name_to_id)
            label_map[name_to_id[name]] = name
        entries.append((name_to_id[name], describe(img, grid, face_size)))
    return RecognizerModel(grid, face_size, entries, label_map)


def predict(
    model: RecognizerModel,
    face: GrayImage,
    threshold: float = DEFAULT_THRESHOLD,
    metric: str = "chi-square",
) -> RecognitionResult:
    """Nearest entry by histogram distance; UNKNOWN above the threshold.

    Ties resolve to the lowest entry index.
    """
    if not model.entries:
        raise RuntimeError("recognizer model has no entries")
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    query = describe(face, model.grid, model.face_size)
    matrix = model.entry_matrix()
    if metric == "chi-square":
        denom = matrix + query
        diff = matrix - query
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(denom > 0, diff * diff / np.where(denom > 0, denom, 1.0), 0.0)
        distances = terms.sum(axis=1)
    elif metric == "euclidean":
        diff = matrix - query
        distances = np.sqrt((diff * diff).sum(axis=1))
    else:
        raise ValueError(f"unknown metric {metric!r}")
    best = int(np.argmin(distances))
    confidence = float(distances[best])
    label = model.entries[best][0] if confidence <= threshold else UNKNOWN
    return RecognitionResult(label, confidence)


def save_model(model: RecognizerModel) -> bytes:
    """Serialize to the model JSON schema."""
    doc = {
        "grid": list(model.grid),
        "face_size": list(model.face_size),
        "labels": {str(k): v for k, v in sorted(model.label_map.items())},
        "entries": [
            {"label": label, "hist": vec.tolist()} for label, vec in model.entries
        ],
    }
    return json.dumps(doc).encode("utf-8")


def load_model(data: bytes) -> RecognizerModel:
    """Parse and validate a model JSON document."""

    def reject_constant(token):
        raise FormatError(f"non-finite number {token!r} in model file")

    try:
        doc = json.loads(data.decode("utf-8"), parse_constant=reject_constant)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"model file is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise FormatError("model document must be an object")

    grid = doc.get("grid")
    face_size = doc.get("face_size")
    for name, pair in (("grid", grid), ("face_size", face_size)):
        if (
            not isinstance(pair, list)
            or len(pair) != 2
            or not all(isinstance(v, int) and v >= 1 for v in pair)
        ):
            raise FormatError(f"invalid {name} {pair!r}")

    labels_raw = doc.get("labels")
    if not isinstance(labels_raw, dict):
        raise FormatError("labels must be an object")
    label_map = {}
    for key, name in labels_raw.items():
        try:
            label_map[int(key)] = str(name)
        except ValueError:
            raise FormatError(f"label id {key!r} is not an integer") from None

    entries_raw = doc.get("entries")
    if not isinstance(entries_raw, list) or not entries_raw:
        raise FormatError("model must contain at least one entry")
    expected = grid[0] * grid[1] * HIST_BINS
    entries = []
    for i, entry in enumerate(entries_raw):
        if not isinstance(entry, dict):
            raise FormatError(f"entry {i} must be an object")
        label = entry.get("label")
        if not isinstance(label, int) or label not in label_map:
            raise FormatError(f"entry {i} label {label!r} missing from label map")
        hist = entry.get("hist")
        if not isinstance(hist, list) or len(hist) != expected:
            raise FormatError(
                f"entry {i} vector length {len(hist) if isinstance(hist, list) else '?'} "
                f"does not match grid {grid[0]}x{grid[1]}"
            )
        vec = np.asarray(hist, dtype=np.float64)
        if not np.all(np.isfinite(vec)):
            raise FormatError(f"entry {i} contains non-finite values")
        if np.any(vec < 0):
            raise FormatError(f"entry {i} contains negative values")
        entries.append((label, vec))

    return RecognizerModel((grid[0], grid[1]), (face_size[0], face_size[1]), entries, label_map)
