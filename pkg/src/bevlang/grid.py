"""BEV grid geometry: the metric ego frame, cell indexing, and RLE masks.

Frame convention (fixed for the whole package): the ego vehicle sits at
the metric origin, which is the center of the grid. x points forward,
y points left, the frame is right-handed. Row 0 is the far-front edge
of the grid, column 0 the far-left edge, so a position of (2.5, 1.5)
reads "2.5 m ahead, 1.5 m to the left".
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BoundsError, SchemaError


@dataclass(frozen=True)
class GridMeta:
    """Shape and resolution of a BEV grid."""

    rows: int = 200
    cols: int = 200
    cell_size_m: float = 0.5

    def __post_init__(self):
        if self.rows <= 0 or self.cols <= 0:
            raise ValueError("grid must have positive dimensions")
        if self.cell_size_m <= 0:
            raise ValueError("cell_size_m must be positive")

    @property
    def extent_x(self) -> float:
        """Half-extent of the grid along x, meters."""
        return self.rows * self.cell_size_m / 2.0

    @property
    def extent_y(self) -> float:
        return self.cols * self.cell_size_m / 2.0

    def to_dict(self) -> dict:
        return {"rows": self.rows, "cols": self.cols, "cell_size_m": self.cell_size_m}

    @classmethod
    def from_dict(cls, d: dict) -> "GridMeta":
        try:
            return cls(rows=int(d["rows"]), cols=int(d["cols"]), cell_size_m=float(d["cell_size_m"]))
        except KeyError as exc:
            raise SchemaError(f"missing grid_meta field {exc}", "grid_meta") from exc


def cell_to_metric(row: int, col: int, meta: GridMeta) -> tuple[float, float]:
    """Center of cell (row, col) in the metric ego frame."""
    if not (0 <= row < meta.rows and 0 <= col < meta.cols):
        raise BoundsError(f"cell ({row}, {col}) outside {meta.rows}x{meta.cols} grid")
    x = (meta.rows / 2.0 - row - 0.5) * meta.cell_size_m
    y = (meta.cols / 2.0 - col - 0.5) * meta.cell_size_m
    return (x, y)


def _quantize(v: float, half: float) -> int:
    # Exact cell boundaries round toward the ego-side cell; the center
    # boundary itself resolves to the front/left cell.
    f = math.floor(v)
    if v == f and v >= half:
        return int(f) - 1
    return int(f)


def metric_to_cell(x: float, y: float, meta: GridMeta) -> tuple[int, int]:
    """Cell containing metric point (x, y); inverse of cell_to_metric."""
    if not (abs(x) < meta.extent_x and abs(y) < meta.extent_y):
        raise BoundsError(
            f"point ({x}, {y}) outside grid extent ±({meta.extent_x}, {meta.extent_y})"
        )
    row = _quantize(meta.rows / 2.0 - x / meta.cell_size_m, meta.rows / 2.0)
    col = _quantize(meta.cols / 2.0 - y / meta.cell_size_m, meta.cols / 2.0)
    return (row, col)


def cell_centers(cells: np.ndarray, meta: GridMeta) -> np.ndarray:
    """Vectorized cell_to_metric for an (N, 2) array of (row, col)."""
    cells = np.asarray(cells, dtype=np.float64)
    out = np.empty_like(cells)
    out[:, 0] = (meta.rows / 2.0 - cells[:, 0] - 0.5) * meta.cell_size_m
    out[:, 1] = (meta.cols / 2.0 - cells[:, 1] - 0.5) * meta.cell_size_m
    return out


def rle_encode(mask: np.ndarray) -> list[list[int]]:
    """Run-length encode a boolean mask over row-major cell order."""
    flat = np.asarray(mask, dtype=bool).ravel()
    padded = np.concatenate([[0], flat.astype(np.int8), [0]])
    d = np.diff(padded)
    starts = np.flatnonzero(d == 1)
    ends = np.flatnonzero(d == -1)
    return [[int(s), int(e - s)] for s, e in zip(starts, ends)]


def rle_decode(runs: list, rows: int, cols: int, path: str = "rle") -> np.ndarray:
    """Decode RLE runs into a (rows, cols) boolean mask, validating shape."""
    n = rows * cols
    flat = np.zeros(n, dtype=bool)
    prev_end = 0
    for i, run in enumerate(runs):
        if not (isinstance(run, (list, tuple)) and len(run) == 2):
            raise SchemaError("run must be a [start, length] pair", f"{path}[{i}]")
        start, length = run
        if not (isinstance(start, int) and isinstance(length, int)):
            raise SchemaError("run entries must be integers", f"{path}[{i}]")
        if length <= 0:
            raise SchemaError(f"run length {length} must be positive", f"{path}[{i}]")
        if start < prev_end:
            raise SchemaError(f"run start {start} overlaps previous run", f"{path}[{i}]")
        if start + length > n:
            raise SchemaError(
                f"run [{start}, {length}] exceeds {n} cells", f"{path}[{i}]"
            )
        flat[start : start + length] = True
        prev_end = start + length
    return flat.reshape(rows, cols)


@dataclass(frozen=True, eq=False)
class BevGrid:
    """Two-channel semantic BEV grid (vehicle and road masks)."""

    rows: int = 200
    cols: int = 200
    cell_size_m: float = 0.5
    vehicle_mask: np.ndarray = field(default=None)  # type: ignore[assignment]
    road_mask: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        meta = GridMeta(self.rows, self.cols, self.cell_size_m)  # validates
        shape = (meta.rows, meta.cols)
        for name in ("vehicle_mask", "road_mask"):
            arr = getattr(self, name)
            if arr is None:
                arr = np.zeros(shape, dtype=bool)
            else:
                arr = np.ascontiguousarray(arr, dtype=bool)
                if arr.shape != shape:
                    raise ValueError(f"{name} shape {arr.shape} != grid shape {shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def meta(self) -> GridMeta:
        return GridMeta(self.rows, self.cols, self.cell_size_m)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BevGrid):
            return NotImplemented
        return (
            self.rows == other.rows
            and self.cols == other.cols
            and self.cell_size_m == other.cell_size_m
            and np.array_equal(self.vehicle_mask, other.vehicle_mask)
            and np.array_equal(self.road_mask, other.road_mask)
        )
