"""Attention heatmaps from viewport boxes: accumulate coverage counts,
Gaussian-smooth, and min-max normalize.

Grids live at a downsampled working scale (default 1/16 of base pixels);
the smoothing sigma is interpreted in grid cells at that scale.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import IO, FrozenSet, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.ndimage import correlate1d

from .errors import DimensionMismatch, EmptyInput
from .ingest import NavigationSession, SlideManifest, snap_to_standard

DEFAULT_SCALE = 1.0 / 16.0
DEFAULT_SIGMA = 16.0


@dataclass
class Grid2D:
    width: int
    height: int
    scale: float
    values: np.ndarray  # (height, width) float64

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.height, self.width):
            raise ValueError(
                f"values shape {self.values.shape} != ({self.height}, {self.width})"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid values must be finite")

    @classmethod
    def zeros(cls, width: int, height: int, scale: float) -> "Grid2D":
        return cls(width, height, scale, np.zeros((height, width)))

    def copy_with(self, values: np.ndarray) -> "Grid2D":
        return Grid2D(self.width, self.height, self.scale, values)

    def same_shape(self, other: "Grid2D") -> bool:
        return self.width == other.width and self.height == other.height


@dataclass
class AttentionHeatmap:
    grid: Grid2D
    sigma_px: float
    observers: FrozenSet[str] = frozenset()
    mag_filter: Optional[float] = None
    degenerate: bool = False  # pre-normalization grid was constant


def grid_shape_for(manifest: SlideManifest, scale: float) -> Tuple[int, int]:
    return (
        int(math.ceil(manifest.width_px * scale)),
        int(math.ceil(manifest.height_px * scale)),
    )


def scaled_box(
    x0: int, y0: int, x1: int, y1: int, scale: float
) -> Tuple[int, int, int, int]:
    """Viewport box in grid cells: floor starts, ceil ends."""
    return (
        int(math.floor(x0 * scale)),
        int(math.floor(y0 * scale)),
        int(math.ceil(x1 * scale)),
        int(math.ceil(y1 * scale)),
    )


def accumulate_viewports(
    sessions: Sequence[NavigationSession],
    manifest: SlideManifest,
    scale: float = DEFAULT_SCALE,
    mag_filter: Optional[float] = None,
    mag_levels: Optional[Sequence[float]] = None,
) -> Grid2D:
    """Per-cell count of viewport boxes covering the cell.

    With mag_filter set, only events whose magnification snaps to that
    level (nearest standard, ties to the lower) are counted.
    """
    if not sessions:
        raise EmptyInput("no sessions")
    if not (0.0 < scale <= 1.0):
        raise ValueError("scale must be in (0, 1]")
    levels = tuple(mag_levels) if mag_levels is not None else manifest.standard_mags
    gw, gh = grid_shape_for(manifest, scale)
    values = np.zeros((gh, gw))
    for session in sessions:
        for ev in session.events:
            if mag_filter is not None and snap_to_standard(ev.mag, levels) != mag_filter:
                continue
            gx0, gy0, gx1, gy1 = scaled_box(ev.x0, ev.y0, ev.x1, ev.y1, scale)
            gx0, gy0 = max(gx0, 0), max(gy0, 0)
            gx1, gy1 = min(gx1, gw), min(gy1, gh)
            if gx0 < gx1 and gy0 < gy1:
                values[gy0:gy1, gx0:gx1] += 1.0
    return Grid2D(gw, gh, scale, values)


def gaussian_kernel_1d(sigma: float) -> np.ndarray:
    """Unit-sum Gaussian kernel truncated at radius ceil(3*sigma)."""
    radius = int(math.ceil(3.0 * sigma))
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (offsets / sigma) ** 2)
    return k / k.sum()


def gaussian_smooth(grid: Grid2D, sigma: float) -> Grid2D:
    """Separable Gaussian blur with reflect (edge-repeating) padding."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return grid.copy_with(grid.values.copy())
    kernel = gaussian_kernel_1d(sigma)
    out = correlate1d(grid.values, kernel, axis=0, mode="reflect")
    out = correlate1d(out, kernel, axis=1, mode="reflect")
    return grid.copy_with(out)


def min_max_normalize(grid: Grid2D) -> Grid2D:
    mn = float(grid.values.min())
    mx = float(grid.values.max())
    if mx == mn:
        return grid.copy_with(np.zeros_like(grid.values))
    return grid.copy_with((grid.values - mn) / (mx - mn))


def build_attention_heatmap(
    sessions: Sequence[NavigationSession],
    manifest: SlideManifest,
    scale: float = DEFAULT_SCALE,
    sigma: float = DEFAULT_SIGMA,
    mag_filter: Optional[float] = None,
    mag_levels: Optional[Sequence[float]] = None,
) -> AttentionHeatmap:
    counts = accumulate_viewports(sessions, manifest, scale, mag_filter, mag_levels)
    smoothed = gaussian_smooth(counts, sigma)
    degenerate = bool(smoothed.values.max() == smoothed.values.min())
    return AttentionHeatmap(
        grid=min_max_normalize(smoothed),
        sigma_px=sigma,
        observers=frozenset(s.observer_id for s in sessions),
        mag_filter=mag_filter,
        degenerate=degenerate,
    )


def average_heatmaps(heatmaps: Sequence[AttentionHeatmap]) -> AttentionHeatmap:
    """Cell-wise mean of per-observer normalized maps, renormalized."""
    if not heatmaps:
        raise EmptyInput("no heatmaps")
    first = heatmaps[0]
    for hm in heatmaps[1:]:
        if not hm.grid.same_shape(first.grid) or hm.grid.scale != first.grid.scale:
            raise DimensionMismatch("heatmap grids differ in shape or scale")
    mean = np.mean([hm.grid.values for hm in heatmaps], axis=0)
    grid = first.grid.copy_with(mean)
    degenerate = bool(mean.max() == mean.min())
    mag_filters = {hm.mag_filter for hm in heatmaps}
    observers: FrozenSet[str] = frozenset().union(*(hm.observers for hm in heatmaps))
    return AttentionHeatmap(
        grid=min_max_normalize(grid),
        sigma_px=first.sigma_px,
        observers=observers,
        mag_filter=mag_filters.pop() if len(mag_filters) == 1 else None,
        degenerate=degenerate,
    )


# --- binary heatmap file ("AHM1") -------------------------------------------

_MAGIC = b"AHM1"
_HEADER = struct.Struct("<4sIIdd")


def save_heatmap(hm: AttentionHeatmap, fp: Union[str, IO[bytes]]) -> None:
    grid = hm.grid
    payload = _HEADER.pack(_MAGIC, grid.width, grid.height, grid.scale, hm.sigma_px)
    payload += grid.values.astype("<f4").tobytes()
    if isinstance(fp, str):
        with open(fp, "wb") as fh:
            fh.write(payload)
    else:
        fp.write(payload)


def load_heatmap(fp: Union[str, IO[bytes]]) -> AttentionHeatmap:
    if isinstance(fp, str):
        with open(fp, "rb") as fh:
            raw = fh.read()
    else:
        raw = fp.read()
    magic, width, height, scale, sigma = _HEADER.unpack_from(raw, 0)
    if magic != _MAGIC:
        raise ValueError("not a heatmap file (bad magic)")
    values = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size)
    if values.size != width * height:
        raise ValueError("heatmap file truncated")
    grid = Grid2D(width, height, scale, values.reshape(height, width).astype(np.float64))
    degenerate = bool(grid.values.max() == grid.values.min())
    return AttentionHeatmap(grid=grid, sigma_px=sigma, degenerate=degenerate)
