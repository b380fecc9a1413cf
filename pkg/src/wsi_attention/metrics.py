"""Case-level evaluation: tumor probability maps, histogram matching,
Pearson cross-correlation, Welch's t-test, and per-group case reports.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from .errors import (
    ConstantInput,
    DimensionMismatch,
    InsufficientData,
    ZeroVariance,
)
from .heatmap import (
    DEFAULT_SCALE,
    DEFAULT_SIGMA,
    Grid2D,
    build_attention_heatmap,
    gaussian_smooth,
    grid_shape_for,
    min_max_normalize,
)
from .ingest import Group, NavigationSession, SlideManifest, TumorAnnotation
from .scanpath import AlignmentScoring, mean_pairwise_sss


@dataclass
class TumorProbabilityMap:
    grid: Grid2D
    sigma_px: float


@dataclass(frozen=True)
class GroupResult:
    cc: float
    sss: Optional[float]
    n_observers: int


@dataclass(frozen=True)
class CaseReport:
    case_id: str
    match_direction: str
    groups: Dict[str, GroupResult]


@dataclass(frozen=True)
class EvalConfig:
    scale: float = DEFAULT_SCALE
    sigma: float = DEFAULT_SIGMA
    scoring: AlignmentScoring = field(default_factory=AlignmentScoring)
    # "attention_to_tumor": the attention map's histogram is matched to the
    # tumor probability map before correlation.
    match_direction: str = "attention_to_tumor"


def _points_in_polygon_mask(
    xs: np.ndarray, ys: np.ndarray, polygon: Sequence[Tuple[float, float]]
) -> np.ndarray:
    """Vectorized even-odd containment for flat point arrays."""
    inside = np.zeros(xs.shape, dtype=bool)
    n = len(polygon)
    for i in range(n):
        x1, y1 = polygon[i]
        x2, y2 = polygon[(i + 1) % n]
        crosses = (y1 > ys) != (y2 > ys)
        if not crosses.any():
            continue
        with np.errstate(divide="ignore", invalid="ignore"):
            x_cross = x1 + (ys - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (xs < x_cross)
    return inside


def rasterize_annotation(
    annotation: TumorAnnotation,
    manifest: SlideManifest,
    scale: float = DEFAULT_SCALE,
) -> Grid2D:
    """Binary union mask of all tumor regions: a cell is 1 iff its center
    lies inside any region (even-odd rule); grades are ignored."""
    gw, gh = grid_shape_for(manifest, scale)
    cols, rows = np.meshgrid(np.arange(gw), np.arange(gh))
    xs = (cols.ravel() + 0.5) / scale
    ys = (rows.ravel() + 0.5) / scale
    mask = np.zeros(gw * gh, dtype=bool)
    for region in annotation.regions:
        mask |= _points_in_polygon_mask(xs, ys, region.polygon)
    return Grid2D(gw, gh, scale, mask.reshape(gh, gw).astype(np.float64))


def tumor_probability_map(
    mask: Grid2D, sigma: float = DEFAULT_SIGMA
) -> TumorProbabilityMap:
    smoothed = gaussian_smooth(mask, sigma)
    return TumorProbabilityMap(grid=min_max_normalize(smoothed), sigma_px=sigma)


def histogram_match(source: Grid2D, reference: Grid2D) -> Grid2D:
    """Monotone rank transform giving the source the reference's exact
    value multiset; ties in the source break by row-major index."""
    if not source.same_shape(reference):
        raise DimensionMismatch("histogram matching requires equal dimensions")
    src = source.values.ravel()
    order = np.argsort(src, kind="stable")
    out = np.empty_like(src)
    out[order] = np.sort(reference.values.ravel())
    return source.copy_with(out.reshape(source.values.shape))


def cross_correlation(a: Grid2D, b: Grid2D) -> float:
    """Pearson correlation over all cells of two equal-size grids."""
    if not a.same_shape(b):
        raise DimensionMismatch("correlation requires equal dimensions")
    x = a.values.ravel()
    y = b.values.ravel()
    xc = x - x.mean()
    yc = y - y.mean()
    sx = float(np.dot(xc, xc))
    sy = float(np.dot(yc, yc))
    if sx == 0.0 or sy == 0.0:
        raise ConstantInput("correlation undefined for a constant map")
    return float(np.dot(xc, yc) / math.sqrt(sx * sy))


def welch_t_test(xs: Sequence[float], ys: Sequence[float]) -> Tuple[float, float]:
    """Welch's unequal-variance t statistic with a two-sided p-value via
    the Student-t CDF at Welch-Satterthwaite degrees of freedom."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.size < 2 or y.size < 2:
        raise InsufficientData("each sample needs at least two values")
    vx = float(x.var(ddof=1))
    vy = float(y.var(ddof=1))
    if vx == 0.0 or vy == 0.0:
        raise ZeroVariance("each sample needs nonzero variance")
    se2_x = vx / x.size
    se2_y = vy / y.size
    t = (float(x.mean()) - float(y.mean())) / math.sqrt(se2_x + se2_y)
    df = (se2_x + se2_y) ** 2 / (
        se2_x**2 / (x.size - 1) + se2_y**2 / (y.size - 1)
    )
    p = 2.0 * float(stats.t.sf(abs(t), df))
    return t, p


_GROUP_SETS = (
    ("all", None),
    ("gu", Group.GU_SPECIALIST),
    ("general", Group.GENERAL),
)


def evaluate_case(
    sessions: Sequence[NavigationSession],
    annotation: TumorAnnotation,
    manifest: SlideManifest,
    config: EvalConfig = EvalConfig(),
) -> CaseReport:
    """Per observer set (all / GU / general): attention heatmap vs tumor
    probability map CC after histogram matching, plus mean pairwise SSS."""
    mask = rasterize_annotation(annotation, manifest, config.scale)
    tumor = tumor_probability_map(mask, config.sigma)
    groups: Dict[str, GroupResult] = {}
    for name, group in _GROUP_SETS:
        subset = [s for s in sessions if group is None or s.group == group]
        if not subset:
            continue
        hm = build_attention_heatmap(
            subset, manifest, scale=config.scale, sigma=config.sigma
        )
        if config.match_direction == "attention_to_tumor":
            matched = histogram_match(hm.grid, tumor.grid)
            cc = cross_correlation(matched, tumor.grid)
        elif config.match_direction == "tumor_to_attention":
            matched = histogram_match(tumor.grid, hm.grid)
            cc = cross_correlation(hm.grid, matched)
        else:
            raise ValueError(f"unknown match direction {config.match_direction!r}")
        sss = (
            mean_pairwise_sss(subset, annotation, config.scoring)
            if len(subset) >= 2
            else None
        )
        groups[name] = GroupResult(cc=cc, sss=sss, n_observers=len(subset))
    return CaseReport(
        case_id=manifest.slide_id,
        match_direction=config.match_direction,
        groups=groups,
    )


def case_report_csv(report: CaseReport) -> str:
    buf = io.StringIO()
    buf.write("case_id,group,cc,sss,n_observers,match_direction\n")
    for name in ("all", "gu", "general"):
        if name not in report.groups:
            continue
        g = report.groups[name]
        sss = "" if g.sss is None else repr(g.sss)
        buf.write(
            f"{report.case_id},{name},{g.cc!r},{sss},{g.n_observers},"
            f"{report.match_direction}\n"
        )
    return buf.getvalue()
