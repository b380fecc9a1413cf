"""Patch-based attention prediction: grid a slide into fixed-size patches
at a working magnification, discretize heatmap intensity into N bins,
train a softmax patch classifier on hand-crafted features, and reassemble
patch predictions into a smoothed, normalized heatmap.

External patch predictions (e.g. from a CNN trained elsewhere) can be
imported through a small CSV format and reassembled identically.
"""

from __future__ import annotations

import csv
import io
import json
import math
from bisect import bisect_right
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, IO, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import (
    BinOutOfRange,
    DuplicatePatch,
    MissingPrediction,
    OutOfRange,
)
from .heatmap import (
    DEFAULT_SCALE,
    DEFAULT_SIGMA,
    AttentionHeatmap,
    Grid2D,
    gaussian_smooth,
    grid_shape_for,
    min_max_normalize,
)
from .ingest import SlideManifest

N_FEATURES = 56  # 3x16 histograms + 3 means + 3 stds + gradient mean/std


@dataclass(frozen=True)
class BinSpec:
    n_bins: int
    edges: Tuple[float, ...]
    bin_means: Tuple[float, ...]

    def __post_init__(self):
        if len(self.edges) != self.n_bins + 1:
            raise ValueError("need n_bins + 1 edges")
        if self.edges[0] != 0.0 or self.edges[-1] != 1.0:
            raise ValueError("edges must span [0, 1]")
        if any(a >= b for a, b in zip(self.edges, self.edges[1:])):
            raise ValueError("edges must be strictly increasing")
        for i, m in enumerate(self.bin_means):
            if not (self.edges[i] <= m <= self.edges[i + 1]):
                raise ValueError("bin_means must lie inside their bins")

    @classmethod
    def equal_width(cls, n_bins: int = 5) -> "BinSpec":
        edges = tuple(i / n_bins for i in range(n_bins + 1))
        means = tuple((edges[i] + edges[i + 1]) / 2.0 for i in range(n_bins))
        return cls(n_bins=n_bins, edges=edges, bin_means=means)


@dataclass
class PatchRecord:
    slide_id: str
    px: int
    py: int
    x0: float  # origin, base-level pixels
    y0: float
    size_px: int = 500
    mag: float = 10.0
    span_px: float = 0.0  # base-level footprint side
    partial: bool = False
    features: Optional[np.ndarray] = None
    label: Optional[int] = None
    predicted: Optional[int] = None


def extract_patch_grid(
    manifest: SlideManifest, size_px: int = 500, mag: float = 10.0
) -> List[PatchRecord]:
    """Non-overlapping patch grid anchored at (0, 0); stride is size_px in
    mag-level pixels. Edge patches extending past the slide are flagged
    partial."""
    if mag <= 0:
        raise ValueError("mag must be positive")
    # base pixels per mag-level pixel, exact to keep the patch count stable
    f = Fraction(manifest.base_mag) / Fraction(mag)
    span = f * size_px
    nx = math.ceil(Fraction(manifest.width_px) / span)
    ny = math.ceil(Fraction(manifest.height_px) / span)
    patches = []
    for py in range(ny):
        for px in range(nx):
            patches.append(
                PatchRecord(
                    slide_id=manifest.slide_id,
                    px=px,
                    py=py,
                    x0=float(px * span),
                    y0=float(py * span),
                    size_px=size_px,
                    mag=mag,
                    span_px=float(span),
                    partial=bool(
                        (px + 1) * span > manifest.width_px
                        or (py + 1) * span > manifest.height_px
                    ),
                )
            )
    return patches


def discretize_intensity(mean_intensity: float, spec: BinSpec) -> int:
    """Bin index with half-open bins [edges[i], edges[i+1]); 1.0 maps to
    the last bin."""
    if not (0.0 <= mean_intensity <= 1.0):
        raise OutOfRange(f"intensity {mean_intensity} outside [0, 1]")
    idx = bisect_right(spec.edges, mean_intensity) - 1
    return min(idx, spec.n_bins - 1)


def patch_cell_range(
    origin: float, span: float, scale: float, limit: int
) -> Tuple[int, int]:
    """Half-open grid-cell range of a patch footprint. Boundaries round
    half-up so adjacent patches partition the grid without overlap."""
    g0 = int(math.floor(origin * scale + 0.5))
    g1 = int(math.floor((origin + span) * scale + 0.5))
    g0 = max(0, min(g0, limit - 1))
    g1 = max(g0 + 1, min(g1, limit))
    return g0, g1


def patch_label(heatmap: AttentionHeatmap, patch: PatchRecord, spec: BinSpec) -> int:
    grid = heatmap.grid
    gx0, gx1 = patch_cell_range(patch.x0, patch.span_px, grid.scale, grid.width)
    gy0, gy1 = patch_cell_range(patch.y0, patch.span_px, grid.scale, grid.height)
    mean = float(grid.values[gy0:gy1, gx0:gx1].mean())
    # guard against float drift just past the unit interval
    mean = min(max(mean, 0.0), 1.0)
    return discretize_intensity(mean, spec)


def patch_features(pixels: np.ndarray) -> np.ndarray:
    """56-dim feature vector for an RGB patch raster (H, W, 3) uint8:
    per-channel 16-bin normalized histograms, per-channel mean/std in
    [0, 1], and mean/std of the grayscale gradient magnitude."""
    arr = np.asarray(pixels)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError("expected an (H, W, 3) RGB raster")
    arr = arr.astype(np.float64)
    n = arr.shape[0] * arr.shape[1]
    parts = []
    for c in range(3):
        hist, _ = np.histogram(arr[:, :, c], bins=16, range=(0.0, 256.0))
        parts.append(hist / n)
    unit = arr / 255.0
    means = unit.mean(axis=(0, 1))
    stds = unit.std(axis=(0, 1))
    gray = unit.mean(axis=2)
    if gray.shape[0] > 1 and gray.shape[1] > 1:
        gy, gx = np.gradient(gray)
        gmag = np.sqrt(gx**2 + gy**2)
        grad_stats = [float(gmag.mean()), float(gmag.std())]
    else:
        grad_stats = [0.0, 0.0]
    return np.concatenate([np.concatenate(parts), means, stds, grad_stats])


def pad_patch_raster(pixels: np.ndarray, size_px: int) -> np.ndarray:
    """Edge-replicate a partial patch raster up to size_px x size_px."""
    h, w = pixels.shape[:2]
    if h >= size_px and w >= size_px:
        return pixels[:size_px, :size_px]
    return np.pad(
        pixels,
        ((0, max(0, size_px - h)), (0, max(0, size_px - w)), (0, 0)),
        mode="edge",
    )


@dataclass
class TrainConfig:
    lr: float = 0.005
    epochs: int = 20
    batch_size: Optional[int] = None  # None = full batch
    seed: int = 0
    augment: bool = False
    class_weighting: bool = True


@dataclass
class PatchClassifier:
    weights: np.ndarray  # (n_bins, feature_dim)
    bias: np.ndarray  # (n_bins,)
    feature_means: np.ndarray
    feature_stds: np.ndarray
    binspec: BinSpec
    degenerate: bool = False  # trained on a single class
    constant_class: Optional[int] = None

    def predict(self, features: np.ndarray) -> np.ndarray:
        feats = np.atleast_2d(np.asarray(features, dtype=np.float64))
        if self.degenerate:
            return np.full(feats.shape[0], self.constant_class, dtype=int)
        z = self._logits(feats)
        return np.argmax(z, axis=1)

    def _logits(self, feats: np.ndarray) -> np.ndarray:
        normed = (feats - self.feature_means) / self.feature_stds
        return normed @ self.weights.T + self.bias


def softmax_loss_and_grad(
    weights: np.ndarray,
    bias: np.ndarray,
    features: np.ndarray,
    labels: np.ndarray,
    sample_weights: np.ndarray,
) -> Tuple[float, np.ndarray, np.ndarray]:
    """Weighted-mean cross-entropy of a linear softmax model and its
    gradients w.r.t. weights and bias."""
    z = features @ weights.T + bias
    z = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1))
    log_probs = z - log_norm[:, None]
    n = features.shape[0]
    total_w = sample_weights.sum()
    loss = -float((sample_weights * log_probs[np.arange(n), labels]).sum() / total_w)
    probs = np.exp(log_probs)
    delta = probs.copy()
    delta[np.arange(n), labels] -= 1.0
    delta *= (sample_weights / total_w)[:, None]
    return loss, delta.T @ features, delta.sum(axis=0)


def train_patch_classifier(
    patches: Sequence[PatchRecord],
    hyper: TrainConfig = TrainConfig(),
    binspec: Optional[BinSpec] = None,
    rasters: Optional[Sequence[np.ndarray]] = None,
) -> PatchClassifier:
    """Multinomial logistic regression over patch features, trained with
    Adam on (weighted) cross-entropy. Deterministic for a fixed seed.

    With hyper.augment on, horizontally/vertically flipped copies of any
    patch whose raster is supplied are added to the training set.
    """
    spec = binspec or BinSpec.equal_width()
    feats: List[np.ndarray] = []
    labels: List[int] = []
    for i, p in enumerate(patches):
        if p.label is None:
            raise ValueError(f"patch ({p.px}, {p.py}) has no label")
        if not (0 <= p.label < spec.n_bins):
            raise BinOutOfRange(f"label {p.label} with {spec.n_bins} bins")
        f = p.features
        raster = rasters[i] if rasters is not None else None
        if f is None:
            if raster is None:
                raise ValueError(f"patch ({p.px}, {p.py}) has no features or raster")
            f = patch_features(raster)
        feats.append(f)
        labels.append(p.label)
        if hyper.augment and raster is not None:
            for flipped in (raster[::-1], raster[:, ::-1], raster[::-1, ::-1]):
                feats.append(patch_features(flipped))
                labels.append(p.label)

    X = np.asarray(feats, dtype=np.float64)
    y = np.asarray(labels, dtype=int)
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd[sd == 0.0] = 1.0

    present = np.unique(y)
    if present.size == 1:
        return PatchClassifier(
            weights=np.zeros((spec.n_bins, X.shape[1])),
            bias=np.zeros(spec.n_bins),
            feature_means=mu,
            feature_stds=sd,
            binspec=spec,
            degenerate=True,
            constant_class=int(present[0]),
        )

    Xn = (X - mu) / sd
    if hyper.class_weighting:
        counts = np.bincount(y, minlength=spec.n_bins).astype(np.float64)
        class_w = np.zeros(spec.n_bins)
        class_w[present] = y.size / (present.size * counts[present])
        sample_w = class_w[y]
    else:
        sample_w = np.ones(y.size)

    W = np.zeros((spec.n_bins, X.shape[1]))
    b = np.zeros(spec.n_bins)
    m_w = np.zeros_like(W)
    v_w = np.zeros_like(W)
    m_b = np.zeros_like(b)
    v_b = np.zeros_like(b)
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    rng = np.random.default_rng(hyper.seed)
    batch = hyper.batch_size or y.size
    step = 0
    for _ in range(hyper.epochs):
        order = rng.permutation(y.size) if batch < y.size else np.arange(y.size)
        for start in range(0, y.size, batch):
            idx = order[start : start + batch]
            _, gW, gb = softmax_loss_and_grad(W, b, Xn[idx], y[idx], sample_w[idx])
            step += 1
            m_w = beta1 * m_w + (1 - beta1) * gW
            v_w = beta2 * v_w + (1 - beta2) * gW**2
            m_b = beta1 * m_b + (1 - beta1) * gb
            v_b = beta2 * v_b + (1 - beta2) * gb**2
            mhat_w = m_w / (1 - beta1**step)
            vhat_w = v_w / (1 - beta2**step)
            mhat_b = m_b / (1 - beta1**step)
            vhat_b = v_b / (1 - beta2**step)
            W = W - hyper.lr * mhat_w / (np.sqrt(vhat_w) + eps)
            b = b - hyper.lr * mhat_b / (np.sqrt(vhat_b) + eps)

    return PatchClassifier(
        weights=W,
        bias=b,
        feature_means=mu,
        feature_stds=sd,
        binspec=spec,
    )


PredictionSet = Dict[Tuple[int, int], int]


def predict_and_reassemble(
    model_or_imported: Union[PatchClassifier, PredictionSet],
    patches: Sequence[PatchRecord],
    manifest: SlideManifest,
    spec: Optional[BinSpec] = None,
    scale: float = DEFAULT_SCALE,
    sigma: float = DEFAULT_SIGMA,
) -> AttentionHeatmap:
    """Paint each patch footprint with its predicted bin's mean intensity,
    then Gaussian-smooth and min-max normalize."""
    if isinstance(model_or_imported, PatchClassifier):
        spec = spec or model_or_imported.binspec
        feats = []
        for p in patches:
            if p.features is None:
                raise ValueError(f"patch ({p.px}, {p.py}) has no features")
            feats.append(p.features)
        predicted = model_or_imported.predict(np.asarray(feats))
        predictions = {
            (p.px, p.py): int(c) for p, c in zip(patches, predicted)
        }
    else:
        spec = spec or BinSpec.equal_width()
        predictions = model_or_imported

    gw, gh = grid_shape_for(manifest, scale)
    canvas = np.zeros((gh, gw))
    for p in patches:
        if (p.px, p.py) not in predictions:
            raise MissingPrediction(p.px, p.py)
        bin_idx = predictions[(p.px, p.py)]
        if not (0 <= bin_idx < spec.n_bins):
            raise BinOutOfRange(f"bin {bin_idx} with {spec.n_bins} bins")
        gx0, gx1 = patch_cell_range(p.x0, p.span_px, scale, gw)
        gy0, gy1 = patch_cell_range(p.y0, p.span_px, scale, gh)
        canvas[gy0:gy1, gx0:gx1] = spec.bin_means[bin_idx]
    grid = Grid2D(gw, gh, scale, canvas)
    smoothed = gaussian_smooth(grid, sigma)
    degenerate = bool(smoothed.values.max() == smoothed.values.min())
    return AttentionHeatmap(
        grid=min_max_normalize(smoothed),
        sigma_px=sigma,
        observers=frozenset(),
        degenerate=degenerate,
    )


def import_predictions(data: Union[bytes, str], n_bins: int = 5) -> PredictionSet:
    """Read a px,py,bin CSV of externally produced patch predictions."""
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != ["px", "py", "bin"]:
        raise ValueError("predictions CSV must start with header px,py,bin")
    out: PredictionSet = {}
    for row in reader:
        if not row:
            continue
        px, py, bin_idx = int(row[0]), int(row[1]), int(row[2])
        if (px, py) in out:
            raise DuplicatePatch(px, py)
        if not (0 <= bin_idx < n_bins):
            raise BinOutOfRange(f"bin {bin_idx} with {n_bins} bins")
        out[(px, py)] = bin_idx
    return out


# --- model / patch-manifest files -------------------------------------------

def save_classifier(model: PatchClassifier, fp: Union[str, IO[str]]) -> None:
    obj = {
        "feature_dim": int(model.weights.shape[1]),
        "n_bins": model.binspec.n_bins,
        "weights": [float(v) for v in model.weights.ravel()],
        "bias": [float(v) for v in model.bias],
        "feature_means": [float(v) for v in model.feature_means],
        "feature_stds": [float(v) for v in model.feature_stds],
        "binspec": {
            "n_bins": model.binspec.n_bins,
            "edges": list(model.binspec.edges),
            "bin_means": list(model.binspec.bin_means),
        },
        "degenerate": model.degenerate,
        "constant_class": model.constant_class,
    }
    if isinstance(fp, str):
        with open(fp, "w") as fh:
            json.dump(obj, fh)
    else:
        json.dump(obj, fp)


def load_classifier(fp: Union[str, IO[str]]) -> PatchClassifier:
    if isinstance(fp, str):
        with open(fp) as fh:
            obj = json.load(fh)
    else:
        obj = json.load(fp)
    n_bins = obj["n_bins"]
    dim = obj["feature_dim"]
    bs = obj["binspec"]
    return PatchClassifier(
        weights=np.asarray(obj["weights"]).reshape(n_bins, dim),
        bias=np.asarray(obj["bias"]),
        feature_means=np.asarray(obj["feature_means"]),
        feature_stds=np.asarray(obj["feature_stds"]),
        binspec=BinSpec(
            n_bins=bs["n_bins"],
            edges=tuple(bs["edges"]),
            bin_means=tuple(bs["bin_means"]),
        ),
        degenerate=obj.get("degenerate", False),
        constant_class=obj.get("constant_class"),
    )


def read_patch_manifest(text: str) -> List[Tuple[str, int, int, str]]:
    """Rows of (slide_id, px, py, path) addressing patch raster files."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != ["slide_id", "px", "py", "path"]:
        raise ValueError("patch manifest must start with header slide_id,px,py,path")
    return [(row[0], int(row[1]), int(row[2]), row[3]) for row in reader if row]
