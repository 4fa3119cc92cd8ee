"""Grid-based saliency ranking.

The map is cut into a ``k x k`` grid. Each segment gets a weighted score

    S = w_H * entropy + w_SS * mean_saliency + w_CB * center_bias + w_DS * depth

and segments (or element masks laid over the grid) are ranked by it.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from . import kernels
from .backbone import DepthMap, SaliencyMap


@dataclass(frozen=True)
class ScoreWeights:
    w_H: float = 1.0
    w_SS: float = 1.0
    w_CB: float = 1.0
    w_DS: float = 0.0

    def __post_init__(self):
        ws = (self.w_H, self.w_SS, self.w_CB, self.w_DS)
        if any(not math.isfinite(w) or w < 0 for w in ws):
            raise ValueError(f"weights must be finite and non-negative, got {ws}")
        if not any(w > 0 for w in ws):
            raise ValueError("at least one score weight must be positive")

    def scaled(self, c: float) -> "ScoreWeights":
        return ScoreWeights(self.w_H * c, self.w_SS * c, self.w_CB * c, self.w_DS * c)


@dataclass(frozen=True)
class GridConfig:
    k: int = 30
    weights: ScoreWeights = field(default_factory=ScoreWeights)

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")

    def check_dims(self, width: int, height: int) -> None:
        if self.k > min(width, height):
            raise ValueError(f"k={self.k} exceeds the smaller image side ({min(width, height)} px)")


@dataclass(frozen=True)
class Segment:
    row: int
    col: int
    x0: int
    y0: int
    x1: int  # exclusive
    y1: int  # exclusive

    @property
    def index(self) -> tuple[int, int]:
        return (self.row, self.col)

    @property
    def area(self) -> int:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)


@dataclass(frozen=True)
class SegmentScore:
    segment_index: tuple[int, int]
    entropy: float
    mean_saliency: float
    center_bias: float
    depth: float
    score: float


@dataclass(frozen=True)
class RankEntry:
    id: str
    score: float
    rank: int


@dataclass
class RankList:
    """Items ordered by descending score; rank 1 is the most salient."""

    entries: list[RankEntry]

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def ids(self) -> list[str]:
        return [e.id for e in self.entries]

    def rank_of(self, item_id: str) -> int:
        for e in self.entries:
            if e.id == item_id:
                return e.rank
        raise KeyError(item_id)

    def score_of(self, item_id: str) -> float:
        for e in self.entries:
            if e.id == item_id:
                return e.score
        raise KeyError(item_id)

    def to_records(self) -> list[dict]:
        return [{"id": e.id, "score": e.score, "rank": e.rank} for e in self.entries]


@dataclass(frozen=True)
class ElementMask:
    id: str
    pixels: np.ndarray

    def __post_init__(self):
        px = np.array(self.pixels, dtype=bool)
        if px.ndim != 2:
            raise ValueError(f"mask {self.id!r} must be 2D")
        if not px.any():
            raise ValueError(f"mask {self.id!r} has no set pixels")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)


def _edges(n: int, k: int) -> np.ndarray:
    step = n // k
    edges = np.arange(k + 1, dtype=np.int64) * step
    edges[-1] = n
    return edges


def grid_edges(width: int, height: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Row and column boundaries of the grid; the last row/column absorbs any remainder."""
    return _edges(height, k), _edges(width, k)


def build_grid(width: int, height: int, cfg: GridConfig) -> list[Segment]:
    cfg.check_dims(width, height)
    rows, cols = grid_edges(width, height, cfg.k)
    return [
        Segment(r, c, int(cols[c]), int(rows[r]), int(cols[c + 1]), int(rows[r + 1]))
        for r in range(cfg.k)
        for c in range(cfg.k)
    ]


def center_bias(cx, cy, width: int, height: int):
    """Gaussian prior on distance from the image centre, sigma = diagonal / 6."""
    sigma = math.hypot(width, height) / 6.0
    d2 = (np.asarray(cx) - width / 2.0) ** 2 + (np.asarray(cy) - height / 2.0) ** 2
    return np.exp(-d2 / (2.0 * sigma * sigma))


def level_bins(smap: SaliencyMap) -> tuple[np.ndarray, int]:
    """Histogram bin of every pixel, and the bin count (the map's level count)."""
    nbins = smap.levels
    bins = np.floor(smap.values * (nbins / (smap.max_level + 1))).astype(np.int64)
    return np.clip(bins, 0, nbins - 1), nbins


def _entropy_from_counts(counts: np.ndarray) -> np.ndarray:
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum(axis=-1, keepdims=True)
    p = np.divide(counts, total, out=np.zeros_like(counts), where=total > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, -p * np.log2(p), 0.0)
    return terms.sum(axis=-1) + 0.0  # + 0.0 turns -0.0 into 0.0


def _check_depth(smap: SaliencyMap, depth: DepthMap | None) -> None:
    if depth is not None and depth.values.shape != smap.values.shape:
        raise ValueError(
            f"depth map {depth.width}x{depth.height} does not match saliency map "
            f"{smap.width}x{smap.height}"
        )


def _combine(w: ScoreWeights, h, ss, cb, ds):
    return w.w_H * h + w.w_SS * ss + w.w_CB * cb + w.w_DS * ds


def score_segment(
    smap: SaliencyMap, seg: Segment, cfg: GridConfig, depth: DepthMap | None = None
) -> SegmentScore:
    """Score one rectangle directly (no grid kernel)."""
    if seg.area <= 0:
        raise ValueError(f"segment {seg.index} is empty")
    _check_depth(smap, depth)
    bins, nbins = level_bins(smap)
    block = bins[seg.y0 : seg.y1, seg.x0 : seg.x1]
    h = float(_entropy_from_counts(np.bincount(block.ravel(), minlength=nbins)))
    ss = float(smap.values[seg.y0 : seg.y1, seg.x0 : seg.x1].mean() / smap.max_level)
    cx, cy = seg.center
    cb = float(center_bias(cx, cy, smap.width, smap.height))
    ds = 0.0 if depth is None else float(depth.values[seg.y0 : seg.y1, seg.x0 : seg.x1].mean())
    return SegmentScore(seg.index, h, ss, cb, ds, float(_combine(cfg.weights, h, ss, cb, ds)))


def score_grid(
    smap: SaliencyMap, cfg: GridConfig, depth: DepthMap | None = None
) -> list[SegmentScore]:
    """Score all ``k*k`` segments, row-major."""
    cfg.check_dims(smap.width, smap.height)
    _check_depth(smap, depth)
    rows, cols = grid_edges(smap.width, smap.height, cfg.k)
    bins, nbins = level_bins(smap)
    hist, sums = kernels.segment_stats(smap.values, bins, rows, cols, nbins)
    area = np.diff(rows)[:, None] * np.diff(cols)[None, :]

    ent = _entropy_from_counts(hist)
    ss = sums / area / smap.max_level
    cy = (rows[:-1] + rows[1:]) / 2.0
    cx = (cols[:-1] + cols[1:]) / 2.0
    cb = center_bias(cx[None, :], cy[:, None], smap.width, smap.height)
    if depth is None:
        ds = np.zeros_like(ss)
    else:
        _, dsum = kernels.segment_stats(
            depth.values, np.zeros(depth.values.shape, dtype=np.int64), rows, cols, 1
        )
        ds = dsum / area

    w = cfg.weights
    out = []
    for r in range(cfg.k):
        for c in range(cfg.k):
            h_, ss_, cb_, ds_ = float(ent[r, c]), float(ss[r, c]), float(cb[r, c]), float(ds[r, c])
            out.append(SegmentScore((r, c), h_, ss_, cb_, ds_, float(_combine(w, h_, ss_, cb_, ds_))))
    return out


def rank_items(items: list[tuple[str, float, tuple]]) -> RankList:
    # items: (id, score, tie_key); higher score first, then ascending tie_key
    ordered = sorted(items, key=lambda it: (-it[1], it[2]))
    return RankList([RankEntry(i, s, n + 1) for n, (i, s, _) in enumerate(ordered)])


def segment_id(index: tuple[int, int]) -> str:
    return f"{index[0]},{index[1]}"


def rank_segments(smap: SaliencyMap, cfg: GridConfig, depth: DepthMap | None = None) -> RankList:
    scores = score_grid(smap, cfg, depth)
    return rank_items([(segment_id(s.segment_index), s.score, s.segment_index) for s in scores])


def mask_scores(
    smap: SaliencyMap,
    cfg: GridConfig,
    masks: list[ElementMask],
    depth: DepthMap | None = None,
) -> dict[str, float]:
    """Overlap-weighted mean segment score under each mask."""
    if not masks:
        raise ValueError("need at least one element mask")
    ids = [m.id for m in masks]
    if len(set(ids)) != len(ids):
        raise ValueError("mask ids must be unique")
    scores = score_grid(smap, cfg, depth)
    grid = np.array([s.score for s in scores]).reshape(cfg.k, cfg.k)
    rows, cols = grid_edges(smap.width, smap.height, cfg.k)
    row_seg = np.repeat(np.arange(cfg.k), np.diff(rows))
    col_seg = np.repeat(np.arange(cfg.k), np.diff(cols))
    seg_of_pixel = row_seg[:, None] * cfg.k + col_seg[None, :]

    out = {}
    for m in masks:
        if m.pixels.shape != smap.values.shape:
            raise ValueError(
                f"mask {m.id!r} is {m.pixels.shape[1]}x{m.pixels.shape[0]}, "
                f"map is {smap.width}x{smap.height}"
            )
        overlap = np.bincount(seg_of_pixel[m.pixels], minlength=cfg.k * cfg.k)
        total = overlap.sum()
        if total == 0:
            raise ValueError(f"mask {m.id!r} does not overlap any segment")
        out[m.id] = float(np.dot(overlap, grid.ravel()) / total)
    return out


def rank_masks(
    smap: SaliencyMap,
    cfg: GridConfig,
    masks: list[ElementMask],
    depth: DepthMap | None = None,
) -> RankList:
    """Rank element masks; ties go to the lexicographically smaller id."""
    scores = mask_scores(smap, cfg, masks, depth)
    return rank_items([(mid, s, mid) for mid, s in scores.items()])


def load_mask_png(path, mask_id: str | None = None, size: tuple[int, int] | None = None) -> ElementMask:
    """Binary mask from a PNG (pixels >= 128 are set); resized nearest-neighbour to ``size``."""
    path = Path(path)
    try:
        with Image.open(path) as img:
            img = img.convert("L")
            if size is not None and img.size != tuple(size):
                warnings.warn(f"{path}: mask {img.size} resized to {tuple(size)}")
                img = img.resize(tuple(size), Image.NEAREST)
            arr = np.asarray(img) >= 128
    except (OSError, SyntaxError) as exc:
        raise ValueError(f"cannot read mask {path}: {exc}") from exc
    return ElementMask(mask_id or path.stem, arr)


def load_masks(source, size: tuple[int, int] | None = None) -> list[ElementMask]:
    """Masks from a directory of binary PNGs (id = file stem) or one label PNG.

    In a label PNG every non-zero value is an element; its id is the value.
    """
    source = Path(source)
    if source.is_dir():
        files = sorted(source.glob("*.png"))
        if not files:
            raise ValueError(f"no PNG masks in {source}")
        masks = []
        for f in files:
            try:
                masks.append(load_mask_png(f, size=size))
            except ValueError as exc:
                warnings.warn(f"skipping mask {f}: {exc}")
        if not masks:
            raise ValueError(f"no usable masks in {source}")
        return masks
    if source.is_file():
        try:
            with Image.open(source) as img:
                if size is not None and img.size != tuple(size):
                    img = img.resize(tuple(size), Image.NEAREST)
                labels = np.asarray(img.convert("L") if img.mode not in ("L", "P", "I") else img)
        except (OSError, SyntaxError) as exc:
            raise ValueError(f"cannot read label image {source}: {exc}") from exc
        values = [int(v) for v in np.unique(labels) if v != 0]
        if not values:
            raise ValueError(f"label image {source} has no non-zero labels")
        return [ElementMask(str(v), labels == v) for v in values]
    raise ValueError(f"mask source not found: {source}")


_PALETTE = np.array(
    [[230, 25, 75], [60, 180, 75], [255, 225, 25], [0, 130, 200], [245, 130, 48],
     [145, 30, 180], [70, 240, 240], [240, 50, 230], [210, 245, 60], [250, 190, 212]],
    dtype=np.float64,
)


def rank_overlay(base: np.ndarray, ranks: RankList, masks: list[ElementMask] | None = None,
                 cfg: GridConfig | None = None) -> np.ndarray:
    """RGB visualisation: masks tinted and labelled with their rank, or a
    grid heat overlay when ranking segments."""
    from PIL import ImageDraw

    base = np.asarray(base, dtype=np.float64)
    if base.ndim == 2:
        base = np.repeat(base[..., None], 3, axis=2)
    out = base.copy()
    labels = []
    if masks:
        by_id = {m.id: m for m in masks}
        for e in ranks:
            m = by_id[e.id]
            color = _PALETTE[(e.rank - 1) % len(_PALETTE)]
            out[m.pixels] = 0.5 * out[m.pixels] + 0.5 * color
            ys, xs = np.nonzero(m.pixels)
            labels.append((float(xs.mean()), float(ys.mean()), str(e.rank)))
    elif cfg is not None:
        h, w = base.shape[:2]
        rows, cols = grid_edges(w, h, cfg.k)
        n = len(ranks)
        for e in ranks:
            r, c = (int(v) for v in e.id.split(","))
            heat = 1.0 - (e.rank - 1) / max(n - 1, 1)
            sl = (slice(rows[r], rows[r + 1]), slice(cols[c], cols[c + 1]))
            out[sl] = 0.5 * out[sl] + 0.5 * np.array([255.0 * heat, 0.0, 255.0 * (1 - heat)])
            if e.rank <= 5:
                labels.append(((cols[c] + cols[c + 1]) / 2, (rows[r] + rows[r + 1]) / 2, str(e.rank)))
    img = Image.fromarray(np.clip(np.rint(out), 0, 255).astype(np.uint8))
    draw = ImageDraw.Draw(img)
    for x, y, text in labels:
        draw.text((x, y), text, fill=(255, 255, 255), anchor="mm", stroke_width=1, stroke_fill=(0, 0, 0))
    return np.asarray(img)
