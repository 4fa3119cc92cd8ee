"""Ranking-quality metrics and the dataset evaluation harness.

SOR is Spearman's rho rescaled to [0, 1]. Ground-truth element order comes
from the time of the first fixation landing on each element mask.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .backbone import SaliencyMap, image_size, load_saliency_map, read_rgb, spectral_residual_saliency
from .normalize import NormalizeConfig, normalize_map
from .sara import ElementMask, GridConfig, RankList, load_masks, mask_scores, rank_items
from .stats import rankdata

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RankPair:
    predicted: tuple[float, ...]
    ground_truth: tuple[float, ...]

    def __init__(self, predicted, ground_truth):
        p = tuple(float(v) for v in predicted)
        g = tuple(float(v) for v in ground_truth)
        if len(p) != len(g):
            raise ValueError(f"rank lists differ in length ({len(p)} vs {len(g)})")
        if len(p) < 2:
            raise ValueError("Spearman correlation needs at least 2 items")
        object.__setattr__(self, "predicted", p)
        object.__setattr__(self, "ground_truth", g)

    @property
    def n(self) -> int:
        return len(self.predicted)


def _pair(pair, ground_truth=None) -> RankPair:
    if isinstance(pair, RankPair):
        return pair
    return RankPair(pair, ground_truth)


def srcc(pair, ground_truth=None) -> float:
    """Spearman's rho. ``srcc(RankPair)`` or ``srcc(predicted, ground_truth)``.

    Inputs are re-ranked first. Without ties this is
    ``1 - 6 sum d^2 / (n (n^2 - 1))``; with ties, Pearson correlation of the
    fractional ranks. If one side is entirely tied rho is undefined and 0 is
    returned.
    """
    pair = _pair(pair, ground_truth)
    n = pair.n
    rp = rankdata(pair.predicted)
    rg = rankdata(pair.ground_truth)
    if len(set(rp)) == n and len(set(rg)) == n:
        d2 = float(np.sum((rp - rg) ** 2))
        return 1.0 - 6.0 * d2 / (n * (n * n - 1))
    cp, cg = rp - rp.mean(), rg - rg.mean()
    denom = math.sqrt(float(np.sum(cp * cp)) * float(np.sum(cg * cg)))
    if denom == 0:
        return 0.0
    return min(max(float(np.sum(cp * cg)) / denom, -1.0), 1.0)


def sor(pair, ground_truth=None) -> float:
    """Salient-object-ranking score, ``(rho + 1) / 2``."""
    return (srcc(pair, ground_truth) + 1.0) / 2.0


def _point(p):
    if hasattr(p, "t_start"):
        return float(p.t_start), float(p.x), float(p.y)
    if hasattr(p, "t"):
        return float(p.t), float(p.x), float(p.y)
    if isinstance(p, dict):
        return float(p["t"]), float(p["x"]), float(p["y"])
    t, x, y = p
    return float(t), float(x), float(y)


def _pixel_hit(pixels: np.ndarray, x: float, y: float) -> bool:
    col, row = math.floor(x), math.floor(y)
    h, w = pixels.shape
    return 0 <= row < h and 0 <= col < w and bool(pixels[row, col])


def gt_ranks_from_fixations(masks: list[ElementMask], fixations) -> RankList:
    """Ground-truth ranks by order of first fixation on each mask.

    ``fixations`` are ``(t, x, y)`` tuples, dicts or fixation/sample objects.
    Entry scores are the negated first-hit times; masks never fixated are
    left out; simultaneous first hits are ordered by id.
    """
    pts = sorted(_point(p) for p in fixations)
    if not pts:
        raise ValueError("need at least one fixation")
    first = {}
    for m in masks:
        for t, x, y in pts:
            if _pixel_hit(m.pixels, x, y):
                first[m.id] = t
                break
    return rank_items([(mid, -t, mid) for mid, t in first.items()])


def shuffled_auc(heatmap, positives, negatives) -> float:
    """AUC separating heatmap values at ``positives`` from those at ``negatives``.

    Points are ``(x, y)`` pixel coordinates (floored and clamped into the
    map). Ties count one half.
    """
    values = heatmap.values if isinstance(heatmap, SaliencyMap) else np.asarray(heatmap, float)
    pos, neg = list(positives), list(negatives)
    if not pos or not neg:
        raise ValueError("shuffled AUC needs at least one positive and one negative point")
    h, w = values.shape

    def sample(points):
        out = []
        for x, y in points:
            c = min(max(math.floor(x), 0), w - 1)
            r = min(max(math.floor(y), 0), h - 1)
            out.append(values[r, c])
        return np.array(out, dtype=np.float64)

    vp, vn = sample(pos), sample(neg)
    ranks = rankdata(np.concatenate([vp, vn]))
    u = float(ranks[: vp.size].sum()) - vp.size * (vp.size + 1) / 2.0
    return u / (vp.size * vn.size)


def sample_negatives(pool, n_positives: int, seed: int, cap_factor: int = 10) -> list:
    """Fixed-seed subsample of the other-image fixation pool, at most ``cap_factor * n_positives``."""
    pool = list(pool)
    cap = cap_factor * n_positives
    if len(pool) <= cap:
        return pool
    idx = np.random.default_rng(seed).choice(len(pool), size=cap, replace=False)
    return [pool[i] for i in sorted(idx.tolist())]


@dataclass
class DatasetItem:
    """One evaluation image. ``saliency=None`` means use the built-in backbone."""

    image_id: str
    image: str | None
    saliency: str | None
    masks: str | list[ElementMask]
    fixations: str | list


@dataclass(frozen=True)
class EvalConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    normalize: NormalizeConfig | None = field(default_factory=NormalizeConfig)
    backbone: str = "file"
    seed: int = 0
    sauc_cap_factor: int = 10

    def __post_init__(self):
        if self.backbone not in ("file", "builtin"):
            raise ValueError("backbone must be 'file' or 'builtin'")


@dataclass
class ImageResult:
    image_id: str
    status: str  # "ok", "skipped" or "failed"
    sor: float | None = None
    n_masks: int = 0
    n_fixated: int = 0
    sauc: float | None = None
    error: str | None = None
    predicted: list[str] | None = None
    ground_truth: list[str] | None = None


@dataclass
class EvalResult:
    mean_sor: float | None
    images_used: int
    per_image: list[tuple[str, float]]
    details: list[ImageResult]
    mean_sauc: float | None = None

    @property
    def failed(self) -> list[ImageResult]:
        return [d for d in self.details if d.status == "failed"]


def load_fixations(source) -> list[tuple[float, float, float]]:
    """Fixations as ``(t, x, y)`` from a list or a JSON file.

    JSON may be a list of ``{"t", "x", "y"}`` objects (``t`` optional, defaults
    to list position), of ``[x, y]`` pairs, or an object with a
    ``"fixations"`` list.
    """
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as fh:
            data = json.load(fh)
    else:
        data = source
    if isinstance(data, dict):
        data = data.get("fixations", [])
    out = []
    for i, p in enumerate(data):
        if isinstance(p, dict):
            out.append((float(p.get("t", i)), float(p["x"]), float(p["y"])))
        elif hasattr(p, "x"):
            out.append(_point(p))
        elif len(p) == 2:
            out.append((float(i), float(p[0]), float(p[1])))
        else:
            out.append(_point(p))
    return out


def _image_map(item: DatasetItem, cfg: EvalConfig) -> SaliencyMap:
    if cfg.backbone == "builtin" or item.saliency is None:
        if item.image is None:
            raise ValueError("built-in backbone needs the input image")
        return spectral_residual_saliency(read_rgb(item.image))
    if item.image is not None:
        w, h = image_size(item.image)
    else:
        w, h = image_size(item.saliency)
    return load_saliency_map(item.saliency, w, h)


def evaluate_image(item: DatasetItem, cfg: EvalConfig, fixations, negatives=None) -> ImageResult:
    raw = _image_map(item, cfg)
    smap = normalize_map(raw, cfg.normalize) if cfg.normalize is not None else raw
    size = (smap.width, smap.height)
    masks = item.masks if isinstance(item.masks, list) else load_masks(item.masks, size=size)
    res = ImageResult(item.image_id, "skipped", n_masks=len(masks))
    if negatives and fixations:
        res.sauc = shuffled_auc(raw, [(x, y) for _, x, y in fixations], negatives)
    if not fixations:
        res.error = "no fixations"
        return res
    gt = gt_ranks_from_fixations(masks, fixations)
    res.n_fixated = len(gt)
    if len(gt) < 2:
        res.error = f"{len(gt)} fixated mask(s); need 2"
        return res
    scores = mask_scores(smap, cfg.grid, masks)
    ids = gt.ids
    pred_ranks = rankdata([-scores[i] for i in ids])
    res.sor = sor(pred_ranks, [gt.rank_of(i) for i in ids])
    res.predicted = [i for _, i in sorted(zip(pred_ranks.tolist(), ids))]
    res.ground_truth = ids
    res.status = "ok"
    return res


def evaluate_dataset(items: list[DatasetItem], cfg: EvalConfig | None = None) -> EvalResult:
    """Mean SOR over a dataset; images with fewer than 2 fixated masks are skipped.

    Per-image I/O or format errors are recorded, not raised. Aggregation
    follows dataset order, so results are bitwise reproducible.
    """
    cfg = cfg or EvalConfig()
    items = list(items)
    if not items:
        raise ValueError("dataset is empty")

    fixations: list = []
    errors: list = []
    for item in items:
        try:
            fixations.append(load_fixations(item.fixations))
            errors.append(None)
        except (OSError, ValueError, KeyError, TypeError) as exc:
            fixations.append(None)
            errors.append(f"fixations: {exc}")

    details = []
    for idx, item in enumerate(items):
        if errors[idx] is not None:
            details.append(ImageResult(item.image_id, "failed", error=errors[idx]))
            continue
        pool = [(x, y) for j, fx in enumerate(fixations) if j != idx and fx for _, x, y in fx]
        negatives = sample_negatives(pool, len(fixations[idx]), cfg.seed + idx, cfg.sauc_cap_factor)
        try:
            details.append(evaluate_image(item, cfg, fixations[idx], negatives))
        except (OSError, ValueError) as exc:
            log.warning("image %s failed: %s", item.image_id, exc)
            details.append(ImageResult(item.image_id, "failed", error=str(exc)))

    used = [(d.image_id, d.sor) for d in details if d.status == "ok"]
    mean = None
    if used:
        total = 0.0
        for _, s in used:
            total += s
        mean = total / len(used)
    saucs = [d.sauc for d in details if d.sauc is not None]
    mean_sauc = sum(saucs) / len(saucs) if saucs else None
    return EvalResult(mean, len(used), used, details, mean_sauc)


def load_manifest(path) -> list[DatasetItem]:
    """Read a manifest: JSON list of ``{id?, image, saliency, masks_dir, fixations}``.

    Relative paths resolve against the manifest's directory.
    """
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        entries = json.load(fh)
    if not isinstance(entries, list):
        raise ValueError(f"{path}: manifest must be a JSON list")
    base = path.parent

    def resolve(p):
        if p is None:
            return None
        p = Path(p)
        return str(p if p.is_absolute() else base / p)

    items = []
    for i, e in enumerate(entries):
        if not isinstance(e, dict):
            raise ValueError(f"{path}: entry {i} must be an object")
        masks = e.get("masks_dir", e.get("masks"))
        if masks is None or "fixations" not in e:
            raise ValueError(f"{path}: entry {i} needs 'masks_dir' and 'fixations'")
        image = e.get("image")
        image_id = str(e.get("id") or (Path(image).stem if image else f"image_{i}"))
        items.append(DatasetItem(image_id, resolve(image), resolve(e.get("saliency")),
                                 resolve(masks), resolve(e["fixations"])))
    return items
