"""Eye/mouse log ingestion, fixation detection, heatmaps and AOI metrics.

Gaze-log JSON (one participant viewing one image)::

    {
      "participant": {"id": "p01", "age": 27, "gender": "female", "group": "CTRL"},
      "image": "the_shift",
      "width": 1280, "height": 720,                       # optional screen bounds
      "samples": [{"t": 0, "x": 640, "y": 360, "kind": "mouse"}, ...],
      "fixations": [{"t": 120, "duration": 300, "x": 600, "y": 200}, ...]  # optional
    }

``t`` is milliseconds since stimulus onset and must be non-decreasing.
``kind`` is ``gaze``, ``mouse`` or ``click`` (default ``gaze``). When
``fixations`` is present (eye trackers export them) it is used as-is;
otherwise fixations are detected from the samples with I-DT.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from . import kernels
from .backbone import SaliencyMap

GENDERS = ("male", "female", "other", "rather_not_say")
GROUPS = ("CTRL", "EXPR")
KINDS = ("gaze", "mouse", "click")


class GazeLogError(ValueError):
    """A gaze log does not match the schema."""


@dataclass(frozen=True)
class Sample:
    t: float
    x: float
    y: float
    kind: str = "gaze"
    offscreen: bool = False


@dataclass(frozen=True)
class Fixation:
    t_start: float
    duration: float
    x: float
    y: float

    @property
    def t_end(self) -> float:
        return self.t_start + self.duration


@dataclass
class GazeLog:
    participant_id: str
    age: int
    gender: str
    group: str
    image: str
    samples: list[Sample] = field(default_factory=list)
    fixations: list[Fixation] | None = None
    width: int | None = None
    height: int | None = None
    source: str | None = None


@dataclass(frozen=True)
class Aoi:
    id: str
    pixels: np.ndarray

    def __post_init__(self):
        px = np.array(self.pixels, dtype=bool)
        if px.ndim != 2 or not px.any():
            raise ValueError(f"AOI {self.id!r} must be a non-empty 2D mask")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    def contains(self, x: float, y: float) -> bool:
        col, row = math.floor(x), math.floor(y)
        h, w = self.pixels.shape
        return 0 <= row < h and 0 <= col < w and bool(self.pixels[row, col])


def _number(value, where):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise GazeLogError(f"{where}: expected a finite number, got {value!r}")
    return float(value)


def _require(obj, key, where):
    if not isinstance(obj, dict) or key not in obj:
        raise GazeLogError(f"{where}: missing required field {key!r}")
    return obj[key]


def _gender(value, where):
    g = str(value).strip().lower().replace(" ", "_").replace("-", "_")
    if g not in GENDERS:
        raise GazeLogError(f"{where}: gender must be one of {GENDERS}, got {value!r}")
    return g


def gaze_log_from_dict(obj: dict, source: str = "<log>") -> GazeLog:
    """Validate a decoded gaze-log object; errors name the offending field."""
    if not isinstance(obj, dict):
        raise GazeLogError(f"{source}: top level must be an object")
    part = _require(obj, "participant", source)
    where = f"{source}: participant"
    pid = str(_require(part, "id", where))
    age_raw = _require(part, "age", where)
    age = _number(age_raw, f"{where}.age")
    if age < 0 or age != int(age):
        raise GazeLogError(f"{where}.age: expected a non-negative integer, got {age_raw!r}")
    gender = _gender(_require(part, "gender", where), f"{where}.gender")
    group = str(_require(part, "group", where)).strip().upper()
    if group not in GROUPS:
        raise GazeLogError(f"{where}.group: must be one of {GROUPS}, got {part['group']!r}")
    image = str(_require(obj, "image", source))

    width = height = None
    if obj.get("width") is not None or obj.get("height") is not None:
        width = int(_number(_require(obj, "width", source), f"{source}: width"))
        height = int(_number(_require(obj, "height", source), f"{source}: height"))
        if width <= 0 or height <= 0:
            raise GazeLogError(f"{source}: width/height must be positive")

    raw_samples = _require(obj, "samples", source)
    if not isinstance(raw_samples, list):
        raise GazeLogError(f"{source}: samples must be a list")
    samples = []
    prev_t = -math.inf
    for i, s in enumerate(raw_samples):
        w = f"{source}: samples[{i}]"
        t = _number(_require(s, "t", w), f"{w}.t")
        x = _number(_require(s, "x", w), f"{w}.x")
        y = _number(_require(s, "y", w), f"{w}.y")
        kind = str(s.get("kind", "gaze")).lower()
        if kind not in KINDS:
            raise GazeLogError(f"{w}.kind: must be one of {KINDS}, got {s.get('kind')!r}")
        if t < prev_t:
            raise GazeLogError(f"{w}.t: timestamps must be non-decreasing ({t:g} after {prev_t:g})")
        prev_t = t
        off = x < 0 or y < 0 or (width is not None and (x >= width or y >= height))
        samples.append(Sample(t, x, y, kind, off))

    fixations = None
    if obj.get("fixations") is not None:
        fixations = []
        prev_end = -math.inf
        for i, f in enumerate(obj["fixations"]):
            w = f"{source}: fixations[{i}]"
            t = _number(_require(f, "t", w), f"{w}.t")
            d = _number(_require(f, "duration", w), f"{w}.duration")
            if d < 0:
                raise GazeLogError(f"{w}.duration: must be non-negative")
            if t < prev_end:
                raise GazeLogError(f"{w}.t: fixations must be time-ordered and non-overlapping")
            fixations.append(Fixation(t, d, _number(_require(f, "x", w), f"{w}.x"),
                                      _number(_require(f, "y", w), f"{w}.y")))
            prev_end = t + d
    return GazeLog(pid, int(age), gender, group, image, samples, fixations, width, height, source)


def parse_gaze_log(path) -> GazeLog:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise GazeLogError(f"{path}: cannot read: {exc}") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GazeLogError(f"{path}: line {exc.lineno}: invalid JSON: {exc.msg}") from exc
    return gaze_log_from_dict(obj, str(path))


def load_gaze_logs(sources) -> list[GazeLog]:
    """Parse logs from files and/or directories (``*.json``), in sorted path order."""
    if isinstance(sources, (str, Path)):
        sources = [sources]
    paths = []
    for src in sources:
        src = Path(src)
        if src.is_dir():
            paths.extend(sorted(src.glob("*.json")))
        elif src.is_file():
            paths.append(src)
        else:
            raise GazeLogError(f"{src}: no such file or directory")
    return [parse_gaze_log(p) for p in sorted(paths)]


def detect_fixations(samples, dispersion_px: float = 25.0, min_duration_ms: float = 100.0,
                     kinds=KINDS) -> list[Fixation]:
    """I-DT fixation detection.

    Accepts a :class:`GazeLog` or a sequence of :class:`Sample`. Off-screen
    samples and kinds not listed are ignored. Dispersion is
    ``(max x - min x) + (max y - min y)``; a window qualifies once it spans at
    least ``min_duration_ms``.
    """
    if isinstance(samples, GazeLog):
        samples = samples.samples
    pts = [s for s in samples if not s.offscreen and s.kind in kinds]
    if not pts:
        return []
    t = np.array([s.t for s in pts])
    x = np.array([s.x for s in pts])
    y = np.array([s.y for s in pts])
    starts, ends = kernels.idt_windows(t, x, y, float(dispersion_px), float(min_duration_ms))
    out = []
    for i, j in zip(starts.tolist(), ends.tolist()):
        out.append(Fixation(float(t[i]), float(t[j] - t[i]),
                            float(x[i : j + 1].mean()), float(y[i : j + 1].mean())))
    return out


def log_fixations(log: GazeLog, dispersion_px: float = 25.0, min_duration_ms: float = 100.0):
    """Exported fixations when the log carries them, otherwise I-DT on the samples."""
    if log.fixations is not None:
        return list(log.fixations)
    return detect_fixations(log, dispersion_px, min_duration_ms)


def _weighted_points(points, weight):
    out = []
    for p in points:
        if isinstance(p, Fixation):
            w = p.duration if weight == "duration" else 1.0
            out.append((p.x, p.y, w))
        elif isinstance(p, Sample):
            if not p.offscreen:
                out.append((p.x, p.y, 1.0))
        else:
            px, py, *rest = p
            w = rest[0] if (rest and weight == "duration") else 1.0
            out.append((float(px), float(py), float(w)))
    return out


def build_heatmap(points, width: int, height: int, sigma_px: float = 25.0,
                  weight: str = "duration") -> SaliencyMap:
    """Sum of isotropic Gaussians at the points, min-max scaled to [0, 255].

    ``points`` may hold :class:`Fixation` (weighted by duration unless
    ``weight="count"``), :class:`Sample` (unit weight) or ``(x, y[, w])``
    tuples. Points are summed in a canonical order, so the output does not
    depend on input order. No points gives an all-zero map.
    """
    if weight not in ("duration", "count"):
        raise ValueError("weight must be 'duration' or 'count'")
    if width <= 0 or height <= 0:
        raise ValueError("heatmap dimensions must be positive")
    pts = sorted(_weighted_points(points, weight))
    heat = np.zeros((height, width))
    if pts:
        arr = np.array(pts)
        xs = np.arange(width) + 0.5
        ys = np.arange(height) + 0.5
        inv = 1.0 / (2.0 * sigma_px * sigma_px)
        for lo in range(0, len(arr), 1024):
            chunk = arr[lo : lo + 1024]
            gx = np.exp(-((xs[None, :] - chunk[:, 0:1]) ** 2) * inv)
            gy = np.exp(-((ys[None, :] - chunk[:, 1:2]) ** 2) * inv) * chunk[:, 2:3]
            heat += gy.T @ gx
    lo_v, hi_v = heat.min(), heat.max()
    if hi_v <= lo_v:
        return SaliencyMap(np.zeros_like(heat))
    return SaliencyMap((heat - lo_v) / (hi_v - lo_v) * 255.0)


@dataclass(frozen=True)
class AoiMetrics:
    """Attention on one AOI for one participant group; ``None`` means absent."""

    participants: int
    time_viewed_pct: float | None
    avg_fixations: float | None
    revisitors_pct: float | None
    avg_revisits: float | None
    avg_first_view_s: float | None


def _visits(inside: list[bool]) -> int:
    visits, prev = 0, False
    for flag in inside:
        if flag and not prev:
            visits += 1
        prev = flag
    return visits


def group_metrics(logs, aoi: Aoi, viewing_duration_ms: float = 10_000.0,
                  dispersion_px: float = 25.0, min_duration_ms: float = 100.0) -> AoiMetrics:
    """Attention metrics on one AOI, averaged over one group's participants."""
    logs = list(logs)
    if not logs:
        return AoiMetrics(0, None, None, None, None, None)
    if viewing_duration_ms <= 0:
        raise ValueError("viewing_duration_ms must be positive")
    viewed, counts, visit_counts, first_views = [], [], [], []
    for log in logs:
        fixes = log_fixations(log, dispersion_px, min_duration_ms)
        inside = [aoi.contains(f.x, f.y) for f in fixes]
        dwell = sum(f.duration for f, flag in zip(fixes, inside) if flag)
        viewed.append(min(dwell / viewing_duration_ms, 1.0) * 100.0)
        counts.append(sum(inside))
        visit_counts.append(_visits(inside))
        first = next((f.t_start for f, flag in zip(fixes, inside) if flag), None)
        if first is not None:
            first_views.append(first / 1000.0)
    n = len(logs)
    visitors = [v for v in visit_counts if v >= 1]
    return AoiMetrics(
        participants=n,
        time_viewed_pct=math.fsum(viewed) / n,
        avg_fixations=sum(counts) / n,
        revisitors_pct=100.0 * sum(1 for v in visit_counts if v >= 2) / n,
        avg_revisits=(sum(v - 1 for v in visitors) / len(visitors)) if visitors else 0.0,
        avg_first_view_s=(math.fsum(first_views) / len(first_views)) if first_views else None,
    )


def aoi_metrics(logs, aoi: Aoi, viewing_duration_ms: float = 10_000.0,
                dispersion_px: float = 25.0, min_duration_ms: float = 100.0) -> dict[str, AoiMetrics]:
    """Metrics per participant group (``CTRL`` and ``EXPR``)."""
    logs = list(logs)
    return {
        g: group_metrics([lg for lg in logs if lg.group == g], aoi, viewing_duration_ms,
                         dispersion_px, min_duration_ms)
        for g in GROUPS
    }


# lower is better for the first four (less distraction), higher for the rest
METRIC_DIRECTIONS = {
    "time_viewed_pct": "down",
    "avg_fixations": "down",
    "revisitors_pct": "down",
    "avg_revisits": "down",
    "avg_first_view_s": "up",
    "sara_rank": "up",
}


@dataclass(frozen=True)
class AoiReport:
    aoi_id: str
    ctrl: dict
    expr: dict
    winners: dict

    def rows(self) -> list[dict]:
        return [
            {"metric": m, "direction": d, "CTRL": self.ctrl[m], "EXPR": self.expr[m],
             "winner": self.winners[m]}
            for m, d in METRIC_DIRECTIONS.items()
        ]


def _winner(ctrl, expr, direction):
    # an absent first view means nobody looked: the best possible outcome
    if direction == "up":
        ctrl = math.inf if ctrl is None else ctrl
        expr = math.inf if expr is None else expr
    elif ctrl is None or expr is None:
        return "tie" if ctrl is None and expr is None else ("EXPR" if ctrl is None else "CTRL")
    if ctrl == expr or (math.isfinite(ctrl) and math.isfinite(expr)
                        and math.isclose(ctrl, expr, rel_tol=1e-12, abs_tol=1e-12)):
        return "tie"
    better_ctrl = ctrl < expr if direction == "down" else ctrl > expr
    return "CTRL" if better_ctrl else "EXPR"


def attention_shift_report(ctrl_logs, expr_logs, aoi: Aoi, sara_ctrl_rank, sara_expr_rank,
                           viewing_duration_ms: float = 10_000.0, dispersion_px: float = 25.0,
                           min_duration_ms: float = 100.0) -> AoiReport:
    """Compare the two interface versions on one AOI and mark the better group per metric."""
    ctrl_logs, expr_logs = list(ctrl_logs), list(expr_logs)
    if not ctrl_logs or not expr_logs:
        raise ValueError("both CTRL and EXPR groups need at least one log")
    args = (aoi, viewing_duration_ms, dispersion_px, min_duration_ms)
    c = vars(group_metrics(ctrl_logs, *args)).copy()
    e = vars(group_metrics(expr_logs, *args)).copy()
    c["sara_rank"] = None if sara_ctrl_rank is None else float(sara_ctrl_rank)
    e["sara_rank"] = None if sara_expr_rank is None else float(sara_expr_rank)
    winners = {m: _winner(c[m], e[m], d) for m, d in METRIC_DIRECTIONS.items()}
    if c["sara_rank"] is None or e["sara_rank"] is None:
        winners["sara_rank"] = "n/a"
    return AoiReport(aoi.id, c, e, winners)


def load_aoi_png(path, aoi_id: str | None = None) -> Aoi:
    path = Path(path)
    try:
        with Image.open(path) as img:
            arr = np.asarray(img.convert("L")) >= 128
    except (OSError, SyntaxError) as exc:
        raise ValueError(f"cannot read AOI mask {path}: {exc}") from exc
    return Aoi(aoi_id or path.stem, arr)
