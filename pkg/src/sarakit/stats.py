"""Nonparametric tests for demographic effects on click/gaze locations.

Kruskal-Wallis (with epsilon-squared effect size), Mann-Whitney U and
mean-centred Levene, with p-values from the incomplete gamma/beta functions
in :mod:`sarakit._special`.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np

from ._special import chi2_sf, f_sf, norm_sf

ALPHA = 0.05
DEFAULT_AGE_BINS = ((13, 20), (21, 35), (36, 50), (51, 70))
MWU_EXACT_MAX_N = 12
KW_SMALL_N = 15


class SmallSampleWarning(UserWarning):
    """Chi-square approximation used on a small sample."""


@dataclass(frozen=True)
class GroupedSamples:
    """Labelled groups of real-valued samples (e.g. click x-coordinates per age bin)."""

    groups: tuple[tuple[str, tuple[float, ...]], ...]

    def __init__(self, groups):
        if isinstance(groups, dict):
            groups = groups.items()
        norm = []
        for label, values in groups:
            vals = tuple(float(v) for v in values)
            if not vals:
                raise ValueError(f"group {label!r} is empty")
            norm.append((str(label), vals))
        object.__setattr__(self, "groups", tuple(norm))

    @property
    def labels(self) -> list[str]:
        return [g[0] for g in self.groups]

    @property
    def samples(self) -> list[tuple[float, ...]]:
        return [g[1] for g in self.groups]

    @property
    def n_total(self) -> int:
        return sum(len(s) for s in self.samples)


@dataclass(frozen=True)
class TestResult:
    __test__ = False  # not a pytest class

    statistic: float
    p_value: float
    effect_size: float | None = None
    alpha: float = ALPHA
    note: str | None = None

    @property
    def significant(self) -> bool:
        return self.p_value < self.alpha


def _as_groups(gs) -> GroupedSamples:
    return gs if isinstance(gs, GroupedSamples) else GroupedSamples(
        gs.items() if isinstance(gs, dict) else [(str(i), g) for i, g in enumerate(gs)]
    )


def rankdata(values) -> np.ndarray:
    """Fractional (average) ranks starting at 1."""
    a = np.asarray(values, dtype=np.float64)
    order = np.argsort(a, kind="mergesort")
    sorted_a = a[order]
    ranks = np.empty(a.size, dtype=np.float64)
    i = 0
    while i < a.size:
        j = i
        while j + 1 < a.size and sorted_a[j + 1] == sorted_a[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _tie_sum(values) -> float:
    _, counts = np.unique(np.asarray(values, dtype=np.float64), return_counts=True)
    return float(np.sum(counts.astype(np.float64) ** 3 - counts))


def epsilon_squared(h: float, n: int) -> float:
    """Kruskal-Wallis effect size H(N+1)/(N^2-1), clamped to [0, 1]."""
    if n < 2:
        raise ValueError("epsilon-squared needs N >= 2")
    return min(max(h * (n + 1) / (n * n - 1), 0.0), 1.0)


def kruskal_wallis(gs, alpha: float = ALPHA) -> TestResult:
    """Tie-corrected Kruskal-Wallis H with chi-square p-value (df = groups - 1)."""
    gs = _as_groups(gs)
    if len(gs.groups) < 2:
        raise ValueError("Kruskal-Wallis needs at least 2 groups")
    n = gs.n_total
    if n < 3:
        raise ValueError("Kruskal-Wallis needs at least 3 observations")
    pooled = np.concatenate([np.asarray(s) for s in gs.samples])
    ranks = rankdata(pooled)
    correction = 1.0 - _tie_sum(pooled) / (n**3 - n)
    if correction <= 0:
        return TestResult(0.0, 1.0, 0.0, alpha, "all values identical")
    if n < KW_SMALL_N:
        warnings.warn(f"Kruskal-Wallis chi-square approximation with N={n} < {KW_SMALL_N}",
                      SmallSampleWarning, stacklevel=2)
    acc, start = 0.0, 0
    for s in gs.samples:
        r = ranks[start : start + len(s)].sum()
        acc += r * r / len(s)
        start += len(s)
    h = (12.0 / (n * (n + 1)) * acc - 3.0 * (n + 1)) / correction
    h = max(float(h), 0.0)
    p = chi2_sf(h, len(gs.groups) - 1)
    return TestResult(h, min(max(p, 0.0), 1.0), epsilon_squared(h, n), alpha)


def mann_whitney_u(a, b, alpha: float = ALPHA, exact: bool | None = None) -> TestResult:
    """Two-sided Mann-Whitney U; statistic is min(U_a, U_b).

    Exact by enumerating all assignments of the pooled (tie-averaged) ranks
    when ``len(a) + len(b) <= 12``; otherwise the normal approximation with
    tie and continuity corrections.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    na, nb = a.size, b.size
    if na == 0 or nb == 0:
        raise ValueError("both samples must be non-empty")
    n = na + nb
    ranks = rankdata(np.concatenate([a, b]))
    ua = float(ranks[:na].sum()) - na * (na + 1) / 2.0
    u = min(ua, na * nb - ua)
    if exact is None:
        exact = n <= MWU_EXACT_MAX_N
    if exact:
        return TestResult(u, _mwu_exact_p(ranks, na), None, alpha, "exact")

    mu = na * nb / 2.0
    var = na * nb / 12.0 * ((n + 1) - _tie_sum(ranks) / (n * (n - 1)))
    if var <= 0:
        return TestResult(u, 1.0, None, alpha, "no variation")
    z = max(abs(ua - mu) - 0.5, 0.0) / math.sqrt(var)
    return TestResult(u, min(2.0 * norm_sf(z), 1.0), None, alpha, "normal approximation")


def _mwu_exact_p(ranks: np.ndarray, na: int) -> float:
    # doubled ranks are integers, so every comparison below is exact
    twice = [int(round(2 * r)) for r in ranks]
    n = len(twice)
    nb = n - na
    # 2*U_a - 2*mean = 2*R_a - na(na+1) - na*nb
    center = na * (na + 1) + na * nb
    observed = abs(sum(twice[:na]) - center)
    extreme = total = 0
    for combo in itertools.combinations(twice, na):
        total += 1
        if abs(sum(combo) - center) >= observed:
            extreme += 1
    return extreme / total


def levene(gs, alpha: float = ALPHA) -> TestResult:
    """Levene's test centred on group means; F(g-1, N-g) p-value.

    With no spread in the absolute deviations at all the test is degenerate
    (p = 1). Zero within-group spread but differing group levels gives
    W = inf, p = 0.
    """
    gs = _as_groups(gs)
    g = len(gs.groups)
    if g < 2:
        raise ValueError("Levene's test needs at least 2 groups")
    if any(len(s) < 2 for s in gs.samples):
        raise ValueError("Levene's test needs at least 2 samples per group")
    n = gs.n_total
    z = [np.abs(np.asarray(s) - np.mean(s)) for s in gs.samples]
    zbar_i = [float(zi.mean()) for zi in z]
    zbar = float(np.concatenate(z).mean())
    between = sum(len(zi) * (m - zbar) ** 2 for zi, m in zip(z, zbar_i))
    within = sum(float(((zi - m) ** 2).sum()) for zi, m in zip(z, zbar_i))
    total = between + within
    if total <= 0:
        return TestResult(math.nan, 1.0, None, alpha, "degenerate: no deviation spread")
    # relative cut-off absorbs rounding in |x - mean|
    if within <= 1e-14 * total:
        return TestResult(math.inf, 0.0, None, alpha, "zero within-group spread")
    w = (n - g) / (g - 1) * between / within
    return TestResult(float(w), min(max(f_sf(w, g - 1, n - g), 0.0), 1.0), None, alpha)


def _bin_label(lo, hi):
    return f"{lo}-{hi}"


def age_groups(logs, axis: str, bins=DEFAULT_AGE_BINS, include_hovers: bool = False):
    """Click (optionally also hover) coordinates on ``axis`` grouped by age bin.

    Bins are inclusive ``(lo, hi)`` age ranges; empty bins are dropped with a
    warning. Returns a list of ``(label, values)``.
    """
    axis = axis.upper()
    if axis not in ("X", "Y"):
        raise ValueError("axis must be 'X' or 'Y'")
    kinds = ("click", "mouse") if include_hovers else ("click",)
    out = []
    for lo, hi in bins:
        vals = []
        for log in logs:
            if lo <= log.age <= hi:
                vals.extend(s.x if axis == "X" else s.y
                            for s in log.samples if s.kind in kinds and not s.offscreen)
        if vals:
            out.append((_bin_label(lo, hi), vals))
        else:
            warnings.warn(f"age bin {_bin_label(lo, hi)} has no samples on axis {axis}; dropped")
    return out


@dataclass(frozen=True)
class AxisResult:
    axis: str
    bins_used: tuple[str, ...]
    kruskal: TestResult | None
    levene: TestResult | None
    note: str | None = None


def demographic_report(logs, image_id: str, axis: str, bins=DEFAULT_AGE_BINS,
                       include_hovers: bool = False, alpha: float = ALPHA) -> AxisResult:
    """Levene then Kruskal-Wallis across age bins for one image/group/axis."""
    logs = [lg for lg in logs if lg.image == image_id]
    groups = age_groups(logs, axis, bins, include_hovers)
    labels = tuple(lbl for lbl, _ in groups)
    if len(groups) < 2:
        return AxisResult(axis.upper(), labels, None, None, "fewer than 2 non-empty age bins")
    gs = GroupedSamples(groups)
    lev = None
    if all(len(v) >= 2 for _, v in groups):
        lev = levene(gs, alpha)
    try:
        kw = kruskal_wallis(gs, alpha)
    except ValueError as exc:
        return AxisResult(axis.upper(), labels, None, lev, str(exc))
    return AxisResult(axis.upper(), labels, kw, lev)


AGE_COLUMNS = (
    "image", "group", "n_participants",
    "p_x", "eps2_x", "significant_x", "levene_p_x",
    "p_y", "eps2_y", "significant_y", "levene_p_y",
)


def age_table(logs, bins=DEFAULT_AGE_BINS, include_hovers: bool = False,
             alpha: float = ALPHA) -> list[dict]:
    """One row per (image, group) with Kruskal-Wallis p and epsilon-squared on both axes."""
    logs = list(logs)
    keys = sorted({(lg.image, lg.group) for lg in logs})
    rows = []
    for image, group in keys:
        cell = [lg for lg in logs if lg.image == image and lg.group == group]
        row = {"image": image, "group": group, "n_participants": len(cell)}
        for axis in ("X", "Y"):
            res = demographic_report(cell, image, axis, bins, include_hovers, alpha)
            sfx = axis.lower()
            row[f"p_{sfx}"] = res.kruskal.p_value if res.kruskal else None
            row[f"eps2_{sfx}"] = res.kruskal.effect_size if res.kruskal else None
            row[f"significant_{sfx}"] = res.kruskal.significant if res.kruskal else None
            row[f"levene_p_{sfx}"] = res.levene.p_value if res.levene else None
        rows.append(row)
    return rows


GENDER_COLUMNS = ("image", "group", "n_male", "n_female", "u_x", "p_x", "u_y", "p_y")


def gender_table(logs, include_hovers: bool = False, alpha: float = ALPHA) -> list[dict]:
    """Mann-Whitney U of male vs female click coordinates per (image, group)."""
    logs = list(logs)
    kinds = ("click", "mouse") if include_hovers else ("click",)
    rows = []
    for image, group in sorted({(lg.image, lg.group) for lg in logs}):
        cell = [lg for lg in logs if lg.image == image and lg.group == group]
        row = {"image": image, "group": group,
               "n_male": sum(lg.gender == "male" for lg in cell),
               "n_female": sum(lg.gender == "female" for lg in cell)}
        for axis in ("x", "y"):
            vals = {"male": [], "female": []}
            for lg in cell:
                if lg.gender in vals:
                    vals[lg.gender].extend(getattr(s, axis) for s in lg.samples
                                           if s.kind in kinds and not s.offscreen)
            if vals["male"] and vals["female"]:
                res = mann_whitney_u(vals["male"], vals["female"], alpha)
                row[f"u_{axis}"], row[f"p_{axis}"] = res.statistic, res.p_value
            else:
                row[f"u_{axis}"] = row[f"p_{axis}"] = None
        rows.append(row)
    return rows
