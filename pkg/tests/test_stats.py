import itertools
import math
import warnings

import numpy as np
import pytest
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st

from sarakit.gaze import gaze_log_from_dict
from sarakit.stats import (
    GroupedSamples,
    SmallSampleWarning,
    age_groups,
    demographic_report,
    epsilon_squared,
    gender_table,
    kruskal_wallis,
    levene,
    mann_whitney_u,
    rankdata,
    age_table,
)


def test_rankdata_ties():
    np.testing.assert_array_equal(rankdata([10, 20, 20, 5]), [2, 3.5, 3.5, 1])


def test_grouped_samples_validation():
    with pytest.raises(ValueError):
        GroupedSamples({"a": []})
    gs = GroupedSamples([("a", [1, 2]), ("b", [3])])
    assert gs.labels == ["a", "b"] and gs.n_total == 3


def test_kruskal_worked_example():
    with pytest.warns(SmallSampleWarning):
        r = kruskal_wallis({"a": [1, 2, 3], "b": [4, 5, 6]})
    # mean ranks 2 and 5: H = 12/(6*7) * (36/3 + 225/3) - 21 = 27/7
    assert r.statistic == pytest.approx(27 / 7, rel=1e-14)
    assert r.effect_size == pytest.approx(27 / 7 * 7 / 35, rel=1e-14)
    assert r.p_value == pytest.approx(scipy.stats.chi2.sf(27 / 7, 1), rel=1e-12)


def test_kruskal_paper_scale_effect_is_significant():
    # four age bins, N = 250; effect of the size reported for a shifted layout
    rng = np.random.default_rng(96)
    groups = {f"g{i}": np.round(rng.normal(500 + [0, 0, 40, 40][i], 120, n))
              for i, n in enumerate((60, 70, 65, 55))}
    r = kruskal_wallis(groups)
    assert r.p_value == pytest.approx(0.015, abs=1e-3)
    assert r.effect_size == pytest.approx(0.042, abs=1e-3)
    assert r.significant


@settings(max_examples=40, deadline=None)
@given(st.lists(st.lists(st.integers(0, 20), min_size=2, max_size=12), min_size=2, max_size=4))
def test_kruskal_matches_scipy(groups):
    pooled = [v for g in groups for v in g]
    if len(set(pooled)) < 2:
        return
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        r = kruskal_wallis(groups)
    h, p = scipy.stats.kruskal(*groups)
    assert r.statistic == pytest.approx(h, rel=1e-10, abs=1e-12)
    assert r.p_value == pytest.approx(p, rel=1e-8, abs=1e-14)
    assert r.effect_size == pytest.approx(epsilon_squared(h, len(pooled)), rel=1e-10, abs=1e-12)


def test_kruskal_degenerate():
    r = kruskal_wallis({"a": [3] * 10, "b": [3] * 10})
    assert r.p_value == 1.0 and not r.significant
    with pytest.raises(ValueError):
        kruskal_wallis({"a": [1, 2, 3]})


def test_mwu_exact_small_case():
    r = mann_whitney_u([1, 2], [3, 4])
    assert r.statistic == 0.0
    assert r.p_value == pytest.approx(2 / 6)
    assert r.note == "exact"


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=1, max_size=6),
       st.lists(st.floats(-50, 50), min_size=1, max_size=6))
def test_mwu_exact_matches_scipy_without_ties(a, b):
    if len(set(a + b)) < len(a + b):
        return
    r = mann_whitney_u(a, b)
    ref = scipy.stats.mannwhitneyu(a, b, method="exact")
    assert r.p_value == pytest.approx(ref.pvalue, rel=1e-12)
    assert r.statistic == min(ref.statistic, len(a) * len(b) - ref.statistic)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(0, 30), min_size=8, max_size=40),
       st.lists(st.integers(0, 30), min_size=8, max_size=40))
def test_mwu_asymptotic_matches_scipy(a, b):
    if len(set(a + b)) < 2:
        return
    r = mann_whitney_u(a, b, exact=False)
    ref = scipy.stats.mannwhitneyu(a, b, method="asymptotic", use_continuity=True)
    assert r.p_value == pytest.approx(ref.pvalue, rel=1e-9, abs=1e-14)


def test_levene_matches_scipy():
    rng = np.random.default_rng(1)
    groups = [rng.normal(0, s, n) for s, n in ((1, 15), (2, 20), (1.5, 12))]
    r = levene(groups)
    ref = scipy.stats.levene(*groups, center="mean")
    assert r.statistic == pytest.approx(ref.statistic, rel=1e-10)
    assert r.p_value == pytest.approx(ref.pvalue, rel=1e-9)


def test_levene_two_point_groups_degenerate():
    # with two values per group |x - mean| is the same for both points
    r = levene([[1, 5], [3, 3.0001]])
    assert r.statistic == math.inf and r.p_value == 0.0
    r = levene([[1, 3], [5, 7]])
    assert math.isnan(r.statistic) and r.p_value == 1.0


def _log(pid, age, gender, clicks, image="img", group="CTRL"):
    return gaze_log_from_dict({
        "participant": {"id": pid, "age": age, "gender": gender, "group": group},
        "image": image,
        "samples": [{"t": i * 10, "x": x, "y": y, "kind": "click"} for i, (x, y) in enumerate(clicks)]
        + [{"t": 1000, "x": 1, "y": 1, "kind": "mouse"}],
    })


def test_age_groups_clicks_only_and_empty_bins():
    logs = [_log("a", 15, "male", [(10, 20), (11, 21)]), _log("b", 40, "female", [(30, 40)])]
    with pytest.warns(UserWarning, match="no samples"):
        groups = age_groups(logs, "x")
    assert groups == [("13-20", [10.0, 11.0]), ("36-50", [30.0])]
    with pytest.warns(UserWarning):
        groups = age_groups(logs, "Y", include_hovers=True)
    assert groups[0] == ("13-20", [20.0, 21.0, 1.0])


def _population(seed, n=40):
    rng = np.random.default_rng(seed)
    logs = []
    for i in range(n):
        age = int(rng.integers(13, 71))
        clicks = rng.normal((400 + age * 2, 300), 50, (3, 2))
        logs.append(_log(f"p{i}", age, ("male", "female")[i % 2], clicks, group=("CTRL", "EXPR")[i % 2]))
    return logs


def test_age_table_and_gender_rows():
    logs = _population(5)
    rows = age_table(logs)
    assert [(r["image"], r["group"]) for r in rows] == [("img", "CTRL"), ("img", "EXPR")]
    for r in rows:
        assert 0 <= r["p_x"] <= 1 and 0 <= r["eps2_x"] <= 1
        assert r["significant_x"] == (r["p_x"] < 0.05)
    g = gender_table(logs)
    assert g[0]["n_male"] == 20 and g[0]["n_female"] == 0
    assert g[0]["p_x"] is None  # only one gender in that cell


def test_demographic_report_single_bin():
    logs = [_log("a", 15, "male", [(1, 2), (3, 4)])]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = demographic_report(logs, "img", "x")
    assert res.kruskal is None and "fewer than 2" in res.note


def test_mwu_exact_enumeration_oracle_with_ties():
    a, b = [1, 2, 2, 3], [2, 3, 3, 4, 5]
    pooled = a + b
    r = rankdata(pooled)
    ua = sum(r[:4]) - 10
    dev = abs(ua - 10)
    hits = total = 0
    for idx in itertools.combinations(range(9), 4):
        u = sum(r[i] for i in idx) - 10
        total += 1
        hits += abs(u - 10) >= dev - 1e-9
    assert mann_whitney_u(a, b).p_value == hits / total
