import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sarakit.gaze import (
    Aoi,
    Fixation,
    GazeLogError,
    Sample,
    aoi_metrics,
    attention_shift_report,
    build_heatmap,
    detect_fixations,
    gaze_log_from_dict,
    group_metrics,
    load_aoi_png,
    load_gaze_logs,
    parse_gaze_log,
)

TOY = Path(__file__).parent / "fixtures" / "aoi_toy"


def base_log(**over):
    obj = {"participant": {"id": "p1", "age": 25, "gender": "Female", "group": "ctrl"},
           "image": "img", "samples": [{"t": 0, "x": 1, "y": 2}]}
    obj.update(over)
    return obj


def test_parse_normalises_fields():
    lg = gaze_log_from_dict(base_log())
    assert (lg.gender, lg.group, lg.samples[0].kind) == ("female", "CTRL", "gaze")


@pytest.mark.parametrize("mutate,field", [
    (lambda o: o["participant"].pop("age"), "age"),
    (lambda o: o["participant"].update(age=-3), "age"),
    (lambda o: o["participant"].update(gender="robot"), "gender"),
    (lambda o: o["participant"].update(group="B"), "group"),
    (lambda o: o.update(samples=[{"t": 5, "x": 0, "y": 0}, {"t": 1, "x": 0, "y": 0}]), "samples[1].t"),
    (lambda o: o.update(samples=[{"t": 0, "x": "a", "y": 0}]), "samples[0].x"),
    (lambda o: o.update(samples=[{"t": 0, "x": 0, "y": 0, "kind": "blink"}]), "kind"),
    (lambda o: o.update(fixations=[{"t": 0, "duration": -1, "x": 0, "y": 0}]), "duration"),
])
def test_parse_errors_name_the_field(mutate, field):
    obj = base_log()
    mutate(obj)
    with pytest.raises(GazeLogError, match=field.replace("[", r"\[").replace("]", r"\]")):
        gaze_log_from_dict(obj)


def test_malformed_json_reports_line(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n "participant": \n}')
    with pytest.raises(GazeLogError, match="line 3"):
        parse_gaze_log(p)
    with pytest.raises(GazeLogError):
        load_gaze_logs(tmp_path / "missing")


def test_offscreen_flag():
    lg = gaze_log_from_dict(base_log(width=10, height=10, samples=[
        {"t": 0, "x": 5, "y": 5}, {"t": 1, "x": 10, "y": 5}, {"t": 2, "x": -1, "y": 5}]))
    assert [s.offscreen for s in lg.samples] == [False, True, True]


def _samples(points, dt=10.0):
    return [Sample(i * dt, x, y) for i, (x, y) in enumerate(points)]


def test_idt_single_dwell():
    pts = [(100 + i % 3, 100) for i in range(21)]  # 200 ms
    (fx,) = detect_fixations(_samples(pts))
    assert fx.t_start == 0 and fx.duration == 200
    assert fx.x == pytest.approx(np.mean([p[0] for p in pts]))


def test_idt_two_dwells_and_saccade():
    pts = [(10, 10)] * 15 + [(200, 300)] + [(400, 50)] * 15
    fixes = detect_fixations(_samples(pts))
    assert [(f.x, f.y) for f in fixes] == [(10, 10), (400, 50)]


def test_idt_too_short_or_too_spread():
    assert detect_fixations(_samples([(0, 0)] * 5)) == []  # 40 ms
    assert detect_fixations(_samples([(i * 30, 0) for i in range(30)])) == []


def test_idt_skips_offscreen_and_kinds():
    samples = [Sample(i * 10.0, 50, 50, "mouse") for i in range(20)]
    assert detect_fixations(samples, kinds=("gaze",)) == []
    off = [Sample(i * 10.0, 50, 50, offscreen=True) for i in range(20)]
    assert detect_fixations(off) == []


def brute_idt(t, x, y, disp, dur):
    # textbook I-DT, written independently of the kernels
    out, i, n = [], 0, len(t)
    while i < n:
        j = i
        while j < n and t[j] - t[i] < dur:
            j += 1
        if j >= n:
            break
        d = lambda a, b: (max(x[a:b + 1]) - min(x[a:b + 1])) + (max(y[a:b + 1]) - min(y[a:b + 1]))
        if d(i, j) <= disp:
            while j + 1 < n and d(i, j + 1) <= disp:
                j += 1
            out.append((i, j))
            i = j + 1
        else:
            i += 1
    return out


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 40), st.integers(0, 60), st.integers(0, 60)),
                min_size=1, max_size=60))
def test_idt_matches_textbook(rows):
    t = np.cumsum([r[0] for r in rows]).astype(float)
    x = [float(r[1]) for r in rows]
    y = [float(r[2]) for r in rows]
    got = detect_fixations([Sample(a, b, c) for a, b, c in zip(t, x, y)], 25, 100)
    ref = brute_idt(list(t), x, y, 25, 100)
    assert [(f.t_start, f.duration) for f in got] == [(t[i], t[j] - t[i]) for i, j in ref]


def test_heatmap_peak_and_range():
    m = build_heatmap([Fixation(0, 100, 30.5, 20.5)], 60, 40, sigma_px=5)
    assert m.values.max() == 255 and m.values.min() == 0
    assert np.unravel_index(np.argmax(m.values), m.values.shape) == (20, 30)


def test_heatmap_empty_and_validation():
    assert not build_heatmap([], 10, 10).values.any()
    with pytest.raises(ValueError):
        build_heatmap([], 10, 10, weight="area")


def test_heatmap_duration_weighting():
    fx = [Fixation(0, 900, 10.5, 10.5), Fixation(1000, 100, 50.5, 10.5)]
    dur = build_heatmap(fx, 60, 20, sigma_px=3).values
    cnt = build_heatmap(fx, 60, 20, sigma_px=3, weight="count").values
    assert dur[10, 10] > dur[10, 50]
    assert cnt[10, 10] == pytest.approx(cnt[10, 50])


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 40), st.floats(0, 30), st.floats(1, 500)), min_size=1, max_size=15),
       st.randoms())
def test_heatmap_permutation_invariant(points, rnd):
    shuffled = list(points)
    rnd.shuffle(shuffled)
    a = build_heatmap(points, 40, 30, sigma_px=4).values
    b = build_heatmap(shuffled, 40, 30, sigma_px=4).values
    assert np.array_equal(a, b)


def _fix_log(group, fixations, pid="p"):
    return gaze_log_from_dict(base_log(
        participant={"id": pid, "age": 30, "gender": "male", "group": group},
        fixations=[{"t": t, "duration": d, "x": x, "y": y} for t, d, x, y in fixations]))


AOI = Aoi("btn", np.pad(np.ones((10, 10), bool), ((10, 10), (10, 10))))


def test_toy_log_metrics():
    lg = parse_gaze_log(TOY / "ctrl_toy.json")
    m = group_metrics([lg], load_aoi_png(TOY / "aoi.png"))
    assert m.time_viewed_pct == 5.0
    assert m.avg_fixations == 1
    assert m.avg_first_view_s == 2.0
    assert m.revisitors_pct == 0.0 and m.avg_revisits == 0.0


def test_visits_and_revisits():
    inside, outside = (15, 15), (1, 1)
    logs = [
        _fix_log("CTRL", [(0, 100, *inside), (200, 100, *outside), (400, 100, *inside), (600, 100, *inside)], "a"),
        _fix_log("CTRL", [(0, 100, *outside)], "b"),
    ]
    m = group_metrics(logs, AOI, viewing_duration_ms=1000)
    assert m.avg_fixations == 1.5
    assert m.revisitors_pct == 50.0
    assert m.avg_revisits == 1.0  # only participant a visited (twice)
    assert m.time_viewed_pct == pytest.approx((30.0 + 0.0) / 2)
    assert m.avg_first_view_s == 0.0


def test_time_viewed_is_clipped():
    lg = _fix_log("CTRL", [(0, 20_000, 15, 15)])
    assert group_metrics([lg], AOI).time_viewed_pct == 100.0


def test_group_split_and_report_winners():
    ctrl = [_fix_log("CTRL", [(500, 400, 15, 15)], "c")]
    expr = [_fix_log("EXPR", [(100, 100, 1, 1)], "e")]
    split = aoi_metrics(ctrl + expr, AOI)
    assert split["CTRL"].avg_fixations == 1 and split["EXPR"].avg_fixations == 0
    rep = attention_shift_report(ctrl, expr, AOI, 1, 3)
    assert rep.winners["time_viewed_pct"] == "EXPR"
    assert rep.winners["avg_first_view_s"] == "EXPR"  # EXPR never looked
    assert rep.winners["sara_rank"] == "EXPR"
    assert rep.winners["revisitors_pct"] == "tie"
    assert [r["metric"] for r in rep.rows()][0] == "time_viewed_pct"
    assert attention_shift_report(ctrl, expr, AOI, None, 2).winners["sara_rank"] == "n/a"
    with pytest.raises(ValueError):
        attention_shift_report([], expr, AOI, 1, 1)


def test_exported_fixations_take_precedence():
    lg = _fix_log("CTRL", [(0, 300, 15, 15)])
    lg.samples = [Sample(i * 10.0, 1, 1) for i in range(50)]
    assert group_metrics([lg], AOI).avg_fixations == 1


def test_load_logs_dir_sorted(tmp_path):
    for name in ("b.json", "a.json"):
        (tmp_path / name).write_text(json.dumps(base_log(image=name)))
    assert [lg.image for lg in load_gaze_logs(tmp_path)] == ["a.json", "b.json"]
