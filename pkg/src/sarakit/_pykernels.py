"""Pure-Python/numpy implementations of the hot kernels.

These are the reference versions; ``_ckernels.pyx`` mirrors them exactly and
the test suite checks the two agree.
"""

import numpy as np


def segment_stats(values, bins, row_edges, col_edges, nbins):
    """Per-segment level histograms and value sums over a rectangular grid.

    Returns ``(hist, sums)`` with shapes ``(k_rows, k_cols, nbins)`` and
    ``(k_rows, k_cols)``. ``bins`` must hold integers in ``[0, nbins)``.
    """
    values = np.asarray(values, dtype=np.float64)
    bins = np.asarray(bins, dtype=np.int64)
    row_edges = np.asarray(row_edges, dtype=np.int64)
    col_edges = np.asarray(col_edges, dtype=np.int64)
    kr, kc = len(row_edges) - 1, len(col_edges) - 1

    row_seg = np.repeat(np.arange(kr), np.diff(row_edges))
    col_seg = np.repeat(np.arange(kc), np.diff(col_edges))
    seg = (row_seg[:, None] * kc + col_seg[None, :]).ravel()

    hist = np.bincount(seg * nbins + bins.ravel(), minlength=kr * kc * nbins)
    # bincount accumulates in row-major order, same as the compiled loop
    sums = np.bincount(seg, weights=values.ravel(), minlength=kr * kc)
    return hist.reshape(kr, kc, nbins).astype(np.int64), sums.reshape(kr, kc)


def idt_windows(t, x, y, dispersion, min_duration):
    """Dispersion-threshold (I-DT) grouping of an ordered sample stream.

    Returns two int64 arrays with the inclusive first/last sample index of
    each fixation window.
    """
    t = [float(v) for v in t]
    x = [float(v) for v in x]
    y = [float(v) for v in y]
    n = len(t)
    starts, ends = [], []
    i = 0
    while i < n:
        j = i
        while j < n and t[j] - t[i] < min_duration:
            j += 1
        if j >= n:
            break
        xmin = xmax = x[i]
        ymin = ymax = y[i]
        for m in range(i + 1, j + 1):
            xmin = min(xmin, x[m])
            xmax = max(xmax, x[m])
            ymin = min(ymin, y[m])
            ymax = max(ymax, y[m])
        if (xmax - xmin) + (ymax - ymin) > dispersion:
            i += 1
            continue
        while j + 1 < n:
            nx0, nx1 = min(xmin, x[j + 1]), max(xmax, x[j + 1])
            ny0, ny1 = min(ymin, y[j + 1]), max(ymax, y[j + 1])
            if (nx1 - nx0) + (ny1 - ny0) > dispersion:
                break
            xmin, xmax, ymin, ymax = nx0, nx1, ny0, ny1
            j += 1
        starts.append(i)
        ends.append(j)
        i = j + 1
    return np.asarray(starts, dtype=np.int64), np.asarray(ends, dtype=np.int64)
