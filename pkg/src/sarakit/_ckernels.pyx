# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_pykernels``; same signatures."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def segment_stats(values, bins, row_edges, col_edges, Py_ssize_t nbins):
    cdef const double[:, ::1] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef const long long[:, ::1] b = np.ascontiguousarray(bins, dtype=np.int64)
    cdef const long long[::1] re = np.ascontiguousarray(row_edges, dtype=np.int64)
    cdef const long long[::1] ce = np.ascontiguousarray(col_edges, dtype=np.int64)
    cdef Py_ssize_t kr = re.shape[0] - 1
    cdef Py_ssize_t kc = ce.shape[0] - 1
    cdef Py_ssize_t h = v.shape[0]
    cdef Py_ssize_t w = v.shape[1]
    hist_arr = np.zeros((kr, kc, nbins), dtype=np.int64)
    sums_arr = np.zeros((kr, kc), dtype=np.float64)
    cdef long long[:, :, ::1] hist = hist_arr
    cdef double[:, ::1] sums = sums_arr
    cdef Py_ssize_t[::1] col_seg = np.empty(w, dtype=np.intp)
    cdef Py_ssize_t r, c, sr = 0, sc
    for sc in range(kc):
        for c in range(ce[sc], ce[sc + 1]):
            col_seg[c] = sc
    for r in range(h):
        while r >= re[sr + 1]:
            sr += 1
        for c in range(w):
            sc = col_seg[c]
            hist[sr, sc, b[r, c]] += 1
            sums[sr, sc] += v[r, c]
    return hist_arr, sums_arr


def idt_windows(t, x, y, double dispersion, double min_duration):
    cdef const double[::1] tt = np.ascontiguousarray(t, dtype=np.float64)
    cdef const double[::1] xx = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[::1] yy = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t n = tt.shape[0]
    cdef Py_ssize_t i = 0, j, m
    cdef double xmin, xmax, ymin, ymax, nx0, nx1, ny0, ny1
    starts = []
    ends = []
    while i < n:
        j = i
        while j < n and tt[j] - tt[i] < min_duration:
            j += 1
        if j >= n:
            break
        xmin = xmax = xx[i]
        ymin = ymax = yy[i]
        for m in range(i + 1, j + 1):
            xmin = min(xmin, xx[m])
            xmax = max(xmax, xx[m])
            ymin = min(ymin, yy[m])
            ymax = max(ymax, yy[m])
        if (xmax - xmin) + (ymax - ymin) > dispersion:
            i += 1
            continue
        while j + 1 < n:
            nx0 = min(xmin, xx[j + 1])
            nx1 = max(xmax, xx[j + 1])
            ny0 = min(ymin, yy[j + 1])
            ny1 = max(ymax, yy[j + 1])
            if (nx1 - nx0) + (ny1 - ny0) > dispersion:
                break
            xmin = nx0
            xmax = nx1
            ymin = ny0
            ymax = ny1
            j += 1
        starts.append(i)
        ends.append(j)
        i = j + 1
    return np.asarray(starts, dtype=np.int64), np.asarray(ends, dtype=np.int64)
