# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled raster kernels. Must stay bit-compatible with ``_fallback.py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport floor, ceil, sqrt

cnp.import_array()


cdef inline double _seg_dist2(double px, double py, double x0, double y0,
                              double dx, double dy, double len2) nogil:
    cdef double t = 0.0
    if len2 > 0.0:
        t = ((px - x0) * dx + (py - y0) * dy) / len2
        if t < 0.0:
            t = 0.0
        elif t > 1.0:
            t = 1.0
    cdef double ex = px - (x0 + t * dx)
    cdef double ey = py - (y0 + t * dy)
    return ex * ex + ey * ey


def draw_segment(double[:, ::1] img, double x0, double y0, double x1, double y1,
                 double half_width, double value):
    """Set every pixel whose centre lies within ``half_width`` of the segment."""
    cdef Py_ssize_t h = img.shape[0], w = img.shape[1]
    cdef Py_ssize_t r, c, r0, r1, c0, c1
    cdef double dx = x1 - x0, dy = y1 - y0
    cdef double len2 = dx * dx + dy * dy
    cdef double hw2 = half_width * half_width
    c0 = <Py_ssize_t>max(0.0, floor(min(x0, x1) - half_width - 1.0))
    c1 = <Py_ssize_t>min(<double>w, ceil(max(x0, x1) + half_width + 1.0))
    r0 = <Py_ssize_t>max(0.0, floor(min(y0, y1) - half_width - 1.0))
    r1 = <Py_ssize_t>min(<double>h, ceil(max(y0, y1) + half_width + 1.0))
    with nogil:
        for r in range(r0, r1):
            for c in range(c0, c1):
                if _seg_dist2(c + 0.5, r + 0.5, x0, y0, dx, dy, len2) <= hw2:
                    img[r, c] = value


def draw_disc(double[:, ::1] img, double cx, double cy, double radius, double value):
    draw_segment(img, cx, cy, cx, cy, radius, value)


def ssim_map(double[:, ::1] a, double[:, ::1] b, int win, double c1, double c2):
    """Local SSIM for every ``win x win`` valid window (uniform weights)."""
    cdef Py_ssize_t h = a.shape[0], w = a.shape[1]
    cdef Py_ssize_t r, c
    cdef Py_ssize_t oh = h - win + 1, ow = w - win + 1
    if oh <= 0 or ow <= 0:
        raise ValueError("image smaller than the SSIM window")
    # integral images, one row/col of zero padding
    cdef double[:, ::1] sa = np.zeros((h + 1, w + 1))
    cdef double[:, ::1] sb = np.zeros((h + 1, w + 1))
    cdef double[:, ::1] saa = np.zeros((h + 1, w + 1))
    cdef double[:, ::1] sbb = np.zeros((h + 1, w + 1))
    cdef double[:, ::1] sab = np.zeros((h + 1, w + 1))
    cdef double x, y
    cdef double n = win * win
    cdef double ma, mb, va, vb, cab
    out_arr = np.empty((oh, ow))
    cdef double[:, ::1] out = out_arr
    with nogil:
        for r in range(h):
            for c in range(w):
                x = a[r, c]
                y = b[r, c]
                sa[r + 1, c + 1] = x + sa[r, c + 1] + sa[r + 1, c] - sa[r, c]
                sb[r + 1, c + 1] = y + sb[r, c + 1] + sb[r + 1, c] - sb[r, c]
                saa[r + 1, c + 1] = x * x + saa[r, c + 1] + saa[r + 1, c] - saa[r, c]
                sbb[r + 1, c + 1] = y * y + sbb[r, c + 1] + sbb[r + 1, c] - sbb[r, c]
                sab[r + 1, c + 1] = x * y + sab[r, c + 1] + sab[r + 1, c] - sab[r, c]
        for r in range(oh):
            for c in range(ow):
                ma = (sa[r + win, c + win] - sa[r, c + win] - sa[r + win, c] + sa[r, c]) / n
                mb = (sb[r + win, c + win] - sb[r, c + win] - sb[r + win, c] + sb[r, c]) / n
                va = (saa[r + win, c + win] - saa[r, c + win] - saa[r + win, c] + saa[r, c]) / n - ma * ma
                vb = (sbb[r + win, c + win] - sbb[r, c + win] - sbb[r + win, c] + sbb[r, c]) / n - mb * mb
                cab = (sab[r + win, c + win] - sab[r, c + win] - sab[r + win, c] + sab[r, c]) / n - ma * mb
                out[r, c] = ((2.0 * ma * mb + c1) * (2.0 * cab + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
    return out_arr


def label4(cnp.uint8_t[:, ::1] mask):
    """4-connected labelling; labels numbered by first pixel in raster order."""
    cdef Py_ssize_t h = mask.shape[0], w = mask.shape[1]
    labels_arr = np.zeros((h, w), dtype=np.int32)
    cdef int[:, ::1] labels = labels_arr
    stack_arr = np.empty(h * w * 2 + 2, dtype=np.intp)
    cdef Py_ssize_t[::1] stack = stack_arr
    cdef Py_ssize_t top, r, c, rr, cc
    cdef int count = 0
    with nogil:
        for r in range(h):
            for c in range(w):
                if mask[r, c] == 0 or labels[r, c] != 0:
                    continue
                count += 1
                labels[r, c] = count
                top = 0
                stack[0] = r
                stack[1] = c
                top = 2
                while top > 0:
                    top -= 2
                    rr = stack[top]
                    cc = stack[top + 1]
                    if rr > 0 and mask[rr - 1, cc] and labels[rr - 1, cc] == 0:
                        labels[rr - 1, cc] = count
                        stack[top] = rr - 1
                        stack[top + 1] = cc
                        top += 2
                    if rr + 1 < h and mask[rr + 1, cc] and labels[rr + 1, cc] == 0:
                        labels[rr + 1, cc] = count
                        stack[top] = rr + 1
                        stack[top + 1] = cc
                        top += 2
                    if cc > 0 and mask[rr, cc - 1] and labels[rr, cc - 1] == 0:
                        labels[rr, cc - 1] = count
                        stack[top] = rr
                        stack[top + 1] = cc - 1
                        top += 2
                    if cc + 1 < w and mask[rr, cc + 1] and labels[rr, cc + 1] == 0:
                        labels[rr, cc + 1] = count
                        stack[top] = rr
                        stack[top + 1] = cc + 1
                        top += 2
    return labels_arr, count
