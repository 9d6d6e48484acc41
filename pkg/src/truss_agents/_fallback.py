"""Pure numpy / Python versions of the compiled raster kernels."""

from collections import deque

import numpy as np


def draw_segment(img, x0, y0, x1, y1, half_width, value):
    h, w = img.shape
    c0 = int(max(0.0, np.floor(min(x0, x1) - half_width - 1.0)))
    c1 = int(min(float(w), np.ceil(max(x0, x1) + half_width + 1.0)))
    r0 = int(max(0.0, np.floor(min(y0, y1) - half_width - 1.0)))
    r1 = int(min(float(h), np.ceil(max(y0, y1) + half_width + 1.0)))
    if c1 <= c0 or r1 <= r0:
        return
    py, px = np.mgrid[r0:r1, c0:c1].astype(float)
    px += 0.5
    py += 0.5
    dx, dy = x1 - x0, y1 - y0
    len2 = dx * dx + dy * dy
    if len2 > 0.0:
        t = np.clip(((px - x0) * dx + (py - y0) * dy) / len2, 0.0, 1.0)
    else:
        t = np.zeros_like(px)
    ex = px - (x0 + t * dx)
    ey = py - (y0 + t * dy)
    hit = ex * ex + ey * ey <= half_width * half_width
    img[r0:r1, c0:c1][hit] = value


def draw_disc(img, cx, cy, radius, value):
    draw_segment(img, cx, cy, cx, cy, radius, value)


def _integral(x):
    s = np.zeros((x.shape[0] + 1, x.shape[1] + 1))
    s[1:, 1:] = x.cumsum(axis=0).cumsum(axis=1)
    return s


def _window_sums(s, win):
    return s[win:, win:] - s[:-win, win:] - s[win:, :-win] + s[:-win, :-win]


def ssim_map(a, b, win, c1, c2):
    h, w = a.shape
    if h < win or w < win:
        raise ValueError("image smaller than the SSIM window")
    n = float(win * win)
    ma = _window_sums(_integral(a), win) / n
    mb = _window_sums(_integral(b), win) / n
    va = _window_sums(_integral(a * a), win) / n - ma * ma
    vb = _window_sums(_integral(b * b), win) / n - mb * mb
    cab = _window_sums(_integral(a * b), win) / n - ma * mb
    return ((2.0 * ma * mb + c1) * (2.0 * cab + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))


def label4(mask):
    h, w = mask.shape
    labels = np.zeros((h, w), dtype=np.int32)
    count = 0
    rows, cols = np.nonzero(mask)
    on = set(zip(rows.tolist(), cols.tolist()))
    for r, c in zip(rows.tolist(), cols.tolist()):
        if labels[r, c]:
            continue
        count += 1
        labels[r, c] = count
        queue = deque([(r, c)])
        while queue:
            rr, cc = queue.popleft()
            for nr, nc in ((rr - 1, cc), (rr + 1, cc), (rr, cc - 1), (rr, cc + 1)):
                if (nr, nc) in on and not labels[nr, nc]:
                    labels[nr, nc] = count
                    queue.append((nr, nc))
    return labels, count
