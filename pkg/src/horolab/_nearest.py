"""Exact proximity queries against a fixed set of points in the upper half-plane.

Points are bucketed by log-height. The ball B(p, r) lies inside the bands
covering [log p.y - r, log p.y + r] and inside the x-window
|x - p.x| <= p.y sinh r, so each query scans a short sorted run per band.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

BAND_WIDTH = 0.5


@njit(cache=True)
def _scan(px, py, r, band_lo, offsets, xs, ys, width, first_only):
    n = px.size
    nb = offsets.size - 1
    count = np.zeros(n, dtype=np.int64)
    best = np.full(n, np.inf)
    arg = np.full(n, -1, dtype=np.int64)
    cm1 = 2.0 * math.sinh(0.5 * r) ** 2
    sr = math.sinh(r)
    for i in range(n):
        x = px[i]
        y = py[i]
        ly = math.log(y)
        b0 = int(math.floor((ly - r) / width)) - band_lo
        b1 = int(math.floor((ly + r) / width)) - band_lo
        half = y * sr
        for k in range(max(b0, 0), min(b1, nb - 1) + 1):
            s = offsets[k]
            e = offsets[k + 1]
            if s == e:
                continue
            j = s + np.searchsorted(xs[s:e], x - half)
            while j < e and xs[j] <= x + half:
                dx = xs[j] - x
                dy = ys[j] - y
                u = (dx * dx + dy * dy) / (2.0 * y * ys[j])
                if u <= cm1:
                    count[i] += 1
                    if u < best[i]:
                        best[i] = u
                        arg[i] = j
                j += 1
            if first_only and count[i] > 0:
                break
    return count, best, arg


class BandIndex:
    def __init__(self, x, y, width: float = BAND_WIDTH):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        band = np.floor(np.log(y) / width).astype(np.int64)
        order = np.lexsort((x, band))
        self.width = width
        self.xs = np.ascontiguousarray(x[order])
        self.ys = np.ascontiguousarray(y[order])
        band = band[order]
        self.order = order
        self.band_lo = int(band.min()) if len(band) else 0
        nb = (int(band.max()) - self.band_lo + 1) if len(band) else 1
        counts = np.bincount(band - self.band_lo, minlength=nb)
        self.offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)

    def _run(self, px, py, r, first_only):
        px = np.ascontiguousarray(np.asarray(px, dtype=float).ravel())
        py = np.ascontiguousarray(np.asarray(py, dtype=float).ravel())
        return _scan(px, py, float(r), self.band_lo, self.offsets, self.xs, self.ys,
                     self.width, first_only)

    def any_within(self, px, py, r: float):
        shape = np.shape(px)
        count, _, _ = self._run(px, py, r, True)
        return (count > 0).reshape(shape)

    def count_within(self, px, py, r: float):
        shape = np.shape(px)
        count, _, _ = self._run(px, py, r, False)
        return count.reshape(shape)

    def nearest(self, px, py, cap: float, return_index: bool = False):
        """Distance to the nearest indexed point, inf when beyond cap.

        With return_index, also the position of that point in the input
        arrays (-1 when none lies within cap).
        """
        shape = np.shape(px)
        _, u, arg = self._run(px, py, cap, False)
        with np.errstate(invalid="ignore"):
            d = np.log1p(u + np.sqrt(u * (u + 2.0)))
        d = np.where(np.isinf(u), np.inf, d).reshape(shape)
        if not return_index:
            return d
        idx = np.where(arg >= 0, self.order[np.maximum(arg, 0)], -1)
        return d, idx.reshape(shape)
