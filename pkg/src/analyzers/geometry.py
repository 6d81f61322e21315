"""Planar kernels over prefix-sum paths: block diameters, windowed oscillation, ray-wise sums."""
from __future__ import annotations

import math

import numpy as np

from src.utils.jit import njit


@njit
def _cross(ox, oy, ax, ay, bx, by):
    return (ax - ox) * (by - oy) - (ay - oy) * (bx - ox)


@njit
def _sorted_order(xs, ys):
    """Indices sorting the points by x, ties broken by y."""
    order = np.argsort(xs, kind="mergesort")
    size = order.shape[0]
    start = 0
    while start < size:
        stop = start + 1
        while stop < size and xs[order[stop]] == xs[order[start]]:
            stop += 1
        # insertion sort of the equal-x run by y
        for i in range(start + 1, stop):
            key = order[i]
            j = i - 1
            while j >= start and ys[order[j]] > ys[key]:
                order[j + 1] = order[j]
                j -= 1
            order[j + 1] = key
        start = stop
    return order


@njit
def _brute_diameter(xs, ys):
    best = 0.0
    size = xs.shape[0]
    for i in range(size):
        for j in range(i + 1, size):
            dx = xs[i] - xs[j]
            dy = ys[i] - ys[j]
            d = dx * dx + dy * dy
            if d > best:
                best = d
    return math.sqrt(best)


@njit
def hull_diameter(xs, ys):
    """Largest pairwise distance of a planar point set (monotone chain hull + rotating calipers)."""
    size = xs.shape[0]
    if size <= 3:
        return _brute_diameter(xs, ys)

    order = _sorted_order(xs, ys)
    hx = np.empty(2 * size, dtype=np.float64)
    hy = np.empty(2 * size, dtype=np.float64)
    k = 0
    for i in range(size):
        px = xs[order[i]]
        py = ys[order[i]]
        while k >= 2 and _cross(hx[k - 2], hy[k - 2], hx[k - 1], hy[k - 1], px, py) <= 0.0:
            k -= 1
        hx[k] = px
        hy[k] = py
        k += 1
    lower = k + 1
    for i in range(size - 2, -1, -1):
        px = xs[order[i]]
        py = ys[order[i]]
        while k >= lower and _cross(hx[k - 2], hy[k - 2], hx[k - 1], hy[k - 1], px, py) <= 0.0:
            k -= 1
        hx[k] = px
        hy[k] = py
        k += 1
    h = k - 1  # last point repeats the first

    if h <= 3:
        return _brute_diameter(hx[:h], hy[:h])

    best = 0.0
    j = 1
    for i in range(h):
        ni = (i + 1) % h
        while True:
            nj = (j + 1) % h
            area_next = abs(_cross(hx[i], hy[i], hx[ni], hy[ni], hx[nj], hy[nj]))
            area_here = abs(_cross(hx[i], hy[i], hx[ni], hy[ni], hx[j], hy[j]))
            if area_next > area_here:
                j = nj
            else:
                break
        for a in (i, ni):
            dx = hx[a] - hx[j]
            dy = hy[a] - hy[j]
            d = dx * dx + dy * dy
            if d > best:
                best = d
    return math.sqrt(best)


@njit
def block_diameters(re, im, width):
    """
    Diameter of each block ``{sums[k*width], ..., sums[(k+1)*width]}``
    (both endpoints included) of the path given by ``re + i im``.
    """
    blocks = (re.shape[0] - 1) // width
    out = np.empty(blocks, dtype=np.float64)
    for k in range(blocks):
        lo = k * width
        hi = lo + width + 1
        out[k] = hull_diameter(re[lo:hi], im[lo:hi])
    return out


def block_bbox_diagonals(re: np.ndarray, im: np.ndarray, width: int) -> np.ndarray:
    """Bounding-box diagonal per block; within a factor sqrt(2) of the diameter."""
    blocks = (re.shape[0] - 1) // width
    head_re = re[:-1].reshape(blocks, width)
    head_im = im[:-1].reshape(blocks, width)
    tail_re = re[width::width]
    tail_im = im[width::width]
    span_re = np.maximum(head_re.max(axis=1), tail_re) - np.minimum(head_re.min(axis=1), tail_re)
    span_im = np.maximum(head_im.max(axis=1), tail_im) - np.minimum(head_im.min(axis=1), tail_im)
    return np.hypot(span_re, span_im)


@njit
def windowed_sup(re, im, width):
    """max |sums[k] - sums[j]| over 0 <= k - j <= width; exhaustive O(N * width)."""
    size = re.shape[0]
    best = 0.0
    for j in range(size):
        stop = min(size, j + width + 1)
        for k in range(j + 1, stop):
            dr = re[k] - re[j]
            di = im[k] - im[j]
            d = dr * dr + di * di
            if d > best:
                best = d
    return math.sqrt(best)


@njit
def _trailing_zeros(j):
    count = 0
    while (j & 1) == 0:
        j >>= 1
        count += 1
    return count


@njit
def _block_modulus(re, im, base, a, b):
    dr = re[base + b] - re[base + a]
    di = im[base + b] - im[base + a]
    return math.sqrt(dr * dr + di * di)


@njit
def ray_sup(re, im, base, n, p):
    """
    max over depth-``n`` leaves ``z`` of the subtree rooted at offset ``base``:
    sum of |mass| of the left siblings along the ray to ``z`` plus |mass(z)|,
    masses read from prefix sums at resolution ``n + p``.
    """
    unit = 1 << p
    contrib = np.zeros(n + 1, dtype=np.float64)
    best = 0.0
    for j in range(1 << n):
        first = 1 if j == 0 else n - _trailing_zeros(j)
        for d in range(first, n + 1):
            node = j >> (n - d)
            if node & 1:
                shift = n - d
                contrib[d] = _block_modulus(re, im, base, ((node - 1) << shift) * unit, (node << shift) * unit)
            else:
                contrib[d] = 0.0
        running = 0.0
        for d in range(1, n + 1):
            running += contrib[d]
        candidate = running + _block_modulus(re, im, base, j * unit, (j + 1) * unit)
        if candidate > best:
            best = candidate
    return best


@njit
def block_ray_sups(re, im, depth, l):
    """:func:`ray_sup` of every level-``l`` subtree of a depth-``depth`` path, with p = 0."""
    blocks = 1 << l
    width = 1 << (depth - l)
    out = np.empty(blocks, dtype=np.float64)
    for k in range(blocks):
        out[k] = ray_sup(re, im, k * width, depth - l, 0)
    return out
