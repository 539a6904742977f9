"""Hot numeric kernels: numba-jitted loops with a pure-numpy fallback.

The backend is selected once at import time. Numba is used when it imports
cleanly and the environment variable ``GTPCA_NO_NUMBA`` is unset/empty;
otherwise the numpy implementations run. Both variants of every kernel stay
importable (``*_nb`` / ``*_np``) so tests can cross-check them and
``benchmarks/bench_backends.py`` can time them side by side.

Sliding correlations are computed as direct dot products per offset
(O(|offsets| * window)) in the numba path; the numpy fallback uses
``np.correlate`` / window views in 1-D and FFT cross-correlation in 2-D.
Both agree with a naive apply-then-inner loop to well below 1e-10.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        if args and callable(args[0]):
            return args[0]
        return wrap


USE_NUMBA = HAVE_NUMBA and not os.environ.get("GTPCA_NO_NUMBA")
BACKEND = "numba" if USE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# 1-D valid correlation: out[t] = sum_i a[t+i] * b[i], len(a) >= len(b)

def corr1d_np(a, b):
    return np.correlate(a, b, mode="valid")


@njit(cache=True)
def corr1d_nb(a, b):
    m = a.shape[0] - b.shape[0] + 1
    out = np.empty(m)
    for t in range(m):
        s = 0.0
        for i in range(b.shape[0]):
            s += a[t + i] * b[i]
        out[t] = s
    return out


def corr1d_batch_embed_np(X, w):
    # rows of X are the long arrays; windows view avoids the copy
    win = np.lib.stride_tricks.sliding_window_view(X, w.shape[0], axis=1)
    return np.einsum("ntl,l->nt", win, w)


@njit(cache=True)
def corr1d_batch_embed_nb(X, w):
    n = X.shape[0]
    m = X.shape[1] - w.shape[0] + 1
    out = np.empty((n, m))
    for r in range(n):
        for t in range(m):
            s = 0.0
            for i in range(w.shape[0]):
                s += X[r, t + i] * w[i]
            out[r, t] = s
    return out


def corr1d_batch_crop_np(w, X):
    win = np.lib.stride_tricks.sliding_window_view(w, X.shape[1])
    return X @ win.T


@njit(cache=True)
def corr1d_batch_crop_nb(w, X):
    n = X.shape[0]
    m = w.shape[0] - X.shape[1] + 1
    out = np.empty((n, m))
    for r in range(n):
        for t in range(m):
            s = 0.0
            for i in range(X.shape[1]):
                s += w[t + i] * X[r, i]
            out[r, t] = s
    return out


# ---------------------------------------------------------------------------
# 2-D valid correlation with per-axis roles. Along an axis where x is the
# larger array the offset walks over x (weight embedded in the sample);
# where w is larger it walks over w (sample-sized crop of the weight).
# out[o0, o1] = sum_{a,b} x[a + sx0*o0, b + sx1*o1] * w[a + sw0*o0, b + sw1*o1]

def _axis_roles(nx, nw):
    n = abs(nx - nw) + 1
    m = min(nx, nw)
    sx = 1 if nx >= nw else 0
    return n, m, sx, 1 - sx


def corr2d_np(x, w):
    s0 = x.shape[0] + w.shape[0] - 1
    s1 = x.shape[1] + w.shape[1] - 1
    full = np.fft.irfft2(
        np.fft.rfft2(x, (s0, s1)) * np.conj(np.fft.rfft2(w, (s0, s1))), (s0, s1)
    )
    n0, _, sx0, _ = _axis_roles(x.shape[0], w.shape[0])
    n1, _, sx1, _ = _axis_roles(x.shape[1], w.shape[1])
    # positive lags when sliding over x, wrapped negative lags when over w
    i0 = np.arange(n0) if sx0 else (-np.arange(n0)) % s0
    i1 = np.arange(n1) if sx1 else (-np.arange(n1)) % s1
    return full[np.ix_(i0, i1)]


@njit(cache=True)
def corr2d_nb(x, w):
    n0 = abs(x.shape[0] - w.shape[0]) + 1
    n1 = abs(x.shape[1] - w.shape[1]) + 1
    m0 = min(x.shape[0], w.shape[0])
    m1 = min(x.shape[1], w.shape[1])
    sx0 = 1 if x.shape[0] >= w.shape[0] else 0
    sx1 = 1 if x.shape[1] >= w.shape[1] else 0
    sw0 = 1 - sx0
    sw1 = 1 - sx1
    out = np.empty((n0, n1))
    for o0 in range(n0):
        for o1 in range(n1):
            s = 0.0
            for a in range(m0):
                for b in range(m1):
                    s += x[a + sx0 * o0, b + sx1 * o1] * w[a + sw0 * o0, b + sw1 * o1]
            out[o0, o1] = s
    return out


def corr2d_batch_np(X, w):
    return np.stack([corr2d_np(X[i], w) for i in range(X.shape[0])])


@njit(cache=True)
def corr2d_batch_nb(X, w):
    n0 = abs(X.shape[1] - w.shape[0]) + 1
    n1 = abs(X.shape[2] - w.shape[1]) + 1
    m0 = min(X.shape[1], w.shape[0])
    m1 = min(X.shape[2], w.shape[1])
    sx0 = 1 if X.shape[1] >= w.shape[0] else 0
    sx1 = 1 if X.shape[2] >= w.shape[1] else 0
    sw0 = 1 - sx0
    sw1 = 1 - sx1
    out = np.empty((X.shape[0], n0, n1))
    for r in range(X.shape[0]):
        for o0 in range(n0):
            for o1 in range(n1):
                s = 0.0
                for a in range(m0):
                    for b in range(m1):
                        s += (
                            X[r, a + sx0 * o0, b + sx1 * o1]
                            * w[a + sw0 * o0, b + sw1 * o1]
                        )
                out[r, o0, o1] = s
    return out


# ---------------------------------------------------------------------------
# Sliding sum of squares (window norms for cropping shifts)

def win_sumsq_1d_np(w, length):
    win = np.lib.stride_tricks.sliding_window_view(w * w, length)
    return win.sum(axis=-1)


@njit(cache=True)
def win_sumsq_1d_nb(w, length):
    m = w.shape[0] - length + 1
    out = np.empty(m)
    for t in range(m):
        s = 0.0
        for i in range(length):
            s += w[t + i] * w[t + i]
        out[t] = s
    return out


def win_sumsq_2d_np(w, h, ww):
    win = np.lib.stride_tricks.sliding_window_view(w * w, (h, ww))
    return win.sum(axis=(-2, -1))


@njit(cache=True)
def win_sumsq_2d_nb(w, h, ww):
    m0 = w.shape[0] - h + 1
    m1 = w.shape[1] - ww + 1
    out = np.empty((m0, m1))
    for o0 in range(m0):
        for o1 in range(m1):
            s = 0.0
            for a in range(h):
                for b in range(ww):
                    s += w[o0 + a, o1 + b] * w[o0 + a, o1 + b]
            out[o0, o1] = s
    return out


# ---------------------------------------------------------------------------
# Rotation about the image center with bilinear interpolation, zero fill.
# The output pixel at p reads the source at R(p - c) + c, so the adjoint is
# the exact transpose: it scatters with the same four corner weights. Corners
# falling outside the source contribute nothing, which keeps the pair an
# exact transpose of each other.

def _rot_coords(shape, cos_a, sin_a):
    h, w = shape
    cy = (h - 1) / 2.0
    cx = (w - 1) / 2.0
    ii, jj = np.meshgrid(np.arange(h) - cy, np.arange(w) - cx, indexing="ij")
    src0 = cos_a * ii - sin_a * jj + cy
    src1 = sin_a * ii + cos_a * jj + cx
    return src0, src1


def rotate_bilinear_np(img, cos_a, sin_a):
    h, w = img.shape
    src0, src1 = _rot_coords(img.shape, cos_a, sin_a)
    i0 = np.floor(src0).astype(np.int64)
    j0 = np.floor(src1).astype(np.int64)
    fi = src0 - i0
    fj = src1 - j0
    out = np.zeros_like(img)
    for di, dj, wt in (
        (0, 0, (1 - fi) * (1 - fj)),
        (0, 1, (1 - fi) * fj),
        (1, 0, fi * (1 - fj)),
        (1, 1, fi * fj),
    ):
        ci = i0 + di
        cj = j0 + dj
        ok = (ci >= 0) & (ci < h) & (cj >= 0) & (cj < w)
        out[ok] += wt[ok] * img[ci[ok], cj[ok]]
    return out


def rotate_bilinear_adjoint_np(g, cos_a, sin_a):
    h, w = g.shape
    src0, src1 = _rot_coords(g.shape, cos_a, sin_a)
    i0 = np.floor(src0).astype(np.int64)
    j0 = np.floor(src1).astype(np.int64)
    fi = src0 - i0
    fj = src1 - j0
    out = np.zeros_like(g)
    for di, dj, wt in (
        (0, 0, (1 - fi) * (1 - fj)),
        (0, 1, (1 - fi) * fj),
        (1, 0, fi * (1 - fj)),
        (1, 1, fi * fj),
    ):
        ci = i0 + di
        cj = j0 + dj
        ok = (ci >= 0) & (ci < h) & (cj >= 0) & (cj < w)
        np.add.at(out, (ci[ok], cj[ok]), wt[ok] * g[ok])
    return out


@njit(cache=True)
def rotate_bilinear_nb(img, cos_a, sin_a):
    h, w = img.shape
    cy = (h - 1) / 2.0
    cx = (w - 1) / 2.0
    out = np.zeros((h, w))
    for i in range(h):
        for j in range(w):
            y = i - cy
            x = j - cx
            s0 = cos_a * y - sin_a * x + cy
            s1 = sin_a * y + cos_a * x + cx
            i0 = int(np.floor(s0))
            j0 = int(np.floor(s1))
            fi = s0 - i0
            fj = s1 - j0
            acc = 0.0
            if 0 <= i0 < h and 0 <= j0 < w:
                acc += (1 - fi) * (1 - fj) * img[i0, j0]
            if 0 <= i0 < h and 0 <= j0 + 1 < w:
                acc += (1 - fi) * fj * img[i0, j0 + 1]
            if 0 <= i0 + 1 < h and 0 <= j0 < w:
                acc += fi * (1 - fj) * img[i0 + 1, j0]
            if 0 <= i0 + 1 < h and 0 <= j0 + 1 < w:
                acc += fi * fj * img[i0 + 1, j0 + 1]
            out[i, j] = acc
    return out


@njit(cache=True)
def rotate_bilinear_adjoint_nb(g, cos_a, sin_a):
    h, w = g.shape
    cy = (h - 1) / 2.0
    cx = (w - 1) / 2.0
    out = np.zeros((h, w))
    for i in range(h):
        for j in range(w):
            y = i - cy
            x = j - cx
            s0 = cos_a * y - sin_a * x + cy
            s1 = sin_a * y + cos_a * x + cx
            i0 = int(np.floor(s0))
            j0 = int(np.floor(s1))
            fi = s0 - i0
            fj = s1 - j0
            gv = g[i, j]
            if 0 <= i0 < h and 0 <= j0 < w:
                out[i0, j0] += (1 - fi) * (1 - fj) * gv
            if 0 <= i0 < h and 0 <= j0 + 1 < w:
                out[i0, j0 + 1] += (1 - fi) * fj * gv
            if 0 <= i0 + 1 < h and 0 <= j0 < w:
                out[i0 + 1, j0] += fi * (1 - fj) * gv
            if 0 <= i0 + 1 < h and 0 <= j0 + 1 < w:
                out[i0 + 1, j0 + 1] += fi * fj * gv
    return out


# ---------------------------------------------------------------------------
# active backend

if USE_NUMBA:
    corr1d = corr1d_nb
    corr1d_batch_embed = corr1d_batch_embed_nb
    corr1d_batch_crop = corr1d_batch_crop_nb
    corr2d = corr2d_nb
    corr2d_batch = corr2d_batch_nb
    win_sumsq_1d = win_sumsq_1d_nb
    win_sumsq_2d = win_sumsq_2d_nb
    rotate_bilinear = rotate_bilinear_nb
    rotate_bilinear_adjoint = rotate_bilinear_adjoint_nb
else:
    corr1d = corr1d_np
    corr1d_batch_embed = corr1d_batch_embed_np
    corr1d_batch_crop = corr1d_batch_crop_np
    corr2d = corr2d_np
    corr2d_batch = corr2d_batch_np
    win_sumsq_1d = win_sumsq_1d_np
    win_sumsq_2d = win_sumsq_2d_np
    rotate_bilinear = rotate_bilinear_np
    rotate_bilinear_adjoint = rotate_bilinear_adjoint_np
