"""Finite families of linear transforms with fast all-transform scoring.

A family enumerates operators T_0..T_{m-1}, each mapping a weight array to a
sample-shaped array. Components are matched to data by maximizing the
normalized alignment score <x, Tw> / ||Tw|| over the family, so every family
provides, besides apply/adjoint, a batched inner-product routine that avoids
materializing each transformed weight. Shift families route through the
sliding-correlation kernels; rotation/reflection/identity precompute the
(small) stack of transformed weights once per call.

Conventions fixed here and relied on elsewhere:
  - shifts are integer-valued on the sampling grid, no sub-sample steps;
  - a weight shorter than the sample is zero-padded into place ("embed"),
    a longer one is cropped to sample size ("crop"), axis by axis in 2-D;
  - rotation uses bilinear interpolation with zero fill and per-angle norms
    (discrete rotations do not preserve the norm exactly);
  - near-zero transform norms (< DEGENERATE_TOL) score 0 rather than error,
    except when every transform is degenerate;
  - argmax ties break to the lowest transform index.
"""

from __future__ import annotations

import abc

import numpy as np

from . import _kernels as K
from .core import norm

DEGENERATE_TOL = 1e-12


class Prepared:
    """Per-weight quantities reused across a batch: transform norms and,
    for small families, the stack of transformed weights."""

    __slots__ = ("norms", "stack")

    def __init__(self, norms, stack=None):
        self.norms = norms
        self.stack = stack


class TransformFamily(abc.ABC):
    kind: str = ""

    def __init__(self, weight_shape, sample_shape):
        self.weight_shape = tuple(int(s) for s in weight_shape)
        self.sample_shape = tuple(int(s) for s in sample_shape)
        for s in self.weight_shape + self.sample_shape:
            if s < 1:
                raise ValueError("shapes must have positive extents")

    # -- required per family -------------------------------------------------

    @abc.abstractmethod
    def size(self) -> int:
        """Number of transforms in the family."""

    @abc.abstractmethod
    def apply(self, t: int, w: np.ndarray) -> np.ndarray:
        """T_t w on the sample domain."""

    @abc.abstractmethod
    def adjoint(self, t: int, g: np.ndarray) -> np.ndarray:
        """T_t^T g on the weight domain, the exact transpose of apply."""

    @abc.abstractmethod
    def _norms(self, w: np.ndarray) -> np.ndarray:
        """||T_t w|| for every t."""

    @abc.abstractmethod
    def _inner_all_batch(self, X: np.ndarray, w: np.ndarray, prep: Prepared) -> np.ndarray:
        """<X_i, T_t w> for every sample i and transform t, shape (n, size)."""

    # -- shared machinery -----------------------------------------------------

    def _check_index(self, t: int) -> int:
        t = int(t)
        if not 0 <= t < self.size():
            raise IndexError(f"transform index {t} out of range [0, {self.size()})")
        return t

    def _check_weight(self, w) -> np.ndarray:
        w = np.ascontiguousarray(w, dtype=np.float64)
        if w.shape != self.weight_shape:
            raise ValueError(f"weight shape {w.shape} != {self.weight_shape}")
        return w

    def _check_samples(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.shape[1:] != self.sample_shape:
            raise ValueError(f"sample shape {X.shape[1:]} != {self.sample_shape}")
        return X

    def prepare(self, w) -> Prepared:
        w = self._check_weight(w)
        return self._prepare(w)

    def _prepare(self, w: np.ndarray) -> Prepared:
        return Prepared(self._norms(w))

    def transformed(self, t: int, w: np.ndarray, prep: Prepared | None = None) -> np.ndarray:
        """T_t w, served from the prepared stack when one exists."""
        if prep is not None and prep.stack is not None:
            return prep.stack[t]
        return self.apply(t, w)

    def inner_all_batch(self, X, w, prep: Prepared | None = None) -> np.ndarray:
        X = self._check_samples(X)
        w = self._check_weight(w)
        if prep is None:
            prep = self._prepare(w)
        return self._inner_all_batch(X, w, prep)

    def score_batch(self, X, w, prep: Prepared | None = None):
        """Normalized scores <x, Tw>/||Tw|| per sample and transform.

        Returns (scores (n, size), raw inners (n, size), prep). Degenerate
        transforms score 0; raises only when all transforms are degenerate.
        """
        X = self._check_samples(X)
        w = self._check_weight(w)
        if prep is None:
            prep = self._prepare(w)
        valid = prep.norms > DEGENERATE_TOL
        if not valid.any():
            raise ValueError("all transform norms degenerate (zero weight?)")
        C = self._inner_all_batch(X, w, prep)
        scores = np.zeros_like(C)
        scores[:, valid] = C[:, valid] / prep.norms[valid]
        return scores, C, prep

    def align_batch(self, X, w, prep: Prepared | None = None):
        """Best transform per sample: (indices, signed coeffs, squared scores)."""
        scores, _, prep = self.score_batch(X, w, prep)
        sq = scores * scores
        idx = np.argmax(sq, axis=1)
        rows = np.arange(scores.shape[0])
        coeff = scores[rows, idx]
        return idx, coeff, coeff * coeff


class Identity(TransformFamily):
    kind = "identity"

    def __init__(self, shape):
        if np.isscalar(shape):
            shape = (int(shape),)
        else:
            shape = tuple(int(s) for s in shape)
        super().__init__(shape, shape)

    def size(self):
        return 1

    def apply(self, t, w):
        self._check_index(t)
        return self._check_weight(w).copy()

    def adjoint(self, t, g):
        self._check_index(t)
        g = np.asarray(g, dtype=np.float64)
        if g.shape != self.sample_shape:
            raise ValueError(f"sample shape {g.shape} != {self.sample_shape}")
        return g.copy()

    def _norms(self, w):
        return np.array([norm(w)])

    def _inner_all_batch(self, X, w, prep):
        return (X.reshape(X.shape[0], -1) @ w.ravel())[:, None]


class Reflection(TransformFamily):
    """Axis flips of a 2-D weight: sign pairs (1,1), (1,-1), (-1,1), (-1,-1)."""

    kind = "reflection"
    SIGNS = ((1, 1), (1, -1), (-1, 1), (-1, -1))

    def __init__(self, shape):
        shape = tuple(int(s) for s in shape)
        if len(shape) != 2:
            raise ValueError("reflection family needs a 2-D shape")
        super().__init__(shape, shape)

    def size(self):
        return 4

    def _flip(self, a, t):
        s0, s1 = self.SIGNS[t]
        return np.ascontiguousarray(a[::s0, ::s1])

    def apply(self, t, w):
        t = self._check_index(t)
        return self._flip(self._check_weight(w), t)

    def adjoint(self, t, g):
        # each flip is its own inverse and a permutation, so also its own transpose
        t = self._check_index(t)
        g = np.asarray(g, dtype=np.float64)
        if g.shape != self.sample_shape:
            raise ValueError(f"sample shape {g.shape} != {self.sample_shape}")
        return self._flip(g, t)

    def _norms(self, w):
        return np.full(4, norm(w))

    def _prepare(self, w):
        stack = np.stack([self._flip(w, t) for t in range(4)])
        return Prepared(self._norms(w), stack)

    def _inner_all_batch(self, X, w, prep):
        stack = prep.stack if prep.stack is not None else self._prepare(w).stack
        return X.reshape(X.shape[0], -1) @ stack.reshape(4, -1).T


class Rotation(TransformFamily):
    """Rotations of a square 2-D weight about its center by a fixed angle set.

    Defaults to the 20 multiples of pi/10. Bilinear interpolation with zero
    fill; content rotated past the border is lost, so norms are computed per
    angle from the interpolated image rather than assumed constant.
    """

    kind = "rotation"

    def __init__(self, shape, angles=None):
        shape = tuple(int(s) for s in shape)
        if len(shape) != 2:
            raise ValueError("rotation family needs a 2-D shape")
        super().__init__(shape, shape)
        if angles is None:
            angles = 2.0 * np.pi * np.arange(20) / 20.0
        self.angles = np.asarray(angles, dtype=np.float64)
        if self.angles.ndim != 1 or self.angles.size < 1:
            raise ValueError("angle set must be a non-empty 1-D sequence")
        self._cos = np.cos(self.angles)
        self._sin = np.sin(self.angles)

    def size(self):
        return self.angles.size

    def apply(self, t, w):
        t = self._check_index(t)
        w = self._check_weight(w)
        if self.angles[t] == 0.0:
            return w.copy()
        return K.rotate_bilinear(w, self._cos[t], self._sin[t])

    def adjoint(self, t, g):
        t = self._check_index(t)
        g = np.ascontiguousarray(g, dtype=np.float64)
        if g.shape != self.sample_shape:
            raise ValueError(f"sample shape {g.shape} != {self.sample_shape}")
        if self.angles[t] == 0.0:
            return g.copy()
        return K.rotate_bilinear_adjoint(g, self._cos[t], self._sin[t])

    def _prepare(self, w):
        stack = np.stack([self.apply(t, w) for t in range(self.size())])
        norms = np.sqrt(np.einsum("tij,tij->t", stack, stack))
        return Prepared(norms, stack)

    def _norms(self, w):
        return self._prepare(w).norms

    def _inner_all_batch(self, X, w, prep):
        stack = prep.stack if prep.stack is not None else self._prepare(w).stack
        return X.reshape(X.shape[0], -1) @ stack.reshape(self.size(), -1).T


class Shift1D(TransformFamily):
    """Integer shifts of a 1-D weight against a 1-D sample window.

    Weight length <= sample length: the weight is placed at every offset with
    zero fill (transform count L_x - L_w + 1). Weight longer than the sample:
    every contiguous sample-sized crop of the weight (count L_w - L_x + 1).
    """

    kind = "shift1d"

    def __init__(self, weight_len, sample_len):
        super().__init__((int(weight_len),), (int(sample_len),))
        self.embed = self.weight_shape[0] <= self.sample_shape[0]

    def size(self):
        return abs(self.sample_shape[0] - self.weight_shape[0]) + 1

    def apply(self, t, w):
        t = self._check_index(t)
        w = self._check_weight(w)
        if self.embed:
            out = np.zeros(self.sample_shape[0])
            out[t : t + self.weight_shape[0]] = w
            return out
        return w[t : t + self.sample_shape[0]].copy()

    def adjoint(self, t, g):
        t = self._check_index(t)
        g = np.ascontiguousarray(g, dtype=np.float64)
        if g.shape != self.sample_shape:
            raise ValueError(f"sample shape {g.shape} != {self.sample_shape}")
        if self.embed:
            return g[t : t + self.weight_shape[0]].copy()
        out = np.zeros(self.weight_shape[0])
        out[t : t + self.sample_shape[0]] = g
        return out

    def _norms(self, w):
        if self.embed:
            return np.full(self.size(), norm(w))
        return np.sqrt(K.win_sumsq_1d(w, self.sample_shape[0]))

    def _inner_all_batch(self, X, w, prep):
        if self.embed:
            return K.corr1d_batch_embed(X, w)
        return K.corr1d_batch_crop(w, X)


class Shift2D(TransformFamily):
    """Integer 2-D shifts; each axis independently embeds or crops.

    The transform index enumerates offset pairs row-major: t = o0 * n1 + o1
    with n_i = |sample_i - weight_i| + 1 offsets along axis i.
    """

    kind = "shift2d"

    def __init__(self, weight_shape, sample_shape):
        weight_shape = tuple(int(s) for s in weight_shape)
        sample_shape = tuple(int(s) for s in sample_shape)
        if len(weight_shape) != 2 or len(sample_shape) != 2:
            raise ValueError("2-D shift family needs 2-D shapes")
        super().__init__(weight_shape, sample_shape)
        self._n = tuple(
            abs(sample_shape[i] - weight_shape[i]) + 1 for i in range(2)
        )
        self._m = tuple(min(sample_shape[i], weight_shape[i]) for i in range(2))
        self._embed = tuple(weight_shape[i] <= sample_shape[i] for i in range(2))

    def size(self):
        return self._n[0] * self._n[1]

    def offsets(self, t):
        t = self._check_index(t)
        return t // self._n[1], t % self._n[1]

    def _windows(self, t):
        # per axis: destination (sample) start and source (weight) start
        o0, o1 = self.offsets(t)
        d0, s0 = (o0, 0) if self._embed[0] else (0, o0)
        d1, s1 = (o1, 0) if self._embed[1] else (0, o1)
        return (d0, d1), (s0, s1)

    def apply(self, t, w):
        w = self._check_weight(w)
        (d0, d1), (s0, s1) = self._windows(t)
        m0, m1 = self._m
        out = np.zeros(self.sample_shape)
        out[d0 : d0 + m0, d1 : d1 + m1] = w[s0 : s0 + m0, s1 : s1 + m1]
        return out

    def adjoint(self, t, g):
        g = np.ascontiguousarray(g, dtype=np.float64)
        if g.shape != self.sample_shape:
            raise ValueError(f"sample shape {g.shape} != {self.sample_shape}")
        (d0, d1), (s0, s1) = self._windows(t)
        m0, m1 = self._m
        out = np.zeros(self.weight_shape)
        out[s0 : s0 + m0, s1 : s1 + m1] = g[d0 : d0 + m0, d1 : d1 + m1]
        return out

    def _norms(self, w):
        sq = K.win_sumsq_2d(w, self._m[0], self._m[1])
        # cropping axes slide over the weight, embedding axes see all of it
        return np.sqrt(np.broadcast_to(sq, self._n).ravel())

    def _inner_all_batch(self, X, w, prep):
        return K.corr2d_batch(X, w).reshape(X.shape[0], -1)


# ---------------------------------------------------------------------------
# operation-style wrappers

def family_size(f: TransformFamily) -> int:
    return f.size()


def apply(f: TransformFamily, t: int, w) -> np.ndarray:
    return f.apply(t, w)


def adjoint_accumulate(f: TransformFamily, t: int, g) -> np.ndarray:
    return f.adjoint(t, g)


def transform_norms(f: TransformFamily, w) -> np.ndarray:
    return f.prepare(w).norms


def score_all(f: TransformFamily, x, w) -> np.ndarray:
    """Normalized alignment scores of one sample against every transform."""
    scores, _, _ = f.score_batch(np.asarray(x, dtype=np.float64)[None], w)
    return scores[0]


def best_alignment(f: TransformFamily, x, w):
    """(transform index, signed coefficient, squared score) of the best match."""
    idx, coeff, score = f.align_batch(np.asarray(x, dtype=np.float64)[None], w)
    return int(idx[0]), float(coeff[0]), float(score[0])


_KINDS = {
    "identity": Identity,
    "reflection": Reflection,
    "rotation": Rotation,
    "shift1d": Shift1D,
    "shift2d": Shift2D,
}


def family_from_spec(kind: str, weight_shape, sample_shape, angles=None) -> TransformFamily:
    """Rebuild a family from serialized fields (used by the model file loader)."""
    kind = str(kind)
    if kind == "identity":
        return Identity(weight_shape)
    if kind == "reflection":
        return Reflection(weight_shape)
    if kind == "rotation":
        return Rotation(weight_shape, angles)
    if kind == "shift1d":
        return Shift1D(weight_shape[0], sample_shape[0])
    if kind == "shift2d":
        return Shift2D(weight_shape, sample_shape)
    raise ValueError(f"unknown family kind: {kind!r}")
