"""Array primitives and the seeded counter-based RNG shared by all modules."""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_SPAWN = 0xD1B54A32D192ED03


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a 64-bit integer."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def as_sample(x) -> np.ndarray:
    """Validate and convert to a float64 sample array (1-D or 2-D, finite)."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim not in (1, 2):
        raise ValueError(f"sample must be 1-D or 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("sample contains non-finite entries")
    return arr


def inner(a, b) -> float:
    """Euclidean inner product; shapes must match exactly."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"inner: shape mismatch {a.shape} vs {b.shape}")
    return float(np.dot(a.ravel(), b.ravel()))


def norm(a) -> float:
    """Euclidean norm sqrt(<a, a>)."""
    a = np.asarray(a, dtype=np.float64)
    flat = a.ravel()
    return float(np.sqrt(np.dot(flat, flat)))


class Rng:
    """Deterministic counter-based generator (SplitMix64 output stream).

    Draw sequences depend only on the seed, never on platform RNG state or
    global singletons, so every run of an experiment is bit-reproducible.
    Single-owner: not safe to share across threads; derive per-worker
    streams with :meth:`spawn`.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        self.counter = 0

    def _raw(self, n: int) -> np.ndarray:
        """Next n raw 64-bit outputs, vectorized over the counter."""
        idx = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        z = np.uint64(self.seed) + idx * np.uint64(_GOLDEN)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        return z ^ (z >> np.uint64(31))

    def uniform(self, lo: float = 0.0, hi: float = 1.0, size=None):
        """Uniform draws in [lo, hi)."""
        if lo > hi:
            raise ValueError(f"uniform bounds reversed: lo={lo} > hi={hi}")
        n = 1 if size is None else int(np.prod(size))
        u = (self._raw(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        out = lo + u * (hi - lo)
        if size is None:
            return float(out[0])
        return out.reshape(size)

    def normal(self, size=None):
        """Standard normal draws (Box-Muller on the uniform stream)."""
        n = 1 if size is None else int(np.prod(size))
        m = (n + 1) // 2
        raw = self._raw(2 * m)
        # u1 in (0, 1] so the log never sees zero
        u1 = ((raw[:m] >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53
        u2 = (raw[m:] >> np.uint64(11)).astype(np.float64) * 2.0**-53
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        z = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]
        if size is None:
            return float(z[0])
        return z.reshape(size)

    def integers(self, bound: int, size=None):
        """Uniform integers in [0, bound)."""
        if bound <= 0:
            raise ValueError(f"integers: bound must be positive, got {bound}")
        n = 1 if size is None else int(np.prod(size))
        u = (self._raw(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        out = np.minimum((u * bound).astype(np.int64), bound - 1)
        if size is None:
            return int(out[0])
        return out.reshape(size)

    def spawn(self, key: int) -> "Rng":
        """Child generator on an independent stream identified by `key`."""
        return Rng(mix64(self.seed ^ mix64(((int(key) + 1) * _SPAWN) & _MASK64)))


def rng_uniform(rng: Rng, lo: float, hi: float) -> float:
    """Single uniform draw in [lo, hi); errors if lo > hi."""
    return rng.uniform(lo, hi)
