"""Synthetic signal generators, MNIST ingestion and the dataset file format.

Per-sample parameters and noise are drawn from a single stream in a fixed
order (parameters first, then the noise vector), so a dataset is fully
determined by its seed.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .core import Rng

DATASET_MAGIC = b"GTDS1\x00v1"

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801


@dataclass
class Dataset:
    data: np.ndarray  # (n, ...) float64
    labels: np.ndarray | None = None  # (n,) small ints, optional

    def __post_init__(self):
        if self.labels is not None and len(self.labels) != len(self.data):
            raise ValueError("label count does not match sample count")

    def __len__(self):
        return len(self.data)


# ---------------------------------------------------------------------------
# 1-D generators

def oscillation_signal(alpha: float, beta: float, t0: float, T: int) -> np.ndarray:
    """Two interfering tones: 0.6 sin(2 pi a (x+t0)) + 0.4 cos(2 pi b (x+t0))."""
    x = np.arange(1, T + 1) / T
    return 0.6 * np.sin(2 * np.pi * alpha * (x + t0)) + 0.4 * np.cos(
        2 * np.pi * beta * (x + t0)
    )


def gen_oscillation(rng: Rng, T: int, noise_scale: float = 0.2) -> np.ndarray:
    """Random oscillation sample: a~U[8,12), b~U[13,30), t0~U[0,1), plus noise."""
    alpha = rng.uniform(8.0, 12.0)
    beta = rng.uniform(13.0, 30.0)
    t0 = rng.uniform(0.0, 1.0)
    return oscillation_signal(alpha, beta, t0, T) + noise_scale * rng.normal(size=T)


def spike_signal(t0: float, alpha: float, width: float, T: int) -> np.ndarray:
    """Truncated parabola spike alpha * max(3 - (4/w^2)(x - t0)^2, 0).

    Peak value 3*alpha at x = t0; support is |x - t0| < w * sqrt(3)/2.
    """
    x = np.arange(1, T + 1) / T
    return alpha * np.maximum(3.0 - (4.0 / width**2) * (x - t0) ** 2, 0.0)


def gen_spike(rng: Rng, T: int, noise_scale: float = 0.2) -> np.ndarray:
    """Random spike sample: t0~U[0,1), amp~U[0.5,2.5), width~U[0.05,0.1), plus noise."""
    t0 = rng.uniform(0.0, 1.0)
    alpha = rng.uniform(0.5, 2.5)
    width = rng.uniform(0.05, 0.1)
    return spike_signal(t0, alpha, width, T) + noise_scale * rng.normal(size=T)


def gen_noise(rng: Rng, T: int, scale: float = 0.2) -> np.ndarray:
    """White-noise negative class: scale * standard normal entries."""
    return scale * rng.normal(size=T)


def oscillation_dataset(rng: Rng, n: int, T: int = 256) -> Dataset:
    if n < 1:
        raise ValueError("dataset size must be >= 1")
    return Dataset(np.stack([gen_oscillation(rng, T) for _ in range(n)]))


def spike_mixture_dataset(rng: Rng, n: int, T: int, spike_prob: float = 0.5) -> Dataset:
    """Labeled mixture: each sample is a spike with probability spike_prob
    (label 1), white noise otherwise (label 0)."""
    if n < 1:
        raise ValueError("dataset size must be >= 1")
    data = np.empty((n, T))
    labels = np.empty(n, dtype=np.int64)
    for i in range(n):
        has_spike = rng.uniform() < spike_prob
        labels[i] = 1 if has_spike else 0
        data[i] = gen_spike(rng, T) if has_spike else gen_noise(rng, T)
    return Dataset(data, labels)


# ---------------------------------------------------------------------------
# MNIST: IDX parsing and the four geometric settings

def _read_be32(fh, path, what):
    buf = fh.read(4)
    if len(buf) != 4:
        raise ValueError(f"truncated IDX file {path}: missing {what}")
    return struct.unpack(">I", buf)[0]


def load_idx(images_path, labels_path) -> Dataset:
    """Parse the big-endian IDX pair into images scaled to [0, 1] plus labels."""
    with open(images_path, "rb") as fh:
        magic = _read_be32(fh, images_path, "magic")
        if magic != IDX_IMAGE_MAGIC:
            raise ValueError(
                f"bad IDX image magic 0x{magic:08x} in {images_path} "
                f"(expected 0x{IDX_IMAGE_MAGIC:08x})"
            )
        n = _read_be32(fh, images_path, "count")
        rows = _read_be32(fh, images_path, "rows")
        cols = _read_be32(fh, images_path, "cols")
        buf = fh.read(n * rows * cols)
        if len(buf) != n * rows * cols:
            raise ValueError(f"truncated IDX file {images_path}: pixel data")
        images = np.frombuffer(buf, dtype=np.uint8).reshape(n, rows, cols)
    with open(labels_path, "rb") as fh:
        magic = _read_be32(fh, labels_path, "magic")
        if magic != IDX_LABEL_MAGIC:
            raise ValueError(
                f"bad IDX label magic 0x{magic:08x} in {labels_path} "
                f"(expected 0x{IDX_LABEL_MAGIC:08x})"
            )
        n_labels = _read_be32(fh, labels_path, "count")
        buf = fh.read(n_labels)
        if len(buf) != n_labels:
            raise ValueError(f"truncated IDX file {labels_path}: label data")
        labels = np.frombuffer(buf, dtype=np.uint8)
    if n != n_labels:
        raise ValueError(
            f"IDX count mismatch: {n} images vs {n_labels} labels"
        )
    return Dataset(images.astype(np.float64) / 255.0, labels.astype(np.int64))


def mnist_setting(ds: Dataset, setting: str, rng: Rng) -> Dataset:
    """Geometric variants of an image dataset.

    i:   random 16x16 sub-image per sample
    ii:  unchanged
    iii: sample embedded at a random offset in a zero 56x56 canvas
    iv:  rotation by a random multiple of 2 pi / 20, bilinear, zero fill
    """
    images = ds.data
    h, w = images.shape[1:]
    if setting == "ii":
        return Dataset(images.copy(), None if ds.labels is None else ds.labels.copy())
    out = []
    if setting == "i":
        side = 16
        for img in images:
            r = rng.integers(h - side + 1)
            c = rng.integers(w - side + 1)
            out.append(img[r : r + side, c : c + side].copy())
    elif setting == "iii":
        big_h, big_w = 2 * h, 2 * w
        for img in images:
            r = rng.integers(big_h - h + 1)
            c = rng.integers(big_w - w + 1)
            canvas = np.zeros((big_h, big_w))
            canvas[r : r + h, c : c + w] = img
            out.append(canvas)
    elif setting == "iv":
        angles = 2.0 * np.pi * np.arange(20) / 20.0
        for img in images:
            j = rng.integers(20)
            if j == 0:
                out.append(img.copy())
            else:
                out.append(
                    K.rotate_bilinear(
                        np.ascontiguousarray(img), np.cos(angles[j]), np.sin(angles[j])
                    )
                )
    else:
        raise ValueError(f"unknown setting {setting!r} (expected i, ii, iii or iv)")
    labels = None if ds.labels is None else ds.labels.copy()
    return Dataset(np.stack(out), labels)


# ---------------------------------------------------------------------------
# dataset file format "GTDS1": 8-byte magic, JSON header line, little-endian
# float32 payload in row-major order, then one unsigned byte per label when
# labels are present.

def save_dataset(ds: Dataset, path) -> None:
    header = {
        "count": len(ds),
        "shape": list(ds.data.shape[1:]),
        "labels": ds.labels is not None,
    }
    with open(path, "wb") as fh:
        fh.write(DATASET_MAGIC)
        fh.write(json.dumps(header).encode("utf-8") + b"\n")
        fh.write(np.ascontiguousarray(ds.data, dtype="<f4").tobytes())
        if ds.labels is not None:
            fh.write(np.ascontiguousarray(ds.labels, dtype=np.uint8).tobytes())


def load_dataset(path) -> Dataset:
    with open(path, "rb") as fh:
        magic = fh.read(len(DATASET_MAGIC))
        if magic != DATASET_MAGIC:
            raise ValueError(f"bad dataset magic in {path}")
        header_line = fh.readline()
        if not header_line.endswith(b"\n"):
            raise ValueError(f"truncated dataset header in {path}")
        header = json.loads(header_line.decode("utf-8"))
        n = int(header["count"])
        shape = tuple(int(s) for s in header["shape"])
        count = n * int(np.prod(shape))
        buf = fh.read(4 * count)
        if len(buf) != 4 * count:
            raise ValueError(f"truncated dataset payload in {path}")
        data = np.frombuffer(buf, dtype="<f4").astype(np.float64).reshape((n,) + shape)
        labels = None
        if header["labels"]:
            lbuf = fh.read(n)
            if len(lbuf) != n:
                raise ValueError(f"truncated label block in {path}")
            labels = np.frombuffer(lbuf, dtype=np.uint8).astype(np.int64)
    return Dataset(data, labels)
