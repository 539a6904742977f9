"""Conventional PCA oracle and the small downstream MLP classifier.

PCA here is uncentered on purpose: components are eigenvectors of the raw
second-moment matrix (1/n) sum x x^T, mirroring the transform-invariant
fits, which are also run on uncentered data. Computed via thin SVD of the
data matrix (identical eigenpairs, better behaved for n < d).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Rng
from .optim import AdamState, adam_step


@dataclass
class PCABasis:
    components: np.ndarray  # (K, d) orthonormal rows
    eigenvalues: np.ndarray  # (K,) non-increasing, eigenvalues of (1/n) X^T X
    sample_shape: tuple


def pca_fit(data, K: int) -> PCABasis:
    """Top-K eigenpairs of the uncentered second-moment matrix."""
    X = np.ascontiguousarray(data, dtype=np.float64)
    n = X.shape[0]
    sample_shape = X.shape[1:]
    flat = X.reshape(n, -1)
    d = flat.shape[1]
    if K > min(n, d):
        raise ValueError(f"K={K} exceeds min(samples, dim) = {min(n, d)}")
    _, s, vt = np.linalg.svd(flat, full_matrices=False)
    comps = vt[:K].copy()
    # deterministic sign: largest-magnitude entry of each component positive
    for row in comps:
        j = np.argmax(np.abs(row))
        if row[j] < 0:
            row *= -1.0
    return PCABasis(
        components=comps, eigenvalues=(s[:K] ** 2) / n, sample_shape=sample_shape
    )


def pca_project(basis: PCABasis, x, k: int | None = None) -> np.ndarray:
    k = len(basis.eigenvalues) if k is None else int(k)
    if k > len(basis.eigenvalues):
        raise ValueError(f"k={k} exceeds basis size {len(basis.eigenvalues)}")
    return basis.components[:k] @ np.asarray(x, dtype=np.float64).ravel()


def pca_reconstruct(basis: PCABasis, loadings) -> np.ndarray:
    loadings = np.asarray(loadings, dtype=np.float64)
    out = loadings @ basis.components[: len(loadings)]
    return out.reshape(basis.sample_shape)


def pca_project_batch(basis: PCABasis, data, k: int) -> np.ndarray:
    X = np.ascontiguousarray(data, dtype=np.float64)
    return X.reshape(X.shape[0], -1) @ basis.components[:k].T


def pca_residual_mse(basis: PCABasis, data, k: int) -> float:
    """Aggregate relative residual energy, same convention as the model path."""
    X = np.ascontiguousarray(data, dtype=np.float64).reshape(len(data), -1)
    load = X @ basis.components[:k].T
    res = X - load @ basis.components[:k]
    return float(np.einsum("nd,nd->", res, res) / np.einsum("nd,nd->", X, X))


# ---------------------------------------------------------------------------
# downstream MLP: one hidden layer of 10 rectified units, softmax output,
# mean categorical cross-entropy minimized with Adam.

class MLP:
    def __init__(self, w1, b1, w2, b2, classes):
        self.w1 = w1
        self.b1 = b1
        self.w2 = w2
        self.b2 = b2
        self.classes = classes


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def mlp_fit(
    features,
    labels,
    epochs: int,
    rng: Rng,
    hidden: int = 10,
    batch_size: int = 32,
) -> MLP:
    """Train the classifier; deterministic given the rng.

    Shuffles once per epoch, walks minibatches in order, one Adam update
    per parameter array per batch.
    """
    X = np.ascontiguousarray(features, dtype=np.float64)
    y_raw = np.asarray(labels)
    if X.ndim != 2 or X.shape[0] != y_raw.shape[0]:
        raise ValueError("features must be (n, d) matching labels")
    classes, y = np.unique(y_raw, return_inverse=True)
    if classes.size < 2:
        raise ValueError("need at least 2 classes to fit the classifier")
    n, d = X.shape
    c = classes.size

    w1 = rng.normal(size=(d, hidden)) / np.sqrt(d)
    b1 = np.zeros(hidden)
    w2 = rng.normal(size=(hidden, c)) / np.sqrt(hidden)
    b2 = np.zeros(c)
    params = [w1, b1, w2, b2]
    states = [AdamState.init(p.shape) for p in params]

    for _ in range(epochs):
        order = np.argsort(rng.uniform(size=n), kind="stable")
        for start in range(0, n, batch_size):
            sel = order[start : start + batch_size]
            xb = X[sel]
            yb = y[sel]
            m = xb.shape[0]

            a1 = xb @ params[0] + params[1]
            h = np.maximum(a1, 0.0)
            logits = h @ params[2] + params[3]
            p = _softmax(logits)

            dz = p.copy()
            dz[np.arange(m), yb] -= 1.0
            dz /= m
            grads = [None] * 4
            grads[2] = h.T @ dz
            grads[3] = dz.sum(axis=0)
            dh = dz @ params[2].T
            dh[a1 <= 0.0] = 0.0
            grads[0] = xb.T @ dh
            grads[1] = dh.sum(axis=0)

            for j in range(4):
                params[j] = adam_step(states[j], params[j], grads[j])

    return MLP(params[0], params[1], params[2], params[3], classes)


def mlp_predict(m: MLP, features):
    """Predicted class labels and softmax probabilities."""
    X = np.ascontiguousarray(features, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != m.w1.shape[0]:
        raise ValueError(
            f"feature width {X.shape[1] if X.ndim == 2 else X.shape} "
            f"!= {m.w1.shape[0]}"
        )
    h = np.maximum(X @ m.w1 + m.b1, 0.0)
    probs = _softmax(h @ m.w2 + m.b2)
    return m.classes[np.argmax(probs, axis=1)], probs


def mlp_accuracy(m: MLP, features, labels) -> float:
    pred, _ = mlp_predict(m, features)
    return float(np.mean(pred == np.asarray(labels)))
