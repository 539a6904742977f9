"""Transform-invariant components: objective, fitting, projection, ResMSE.

A component is a weight array scored against data through a transform
family; the layer objective for one sample is the best squared normalized
alignment max_t <x, T_t w>^2 / ||T_t w||^2. Components are fit one at a
time by stochastic gradient ascent on minibatch means of that objective,
each on the residuals the previous components left behind (sequential
deflation). Projection re-runs the same greedy alignment to produce, per
component, a signed coefficient plus the index of the best-aligning
transform.

Conventions:
  - weights are renormalized to unit norm after every optimizer step; the
    objective is scale-invariant, so this only pins the representation;
  - deflation subtracts the orthogonal projection onto the unit direction
    T*w / ||T*w||, which keeps per-sample residual norms non-increasing
    for every family, including cropping shifts and rotations;
  - the best transform maximizes the *squared* normalized score, ties
    break to the lowest index; the stored coefficient keeps its sign.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .core import Rng, norm
from .optim import AdamState, adam_step
from .transforms import (
    DEGENERATE_TOL,
    TransformFamily,
    best_alignment,
    family_from_spec,
)

MODEL_MAGIC = b"GTPCA\x00v1"


@dataclass
class Component:
    weight: np.ndarray
    index: int  # 1-based position in the model


@dataclass
class Loading:
    component: int  # 1-based component index
    transform: int
    coeff: float


@dataclass
class FitConfig:
    epochs_per_component: int = 5
    batches_per_epoch: int = 500
    batch_size: int = 32
    seed: int = 0
    init_scale: float = 1.0

    def __post_init__(self):
        for name in ("epochs_per_component", "batches_per_epoch", "batch_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"FitConfig.{name} must be >= 1")


class GTPCModel:
    """Ordered components plus the family they were fit under."""

    def __init__(self, family: TransformFamily, components: list[Component]):
        for i, comp in enumerate(components):
            if comp.index != i + 1:
                raise ValueError("component indices must be consecutive from 1")
            if comp.weight.shape != family.weight_shape:
                raise ValueError("component weight shape does not match family")
        self.family = family
        self.components = components

    @property
    def k(self) -> int:
        return len(self.components)


# ---------------------------------------------------------------------------
# objective and gradient

def layer_objective(x, w, family: TransformFamily) -> float:
    """Best squared normalized alignment of one sample with the weight."""
    return best_alignment(family, x, w)[2]


def layer_gradient(x, w, family: TransformFamily) -> np.ndarray:
    """Gradient of the layer objective w.r.t. the weight.

    The argmax transform is held fixed (subgradient through the max):
    with u = Tw, c = <x, u>, n = ||u||^2, the sample-domain gradient is
    (2c/n) x - (2c^2/n^2) u, routed back by the adjoint.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    t, _, _ = best_alignment(family, x, w)
    prep = family.prepare(w)
    if prep.norms[t] <= DEGENERATE_TOL:
        raise ValueError(f"degenerate transform norm at argmax index {t}")
    w = np.ascontiguousarray(w, dtype=np.float64)
    u = family.transformed(t, w, prep)
    n = prep.norms[t] ** 2
    c = float(np.dot(x.ravel(), u.ravel()))
    return family.adjoint(t, (2.0 * c / n) * x - (2.0 * c * c / (n * n)) * u)


def _batch_objective_gradient(family, X, w, prep):
    """Mean objective and mean gradient over a batch (ordered accumulation)."""
    scores, C, prep = family.score_batch(X, w, prep)
    sq = scores * scores
    t_star = np.argmax(sq, axis=1)
    rows = np.arange(X.shape[0])
    obj = float(np.mean(sq[rows, t_star]))
    grad = np.zeros(family.weight_shape)
    for i in range(X.shape[0]):
        t = int(t_star[i])
        nrm = prep.norms[t]
        if nrm <= DEGENERATE_TOL:
            continue  # sample aligned with nothing usable, contributes no pull
        n = nrm * nrm
        c = C[i, t]
        u = family.transformed(t, w, prep)
        grad += family.adjoint(t, (2.0 * c / n) * X[i] - (2.0 * c * c / (n * n)) * u)
    grad /= X.shape[0]
    return obj, grad


# ---------------------------------------------------------------------------
# fitting

def fit_component(
    data,
    family: TransformFamily,
    cfg: FitConfig,
    rng: Rng,
    index: int = 1,
    epoch_callback=None,
) -> Component:
    """Fit one component to `data` by minibatch gradient ascent.

    Initializes from a unit-normalized Gaussian draw, takes
    epochs * batches Adam steps on the negated mean objective gradient and
    renormalizes the weight after every step. Deterministic given the rng.
    `epoch_callback(epoch, weight, mean_batch_objective)` is invoked after
    each epoch when provided.
    """
    data = np.ascontiguousarray(data, dtype=np.float64)
    n = data.shape[0]
    if n == 0:
        raise ValueError("fit_component: empty data")

    w = rng.normal(size=family.weight_shape) * cfg.init_scale
    w /= max(norm(w), DEGENERATE_TOL)
    state = AdamState.init(family.weight_shape)

    for epoch in range(cfg.epochs_per_component):
        obj_sum = 0.0
        for b in range(cfg.batches_per_epoch):
            idx = rng.integers(n, size=cfg.batch_size)
            batch = data[idx]
            prep = family.prepare(w)
            obj, grad = _batch_objective_gradient(family, batch, w, prep)
            if not np.isfinite(obj):
                raise ValueError(
                    f"non-finite objective fitting component {index} "
                    f"(epoch {epoch}, batch {b})"
                )
            obj_sum += obj
            w = adam_step(state, w, -grad)
            w /= max(norm(w), DEGENERATE_TOL)
        if epoch_callback is not None:
            epoch_callback(epoch, w.copy(), obj_sum / cfg.batches_per_epoch)

    return Component(weight=w, index=index)


def _deflate(family, X, w):
    """Subtract each sample's projection onto its best-aligned unit direction.

    Returns (indices, coeffs, new X). The coefficient is <x, u> for
    u = T*w/||T*w||, so the updated residual is exactly orthogonal to u.
    """
    scores, _, prep = family.score_batch(X, w)
    sq = scores * scores
    idx = np.argmax(sq, axis=1)
    coeff = scores[np.arange(X.shape[0]), idx]
    out = X.copy()
    for i in range(X.shape[0]):
        t = int(idx[i])
        nrm = prep.norms[t]
        if nrm <= DEGENERATE_TOL or coeff[i] == 0.0:
            continue
        u = family.transformed(t, w, prep) / nrm
        out[i] -= coeff[i] * u
    return idx, coeff, out


def fit_model(data, family: TransformFamily, K: int, cfg: FitConfig, epoch_callback=None) -> GTPCModel:
    """Fit K components sequentially, deflating residuals between fits.

    Component k trains on the residuals of components 1..k-1; residual
    alignments are frozen once a component finishes. `epoch_callback`
    receives (component_index, epoch, weight, mean_batch_objective).
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    residuals = np.ascontiguousarray(data, dtype=np.float64).copy()
    base = Rng(cfg.seed)
    components = []
    for k in range(1, K + 1):
        cb = None
        if epoch_callback is not None:
            cb = lambda e, w, o, _k=k: epoch_callback(_k, e, w, o)
        comp = fit_component(
            residuals, family, cfg, base.spawn(k), index=k, epoch_callback=cb
        )
        components.append(comp)
        if k < K:
            _, _, residuals = _deflate(family, residuals, comp.weight)
    return GTPCModel(family, components)


# ---------------------------------------------------------------------------
# projection / reconstruction / ResMSE

def project(model: GTPCModel, x, k: int | None = None) -> list[Loading]:
    """Greedy loadings of one sample under the first k components."""
    k = model.k if k is None else int(k)
    if not 0 <= k <= model.k:
        raise ValueError(f"k={k} out of range [0, {model.k}]")
    x = np.ascontiguousarray(x, dtype=np.float64)
    coeffs, tids, _ = project_batch(model, x[None], k)
    return [
        Loading(component=j + 1, transform=int(tids[0, j]), coeff=float(coeffs[0, j]))
        for j in range(k)
    ]


def project_batch(model: GTPCModel, X, k: int | None = None):
    """Loadings for a batch: (coeffs (n, k), transform ids (n, k), residuals)."""
    k = model.k if k is None else int(k)
    if not 0 <= k <= model.k:
        raise ValueError(f"k={k} out of range [0, {model.k}]")
    X = np.ascontiguousarray(X, dtype=np.float64)
    n = X.shape[0]
    coeffs = np.zeros((n, k))
    tids = np.zeros((n, k), dtype=np.int64)
    residuals = X.copy()
    for j in range(k):
        idx, coeff, residuals = _deflate(
            model.family, residuals, model.components[j].weight
        )
        coeffs[:, j] = coeff
        tids[:, j] = idx
    return coeffs, tids, residuals


def reconstruct(model: GTPCModel, loadings) -> np.ndarray:
    """Sum of coeff * T*v / ||T*v|| over the loadings; empty list gives zeros."""
    out = np.zeros(model.family.sample_shape)
    for ld in loadings:
        if not 1 <= ld.component <= model.k:
            raise ValueError(f"loading references missing component {ld.component}")
        w = model.components[ld.component - 1].weight
        u = model.family.apply(ld.transform, w)
        nrm = norm(u)
        if nrm <= DEGENERATE_TOL:
            if ld.coeff != 0.0:
                raise ValueError(
                    f"nonzero coefficient on degenerate transform {ld.transform}"
                )
            continue
        out += ld.coeff * (u / nrm)
    return out


def residual_mse(model: GTPCModel, data, k: int) -> float:
    """Aggregate relative residual energy after projecting onto k components.

    Total residual energy over total input energy: 1 for the empty
    projection, 0 for perfect reconstruction.
    """
    X = np.ascontiguousarray(data, dtype=np.float64)
    sample_energy = np.einsum("n...,n...->n", X, X)
    for i, e in enumerate(sample_energy):
        if e <= 0.0:
            raise ValueError(f"zero-norm sample at index {i}")
    _, _, residuals = project_batch(model, X, k)
    res_energy = np.einsum("n...,n...->n", residuals, residuals)
    return float(res_energy.sum() / sample_energy.sum())


# ---------------------------------------------------------------------------
# model file format "GTPC1": 8-byte magic, JSON header line, then K weight
# arrays as little-endian float32 in row-major order.

def save_model(model: GTPCModel, path) -> None:
    header = {
        "family": model.family.kind,
        "weight_shape": list(model.family.weight_shape),
        "sample_shape": list(model.family.sample_shape),
        "k": model.k,
        "angles": (
            [float(a) for a in model.family.angles]
            if model.family.kind == "rotation"
            else None
        ),
    }
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(json.dumps(header).encode("utf-8") + b"\n")
        for comp in model.components:
            fh.write(np.ascontiguousarray(comp.weight, dtype="<f4").tobytes())


def load_model(path) -> GTPCModel:
    with open(path, "rb") as fh:
        magic = fh.read(len(MODEL_MAGIC))
        if magic != MODEL_MAGIC:
            raise ValueError(f"bad model magic in {path}")
        header_line = fh.readline()
        if not header_line.endswith(b"\n"):
            raise ValueError(f"truncated model header in {path}")
        header = json.loads(header_line.decode("utf-8"))
        weight_shape = tuple(int(s) for s in header["weight_shape"])
        sample_shape = tuple(int(s) for s in header["sample_shape"])
        family = family_from_spec(
            header["family"], weight_shape, sample_shape, header.get("angles")
        )
        count = int(np.prod(weight_shape))
        components = []
        for j in range(int(header["k"])):
            buf = fh.read(4 * count)
            if len(buf) != 4 * count:
                raise ValueError(f"truncated weight data in {path}")
            w = np.frombuffer(buf, dtype="<f4").astype(np.float64)
            if w.size != count:
                raise ValueError(f"weight size mismatch in {path}")
            components.append(Component(weight=w.reshape(weight_shape), index=j + 1))
    return GTPCModel(family, components)
