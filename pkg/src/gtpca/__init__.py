"""Transform-invariant principal component analysis.

Sequentially fits components that explain data up to a configurable family
of linear transforms (shifts, rotations, reflections), plus the synthetic
generators, PCA/MLP baselines and experiment CLI built around them.
"""

from .core import Rng, inner, norm, rng_uniform
from .model import (
    Component,
    FitConfig,
    GTPCModel,
    Loading,
    fit_component,
    fit_model,
    layer_gradient,
    layer_objective,
    load_model,
    project,
    project_batch,
    reconstruct,
    residual_mse,
    save_model,
)
from .transforms import (
    Identity,
    Reflection,
    Rotation,
    Shift1D,
    Shift2D,
    TransformFamily,
    adjoint_accumulate,
    apply,
    best_alignment,
    family_size,
    score_all,
    transform_norms,
)

__all__ = [
    "Rng",
    "inner",
    "norm",
    "rng_uniform",
    "Component",
    "FitConfig",
    "GTPCModel",
    "Loading",
    "fit_component",
    "fit_model",
    "layer_gradient",
    "layer_objective",
    "load_model",
    "project",
    "project_batch",
    "reconstruct",
    "residual_mse",
    "save_model",
    "Identity",
    "Reflection",
    "Rotation",
    "Shift1D",
    "Shift2D",
    "TransformFamily",
    "adjoint_accumulate",
    "apply",
    "best_alignment",
    "family_size",
    "score_all",
    "transform_norms",
]

__version__ = "0.1.0"
