"""Adam optimizer used for component fitting and the downstream classifier.

Plain minimization; callers that maximize negate their gradient. Defaults
match the reference deep-learning framework's documented values
(lr=0.001, beta1=0.9, beta2=0.999, eps=1e-7).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-7

    @classmethod
    def init(cls, shape, lr=0.001, beta1=0.9, beta2=0.999, eps=1e-7) -> "AdamState":
        return cls(
            m=np.zeros(shape),
            v=np.zeros(shape),
            lr=lr,
            beta1=beta1,
            beta2=beta2,
            eps=eps,
        )

    def copy(self) -> "AdamState":
        return AdamState(
            m=self.m.copy(),
            v=self.v.copy(),
            step=self.step,
            lr=self.lr,
            beta1=self.beta1,
            beta2=self.beta2,
            eps=self.eps,
        )


def adam_step(state: AdamState, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
    """One bias-corrected Adam update; mutates `state`, returns new params."""
    params = np.asarray(params, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if params.shape != grad.shape or params.shape != state.m.shape:
        raise ValueError(
            f"adam_step: shape mismatch params {params.shape}, grad {grad.shape}, "
            f"state {state.m.shape}"
        )
    if not np.all(np.isfinite(grad)):
        raise ValueError(f"non-finite gradient at optimizer step {state.step + 1}")
    state.step += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * (grad * grad)
    m_hat = state.m / (1.0 - state.beta1**state.step)
    v_hat = state.v / (1.0 - state.beta2**state.step)
    return params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
