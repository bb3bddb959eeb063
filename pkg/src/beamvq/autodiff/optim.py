"""Adam with bias correction."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import NonFiniteError, ShapeError
from .tensor import Tensor


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


class Adam:
    """Adam over a name -> Tensor parameter mapping.

    Parameters are updated in place; the moment buffers are keyed by name
    so the optimizer survives parameter dict rebuilds.
    """

    def __init__(self, params: dict[str, Tensor], lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.state = AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps)
        for name, p in params.items():
            self.state.m[name] = np.zeros_like(p.data)
            self.state.v[name] = np.zeros_like(p.data)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def step(self, grads: dict[str, np.ndarray] | None = None) -> None:
        st = self.state
        if grads is None:
            grads = {n: p.grad for n, p in self.params.items() if p.grad is not None}
        for name, g in grads.items():
            if not np.isfinite(g).all():
                raise NonFiniteError(f"non-finite gradient for parameter {name!r} at step {st.step + 1}")
            if g.shape != self.params[name].shape:
                raise ShapeError(f"adam_step[{name}]", g.shape, self.params[name].shape)
        st.step += 1
        t = st.step
        c1 = 1.0 - st.beta1**t
        c2 = 1.0 - st.beta2**t
        for name, g in grads.items():
            p = self.params[name]
            m = st.m[name]
            v = st.v[name]
            m *= st.beta1
            m += (1 - st.beta1) * g
            v *= st.beta2
            v += (1 - st.beta2) * (g * g)
            mhat = m / c1
            vhat = v / c2
            p.data -= (st.lr * mhat / (np.sqrt(vhat) + st.eps)).astype(p.dtype, copy=False)
