"""Adam with bias correction over one or more parameter arrays."""

from dataclasses import dataclass, field
from typing import List, Sequence, Union

import numpy as np

from .errors import NumericError

Arrays = Union[np.ndarray, Sequence[np.ndarray]]


@dataclass
class AdamState:
    m: List[np.ndarray]
    v: List[np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: Arrays, **kwargs) -> "AdamState":
        arrays = _as_list(params)
        return cls(m=[np.zeros_like(a) for a in arrays],
                   v=[np.zeros_like(a) for a in arrays], **kwargs)


def _as_list(params: Arrays) -> List[np.ndarray]:
    if isinstance(params, np.ndarray):
        return [params]
    return list(params)


def adam_step(params: Arrays, grads: Arrays, state: AdamState, lr: float) -> AdamState:
    """One in-place Adam update with bias correction.

    Returns the state (mutated in place) so callers can thread it through.
    """
    p_list = _as_list(params)
    g_list = _as_list(grads)
    if len(p_list) != len(g_list) or len(p_list) != len(state.m):
        raise NumericError("parameter/gradient/state arity mismatch")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** state.step
    bc2 = 1.0 - b2 ** state.step
    for p, g, m, v in zip(p_list, g_list, state.m, state.v):
        if p.shape != g.shape:
            raise NumericError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        if not np.all(np.isfinite(g)):
            raise NumericError("non-finite gradient")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * np.square(g)
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return state
