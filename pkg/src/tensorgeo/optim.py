"""SGD and Adam parameter updates.

Parameters and gradients are either single arrays or mappings from
parameter name to array.  Updates return new arrays; inputs are untouched.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import ShapeError, UnsupportedError
from .tensor import as_array


def _pairs(params, grads):
    if isinstance(params, Mapping):
        missing = set(params) - set(grads)
        if missing:
            raise ShapeError(f"no gradient for parameters {sorted(missing)}")
        return {k: (as_array(params[k]), as_array(grads[k])) for k in params}
    return {None: (as_array(params), as_array(grads))}


def _check(name, p, g):
    if p.shape != g.shape:
        raise ShapeError(f"parameter {name!r} has shape {p.shape} but gradient {g.shape}")


def _unwrap(out):
    return out[None] if list(out) == [None] else out


def sgd_step(params, grads, lr: float):
    """``p - lr * g`` for every parameter."""
    out = {}
    for name, (p, g) in _pairs(params, grads).items():
        _check(name, p, g)
        out[name] = (p - np.float32(lr) * g).astype(np.float32)
    return _unwrap(out)


@dataclass
class OptimizerState:
    kind: str = "sgd"
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0

    def __post_init__(self):
        if self.kind not in ("sgd", "adam"):
            raise UnsupportedError(f"unknown optimizer {self.kind!r}")

    def step(self, params, grads):
        if self.kind == "sgd":
            return sgd_step(params, grads, self.lr)
        return adam_step(self, params, grads)[0]


def adam_step(state: OptimizerState, params, grads):
    """One bias-corrected Adam update; returns ``(new_params, state)``.

    Moment accumulators start at zero the first time a parameter is seen.
    """
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1, c2 = 1 - b1 ** state.t, 1 - b2 ** state.t
    out = {}
    for name, (p, g) in _pairs(params, grads).items():
        _check(name, p, g)
        m = state.m.get(name, np.zeros_like(p))
        v = state.v.get(name, np.zeros_like(p))
        if m.shape != p.shape:
            raise ShapeError(f"moment for {name!r} has shape {m.shape}, parameter {p.shape}")
        m = (b1 * m + (1 - b1) * g).astype(np.float32)
        v = (b2 * v + (1 - b2) * g * g).astype(np.float32)
        state.m[name], state.v[name] = m, v
        step = state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        out[name] = (p - step).astype(np.float32)
    return _unwrap(out), state
