"""Graph convolution layer ``f(S @ X @ W)`` with ``S`` the normalized adjacency."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .layer import glorot
from .linalg import ACTIVATIONS


@dataclass
class GcnParams:
    w: np.ndarray
    grad_w: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.w.ndim != 2:
            raise ValueError(f"GCN weight must be 2-D, got shape {self.w.shape}")
        self.zero_grad()

    @classmethod
    def init(cls, rng: np.random.Generator, c_in: int, c_out: int) -> "GcnParams":
        return cls(glorot(rng, (c_in, c_out), c_in, c_out))

    @property
    def out_dim(self) -> int:
        return self.w.shape[1]

    def zero_grad(self) -> None:
        self.grad_w = np.zeros_like(self.w)

    def named(self) -> dict[str, tuple[np.ndarray, np.ndarray]]:
        return {"w": (self.w, self.grad_w)}


@dataclass
class GcnTape:
    x: np.ndarray | sp.spmatrix
    norm_adj: sp.spmatrix
    pre: np.ndarray
    activation: str


def gcn_forward(x, norm_adj, params: GcnParams, apply_relu: bool = True, activation: str | None = None):
    """Return ``(out, tape)``. ``activation`` overrides ``apply_relu`` when given."""
    n = norm_adj.shape[0]
    if x.shape[0] != n:
        raise ValueError(f"input has {x.shape[0]} rows, adjacency is {norm_adj.shape}")
    if x.shape[1] != params.w.shape[0]:
        raise ValueError(f"input width {x.shape[1]} != weight rows {params.w.shape[0]}")
    act = activation or ("relu" if apply_relu else "identity")
    pre = np.asarray(norm_adj @ np.asarray(x @ params.w))
    return ACTIVATIONS[act][0](pre), GcnTape(x, norm_adj, pre, act)


def gcn_backward(grad_out: np.ndarray, tape: GcnTape, params: GcnParams, need_input_grad: bool = True):
    if grad_out.shape != tape.pre.shape:
        raise ValueError(f"grad shape {grad_out.shape} does not match layer output {tape.pre.shape}")
    g = ACTIVATIONS[tape.activation][1](grad_out, tape.pre)
    # S is symmetric, so S.T @ g == S @ g
    sg = np.asarray(tape.norm_adj @ g)
    params.grad_w = np.asarray(tape.x.T @ sg)
    if not need_input_grad:
        return None
    return sg @ params.w.T
