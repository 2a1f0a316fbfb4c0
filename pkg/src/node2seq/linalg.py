"""Dense kernels with explicit backward passes.

Every matrix is a 2-D ``float64`` numpy array. The functions here check
shapes and raise ``ValueError`` with both shapes in the message; they never
mutate their inputs.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    out = np.asarray(a, dtype=np.float64)
    if out.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {out.shape}")
    return out


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul dimension mismatch: {a.shape} x {b.shape}")
    return a @ b


def matmul_backward(grad_out: np.ndarray, a: np.ndarray, b: np.ndarray):
    """Return ``(grad_a, grad_b)`` for ``out = a @ b``."""
    expected = (a.shape[0], b.shape[1])
    if grad_out.shape != expected:
        raise ValueError(
            f"grad_out shape {grad_out.shape} does not match product shape {expected} "
            f"of {a.shape} x {b.shape}"
        )
    return grad_out @ b.T, a.T @ grad_out


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(grad_out: np.ndarray, x: np.ndarray) -> np.ndarray:
    if grad_out.shape != x.shape:
        raise ValueError(f"relu_backward shape mismatch: {grad_out.shape} vs {x.shape}")
    return np.where(x > 0.0, grad_out, 0.0)


def identity(x: np.ndarray) -> np.ndarray:
    return x


def identity_backward(grad_out: np.ndarray, x: np.ndarray) -> np.ndarray:
    return grad_out


def tanh_backward(grad_out: np.ndarray, x: np.ndarray) -> np.ndarray:
    return grad_out * (1.0 - np.tanh(x) ** 2)


# name -> (forward, backward taking the pre-activation input)
ACTIVATIONS: dict[str, tuple[Callable, Callable]] = {
    "relu": (relu, relu_backward),
    "identity": (identity, identity_backward),
    "tanh": (np.tanh, tanh_backward),
}


def row_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def row_softmax_cross_entropy(
    logits: np.ndarray, labels: Sequence[int], mask: Sequence[int]
) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over the rows in ``mask``.

    Returns the loss and its gradient w.r.t. ``logits``; rows outside the
    mask get zero gradient.
    """
    mask = np.asarray(mask, dtype=np.int64)
    if mask.size == 0:
        raise ValueError("cross-entropy mask is empty")
    labels = np.asarray(labels, dtype=np.int64)
    y = labels[mask]
    n_classes = logits.shape[1]
    bad = (y < 0) | (y >= n_classes)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise ValueError(
            f"label {int(y[i])} of node {int(mask[i])} out of range [0, {n_classes})"
        )
    rows = logits[mask]
    shifted = rows - rows.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    log_p = shifted[np.arange(mask.size), y] - log_z
    loss = float(-log_p.mean())

    probs = np.exp(shifted - log_z[:, None])
    probs[np.arange(mask.size), y] -= 1.0
    grad = np.zeros_like(logits)
    # np.add.at handles repeated indices in the mask
    np.add.at(grad, mask, probs / mask.size)
    return loss, grad
