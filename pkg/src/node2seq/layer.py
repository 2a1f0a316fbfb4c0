"""The Node2Seq layer.

For every node ``i``::

    xbar   = X @ W1
    s_i    = xbar[i] @ xbar.T            (only candidate columns are needed)
    idx    = neighbors of i ordered by s_i (or the non-local selection)
    X_s    = xbar[idx]
    F_i    = conv1d(X_s)                 stride 1, no padding unless k_i < K
    out_i  = readout(F_i)                mean / max / sum over rows
    xhat_i = X[i] @ W2 + out_i

The per-node helpers below are the reference semantics. The layer itself
(:func:`node2seq_forward` / :func:`node2seq_backward`) runs all nodes at once by
flattening every convolution window into one gather followed by one matmul.
The neighbor order is treated as a constant in the backward pass.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .graph import GraphStore, khop_reachability
from .linalg import matmul
from .selector import NeighborSequence, SelectorConfig, rank_all, select_all

READOUTS = ("mean", "max", "sum")


def glorot(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


@dataclass
class Node2SeqParams:
    w1: np.ndarray
    w2: np.ndarray
    kernel: np.ndarray  # (kernel_size, c', c'): tap t maps c' in -> c' out
    bias: np.ndarray
    grad_w1: np.ndarray = field(init=False, repr=False)
    grad_w2: np.ndarray = field(init=False, repr=False)
    grad_kernel: np.ndarray = field(init=False, repr=False)
    grad_bias: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        c, h = self.w1.shape
        if self.w2.shape != (c, h):
            raise ValueError(f"w2 shape {self.w2.shape} must equal w1 shape {self.w1.shape}")
        if self.kernel.ndim != 3 or self.kernel.shape[0] < 1 or self.kernel.shape[1:] != (h, h):
            raise ValueError(f"kernel shape {self.kernel.shape} must be (K>=1, {h}, {h})")
        if self.bias.shape != (h,):
            raise ValueError(f"bias shape {self.bias.shape} must be ({h},)")
        self.zero_grad()

    @classmethod
    def init(cls, rng: np.random.Generator, c_in: int, c_out: int, kernel_size: int) -> "Node2SeqParams":
        if kernel_size < 1:
            raise ValueError(f"kernel_size must be >= 1, got {kernel_size}")
        return cls(
            w1=glorot(rng, (c_in, c_out), c_in, c_out),
            w2=glorot(rng, (c_in, c_out), c_in, c_out),
            kernel=glorot(rng, (kernel_size, c_out, c_out), kernel_size * c_out, c_out),
            bias=np.zeros(c_out),
        )

    @property
    def kernel_size(self) -> int:
        return self.kernel.shape[0]

    @property
    def out_dim(self) -> int:
        return self.w1.shape[1]

    def zero_grad(self) -> None:
        self.grad_w1 = np.zeros_like(self.w1)
        self.grad_w2 = np.zeros_like(self.w2)
        self.grad_kernel = np.zeros_like(self.kernel)
        self.grad_bias = np.zeros_like(self.bias)

    def named(self) -> dict[str, tuple[np.ndarray, np.ndarray]]:
        return {
            "w1": (self.w1, self.grad_w1),
            "w2": (self.w2, self.grad_w2),
            "kernel": (self.kernel, self.grad_kernel),
            "bias": (self.bias, self.grad_bias),
        }


@dataclass(frozen=True)
class LayerConfig:
    readout: str = "mean"
    selector: SelectorConfig = SelectorConfig()

    def __post_init__(self):
        if self.readout not in READOUTS:
            raise ValueError(f"unknown readout {self.readout!r}; valid: {', '.join(READOUTS)}")


# --------------------------------------------------------------------------
# per-node reference operations
# --------------------------------------------------------------------------


def project_features(x: np.ndarray, w1: np.ndarray) -> np.ndarray:
    return matmul(x, w1)


def attention_scores(xbar: np.ndarray, i: int, candidates=None) -> np.ndarray:
    """Raw dot-product scores of node ``i`` against every node.

    With ``candidates`` only those entries are computed; the rest are NaN.
    """
    if candidates is None:
        return xbar @ xbar[i]
    cand = np.asarray(candidates, dtype=np.int64)
    s = np.full(xbar.shape[0], np.nan)
    s[cand] = xbar[cand] @ xbar[i]
    return s


def arrange_features(xbar: np.ndarray, seq: NeighborSequence) -> np.ndarray:
    return xbar[np.asarray(seq.indices, dtype=np.int64)]


def _pad(x_s: np.ndarray, kernel_size: int) -> np.ndarray:
    if x_s.shape[0] >= kernel_size:
        return x_s
    return np.vstack([x_s, np.zeros((kernel_size - x_s.shape[0], x_s.shape[1]))])


def conv1d_aggregate(x_s: np.ndarray, params: Node2SeqParams) -> np.ndarray:
    """Stride-1 1-D convolution along the sequence with full channel mixing.

    Sequences shorter than the kernel are zero-padded at the tail, giving a
    single output row.
    """
    if x_s.shape[0] < 1:
        raise ValueError("conv1d needs at least one input row")
    K = params.kernel_size
    xp = _pad(x_s, K)
    o = xp.shape[0] - K + 1
    out = np.tile(params.bias, (o, 1))
    for r in range(o):
        for t in range(K):
            out[r] += xp[r + t] @ params.kernel[t]
    return out


def conv1d_backward(grad_out: np.ndarray, x_s: np.ndarray, params: Node2SeqParams):
    """Return ``(grad_x_s, grad_kernel, grad_bias)``; gradient reaching pad rows is dropped."""
    K = params.kernel_size
    xp = _pad(x_s, K)
    o = xp.shape[0] - K + 1
    if grad_out.shape != (o, params.out_dim):
        raise ValueError(f"grad_out shape {grad_out.shape} != conv output shape {(o, params.out_dim)}")
    gx = np.zeros_like(xp)
    gk = np.zeros_like(params.kernel)
    for r in range(o):
        for t in range(K):
            gx[r + t] += params.kernel[t] @ grad_out[r]
            gk[t] += np.outer(xp[r + t], grad_out[r])
    return gx[: x_s.shape[0]], gk, grad_out.sum(axis=0)


def readout(f: np.ndarray, kind: str = "mean") -> tuple[np.ndarray, np.ndarray | None]:
    """Column-wise reduction. Returns the vector and, for ``max``, the argmax rows."""
    if f.shape[0] < 1:
        raise ValueError("readout needs at least one row")
    if kind == "mean":
        return f.mean(axis=0), None
    if kind == "sum":
        return f.sum(axis=0), None
    if kind == "max":
        arg = f.argmax(axis=0)
        return f[arg, np.arange(f.shape[1])], arg
    raise ValueError(f"unknown readout {kind!r}; valid: {', '.join(READOUTS)}")


def readout_backward(grad: np.ndarray, rows: int, kind: str, argmax=None) -> np.ndarray:
    if kind == "mean":
        return np.tile(grad / rows, (rows, 1))
    if kind == "sum":
        return np.tile(grad, (rows, 1))
    out = np.zeros((rows, grad.size))
    out[argmax, np.arange(grad.size)] = grad
    return out


def combine(x_i: np.ndarray, w2: np.ndarray, out: np.ndarray) -> np.ndarray:
    """``x_i @ W2 + out`` with ``x_i`` the node's input (pre-projection) row."""
    x_i = np.asarray(x_i, dtype=np.float64).ravel()
    if x_i.size != w2.shape[0] or np.size(out) != w2.shape[1]:
        raise ValueError(
            f"combine shape mismatch: x_i {x_i.shape}, w2 {w2.shape}, out {np.shape(out)}"
        )
    return x_i @ w2 + out


# --------------------------------------------------------------------------
# batched layer
# --------------------------------------------------------------------------


@dataclass
class Node2SeqTape:
    x: np.ndarray | sp.spmatrix
    seq_ptr: np.ndarray
    seq_idx: np.ndarray
    windows: np.ndarray      # (W, K*c') gathered conv inputs
    gather: np.ndarray       # (W, K) rows of the padded xbar; n marks padding
    win_ptr: np.ndarray      # node i owns windows win_ptr[i]:win_ptr[i+1]
    readout: str
    argmax: np.ndarray | None
    shape: tuple[int, int]

    def sequence(self, i: int) -> np.ndarray:
        return self.seq_idx[self.seq_ptr[i] : self.seq_ptr[i + 1]]


def sequences(
    xbar: np.ndarray, g: GraphStore, selector: SelectorConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Order every node's candidates; flat ``(ptr, idx)`` arrays."""
    if selector.enabled and selector.ell > 1:
        return select_all(xbar, g.csr_self, khop_reachability(g, selector.ell), selector.beta)
    if selector.enabled:
        # ell == 1: empty pool, rejected locals are refilled in score order
        return select_all(xbar, g.csr_self, g.csr_self, selector.beta)
    return rank_all(xbar, g.csr_self)


def _windows(seq_ptr: np.ndarray, seq_idx: np.ndarray, n: int, K: int):
    k = np.diff(seq_ptr)
    o = np.maximum(k - K + 1, 1)
    win_ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(o, out=win_ptr[1:])
    owner = np.repeat(np.arange(n), o)
    r = np.arange(win_ptr[-1]) - win_ptr[owner]
    pos = r[:, None] + np.arange(K)[None, :]
    valid = pos < k[owner][:, None]
    flat = np.where(valid, seq_ptr[owner][:, None] + pos, 0)
    gather = np.where(valid, seq_idx[flat] if seq_idx.size else 0, n)
    return gather, win_ptr, owner


def node2seq_forward(
    x,
    g: GraphStore,
    params: Node2SeqParams,
    config: LayerConfig = LayerConfig(),
    score_input=None,
) -> tuple[np.ndarray, Node2SeqTape]:
    """Run the layer for every node.

    ``x`` may be dense or scipy-sparse. When ``score_input`` is given the
    neighbor ordering is computed from ``score_input @ W1`` instead of
    ``x @ W1`` (used to rank on clean features while aggregating dropped-out
    ones).
    """
    n = g.n
    if x.shape[0] != n:
        raise ValueError(f"input has {x.shape[0]} rows, graph has {n} nodes")
    if x.shape[1] != params.w1.shape[0]:
        raise ValueError(f"input width {x.shape[1]} != w1 rows {params.w1.shape[0]}")
    K, h = params.kernel_size, params.out_dim
    xbar = np.asarray(x @ params.w1)
    xs = xbar if score_input is None else np.asarray(score_input @ params.w1)
    seq_ptr, seq_idx = sequences(xs, g, config.selector)

    gather, win_ptr, owner = _windows(seq_ptr, seq_idx, n, K)
    xpad = np.vstack([xbar, np.zeros((1, h))])
    windows = xpad[gather].reshape(-1, K * h)
    f = windows @ params.kernel.reshape(K * h, h) + params.bias

    argmax = None
    starts = win_ptr[:-1]
    if n == 0:
        out = np.zeros((0, h))
    elif config.readout == "mean":
        out = np.add.reduceat(f, starts, axis=0) / np.diff(win_ptr)[:, None]
    elif config.readout == "sum":
        out = np.add.reduceat(f, starts, axis=0)
    else:
        out = np.maximum.reduceat(f, starts, axis=0)
        hit = np.where(f == out[owner], np.arange(f.shape[0])[:, None], f.shape[0])
        argmax = np.minimum.reduceat(hit, starts, axis=0)

    xhat = np.asarray(x @ params.w2) + out
    tape = Node2SeqTape(x, seq_ptr, seq_idx, windows, gather, win_ptr, config.readout, argmax, (n, h))
    return xhat, tape


def node2seq_backward(
    grad_xhat: np.ndarray, tape: Node2SeqTape, params: Node2SeqParams, need_input_grad: bool = True
):
    """Fill the parameter gradients (zeroed first); return the input gradient or None."""
    if grad_xhat.shape != tape.shape:
        raise ValueError(f"grad shape {grad_xhat.shape} does not match tape output {tape.shape}")
    n, h = tape.shape
    K = params.kernel_size
    params.zero_grad()
    x = tape.x
    o = np.diff(tape.win_ptr)
    owner = np.repeat(np.arange(n), o)

    if tape.readout == "mean":
        gf = grad_xhat[owner] / o[owner][:, None]
    elif tape.readout == "sum":
        gf = grad_xhat[owner]
    else:
        gf = np.zeros((owner.size, h))
        cols = np.broadcast_to(np.arange(h), tape.argmax.shape)
        gf[tape.argmax, cols] = grad_xhat

    params.grad_kernel = (tape.windows.T @ gf).reshape(K, h, h)
    params.grad_bias = gf.sum(axis=0)
    gwin = (gf @ params.kernel.reshape(K * h, h).T).reshape(-1, h)
    scatter = sp.csr_matrix(
        (np.ones(gwin.shape[0]), (tape.gather.ravel(), np.arange(gwin.shape[0]))),
        shape=(n + 1, gwin.shape[0]),
    )
    grad_xbar = np.asarray(scatter @ gwin)[:n]

    params.grad_w1 = np.asarray(x.T @ grad_xbar)
    params.grad_w2 = np.asarray(x.T @ grad_xhat)
    if not need_input_grad:
        return None
    return grad_xbar @ params.w1.T + grad_xhat @ params.w2.T
