"""Finite-difference verification of every model gradient."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gcn import gcn_forward
from .graph import build_graph, khop_reachability
from .layer import Node2SeqParams, node2seq_forward
from .linalg import row_softmax_cross_entropy
from .training import Model

# |analytic - numeric| / max(|analytic|, |numeric|, REL_FLOOR), elementwise
REL_FLOOR = 1e-7


@dataclass
class GradcheckResult:
    errors: dict[str, float]
    tolerance: float
    resamples: int

    @property
    def worst(self) -> float:
        return max(self.errors.values())

    @property
    def passed(self) -> bool:
        return all(np.isfinite(e) and e < self.tolerance for e in self.errors.values())


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = REL_FLOOR) -> float:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom)) if analytic.size else 0.0


def score_gap(model: Model, x: np.ndarray, graph, margin_beta: bool) -> float:
    """Smallest score difference that could flip a neighbor ordering."""
    layer = model.layer1
    if not isinstance(layer, Node2SeqParams):
        return np.inf
    sel = model.layer_config.selector
    xbar = x @ layer.w1
    pattern = khop_reachability(graph, sel.ell) if sel.enabled else graph.csr_self
    gap = np.inf
    for i in range(graph.n):
        cand = pattern.indices[pattern.indptr[i] : pattern.indptr[i + 1]]
        s = np.sort(xbar[cand] @ xbar[i])
        if s.size > 1:
            gap = min(gap, float(np.min(np.diff(s))))
        if margin_beta and sel.enabled:
            gap = min(gap, float(np.min(np.abs(s - sel.beta))))
    return gap


def _relu_margin(model: Model, x, graph) -> float:
    """Smallest |pre-activation| on the ReLU paths; small values risk kinks."""
    if isinstance(model.layer1, Node2SeqParams):
        pre1, _ = node2seq_forward(x, graph, model.layer1, model.layer_config)
    else:
        pre1, _ = gcn_forward(x, graph.norm_adj, model.layer1, activation="identity")
    h1 = np.maximum(pre1, 0)
    pre2, _ = gcn_forward(h1, graph.norm_adj, model.layer2, activation="identity")
    pres = [pre1] if model.layer3 is None else [pre1, pre2]
    return float(min(np.min(np.abs(p)) for p in pres))


def random_instance(
    rng: np.random.Generator,
    n: int = 8,
    c: int = 4,
    hidden: int = 5,
    kernel_size: int = 3,
    num_classes: int = 3,
    edge_prob: float = 0.4,
    **model_kwargs,
):
    edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < edge_prob]
    graph = build_graph(n, edges)
    x = rng.uniform(-1.0, 1.0, size=(n, c))
    labels = rng.integers(0, num_classes, size=n)
    model = Model(
        c, num_classes, hidden=hidden, kernel_size=kernel_size, dropout_rate=0.0, rng=rng, **model_kwargs
    )
    return graph, x, labels, model


def numeric_gradient(f, theta: np.ndarray, h: float) -> np.ndarray:
    grad = np.zeros_like(theta)
    it = np.nditer(theta, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = theta[idx]
        theta[idx] = orig + h
        up = f()
        theta[idx] = orig - h
        down = f()
        theta[idx] = orig
        grad[idx] = (up - down) / (2.0 * h)
    return grad


def gradcheck(
    seed: int = 0,
    h: float = 1e-5,
    tolerance: float = 1e-4,
    n: int = 8,
    c: int = 4,
    hidden: int = 5,
    kernel_size: int = 3,
    weight_decay: float = 5e-4,
    max_resamples: int = 100,
    min_gap: float = 1e-3,
    corrupt_conv: bool = False,
    **model_kwargs,
) -> GradcheckResult:
    """Compare analytic and central-difference gradients on a random model.

    Instances whose neighbor scores come within ``min_gap`` of a tie (or of
    the selection threshold), or whose ReLU inputs sit near zero, are
    resampled. ``corrupt_conv`` scales the conv-kernel gradient by 1.1, for
    testing that the checker catches a broken backward pass.
    """
    rng = np.random.default_rng(seed)
    for attempt in range(1, max_resamples + 1):
        graph, x, labels, model = random_instance(rng, n, c, hidden, kernel_size, **model_kwargs)
        if score_gap(model, x, graph, margin_beta=True) > min_gap and _relu_margin(model, x, graph) > min_gap:
            break
    else:
        raise RuntimeError(f"no tie-free instance found in {max_resamples} resamples")

    mask = np.arange(n)

    def loss() -> float:
        return model.loss(x, graph, labels, mask, weight_decay, backward=False)

    model.loss(x, graph, labels, mask, weight_decay)
    analytic = {k: g.copy() for k, g in model.gradients().items()}
    if corrupt_conv and "layer1.kernel" in analytic:
        analytic["layer1.kernel"] *= 1.1
    # the input gradient excludes weight decay, which does not depend on x
    _, g_logits = row_softmax_cross_entropy(model.forward(x, graph), labels, mask)
    analytic["input.x"] = model.backward(g_logits, need_input_grad=True)

    errors = {}
    params = model.parameters()
    for key, theta in params.items():
        errors[key] = relative_error(analytic[key], numeric_gradient(loss, theta, h))
    errors["input.x"] = relative_error(analytic["input.x"], numeric_gradient(loss, x, h))
    return GradcheckResult(errors, tolerance, attempt)
