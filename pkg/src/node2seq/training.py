"""Model assembly, Adam, and the full-batch training loop.

The model is ``layer1 -> layer2 -> skip -> layer3``: layer1 is a Node2Seq
layer (or a GCN layer for the ``gcn_star`` ablation), layers 2 and 3 are GCN
layers, and layer3 emits logits. The ``gcn2`` ablation is a plain two-layer
GCN without skip.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .config import TrainConfig
from .gcn import GcnParams, gcn_backward, gcn_forward
from .graph import Dataset, random_split, row_normalize
from .layer import LayerConfig, Node2SeqParams, node2seq_backward, node2seq_forward
from .linalg import ACTIVATIONS, row_softmax_cross_entropy
from .selector import SelectorConfig

# weight matrices get L2 decay; biases do not
_DECAYED = ("w", "w1", "w2", "kernel")


def dropout(x, rate: float, rng: np.random.Generator | None):
    """Inverted dropout; returns ``(dropped, mask)``. ``rng=None`` disables it."""
    if rng is None or rate == 0.0:
        return x, None
    keep = 1.0 - rate
    if sp.issparse(x):
        x = x.tocsr(copy=True)
        mask = (rng.random(x.nnz) < keep) / keep
        x.data = x.data * mask
        return x, mask
    mask = (rng.random(x.shape) < keep) / keep
    return x * mask, mask


def _undrop(grad: np.ndarray, mask) -> np.ndarray:
    return grad if mask is None else grad * mask


class Model:
    def __init__(
        self,
        in_dim: int,
        num_classes: int,
        hidden: int = 64,
        kernel_size: int = 3,
        readout: str = "mean",
        skip: str = "sum",
        dropout_rate: float = 0.5,
        ablation: str = "node2seq",
        selector: SelectorConfig = SelectorConfig(),
        activation: str = "relu",
        rng: np.random.Generator | None = None,
    ):
        if skip not in ("sum", "concat", "none"):
            raise ValueError(f"unknown skip mode {skip!r}")
        if ablation not in ("node2seq", "gcn_star", "gcn2"):
            raise ValueError(f"unknown ablation {ablation!r}")
        if not 0.0 <= dropout_rate < 1.0:
            raise ValueError(f"dropout rate must lie in [0, 1), got {dropout_rate}")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.ablation = ablation
        self.skip = "none" if ablation == "gcn2" else skip
        self.dropout_rate = dropout_rate
        self.activation = activation
        self.layer_config = LayerConfig(readout=readout, selector=selector)

        if ablation == "node2seq":
            self.layer1 = Node2SeqParams.init(rng, in_dim, hidden, kernel_size)
        else:
            self.layer1 = GcnParams.init(rng, in_dim, hidden)
        if ablation == "gcn2":
            self.layer2 = GcnParams.init(rng, hidden, num_classes)
            self.layer3 = None
        else:
            self.layer2 = GcnParams.init(rng, hidden, hidden)
            width = 2 * hidden if self.skip == "concat" else hidden
            self.layer3 = GcnParams.init(rng, width, num_classes)
        self._tapes = None

    def layers(self) -> dict[str, object]:
        out = {"layer1": self.layer1, "layer2": self.layer2}
        if self.layer3 is not None:
            out["layer3"] = self.layer3
        return out

    def parameters(self) -> dict[str, np.ndarray]:
        return {f"{ln}.{pn}": v for ln, layer in self.layers().items() for pn, (v, _) in layer.named().items()}

    def gradients(self) -> dict[str, np.ndarray]:
        return {f"{ln}.{pn}": g for ln, layer in self.layers().items() for pn, (_, g) in layer.named().items()}

    def set_parameters(self, values: dict[str, np.ndarray]) -> None:
        layers = self.layers()
        for key, v in values.items():
            ln, pn = key.split(".", 1)
            cur = getattr(layers[ln], pn)
            if cur.shape != v.shape:
                raise ValueError(f"{key}: shape {v.shape} != {cur.shape}")
            setattr(layers[ln], pn, np.array(v, dtype=np.float64))

    def forward(self, x, graph, rng: np.random.Generator | None = None) -> np.ndarray:
        """Logits for every node. ``rng=None`` is eval mode (no dropout)."""
        p = self.dropout_rate
        act, _ = ACTIVATIONS[self.activation]
        x_in, m1 = dropout(x, p, rng)
        if isinstance(self.layer1, Node2SeqParams):
            pre1, t1 = node2seq_forward(x_in, graph, self.layer1, self.layer_config, score_input=x)
            h1 = act(pre1)
        else:
            h1, t1 = gcn_forward(x_in, graph.norm_adj, self.layer1, activation=self.activation)
            pre1 = None
        h1_in, m2 = dropout(h1, p, rng)
        last = self.layer3 is None
        h2, t2 = gcn_forward(h1_in, graph.norm_adj, self.layer2, activation="identity" if last else self.activation)
        if last:
            self._tapes = (t1, pre1, m1, m2, t2, None, None)
            return h2
        if self.skip == "sum":
            h = h1 + h2
        elif self.skip == "concat":
            h = np.hstack([h1, h2])
        else:
            h = h2
        h_in, m3 = dropout(h, p, rng)
        logits, t3 = gcn_forward(h_in, graph.norm_adj, self.layer3, activation="identity")
        self._tapes = (t1, pre1, m1, m2, t2, m3, t3)
        return logits

    def backward(self, grad_logits: np.ndarray, need_input_grad: bool = False):
        """Fill every parameter gradient from the last forward call."""
        if self._tapes is None:
            raise RuntimeError("backward called before forward")
        t1, pre1, m1, m2, t2, m3, t3 = self._tapes
        if self.layer3 is None:
            g_h1 = _undrop(gcn_backward(grad_logits, t2, self.layer2), m2)
        else:
            g_h = _undrop(gcn_backward(grad_logits, t3, self.layer3), m3)
            h = self.layer1.out_dim
            if self.skip == "sum":
                g_h1_skip, g_h2 = g_h, g_h
            elif self.skip == "concat":
                g_h1_skip, g_h2 = g_h[:, :h], g_h[:, h:]
            else:
                g_h1_skip, g_h2 = 0.0, g_h
            g_h1 = _undrop(gcn_backward(g_h2, t2, self.layer2), m2) + g_h1_skip
        if isinstance(self.layer1, Node2SeqParams):
            g_pre1 = ACTIVATIONS[self.activation][1](g_h1, pre1)
            g_x = node2seq_backward(g_pre1, t1, self.layer1, need_input_grad=need_input_grad)
        else:
            g_x = gcn_backward(g_h1, t1, self.layer1, need_input_grad=need_input_grad)
        return None if g_x is None else _undrop(g_x, m1)

    def loss(self, x, graph, labels, mask, weight_decay: float = 0.0, rng=None, backward: bool = True) -> float:
        """Cross-entropy on ``mask`` plus ``weight_decay/2 * sum ||W||^2``; fills gradients."""
        logits = self.forward(x, graph, rng)
        ce, grad = row_softmax_cross_entropy(logits, labels, mask)
        reg = 0.0
        if backward:
            self.backward(grad)
        if weight_decay:
            for layer in self.layers().values():
                for name, (v, g) in layer.named().items():
                    if name in _DECAYED:
                        reg += 0.5 * weight_decay * float(np.sum(v * v))
                        if backward:
                            g += weight_decay * v
        return ce + reg


# --------------------------------------------------------------------------
# optimizer
# --------------------------------------------------------------------------


@dataclass
class AdamState:
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: AdamState) -> dict[str, np.ndarray]:
    """One bias-corrected Adam update, applied to ``params`` in place."""
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for key, theta in params.items():
        g = grads[key]
        if g.shape != theta.shape:
            raise ValueError(f"{key}: gradient shape {g.shape} != parameter shape {theta.shape}")
        m = state.m.setdefault(key, np.zeros_like(theta))
        v = state.v.setdefault(key, np.zeros_like(theta))
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        theta -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params


# --------------------------------------------------------------------------
# training loop
# --------------------------------------------------------------------------


def accuracy(logits: np.ndarray, labels, idx) -> float:
    idx = np.asarray(idx, dtype=np.int64)
    if idx.size == 0:
        raise ValueError("cannot compute accuracy on an empty split")
    # argmax returns the first maximum, i.e. the lowest class index on ties
    pred = np.asarray(logits)[idx].argmax(axis=1)
    return float(np.mean(pred == np.asarray(labels)[idx]))


def evaluate(model: Model, dataset: Dataset, split: str, features=None) -> float:
    x = dataset.features if features is None else features
    logits = model.forward(x, dataset.graph, rng=None)
    return accuracy(logits, dataset.labels, dataset.split(split))


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_acc: float
    test_acc: float


@dataclass
class TrainReport:
    seed: int
    history: list[EpochRecord]
    best_epoch: int
    best_val: float
    best_test: float
    epochs: int
    wall_clock: float
    best_params: dict[str, np.ndarray] = field(repr=False, default_factory=dict)

    def to_csv(self, header: list[str] | None = None) -> str:
        lines = [f"# {h}" for h in (header or [])]
        lines.append("epoch,train_loss,val_acc,test_acc")
        for r in self.history:
            lines.append(f"{r.epoch},{r.train_loss!r},{r.val_acc!r},{r.test_acc!r}")
        lines.append(
            f"# summary seed={self.seed} best_epoch={self.best_epoch} best_val={self.best_val!r} "
            f"best_test={self.best_test!r} epochs={self.epochs} wall_clock={self.wall_clock:.3f}"
        )
        return "\n".join(lines) + "\n"


def prepare_features(dataset: Dataset, config: TrainConfig):
    """Feature matrix as fed to the model; sparse when that pays off."""
    x = dataset.features
    if config.normalize_features:
        x = row_normalize(x)
    if x.size and np.count_nonzero(x) < 0.1 * x.size:
        return sp.csr_matrix(x)
    return x


def split_for_seed(dataset: Dataset, config: TrainConfig, seed: int) -> Dataset:
    """The fixed split as stored, or a fresh split drawn from ``seed``."""
    if config.split == "fixed":
        return dataset
    train, val, test = random_split(dataset.labels, config.per_class_train, config.val_size, seed)
    return Dataset(dataset.graph, dataset.features, dataset.labels, dataset.num_classes, train, val, test, dataset.name)


def build_model(config: TrainConfig, in_dim: int, num_classes: int, rng: np.random.Generator) -> Model:
    return Model(
        in_dim,
        num_classes,
        hidden=config.hidden,
        kernel_size=config.kernel_size,
        readout=config.readout,
        skip=config.skip,
        dropout_rate=config.dropout,
        ablation=config.ablation,
        selector=SelectorConfig(config.nonlocal_beta, config.nonlocal_ell, config.nonlocal_enabled),
        activation=config.activation,
        rng=rng,
    )


def train(
    dataset: Dataset,
    config: TrainConfig,
    seed: int,
    model: Model | None = None,
    log=None,
) -> tuple[Model, TrainReport]:
    """Full-batch training; the report's best epoch maximises validation accuracy.

    Epoch 0 is the untrained model. Ties in validation accuracy keep the
    earliest epoch. The returned model holds the best-epoch parameters.
    """
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    dataset = split_for_seed(dataset, config, seed)
    x = prepare_features(dataset, config)
    if model is None:
        model = build_model(config, dataset.features.shape[1], dataset.num_classes, rng)
    if config.nonlocal_enabled:
        dataset.graph.warm(config.nonlocal_ell)
    state = AdamState(lr=config.lr)
    params = model.parameters()
    labels = dataset.labels

    def snapshot(epoch: int, loss: float) -> EpochRecord:
        logits = model.forward(x, dataset.graph, rng=None)
        return EpochRecord(
            epoch, loss, accuracy(logits, labels, dataset.val_idx), accuracy(logits, labels, dataset.test_idx)
        )

    first = model.loss(x, dataset.graph, labels, dataset.train_idx, config.weight_decay, backward=False)
    history = [snapshot(0, first)]
    best = history[0]
    best_params = {k: v.copy() for k, v in params.items()}
    for epoch in range(1, config.epochs + 1):
        loss = model.loss(x, dataset.graph, labels, dataset.train_idx, config.weight_decay, rng=rng)
        if not math.isfinite(loss):
            raise FloatingPointError(f"non-finite training loss {loss} at epoch {epoch} (seed {seed})")
        adam_step(params, model.gradients(), state)
        rec = snapshot(epoch, loss)
        history.append(rec)
        if rec.val_acc > best.val_acc:
            best = rec
            best_params = {k: v.copy() for k, v in params.items()}
        if log is not None:
            log(rec)
    model.set_parameters(best_params)
    params.update(model.parameters())
    report = TrainReport(
        seed=seed,
        history=history,
        best_epoch=best.epoch,
        best_val=best.val_acc,
        best_test=best.test_acc,
        epochs=config.epochs,
        wall_clock=time.perf_counter() - t0,
        best_params=best_params,
    )
    return model, report
