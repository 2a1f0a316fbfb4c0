"""Synthetic planted-partition graphs and converters for raw citation data."""
from __future__ import annotations

import pickle
import warnings
from pathlib import Path

import numpy as np

from .graph import Dataset, build_graph, random_split, save_dataset


def planted_partition(
    n: int = 60,
    classes: int = 3,
    p_in: float = 0.5,
    p_out: float = 0.02,
    seed: int = 0,
    feature_dim: int = 8,
    signal: float = 1.0,
    per_class_train: int = 5,
    val_size: int | None = None,
) -> Dataset:
    """Planted-partition graph with Gaussian features around per-class means.

    Nodes are assigned to classes in contiguous, near-equal blocks. Every
    unordered pair is joined with probability ``p_in`` inside a class and
    ``p_out`` across classes. Features are ``signal * mu_c + N(0, I)``.
    """
    if n < classes:
        raise ValueError(f"n={n} must be at least the number of classes ({classes})")
    if classes < 1:
        raise ValueError("need at least one class")
    rng = np.random.default_rng(seed)
    labels = (np.arange(n) * classes) // n
    iu, ju = np.triu_indices(n, k=1)
    prob = np.where(labels[iu] == labels[ju], p_in, p_out)
    hit = rng.random(iu.size) < prob
    graph = build_graph(n, zip(iu[hit].tolist(), ju[hit].tolist()))
    means = rng.standard_normal((classes, feature_dim))
    features = signal * means[labels] + rng.standard_normal((n, feature_dim))
    smallest = np.bincount(labels, minlength=classes).min()
    per_class_train = min(per_class_train, max(1, smallest // 2))
    if val_size is None:
        val_size = n // 3
    train, val, test = random_split(labels, per_class_train, val_size, seed)
    return Dataset(graph, features, labels, classes, train, val, test, name=f"synthetic{n}")


def write_planted_partition(out_dir: str | Path, **kwargs) -> Path:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc.strerror}") from None
    return save_dataset(planted_partition(**kwargs), out)


# --------------------------------------------------------------------------
# raw citation layouts
# --------------------------------------------------------------------------


def read_planetoid_text(in_dir: str | Path, split_seed: int = 0) -> Dataset:
    """``<name>.content`` (id, features..., class) + ``<name>.cites`` (id id).

    Node ids follow the order of the content file; class names are numbered
    in sorted order. Citations naming unknown papers are dropped. The split is
    drawn with 20 nodes per class and 500 validation nodes.
    """
    d = Path(in_dir)
    contents = sorted(d.glob("*.content"))
    cites = sorted(d.glob("*.cites"))
    if len(contents) != 1 or len(cites) != 1:
        raise ValueError(
            f"{d}: expected exactly one *.content and one *.cites file "
            f"(found {len(contents)} and {len(cites)}); not a planetoid_text layout"
        )
    ids: dict[str, int] = {}
    rows, names = [], []
    width = None
    with contents[0].open() as fh:
        for ln, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if width is None:
                width = len(parts)
            if len(parts) != width or width < 3:
                raise ValueError(
                    f"{contents[0]}:{ln}: {len(parts)} fields, expected {width} (truncated or ragged row)"
                )
            if parts[0] in ids:
                raise ValueError(f"{contents[0]}:{ln}: duplicate paper id {parts[0]}")
            ids[parts[0]] = len(ids)
            try:
                rows.append(np.array(parts[1:-1], dtype=np.float64))
            except ValueError:
                raise ValueError(f"{contents[0]}:{ln}: non-numeric feature value") from None
            names.append(parts[-1])
    classes = sorted(set(names))
    labels = np.array([classes.index(c) for c in names], dtype=np.int64)
    edges = []
    with cites[0].open() as fh:
        for ln, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2:
                raise ValueError(f"{cites[0]}:{ln}: expected two paper ids, got {line.strip()!r}")
            a, b = parts
            if a in ids and b in ids:
                edges.append((ids[a], ids[b]))
    n = len(ids)
    graph = build_graph(n, edges)
    train, val, test = random_split(labels, 20, 500, split_seed)
    return Dataset(graph, np.vstack(rows), labels, len(classes), train, val, test, name=contents[0].stem)


def _load_pickle(path: Path):
    # the pickles reference the old scipy.sparse.csr module path
    with path.open("rb") as fh, warnings.catch_warnings():
        warnings.simplefilter("ignore", DeprecationWarning)
        return pickle.load(fh, encoding="latin1")


def read_planetoid(in_dir: str | Path) -> Dataset:
    """Pickled ``ind.<name>.*`` files with their standard fixed split.

    Test indices missing from the pickles (isolated nodes in Citeseer) get
    all-zero features and label 0.
    """
    d = Path(in_dir)
    found = sorted(d.glob("ind.*.x"))
    if len(found) != 1:
        raise ValueError(f"{d}: expected one ind.<name>.x file; not a planetoid layout")
    name = found[0].name.split(".")[1]
    part = {}
    for key in ("x", "y", "tx", "ty", "allx", "ally", "graph"):
        p = d / f"ind.{name}.{key}"
        if not p.is_file():
            raise FileNotFoundError(f"planetoid file {p} is missing")
        part[key] = _load_pickle(p)
    test_idx = np.array(
        [int(s) for s in (d / f"ind.{name}.test.index").read_text().split()], dtype=np.int64
    )
    test_sorted = np.sort(test_idx)
    allx = np.asarray(part["allx"].todense())
    tx = np.asarray(part["tx"].todense())
    ally, ty = np.asarray(part["ally"]), np.asarray(part["ty"])
    n = max(allx.shape[0] + tx.shape[0], int(test_sorted[-1]) + 1, len(part["graph"]))
    full_tx = np.zeros((n - allx.shape[0], tx.shape[1]))
    full_ty = np.zeros((n - allx.shape[0], ty.shape[1]))
    # rows of tx follow test_idx order; place each at its node id
    full_tx[test_idx - allx.shape[0]] = tx
    full_ty[test_idx - allx.shape[0]] = ty
    features = np.vstack([allx, full_tx])
    onehot = np.vstack([ally, full_ty])
    labels = np.where(onehot.any(axis=1), onehot.argmax(axis=1), 0).astype(np.int64)
    edges = [(int(i), int(j)) for i, nbrs in part["graph"].items() for j in nbrs]
    graph = build_graph(n, edges)
    n_train = np.asarray(part["y"]).shape[0]
    train = np.arange(n_train)
    val = np.arange(n_train, n_train + 500)
    return Dataset(graph, features, labels, onehot.shape[1], train, val, test_sorted, name=name)


RAW_FORMATS = {"planetoid_text": read_planetoid_text, "planetoid": read_planetoid}


def convert(raw_format: str, in_dir: str | Path, out_dir: str | Path) -> Dataset:
    try:
        reader = RAW_FORMATS[raw_format]
    except KeyError:
        raise ValueError(f"unknown raw format {raw_format!r}; valid: {', '.join(RAW_FORMATS)}") from None
    ds = reader(in_dir)
    save_dataset(ds, out_dir)
    return ds
