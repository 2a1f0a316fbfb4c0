"""Graph topology, normalization, hop reachability and dataset I/O.

Adjacency is kept as scipy CSR matrices with sorted column indices. A
:class:`GraphStore` is treated as immutable once built; the hop cache is
filled on demand (or eagerly via :meth:`GraphStore.warm`) and only ever
grows.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp


@dataclass
class GraphStore:
    n: int
    csr_plain: sp.csr_matrix
    csr_self: sp.csr_matrix
    norm_adj: sp.csr_matrix
    lhop_cache: dict[int, sp.csr_matrix] = field(default_factory=dict, repr=False)

    def neighbors(self, i: int, self_loops: bool = True) -> np.ndarray:
        m = self.csr_self if self_loops else self.csr_plain
        return m.indices[m.indptr[i] : m.indptr[i + 1]]

    @property
    def degrees(self) -> np.ndarray:
        """Degrees under the self-looped adjacency."""
        return np.diff(self.csr_self.indptr)

    @property
    def num_edges(self) -> int:
        """Undirected edge count, self-loops excluded."""
        return self.csr_plain.nnz // 2

    def warm(self, ell: int) -> None:
        khop_reachability(self, ell)


def _pattern(n: int, rows: np.ndarray, cols: np.ndarray) -> sp.csr_matrix:
    m = sp.csr_matrix(
        (np.ones(rows.size, dtype=bool), (rows, cols)), shape=(n, n), dtype=bool
    )
    m.sum_duplicates()
    m.sort_indices()
    return m


def build_graph(n: int, edges: Iterable[tuple[int, int]]) -> GraphStore:
    """Build an undirected graph; duplicates and explicit self-loops collapse."""
    if n < 0:
        raise ValueError(f"node count must be non-negative, got {n}")
    e = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
    bad = (e < 0) | (e >= n)
    if bad.any():
        k = int(np.flatnonzero(bad.any(axis=1))[0])
        raise ValueError(
            f"edge {k} ({int(e[k, 0])}, {int(e[k, 1])}) references a node outside [0, {n})"
        )
    e = e[e[:, 0] != e[:, 1]]
    rows = np.concatenate([e[:, 0], e[:, 1]])
    cols = np.concatenate([e[:, 1], e[:, 0]])
    plain = _pattern(n, rows, cols)
    diag = np.arange(n)
    with_self = _pattern(n, np.concatenate([rows, diag]), np.concatenate([cols, diag]))
    g = GraphStore(n=n, csr_plain=plain, csr_self=with_self, norm_adj=None)
    g.norm_adj = normalize_adjacency(g)
    g.lhop_cache[1] = with_self
    return g


def normalize_adjacency(g: GraphStore) -> sp.csr_matrix:
    """Symmetric normalization ``D^-1/2 (A+I) D^-1/2`` as a float CSR matrix."""
    a = g.csr_self.tocoo()
    d = np.diff(g.csr_self.indptr).astype(np.float64)
    # product computed before the sqrt so (i, j) and (j, i) agree bit-for-bit
    vals = 1.0 / np.sqrt(d[a.row] * d[a.col])
    s = sp.csr_matrix((vals, (a.row, a.col)), shape=(g.n, g.n))
    s.sort_indices()
    return s


def khop_reachability(g: GraphStore, ell: int) -> sp.csr_matrix:
    """Boolean pattern of node pairs reachable within ``ell`` hops (self included).

    Computed as a level-synchronous BFS from all sources at once: each level
    multiplies the frontier pattern by ``A + I``. Results are cached per ``ell``.
    """
    if ell < 1:
        raise ValueError(f"hop count must be >= 1, got {ell}")
    if ell in g.lhop_cache:
        return g.lhop_cache[ell]
    start = max(k for k in g.lhop_cache if k <= ell)
    reach = g.lhop_cache[start]
    step = g.csr_self.astype(np.int32)
    for level in range(start + 1, ell + 1):
        nxt = (reach.astype(np.int32) @ step).astype(bool)
        nxt.sort_indices()
        if nxt.nnz == reach.nnz:
            # no new nodes: the pattern is stable for every larger level
            reach = nxt
            break
        reach = nxt
        g.lhop_cache[level] = reach
    g.lhop_cache[ell] = reach
    return reach


# --------------------------------------------------------------------------
# datasets
# --------------------------------------------------------------------------


@dataclass
class Dataset:
    graph: GraphStore
    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    train_idx: np.ndarray
    val_idx: np.ndarray
    test_idx: np.ndarray
    name: str = ""

    def __post_init__(self):
        n = self.graph.n
        if self.features.shape[0] != n:
            raise ValueError(f"features have {self.features.shape[0]} rows, graph has {n} nodes")
        if self.labels.shape != (n,):
            raise ValueError(f"expected {n} labels, got {self.labels.shape[0]}")
        if n and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ValueError(f"labels must lie in [0, {self.num_classes})")
        seen = np.zeros(n, dtype=bool)
        for name in ("train_idx", "val_idx", "test_idx"):
            idx = getattr(self, name)
            if idx.size and (idx.min() < 0 or idx.max() >= n):
                raise ValueError(f"{name} has indices outside [0, {n})")
            if seen[idx].any() or np.unique(idx).size != idx.size:
                raise ValueError(f"{name} overlaps another split or repeats an index")
            seen[idx] = True

    def split(self, name: str) -> np.ndarray:
        try:
            return {"train": self.train_idx, "val": self.val_idx, "test": self.test_idx}[name]
        except KeyError:
            raise ValueError(f"unknown split {name!r}; expected train, val or test") from None


def random_split(
    labels: Sequence[int], per_class_train: int, val_size: int, seed: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``per_class_train`` nodes of every class for training, ``val_size``
    random others for validation, the remainder for testing."""
    labels = np.asarray(labels, dtype=np.int64)
    rng = np.random.default_rng(seed)
    train = []
    for c in np.unique(labels):
        members = np.flatnonzero(labels == c)
        if members.size < per_class_train:
            raise ValueError(
                f"class {int(c)} has {members.size} nodes, fewer than per_class_train={per_class_train}"
            )
        train.append(rng.permutation(members)[:per_class_train])
    train = np.sort(np.concatenate(train)) if train else np.zeros(0, np.int64)
    rest = np.setdiff1d(np.arange(labels.size), train)
    if rest.size < val_size:
        raise ValueError(f"only {rest.size} nodes left for a validation set of {val_size}")
    rest = rng.permutation(rest)
    return train, np.sort(rest[:val_size]), np.sort(rest[val_size:])


def row_normalize(x: np.ndarray) -> np.ndarray:
    """L1-normalize rows; all-zero rows stay zero."""
    s = np.abs(x).sum(axis=1, keepdims=True)
    return x / np.where(s == 0.0, 1.0, s)


def _read_meta(path: Path) -> dict[str, str]:
    meta = {}
    for ln, line in enumerate(path.read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{ln}: expected key=value, got {line!r}")
        k, v = line.split("=", 1)
        meta[k.strip()] = v.strip()
    return meta


def _read_ints(path: Path) -> np.ndarray:
    vals = []
    for ln, line in enumerate(path.read_text().splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        try:
            vals.append(int(line))
        except ValueError:
            raise ValueError(f"{path}:{ln}: expected an integer, got {line!r}") from None
    return np.asarray(vals, dtype=np.int64)


def _read_edges(path: Path, n: int) -> list[tuple[int, int]]:
    edges = []
    for ln, line in enumerate(path.read_text().splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split("\t")
        try:
            src, dst = int(parts[0]), int(parts[1])
            if len(parts) != 2:
                raise IndexError
        except (ValueError, IndexError):
            raise ValueError(f"{path}:{ln}: expected 'src<TAB>dst', got {line!r}") from None
        if not (0 <= src < n and 0 <= dst < n):
            raise ValueError(f"{path}:{ln}: node id out of range [0, {n}): {line!r}")
        edges.append((src, dst))
    return edges


def _read_features(path: Path, n: int) -> np.ndarray:
    rows = []
    width = None
    with path.open() as fh:
        for ln, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                row = np.array(line.split(","), dtype=np.float64)
            except ValueError:
                raise ValueError(f"{path}:{ln}: non-numeric feature value") from None
            if width is None:
                width = row.size
            elif row.size != width:
                raise ValueError(f"{path}:{ln}: ragged row with {row.size} values, expected {width}")
            rows.append(row)
    if len(rows) != n:
        raise ValueError(f"{path}: {len(rows)} feature rows for {n} nodes")
    return np.vstack(rows) if rows else np.zeros((0, 0))


def load_dataset(
    directory: str | Path,
    per_class_train: int = 20,
    val_size: int = 500,
    split_seed: int = 0,
) -> Dataset:
    """Load the plain-text dataset layout.

    When any of ``train.idx``/``val.idx``/``test.idx`` is missing the split is
    drawn with :func:`random_split` using the keyword arguments.
    """
    d = Path(directory)
    if not d.is_dir():
        raise FileNotFoundError(f"dataset directory {d} does not exist")
    for fname in ("meta.txt", "edges.tsv", "features.csv", "labels.txt"):
        if not (d / fname).is_file():
            raise FileNotFoundError(f"dataset file {d / fname} is missing")
    meta = _read_meta(d / "meta.txt")
    try:
        n = int(meta["num_nodes"])
        num_classes = int(meta["num_classes"])
    except KeyError as exc:
        raise ValueError(f"{d / 'meta.txt'}: missing key {exc.args[0]}") from None
    labels = _read_ints(d / "labels.txt")
    if labels.size != n:
        raise ValueError(f"{d / 'labels.txt'}: {labels.size} labels for {n} nodes")
    out = np.flatnonzero((labels < 0) | (labels >= num_classes))
    if out.size:
        raise ValueError(
            f"{d / 'labels.txt'}:{out[0] + 1}: label {labels[out[0]]} outside [0, {num_classes})"
        )
    features = _read_features(d / "features.csv", n)
    graph = build_graph(n, _read_edges(d / "edges.tsv", n))
    split_files = [d / f"{s}.idx" for s in ("train", "val", "test")]
    if all(p.is_file() for p in split_files):
        train, val, test = (_read_ints(p) for p in split_files)
    else:
        train, val, test = random_split(labels, per_class_train, val_size, split_seed)
    return Dataset(graph, features, labels, num_classes, train, val, test, name=d.name)


def _fmt_row(row: np.ndarray) -> str:
    return ",".join(
        str(int(v)) if float(v).is_integer() and abs(v) < 1e15 else repr(float(v)) for v in row
    )


def save_dataset(ds: Dataset, directory: str | Path, write_splits: bool = True) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    g = ds.graph
    upper = sp.triu(g.csr_plain, k=1).tocoo()
    order = np.lexsort((upper.col, upper.row))
    with (d / "edges.tsv").open("w", newline="\n") as fh:
        for r, c in zip(upper.row[order], upper.col[order]):
            fh.write(f"{r}\t{c}\n")
    with (d / "features.csv").open("w", newline="\n") as fh:
        for row in ds.features:
            fh.write(_fmt_row(row) + "\n")
    (d / "labels.txt").write_text("".join(f"{int(y)}\n" for y in ds.labels))
    (d / "meta.txt").write_text(
        f"num_nodes={g.n}\nnum_classes={ds.num_classes}\n"
        f"num_features={ds.features.shape[1]}\nnum_edges={g.num_edges}\n"
    )
    if write_splits:
        for name in ("train", "val", "test"):
            (d / f"{name}.idx").write_text("".join(f"{int(i)}\n" for i in ds.split(name)))
    return d
