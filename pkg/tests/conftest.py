from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from node2seq.datasets import convert, write_planted_partition
from node2seq.graph import build_graph

ROOT = Path(__file__).resolve().parents[1]
RAW = ROOT / "data" / "raw"


def central_diff(f, theta: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of scalar ``f()`` w.r.t. ``theta`` (mutated in place, restored)."""
    grad = np.zeros_like(theta)
    for idx in np.ndindex(theta.shape):
        orig = theta[idx]
        theta[idx] = orig + h
        up = f()
        theta[idx] = orig - h
        down = f()
        theta[idx] = orig
        grad[idx] = (up - down) / (2 * h)
    return grad


def rel_err(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-12))


def random_graph(rng: np.random.Generator, n: int, p: float = 0.3):
    edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
    return build_graph(n, edges), edges


def permute_graph(n: int, edges, perm: np.ndarray):
    """Relabel node ``v`` as ``perm[v]``."""
    return build_graph(n, [(int(perm[a]), int(perm[b])) for a, b in edges])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def synthetic_dir(tmp_path_factory):
    return write_planted_partition(tmp_path_factory.mktemp("synthetic"), n=60, classes=3, p_in=0.5, p_out=0.02, seed=0)


@pytest.fixture(scope="session")
def cora_dir(tmp_path_factory):
    raw = RAW / "cora"
    if not (raw / "cora.content").is_file():
        pytest.skip("raw Cora files not present under data/raw/cora")
    out = ROOT / "data" / "cora"
    if not (out / "meta.txt").is_file():
        out = tmp_path_factory.mktemp("cora")
        convert("planetoid_text", raw, out)
    return out


# acceptance verdicts, printed once at the end of the session
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k.split()[0])):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {key}: {detail}")
