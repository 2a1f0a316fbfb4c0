import numpy as np
import pytest

from node2seq.cli import main
from node2seq.datasets import convert, planted_partition, read_planetoid_text

from conftest import RAW


def write_tiny_linqs(d, extra_line=None):
    d.mkdir(parents=True, exist_ok=True)
    lines = ["p1\t1\t0\t0\tA", "p2\t0\t1\t0\tB", "p3\t0\t0\t1\tA", "p4\t1\t1\t0\tB"]
    if extra_line is not None:
        lines.append(extra_line)
    (d / "tiny.content").write_text("\n".join(lines) + "\n")
    (d / "tiny.cites").write_text("p1\tp2\np2\tp3\np3\tghost\np4\tp1\n")


def test_planted_partition_blocks():
    ds = planted_partition(n=60, classes=3, p_in=0.5, p_out=0.0, seed=0)
    assert np.bincount(ds.labels).tolist() == [20, 20, 20]
    a = ds.graph.csr_plain.tocoo()
    assert (ds.labels[a.row] == ds.labels[a.col]).all()
    assert len(ds.train_idx) == 15


def test_planted_partition_too_small():
    with pytest.raises(ValueError):
        planted_partition(n=2, classes=3)


def test_planted_partition_deterministic():
    a, b = planted_partition(seed=4), planted_partition(seed=4)
    np.testing.assert_array_equal(a.features, b.features)
    assert (a.graph.csr_plain != b.graph.csr_plain).nnz == 0


def test_tiny_linqs_too_small_for_split(tmp_path):
    write_tiny_linqs(tmp_path)
    # four nodes cannot hold 20 training nodes per class
    with pytest.raises(ValueError, match="class"):
        read_planetoid_text(tmp_path)


def test_tiny_linqs_structure(tmp_path):
    write_tiny_linqs(tmp_path)
    out = tmp_path / "out"
    # pad with enough nodes for the 20-per-class, 500-validation split
    lines = (tmp_path / "tiny.content").read_text().splitlines()
    big = [f"q{i}\t{i % 2}\t{(i + 1) % 2}\t0\t{'AB'[i % 2]}" for i in range(1100)]
    (tmp_path / "tiny.content").write_text("\n".join(lines + big) + "\n")
    ds = convert("planetoid_text", tmp_path, out)
    assert ds.graph.n == 1104 and ds.features.shape[1] == 3 and ds.num_classes == 2
    # ghost citation is dropped; p1-p2, p2-p3, p4-p1 remain
    assert ds.graph.num_edges == 3
    assert ds.labels[:4].tolist() == [0, 1, 0, 1]
    assert len(ds.train_idx) == 40 and len(ds.val_idx) == 500


def test_truncated_content_names_line(tmp_path):
    write_tiny_linqs(tmp_path, extra_line="p5\t1\t0")
    with pytest.raises(ValueError, match=r"tiny.content:5"):
        read_planetoid_text(tmp_path)


def test_missing_files_is_unrecognized_layout(tmp_path):
    with pytest.raises(ValueError, match="layout"):
        convert("planetoid_text", tmp_path, tmp_path / "o")
    with pytest.raises(ValueError, match="planetoid_text"):
        convert("csv", tmp_path, tmp_path / "o")


@pytest.mark.skipif(not (RAW / "cora" / "cora.content").is_file(), reason="raw Cora not present")
def test_convert_cora(tmp_path, capsys):
    assert main(["convert", str(RAW / "cora"), str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "num_nodes=2708" in out and "num_features=1433" in out and "num_classes=7" in out
    meta = (tmp_path / "meta.txt").read_text()
    assert "num_nodes=2708" in meta


@pytest.mark.skipif(not (RAW / "citeseer").is_dir(), reason="raw Citeseer not present")
def test_convert_citeseer(tmp_path, capsys):
    assert main(["convert", "--format", "planetoid", str(RAW / "citeseer"), str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "num_nodes=3327" in out and "num_features=3703" in out and "num_classes=6" in out
