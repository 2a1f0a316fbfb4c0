import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from node2seq.linalg import matmul, matmul_backward, relu, relu_backward, row_softmax_cross_entropy

from conftest import central_diff


def test_matmul_identity(rng):
    b = rng.standard_normal((3, 4))
    np.testing.assert_array_equal(matmul(np.eye(3), b), b)


def test_matmul_small():
    np.testing.assert_array_equal(matmul(np.array([[1.0, 2], [3, 4]]), np.array([[1.0], [1]])), [[3], [7]])


def test_matmul_mismatch_names_shapes():
    with pytest.raises(ValueError, match=r"\(2, 3\).*\(2, 3\)"):
        matmul(np.zeros((2, 3)), np.zeros((2, 3)))


def test_matmul_backward_trivial(rng):
    a, b = rng.standard_normal((3, 4)), rng.standard_normal((4, 2))
    ga, gb = matmul_backward(np.zeros((3, 2)), a, b)
    assert not ga.any() and not gb.any()
    g = rng.standard_normal((4, 2))
    _, gb = matmul_backward(g, np.eye(4), b)
    np.testing.assert_array_equal(gb, g)


def test_matmul_backward_shape_error():
    with pytest.raises(ValueError):
        matmul_backward(np.zeros((2, 2)), np.zeros((3, 4)), np.zeros((4, 2)))


def test_matmul_backward_finite_differences(rng):
    a, b = rng.uniform(-1, 1, (3, 4)), rng.uniform(-1, 1, (4, 2))
    ga, gb = matmul_backward(np.ones((3, 2)), a, b)
    f = lambda: float(np.sum(a @ b))  # noqa: E731
    np.testing.assert_allclose(ga, central_diff(f, a), rtol=1e-6)
    np.testing.assert_allclose(gb, central_diff(f, b), rtol=1e-6)


def test_relu_cases():
    assert not relu(-np.ones((2, 3))).any()
    x = np.array([[0.5, 2.0]])
    np.testing.assert_array_equal(relu(x), x)
    np.testing.assert_array_equal(relu_backward(np.array([[3.0, 4.0]]), x), [[3, 4]])
    np.testing.assert_array_equal(relu(np.array([[-1.0, 2]])), [[0, 2]])
    np.testing.assert_array_equal(relu_backward(np.array([[5.0, 5]]), np.array([[-1.0, 2]])), [[0, 5]])


def test_relu_backward_finite_differences(rng):
    x = rng.uniform(-1, 1, (4, 5))
    x[np.abs(x) < 1e-3] = 0.5
    w = rng.uniform(-1, 1, (4, 5))
    f = lambda: float(np.sum(w * relu(x)))  # noqa: E731
    np.testing.assert_allclose(relu_backward(w, x), central_diff(f, x), rtol=1e-5, atol=1e-10)


def test_cross_entropy_uniform():
    for c in (2, 5, 7):
        loss, _ = row_softmax_cross_entropy(np.zeros((4, c)), [0, 1, 0, 1], [0, 1, 2, 3])
        assert loss == pytest.approx(math.log(c), rel=1e-12)


def test_cross_entropy_saturated():
    logits = np.zeros((1, 3))
    logits[0, 2] = 50.0
    loss, _ = row_softmax_cross_entropy(logits, [2], [0])
    assert loss < 1e-9


def test_cross_entropy_closed_form():
    loss, _ = row_softmax_cross_entropy(np.array([[1.0, 2.0]]), [1], [0])
    assert loss == pytest.approx(math.log(1 + math.exp(-1)), rel=1e-12)
    assert loss == pytest.approx(0.3133, abs=1e-4)


def test_cross_entropy_errors():
    with pytest.raises(ValueError, match="empty"):
        row_softmax_cross_entropy(np.zeros((2, 2)), [0, 1], [])
    with pytest.raises(ValueError, match="out of range"):
        row_softmax_cross_entropy(np.zeros((2, 2)), [0, 2], [0, 1])


def test_cross_entropy_gradient(rng):
    logits = rng.uniform(-1, 1, (6, 4))
    labels = rng.integers(0, 4, 6)
    mask = np.array([0, 2, 3, 5])
    _, grad = row_softmax_cross_entropy(logits, labels, mask)
    num = central_diff(lambda: row_softmax_cross_entropy(logits, labels, mask)[0], logits)
    np.testing.assert_allclose(grad, num, rtol=1e-5, atol=1e-11)
    assert not grad[[1, 4]].any()
    np.testing.assert_allclose(grad[mask].sum(axis=1), 0.0, atol=1e-15)


def test_cross_entropy_stable_for_huge_logits():
    loss, grad = row_softmax_cross_entropy(np.array([[1000.0, 0.0]]), [1], [0])
    assert loss == pytest.approx(1000.0)
    assert np.isfinite(grad).all()


small = st.integers(1, 8)
entries = st.floats(-1, 1, allow_nan=False)


@settings(max_examples=50, deadline=None)
@given(st.data(), small, small, small, small)
def test_matmul_associative(data, p, q, r, s):
    a = data.draw(arrays(np.float64, (p, q), elements=entries))
    b = data.draw(arrays(np.float64, (q, r), elements=entries))
    c = data.draw(arrays(np.float64, (r, s), elements=entries))
    assert np.max(np.abs(matmul(matmul(a, b), c) - matmul(a, matmul(b, c)))) < 1e-9


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.tuples(small, small), elements=st.floats(-1e6, 1e6)))
def test_relu_idempotent(x):
    np.testing.assert_array_equal(relu(relu(x)), relu(x))


@settings(max_examples=50, deadline=None)
@given(st.data(), st.integers(1, 6), st.integers(2, 5))
def test_cross_entropy_masked_rows_sum_to_zero(data, n, c):
    logits = data.draw(arrays(np.float64, (n, c), elements=st.floats(-20, 20)))
    labels = data.draw(arrays(np.int64, n, elements=st.integers(0, c - 1)))
    _, grad = row_softmax_cross_entropy(logits, labels, np.arange(n))
    np.testing.assert_allclose(grad.sum(axis=1), 0.0, atol=1e-12)
