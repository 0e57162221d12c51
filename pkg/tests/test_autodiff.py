"""Unit tests for the reverse-mode autodiff core."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dmgnn import autodiff as ad


def _param(arr):
    return ad.Tensor(arr, requires_grad=True)


def rng(seed=0):
    return np.random.default_rng(seed)


class TestTensor:
    def test_scalar_and_1d_promotion(self):
        assert ad.Tensor(3.0).shape == (1, 1)
        assert ad.Tensor([1.0, 2.0, 3.0]).shape == (1, 3)

    def test_rejects_3d(self):
        with pytest.raises(ad.ShapeError):
            ad.Tensor(np.zeros((2, 2, 2)))

    def test_item_requires_scalar(self):
        with pytest.raises(ad.ShapeError):
            ad.Tensor([[1.0, 2.0]]).item()

    def test_grad_view_defaults_to_zeros(self):
        t = _param(np.ones((2, 3)))
        assert np.array_equal(t.grad_view(), np.zeros((2, 3)))

    def test_data_is_copied(self):
        src = np.ones((2, 2))
        t = ad.Tensor(src)
        src[0, 0] = 7.0
        assert t.data[0, 0] == 1.0


class TestTapeSemantics:
    def test_no_tape_no_recording(self):
        a = _param(rng().standard_normal((2, 2)))
        out = ad.matmul(a, a)
        # eval mode: values computed, nothing to backprop through
        assert out.grad is None
        with ad.Tape() as tape:
            pass
        assert len(tape) == 0

    def test_ops_without_grad_parents_not_recorded(self):
        a = ad.Tensor(np.ones((2, 2)))  # requires_grad=False
        with ad.Tape() as tape:
            ad.matmul(a, a)
        assert len(tape) == 0

    def test_backward_requires_scalar(self):
        a = _param(np.ones((2, 2)))
        with ad.Tape() as tape:
            out = ad.add(a, a)
        with pytest.raises(ad.ShapeError):
            tape.backward(out)

    def test_repeated_backward_accumulates(self):
        a = _param(np.array([[2.0]]))
        with ad.Tape() as tape:
            loss = ad.hadamard(a, a)
        tape.backward(loss)
        g1 = a.grad.copy()
        tape.backward(loss)
        assert np.allclose(a.grad, 2 * g1)

    def test_zero_grads(self):
        a = _param(np.array([[2.0]]))
        with ad.Tape() as tape:
            loss = ad.hadamard(a, a)
        tape.backward(loss)
        ad.zero_grads([a, loss])
        assert a.grad is None

    def test_nested_tapes_record_independently(self):
        a = _param(np.array([[1.5]]))
        with ad.Tape() as outer:
            ad.scale(a, 2.0)
            with ad.Tape() as inner:
                ad.scale(a, 3.0)
        assert len(outer) == 1 and len(inner) == 1


class TestOpValues:
    def test_matmul_shape_error(self):
        with pytest.raises(ad.ShapeError):
            ad.matmul(ad.Tensor(np.ones((2, 3))), ad.Tensor(np.ones((2, 3))))

    def test_concat_axis_validation(self):
        t = ad.Tensor(np.ones((2, 2)))
        with pytest.raises(ad.ShapeError):
            ad.concat([t, ad.Tensor(np.ones((2, 3)))], axis=0)
        with pytest.raises(ad.ShapeError):
            ad.concat([], axis=0)
        with pytest.raises(ad.ShapeError):
            ad.concat([t], axis=2)

    def test_softmax_rows_sum_to_one(self):
        x = ad.Tensor(rng().standard_normal((1, 7)))
        s = ad.softmax(x)
        assert abs(s.data.sum() - 1.0) < 1e-12

    def test_softmax_rejects_nan(self):
        with pytest.raises(ad.NumericError):
            ad.softmax(ad.Tensor(np.array([[1.0, np.nan]])))

    def test_softmax_stable_for_large_logits(self):
        s = ad.softmax(ad.Tensor(np.array([[1000.0, 1000.0]])))
        assert np.allclose(s.data, [[0.5, 0.5]])

    def test_cross_entropy_matches_log_softmax(self):
        x = rng().standard_normal((1, 5))
        logits = ad.Tensor(x)
        ce = ad.cross_entropy(logits, 2)
        expected = -np.log(np.exp(x[0]) / np.exp(x[0]).sum())[2]
        assert abs(ce.item() - expected) < 1e-12

    def test_cross_entropy_label_range(self):
        with pytest.raises(ad.ShapeError):
            ad.cross_entropy(ad.Tensor(np.zeros((1, 3))), 3)

    def test_gather_rows_values(self):
        a = ad.Tensor(np.arange(6.0).reshape(3, 2))
        out = ad.gather_rows(a, [2, 0, 2])
        assert np.array_equal(out.data, [[4.0, 5.0], [0.0, 1.0], [4.0, 5.0]])
        with pytest.raises(ad.ShapeError):
            ad.gather_rows(a, [3])

    def test_segment_sum_values(self):
        a = ad.Tensor(np.arange(8.0).reshape(4, 2))
        out = ad.segment_sum(a, [1, 0, 1, 1], 3)
        assert np.array_equal(out.data, [[2.0, 3.0], [10.0, 13.0], [0.0, 0.0]])
        with pytest.raises(ad.ShapeError):
            ad.segment_sum(a, [0, 1], 2)

    def test_add_bias_shape_check(self):
        with pytest.raises(ad.ShapeError):
            ad.add_bias(ad.Tensor(np.ones((2, 3))), ad.Tensor(np.ones((1, 2))))


def _check_grads(build, params, eps=1e-5, tol=1e-4):
    """Finite-difference oracle for a composite op graph."""
    err = ad.finite_diff_check(build, params, eps=eps)
    assert err < tol, f"max relative gradient error {err}"


class TestOpGradients:
    def test_matmul_concat_chain(self):
        r = rng(1)
        a = _param(r.standard_normal((2, 3)))
        b = _param(r.standard_normal((3, 4)))
        c = _param(r.standard_normal((2, 4)))

        def f():
            return ad.sum_all(ad.concat([ad.matmul(a, b), c], axis=1))

        _check_grads(f, {"a": a, "b": b, "c": c})

    def test_elementwise_chain(self):
        r = rng(2)
        a = _param(r.standard_normal((2, 4)))
        b = _param(r.standard_normal((2, 4)))

        def f():
            x = ad.hadamard(ad.tanh(a), ad.logistic(b))
            y = ad.relu(ad.sub(x, ad.scale(b, 0.3)))
            return ad.sum_all(y)

        _check_grads(f, {"a": a, "b": b}, tol=1e-5)

    def test_softmax_cross_entropy(self):
        r = rng(3)
        a = _param(r.standard_normal((1, 6)))
        w = _param(r.standard_normal((6, 6)))

        def f():
            return ad.cross_entropy(ad.matmul(a, w), 4)

        _check_grads(f, {"a": a, "w": w})

    def test_attention_style_graph(self):
        r = rng(4)
        q = _param(r.standard_normal((1, 5)))
        keys = _param(r.standard_normal((7, 5)))

        def f():
            s = ad.softmax(ad.matmul(q, ad.transpose(keys)))
            return ad.sum_all(ad.hadamard(ad.matmul(s, keys), q))

        _check_grads(f, {"q": q, "keys": keys}, tol=1e-5)

    def test_gather_segment_bias(self):
        r = rng(5)
        a = _param(r.standard_normal((4, 3)))
        bias = _param(r.standard_normal((1, 3)))

        def f():
            g = ad.gather_rows(a, [3, 1, 1, 0, 2])
            s = ad.segment_sum(ad.add_bias(g, bias), [0, 1, 0, 1, 1], 2)
            return ad.sum_all(ad.tanh(s))

        _check_grads(f, {"a": a, "bias": bias})

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_random_dag_gradients(self, seed):
        r = rng(seed)
        a = _param(r.standard_normal((3, 3)))
        b = _param(r.standard_normal((3, 3)))

        def f():
            x = ad.add(ad.matmul(a, b), ad.hadamard(a, b))
            # a participates through two paths; gradients must sum
            return ad.sum_all(ad.tanh(ad.matmul(x, ad.transpose(a))))

        _check_grads(f, {"a": a, "b": b}, tol=1e-5)


class TestFiniteDiffHarness:
    def test_rejects_bad_eps(self):
        a = _param(np.ones((1, 1)))
        with pytest.raises(ValueError):
            ad.finite_diff_check(lambda: ad.sum_all(a), {"a": a}, eps=0.0)

    def test_rejects_nonfinite_loss(self):
        a = _param(np.array([[np.inf]]))
        with pytest.raises(ad.NumericError):
            ad.finite_diff_check(lambda: ad.sum_all(a), {"a": a})
