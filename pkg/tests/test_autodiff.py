import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from priorcanon.autodiff import (
    SGD, Adam, AdamState, Tensor, adam_step, conv2d, cross_entropy, elementwise, gradcheck, matmul,
    no_grad, numerical_grad, ops, reduce, relative_error, sgd_step, softmax_logits, tape, tensor,
)
from priorcanon.errors import DomainError, GraphReuseError, ShapeError

finite = st.floats(-5, 5, allow_nan=False, allow_infinity=False)


class TestElementwise:
    def test_relu_values(self):
        np.testing.assert_array_equal(elementwise("relu", tensor([-1.0, 0.0, 2.0])).data, [0, 0, 2])

    def test_add_values(self):
        np.testing.assert_array_equal(elementwise("add", tensor([1.0, 2.0]), tensor([3.0, 4.0])).data, [4, 6])

    def test_mul_gradient(self):
        a, b = tensor([2.0], requires_grad=True), tensor([5.0], requires_grad=True)
        ops.sum(elementwise("mul", a, b)).backward()
        np.testing.assert_allclose(a.grad, [5.0])
        num = numerical_grad(lambda: ops.sum(elementwise("mul", a, b)), a, 1e-6)
        np.testing.assert_allclose(num, [5.0], rtol=1e-9)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            elementwise("add", tensor(np.ones(3)), tensor(np.ones(4)))

    def test_log_domain_error_carries_index(self):
        with pytest.raises(DomainError) as info:
            elementwise("log", tensor([[1.0, 2.0], [0.0, 3.0]]))
        assert info.value.index == (1, 0)

    def test_div_by_zero_index(self):
        with pytest.raises(DomainError) as info:
            elementwise("div", tensor([1.0, 1.0, 1.0]), tensor([1.0, 2.0, 0.0]))
        assert info.value.index == (2,)

    def test_unknown_op(self):
        with pytest.raises(ValueError):
            elementwise("pow", tensor([1.0]))

    def test_neg_exp(self):
        np.testing.assert_allclose(elementwise("neg", tensor([1.0, -2.0])).data, [-1, 2])
        np.testing.assert_allclose(elementwise("exp", tensor([0.0, 1.0])).data, [1, np.e])

    @given(arrays(np.float64, (3, 4), elements=finite), arrays(np.float64, (4,), elements=finite))
    def test_broadcast_gradients_match_fd(self, a0, b0):
        a, b = Tensor(a0, requires_grad=True), Tensor(b0, requires_grad=True)
        w = np.linspace(-1, 1, 12).reshape(3, 4)
        assert gradcheck(lambda: ops.sum((a * b + a - b) * w), [a, b], 1e-5) <= 1e-4

    def test_operator_overloads(self):
        a = tensor([2.0, 4.0])
        np.testing.assert_allclose((1.0 + a).data, [3, 5])
        np.testing.assert_allclose((1.0 - a).data, [-1, -3])
        np.testing.assert_allclose((2.0 * a).data, [4, 8])
        np.testing.assert_allclose((8.0 / a).data, [4, 2])
        np.testing.assert_allclose((-a).data, [-2, -4])
        np.testing.assert_allclose((a ** 2).data, [4, 16])


class TestMatmul:
    def test_identity(self, rng):
        M = rng.standard_normal((2, 2))
        np.testing.assert_array_equal(matmul(np.eye(2), M).data, M)

    def test_hand_product(self):
        np.testing.assert_array_equal(matmul(tensor([[1.0, 2.0], [3.0, 4.0]]), tensor([[1.0], [1.0]])).data,
                                      [[3.0], [7.0]])

    def test_gradient(self, rng):
        A = Tensor(rng.standard_normal((3, 4)), requires_grad=True)
        B = Tensor(rng.standard_normal((4, 2)), requires_grad=True)
        W = rng.standard_normal((3, 2))
        assert gradcheck(lambda: ops.sum(matmul(A, B) * W), [A, B]) <= 1e-6

    def test_mismatch(self):
        with pytest.raises(ShapeError):
            matmul(np.ones((2, 3)), np.ones((2, 3)))


class TestConv2d:
    def test_unit_kernel_is_identity(self, rng):
        x = rng.standard_normal((1, 5, 5))
        np.testing.assert_array_equal(conv2d(x, np.ones((1, 1, 1, 1))).data, x)

    def test_box_kernel_on_constant(self):
        out = conv2d(np.full((1, 6, 6), 0.5), np.ones((1, 1, 3, 3)), padding=0)
        np.testing.assert_allclose(out.data, np.full((1, 4, 4), 4.5))

    def test_cross_correlation_convention(self):
        x = np.zeros((1, 3, 3))
        x[0, 1, 1] = 1.0
        w = np.arange(9.0).reshape(1, 1, 3, 3)
        # an impulse picks up the kernel flipped: out[i, j] = w[2 - i, 2 - j]
        out = conv2d(x, w, padding=1).data[0]
        np.testing.assert_array_equal(out, w[0, 0, ::-1, ::-1])

    def test_gradcheck(self, rng):
        x = Tensor(rng.standard_normal((2, 5, 5)), requires_grad=True)
        w = Tensor(rng.standard_normal((3, 2, 3, 3)), requires_grad=True)
        assert gradcheck(lambda: ops.sum(conv2d(x, w, padding=1) ** 2), [x, w]) <= 1e-5

    def test_even_kernel_rejected(self):
        with pytest.raises(ValueError):
            conv2d(np.ones((1, 4, 4)), np.ones((1, 1, 2, 2)))

    def test_output_too_small(self):
        with pytest.raises(ShapeError):
            conv2d(np.ones((1, 2, 2)), np.ones((1, 1, 5, 5)))

    def test_bias(self):
        out = conv2d(np.zeros((1, 3, 3)), np.ones((2, 1, 1, 1)), bias=tensor([1.0, -1.0]))
        np.testing.assert_array_equal(out.data[:, 0, 0], [1.0, -1.0])


class TestReduce:
    def test_mean(self):
        assert reduce("mean", tensor([1.0, 2.0, 3.0])).item() == 2.0

    def test_sum_axis0(self):
        np.testing.assert_array_equal(reduce("sum", tensor([[1.0, 2.0], [3.0, 4.0]]), axes=0).data, [4, 6])

    def test_max_returns_argmax(self):
        vals, idx = reduce("max", tensor([[1.0, 5.0, 2.0], [7.0, 0.0, 7.0]]), axes=1)
        np.testing.assert_array_equal(vals.data, [5, 7])
        np.testing.assert_array_equal(idx, [1, 0])

    def test_mean_gradcheck(self, rng):
        a = Tensor(rng.standard_normal((3, 4)), requires_grad=True)
        assert gradcheck(lambda: ops.sum(reduce("mean", a, axes=1) ** 2), [a]) <= 1e-8

    def test_max_gradient_routes_to_argmax(self):
        a = tensor([[1.0, 5.0, 2.0]], requires_grad=True)
        vals, _ = reduce("max", a, axes=1)
        ops.sum(vals).backward()
        np.testing.assert_array_equal(a.grad, [[0, 1, 0]])

    def test_empty_axis(self):
        with pytest.raises(ShapeError):
            reduce("mean", tensor(np.zeros((2, 0))), axes=1)

    def test_unknown(self):
        with pytest.raises(ValueError):
            reduce("median", tensor([1.0]))


class TestSoftmax:
    def test_uniform(self):
        np.testing.assert_allclose(softmax_logits(tensor(np.zeros(4))).data, np.full(4, 0.25))

    @given(arrays(np.float64, (6,), elements=st.floats(-50, 50)), st.floats(-100, 100))
    def test_shift_invariance_and_normalization(self, z, c):
        p = softmax_logits(tensor(z)).data
        q = softmax_logits(tensor(z + c)).data
        assert np.abs(p - q).max() <= 1e-12
        assert (p >= 0).all()
        assert abs(p.sum() - 1.0) <= 1e-12

    def test_large_logits_stable(self):
        p = softmax_logits(tensor([1000.0, 1000.0])).data
        np.testing.assert_allclose(p, [0.5, 0.5])

    def test_cross_entropy_value(self):
        p = tensor([0.25, 0.5, 0.25])
        assert cross_entropy(p, 1).item() == pytest.approx(np.log(2.0), abs=1e-15)

    def test_cross_entropy_gradcheck(self, rng):
        z = Tensor(rng.standard_normal(5), requires_grad=True)
        assert gradcheck(lambda: cross_entropy(softmax_logits(z), 3), [z]) <= 1e-6

    def test_target_out_of_range(self):
        with pytest.raises(IndexError):
            cross_entropy(tensor([0.5, 0.5]), 2)

    def test_log_softmax_matches_log_of_softmax(self, rng):
        z = rng.standard_normal((3, 7))
        np.testing.assert_allclose(ops.log_softmax(z).data, np.log(ops.softmax(z).data), atol=1e-14)


class TestBackward:
    def test_constant_loss_gives_zero_grads(self):
        a = tensor([1.0, 2.0], requires_grad=True)
        loss = ops.sum(a * 0.0) + 3.0
        loss.backward()
        np.testing.assert_array_equal(a.grad, [0.0, 0.0])

    def test_sum_gives_ones(self):
        a = tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)
        ops.sum(a).backward()
        np.testing.assert_array_equal(a.grad, np.ones((2, 3)))

    def test_second_backward_raises(self):
        a = tensor([1.0], requires_grad=True)
        loss = ops.sum(a * a)
        loss.backward()
        with pytest.raises(GraphReuseError):
            loss.backward()

    def test_non_scalar_rejected(self):
        a = tensor([1.0, 2.0], requires_grad=True)
        with pytest.raises(ShapeError):
            (a * 2.0).backward()

    def test_unreachable_leaf_gets_zero_grad(self):
        a = tensor([1.0], requires_grad=True)
        b = tensor([2.0], requires_grad=True)
        ops.sum(a * 0.0 + b).backward()
        assert a.grad is not None and b.grad is not None

    def test_composite_network(self, rng):
        W1 = Tensor(rng.standard_normal((4, 5)), requires_grad=True)
        W2 = Tensor(rng.standard_normal((5, 3)), requires_grad=True)
        x = rng.standard_normal((6, 4))
        y = np.array([0, 1, 2, 0, 1, 2])
        loss = lambda: ops.cross_entropy_logits(matmul(ops.tanh(matmul(x, W1)), W2), y)  # noqa: E731
        assert gradcheck(loss, [W1, W2]) <= 1e-4

    def test_tape_is_topological(self, rng):
        a = tensor(rng.standard_normal(3), requires_grad=True)
        b = ops.exp(a)
        c = b * a
        d = ops.sum(c + b)
        order = tape(d)
        pos = {id(t): i for i, t in enumerate(order)}
        for node in order:
            if node._ctx is not None:
                for inp in node._ctx.inputs:
                    if inp.requires_grad:
                        assert pos[id(inp)] < pos[id(node)]
        assert order[-1] is d

    def test_replay_is_bit_identical(self, rng):
        data = rng.standard_normal((3, 3))

        def run():
            a = Tensor(data.copy(), requires_grad=True)
            loss = ops.sum(ops.softmax(matmul(a, a)) * data)
            loss.backward()
            return loss.item(), a.grad

        (l1, g1), (l2, g2) = run(), run()
        assert l1 == l2
        np.testing.assert_array_equal(g1, g2)

    def test_no_grad_records_nothing(self):
        a = tensor([1.0], requires_grad=True)
        with no_grad():
            b = a * 2.0
        assert not b.requires_grad and b.is_leaf


class TestOptim:
    def test_sgd_quadratic_step(self):
        w = tensor([1.0], requires_grad=True)
        ops.sum(w * w).backward()
        sgd_step([w], lr=0.1)
        np.testing.assert_allclose(w.data, [0.8])

    def test_adam_zero_grad_is_noop(self):
        w = tensor([1.0, -2.0], requires_grad=True)
        adam_step([w], AdamState(), [np.zeros(2)], lr=0.1)
        np.testing.assert_array_equal(w.data, [1.0, -2.0])

    def test_sgd_bowl_converges(self):
        # w_t = (1 - 2 lr)^t w_0 = 0.8^200 ~ 4e-20
        w = tensor([1.0, -3.0], requires_grad=True)
        opt = SGD([w], lr=0.1)
        for _ in range(200):
            opt.zero_grad()
            ops.sum(w * w).backward()
            opt.step()
        assert np.abs(w.data).max() < 1e-3
        np.testing.assert_allclose(w.data, np.array([1.0, -3.0]) * 0.8 ** 200, rtol=1e-9)

    def test_adam_first_step_is_lr_times_sign(self):
        w = tensor([1.0, -1.0], requires_grad=True)
        adam_step([w], AdamState(), [np.array([3.0, -0.5])], lr=0.01)
        np.testing.assert_allclose(w.data, [0.99, -0.99], atol=1e-8)

    def test_adam_state_advances(self):
        w = tensor([1.0], requires_grad=True)
        opt = Adam([w], lr=0.1)
        ops.sum(w * w).backward()
        opt.step()
        assert opt.state.t == 1 and opt.state.m[0].shape == (1,)

    def test_shape_mismatch(self):
        w = tensor([1.0, 2.0], requires_grad=True)
        with pytest.raises(ShapeError):
            sgd_step([w], [np.zeros(3)], lr=0.1)

    def test_non_positive_lr(self):
        with pytest.raises(ValueError):
            sgd_step([tensor([1.0], requires_grad=True)], [np.zeros(1)], lr=0.0)


class TestGradcheckHelpers:
    def test_relative_error_floor(self):
        assert relative_error(np.zeros(3), np.zeros(3)) == 0.0
        assert relative_error(np.array([1.0]), np.array([1.1])) == pytest.approx(0.1 / 1.1)


class TestNaNPropagation:
    def test_relu_keeps_nan(self):
        out = ops.relu(Tensor(np.array([np.nan, -1.0, 2.0]))).data
        assert np.isnan(out[0]) and out[1] == 0.0 and out[2] == 2.0
