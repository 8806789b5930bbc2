import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from decoderlab import tensor as T
from decoderlab.gradcheck import check_gradients, weighted_sum
from decoderlab.tensor import Tensor
from oracles import loop_conv2d, loop_resize_bilinear


def rand(rng, *shape, dtype=np.float32):
    return rng.standard_normal(shape).astype(dtype)


class TestConv2d:
    def test_ones_same_pad(self):
        out = T.conv2d(Tensor(np.ones((1, 1, 3, 3))), Tensor(np.ones((1, 1, 3, 3)))).data[0, 0]
        assert out[1, 1] == 9.0
        assert out[0, 0] == out[0, 2] == out[2, 0] == out[2, 2] == 4.0

    def test_scalar_case(self):
        out = T.conv2d(Tensor([[[[3.0]]]]), Tensor([[[[2.0]]]]), bias=Tensor([0.5]))
        assert out.data.item() == 6.5

    @pytest.mark.parametrize("stride", [1, 2])
    @pytest.mark.parametrize("padding", ["same", "valid"])
    def test_matches_loop_oracle(self, stride, padding):
        rng = np.random.default_rng(stride)
        x, k, b = rand(rng, 2, 3, 5, 5), rand(rng, 4, 3, 3, 3), rand(rng, 4)
        got = T.conv2d(Tensor(x), Tensor(k), Tensor(b), stride=stride, padding=padding).data
        np.testing.assert_allclose(got, loop_conv2d(x, k, b, stride, padding), atol=1e-5)

    def test_even_kernel_extra_pad_bottom_right(self):
        rng = np.random.default_rng(7)
        x, k = rand(rng, 1, 2, 4, 5), rand(rng, 3, 2, 2, 4)
        got = T.conv2d(Tensor(x), Tensor(k)).data
        assert got.shape == (1, 3, 4, 5)
        np.testing.assert_allclose(got, loop_conv2d(x, k), atol=1e-5)

    def test_same_pad_keeps_size(self):
        out = T.conv2d(Tensor(np.zeros((1, 2, 7, 6))), Tensor(np.zeros((5, 2, 3, 3))))
        assert out.shape == (1, 5, 7, 6)

    def test_channel_mismatch(self):
        with pytest.raises(ValueError):
            T.conv2d(Tensor(np.zeros((1, 2, 4, 4))), Tensor(np.zeros((1, 3, 3, 3))))

    def test_bad_stride(self):
        with pytest.raises(ValueError):
            T.conv2d(Tensor(np.zeros((1, 1, 4, 4))), Tensor(np.zeros((1, 1, 3, 3))), stride=0)

    @given(st.integers(0, 10_000), st.floats(-2, 2), st.floats(-2, 2))
    def test_linearity(self, seed, alpha, beta):
        rng = np.random.default_rng(seed)
        x, y, k = rand(rng, 1, 2, 5, 4), rand(rng, 1, 2, 5, 4), rand(rng, 3, 2, 3, 3)
        lhs = T.conv2d(Tensor(alpha * x + beta * y), Tensor(k)).data
        rhs = alpha * T.conv2d(Tensor(x), Tensor(k)).data + beta * T.conv2d(Tensor(y), Tensor(k)).data
        np.testing.assert_allclose(lhs, rhs, atol=1e-5)

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        x, k = rand(rng, 2, 3, 6, 6), rand(rng, 4, 3, 3, 3)
        a = T.conv2d(Tensor(x), Tensor(k)).data
        b = T.conv2d(Tensor(x.copy()), Tensor(k.copy())).data
        assert a.tobytes() == b.tobytes()


class TestConv1d:
    def test_rows_hand_sum(self):
        x = Tensor(np.array([1.0, 2.0, 3.0]).reshape(1, 1, 3, 1))
        out = T.conv1d_rows(x, Tensor(np.ones((1, 1, 3, 1))))
        np.testing.assert_array_equal(out.data.ravel(), [3, 6, 5])

    def test_cols_hand_sum(self):
        x = Tensor(np.array([1.0, 2.0, 3.0]).reshape(1, 1, 1, 3))
        out = T.conv1d_cols(x, Tensor(np.ones((1, 1, 1, 3))))
        np.testing.assert_array_equal(out.data.ravel(), [3, 6, 5])

    def test_impulse_is_identity(self):
        rng = np.random.default_rng(0)
        x = rand(rng, 2, 1, 5, 6)
        imp_r = np.zeros((1, 1, 3, 1)); imp_r[0, 0, 1, 0] = 1
        imp_c = np.zeros((1, 1, 1, 3)); imp_c[0, 0, 0, 1] = 1
        np.testing.assert_array_equal(T.conv1d_rows(Tensor(x), Tensor(imp_r)).data, x)
        np.testing.assert_array_equal(T.conv1d_cols(Tensor(x), Tensor(imp_c)).data, x)

    def test_rows_matches_conv2d(self):
        rng = np.random.default_rng(1)
        x, k = rand(rng, 2, 3, 6, 5), rand(rng, 4, 3, 3, 1)
        np.testing.assert_allclose(T.conv1d_rows(Tensor(x), Tensor(k)).data,
                                   T.conv2d(Tensor(x), Tensor(k)).data, atol=1e-6)

    def test_cols_is_transposed_rows(self):
        rng = np.random.default_rng(2)
        x, k = rand(rng, 1, 2, 5, 7), rand(rng, 3, 2, 3, 1)
        cols = T.conv1d_cols(Tensor(x), Tensor(k.transpose(0, 1, 3, 2))).data
        rows = T.conv1d_rows(Tensor(x.transpose(0, 1, 3, 2).copy()), Tensor(k)).data
        np.testing.assert_allclose(cols, rows.transpose(0, 1, 3, 2), atol=1e-6)

    def test_wrong_kernel_shape(self):
        with pytest.raises(ValueError):
            T.conv1d_rows(Tensor(np.zeros((1, 1, 4, 4))), Tensor(np.zeros((1, 1, 3, 3))))
        with pytest.raises(ValueError):
            T.conv1d_cols(Tensor(np.zeros((1, 1, 4, 4))), Tensor(np.zeros((1, 1, 3, 1))))


class TestDepthwisePointwise:
    def test_impulse_and_zero(self):
        rng = np.random.default_rng(0)
        x = rand(rng, 1, 2, 4, 4)
        k = np.zeros((2, 1, 3, 3)); k[0, 0, 1, 1] = 1
        out = T.depthwise_conv2d(Tensor(x), Tensor(k)).data
        np.testing.assert_array_equal(out[:, 0], x[:, 0])
        assert np.all(out[:, 1] == 0)

    def test_constant_valid(self):
        out = T.depthwise_conv2d(Tensor(np.full((1, 3, 5, 5), 2.0)), Tensor(np.ones((3, 1, 3, 3))), padding="valid")
        np.testing.assert_array_equal(out.data, np.full((1, 3, 3, 3), 18.0))

    def test_matches_block_diagonal_conv2d(self):
        rng = np.random.default_rng(4)
        x, k = rand(rng, 2, 3, 5, 6), rand(rng, 3, 1, 3, 3)
        full = np.zeros((3, 3, 3, 3), dtype=np.float32)
        for c in range(3):
            full[c, c] = k[c, 0]
        np.testing.assert_allclose(T.depthwise_conv2d(Tensor(x), Tensor(k)).data,
                                   T.conv2d(Tensor(x), Tensor(full)).data, atol=1e-5)

    def test_depthwise_channel_mismatch(self):
        with pytest.raises(ValueError):
            T.depthwise_conv2d(Tensor(np.zeros((1, 2, 4, 4))), Tensor(np.zeros((3, 1, 3, 3))))

    def test_pointwise_identity_and_sum(self):
        rng = np.random.default_rng(5)
        x = rand(rng, 1, 2, 3, 3)
        eye = np.eye(2).reshape(2, 2, 1, 1)
        np.testing.assert_array_equal(T.pointwise_conv(Tensor(x), Tensor(eye)).data, x)
        summed = T.pointwise_conv(Tensor(x), Tensor(np.ones((1, 2, 1, 1)))).data
        np.testing.assert_allclose(summed[:, 0], x[:, 0] + x[:, 1], atol=1e-6)

    def test_pointwise_matches_conv2d(self):
        rng = np.random.default_rng(6)
        x, k = rand(rng, 2, 3, 4, 5), rand(rng, 4, 3, 1, 1)
        np.testing.assert_allclose(T.pointwise_conv(Tensor(x), Tensor(k)).data,
                                   T.conv2d(Tensor(x), Tensor(k)).data, atol=1e-6)


class TestInterleave:
    def test_single_value(self):
        np.testing.assert_array_equal(T.zero_interleave(Tensor([[[[5.0]]]])).data[0, 0], [[5, 0], [0, 0]])

    def test_even_positions(self):
        out = T.zero_interleave(Tensor(np.array([[1.0, 2.0], [3.0, 4.0]])[None, None])).data[0, 0]
        expected = np.zeros((4, 4))
        expected[::2, ::2] = [[1, 2], [3, 4]]
        np.testing.assert_array_equal(out, expected)

    @given(st.integers(0, 10_000))
    def test_sum_and_block_sum(self, seed):
        rng = np.random.default_rng(seed)
        x = rand(rng, 2, 3, 3, 4)
        out = T.zero_interleave(Tensor(x)).data
        assert out.shape == (2, 3, 6, 8)
        np.testing.assert_array_equal(out.reshape(2, 3, 3, 2, 4, 2).sum(axis=(3, 5)), x)

    def test_single_axis(self):
        x = Tensor(np.ones((1, 1, 2, 3)))
        assert T.zero_interleave(x, axes="rows").shape == (1, 1, 4, 3)
        assert T.zero_interleave(x, axes="cols").shape == (1, 1, 2, 6)

    def test_factor_must_be_two(self):
        with pytest.raises(ValueError):
            T.zero_interleave(Tensor(np.ones((1, 1, 2, 2))), factor=3)


class TestResize:
    @pytest.mark.parametrize("mode", ["nearest", "bilinear", "bicubic"])
    @given(v=st.floats(-5, 5), h=st.integers(1, 9), w=st.integers(1, 9))
    def test_constant_preserved(self, mode, v, h, w):
        out = T.resize(Tensor(np.full((1, 2, 3, 4), v), dtype=np.float64), h, w, mode)
        np.testing.assert_allclose(out.data, v, atol=1e-9)

    def test_bilinear_hand_values(self):
        out = T.resize(Tensor(np.array([[0.0, 2.0], [0.0, 2.0]])[None, None]), 2, 4, "bilinear").data[0, 0]
        np.testing.assert_allclose(out, [[0, 0.5, 1.5, 2], [0, 0.5, 1.5, 2]])

    def test_nearest_tiles(self):
        x = np.array([[1.0, 2.0], [3.0, 4.0]])
        out = T.resize(Tensor(x[None, None]), 4, 4, "nearest").data[0, 0]
        np.testing.assert_array_equal(out, np.kron(x, np.ones((2, 2))))

    def test_bilinear_matches_loop_oracle(self):
        x = rand(np.random.default_rng(9), 2, 2, 3, 5)
        np.testing.assert_allclose(T.resize(Tensor(x), 7, 4, "bilinear").data, loop_resize_bilinear(x, 7, 4), atol=1e-6)

    def test_bilinear_identity(self):
        rng = np.random.default_rng(0)
        x = rand(rng, 1, 2, 5, 7)
        np.testing.assert_allclose(T.resize(Tensor(x), 5, 7, "bilinear").data, x, atol=1e-6)

    def test_bicubic_keys_weights(self):
        # interior 2x: source offsets +-0.25 and +-0.75 give the Keys(a=-0.5) taps
        m = T.resize_matrix(8, 16, "bicubic")
        np.testing.assert_allclose(m[7, 2:6], [-0.0703125, 0.8671875, 0.2265625, -0.0234375])

    def test_bad_size(self):
        with pytest.raises(ValueError):
            T.resize(Tensor(np.ones((1, 1, 2, 2))), 0, 3)
        with pytest.raises(ValueError):
            T.resize(Tensor(np.ones((1, 1, 2, 2))), 4, 4, "lanczos")


class TestChannels:
    def test_concat_order_and_split(self):
        a, b = Tensor(np.zeros((1, 1, 2, 2))), Tensor(np.ones((1, 2, 2, 2)))
        c = T.concat_channels(a, b)
        assert c.shape == (1, 3, 2, 2)
        assert np.all(c.data[:, 0] == 0) and np.all(c.data[:, 1:] == 1)
        a2, b2 = T.split_channels(c, 1)
        np.testing.assert_array_equal(a2.data, a.data)
        np.testing.assert_array_equal(b2.data, b.data)

    def test_concat_rejects_mismatch_and_empty(self):
        with pytest.raises(ValueError):
            T.concat_channels(Tensor(np.zeros((1, 1, 2, 2))), Tensor(np.zeros((1, 1, 3, 2))))
        with pytest.raises(ValueError):
            T.concat_channels(Tensor(np.zeros((1, 0, 2, 2))), Tensor(np.zeros((1, 1, 2, 2))))

    def test_group_mean(self):
        x = np.stack([np.full((2, 2), v) for v in (1.0, 2.0, 3.0, 4.0)])[None]
        np.testing.assert_array_equal(T.group_reduce_channels(Tensor(x), 4, "mean").data, np.full((1, 1, 2, 2), 2.5))

    @given(st.integers(0, 10_000))
    def test_group_identity_and_sum(self, seed):
        x = rand(np.random.default_rng(seed), 1, 6, 2, 3)
        np.testing.assert_array_equal(T.group_reduce_channels(Tensor(x), 1).data, x)
        s = T.group_reduce_channels(Tensor(x), 3, "sum").data
        m = T.group_reduce_channels(Tensor(x), 3, "mean").data
        np.testing.assert_allclose(s, 3 * m, rtol=1e-6, atol=1e-6)

    def test_group_not_divisible(self):
        with pytest.raises(ValueError):
            T.group_reduce_channels(Tensor(np.zeros((1, 5, 2, 2))), 2)

    def test_depth_to_space_layout(self):
        x = np.arange(4.0).reshape(1, 4, 1, 1)
        np.testing.assert_array_equal(T.depth_to_space(Tensor(x)).data[0, 0], [[0, 1], [2, 3]])

    @given(st.integers(0, 10_000))
    def test_space_to_depth_round_trip(self, seed):
        x = rand(np.random.default_rng(seed), 2, 8, 3, 2)
        back = T.space_to_depth(T.depth_to_space(Tensor(x)))
        np.testing.assert_array_equal(back.data, x)


class TestBackward:
    def test_sum_grad_is_ones(self):
        x = Tensor(np.arange(6.0).reshape(1, 1, 2, 3), requires_grad=True)
        with T.Tape() as tape:
            loss = T.sum_all(x)
        T.backward(tape, loss)
        np.testing.assert_array_equal(x.grad, np.ones((1, 1, 2, 3)))
        assert loss.grad.item() == 1.0

    def test_valid_conv_sum_grad(self):
        x = Tensor(np.ones((1, 1, 3, 3)), requires_grad=True)
        with T.Tape() as tape:
            loss = T.sum_all(T.conv2d(x, Tensor(np.ones((1, 1, 3, 3))), padding="valid"))
        T.backward(tape, loss)
        np.testing.assert_array_equal(x.grad, np.ones((1, 1, 3, 3)))

    def test_errors(self):
        x = Tensor(np.ones((1, 1, 2, 2)), requires_grad=True)
        with T.Tape() as tape:
            y = T.mul(x, x)
        with pytest.raises(ValueError):
            T.backward(tape, y)
        with pytest.raises(ValueError):
            T.backward(tape, Tensor(1.0))

    def test_grad_dims_match(self):
        rng = np.random.default_rng(0)
        x = Tensor(rand(rng, 2, 3, 4, 4), requires_grad=True)
        k = Tensor(rand(rng, 5, 3, 3, 3), requires_grad=True)
        unused = Tensor(rand(rng, 2, 2), requires_grad=True)
        with T.Tape() as tape:
            loss = T.sum_all(T.conv2d(x, k))
            T.relu(unused)
        T.backward(tape, loss)
        assert x.grad.shape == x.shape and k.grad.shape == k.shape
        assert np.all(unused.grad == 0)

    def test_reverse_order(self):
        order = []
        x = Tensor(np.ones((1, 1, 2, 2)), requires_grad=True)
        with T.Tape() as tape:
            y = T.relu(x)
            z = T.sum_all(T.mul(y, y))
        for entry in tape.entries:
            original = entry.backward
            entry.backward = (lambda op, fn: lambda g: (order.append(op), fn(g))[1])(entry.op, original)
        T.backward(tape, z)
        assert order == list(reversed(tape.ops()))


class TestFiniteDiff:
    def test_sum(self):
        x = Tensor(np.random.default_rng(0).standard_normal((1, 1, 3, 3)))
        np.testing.assert_allclose(T.finite_diff_grad(lambda: T.sum_all(x), x), 1.0, atol=1e-9)

    def test_half_square(self):
        x = Tensor(np.random.default_rng(1).standard_normal((1, 2, 2, 2)))
        g = T.finite_diff_grad(lambda: 0.5 * float(np.sum(x.data**2)), x)
        np.testing.assert_allclose(g, x.data, atol=1e-6)

    def test_input_restored(self):
        x = Tensor(np.random.default_rng(2).standard_normal((1, 1, 2, 2)))
        before = x.data.copy()
        T.finite_diff_grad(lambda: T.sum_all(T.mul(x, x)), x)
        np.testing.assert_array_equal(x.data, before)


def _f64(rng, *shape):
    return Tensor(rng.standard_normal(shape), dtype=np.float64)


def _away_from_zero(rng, *shape):
    a = rng.standard_normal(shape)
    a[np.abs(a) < 0.05] += 0.1
    return Tensor(a, dtype=np.float64)


PRIMITIVES = {
    "conv2d_same": (lambda x, k, b: T.conv2d(x, k, b), [(2, 3, 5, 5), (4, 3, 3, 3), (4,)]),
    "conv2d_stride2": (lambda x, k: T.conv2d(x, k, stride=2), [(2, 3, 6, 5), (2, 3, 3, 3)]),
    "conv2d_valid": (lambda x, k: T.conv2d(x, k, padding="valid"), [(1, 2, 5, 6), (3, 2, 3, 2)]),
    "conv1d_rows": (lambda x, k: T.conv1d_rows(x, k), [(2, 2, 5, 4), (3, 2, 3, 1)]),
    "conv1d_cols": (lambda x, k: T.conv1d_cols(x, k), [(2, 2, 4, 5), (3, 2, 1, 3)]),
    "depthwise": (lambda x, k: T.depthwise_conv2d(x, k), [(2, 3, 5, 5), (3, 1, 3, 3)]),
    "pointwise": (lambda x, k, b: T.pointwise_conv(x, k, b), [(2, 3, 4, 4), (2, 3, 1, 1), (2,)]),
    "interleave": (lambda x: T.zero_interleave(x), [(2, 2, 3, 3)]),
    "resize_bilinear": (lambda x: T.resize(x, 6, 8, "bilinear"), [(2, 2, 3, 4)]),
    "resize_bicubic": (lambda x: T.resize(x, 7, 5, "bicubic"), [(1, 2, 4, 4)]),
    "resize_nearest": (lambda x: T.resize(x, 6, 6, "nearest"), [(1, 2, 3, 3)]),
    "concat": (lambda a, b: T.concat_channels(a, b), [(2, 1, 3, 3), (2, 2, 3, 3)]),
    "group_mean": (lambda x: T.group_reduce_channels(x, 2, "mean"), [(2, 4, 3, 3)]),
    "group_sum": (lambda x: T.group_reduce_channels(x, 4, "sum"), [(1, 8, 2, 3)]),
    "depth_to_space": (lambda x: T.depth_to_space(x), [(2, 8, 3, 3)]),
    "space_to_depth": (lambda x: T.space_to_depth(x), [(1, 2, 4, 6)]),
    "add_broadcast": (lambda a, b: T.add(a, b), [(2, 3, 4, 4), (1, 3, 1, 1)]),
    "mul": (lambda a, b: T.mul(a, b), [(2, 3, 4, 4), (2, 3, 4, 4)]),
    "sub": (lambda a, b: T.sub(a, b), [(1, 2, 3, 3), (1, 2, 3, 3)]),
    "tanh": (lambda x: T.tanh(x), [(2, 2, 3, 3)]),
    "matmul": (lambda a, b: T.matmul(a, b), [(4, 5), (5, 3)]),
}


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("name", sorted(PRIMITIVES))
def test_primitive_gradients(name, seed):
    fn, shapes = PRIMITIVES[name]
    rng = np.random.default_rng(seed)
    inputs = [_f64(rng, *s) for s in shapes]
    with T.no_tape():
        out_shape = fn(*inputs).shape
    w = rng.standard_normal(out_shape)
    assert check_gradients(lambda *a: weighted_sum(fn(*a), w), inputs) < 1e-3


@pytest.mark.parametrize("seed", range(5))
def test_relu_gradient(seed):
    rng = np.random.default_rng(seed)
    x = _away_from_zero(rng, 2, 3, 4, 4)
    w = rng.standard_normal(x.shape)
    assert check_gradients(lambda a: weighted_sum(T.relu(a), w), [x]) < 1e-3


def test_forward_outputs_finite():
    rng = np.random.default_rng(0)
    x = Tensor(rand(rng, 2, 4, 6, 6) * 100)
    outs = [T.conv2d(x, Tensor(rand(rng, 3, 4, 3, 3))), T.resize(x, 13, 9, "bicubic"),
            T.depth_to_space(x), T.group_reduce_channels(x, 4), T.zero_interleave(x)]
    assert all(np.all(np.isfinite(o.data)) for o in outs)


def test_dtype_rules():
    assert Tensor([1, 2, 3]).dtype == np.float32
    assert Tensor(np.ones(3, dtype=np.int64)).dtype == np.float32
    x32 = Tensor(np.ones((1, 1, 3, 3), dtype=np.float32))
    assert T.conv2d(x32, Tensor(np.ones((1, 1, 3, 3), dtype=np.float32))).dtype == np.float32
    # float64 arrays stay float64 so gradient checks can run in double precision
    assert Tensor(np.ones(2)).dtype == np.float64
