import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ..errors import ContractError, DegenerateMaskError, NumericError, ShapeError
from ..tensor import RngState, Tensor, adain, channel_stats, global_avg_pool, grad, grad_check
from ..tensor import functional as F
from ..tensor.masks import downsample_mask


def away_from_zero(gen, shape, low=0.1, high=1.5):
    magnitude = gen.uniform(low, high, size=shape)
    return magnitude * gen.choice([-1.0, 1.0], size=shape)


class TestTensor:
    def test_data_is_read_only(self):
        source = np.array([1.0, 2.0], dtype=np.float32)
        t = Tensor(source)
        with pytest.raises(ValueError):
            t.data[0] = 5.0
        source[0] = 5.0
        assert t.data[0] == 1.0

    def test_integer_input_becomes_float32(self):
        assert Tensor([1, 2, 3]).dtype == np.float32

    def test_non_finite_values_are_rejected(self):
        with pytest.raises(NumericError):
            Tensor([1.0, np.nan])
        with pytest.raises(NumericError):
            F.div(Tensor([1.0]), Tensor([0.0]))

    def test_item_needs_one_element(self):
        assert Tensor([[3.5]]).item() == 3.5
        with pytest.raises(ContractError):
            Tensor([1.0, 2.0]).item()

    def test_constants_do_not_keep_graph_edges(self):
        a = Tensor([1.0, 2.0])
        b = F.mul(a, 3.0)
        assert not b.requires_grad
        assert b.parents == ()

    def test_operators(self):
        a = Tensor([2.0, 4.0])
        np.testing.assert_array_equal((a + 1).data, [3.0, 5.0])
        np.testing.assert_array_equal((1 - a).data, [-1.0, -3.0])
        np.testing.assert_array_equal((2 * a).data, [4.0, 8.0])
        np.testing.assert_array_equal((8 / a).data, [4.0, 2.0])
        np.testing.assert_array_equal((-a).data, [-2.0, -4.0])
        np.testing.assert_array_equal((a**2).data, [4.0, 16.0])

    def test_broadcast_mismatch_is_a_shape_error(self):
        with pytest.raises(ShapeError):
            F.add(Tensor(np.ones((2, 3))), Tensor(np.ones((4,))))


class TestBackward:
    def test_sum_gives_all_ones(self):
        z = Tensor.param(np.arange(6, dtype=np.float32).reshape(2, 3))
        g = grad(F.sum(z), {"z": z})
        np.testing.assert_array_equal(g["z"], np.ones((2, 3)))

    def test_mean_of_squares(self):
        z = Tensor.param([1.0, 2.0])
        g = grad(F.mean(F.square(z)), {"z": z})
        np.testing.assert_allclose(g["z"], [1.0, 2.0])

    def test_unused_parameter_gets_zero_gradient(self):
        z = Tensor.param([1.0, 2.0])
        unused = Tensor.param(np.ones((2, 2)))
        g = grad(F.sum(z), {"z": z, "unused": unused})
        np.testing.assert_array_equal(g["unused"], np.zeros((2, 2)))

    def test_non_scalar_loss_is_rejected(self):
        z = Tensor.param([1.0, 2.0])
        with pytest.raises(ContractError):
            grad(F.square(z), {"z": z})

    def test_shared_node_accumulates(self):
        z = Tensor.param([3.0])
        y = F.mul(z, z)
        g = grad(F.sum(F.add(y, y)), {"z": z})
        np.testing.assert_allclose(g["z"], [12.0])

    def test_detach_stops_gradient(self):
        z = Tensor.param([3.0])
        g = grad(F.sum(F.mul(z, z.detach())), {"z": z})
        np.testing.assert_allclose(g["z"], [3.0])

    def test_deep_chain_does_not_recurse(self):
        z = Tensor.param([1.0])
        y = z
        for _ in range(5000):
            y = F.add(y, 0.0)
        g = grad(F.sum(y), {"z": z})
        np.testing.assert_array_equal(g["z"], [1.0])

    def test_gradient_dtype_follows_parameter(self):
        z = Tensor.param(np.ones(3, dtype=np.float32))
        assert grad(F.sum(z), {"z": z})["z"].dtype == np.float32


class TestLayers:
    def test_identity_kernel_leaves_input_unchanged(self):
        x = np.random.default_rng(0).normal(size=(2, 3, 5, 5)).astype(np.float32)
        kernel = np.eye(3, dtype=np.float32).reshape(3, 3, 1, 1)
        np.testing.assert_array_equal(F.conv2d(x, kernel).data, x)

    def test_conv_matches_direct_sum(self):
        gen = np.random.default_rng(1)
        x = gen.normal(size=(1, 2, 5, 5))
        w = gen.normal(size=(3, 2, 3, 3))
        out = F.conv2d(Tensor(x), Tensor(w), stride=2, padding=1).data
        padded = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
        assert out.shape == (1, 3, 3, 3)
        for o in range(3):
            for i in range(3):
                for j in range(3):
                    patch = padded[0, :, 2 * i : 2 * i + 3, 2 * j : 2 * j + 3]
                    assert out[0, o, i, j] == pytest.approx(np.sum(patch * w[o]))

    def test_conv_channel_mismatch(self):
        with pytest.raises(ShapeError):
            F.conv2d(np.ones((1, 2, 4, 4)), np.ones((1, 3, 1, 1)))

    def test_global_pool_of_constant(self):
        x = np.full((2, 3, 4, 4), 2.5, dtype=np.float32)
        np.testing.assert_array_equal(global_avg_pool(x).data, np.full((2, 3), 2.5))

    def test_pool_with_single_pixel_mask(self):
        x = np.random.default_rng(2).normal(size=(1, 3, 4, 4)).astype(np.float32)
        mask = np.zeros((4, 4), dtype=np.float32)
        mask[1, 2] = 1.0
        np.testing.assert_allclose(global_avg_pool(x, mask).data[0], x[0, :, 1, 2])

    def test_pool_rejects_empty_mask(self):
        with pytest.raises(DegenerateMaskError):
            global_avg_pool(np.ones((1, 1, 2, 2)), np.zeros((2, 2)))

    def test_upsample_repeats_pixels(self):
        x = np.arange(4, dtype=np.float32).reshape(1, 1, 2, 2)
        out = F.upsample2x(x).data
        np.testing.assert_array_equal(out[0, 0], [[0, 0, 1, 1], [0, 0, 1, 1], [2, 2, 3, 3], [2, 2, 3, 3]])

    def test_split_and_concat_are_inverse(self):
        x = Tensor(np.arange(10, dtype=np.float32).reshape(2, 5))
        parts = F.split(x, [2, 3], axis=1)
        assert [p.shape for p in parts] == [(2, 2), (2, 3)]
        np.testing.assert_array_equal(F.concat(parts, axis=1).data, x.data)
        with pytest.raises(ShapeError):
            F.split(x, [2, 2], axis=1)

    def test_softplus_is_stable(self):
        out = F.softplus(Tensor([-200.0, 0.0, 200.0])).data
        np.testing.assert_allclose(out, [0.0, math.log(2.0), 200.0], atol=1e-6)


class TestChannelStats:
    def test_two_values(self):
        stats = channel_stats(np.array([[[1.0, 3.0]]]), eps=0.0)
        assert stats.mean.item() == pytest.approx(2.0)
        assert stats.std.item() == pytest.approx(1.0)

    def test_constant_channel(self):
        stats = channel_stats(np.full((1, 3, 3), 4.0), eps=1e-5)
        assert stats.std.item() == pytest.approx(math.sqrt(1e-5), rel=1e-4)

    def test_masked_statistics_ignore_outside(self):
        z = np.zeros((1, 1, 2, 2))
        z[0, 0] = [[1.0, 3.0], [100.0, -50.0]]
        mask = np.array([[1.0, 1.0], [0.0, 0.0]])
        stats = channel_stats(z, mask, eps=0.0)
        assert stats.mean.item() == pytest.approx(2.0)
        assert stats.std.item() == pytest.approx(1.0)

    def test_empty_mask(self):
        with pytest.raises(DegenerateMaskError):
            channel_stats(np.ones((1, 2, 2)), np.zeros((2, 2)))

    def test_mask_shape_mismatch(self):
        with pytest.raises(ShapeError):
            channel_stats(np.ones((1, 2, 2)), np.ones((3, 3)))

    def test_adain_standardizes(self):
        z = np.random.default_rng(3).normal(2.0, 3.0, size=(2, 4, 5, 5))
        out = adain(z, np.ones(4), np.zeros(4)).data
        np.testing.assert_allclose(out.mean(axis=(2, 3)), 0.0, atol=1e-6)
        np.testing.assert_allclose(out.std(axis=(2, 3)), 1.0, atol=1e-5)

    def test_adain_with_own_statistics_is_identity(self):
        z = np.random.default_rng(4).normal(size=(1, 3, 4, 4))
        stats = channel_stats(z, eps=0.0)
        out = adain(z, stats.std.data.reshape(1, 3), stats.mean.data.reshape(1, 3), eps=0.0).data
        np.testing.assert_allclose(out, z, atol=1e-9)

    def test_adain_hand_example(self):
        out = adain(np.array([[[1.0, 3.0]]]), np.array([2.0]), np.array([5.0]), eps=0.0).data
        np.testing.assert_allclose(out.reshape(-1), [3.0, 7.0])

    def test_full_mask_matches_no_mask_bitwise(self):
        z = np.random.default_rng(5).normal(size=(2, 3, 4, 4)).astype(np.float32)
        gamma = np.random.default_rng(6).normal(size=(2, 3)).astype(np.float32)
        beta = np.zeros((2, 3), dtype=np.float32)
        ones = np.ones((2, 4, 4), dtype=np.float32)
        np.testing.assert_array_equal(adain(z, gamma, beta).data, adain(z, gamma, beta, ones).data)


TRIALS = range(20)


def small_shape(gen, ndim: int, low: int = 1) -> tuple[int, ...]:
    return tuple(int(d) for d in gen.integers(low, 7, size=ndim))


def readout(gen):
    """Scalar read-out with random weights drawn on first use and reused after."""
    weights = []

    def apply(y):
        if not weights:
            weights.append(Tensor(gen.normal(size=y.shape)))
        return F.sum(F.mul(y, weights[0]))

    return apply


def positive(gen, shape):
    return gen.uniform(0.5, 2.0, size=shape)


UNARY_OPS = {
    "relu": (F.relu, away_from_zero),
    "leaky_relu": (F.leaky_relu, away_from_zero),
    "abs": (F.abs, away_from_zero),
    "neg": (F.neg, lambda gen, shape: gen.normal(size=shape)),
    "square": (F.square, lambda gen, shape: gen.normal(size=shape)),
    "tanh": (F.tanh, lambda gen, shape: gen.normal(size=shape)),
    "softplus": (F.softplus, lambda gen, shape: gen.normal(scale=3.0, size=shape)),
    "sqrt": (F.sqrt, positive),
    "power": (lambda x: F.power(x, 1.5), positive),
}

BINARY_OPS = {
    "add": F.add,
    "sub": F.sub,
    "mul": F.mul,
    "div": F.div,
}


class TestGradCheck:
    @pytest.mark.parametrize("trial", TRIALS)
    @pytest.mark.parametrize("name", sorted(UNARY_OPS))
    def test_unary(self, name, trial):
        op, sample = UNARY_OPS[name]
        gen = np.random.default_rng(trial)
        x = sample(gen, small_shape(gen, 2))
        read = readout(gen)
        assert grad_check(lambda t: read(op(t[0])), [x], eps=1e-3) < 1e-3

    @pytest.mark.parametrize("trial", TRIALS)
    @pytest.mark.parametrize("name", sorted(BINARY_OPS))
    def test_binary_with_broadcast(self, name, trial):
        gen = np.random.default_rng(1000 + trial)
        shape = small_shape(gen, 2)
        a = gen.normal(size=shape)
        # the second operand broadcasts along the first axis
        b = away_from_zero(gen, (1, shape[1]), low=0.5) if name == "div" else gen.normal(size=(1, shape[1]))
        op, read = BINARY_OPS[name], readout(gen)
        assert grad_check(lambda t: read(op(t[0], t[1])), [a, b], eps=1e-3) < 1e-3

    @pytest.mark.parametrize("trial", TRIALS)
    def test_reductions(self, trial):
        gen = np.random.default_rng(2000 + trial)
        x = gen.normal(size=small_shape(gen, 3))
        axis = int(gen.integers(3))

        def fn(t):
            partial = F.square(F.mean(t[0], axis=axis, keepdims=bool(trial % 2)))
            return F.add(F.sum(F.mul(partial, 0.5)), F.mean(F.square(t[0])))

        assert grad_check(fn, [x], eps=1e-3) < 1e-3

    @pytest.mark.parametrize("trial", TRIALS)
    def test_shape_ops(self, trial):
        gen = np.random.default_rng(3000 + trial)
        rows, cols = small_shape(gen, 2, low=2)
        x = gen.normal(size=(rows, cols))
        cut = int(gen.integers(1, cols))
        read = readout(gen)

        def fn(t):
            left, right = F.split(t[0], [cut, cols - cut], axis=1)
            joined = F.concat([F.mul(right, 2.0), left], axis=1)
            flat = F.reshape(joined, (cols, rows))
            return read(F.square(F.narrow(flat, 0, 1, cols)))

        assert grad_check(fn, [x], eps=1e-3) < 1e-3

    @pytest.mark.parametrize("trial", TRIALS)
    def test_linear(self, trial):
        gen = np.random.default_rng(trial)
        inputs = [gen.normal(size=(3, 4)), gen.normal(size=(2, 4)), gen.normal(size=2)]
        error = grad_check(lambda t: F.sum(F.square(F.linear(t[0], t[1], t[2]))), inputs, eps=1e-3)
        assert error < 1e-3

    @pytest.mark.parametrize("trial", TRIALS)
    def test_conv_with_stride_and_padding(self, trial):
        gen = np.random.default_rng(300 + trial)
        stride, padding = int(gen.integers(1, 3)), int(gen.integers(0, 2))
        n, c, o = small_shape(gen, 3)
        size = int(gen.integers(3, 7))
        inputs = [gen.normal(size=(n, c, size, size)), gen.normal(size=(o, c, 3, 3)), gen.normal(size=o)]

        def fn(t):
            return F.sum(F.square(F.conv2d(t[0], t[1], t[2], stride=stride, padding=padding)))

        assert grad_check(fn, inputs, eps=1e-3) < 1e-3

    @pytest.mark.parametrize("trial", TRIALS)
    def test_upsample(self, trial):
        gen = np.random.default_rng(400 + trial)
        x = gen.normal(size=(1,) + small_shape(gen, 3))
        read = readout(gen)
        assert grad_check(lambda t: read(F.upsample2x(t[0])), [x], eps=1e-3) < 1e-3

    @pytest.mark.parametrize("trial", TRIALS)
    def test_adain(self, trial):
        gen = np.random.default_rng(100 + trial)
        n, c = small_shape(gen, 2)
        h, w = small_shape(gen, 2, low=2)
        mask = gen.uniform(0.2, 1.0, size=(n, h, w)) if trial % 2 else None
        inputs = [gen.normal(size=(n, c, h, w)), gen.uniform(0.5, 2.0, size=(n, c)), gen.normal(size=(n, c))]
        read = readout(gen)

        def fn(t):
            return read(adain(t[0], t[1], t[2], mask))

        assert grad_check(fn, inputs, eps=1e-3) < 1e-3

    @pytest.mark.parametrize("trial", TRIALS)
    def test_masked_stats_and_pool(self, trial):
        gen = np.random.default_rng(200 + trial)
        n, c = small_shape(gen, 2)
        h, w = small_shape(gen, 2, low=2)
        mask = gen.uniform(0.2, 1.0, size=(n, h, w))

        def fn(t):
            stats = channel_stats(t[0], mask)
            pooled = global_avg_pool(t[0], mask)
            return F.add(F.sum(F.mul(stats.std, stats.mean)), F.sum(F.square(pooled)))

        assert grad_check(fn, [gen.normal(size=(n, c, h, w))], eps=1e-3) < 1e-3

    @pytest.mark.parametrize("trial", TRIALS)
    def test_instance_norm(self, trial):
        gen = np.random.default_rng(500 + trial)
        h, w = small_shape(gen, 2, low=2)
        x = gen.normal(size=(2, 3, h, w))
        read = readout(gen)
        assert grad_check(lambda t: read(F.instance_norm(t[0])), [x], eps=1e-3) < 1e-3

    def test_constant_function(self):
        assert grad_check(lambda t: F.sum(F.mul(t[0], 0.0)), [np.ones((2, 2))]) == 0.0

    def test_samples_limit_perturbations(self):
        calls = []

        def fn(t):
            calls.append(1)
            return F.sum(F.square(t[0]))

        grad_check(fn, [np.ones((10, 10))], samples=5)
        assert len(calls) == 1 + 2 * 5

    @pytest.mark.parametrize("eps", [0.0, -1e-3, 0.1])
    def test_eps_range(self, eps):
        with pytest.raises(ContractError):
            grad_check(lambda t: F.sum(t[0]), [np.ones(2)], eps=eps)


class TestMasks:
    def test_area_downsampling_keeps_partial_blocks(self):
        mask = np.zeros((1, 1, 4, 4), dtype=np.float32)
        mask[0, 0, 0, 0] = 1.0
        out = downsample_mask(mask, (2, 2), "area")
        assert out[0, 0, 0, 0] == 0.25
        assert out.sum() == 0.25

    def test_nearest_downsampling_samples_block_centers(self):
        mask = np.zeros((1, 1, 4, 4), dtype=np.float32)
        mask[0, 0, 0, 0] = 1.0
        assert downsample_mask(mask, (2, 2), "nearest").sum() == 0.0
        mask[0, 0, 1, 1] = 1.0
        assert downsample_mask(mask, (2, 2), "nearest")[0, 0, 0, 0] == 1.0

    def test_non_integer_factor(self):
        with pytest.raises(ShapeError):
            downsample_mask(np.ones((1, 1, 5, 5)), (2, 2))


class TestRng:
    def test_same_state_same_stream(self):
        a = RngState(42, 3).generator().standard_normal(5)
        b = RngState(42, 3).generator().standard_normal(5)
        np.testing.assert_array_equal(a, b)

    def test_draw_advances_counter(self):
        gen, following = RngState(1).draw()
        assert following == RngState(1, 1)
        assert not np.array_equal(gen.random(4), following.generator().random(4))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(min_value=0, max_value=2**63), st.integers(min_value=0, max_value=1000))
    def test_forks_are_distinct(self, seed, index):
        root = RngState(seed)
        assert root.fork(index) != root.fork(index + 1)
        assert root.fork(index) == RngState(seed).fork(index)
