import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import smooth_images
from priorcanon.autodiff import no_grad
from priorcanon.errors import ShapeError
from priorcanon.groups import disk_mask, rotate_array
from priorcanon.nets import (
    EquivariantBatchNorm, FixedCanonicalizer, GConvLayer, GroupCanonicalizer, equivariant_norm, fiber_logits,
    group_conv, kernel_rotation_operators, lifting_conv, shift_fibers,
)

# Measured bounds for C8 (bilinear input rotation vs interpolated kernel
# rotation) on band-limited unit-range 28x28 inputs, frozen with margin.
C8_FEATURE_BOUND = 5e-2  # relative to the largest feature magnitude
C8_LOGIT_BOUND = 5e-2  # absolute, one-layer canonicalizer in eval mode


def _rot_features(f, g, n):
    """Spatially rotate every fiber and shift the fiber axis by ``g``."""
    return shift_fibers(rotate_array(f, k=g, n=n), g)


class TestKernelRotation:
    @pytest.mark.parametrize("k", [1, 3, 5])
    def test_quarter_turn_operators_are_permutations(self, k):
        ops_ = kernel_rotation_operators(k, 4)
        for g in range(4):
            M = ops_[g]
            np.testing.assert_array_equal(np.sort(M, axis=1)[:, -1], 1.0)
            np.testing.assert_array_equal(M.sum(0), 1.0)

    def test_c4_identity_slot(self):
        np.testing.assert_array_equal(kernel_rotation_operators(5, 4)[0], np.eye(25))

    @pytest.mark.parametrize("k", [3, 5])
    def test_c8_basis_norm(self, k):
        assert np.linalg.norm(kernel_rotation_operators(k, 8)[0]) == pytest.approx(k)

    def test_c8_even_slots_are_exact_quarter_turns(self):
        T = kernel_rotation_operators(5, 8)
        for q in range(1, 4):
            expected = np.rot90(T[0].reshape(5, 5, 25), q, axes=(0, 1)).reshape(25, 25)
            np.testing.assert_array_equal(T[2 * q], expected)


class TestLiftingConv:
    def test_zero_image_gives_bias(self, rng):
        layer = GConvLayer(rng, "lifting", 1, 3, 4, 3)
        layer.bias.data[:] = [0.5, -1.0, 2.0]
        with no_grad():
            out = lifting_conv(np.zeros((1, 6, 6)), layer).data
        assert out.shape == (3, 4, 6, 6)
        for c, b in enumerate([0.5, -1.0, 2.0]):
            np.testing.assert_array_equal(out[c], b)

    @pytest.mark.parametrize("k", [3, 5])
    def test_c4_equivariance_exact(self, rng, k):
        layer = GConvLayer(rng, "lifting", 2, 3, 4, k)
        x = rng.standard_normal((2, 9, 9))
        with no_grad():
            base = layer(x).data
            for g in range(4):
                np.testing.assert_allclose(layer(rotate_array(x, k=g, n=4)).data, _rot_features(base, g, 4),
                                           atol=1e-12)

    @pytest.mark.parametrize("k", [3, 5])
    def test_c8_equivariance_within_bound(self, rng, k):
        layer = GConvLayer(rng, "lifting", 1, 4, 8, k)
        X = smooth_images(rng, 5, 28, sigma=2.0)
        inner = disk_mask(28, k + 1.0)
        with no_grad():
            for x in X:
                base = layer(x).data
                scale = np.abs(base).max()
                for g in range(1, 8):
                    diff = layer(rotate_array(x, k=g, n=8)).data - _rot_features(base, g, 8)
                    assert np.abs(diff[..., inner]).max() / scale <= C8_FEATURE_BOUND

    def test_wrong_layer_kind(self, rng):
        with pytest.raises(ValueError):
            lifting_conv(np.zeros((1, 5, 5)), GConvLayer(rng, "group", 1, 1, 4, 3))

    def test_non_square(self, rng):
        with pytest.raises(ShapeError):
            GConvLayer(rng, "lifting", 1, 1, 4, 3)(np.zeros((1, 5, 6)))

    def test_even_kernel(self, rng):
        with pytest.raises(ValueError):
            GConvLayer(rng, "lifting", 1, 1, 4, 4)


class TestGroupConv:
    def test_passthrough_kernel(self, rng):
        layer = GConvLayer(rng, "group", 1, 1, 4, 1)
        layer.weight.data[:] = 0.0
        layer.weight.data[0, 0, 0, 0, 0] = 1.0
        f = rng.standard_normal((1, 4, 5, 5))
        with no_grad():
            np.testing.assert_allclose(group_conv(f, layer).data, f, atol=1e-15)

    @pytest.mark.parametrize("k", [1, 3, 5])
    def test_c4_equivariance_exact(self, rng, k):
        layer = GConvLayer(rng, "group", 2, 3, 4, k)
        f = rng.standard_normal((2, 4, 9, 9))
        with no_grad():
            base = layer(f).data
            for g in range(4):
                np.testing.assert_allclose(layer(_rot_features(f, g, 4)).data, _rot_features(base, g, 4),
                                           atol=1e-12)

    def test_fiber_mismatch(self, rng):
        with pytest.raises(ShapeError):
            GConvLayer(rng, "group", 1, 1, 4, 3)(np.zeros((1, 8, 5, 5)))

    def test_wrong_layer_kind(self, rng):
        with pytest.raises(ValueError):
            group_conv(np.zeros((1, 4, 5, 5)), GConvLayer(rng, "lifting", 1, 1, 4, 3))


class TestFiberLogits:
    def test_constant_features(self):
        np.testing.assert_allclose(fiber_logits(np.full((3, 8, 5, 5), 0.7)).data, 0.7)

    def test_mask(self, rng):
        f = rng.standard_normal((2, 4, 5, 5))
        m = disk_mask(5)
        np.testing.assert_allclose(fiber_logits(f, m).data, f[:, :, m].mean(axis=(0, 2)))

    def test_c4_shift_exact(self, rng):
        net = GroupCanonicalizer(rng, 4, 1, 4, 2, 3, use_norm=False)
        x = rng.standard_normal((1, 11, 11))
        with no_grad():
            base = net(x).data
            for g in range(4):
                np.testing.assert_allclose(net(rotate_array(x, k=g, n=4)).data, np.roll(base, g), atol=1e-12)

    def test_c8_shift_within_bound(self):
        net = GroupCanonicalizer(np.random.default_rng(1), 8, 1, 8, 1, 5)
        net.eval()
        X = smooth_images(np.random.default_rng(2), 20, 28, sigma=1.5)
        with no_grad():
            base = net(X).data
            for g in range(1, 8):
                rot = net(rotate_array(X, k=g, n=8)).data
                assert np.abs(rot - np.roll(base, g, axis=1)).max() <= C8_LOGIT_BOUND


class TestEquivariantNorm:
    @given(st.integers(0, 2 ** 31), st.integers(0, 7))
    def test_commutes_with_fiber_shift(self, seed, g):
        r = np.random.default_rng(seed)
        x = r.standard_normal((3, 2, 8, 4, 4)) * 3 + 1
        a = equivariant_norm(shift_fibers(x, g), EquivariantBatchNorm(2)).data
        b = shift_fibers(equivariant_norm(x, EquivariantBatchNorm(2)).data, g)
        # equal up to summation order in the pooled statistics
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-14)

    def test_normalized_statistics(self, rng):
        # variances of 16 and up keep the eps shrinkage var / (var + eps) under 1e-6
        x = rng.standard_normal((4, 3, 4, 5, 5)) * np.array([4.0, 10.0, 25.0]).reshape(1, 3, 1, 1, 1) + 2.0
        y = EquivariantBatchNorm(3)(x).data
        np.testing.assert_allclose(y.mean(axis=(0, 2, 3, 4)), 0.0, atol=1e-6)
        np.testing.assert_allclose(y.var(axis=(0, 2, 3, 4)), 1.0, atol=1e-6)

    def test_already_normalized_nearly_unchanged(self, rng):
        x = rng.standard_normal((4, 2, 4, 5, 5))
        x = (x - x.mean(axis=(0, 2, 3, 4), keepdims=True)) / x.std(axis=(0, 2, 3, 4), keepdims=True)
        np.testing.assert_allclose(EquivariantBatchNorm(2)(x).data, x, atol=1e-4)

    def test_zero_variance_guarded(self):
        y = EquivariantBatchNorm(1)(np.full((2, 1, 4, 3, 3), 5.0)).data
        assert np.isfinite(y).all()
        np.testing.assert_array_equal(y, 0.0)

    def test_eval_uses_running_stats(self, rng):
        bn = EquivariantBatchNorm(2, momentum=1.0)
        x = rng.standard_normal((4, 2, 4, 3, 3)) + 3.0
        bn(x)
        bn.eval()
        y = bn(x).data
        np.testing.assert_allclose(y.mean(axis=(0, 2, 3, 4)), 0.0, atol=1e-10)


class TestGroupCanonicalizer:
    @pytest.mark.parametrize("use_norm", [False, True])
    def test_c4_end_to_end_exact(self, rng, use_norm):
        net = GroupCanonicalizer(rng, 4, 1, 4, 3, 3, use_norm=use_norm)
        X = rng.uniform(0, 1, (4, 1, 12, 12))
        with no_grad():
            base = net(X).data
            for g in range(4):
                np.testing.assert_allclose(net(rotate_array(X, k=g, n=4)).data, np.roll(base, g, axis=1),
                                           atol=1e-10)

    def test_output_shapes(self, rng):
        net = GroupCanonicalizer(rng, 8, 2, 3, 1, 3)
        with no_grad():
            assert net(np.zeros((5, 2, 9, 9))).shape == (5, 8)
            assert net(np.zeros((2, 9, 9))).shape == (8,)

    def test_deterministic_init(self):
        a = GroupCanonicalizer(np.random.default_rng(3), 4).state_dict()
        b = GroupCanonicalizer(np.random.default_rng(3), 4).state_dict()
        assert a.keys() == b.keys()
        for key in a:
            np.testing.assert_array_equal(a[key], b[key])

    def test_fixed_canonicalizer(self):
        fixed = FixedCanonicalizer(8, k=3)
        out = fixed(np.zeros((2, 1, 5, 5))).data
        assert out.shape == (2, 8) and (out.argmax(1) == 3).all()
