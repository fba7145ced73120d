import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from retinexlce import autodiff as ad
from retinexlce.decomposition import (
    LAMBDA_IS,
    LAMBDA_RC,
    DecomposedPair,
    classical_decompose,
    decom_loss,
    decompose,
    init_decom_params,
)
from retinexlce.image import Image
from retinexlce.losses import tv_loss
from retinexlce.restoration import LAMBDA_TV, init_restore_params, restore, restore_loss

T = ad.Tensor


@pytest.fixture(scope="module")
def decom_params():
    return init_decom_params(0)


@pytest.fixture(scope="module")
def restore_params():
    return init_restore_params(0)


class TestDecompose:
    @pytest.mark.parametrize("h,w", [(8, 8), (13, 6), (5, 17), (1, 1)])
    def test_shapes_and_range(self, decom_params, h, w):
        img = Image(np.random.default_rng(h * w).random((3, h, w)))
        out = decompose(decom_params, img)
        assert out.illumination.shape == (1, h, w)
        assert out.reflectance.shape == (3, h, w)
        for t in (out.illumination, out.reflectance, out.reconstruct()):
            assert t.data.min() >= 0 and t.data.max() <= 1
        assert out.reconstruct().shape == (3, h, w)

    def test_deterministic(self, decom_params):
        img = Image(np.random.default_rng(1).random((3, 12, 12)))
        a, b = decompose(decom_params, img), decompose(decom_params, img)
        assert a.illumination.data.tobytes() == b.illumination.data.tobytes()
        assert a.reflectance.data.tobytes() == b.reflectance.data.tobytes()

    def test_batch_order_invariant(self, decom_params):
        x = np.random.default_rng(2).random((3, 3, 8, 12))
        fwd = decompose(decom_params, x)
        rev = decompose(decom_params, x[::-1].copy())
        np.testing.assert_allclose(fwd.reflectance.data, rev.reflectance.data[::-1], atol=1e-12)
        np.testing.assert_allclose(fwd.illumination.data[1], decompose(decom_params, x[1]).illumination.data,
                                   atol=1e-12)

    def test_init_seeded(self):
        a, b, c = init_decom_params(3), init_decom_params(3), init_decom_params(4)
        assert all(np.array_equal(a[k].data, b[k].data) for k in a)
        assert not np.array_equal(a["enc1.weight"].data, c["enc1.weight"].data)


class TestClassical:
    def test_gray(self):
        out = classical_decompose(Image(np.full((3, 4, 4), 0.5)))
        np.testing.assert_array_equal(out.illumination.data, 0.5)
        np.testing.assert_allclose(out.reflectance.data, 0.5 / 0.5001, rtol=1e-12)

    def test_black(self):
        out = classical_decompose(Image(np.zeros((3, 3, 3))))
        assert not out.illumination.data.any() and not out.reflectance.data.any()

    def test_channel_max(self):
        px = np.array([0.2, 0.6, 0.4]).reshape(3, 1, 1)
        out = classical_decompose(Image(px))
        assert out.illumination.data.item() == 0.6
        np.testing.assert_allclose(out.reflectance.data.ravel(), [0.2 / 0.6001, 0.6 / 0.6001, 0.4 / 0.6001])

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 100_000))
    def test_reconstruction_error(self, seed):
        img = np.random.default_rng(seed).uniform(0.1, 1.0, (3, 6, 6))
        rec = classical_decompose(Image(img)).reconstruct().data
        assert np.abs(rec - img).max() <= 0.01


class TestDecomLoss:
    def maps(self, rng, h=4, w=4):
        return DecomposedPair(T(rng.uniform(0.2, 1, (1, h, w))), T(rng.uniform(0, 1, (3, h, w))))

    def test_perfect_identical(self):
        pair = self.maps(np.random.default_rng(0))
        img = pair.reconstruct().data
        loss = decom_loss(pair, pair, img, img).item()
        expected = LAMBDA_IS * 2 * tv_loss(pair.illumination).item()
        assert loss == pytest.approx(expected, rel=1e-12)

    def test_constant_maps(self):
        rng = np.random.default_rng(1)
        lo = DecomposedPair(T(np.full((1, 4, 4), 0.3)), T(np.full((3, 4, 4), 0.5)))
        no = DecomposedPair(T(np.full((1, 4, 4), 0.9)), T(np.full((3, 4, 4), 0.6)))
        in_low, in_normal = rng.random((3, 4, 4)), rng.random((3, 4, 4))
        expected = (np.mean((0.15 - in_low) ** 2) + np.mean((0.54 - in_normal) ** 2)
                    + LAMBDA_RC * 0.1)
        # constant maps leave only the eps floor in each tv term
        assert decom_loss(lo, no, in_low, in_normal).item() == pytest.approx(expected, abs=2 * LAMBDA_IS * 1e-8 + 1e-12)

    def test_weights_disable_terms(self):
        rng = np.random.default_rng(2)
        lo, no = self.maps(rng), self.maps(rng)
        a, b = rng.random((3, 4, 4)), rng.random((3, 4, 4))
        only_mse = decom_loss(lo, no, a, b, lambda_rc=0.0, lambda_is=0.0).item()
        assert only_mse == pytest.approx(np.mean((lo.reconstruct().data - a) ** 2)
                                         + np.mean((no.reconstruct().data - b) ** 2), rel=1e-12)


class TestRestore:
    @pytest.mark.parametrize("h,w", [(8, 8), (7, 10), (3, 5)])
    def test_shape_range(self, restore_params, h, w):
        rng = np.random.default_rng(h + w)
        out = restore(restore_params, rng.random((1, h, w)), rng.random((3, h, w)))
        assert out.shape == (3, h, w)
        assert out.data.min() >= 0 and out.data.max() <= 1

    def test_deterministic(self, restore_params):
        rng = np.random.default_rng(0)
        i, r = rng.random((1, 8, 8)), rng.random((3, 8, 8))
        assert restore(restore_params, i, r).data.tobytes() == restore(restore_params, i, r).data.tobytes()

    def test_batched_equals_single(self, restore_params):
        rng = np.random.default_rng(1)
        i, r = rng.random((2, 1, 8, 4)), rng.random((2, 3, 8, 4))
        both = restore(restore_params, i, r).data
        np.testing.assert_allclose(both[1], restore(restore_params, i[1], r[1]).data, atol=1e-12)


class TestRestoreLoss:
    def test_equal_constant(self):
        x = T(np.full((3, 4, 4), 0.4))
        assert restore_loss(x, x).item() < 1e-8

    def test_constant_offset(self):
        loss = restore_loss(T(np.full((3, 4, 4), 0.5)), T(np.full((3, 4, 4), 0.6))).item()
        assert loss == pytest.approx(0.01, abs=LAMBDA_TV * 1e-8 + 1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 100_000))
    def test_nonnegative(self, seed):
        rng = np.random.default_rng(seed)
        assert restore_loss(T(rng.random((3, 5, 5))), T(rng.random((3, 5, 5)))).item() >= 0

    def test_gradcheck(self):
        rng = np.random.default_rng(3)
        a = T(rng.random((3, 4, 4)), requires_grad=True)
        assert ad.grad_check(lambda: restore_loss(a, T(rng_fixed())), [a]).passed


def rng_fixed():
    return np.random.default_rng(99).random((3, 4, 4))
