import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from retinexlce import autodiff as ad
from retinexlce.curve import (
    AlphaStack,
    apply_curve_stage,
    enhance_illumination,
    init_lce_params,
    lce_backbone,
)
from retinexlce.errors import InvalidArgument, ShapeError
from retinexlce.fusion import (
    FusionInputs,
    build_s_global,
    build_s_local,
    fuse,
    global_coeff,
    infer_coeff,
    local_coeff,
)

T = ad.Tensor
EPS = 1e-4


def const(v, shape):
    return T(np.full(shape, v))


class TestCoefficients:
    def test_constant_ratio(self):
        t = global_coeff(const(0.2, (1, 4, 4)), const(0.4, (1, 4, 4)), EPS).item()
        assert t == pytest.approx(0.2 / 0.4001, abs=1e-12)
        assert t == pytest.approx(0.5, abs=1e-3)

    def test_identical_maps(self):
        m = T(np.random.default_rng(0).uniform(0.2, 1, (1, 5, 5)))
        assert global_coeff(m, m, EPS).item() == pytest.approx(1.0, abs=1e-3)

    def test_two_by_two(self):
        low = T(np.array([[[0.1, 0.2], [0.3, 0.4]]]))
        normal = const(0.5, (1, 2, 2))
        expected = np.mean([0.1, 0.2, 0.3, 0.4]) / 0.5001
        assert global_coeff(low, normal, EPS).item() == pytest.approx(expected, abs=1e-12)
        assert global_coeff(low, normal, EPS).item() == pytest.approx(0.5, abs=1e-3)

    def test_local_full_crop_equals_global(self):
        rng = np.random.default_rng(1)
        low, normal = T(rng.uniform(0.1, 1, (1, 6, 7))), T(rng.uniform(0.1, 1, (1, 6, 7)))
        t_local, window = local_coeff(low, normal, 1.0, eps=EPS)
        assert window == (0, 0, 6, 7)
        assert t_local.item() == pytest.approx(global_coeff(low, normal, EPS).item(), abs=1e-15)

    def test_local_bright_center(self):
        low = np.full((1, 4, 4), 0.1)
        low[0, 1:3, 1:3] = [[0.6, 0.8], [0.4, 0.2]]
        normal = np.full((1, 4, 4), 0.5)
        normal[0, 1:3, 1:3] = [[0.8, 0.8], [0.5, 0.4]]
        t, _ = local_coeff(T(low), T(normal), 0.5, eps=EPS)
        expected = np.mean([0.6 / 0.8001, 0.8 / 0.8001, 0.4 / 0.5001, 0.2 / 0.4001])
        assert t.item() == pytest.approx(expected, abs=1e-12)

    def test_local_degenerate(self):
        with pytest.raises(InvalidArgument):
            local_coeff(const(0.2, (1, 4, 4)), const(0.4, (1, 4, 4)), 0.0)

    def test_reciprocal_swap(self):
        a, b = const(0.3, (1, 4, 4)), const(0.6, (1, 4, 4))
        t = global_coeff(a, b, EPS).item()
        t_inv = global_coeff(b, a, EPS).item()
        assert t * t_inv == pytest.approx(1.0, abs=1e-3)

    @pytest.mark.parametrize("mean,expected", [(0.25, 0.25 / 0.5001), (0.9, 1.0), (0.0, EPS)])
    def test_infer_coeff(self, mean, expected):
        assert infer_coeff(const(mean, (1, 4, 4)), 0.5, EPS).item() == pytest.approx(expected, abs=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000))
    def test_coefficient_bounds(self, seed):
        rng = np.random.default_rng(seed)
        low, normal = T(rng.random((1, 5, 5))), T(rng.random((1, 5, 5)))
        t = global_coeff(low, normal, EPS).item()
        assert 0 <= t <= 1 / EPS


class TestIlluminationMatrices:
    def test_s_global(self):
        r = T(np.random.default_rng(0).random((3, 4, 4)))
        np.testing.assert_array_equal(build_s_global(r, T(1.0)).data, r.data)
        np.testing.assert_array_equal(build_s_global(r, T(0.0)).data, 0.0)
        assert build_s_global(const(0.8, (3, 1, 1)), T(0.5)).data[0, 0, 0] == pytest.approx(0.4)

    def test_s_local(self):
        np.testing.assert_array_equal(build_s_local(3, 2, T(0.0)).data, 0.0)
        s = build_s_local(2, 2, T(0.7))
        assert s.shape == (1, 2, 2)
        np.testing.assert_array_equal(s.data, 0.7)
        up = ad.resize_bilinear(s, 13, 9)
        np.testing.assert_allclose(up.data, 0.7, atol=1e-9)


class TestFuse:
    def test_constant_worked_example(self):
        stack = fuse(FusionInputs(i_low=const(0.2, (1, 8, 8)), r_low=const(0.6, (3, 8, 8)),
                                  i_normal=const(0.4, (1, 8, 8)), crop_fraction=0.5))
        t = 0.2 / 0.4001
        expected = [t, 0.2, 0.6 * t, 0.6 * t, 0.6 * t, 0.2]
        assert stack.x_rf.shape == (6, 8, 8)
        for ch, v in enumerate(expected):
            np.testing.assert_allclose(stack.x_rf.data[ch], v, atol=1e-12)
        np.testing.assert_allclose(stack.x_rf.data[:, 0, 0], [0.5, 0.2, 0.3, 0.3, 0.3, 0.2], atol=2e-4)

    def test_channel5_is_i_low(self):
        rng = np.random.default_rng(3)
        i_low = T(rng.random((1, 9, 7)))
        stack = fuse(FusionInputs(i_low=i_low, r_low=T(rng.random((3, 9, 7))), i_normal=T(rng.random((1, 9, 7)))))
        assert stack.x_rf.data[5].tobytes() == i_low.data[0].tobytes()

    def test_full_crop_local_equals_global(self):
        rng = np.random.default_rng(4)
        inp = FusionInputs(i_low=T(rng.uniform(0.1, 1, (1, 6, 6))), r_low=T(rng.random((3, 6, 6))),
                           i_normal=T(rng.uniform(0.1, 1, (1, 6, 6))), crop_fraction=1.0)
        stack = fuse(inp)
        np.testing.assert_allclose(stack.x_rf.data[0], stack.t_global.item(), atol=1e-6)

    def test_gradient_wrt_r_low(self):
        rng = np.random.default_rng(5)
        r = T(rng.random((3, 6, 6)), requires_grad=True)
        i_low, i_norm = T(rng.uniform(0.1, 1, (1, 6, 6))), T(rng.uniform(0.1, 1, (1, 6, 6)))
        rep = ad.grad_check(lambda: ad.mean(fuse(FusionInputs(i_low=i_low, r_low=r, i_normal=i_norm)).x_rf), [r])
        assert rep.passed

    def test_inference_mode(self):
        stack = fuse(FusionInputs(i_low=const(0.25, (1, 8, 8)), r_low=const(0.6, (3, 8, 8)), target_mean=0.5))
        t = 0.25 / 0.5001
        np.testing.assert_allclose(stack.x_rf.data[0], t, atol=1e-12)
        np.testing.assert_allclose(stack.x_rf.data[2], 0.6 * t, atol=1e-12)

    def test_batched_matches_single(self):
        rng = np.random.default_rng(6)
        il, rl, inn = rng.uniform(0.1, 1, (2, 1, 8, 8)), rng.random((2, 3, 8, 8)), rng.uniform(0.1, 1, (2, 1, 8, 8))
        batch = fuse(FusionInputs(i_low=T(il), r_low=T(rl), i_normal=T(inn))).x_rf.data
        for k in range(2):
            one = fuse(FusionInputs(i_low=T(il[k]), r_low=T(rl[k]), i_normal=T(inn[k]))).x_rf.data
            np.testing.assert_allclose(batch[k], one, atol=1e-14)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            fuse(FusionInputs(i_low=const(0.2, (1, 8, 8)), r_low=const(0.6, (3, 8, 7))))

    def test_random_crop_seeded(self):
        def run(seed):
            return fuse(FusionInputs(i_low=T(np.random.default_rng(0).random((1, 10, 10))),
                                     r_low=const(0.5, (3, 10, 10)), i_normal=const(0.5, (1, 10, 10)),
                                     rng=np.random.default_rng(seed))).window
        assert run(3) == run(3)
        assert run(3)[2:] == (5, 5)


class TestCurveStage:
    def test_identity(self):
        x = T(np.random.default_rng(0).random((1, 3, 3)))
        np.testing.assert_array_equal(apply_curve_stage(x, T(np.zeros((1, 3, 3)))).data, x.data)

    @pytest.mark.parametrize("alpha", [-1.0, -0.3, 0.4, 1.0])
    def test_fixed_points(self, alpha):
        out = apply_curve_stage(T([0.0, 1.0]), T([alpha, alpha])).data
        np.testing.assert_array_equal(out, [0.0, 1.0])

    def test_hand_values(self):
        assert apply_curve_stage(T(0.5), T(1.0)).item() == 0.75
        assert apply_curve_stage(T(0.5), T(-1.0)).item() == 0.25

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0, 1), st.floats(0, 1), st.floats(-1, 1))
    def test_monotone_and_direction(self, x1, x2, a):
        lo, hi = min(x1, x2), max(x1, x2)
        f = lambda x: apply_curve_stage(T(x), T(a)).item()
        assert f(lo) <= f(hi) + 1e-9
        assert 0.0 <= f(lo) <= 1.0
        if a > 0:
            assert f(lo) >= lo - 1e-12
        elif a < 0:
            assert f(lo) <= lo + 1e-12


class TestBackbone:
    def test_shapes_and_range(self):
        params = init_lce_params(0)
        x = T(np.random.default_rng(1).random((6, 7, 5)))
        stack = lce_backbone(x, params)
        assert stack.alphas.shape == (8, 7, 5)
        assert np.abs(stack.alphas.data).max() <= 1.0
        assert len(stack.split()) == 8

    def test_zero_params(self):
        params = init_lce_params(0)
        for p in params.values():
            p.data[...] = 0
        out = lce_backbone(T(np.random.default_rng(2).random((6, 4, 4))), params)
        np.testing.assert_array_equal(out.alphas.data, 0.0)

    def test_channel_mismatch(self):
        with pytest.raises(ShapeError):
            lce_backbone(T(np.zeros((5, 4, 4))), init_lce_params(0))

    def test_layer_widths(self):
        p = init_lce_params(0)
        assert p["conv1.weight"].shape == (32, 6, 3, 3)
        assert p["conv5.weight"].shape == (32, 64, 3, 3)
        assert p["conv7.weight"].shape == (8, 64, 3, 3)

    def test_alpha3_grad_wrt_layer1(self):
        x = T(np.random.default_rng(3).random((6, 6, 6)))
        params = init_lce_params(3)
        w = params["conv1.weight"]
        rep = ad.grad_check(lambda: ad.mean(lce_backbone(x, params).alphas[2:3]), [w],
                            max_per_param=60, tol=1e-3)
        assert rep.passed, rep


class TestEnhance:
    def x_rf(self, pixel=0.2, shape=(4, 4)):
        x = np.random.default_rng(0).random((6, *shape))
        x[5] = pixel
        return T(x)

    def alphas(self, v, shape=(4, 4)):
        return AlphaStack(T(np.full((8, *shape), v)))

    def test_zero_alpha_identity(self):
        x = T(np.random.default_rng(1).random((6, 5, 5)))
        out = enhance_illumination(x, None, "iterative", alphas=self.alphas(0.0, (5, 5)))
        assert out.data.tobytes() == x.data[5:6].tobytes()

    def test_alpha_one_trajectory(self):
        out = enhance_illumination(self.x_rf(), None, "iterative", alphas=self.alphas(1.0)).data
        y = 0.2
        for _ in range(8):
            y = y + y * (1 - y)
        np.testing.assert_allclose(out, y, atol=1e-15)
        assert out[0, 0, 0] == pytest.approx(1.0, abs=1e-4)

    def test_literal_sigmoid_compression(self):
        out = enhance_illumination(self.x_rf(), None, "literal", alphas=self.alphas(0.0)).data
        np.testing.assert_allclose(out, 1 / (1 + np.exp(-0.2)), atol=1e-12)
        assert out[0, 0, 0] == pytest.approx(0.5498, abs=1e-4)

    def test_unknown_mode(self):
        with pytest.raises(InvalidArgument):
            enhance_illumination(self.x_rf(), None, "parallel", alphas=self.alphas(0.0))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000))
    def test_range_preserved_with_network(self, seed):
        rng = np.random.default_rng(seed)
        x = T(rng.random((6, 5, 6)))
        out = enhance_illumination(x, init_lce_params(seed % 7), "iterative").data
        assert out.min() >= 0.0 and out.max() <= 1.0
