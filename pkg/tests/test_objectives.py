import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tuneconv import tensor as T
from tuneconv.conv import gaussian_kernel
from tuneconv.objectives import (MultiLossSpec, TuneParams, blur_target,
                                 build_targets, l1_loss, multi_loss,
                                 noise_target, psnr, psnr_eta)
from tuneconv.tensor import DomainError, ShapeError, Tensor


class TestTuneParams:
    def test_valid(self):
        tp = TuneParams([0.0, 0.5, 1.0])
        assert tp.p == 3

    def test_out_of_range_rejected(self):
        with pytest.raises(DomainError):
            TuneParams([0.5, 1.1])
        with pytest.raises(DomainError):
            TuneParams([-0.01])
        with pytest.raises(DomainError):
            TuneParams([])


class TestMultiLossSpec:
    def test_defaults(self):
        spec = MultiLossSpec([("rec", 1.0), ("noise", 1.0)])
        assert spec.p == 2
        assert spec.ids == ["rec", "noise"]
        assert spec.lambdas == [1.0, 1.0]

    def test_unknown_objective(self):
        with pytest.raises(DomainError):
            MultiLossSpec([("sepia", 1.0)])

    def test_negative_lambda(self):
        with pytest.raises(DomainError):
            MultiLossSpec([("rec", -1.0)])


class TestL1Loss:
    def test_identical_is_zero(self):
        x = Tensor(np.random.default_rng(0).random((1, 3, 4, 4)))
        assert l1_loss(x, x.data).item() == 0.0

    def test_constant_offset(self):
        a = Tensor(np.zeros((2, 5)))
        b = np.full((2, 5), 0.3)
        assert l1_loss(a, b).item() == pytest.approx(0.3, rel=1e-6)

    def test_target_not_differentiated(self):
        pred = Tensor(np.ones(4), requires_grad=True)
        target = Tensor(np.zeros(4), requires_grad=True)
        T.backward(l1_loss(pred, target))
        assert pred.grad is not None
        assert target.grad is None


class TestNoiseTarget:
    def test_omega_zero_is_clean(self):
        rng = np.random.default_rng(0)
        y = rng.random((1, 3, 8, 8))
        z = rng.random((1, 3, 8, 8))
        np.testing.assert_array_equal(noise_target(y, z, 0.0).data, y)

    def test_nu_zero_is_clean(self):
        rng = np.random.default_rng(1)
        y = rng.random((1, 3, 8, 8))
        z = rng.random((1, 3, 8, 8))
        np.testing.assert_array_equal(noise_target(y, z, 1.0, nu=0.0).data, y)

    def test_full_omega_default_nu(self):
        y = np.zeros((1, 1, 2, 2))
        z = np.ones((1, 1, 2, 2))
        np.testing.assert_allclose(noise_target(y, z, 1.0).data, 0.9)

    def test_linear_in_omega(self):
        rng = np.random.default_rng(2)
        y = rng.random((1, 3, 4, 4))
        z = rng.random((1, 3, 4, 4))
        mid = noise_target(y, z, 0.5).data
        ends = (noise_target(y, z, 0.0).data + noise_target(y, z, 1.0).data) / 2
        np.testing.assert_allclose(mid, ends, atol=1e-7)

    def test_rejects_bad_inputs(self):
        y = np.zeros((1, 1, 2, 2))
        with pytest.raises(ShapeError):
            noise_target(y, np.zeros((1, 1, 3, 3)), 0.5)
        with pytest.raises(DomainError):
            noise_target(y, y, 1.5)
        with pytest.raises(DomainError):
            noise_target(y, y, 0.5, nu=2.0)


class TestBlurTarget:
    def test_omega_zero_is_identity(self):
        rng = np.random.default_rng(0)
        y = rng.random((1, 3, 16, 16)).astype(np.float32)
        np.testing.assert_array_equal(blur_target(y, 0.0).data, y)

    def test_constant_image_unchanged(self):
        # a flat image has no high-pass content to amplify
        y = np.full((1, 3, 16, 16), 0.5, dtype=np.float32)
        np.testing.assert_allclose(blur_target(y, 1.0).data, 0.5, atol=1e-5)

    def test_edge_overshoot_sign(self):
        # sharpening amplifies an edge: above-mean pixels move up
        y = np.zeros((1, 1, 16, 16), dtype=np.float32)
        y[:, :, :, 8:] = 1.0
        out = blur_target(y, 1.0).data
        assert out[0, 0, 8, 8] > 1.0   # overshoot on the bright side
        assert out[0, 0, 8, 7] < 0.0   # undershoot on the dark side

    def test_amplification_scales_with_gamma(self):
        rng = np.random.default_rng(3)
        y = rng.random((1, 1, 16, 16)).astype(np.float32)
        d1 = blur_target(y, 1.0, gamma=1.0).data - y
        d8 = blur_target(y, 1.0, gamma=8.0).data - y
        np.testing.assert_allclose(d8, 8.0 * d1, atol=1e-5)

    def test_unnormalized_filter_rejected(self):
        g = Tensor(gaussian_kernel(9, 2.5).data * 2.0)
        with pytest.raises(DomainError, match="normalized"):
            blur_target(np.zeros((1, 1, 16, 16), dtype=np.float32), 0.5, g=g)


class TestMultiLoss:
    def test_weighted_sum_arithmetic(self):
        spec = MultiLossSpec([("rec", 1.0), ("noise", 2.0)])
        losses = [Tensor(np.float32(0.5)), Tensor(np.float32(1.0))]
        out = multi_loss(np.array([1.0, 1.0]), spec, losses)
        assert out.item() == pytest.approx(2.5, rel=1e-6)

    def test_zero_omega_kills_term(self):
        spec = MultiLossSpec([("rec", 1.0), ("noise", 1.0)])
        losses = [Tensor(np.float32(3.0)), Tensor(np.float32(7.0))]
        out = multi_loss(np.array([1.0, 0.0]), spec, losses)
        assert out.item() == pytest.approx(3.0, rel=1e-6)

    def test_midpoint_linearity_in_omega(self):
        spec = MultiLossSpec([("rec", 0.7), ("noise", 1.3), ("blur", 0.2)])
        rng = np.random.default_rng(5)
        losses = [Tensor(np.float32(v)) for v in rng.random(3)]
        a = rng.random(3)
        b = rng.random(3)
        mid = multi_loss((a + b) / 2, spec, losses).item()
        ends = (multi_loss(a, spec, losses).item()
                + multi_loss(b, spec, losses).item()) / 2
        assert mid == pytest.approx(ends, abs=1e-7)

    def test_gradient_flows_scaled(self):
        spec = MultiLossSpec([("rec", 1.0), ("noise", 1.0)])
        pred = Tensor(np.array([2.0]), requires_grad=True)
        losses = [T.mean(T.absval(pred)), T.mean(T.mul(pred, pred))]
        T.backward(multi_loss(np.array([0.25, 0.5]), spec, losses))
        # d/dpred = 0.25 * sign(2) + 0.5 * 2 * 2 = 2.25
        np.testing.assert_allclose(pred.grad, [2.25])

    def test_length_mismatch(self):
        spec = MultiLossSpec([("rec", 1.0)])
        with pytest.raises(ShapeError):
            multi_loss(np.array([1.0, 0.0]), spec, [Tensor(np.float32(1.0))])

    @settings(max_examples=40, deadline=None)
    @given(t=st.floats(0.0, 1.0, allow_nan=False), seed=st.integers(0, 10 ** 6))
    def test_interpolation_bounded_by_endpoints(self, t, seed):
        rng = np.random.default_rng(seed)
        spec = MultiLossSpec([("rec", 1.0), ("noise", 1.0)])
        losses = [Tensor(np.float32(v)) for v in rng.random(2)]
        a = np.array([1.0, 0.0])
        b = np.array([0.0, 1.0])
        mix = t * a + (1 - t) * b
        val = multi_loss(mix, spec, losses).item()
        ends = sorted([multi_loss(a, spec, losses).item(),
                       multi_loss(b, spec, losses).item()])
        assert ends[0] - 1e-6 <= val <= ends[1] + 1e-6


class TestBuildTargets:
    def test_rec_noise_pair(self):
        rng = np.random.default_rng(0)
        y = rng.random((1, 3, 8, 8))
        z = rng.random((1, 3, 8, 8))
        spec = MultiLossSpec([("rec", 1.0), ("noise", 1.0)])
        targets = build_targets(spec, y, z, np.array([0.3, 0.8]))
        np.testing.assert_array_equal(targets[0].data, y)
        np.testing.assert_allclose(targets[1].data,
                                   noise_target(y, z, 0.8).data)

    def test_blur_builds_on_noise_target(self):
        rng = np.random.default_rng(1)
        y = rng.random((1, 3, 16, 16))
        z = rng.random((1, 3, 16, 16))
        spec = MultiLossSpec([("noise", 1.0), ("blur", 1.0)])
        omega = np.array([0.6, 0.4])
        targets = build_targets(spec, y, z, omega)
        y_eta = noise_target(y, z, 0.6).data
        np.testing.assert_allclose(targets[1].data,
                                   blur_target(y_eta, 0.4).data, atol=1e-6)

    def test_blur_without_noise_uses_clean(self):
        rng = np.random.default_rng(2)
        y = rng.random((1, 3, 16, 16))
        z = rng.random((1, 3, 16, 16))
        spec = MultiLossSpec([("rec", 1.0), ("blur", 1.0)])
        targets = build_targets(spec, y, z, np.array([1.0, 0.5]))
        np.testing.assert_allclose(targets[1].data,
                                   blur_target(y, 0.5).data, atol=1e-6)


class TestPsnr:
    def test_identical_capped(self):
        x = np.random.default_rng(0).random((1, 3, 8, 8))
        assert psnr(x, x) == 100.0

    def test_closed_form_20db(self):
        # MSE 0.01 with peak 1 is exactly 20 dB
        a = np.zeros((10, 10))
        b = np.full((10, 10), 0.1)
        assert psnr(a, b) == pytest.approx(20.0, abs=1e-9)

    def test_peak_scaling(self):
        a = np.zeros((4, 4))
        b = np.full((4, 4), 25.5)
        assert psnr(a, b, peak=255.0) == pytest.approx(20.0, abs=1e-9)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            psnr(np.zeros((2, 2)), np.zeros((3, 3)))
        with pytest.raises(DomainError):
            psnr(np.zeros((2, 2)), np.zeros((2, 2)), peak=0.0)

    def test_psnr_eta_omega_zero_is_clean_psnr(self):
        rng = np.random.default_rng(3)
        pred = rng.random((1, 3, 8, 8))
        y = rng.random((1, 3, 8, 8))
        z = rng.random((1, 3, 8, 8))
        assert psnr_eta(pred, y, z, 0.0) == psnr(pred, y)

    def test_psnr_eta_pred_equals_target(self):
        rng = np.random.default_rng(4)
        y = rng.random((1, 3, 8, 8))
        z = rng.random((1, 3, 8, 8))
        pred = noise_target(y, z, 0.7).data
        assert psnr_eta(pred, y, z, 0.7) == 100.0
