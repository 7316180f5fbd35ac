import numpy as np
import pytest

from rawvd.frames import CfaPattern, RawFrame
from rawvd.warp import interp_bicubic, warp_image, warp_raw, warp_rgb


class TestWarpImage:
    def test_zero_flow_bit_exact(self, rng):
        img = rng.random((10, 14))
        warped, valid = warp_image(img, np.zeros((10, 14, 2)))
        assert np.array_equal(warped, img)
        assert np.all(valid == 1)

    def test_integer_shift_exact_interior(self, rng):
        img = rng.random((12, 12))
        flow = np.zeros((12, 12, 2))
        flow[:, :, 0] = 1.0
        warped, valid = warp_image(img, flow)
        assert np.array_equal(warped[:, :-1], img[:, 1:])
        assert np.all(valid[:, :-1] == 1) and np.all(valid[:, -1] == 0)

    def test_half_step_on_ramp_exact(self):
        # bicubic reproduces polynomials up to degree 2, hence affine images
        ramp = np.tile(np.arange(12.0), (12, 1))
        flow = np.zeros((12, 12, 2))
        flow[:, :, 0] = 0.5
        warped, _ = warp_image(ramp, flow)
        inner = (slice(None), slice(2, -2))
        assert np.allclose(warped[inner], ramp[inner] + 0.5, atol=1e-12)

    def test_linearity_in_intensities(self, rng):
        a = rng.random((10, 10))
        b = rng.random((10, 10))
        flow = rng.standard_normal((10, 10, 2)) * 0.8
        wa, _ = warp_image(a, flow)
        wb, _ = warp_image(b, flow)
        wab, _ = warp_image(0.3 * a + 0.7 * b, flow)
        assert np.max(np.abs(wab - (0.3 * wa + 0.7 * wb))) < 1e-9

    def test_rejects_nonfinite_flow(self, rng):
        flow = np.zeros((4, 4, 2))
        flow[0, 0, 0] = np.nan
        with pytest.raises(ValueError):
            warp_image(rng.random((4, 4)), flow)

    def test_rejects_shape_mismatch(self, rng):
        with pytest.raises(ValueError):
            warp_image(rng.random((4, 4)), np.zeros((5, 5, 2)))

    def test_bilinear_option(self, rng):
        img = rng.random((8, 8))
        flow = np.zeros((8, 8, 2))
        flow[:, :, 1] = 0.5
        warped, _ = warp_image(img, flow, method="bilinear")
        expected = 0.5 * (img[:-1] + img[1:])
        assert np.allclose(warped[:-1], expected, atol=1e-12)


class TestInterpBicubic:
    def test_exact_at_integer_positions(self, rng):
        img = rng.random((9, 9))
        xq, yq = np.meshgrid(np.arange(9.0), np.arange(9.0))
        assert np.array_equal(interp_bicubic(img, xq, yq), img)

    def test_quadratic_reproduction(self):
        yy, xx = np.mgrid[0:16, 0:16].astype(float)
        img = 0.01 * xx ** 2 + 0.02 * xx + 0.5
        xs = xx[:, 4:-4] + 0.3
        out = interp_bicubic(img, xs, yy[:, 4:-4])
        expected = 0.01 * xs ** 2 + 0.02 * xs + 0.5
        assert np.max(np.abs(out - expected)) < 1e-12


class TestWarpWrappers:
    def test_warp_rgb_shape_and_validity(self, rng):
        rgb = rng.random((8, 8, 3))
        flow = np.zeros((8, 8, 2))
        warped, valid = warp_rgb(rgb, flow)
        assert warped.shape == (8, 8, 3)
        assert np.array_equal(warped, rgb)

    def test_warp_raw_returns_frame(self, rng):
        frame = RawFrame(rng.random((12, 12)), CfaPattern.RGGB)
        out = warp_raw(frame, np.zeros((12, 12, 2)))
        assert isinstance(out, RawFrame)
        assert np.array_equal(out.data, frame.data)
