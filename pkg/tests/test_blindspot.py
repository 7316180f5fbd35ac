import numpy as np
import pytest
from scipy import ndimage

from rawvd.blindspot import probe_receptive_field, reference_blindspot_net
from rawvd.losses import FrameStack
from rawvd.rngstreams import derive_rng


def _rotate_offsets(offsets, k):
    # np.rot90 by k on (y, x) grids maps offset (dx, dy) -> rotated frame
    out = set(offsets)
    for _ in range(k):
        out = {(-dy, dx) for dx, dy in out}
    return out


def _expected_stencil(depth):
    """Stencil-composition oracle for the reference net's receptive field."""
    base = {(0, -1)}  # one-pixel downward input shift
    layer = {(dx, dy) for dx in (-1, 0, 1) for dy in (-1, 0)}
    for _ in range(depth):
        base = {(bx + lx, by + ly) for (bx, by) in base for (lx, ly) in layer}
    full = set()
    for k in range(4):
        # branch k rotates the input by k*90deg, applies the causal stack,
        # and un-rotates; its receptive field is the stencil rotated back
        full |= _rotate_offsets(base, k)
    return full


class TestProbe:
    def test_identity_function_probes_only_center(self):
        report = probe_receptive_field(lambda st: np.array(st.center), (10, 12), 2,
                                       frame_shape=(24, 24))
        assert report.influential == [(10, 12)]
        assert not report.has_blind_spot

    def test_box_filter_probes_3x3(self):
        k = np.ones((3, 3)) / 9.0

        def box(stack):
            return ndimage.correlate(np.asarray(stack.center), k, mode="constant")

        report = probe_receptive_field(box, (8, 8), 2, frame_shape=(16, 16))
        expected = sorted((8 + dx, 8 + dy) for dx in (-1, 0, 1) for dy in (-1, 0, 1))
        assert sorted(report.influential) == expected

    def test_rejects_tiny_epsilon(self):
        with pytest.raises(ValueError):
            probe_receptive_field(lambda st: np.array(st.center), (8, 8), 1,
                                  epsilon=1e-9, frame_shape=(16, 16))

    def test_rejects_window_outside_frame(self):
        with pytest.raises(ValueError):
            probe_receptive_field(lambda st: np.array(st.center), (1, 1), 4,
                                  frame_shape=(16, 16))


class TestReferenceBlindspotNet:
    @pytest.mark.parametrize("depth", [1, 2, 3])
    def test_center_never_influential(self, depth):
        net = reference_blindspot_net(depth, 4, derive_rng(0, "w", depth))
        report = probe_receptive_field(net, (16, 16), 0, frame_shape=(32, 32))
        assert report.has_blind_spot
        assert report.center_delta == 0.0

    @pytest.mark.parametrize("depth", [1, 2, 3])
    def test_shift_restores_center(self, depth):
        net = reference_blindspot_net(depth, 4, derive_rng(0, "w", depth),
                                      remove_blindspot=True)
        report = probe_receptive_field(net, (16, 16), 0, frame_shape=(32, 32))
        assert not report.has_blind_spot
        assert report.center_delta > 1e-9

    def test_depth1_stencil_matches_composition_oracle(self):
        net = reference_blindspot_net(1, 4, derive_rng(1, "w"))
        report = probe_receptive_field(net, (16, 16), 3, frame_shape=(32, 32))
        got = sorted((x - 16, y - 16) for x, y in report.influential)
        assert got == sorted(_expected_stencil(1))
        assert (0, 0) not in got

    def test_output_shape_and_determinism(self):
        net = reference_blindspot_net(2, 4, derive_rng(2, "w"))
        frames = tuple(np.linspace(0, 1, 16 * 16).reshape(16, 16) + 0.01 * i
                       for i in range(5))
        stack = FrameStack(frames=frames, center_index=0,
                           offsets=(-2, -1, 0, 1, 2), indices=(0, 1, 2, 3, 4))
        out1 = net(stack)
        out2 = net(stack)
        assert out1.shape == (16, 16)
        assert np.array_equal(out1, out2)

    def test_rejects_bad_depth(self):
        with pytest.raises(ValueError):
            reference_blindspot_net(0, 4, derive_rng(3))
