"""A reference blind-spot network and a receptive-field prober.

The network is a verification instrument with fixed random weights, not a
trainable model. Construction: the input stack is rotated by the four
multiples of 90 degrees; each rotated copy is shifted one pixel down and run
through ``depth`` layers of 3x3 convolutions whose kernels are zero on their
bottom row (the shift plus the vertically causal kernels confine the
receptive field strictly above the output row); the four branch outputs are
un-rotated and merged by a 1x1 combination. The result depends on pixels on
all four sides of each location but never on the location itself.

``remove_blindspot`` applies the extra one-pixel vertical shift after the
rotation that cancels the causal offset, restoring the center pixel into the
receptive field.

All weights are positive and each layer is normalized to unit gain, so an
influence that exists structurally can never vanish by cancellation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .losses import DenoiserFn, FrameStack

PROBE_MIN_EPS = 1e-6
PROBE_DEFAULT_THRESHOLD = 1e-9


@dataclass
class RfProbeReport:
    """Which input pixels of the center frame influence the probed output pixel."""

    pixel: tuple[int, int]
    influential: list
    has_blind_spot: bool
    center_delta: float
    epsilon: float
    threshold: float


def _shift_rows(x: np.ndarray, delta: int) -> np.ndarray:
    """Shift a (C, H, W) stack vertically by delta rows, zero-filling."""
    out = np.zeros_like(x)
    if delta > 0:
        out[:, delta:, :] = x[:, :-delta, :]
    elif delta < 0:
        out[:, :delta, :] = x[:, -delta:, :]
    else:
        out[:] = x
    return out


def _conv_layer(x: np.ndarray, kernels: np.ndarray) -> np.ndarray:
    """Apply (C_out, C_in, 3, 3) kernels to a (C_in, H, W) stack."""
    c_out = kernels.shape[0]
    out = np.zeros((c_out,) + x.shape[1:], dtype=np.float64)
    for o in range(c_out):
        for i in range(x.shape[0]):
            out[o] += ndimage.correlate(x[i], kernels[o, i], mode="constant")
    return out


def reference_blindspot_net(depth: int, channels: int, rng: np.random.Generator,
                            remove_blindspot: bool = False,
                            stack_size: int = 5) -> DenoiserFn:
    """Forward-only blind-spot map over 5-frame stacks (see module docstring)."""
    if depth < 1:
        raise ValueError(f"depth must be >= 1, got {depth}")
    if channels < 1:
        raise ValueError(f"channels must be >= 1, got {channels}")
    layer_kernels = []
    c_in = stack_size
    for _ in range(depth):
        k = rng.uniform(0.2, 1.0, size=(channels, c_in, 3, 3))
        k[:, :, 2, :] = 0.0  # vertically causal: bottom kernel row is zero
        k /= k.sum(axis=(1, 2, 3), keepdims=True)
        layer_kernels.append(k)
        c_in = channels
    merge = rng.uniform(0.2, 1.0, size=(4, channels))
    merge /= merge.sum()

    def forward(stack: FrameStack) -> np.ndarray:
        x = np.stack([np.asarray(f, dtype=np.float64) for f in stack.frames])
        out = None
        for rot in range(4):
            xr = np.rot90(x, rot, axes=(1, 2))
            xr = _shift_rows(xr, 1)
            if remove_blindspot:
                xr = _shift_rows(xr, -1)
            h = xr
            for kernels in layer_kernels:
                h = _conv_layer(h, kernels)
            h = np.rot90(h, -rot, axes=(1, 2))
            contrib = np.einsum("c,chw->hw", merge[rot], h)
            out = contrib if out is None else out + contrib
        return out

    return forward


def probe_receptive_field(fn: DenoiserFn, pixel: tuple[int, int],
                          window_radius: int, epsilon: float = 1e-3, *,
                          frame_shape: tuple[int, int] = (64, 64),
                          stack_size: int = 5,
                          threshold: float = PROBE_DEFAULT_THRESHOLD,
                          base_stack: FrameStack | None = None) -> RfProbeReport:
    """Mark which center-frame pixels in a window influence the output pixel.

    Each candidate input pixel is perturbed by ``epsilon`` on a fixed base
    stack; it is influential when the output at ``pixel`` moves by more than
    ``threshold`` (calibrated well above the double-precision noise floor).
    Deterministic: no randomness is drawn here.
    """
    if epsilon < PROBE_MIN_EPS:
        raise ValueError(f"epsilon {epsilon} below the numerical floor {PROBE_MIN_EPS}")
    x, y = pixel
    if base_stack is None:
        frames = tuple(np.full(frame_shape, 0.5) for _ in range(stack_size))
        offsets = tuple(range(-(stack_size // 2), stack_size // 2 + 1))
        base_stack = FrameStack(frames=frames, center_index=0,
                                offsets=offsets, indices=offsets)
    h, w = base_stack.shape
    if not (0 <= x - window_radius and x + window_radius < w
            and 0 <= y - window_radius and y + window_radius < h):
        raise ValueError(
            f"probe window of radius {window_radius} at {pixel} leaves the {w}x{h} frame"
        )
    center_pos = base_stack.offsets.index(0)
    reference_out = float(np.asarray(fn(base_stack))[y, x])

    influential = []
    center_delta = 0.0
    for dy in range(-window_radius, window_radius + 1):
        for dx in range(-window_radius, window_radius + 1):
            qx, qy = x + dx, y + dy
            frames = list(base_stack.frames)
            bumped = np.array(frames[center_pos], copy=True)
            bumped[qy, qx] += epsilon
            frames[center_pos] = bumped
            probe_stack = FrameStack(frames=tuple(frames),
                                     center_index=base_stack.center_index,
                                     offsets=base_stack.offsets,
                                     indices=base_stack.indices,
                                     cfa=base_stack.cfa)
            delta = abs(float(np.asarray(fn(probe_stack))[y, x]) - reference_out)
            if (dx, dy) == (0, 0):
                center_delta = delta
            if delta > threshold:
                influential.append((qx, qy))
    return RfProbeReport(
        pixel=(x, y),
        influential=influential,
        has_blind_spot=(x, y) not in influential,
        center_delta=center_delta,
        epsilon=epsilon,
        threshold=threshold,
    )
