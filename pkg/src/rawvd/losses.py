"""Self-supervised loss evaluators over black-box denoisers.

A denoiser is any callable mapping a 5-frame stack to a predicted center
frame of the same size. The multi-frame-to-frame loss warps the prediction
onto the withheld previous frame and scores the occlusion-masked mean
absolute deviation; the blind-spot loss is the mean squared deviation
against the noisy center frame itself.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import ndimage

from .flow import FlowField, OcclusionMask, TvL1Params, flow_input_raw, occlusion_mask, tvl1_flow
from .frames import CfaPattern, RawFrame, VideoSequence
from .warp import warp_raw

MF2F_OFFSETS = (-4, -2, 0, 2, 4)
BLINDSPOT_OFFSETS = (-2, -1, 0, 1, 2)


@dataclass(frozen=True)
class FrameStack:
    """Five frames around a center index, with the offsets that built them."""

    frames: tuple
    center_index: int
    offsets: tuple
    indices: tuple
    cfa: CfaPattern | None = None

    def __post_init__(self):
        if len(self.frames) != len(self.offsets) or len(self.frames) != len(self.indices):
            raise ValueError("frames, offsets and indices must have equal length")
        shape = self.frames[0].shape
        if any(f.shape != shape for f in self.frames):
            raise ValueError("stack frames must share dimensions")

    @property
    def center(self) -> np.ndarray:
        return self.frames[self.offsets.index(0)]

    @property
    def shape(self):
        return self.frames[0].shape


DenoiserFn = Callable[[FrameStack], np.ndarray]


def mirror_index(i: int, n: int) -> int:
    """Reflect an out-of-range index into [0, n) without repeating the edge."""
    if n <= 0:
        raise ValueError("empty sequence")
    if n == 1:
        return 0
    period = 2 * n - 2
    i = abs(i) % period
    return period - i if i >= n else i


def _frame_data(frame) -> np.ndarray:
    return frame.data if isinstance(frame, RawFrame) else np.asarray(frame, dtype=np.float64)


def build_frame_stack(sequence, t: int, offsets) -> FrameStack:
    """Stack frames at t+offset, mirroring out-of-range indices at the ends."""
    frames = sequence.frames if isinstance(sequence, VideoSequence) else list(sequence)
    n = len(frames)
    if n == 0:
        raise ValueError("empty sequence")
    offsets = tuple(int(o) for o in offsets)
    indices = tuple(mirror_index(t + o, n) for o in offsets)
    data = tuple(_frame_data(frames[i]) for i in indices)
    cfa = frames[0].cfa if isinstance(frames[0], RawFrame) else None
    return FrameStack(frames=data, center_index=t, offsets=offsets, indices=indices, cfa=cfa)


def build_mf2f_stack(sequence, t: int, offsets=MF2F_OFFSETS) -> tuple[FrameStack, int]:
    """Input stack plus the index of the withheld target frame f_{t-1}.

    Offsets must be symmetric around 0 and must keep the target out of the
    stack (even offsets always do, since the target sits at odd distance).
    """
    frames = sequence.frames if isinstance(sequence, VideoSequence) else list(sequence)
    n = len(frames)
    if n < 2:
        raise ValueError(f"need at least 2 frames, got {n}")
    offsets = tuple(int(o) for o in offsets)
    if 0 not in offsets:
        raise ValueError("offsets must include 0 (the center frame)")
    if sorted(offsets) != sorted(-o for o in offsets):
        raise ValueError(f"offsets must be symmetric around 0, got {offsets}")
    stack = build_frame_stack(sequence, t, offsets)
    target_index = mirror_index(t - 1, n)
    if target_index in stack.indices:
        raise ValueError(
            f"target frame {target_index} would be a member of the input stack"
        )
    return stack, target_index


@dataclass
class Mf2fResult:
    """Loss value plus alignment diagnostics."""

    loss: float
    mask_coverage: float
    residual: np.ndarray
    mask: OcclusionMask
    flow: FlowField


class FlowCache:
    """Per (sequence id, t) cache of the flow/mask pair used by the loss."""

    def __init__(self):
        self._entries: dict = {}

    def get_or_compute(self, sequence: VideoSequence, t: int, target_index: int,
                       flow_params: TvL1Params | None,
                       mask_kwargs: dict) -> tuple[FlowField, OcclusionMask]:
        key = (sequence.id, t)
        if key not in self._entries:
            lum_t = flow_input_raw(sequence.frames[t])
            lum_prev = flow_input_raw(sequence.frames[target_index])
            fwd = tvl1_flow(lum_prev, lum_t, flow_params)
            bwd = tvl1_flow(lum_t, lum_prev, flow_params)
            self._entries[key] = (fwd, occlusion_mask(fwd, bwd, **mask_kwargs))
        return self._entries[key]


def mf2f_loss(denoiser: DenoiserFn, sequence: VideoSequence, t: int, *,
              flow_params: TvL1Params | None = None,
              offsets=MF2F_OFFSETS,
              mask_alpha: float = 0.01, mask_beta: float = 0.5,
              mask_div_thresh: float = 0.5,
              flow_cache: FlowCache | None = None) -> Mf2fResult:
    """Occlusion-masked L1 between the warped prediction and the previous frame.

    The flow from the center frame to its predecessor and the trust mask are
    estimated on the noisy frames; the prediction is warped in the RGB
    domain (demosaic, warp, re-mosaic) before comparison. The loss is the
    mean absolute deviation over trusted pixels; a fully occluded mask is an
    error rather than a zero loss.
    """
    if not 0 <= t < len(sequence):
        raise IndexError(f"frame index {t} outside sequence of length {len(sequence)}")
    stack, target_index = build_mf2f_stack(sequence, t, offsets)
    target = sequence.frames[target_index]
    cache = flow_cache or FlowCache()
    flow, mask = cache.get_or_compute(
        sequence, t, target_index, flow_params,
        {"alpha": mask_alpha, "beta": mask_beta, "div_thresh": mask_div_thresh},
    )
    prediction = np.asarray(denoiser(stack), dtype=np.float64)
    if prediction.shape != stack.shape:
        raise ValueError(
            f"denoiser returned shape {prediction.shape}, expected {stack.shape}"
        )
    warped = warp_raw(target.with_data(prediction), flow)
    residual = warped.data - target.data
    kappa = mask.values.astype(np.float64)
    population = kappa.sum()
    if population == 0:
        raise ValueError("occlusion mask is empty: every pixel is untrusted")
    loss = float(np.sum(kappa * np.abs(residual)) / population)
    return Mf2fResult(loss=loss, mask_coverage=mask.coverage(),
                      residual=residual, mask=mask, flow=flow)


def blindspot_loss(denoiser: DenoiserFn, sequence: VideoSequence, t: int) -> float:
    """Mean squared deviation between the prediction and the noisy center frame."""
    if not 0 <= t < len(sequence):
        raise IndexError(f"frame index {t} outside sequence of length {len(sequence)}")
    stack = build_frame_stack(sequence, t, BLINDSPOT_OFFSETS)
    prediction = np.asarray(denoiser(stack), dtype=np.float64)
    if prediction.shape != stack.shape:
        raise ValueError(
            f"denoiser returned shape {prediction.shape}, expected {stack.shape}"
        )
    return float(np.mean((prediction - _frame_data(sequence.frames[t])) ** 2))


def identity_denoiser() -> DenoiserFn:
    """Returns the noisy center frame unchanged."""
    return lambda stack: np.array(stack.center, copy=True)


def temporal_mean_denoiser() -> DenoiserFn:
    """Plain average of the stack frames."""
    return lambda stack: np.mean(np.stack(stack.frames), axis=0)


def gaussian_blur_denoiser(sigma: float = 1.0) -> DenoiserFn:
    """Gaussian blur of the center frame."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return lambda stack: ndimage.gaussian_filter(np.asarray(stack.center, np.float64), sigma)
