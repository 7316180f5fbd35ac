"""Invert the camera pipeline: sRGB video to synthetic clean raw video.

The chain per frame is quantization dither, sRGB gamma inversion, inverse
color correction, inverse white balance, mosaicing, and finally an affine
percentile tone map that matches the output range onto a target raw range.
White-balance gains are drawn once per sequence and shared by all frames.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .bayer import AffineMap, mosaic, percentile_tonemap_fit
from .frames import CfaPattern, RawFrame, VideoSequence
from .rngstreams import derive_rng

# Camera -> sRGB color matrix of one DSLR-class sensor (unit row sums),
# shipped as the default single-camera profile. The matrix is profile data;
# pass your own CameraProfile to model a different device.
DEFAULT_CCM = np.array([
    [1.2622718802, -0.4579576755, 0.1956857954],
    [-0.1505004795, 1.1334671964, 0.0170332831],
    [-0.0106435620, -0.3623453734, 1.3729889353],
])

RED_GAIN_RANGE = (1.9, 2.4)
BLUE_GAIN_RANGE = (1.5, 1.9)
GLOBAL_GAIN_MEAN = 0.8
GLOBAL_GAIN_STD = 0.1


@dataclass(frozen=True)
class CameraProfile:
    """Camera color matrix (camera -> sRGB linear, rows summing to 1) and CFA."""

    ccm: np.ndarray
    cfa: CfaPattern = CfaPattern.RGGB

    def __post_init__(self):
        ccm = np.array(self.ccm, dtype=np.float64, copy=True)
        if ccm.shape != (3, 3):
            raise ValueError(f"ccm must be 3x3, got shape {ccm.shape}")
        if abs(np.linalg.det(ccm)) <= 1e-8:
            raise ValueError("ccm is singular")
        if np.max(np.abs(ccm.sum(axis=1) - 1.0)) > 1e-6:
            raise ValueError("ccm rows must sum to 1")
        ccm.flags.writeable = False
        object.__setattr__(self, "ccm", ccm)

    def to_json_dict(self) -> dict:
        return {"ccm": self.ccm.tolist(), "cfa": self.cfa.value}

    @classmethod
    def from_json_dict(cls, d: dict) -> "CameraProfile":
        return cls(ccm=np.array(d["ccm"], dtype=np.float64), cfa=CfaPattern(d["cfa"]))


def default_profile(cfa: CfaPattern = CfaPattern.RGGB) -> CameraProfile:
    return CameraProfile(ccm=DEFAULT_CCM, cfa=cfa)


def load_profile(path) -> CameraProfile:
    with open(path) as f:
        return CameraProfile.from_json_dict(json.load(f))


def save_profile(path, profile: CameraProfile) -> None:
    with open(path, "w") as f:
        json.dump(profile.to_json_dict(), f, indent=2)
        f.write("\n")


@dataclass(frozen=True)
class GainSample:
    """White-balance gains for one sequence.

    The effective gain for channel c is g_global / g_c. Validation only
    enforces what keeps that factor at most one (g_red, g_blue >= 1 and
    g_global in (0, 1]); :func:`sample_gains` additionally draws red/blue
    from their camera-realistic ranges.
    """

    g_red: float
    g_blue: float
    g_global: float
    g_green: float = 1.0

    def __post_init__(self):
        if self.g_red < 1.0 or self.g_blue < 1.0:
            raise ValueError(
                f"g_red and g_blue must be >= 1, got {self.g_red}, {self.g_blue}"
            )
        if not 0.0 < self.g_global <= 1.0:
            raise ValueError(f"g_global {self.g_global} must be in (0, 1]")

    def channel_factors(self) -> np.ndarray:
        return np.array([
            self.g_global / self.g_red,
            self.g_global / self.g_green,
            self.g_global / self.g_blue,
        ])


def sample_gains(rng: np.random.Generator) -> GainSample:
    """Red/blue gains uniform in their ranges; global gain from a Gaussian
    N(0.8, 0.1) truncated by clipping values above one to exactly one."""
    g_red = rng.uniform(*RED_GAIN_RANGE)
    g_blue = rng.uniform(*BLUE_GAIN_RANGE)
    g_global = min(rng.normal(GLOBAL_GAIN_MEAN, GLOBAL_GAIN_STD), 1.0)
    while g_global <= 0.0:  # ~1e-15 tail, but keep the invariant airtight
        g_global = min(rng.normal(GLOBAL_GAIN_MEAN, GLOBAL_GAIN_STD), 1.0)
    return GainSample(g_red=float(g_red), g_blue=float(g_blue), g_global=float(g_global))


def dequantize(srgb8: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """(code + U[-1/2, 1/2)) / 255, undoing the bias of 8-bit quantization."""
    srgb8 = np.asarray(srgb8)
    if srgb8.min() < 0 or srgb8.max() > 255:
        raise ValueError("expected 8-bit codes in 0..255")
    dither = rng.random(srgb8.shape) - 0.5
    return (srgb8.astype(np.float64) + dither) / 255.0


def srgb_to_linear(img: np.ndarray) -> np.ndarray:
    """Standard sRGB electro-optical transfer; inputs clamped to [0, 1]."""
    x = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0)
    return np.where(x <= 0.04045, x / 12.92, ((x + 0.055) / 1.055) ** 2.4)


def linear_to_srgb(img: np.ndarray) -> np.ndarray:
    x = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0)
    return np.where(x <= 0.04045 / 12.92, x * 12.92, 1.055 * x ** (1.0 / 2.4) - 0.055)


def apply_ccm(rgb: np.ndarray, ccm: np.ndarray) -> np.ndarray:
    """Multiply each pixel 3-vector by ccm (camera -> sRGB direction)."""
    return np.einsum("ij,hwj->hwi", np.asarray(ccm, dtype=np.float64),
                     np.asarray(rgb, dtype=np.float64))


def apply_inverse_ccm(rgb: np.ndarray, profile: CameraProfile) -> np.ndarray:
    """Multiply each pixel 3-vector by ccm^-1, mapping sRGB-linear to camera RGB."""
    inv = np.linalg.inv(profile.ccm)
    return apply_ccm(rgb, inv)


def apply_inverse_whitebalance(rgb: np.ndarray, gains: GainSample) -> np.ndarray:
    """Scale channel c by g_global / g_c; never brightens for inputs in [0, 1]."""
    rgb = np.asarray(rgb, dtype=np.float64)
    return rgb * gains.channel_factors().reshape(1, 1, 3)


def unprocess_frame(srgb8: np.ndarray, profile: CameraProfile, gains: GainSample,
                    rng: np.random.Generator, dither: bool = True) -> np.ndarray:
    """One frame through dither, gamma inversion, inverse CCM/WB, and mosaic."""
    if dither:
        img = dequantize(srgb8, rng)
    else:
        img = np.asarray(srgb8, dtype=np.float64) / 255.0
    img = srgb_to_linear(img)
    img = apply_inverse_ccm(img, profile)
    img = apply_inverse_whitebalance(img, gains)
    return mosaic(img, profile.cfa)


def unprocess_sequence(srgb_frames: list, profile: CameraProfile, seed: int,
                       sequence_id: str = ".", *,
                       target_stats: tuple[float, float] | None = None,
                       source_stats: tuple[float, float] | None = None,
                       gains: GainSample | None = None,
                       dither: bool = True,
                       frame_rate: float = 30.0,
                       black_level: int = 4096,
                       white_level: int = 61440) -> VideoSequence:
    """Unprocess one sRGB sequence (list of (H, W, 3) 8-bit arrays) to clean raw.

    One GainSample is drawn per sequence and shared by all its frames. When
    ``target_stats`` (the target raw 1%/99% percentiles) is given, an affine
    tone map is applied; its source percentiles come from ``source_stats`` if
    supplied (use pooled dataset percentiles there) and otherwise from this
    sequence's own mosaicked values.
    """
    if not srgb_frames:
        raise ValueError("empty sRGB sequence")
    if gains is None:
        gains = sample_gains(derive_rng(seed, sequence_id, "gains"))
    mosaics = []
    for idx, srgb8 in enumerate(srgb_frames):
        rng = derive_rng(seed, sequence_id, "dither", idx)
        mosaics.append(unprocess_frame(srgb8, profile, gains, rng, dither=dither))
    if target_stats is not None:
        t_lo, t_hi = target_stats
        if source_stats is None:
            pooled = np.concatenate([m.ravel() for m in mosaics])
            s_lo, s_hi = np.percentile(pooled, [1.0, 99.0])
        else:
            s_lo, s_hi = source_stats
        if s_hi <= s_lo:
            raise ValueError("degenerate source percentiles for tone mapping")
        scale = (t_hi - t_lo) / (s_hi - s_lo)
        tmap = AffineMap(scale=float(scale), offset=float(t_lo - scale * s_lo))
        mosaics = [tmap.apply(m) for m in mosaics]
    frames = [RawFrame(m, profile.cfa, black_level, white_level) for m in mosaics]
    return VideoSequence(frames, frame_rate, sequence_id)


def dataset_percentiles(values, p_low: float = 1.0, p_high: float = 99.0):
    """Pooled linear-interpolated percentiles over an iterable of arrays."""
    pooled = np.concatenate([np.ravel(np.asarray(v, dtype=np.float64)) for v in values])
    lo, hi = np.percentile(pooled, [p_low, p_high])
    return float(lo), float(hi)


# re-exported for callers composing their own pipelines
__all__ = [
    "CameraProfile", "GainSample", "DEFAULT_CCM", "default_profile",
    "load_profile", "save_profile", "sample_gains", "dequantize",
    "srgb_to_linear", "linear_to_srgb", "apply_ccm", "apply_inverse_ccm",
    "apply_inverse_whitebalance", "unprocess_frame", "unprocess_sequence",
    "dataset_percentiles", "percentile_tonemap_fit",
]
