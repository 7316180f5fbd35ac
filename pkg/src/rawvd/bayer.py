"""Level normalization, mosaicing, plane packing and percentile tone mapping."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .frames import CfaPattern


def normalize(codes: np.ndarray, black_level: int, white_level: int) -> np.ndarray:
    """Map sensor codes to [0, 1]: clamp((codes - black) / (white - black), 0, 1)."""
    if white_level <= black_level:
        raise ValueError(
            f"white_level ({white_level}) must exceed black_level ({black_level})"
        )
    codes = np.asarray(codes, dtype=np.float64)
    return np.clip((codes - black_level) / (white_level - black_level), 0.0, 1.0)


def denormalize(values: np.ndarray, black_level: int, white_level: int) -> np.ndarray:
    """Inverse of :func:`normalize` for in-range values (returns real codes)."""
    if white_level <= black_level:
        raise ValueError(
            f"white_level ({white_level}) must exceed black_level ({black_level})"
        )
    return np.asarray(values, dtype=np.float64) * (white_level - black_level) + black_level


def cfa_channel_map(cfa: CfaPattern, height: int, width: int) -> np.ndarray:
    """Per-pixel channel index (0=R, 1=G, 2=B) for a frame of the given size."""
    tile = cfa.tile()
    reps = (height + 1) // 2, (width + 1) // 2
    return np.tile(tile, reps)[:height, :width]


def mosaic(rgb: np.ndarray, cfa: CfaPattern) -> np.ndarray:
    """Subsample an (H, W, 3) image to a Bayer mosaic; pure selection, no filtering."""
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) image, got shape {rgb.shape}")
    h, w = rgb.shape[:2]
    if h % 2 or w % 2:
        raise ValueError(f"mosaic requires even dimensions, got {w}x{h}")
    chan = cfa_channel_map(cfa, h, w)
    return np.take_along_axis(rgb, chan[:, :, None], axis=2)[:, :, 0]


def pack_planes(raw: np.ndarray) -> np.ndarray:
    """Split a mosaic into 4 half-resolution planes ordered by tile offset.

    Plane k holds the samples at tile offset (0,0), (0,1), (1,0), (1,1) in
    this order, independent of the CFA colors.
    """
    raw = np.asarray(raw)
    if raw.ndim != 2:
        raise ValueError(f"expected 2-D mosaic, got shape {raw.shape}")
    h, w = raw.shape
    if h % 2 or w % 2:
        raise ValueError(f"pack_planes requires even dimensions, got {w}x{h}")
    return np.stack([
        raw[0::2, 0::2], raw[0::2, 1::2], raw[1::2, 0::2], raw[1::2, 1::2]
    ])


def unpack_planes(planes: np.ndarray) -> np.ndarray:
    """Exact inverse of :func:`pack_planes`."""
    planes = np.asarray(planes)
    if planes.ndim != 3 or planes.shape[0] != 4:
        raise ValueError(f"expected (4, H/2, W/2) planes, got shape {planes.shape}")
    hh, hw = planes.shape[1:]
    raw = np.empty((2 * hh, 2 * hw), dtype=planes.dtype)
    raw[0::2, 0::2] = planes[0]
    raw[0::2, 1::2] = planes[1]
    raw[1::2, 0::2] = planes[2]
    raw[1::2, 1::2] = planes[3]
    return raw


class AffineMap(NamedTuple):
    """Value map x -> scale * x + offset."""

    scale: float
    offset: float

    def apply(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values, dtype=np.float64) * self.scale + self.offset


def percentile_tonemap_fit(source, target, p_low: float = 1.0,
                           p_high: float = 99.0) -> AffineMap:
    """Affine map sending the source's low/high percentiles onto the target's.

    Percentiles are linear-interpolated order statistics over all supplied
    values (pass pooled samples to match a whole dataset).
    """
    source = np.ravel(np.asarray(source, dtype=np.float64))
    target = np.ravel(np.asarray(target, dtype=np.float64))
    s_lo, s_hi = np.percentile(source, [p_low, p_high])
    t_lo, t_hi = np.percentile(target, [p_low, p_high])
    if s_hi <= s_lo:
        raise ValueError(
            f"degenerate source sample: percentiles {p_low}% and {p_high}% coincide"
        )
    scale = (t_hi - t_lo) / (s_hi - s_lo)
    return AffineMap(scale=float(scale), offset=float(t_lo - scale * s_lo))


def percentile_tonemap_apply(values: np.ndarray, tonemap: AffineMap) -> np.ndarray:
    return tonemap.apply(values)
