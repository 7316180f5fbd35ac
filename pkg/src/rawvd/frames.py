"""Core frame containers: CFA patterns, raw/RGB frames and video sequences."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

_CHANNEL_INDEX = {"R": 0, "G": 1, "B": 2}


class CfaPattern(Enum):
    """2x2 Bayer tile anchored at pixel (0, 0), listed row-major."""

    RGGB = "RGGB"
    BGGR = "BGGR"
    GRBG = "GRBG"
    GBRG = "GBRG"

    def tile(self) -> np.ndarray:
        """Channel index (0=R, 1=G, 2=B) for each tile position [row, col]."""
        letters = self.value
        return np.array(
            [[_CHANNEL_INDEX[letters[0]], _CHANNEL_INDEX[letters[1]]],
             [_CHANNEL_INDEX[letters[2]], _CHANNEL_INDEX[letters[3]]]],
            dtype=np.int64,
        )

    def channel_at(self, y: int, x: int) -> int:
        return int(self.tile()[y % 2, x % 2])


def _as_readonly(a: np.ndarray, dtype=np.float64) -> np.ndarray:
    out = np.array(a, dtype=dtype, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class RawFrame:
    """Single-channel Bayer mosaic with level metadata.

    ``data`` holds real values, nominally in [0, 1] (values outside the
    nominal range are allowed, e.g. unclipped synthetic noise).
    ``black_level``/``white_level`` are the original sensor code values used
    by 16-bit file round trips.
    """

    data: np.ndarray
    cfa: CfaPattern
    black_level: int = 0
    white_level: int = 65535

    def __post_init__(self):
        data = _as_readonly(self.data)
        if data.ndim != 2:
            raise ValueError(f"raw data must be 2-D, got shape {data.shape}")
        h, w = data.shape
        if h <= 0 or w <= 0 or h % 2 or w % 2:
            raise ValueError(f"raw dimensions must be positive and even, got {w}x{h}")
        if self.white_level <= self.black_level:
            raise ValueError(
                f"white_level ({self.white_level}) must exceed black_level ({self.black_level})"
            )
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def with_data(self, data: np.ndarray) -> "RawFrame":
        """New frame sharing this frame's CFA and levels."""
        return RawFrame(data, self.cfa, self.black_level, self.white_level)


@dataclass(frozen=True)
class RgbFrame:
    """Three-channel linear-light image, stored as (H, W, 3)."""

    data: np.ndarray

    def __post_init__(self):
        data = _as_readonly(self.data)
        if data.ndim != 3 or data.shape[2] != 3:
            raise ValueError(f"rgb data must be (H, W, 3), got shape {data.shape}")
        if data.shape[0] <= 0 or data.shape[1] <= 0:
            raise ValueError("rgb dimensions must be positive")
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def r(self) -> np.ndarray:
        return self.data[:, :, 0]

    @property
    def g(self) -> np.ndarray:
        return self.data[:, :, 1]

    @property
    def b(self) -> np.ndarray:
        return self.data[:, :, 2]


@dataclass
class VideoSequence:
    """Ordered homogeneous list of frames with a frame rate and an id."""

    frames: list = field(default_factory=list)
    frame_rate: float = 30.0
    id: str = ""

    def __post_init__(self):
        if not self.frames:
            return
        first = self.frames[0]
        if not all(type(f) is type(first) for f in self.frames):
            raise ValueError("sequence frames must all be the same type")
        shape = first.data.shape
        if not all(f.data.shape == shape for f in self.frames):
            raise ValueError("sequence frames must all share dimensions")
        if isinstance(first, RawFrame):
            for f in self.frames:
                if (f.cfa, f.black_level, f.white_level) != (
                    first.cfa, first.black_level, first.white_level
                ):
                    raise ValueError("sequence frames must share CFA and levels")

    def __len__(self) -> int:
        return len(self.frames)

    def __getitem__(self, i):
        return self.frames[i]
