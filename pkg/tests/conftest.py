import numpy as np
import pytest
from scipy import ndimage

from rawvd.frames import CfaPattern, RawFrame, VideoSequence


def smooth_texture(rng, shape, sigma=1.5, lo=0.0, hi=1.0):
    """Band-limited random texture scaled into [lo, hi]."""
    tex = ndimage.gaussian_filter(rng.standard_normal(shape), sigma)
    tex = (tex - tex.min()) / (tex.max() - tex.min())
    return lo + tex * (hi - lo)


def uniform_texture(rng, shape, sigma=3.0, lo=0.02, hi=0.98):
    """Smooth texture rank-mapped to a uniform intensity histogram."""
    tex = ndimage.gaussian_filter(rng.standard_normal(shape), sigma)
    ranks = tex.ravel().argsort().argsort().reshape(shape)
    return lo + ranks / (ranks.size - 1) * (hi - lo)


def raw_sequence(frames, cfa=CfaPattern.RGGB, frame_rate=30.0, seq_id="seq"):
    return VideoSequence([RawFrame(f, cfa) for f in frames], frame_rate, seq_id)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
