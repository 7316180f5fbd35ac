"""Noise-level-function calibration from flat fields or from noisy frames.

Two routes to the affine variance model sigma^2(u) = a*u + b:

* simulate flat-field acquisitions through a black-box noiser and measure
  patch variances per intensity level, or
* estimate intensity/variance samples from single noisy frames with a
  block-DCT procedure, pooling the per-frame point clouds over a dataset.

The single-frame procedure, per CFA plane: slide 8x8 blocks over the plane;
per block record the mean intensity, a texture statistic (mean square of the
DCT coefficients with 0 < i+j < 12) and a noise statistic (mean square of the
6 coefficients with i+j >= 12, which is an unbiased variance estimator for
white noise and blind to linear gradients). Blocks are split into 16
equal-count intensity bins; in each bin the flattest max(0.5% of the bin,
5) blocks by texture are selected, skipping blocks that overlap an already
selected one, and the bin contributes one point (median selected intensity,
mean selected noise statistic).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np
from scipy import signal

from .bayer import pack_planes
from .frames import RawFrame, VideoSequence

BLOCK = 8
HF_INDEX_SUM = 12
DEFAULT_BINS = 16
DEFAULT_PERCENTILE = 0.5
DEFAULT_MIN_BLOCKS = 5
MIN_FRAME_SIDE = 64
MIN_PATCH_SIDE = 128

# Picking the flattest overlapping blocks conditions the selection on the
# texture of each block's neighbors, which is positively coupled to the
# block's own high-frequency energy; on noise-dominated frames this inflates
# the selected-mean estimate by a content-independent factor. Calibrated on
# pure Gaussian noise (40 planes, se 0.2%).
SELECTION_BIAS = 1.0383


@dataclass
class NlfPointCloud:
    """Samples (intensity, variance) of a noise level function, optionally weighted."""

    intensity: np.ndarray
    variance: np.ndarray
    weight: np.ndarray | None = None

    def __post_init__(self):
        self.intensity = np.asarray(self.intensity, dtype=np.float64).ravel()
        self.variance = np.asarray(self.variance, dtype=np.float64).ravel()
        if self.intensity.shape != self.variance.shape:
            raise ValueError("intensity and variance must have equal length")
        if np.any(self.variance < 0):
            raise ValueError("variances must be non-negative")
        if self.weight is not None:
            self.weight = np.asarray(self.weight, dtype=np.float64).ravel()
            if self.weight.shape != self.intensity.shape:
                raise ValueError("weights must match the number of points")

    def __len__(self) -> int:
        return self.intensity.size


def merge_clouds(clouds: Iterable[NlfPointCloud]) -> NlfPointCloud:
    clouds = list(clouds)
    if not clouds:
        raise ValueError("no point clouds to merge")
    intensity = np.concatenate([c.intensity for c in clouds])
    variance = np.concatenate([c.variance for c in clouds])
    if all(c.weight is not None for c in clouds):
        weight = np.concatenate([c.weight for c in clouds])
    else:
        weight = None
    return NlfPointCloud(intensity, variance, weight)


@dataclass(frozen=True)
class AffineNlf:
    """Fitted affine noise level function with its RMS fit residual."""

    a: float
    b: float
    fit_residual: float = 0.0

    def variance(self, u) -> np.ndarray:
        return self.a * np.asarray(u, dtype=np.float64) + self.b


def fit_affine_nlf(cloud: NlfPointCloud, use_weights: bool = False) -> AffineNlf:
    """Least-squares fit of variance against intensity (optionally weighted)."""
    if len(cloud) < 2 or np.unique(cloud.intensity).size < 2:
        raise ValueError("need at least 2 distinct intensities to fit")
    if use_weights:
        if cloud.weight is None:
            raise ValueError("cloud carries no weights")
        w = cloud.weight
    else:
        w = np.ones_like(cloud.intensity)
    sw = np.sqrt(w)
    design = np.stack([cloud.intensity, np.ones_like(cloud.intensity)], axis=1)
    coef, *_ = np.linalg.lstsq(design * sw[:, None], cloud.variance * sw, rcond=None)
    a, b = (float(c) for c in coef)
    res = cloud.variance - (a * cloud.intensity + b)
    residual = float(np.sqrt(np.sum(w * res * res) / np.sum(w)))
    return AffineNlf(a=a, b=b, fit_residual=residual)


def flatfield_calibrate(noise_sampler: Callable[[np.ndarray, np.random.Generator], np.ndarray],
                        levels=None, patch_size: int = 256,
                        rng: np.random.Generator | None = None,
                        attach_weights: bool = True) -> NlfPointCloud:
    """Measure the sampler's variance on constant patches at each level.

    ``noise_sampler(patch, rng)`` must return a noisy patch of the same
    shape. When ``attach_weights`` is set, each point carries an inverse
    variance-of-the-variance weight (n-1)/(2*s^4) for weighted fitting.
    """
    if levels is None:
        levels = np.linspace(0.01, 0.99, 64)
    levels = np.asarray(levels, dtype=np.float64)
    if levels.size < 2:
        raise ValueError("need at least 2 intensity levels")
    if patch_size < MIN_PATCH_SIDE:
        raise ValueError(
            f"patch_size {patch_size} too small for a <1% variance estimate; "
            f"need at least {MIN_PATCH_SIDE}"
        )
    if rng is None:
        rng = np.random.default_rng()
    variances = np.empty_like(levels)
    for i, level in enumerate(levels):
        patch = np.full((patch_size, patch_size), level, dtype=np.float64)
        noisy = np.asarray(noise_sampler(patch, rng), dtype=np.float64)
        if noisy.shape != patch.shape:
            raise ValueError("noise sampler changed the patch shape")
        variances[i] = np.var(noisy, ddof=1)
    weight = None
    if attach_weights:
        # inverse variance of the variance estimator, floored to stay finite
        # for noise-free samplers
        n = patch_size * patch_size
        weight = (n - 1) / (2.0 * np.maximum(variances, 1e-30) ** 2)
    return NlfPointCloud(levels, variances, weight)


def _dct_kernel(i: int, j: int) -> np.ndarray:
    n = np.arange(BLOCK)
    ci = np.sqrt((1 if i == 0 else 2) / BLOCK)
    cj = np.sqrt((1 if j == 0 else 2) / BLOCK)
    row = ci * np.cos(np.pi * (2 * n + 1) * i / (2 * BLOCK))
    col = cj * np.cos(np.pi * (2 * n + 1) * j / (2 * BLOCK))
    return np.outer(row, col)


_HF_PAIRS = [(i, j) for i in range(BLOCK) for j in range(BLOCK) if i + j >= HF_INDEX_SUM]
_HF_KERNELS = [_dct_kernel(i, j) for (i, j) in _HF_PAIRS]
_N_LOW = BLOCK * BLOCK - 1 - len(_HF_PAIRS)


def _plane_block_stats(plane: np.ndarray, step: int):
    """Per sliding 8x8 block: mean, texture and noise statistics, positions."""
    ones = np.ones((BLOCK, BLOCK))
    total = signal.correlate(plane, ones, mode="valid")
    total_sq = signal.correlate(plane * plane, ones, mode="valid")
    mean = total / (BLOCK * BLOCK)
    dc2 = (total / BLOCK) ** 2
    hf_sum = np.zeros_like(total)
    for k in _HF_KERNELS:
        d = signal.correlate(plane, k, mode="valid")
        hf_sum += d * d
    # Parseval: low+mid frequency energy = total energy - DC^2 - HF energy
    texture = np.maximum(total_sq - dc2 - hf_sum, 0.0) / _N_LOW
    noise = np.maximum(hf_sum, 0.0) / len(_HF_PAIRS)
    sl = (slice(None, None, step), slice(None, None, step))
    yy, xx = np.mgrid[0:total.shape[0], 0:total.shape[1]]
    return (mean[sl].ravel(), texture[sl].ravel(), noise[sl].ravel(),
            yy[sl].ravel(), xx[sl].ravel())


def _select_flattest_disjoint(candidates, ys, xs, m):
    """First m candidates (already sorted by texture) with disjoint supports.

    Sliding blocks overlap; averaging overlapping blocks would correlate the
    noise statistics and inflate the estimator variance, so selected blocks
    must be at least one block apart in x or y.
    """
    taken = np.empty((m, 2), dtype=np.int64)
    count = 0
    for idx in candidates:
        y, x = ys[idx], xs[idx]
        if count and np.any((np.abs(taken[:count, 0] - y) < BLOCK)
                            & (np.abs(taken[:count, 1] - x) < BLOCK)):
            continue
        taken[count] = (y, x)
        count += 1
        yield idx
        if count == m:
            return


def _bin_points(mean, texture, noise, ys, xs, nbins, q, min_blocks):
    order = np.argsort(mean, kind="stable")
    points = []
    for idx in np.array_split(order, nbins):
        if idx.size == 0:
            continue
        m = min(max(int(np.ceil(q / 100.0 * idx.size)), min_blocks), idx.size)
        by_texture = idx[np.argsort(texture[idx], kind="stable")]
        flattest = np.fromiter(
            _select_flattest_disjoint(by_texture, ys, xs, m), dtype=np.int64)
        points.append((
            float(np.median(mean[flattest])),
            float(np.mean(noise[flattest]) / SELECTION_BIAS),
            float(idx.size),
        ))
    return points


def estimate_nlf_frame(frame: RawFrame, *, block_step: int = 1,
                       q: float = DEFAULT_PERCENTILE, nbins: int = DEFAULT_BINS,
                       min_blocks: int = DEFAULT_MIN_BLOCKS) -> NlfPointCloud:
    """Intensity/variance samples from one noisy frame (see module docstring)."""
    if frame.height < MIN_FRAME_SIDE or frame.width < MIN_FRAME_SIDE:
        raise ValueError(
            f"frame must be at least {MIN_FRAME_SIDE}x{MIN_FRAME_SIDE}, "
            f"got {frame.width}x{frame.height}"
        )
    points = []
    for plane in pack_planes(frame.data):
        mean, texture, noise, ys, xs = _plane_block_stats(plane, block_step)
        if mean.size < nbins:
            raise ValueError("frame too small to populate the intensity bins")
        points.extend(_bin_points(mean, texture, noise, ys, xs, nbins, q, min_blocks))
    intensity, variance, population = (np.array(col) for col in zip(*points))
    return NlfPointCloud(intensity, variance, population)


def estimate_camera_nlf(frames_or_sequences, *, use_weights: bool = False,
                        block_step: int = 1) -> tuple[AffineNlf, NlfPointCloud]:
    """Pool per-frame point clouds over a dataset, then fit the affine model.

    Accepts an iterable of RawFrame or of VideoSequence. Also returns the
    pooled cloud for plotting.
    """
    frames: list[RawFrame] = []
    for item in frames_or_sequences:
        if isinstance(item, VideoSequence):
            frames.extend(item.frames)
        else:
            frames.append(item)
    if not frames:
        raise ValueError("empty dataset")
    cloud = merge_clouds(estimate_nlf_frame(f, block_step=block_step) for f in frames)
    return fit_affine_nlf(cloud, use_weights=use_weights), cloud


def save_cloud_csv(path, cloud: NlfPointCloud, nlf: AffineNlf | None = None) -> None:
    """Write ``intensity,variance[,weight][,fitted]`` rows for plotting."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        header = ["intensity", "variance"]
        if cloud.weight is not None:
            header.append("weight")
        if nlf is not None:
            header.append("fitted")
        writer.writerow(header)
        for i in range(len(cloud)):
            row = [repr(float(cloud.intensity[i])), repr(float(cloud.variance[i]))]
            if cloud.weight is not None:
                row.append(repr(float(cloud.weight[i])))
            if nlf is not None:
                row.append(repr(float(nlf.a * cloud.intensity[i] + nlf.b)))
            writer.writerow(row)


def load_cloud_csv(path) -> NlfPointCloud:
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        cols = {name: k for k, name in enumerate(header)}
        if "intensity" not in cols or "variance" not in cols:
            raise ValueError(f"{path}: expected intensity,variance[,weight] columns")
        rows = [row for row in reader if row]
    intensity = np.array([float(r[cols["intensity"]]) for r in rows])
    variance = np.array([float(r[cols["variance"]]) for r in rows])
    weight = None
    if "weight" in cols:
        weight = np.array([float(r[cols["weight"]]) for r in rows])
    return NlfPointCloud(intensity, variance, weight)
