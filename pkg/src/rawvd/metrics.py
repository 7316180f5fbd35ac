"""PSNR, SSIM and the display rendering used for visual checks."""

from __future__ import annotations

import math

import numpy as np
from scipy import ndimage

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5


def psnr(a: np.ndarray, b: np.ndarray, peak: float = 1.0) -> float:
    """10*log10(peak^2 / MSE); +inf when the images are identical."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if peak <= 0:
        raise ValueError(f"peak must be positive, got {peak}")
    mse = np.mean((a - b) ** 2)
    if mse == 0.0:
        return math.inf
    return float(10.0 * math.log10(peak * peak / mse))


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2.0
    k = np.exp(-(r * r) / (2.0 * sigma * sigma))
    k2 = np.outer(k, k)
    return k2 / k2.sum()


def ssim(a: np.ndarray, b: np.ndarray, dynamic_range: float = 1.0) -> float:
    """Mean local SSIM over valid 11x11 Gaussian (sigma=1.5) windows.

    Uses the standard constants C1=(0.01*L)^2 and C2=(0.03*L)^2 where L is
    ``dynamic_range``. Images smaller than the window are rejected.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.ndim != 2:
        raise ValueError(f"expected 2-D images, got shape {a.shape}")
    if min(a.shape) < SSIM_WINDOW:
        raise ValueError(
            f"images must be at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {a.shape}"
        )
    win = _gaussian_window(SSIM_WINDOW, SSIM_SIGMA)
    m = SSIM_WINDOW // 2
    valid = (slice(m, -m), slice(m, -m))

    def f(x):
        return ndimage.correlate(x, win, mode="constant")[valid]

    mu_a = f(a)
    mu_b = f(b)
    var_a = f(a * a) - mu_a * mu_a
    var_b = f(b * b) - mu_b * mu_b
    cov = f(a * b) - mu_a * mu_b
    c1 = (0.01 * dynamic_range) ** 2
    c2 = (0.03 * dynamic_range) ** 2
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def gamma_display(rgb: np.ndarray, gamma: float = 2.2,
                  wb_gains=(1.0, 1.0, 1.0)) -> np.ndarray:
    """Per-channel white-balance gain, then x^(1/gamma), clamped to [0, 1]."""
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) image, got shape {rgb.shape}")
    gains = np.asarray(wb_gains, dtype=np.float64).reshape(1, 1, 3)
    out = np.clip(rgb * gains, 0.0, None) ** (1.0 / gamma)
    return np.clip(out, 0.0, 1.0)
