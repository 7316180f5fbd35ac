"""Synthetic raw noise: heteroscedastic Gaussian and Poisson + Tukey-lambda.

Noisy values are not clipped by default; pass ``clip=True`` where a display
range is required. Per-frame random streams are derived from
(seed, sequence id, frame index), so datasets come out identical under any
scheduling.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Union

import numpy as np

from .frames import RawFrame, VideoSequence
from .rngstreams import derive_rng

# Below this |lambda| the quantile function switches to its logistic limit
# to avoid catastrophic cancellation.
TUKEY_LOGISTIC_CUTOFF = 1e-6


@dataclass(frozen=True)
class HeteroGaussianParams:
    """Zero-mean Gaussian with variance a*u + b at clean intensity u."""

    a: float
    b: float

    def __post_init__(self):
        if self.a < 0 or self.b < 0:
            raise ValueError(f"variance coefficients must be >= 0, got a={self.a} b={self.b}")

    def variance(self, u: np.ndarray) -> np.ndarray:
        return self.a * np.asarray(u, dtype=np.float64) + self.b


@dataclass(frozen=True)
class PoissonTukeyParams:
    """Low-light sensor model: scaled Poisson shot noise plus Tukey-lambda
    read noise, optional per-row banding and quantization."""

    k_gain: float
    tl_lambda: float
    tl_scale: float
    sigma_row: float = 0.0
    quant_step: float = 0.0

    def __post_init__(self):
        if self.k_gain <= 0:
            raise ValueError(f"k_gain must be > 0, got {self.k_gain}")
        if self.tl_scale <= 0:
            raise ValueError(f"tl_scale must be > 0, got {self.tl_scale}")
        if self.sigma_row < 0 or self.quant_step < 0:
            raise ValueError("sigma_row and quant_step must be >= 0")


NoiseModel = Union[HeteroGaussianParams, PoissonTukeyParams]


def noise_model_to_json_dict(model: NoiseModel) -> dict:
    if isinstance(model, HeteroGaussianParams):
        return {"type": "hetero_gaussian", "a": model.a, "b": model.b}
    if isinstance(model, PoissonTukeyParams):
        return {
            "type": "poisson_tukey",
            "k_gain": model.k_gain,
            "tl_lambda": model.tl_lambda,
            "tl_scale": model.tl_scale,
            "sigma_row": model.sigma_row,
            "quant_step": model.quant_step,
        }
    raise TypeError(f"unknown noise model type {type(model)!r}")


def noise_model_from_json_dict(d: dict) -> NoiseModel:
    kind = d.get("type")
    if kind == "hetero_gaussian":
        return HeteroGaussianParams(a=float(d["a"]), b=float(d["b"]))
    if kind == "poisson_tukey":
        return PoissonTukeyParams(
            k_gain=float(d["k_gain"]),
            tl_lambda=float(d["tl_lambda"]),
            tl_scale=float(d["tl_scale"]),
            sigma_row=float(d.get("sigma_row", 0.0)),
            quant_step=float(d.get("quant_step", 0.0)),
        )
    raise ValueError(f"unknown noise model type {kind!r}")


def load_noise_model(path) -> NoiseModel:
    with open(path) as f:
        return noise_model_from_json_dict(json.load(f))


def save_noise_model(path, model: NoiseModel) -> None:
    with open(path, "w") as f:
        json.dump(noise_model_to_json_dict(model), f, indent=2)
        f.write("\n")


def tukey_lambda_quantile(p: np.ndarray, lam: float) -> np.ndarray:
    """Q(p; lambda) = (p^lambda - (1-p)^lambda) / lambda, logistic at lambda=0."""
    p = np.asarray(p, dtype=np.float64)
    if abs(lam) < TUKEY_LOGISTIC_CUTOFF:
        return np.log(p / (1.0 - p))
    return (p ** lam - (1.0 - p) ** lam) / lam


def sample_tukey_lambda(lam: float, scale: float, n, rng: np.random.Generator) -> np.ndarray:
    """Inverse-transform samples of scale * TukeyLambda(lam)."""
    if scale <= 0:
        raise ValueError(f"scale must be > 0, got {scale}")
    u = rng.random(n)
    # keep u strictly inside (0, 1); negative shapes diverge at the endpoints
    u = np.clip(u, 1e-12, 1.0 - 1e-12)
    return scale * tukey_lambda_quantile(u, lam)


def sample_poisson(rates: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    rates = np.asarray(rates, dtype=np.float64)
    if np.any(rates < 0):
        raise ValueError("Poisson rates must be >= 0")
    return rng.poisson(rates)


def sample_hetero_gaussian(u, params: HeteroGaussianParams,
                           rng: np.random.Generator, clip: bool = False):
    """v = u + N(0, sqrt(a*u + b)) pixelwise; no clipping unless requested."""
    frame = u if isinstance(u, RawFrame) else None
    data = u.data if frame is not None else np.asarray(u, dtype=np.float64)
    var = params.variance(data)
    if np.any(var < 0):
        raise ValueError("negative noise variance: a*u + b < 0 at some pixel")
    noisy = data + rng.standard_normal(data.shape) * np.sqrt(var)
    if clip:
        noisy = np.clip(noisy, 0.0, 1.0)
    return frame.with_data(noisy) if frame is not None else noisy


def sample_poisson_tukey(u, params: PoissonTukeyParams,
                         rng: np.random.Generator, clip: bool = False):
    """k * Poisson(u/k) + TukeyLambda read noise + row offsets, then quantization.

    Draw order from the stream is fixed (Poisson, read noise, row noise) so a
    given stream always produces the same frame.
    """
    frame = u if isinstance(u, RawFrame) else None
    data = u.data if frame is not None else np.asarray(u, dtype=np.float64)
    if np.any(data < 0):
        raise ValueError("clean intensities must be >= 0 for the Poisson component")
    k = params.k_gain
    noisy = k * rng.poisson(data / k).astype(np.float64)
    noisy += sample_tukey_lambda(params.tl_lambda, params.tl_scale, data.shape, rng)
    if params.sigma_row > 0:
        noisy += params.sigma_row * rng.standard_normal((data.shape[0], 1))
    if params.quant_step > 0:
        noisy = np.round(noisy / params.quant_step) * params.quant_step
    if clip:
        noisy = np.clip(noisy, 0.0, 1.0)
    return frame.with_data(noisy) if frame is not None else noisy


def apply_noise_model(u, model: NoiseModel, rng: np.random.Generator,
                      clip: bool = False):
    if isinstance(model, HeteroGaussianParams):
        return sample_hetero_gaussian(u, model, rng, clip=clip)
    if isinstance(model, PoissonTukeyParams):
        return sample_poisson_tukey(u, model, rng, clip=clip)
    raise TypeError(f"unknown noise model type {type(model)!r}")


def synthesize_noisy_sequence(sequence: VideoSequence, model: NoiseModel,
                              seed: int, clip: bool = False) -> VideoSequence:
    """Apply the model per frame with per-frame derived streams."""
    noisy = [
        apply_noise_model(frame, model, derive_rng(seed, sequence.id, "noise", idx), clip=clip)
        for idx, frame in enumerate(sequence.frames)
    ]
    return VideoSequence(noisy, sequence.frame_rate, sequence.id)


def synthesize_noisy_dataset(sequences: list[VideoSequence], model: NoiseModel,
                             seed: int, clip: bool = False) -> list[VideoSequence]:
    return [synthesize_noisy_sequence(seq, model, seed, clip=clip) for seq in sequences]
