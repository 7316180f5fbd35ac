"""Dataset-level orchestration: the operations behind the CLI subcommands.

Every operation here is a pure function of (inputs, settings, seed); random
streams are derived per (seed, sequence id, stage, frame), so results do not
depend on the worker count. Output directories are staged and atomically
renamed, so a failed run leaves no partial dataset behind.
"""

from __future__ import annotations

import os
import shutil
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import dataio
from .bayer import AffineMap, pack_planes
from .calibrate import estimate_camera_nlf
from .frames import RawFrame, VideoSequence
from .metrics import psnr, ssim
from .noise import (
    HeteroGaussianParams,
    NoiseModel,
    synthesize_noisy_sequence,
)
from .unprocess import CameraProfile, dataset_percentiles, unprocess_sequence


def run_jobs(fn, items, jobs: int = 1) -> list:
    """Map fn over items, optionally on a thread pool; order is preserved."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


@contextmanager
def atomic_output_dir(out_root):
    """Stage into a sibling temp dir, atomically rename on success."""
    out_root = Path(out_root)
    if out_root.exists():
        raise FileExistsError(f"output directory already exists: {out_root}")
    out_root.parent.mkdir(parents=True, exist_ok=True)
    staging = out_root.parent / f".{out_root.name}.staging-{os.getpid()}"
    if staging.exists():
        shutil.rmtree(staging)
    staging.mkdir()
    try:
        yield staging
    except BaseException:
        shutil.rmtree(staging, ignore_errors=True)
        raise
    os.replace(staging, out_root)


def load_srgb_tree(root) -> list[tuple[str, list[np.ndarray]]]:
    """Load 8-bit sRGB PPM sequences; one sequence per subdirectory.

    PPM files directly under the root form the sequence ".". Files are taken
    in sorted name order.
    """
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"no such sRGB directory: {root}")
    sequences = []
    top = sorted(p for p in root.glob("*.ppm") if p.is_file())
    if top:
        sequences.append((".", top))
    for sub in sorted(p for p in root.iterdir() if p.is_dir()):
        files = sorted(sub.glob("*.ppm"))
        if files:
            sequences.append((sub.name, files))
    if not sequences:
        raise FileNotFoundError(f"no .ppm frames found under {root}")
    out = []
    for seq_id, files in sequences:
        frames = []
        for path in files:
            codes, maxval = dataio.read_ppm(path)
            if maxval != 255:
                raise ValueError(f"{path}: sRGB input must be 8-bit PPM")
            frames.append(codes)
        out.append((seq_id, frames))
    return out


def unprocess_tree(srgb_root, profile: CameraProfile, *, seed: int,
                   jobs: int = 1, target_stats: tuple[float, float] | None = None,
                   dither: bool = True, frame_rate: float = 30.0,
                   black_level: int = 4096,
                   white_level: int = 61440) -> list[VideoSequence]:
    """Unprocess every sRGB sequence under a directory to clean raw.

    When ``target_stats`` is given, the percentile tone map is fitted on the
    values pooled over the whole unprocessed dataset and applied to every
    frame, so all sequences share one affine range map.
    """
    srgb_sequences = load_srgb_tree(srgb_root)

    def one(item):
        seq_id, frames = item
        return unprocess_sequence(
            frames, profile, seed, seq_id, target_stats=None, dither=dither,
            frame_rate=frame_rate, black_level=black_level, white_level=white_level,
        )
    sequences = run_jobs(one, srgb_sequences, jobs)
    if target_stats is None:
        return sequences
    source_stats = dataset_percentiles(
        [f.data for seq in sequences for f in seq.frames])
    s_lo, s_hi = source_stats
    t_lo, t_hi = target_stats
    if s_hi <= s_lo:
        raise ValueError("degenerate source percentiles for tone mapping")
    scale = (t_hi - t_lo) / (s_hi - s_lo)
    tmap = AffineMap(scale=float(scale), offset=float(t_lo - scale * s_lo))
    return [
        VideoSequence([f.with_data(tmap.apply(f.data)) for f in seq.frames],
                      seq.frame_rate, seq.id)
        for seq in sequences
    ]


def surrogate_target_stats(surrogate_root) -> tuple[float, float]:
    sequences = dataio.load_dataset(surrogate_root)
    return dataset_percentiles(
        [f.data for seq in sequences for f in seq.frames])


def calibrate_noise_from_dataset(root, use_weights: bool = False) -> HeteroGaussianParams:
    """Fit the heteroscedastic Gaussian model to a noisy dataset's frames."""
    sequences = dataio.load_dataset(root)
    nlf, _ = estimate_camera_nlf(sequences, use_weights=use_weights)
    if nlf.a < 0 or nlf.b < 0:
        raise ValueError(
            f"calibration degeneracy: fitted a={nlf.a:.3e}, b={nlf.b:.3e} "
            "(negative coefficient)"
        )
    return HeteroGaussianParams(a=nlf.a, b=nlf.b)


def add_noise_tree(sequences: list[VideoSequence], model: NoiseModel,
                   seed: int, jobs: int = 1, clip: bool = False) -> list[VideoSequence]:
    return run_jobs(lambda s: synthesize_noisy_sequence(s, model, seed, clip=clip),
                    sequences, jobs)


def make_synthetic(srgb_root, out_root, profile: CameraProfile, *,
                   noise_model: NoiseModel | None = None,
                   surrogate_root=None,
                   calibrate_from_surrogate: bool = False,
                   target_stats: tuple[float, float] | None = None,
                   seed: int = 0, jobs: int = 1, dither: bool = True,
                   frame_rate: float = 30.0, black_level: int = 4096,
                   white_level: int = 61440, clip: bool = False) -> dict:
    """Full synthetic-dataset construction: unprocess, range-match, add noise.

    Writes ``clean/`` and ``noisy/`` datasets under ``out_root``. The range
    map targets the surrogate dataset's 1%/99% percentiles; the noise model
    is either supplied or calibrated from the surrogate's frames.
    """
    if noise_model is None and not calibrate_from_surrogate:
        raise ValueError("need a noise model or --calibrate-from-surrogate")
    if (calibrate_from_surrogate or target_stats is None) and surrogate_root is None:
        raise ValueError("a surrogate dataset is required to match ranges "
                         "or calibrate noise")
    if target_stats is None:
        target_stats = surrogate_target_stats(surrogate_root)
    if noise_model is None:
        noise_model = calibrate_noise_from_dataset(surrogate_root)
    clean = unprocess_tree(
        srgb_root, profile, seed=seed, jobs=jobs, target_stats=target_stats,
        dither=dither, frame_rate=frame_rate, black_level=black_level,
        white_level=white_level,
    )
    noisy = add_noise_tree(clean, noise_model, seed, jobs=jobs, clip=clip)
    with atomic_output_dir(out_root) as staging:
        dataio.save_dataset(staging / "clean", clean)
        dataio.save_dataset(staging / "noisy", noisy)
    return {
        "noise_model": noise_model,
        "target_stats": target_stats,
        "sequences": [seq.id for seq in clean],
        "frames": sum(len(s) for s in clean),
    }


def _frame_metrics(test: RawFrame, ref: RawFrame) -> tuple[float, float]:
    """PSNR on the mosaic (peak 1), SSIM averaged over the 4 packed planes."""
    p = psnr(test.data, ref.data, peak=1.0)
    planes_t = pack_planes(test.data)
    planes_r = pack_planes(ref.data)
    s = float(np.mean([ssim(pt, pr, dynamic_range=1.0)
                       for pt, pr in zip(planes_t, planes_r)]))
    return p, s


def eval_datasets(test_root, reference_root, jobs: int = 1) -> dict:
    """Per-frame PSNR/SSIM rows plus sequence and dataset averages.

    Averaging order: frames within a sequence, then sequences. PSNR of
    identical frames is the +inf sentinel and propagates to the averages.
    """
    test_seqs = dataio.load_dataset(test_root)
    ref_seqs = dataio.load_dataset(reference_root)
    if [s.id for s in test_seqs] != [s.id for s in ref_seqs]:
        raise ValueError("datasets list different sequences")
    rows = []
    per_sequence = []
    for ts, rs in zip(test_seqs, ref_seqs):
        if len(ts) != len(rs):
            raise ValueError(
                f"sequence {ts.id!r}: frame count mismatch {len(ts)} vs {len(rs)}"
            )
        pair_metrics = run_jobs(
            lambda pair: _frame_metrics(pair[0], pair[1]),
            zip(ts.frames, rs.frames),
            jobs,
        )
        for i, (p, s) in enumerate(pair_metrics):
            rows.append({"sequence": ts.id, "frame": i, "psnr": p, "ssim": s})
        per_sequence.append({
            "sequence": ts.id,
            "psnr": float(np.mean([m[0] for m in pair_metrics])),
            "ssim": float(np.mean([m[1] for m in pair_metrics])),
        })
    return {
        "frames": rows,
        "sequences": per_sequence,
        "psnr": float(np.mean([s["psnr"] for s in per_sequence])),
        "ssim": float(np.mean([s["ssim"] for s in per_sequence])),
    }


def temporal_subsample(sequences: list[VideoSequence], stride: int) -> list[VideoSequence]:
    """Keep frames at indices 0 mod stride; divides the frame rate by stride."""
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    return [
        VideoSequence(seq.frames[::stride], seq.frame_rate / stride, seq.id)
        for seq in sequences
    ]


def frame_average_gt(sequence: VideoSequence) -> VideoSequence:
    """Pixelwise mean of a static sequence, replicated to the original length."""
    if len(sequence) < 2:
        raise ValueError("need at least 2 frames to average a static sequence")
    mean = np.mean(np.stack([f.data for f in sequence.frames]), axis=0)
    gt = sequence.frames[0].with_data(mean)
    return VideoSequence([gt] * len(sequence), sequence.frame_rate, sequence.id)
