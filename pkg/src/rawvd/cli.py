"""Command-line front end.

Global flags (valid for every subcommand): ``--seed``, ``--config``,
``--jobs``, ``--manifest``. A config file holds flat ``key = value`` lines
(``#`` starts a comment); keys mirror the long flag names of the invoked
subcommand, and explicit flags win over config entries. Unknown config keys
are ignored so one file can serve several subcommands.

Commands that write files also write a run manifest (resolved settings,
seed, input/output digests); dataset outputs get ``<out>/manifest.json``,
single-file outputs get ``<out>.manifest.json``, and ``--manifest`` overrides
the location.
"""

from __future__ import annotations

import argparse
import csv
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import dataio, pipeline
from .blindspot import probe_receptive_field, reference_blindspot_net
from .calibrate import (
    estimate_camera_nlf,
    fit_affine_nlf,
    flatfield_calibrate,
    load_cloud_csv,
    save_cloud_csv,
)
from .demosaic import demosaic
from .flow import FlowField, TvL1Params, flow_input_raw, tvl1_flow
from .frames import CfaPattern, RawFrame, RgbFrame
from .losses import (
    FlowCache,
    blindspot_loss,
    gaussian_blur_denoiser,
    identity_denoiser,
    mf2f_loss,
    temporal_mean_denoiser,
)
from .manifest import build_manifest, write_manifest
from .noise import (
    HeteroGaussianParams,
    apply_noise_model,
    load_noise_model,
    save_noise_model,
)
from .rngstreams import derive_rng
from .unprocess import default_profile, load_profile
from .warp import warp_raw, warp_rgb


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"cannot parse boolean from {text!r}")


@dataclass(frozen=True)
class Opt:
    flag: str
    type: Callable = str
    default: object = None
    help: str = ""
    is_flag: bool = False
    choices: tuple | None = None

    @property
    def dest(self) -> str:
        return self.flag.lstrip("-").replace("-", "_")


GLOBAL_OPTS = [
    Opt("--seed", int, 0, "global 64-bit seed for every derived random stream"),
    Opt("--config", str, None, "flat key = value settings file"),
    Opt("--jobs", int, 1, "worker threads for per-sequence work"),
    Opt("--manifest", str, None, "override the manifest path"),
]

_CFA = Opt("--cfa", str, "RGGB", "Bayer pattern", choices=("RGGB", "BGGR", "GRBG", "GBRG"))
_BLACK = Opt("--black-level", int, 4096, "sensor black level for 16-bit files")
_WHITE = Opt("--white-level", int, 61440, "sensor white level for 16-bit files")

TVL1_OPTS = [
    Opt("--data-weight", float, 0.15, "TV-L1 attachment weight lambda"),
    Opt("--tightness", float, 0.3, "TV-L1 coupling theta"),
    Opt("--time-step", float, 0.25, "dual ascent step tau (<= 0.25)"),
    Opt("--zoom", float, 0.5, "pyramid zoom factor"),
    Opt("--scales", int, 0, "pyramid scales (0 = auto)"),
    Opt("--warps", int, 5, "warps per scale"),
    Opt("--tolerance", float, 0.01, "inner-loop stopping threshold"),
]

DENOISER_OPTS = [
    Opt("--denoiser", str, "identity", "built-in baseline denoiser",
        choices=("identity", "temporal-mean", "gaussian-blur", "blindspot")),
    Opt("--sigma", float, 1.0, "gaussian-blur baseline sigma"),
    Opt("--depth", int, 3, "blind-spot net depth"),
    Opt("--channels", int, 8, "blind-spot net channels"),
    Opt("--remove-blindspot", is_flag=True, default=False,
        help="apply the shift that restores the center pixel"),
]

COMMANDS: dict[str, list[Opt]] = {
    "unprocess": [
        Opt("--input", str, None, "sRGB PPM directory (one subdir per sequence)"),
        Opt("--output", str, None, "output raw dataset directory"),
        Opt("--profile", str, None, "camera profile JSON (default: built-in)"),
        Opt("--surrogate", str, None, "raw dataset whose 1%/99% percentiles to match"),
        Opt("--target-stats", str, None, "explicit 'p1,p99' percentile targets"),
        Opt("--frame-rate", float, 30.0, "output frame rate"),
        Opt("--no-dither", is_flag=True, default=False, help="disable quantization dither"),
        _CFA, _BLACK, _WHITE,
    ],
    "add-noise": [
        Opt("--input", str, None, "clean raw dataset"),
        Opt("--output", str, None, "output noisy dataset"),
        Opt("--model", str, None, "noise model JSON"),
        Opt("--clip", is_flag=True, default=False, help="clamp noisy values to [0,1]"),
    ],
    "calibrate-flatfield": [
        Opt("--model", str, None, "noise model JSON to sample from"),
        Opt("--levels", int, 64, "number of intensity levels"),
        Opt("--level-min", float, 0.01, "lowest flat-field level"),
        Opt("--level-max", float, 0.99, "highest flat-field level"),
        Opt("--patch-size", int, 256, "flat-field patch side"),
        Opt("--out-cloud", str, None, "write the intensity/variance cloud CSV here"),
        Opt("--out-model", str, None, "write the fitted hetero-Gaussian JSON here"),
        Opt("--unweighted", is_flag=True, default=False,
            help="fit without the inverse-variance weights"),
    ],
    "estimate-nlf": [
        Opt("--input", str, None, "noisy raw dataset"),
        Opt("--out-cloud", str, None, "write the pooled point cloud CSV here"),
        Opt("--out-model", str, None, "write the fitted hetero-Gaussian JSON here"),
        Opt("--weighted", is_flag=True, default=False, help="weight points by bin population"),
        Opt("--block-step", int, 1, "stride between analysis blocks"),
    ],
    "fit-nlf": [
        Opt("--cloud", str, None, "point cloud CSV"),
        Opt("--out-model", str, None, "write the fitted hetero-Gaussian JSON here"),
        Opt("--weighted", is_flag=True, default=False, help="use the cloud's weights"),
    ],
    "make-synthetic": [
        Opt("--input", str, None, "sRGB PPM directory"),
        Opt("--output", str, None, "output directory (clean/ and noisy/)"),
        Opt("--profile", str, None, "camera profile JSON (default: built-in)"),
        Opt("--surrogate", str, None, "surrogate raw dataset (range match / calibration)"),
        Opt("--model", str, None, "noise model JSON"),
        Opt("--calibrate-from-surrogate", is_flag=True, default=False,
            help="estimate (a, b) from the surrogate frames"),
        Opt("--target-stats", str, None, "explicit 'p1,p99' percentile targets"),
        Opt("--frame-rate", float, 30.0, "output frame rate"),
        Opt("--no-dither", is_flag=True, default=False, help="disable quantization dither"),
        Opt("--clip", is_flag=True, default=False, help="clamp noisy values to [0,1]"),
        _CFA, _BLACK, _WHITE,
    ],
    "flow": [
        Opt("--target", str, None, "target frame (flow is anchored here)"),
        Opt("--reference", str, None, "reference frame (flow points into it)"),
        Opt("--output", str, None, "output .flo file"),
        Opt("--raw", is_flag=True, default=False,
            help="inputs are raw mosaics; estimate on demosaiced luminance"),
        _CFA, _BLACK, _WHITE, *TVL1_OPTS,
    ],
    "warp": [
        Opt("--image", str, None, "PGM (raw) or PPM (RGB) frame to warp"),
        Opt("--flow", str, None, ".flo displacement field"),
        Opt("--output", str, None, "output frame path"),
        Opt("--method", str, "ha", "demosaicer for raw warping", choices=("ha", "bilinear")),
        Opt("--interp", str, "bicubic", "interpolation", choices=("bicubic", "bilinear")),
        _CFA, _BLACK, _WHITE,
    ],
    "demosaic": [
        Opt("--input", str, None, "raw PGM frame"),
        Opt("--output", str, None, "output 16-bit PPM"),
        Opt("--method", str, "ha", "demosaic method", choices=("ha", "bilinear")),
        _CFA, _BLACK, _WHITE,
    ],
    "mosaic": [
        Opt("--input", str, None, "16-bit PPM frame"),
        Opt("--output", str, None, "output raw PGM"),
        _CFA, _BLACK, _WHITE,
    ],
    "mf2f-loss": [
        Opt("--input", str, None, "noisy raw dataset"),
        Opt("--output", str, None, "per-frame CSV (sequence, frame, loss, mask coverage)"),
        *DENOISER_OPTS, *TVL1_OPTS,
    ],
    "bs-loss": [
        Opt("--input", str, None, "noisy raw dataset"),
        Opt("--output", str, None, "per-frame CSV (sequence, frame, loss)"),
        *DENOISER_OPTS,
    ],
    "probe-rf": [
        Opt("--pixel", str, "32,32", "probed pixel as 'x,y'"),
        Opt("--radius", int, 2, "probe window radius"),
        Opt("--eps", float, 1e-3, "perturbation size"),
        Opt("--frame-size", int, 64, "side of the square probe frame"),
        Opt("--output", str, None, "optional CSV of influential coordinates"),
        *DENOISER_OPTS,
    ],
    "eval": [
        Opt("--input", str, None, "denoised/test raw dataset"),
        Opt("--reference", str, None, "reference raw dataset"),
        Opt("--output", str, None, "per-frame CSV report"),
    ],
    "subsample": [
        Opt("--input", str, None, "input raw dataset"),
        Opt("--output", str, None, "output raw dataset"),
        Opt("--stride", int, 3, "keep one frame out of this many"),
    ],
    "avg-gt": [
        Opt("--input", str, None, "static-scene raw dataset"),
        Opt("--output", str, None, "output constant ground-truth dataset"),
    ],
}


def _require(settings: dict, *keys: str) -> None:
    missing = [k for k in keys if settings.get(k) in (None, "")]
    if missing:
        flags = ", ".join("--" + k.replace("_", "-") for k in missing)
        raise ValueError(f"missing required option(s): {flags}")


def parse_config_file(path) -> dict[str, str]:
    entries = {}
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = line.split("=", 1)
            entries[key.strip().replace("-", "_")] = value.strip()
    return entries


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rawvd",
        description="raw video denoising data toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for command, opts in COMMANDS.items():
        sp = sub.add_parser(command, help=(opts[0].help if opts else ""))
        for opt in [*GLOBAL_OPTS, *opts]:
            kwargs: dict = {"dest": opt.dest, "default": argparse.SUPPRESS,
                            "help": opt.help}
            if opt.is_flag:
                kwargs["action"] = "store_true"
            else:
                kwargs["type"] = opt.type
                if opt.choices:
                    kwargs["choices"] = opt.choices
            sp.add_argument(opt.flag, **kwargs)
    return parser


def resolve_settings(command: str, parsed: argparse.Namespace) -> dict:
    opts = {o.dest: o for o in [*GLOBAL_OPTS, *COMMANDS[command]]}
    settings = {dest: o.default for dest, o in opts.items()}
    provided = {k: v for k, v in vars(parsed).items() if k != "command"}
    config_path = provided.get("config")
    if config_path:
        for key, raw in parse_config_file(config_path).items():
            if key in opts and key not in provided:
                opt = opts[key]
                settings[key] = _parse_bool(raw) if opt.is_flag else opt.type(raw)
    settings.update(provided)
    return settings


def _parse_pair(text: str, what: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise ValueError(f"expected '{what}' as two comma-separated numbers, got {text!r}")
    return float(parts[0]), float(parts[1])


def _profile(settings):
    if settings.get("profile"):
        return load_profile(settings["profile"])
    return default_profile(CfaPattern(settings.get("cfa", "RGGB")))


def _target_stats(settings):
    if settings.get("target_stats"):
        return _parse_pair(settings["target_stats"], "p1,p99")
    if settings.get("surrogate"):
        return pipeline.surrogate_target_stats(settings["surrogate"])
    return None


def _denoiser(settings):
    name = settings["denoiser"]
    if name == "identity":
        return identity_denoiser()
    if name == "temporal-mean":
        return temporal_mean_denoiser()
    if name == "gaussian-blur":
        return gaussian_blur_denoiser(settings["sigma"])
    if name == "blindspot":
        return reference_blindspot_net(
            settings["depth"], settings["channels"],
            derive_rng(settings["seed"], "blindspot-weights"),
            remove_blindspot=settings["remove_blindspot"],
        )
    raise ValueError(f"unknown denoiser {name!r}")


def _tvl1_params(settings) -> TvL1Params:
    return TvL1Params(
        data_weight=settings["data_weight"],
        tightness=settings["tightness"],
        time_step=settings["time_step"],
        zoom_factor=settings["zoom"],
        num_scales=settings["scales"] or None,
        num_warps=settings["warps"],
        tolerance=settings["tolerance"],
    )


def _load_flow_frame(path, settings) -> np.ndarray:
    """Single-channel flow input from a PGM (raw) or PPM (RGB) file."""
    path = Path(path)
    if path.suffix.lower() == ".ppm":
        rgb = dataio.load_rgb_frame(path).data
        return 0.299 * rgb[:, :, 0] + 0.587 * rgb[:, :, 1] + 0.114 * rgb[:, :, 2]
    frame = dataio.load_raw_frame(path, CfaPattern(settings["cfa"]),
                                  settings["black_level"], settings["white_level"])
    if settings.get("raw"):
        return flow_input_raw(frame)
    return frame.data


def _write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(v: float) -> str:
    return "inf" if np.isinf(v) else f"{v:.6f}"


# --- command handlers; each returns (inputs, outputs) path dicts -------------

def cmd_unprocess(settings):
    _require(settings, "input", "output")
    sequences = pipeline.unprocess_tree(
        settings["input"], _profile(settings), seed=settings["seed"],
        jobs=settings["jobs"], target_stats=_target_stats(settings),
        dither=not settings["no_dither"], frame_rate=settings["frame_rate"],
        black_level=settings["black_level"], white_level=settings["white_level"],
    )
    with pipeline.atomic_output_dir(settings["output"]) as staging:
        dataio.save_dataset(staging, sequences)
    inputs = {"srgb": settings["input"]}
    if settings.get("surrogate"):
        inputs["surrogate"] = settings["surrogate"]
    return inputs, {"dataset": settings["output"]}


def cmd_add_noise(settings):
    _require(settings, "input", "output", "model")
    model = load_noise_model(settings["model"])
    sequences = dataio.load_dataset(settings["input"])
    noisy = pipeline.add_noise_tree(sequences, model, settings["seed"],
                                    jobs=settings["jobs"], clip=settings["clip"])
    with pipeline.atomic_output_dir(settings["output"]) as staging:
        dataio.save_dataset(staging, noisy)
    return ({"clean": settings["input"], "model": settings["model"]},
            {"dataset": settings["output"]})


def cmd_calibrate_flatfield(settings):
    _require(settings, "model", "out_model")
    model = load_noise_model(settings["model"])
    levels = np.linspace(settings["level_min"], settings["level_max"],
                         settings["levels"])
    rng = derive_rng(settings["seed"], "flatfield")
    cloud = flatfield_calibrate(
        lambda patch, r: apply_noise_model(patch, model, r),
        levels=levels, patch_size=settings["patch_size"], rng=rng,
    )
    nlf = fit_affine_nlf(cloud, use_weights=not settings["unweighted"])
    fitted = HeteroGaussianParams(a=max(nlf.a, 0.0), b=max(nlf.b, 0.0))
    outputs = {}
    save_noise_model(settings["out_model"], fitted)
    outputs["model"] = settings["out_model"]
    if settings.get("out_cloud"):
        save_cloud_csv(settings["out_cloud"], cloud, nlf)
        outputs["cloud"] = settings["out_cloud"]
    print(f"fitted a={fitted.a:.6e} b={fitted.b:.6e} "
          f"rms_residual={nlf.fit_residual:.3e}")
    return {"model": settings["model"]}, outputs


def cmd_estimate_nlf(settings):
    _require(settings, "input", "out_cloud")
    sequences = dataio.load_dataset(settings["input"])
    nlf, cloud = estimate_camera_nlf(sequences, use_weights=settings["weighted"],
                                     block_step=settings["block_step"])
    save_cloud_csv(settings["out_cloud"], cloud, nlf)
    outputs = {"cloud": settings["out_cloud"]}
    if settings.get("out_model"):
        fitted = HeteroGaussianParams(a=max(nlf.a, 0.0), b=max(nlf.b, 0.0))
        save_noise_model(settings["out_model"], fitted)
        outputs["model"] = settings["out_model"]
    print(f"estimated a={nlf.a:.6e} b={nlf.b:.6e} points={len(cloud)}")
    return {"dataset": settings["input"]}, outputs


def cmd_fit_nlf(settings):
    _require(settings, "cloud", "out_model")
    cloud = load_cloud_csv(settings["cloud"])
    nlf = fit_affine_nlf(cloud, use_weights=settings["weighted"])
    fitted = HeteroGaussianParams(a=max(nlf.a, 0.0), b=max(nlf.b, 0.0))
    save_noise_model(settings["out_model"], fitted)
    print(f"fitted a={fitted.a:.6e} b={fitted.b:.6e} "
          f"rms_residual={nlf.fit_residual:.3e}")
    return {"cloud": settings["cloud"]}, {"model": settings["out_model"]}


def cmd_make_synthetic(settings):
    _require(settings, "input", "output")
    model = load_noise_model(settings["model"]) if settings.get("model") else None
    summary = pipeline.make_synthetic(
        settings["input"], settings["output"], _profile(settings),
        noise_model=model, surrogate_root=settings.get("surrogate"),
        calibrate_from_surrogate=settings["calibrate_from_surrogate"],
        target_stats=(_parse_pair(settings["target_stats"], "p1,p99")
                      if settings.get("target_stats") else None),
        seed=settings["seed"], jobs=settings["jobs"],
        dither=not settings["no_dither"], frame_rate=settings["frame_rate"],
        black_level=settings["black_level"], white_level=settings["white_level"],
        clip=settings["clip"],
    )
    print(f"wrote {summary['frames']} frames x2 "
          f"({len(summary['sequences'])} sequences) to {settings['output']}")
    inputs = {"srgb": settings["input"]}
    if settings.get("surrogate"):
        inputs["surrogate"] = settings["surrogate"]
    if settings.get("model"):
        inputs["model"] = settings["model"]
    return inputs, {"dataset": settings["output"]}


def cmd_flow(settings):
    _require(settings, "target", "reference", "output")
    target = _load_flow_frame(settings["target"], settings)
    reference = _load_flow_frame(settings["reference"], settings)
    flow = tvl1_flow(target, reference, _tvl1_params(settings))
    dataio.write_flo(settings["output"], flow.u, flow.v)
    return ({"target": settings["target"], "reference": settings["reference"]},
            {"flow": settings["output"]})


def cmd_warp(settings):
    _require(settings, "image", "flow", "output")
    u, v = dataio.read_flo(settings["flow"])
    flow = FlowField(u, v)
    path = Path(settings["image"])
    if path.suffix.lower() == ".ppm":
        rgb = dataio.load_rgb_frame(path)
        warped, _ = warp_rgb(rgb.data, flow, method=settings["interp"])
        dataio.save_rgb_frame(settings["output"], RgbFrame(np.clip(warped, 0, 1)))
    else:
        frame = dataio.load_raw_frame(path, CfaPattern(settings["cfa"]),
                                      settings["black_level"], settings["white_level"])
        method = "hamilton_adams" if settings["method"] == "ha" else "bilinear"
        warped = warp_raw(frame, flow, method=method, interpolation=settings["interp"])
        dataio.save_raw_frame(settings["output"], warped)
    return ({"image": settings["image"], "flow": settings["flow"]},
            {"frame": settings["output"]})


def cmd_demosaic(settings):
    _require(settings, "input", "output")
    frame = dataio.load_raw_frame(settings["input"], CfaPattern(settings["cfa"]),
                                  settings["black_level"], settings["white_level"])
    method = "hamilton_adams" if settings["method"] == "ha" else "bilinear"
    rgb = demosaic(frame.data, frame.cfa, method=method)
    dataio.save_rgb_frame(settings["output"], RgbFrame(np.clip(rgb, 0.0, 1.0)))
    return {"raw": settings["input"]}, {"rgb": settings["output"]}


def cmd_mosaic(settings):
    _require(settings, "input", "output")
    rgb = dataio.load_rgb_frame(settings["input"])
    from .bayer import mosaic as mosaic_op
    data = mosaic_op(rgb.data, CfaPattern(settings["cfa"]))
    frame = RawFrame(data, CfaPattern(settings["cfa"]),
                     settings["black_level"], settings["white_level"])
    dataio.save_raw_frame(settings["output"], frame)
    return {"rgb": settings["input"]}, {"raw": settings["output"]}


def cmd_mf2f_loss(settings):
    _require(settings, "input", "output")
    denoiser = _denoiser(settings)
    params = _tvl1_params(settings)
    rows = []
    for seq in dataio.load_dataset(settings["input"]):
        cache = FlowCache()
        for t in range(len(seq)):
            result = mf2f_loss(denoiser, seq, t, flow_params=params, flow_cache=cache)
            rows.append((seq.id, t, _fmt(result.loss), _fmt(result.mask_coverage)))
    _write_rows(settings["output"], ("sequence", "frame", "loss", "mask_coverage"), rows)
    return {"dataset": settings["input"]}, {"report": settings["output"]}


def cmd_bs_loss(settings):
    _require(settings, "input", "output")
    denoiser = _denoiser(settings)
    rows = []
    for seq in dataio.load_dataset(settings["input"]):
        for t in range(len(seq)):
            rows.append((seq.id, t, _fmt(blindspot_loss(denoiser, seq, t))))
    _write_rows(settings["output"], ("sequence", "frame", "loss"), rows)
    return {"dataset": settings["input"]}, {"report": settings["output"]}


def cmd_probe_rf(settings):
    x, y = (int(v) for v in _parse_pair(settings["pixel"], "x,y"))
    side = settings["frame_size"]
    report = probe_receptive_field(
        _denoiser(settings), (x, y), settings["radius"], settings["eps"],
        frame_shape=(side, side),
    )
    print(f"pixel=({x},{y}) has_blind_spot={report.has_blind_spot} "
          f"center_delta={report.center_delta:.3e} "
          f"influential={len(report.influential)}")
    outputs = {}
    if settings.get("output"):
        _write_rows(settings["output"], ("x", "y"),
                    [(qx, qy) for qx, qy in report.influential])
        outputs["report"] = settings["output"]
    return {}, outputs


def cmd_eval(settings):
    _require(settings, "input", "reference", "output")
    report = pipeline.eval_datasets(settings["input"], settings["reference"],
                                    jobs=settings["jobs"])
    rows = [(r["sequence"], r["frame"], _fmt(r["psnr"]), _fmt(r["ssim"]))
            for r in report["frames"]]
    for s in report["sequences"]:
        rows.append((s["sequence"], "mean", _fmt(s["psnr"]), _fmt(s["ssim"])))
    rows.append(("dataset", "mean", _fmt(report["psnr"]), _fmt(report["ssim"])))
    _write_rows(settings["output"], ("sequence", "frame", "psnr", "ssim"), rows)
    print(f"average PSNR {_fmt(report['psnr'])} dB, SSIM {_fmt(report['ssim'])}")
    return ({"test": settings["input"], "reference": settings["reference"]},
            {"report": settings["output"]})


def cmd_subsample(settings):
    _require(settings, "input", "output")
    sequences = pipeline.temporal_subsample(dataio.load_dataset(settings["input"]),
                                            settings["stride"])
    with pipeline.atomic_output_dir(settings["output"]) as staging:
        dataio.save_dataset(staging, sequences)
    return {"dataset": settings["input"]}, {"dataset": settings["output"]}


def cmd_avg_gt(settings):
    _require(settings, "input", "output")
    sequences = [pipeline.frame_average_gt(seq)
                 for seq in dataio.load_dataset(settings["input"])]
    with pipeline.atomic_output_dir(settings["output"]) as staging:
        dataio.save_dataset(staging, sequences)
    return {"dataset": settings["input"]}, {"dataset": settings["output"]}


HANDLERS = {
    "unprocess": cmd_unprocess,
    "add-noise": cmd_add_noise,
    "calibrate-flatfield": cmd_calibrate_flatfield,
    "estimate-nlf": cmd_estimate_nlf,
    "fit-nlf": cmd_fit_nlf,
    "make-synthetic": cmd_make_synthetic,
    "flow": cmd_flow,
    "warp": cmd_warp,
    "demosaic": cmd_demosaic,
    "mosaic": cmd_mosaic,
    "mf2f-loss": cmd_mf2f_loss,
    "bs-loss": cmd_bs_loss,
    "probe-rf": cmd_probe_rf,
    "eval": cmd_eval,
    "subsample": cmd_subsample,
    "avg-gt": cmd_avg_gt,
}


def _manifest_path(settings, outputs: dict) -> Path | None:
    if settings.get("manifest"):
        return Path(settings["manifest"])
    if not outputs:
        return None
    primary = Path(next(iter(outputs.values())))
    if primary.is_dir():
        return primary / "manifest.json"
    return primary.with_name(primary.name + ".manifest.json")


def run(argv=None) -> int:
    parser = build_parser()
    parsed = parser.parse_args(argv)
    settings = resolve_settings(parsed.command, parsed)
    start = time.perf_counter()
    inputs, outputs = HANDLERS[parsed.command](settings)
    elapsed = time.perf_counter() - start
    manifest_path = _manifest_path(settings, outputs)
    if manifest_path is not None:
        manifest = build_manifest(
            parsed.command, settings, seed=settings["seed"],
            inputs=inputs, outputs=outputs,
            timings={"wall_seconds": round(elapsed, 6)},
        )
        write_manifest(manifest_path, manifest)
    return 0


def main(argv=None) -> int:
    try:
        return run(argv)
    except Exception as exc:  # CLI surface: fail with a message, not a traceback
        print(f"rawvd: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
