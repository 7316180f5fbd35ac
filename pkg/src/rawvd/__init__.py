"""rawvd: data machinery for raw video denoising experiments.

Library surface: sRGB-to-raw unprocessing, synthetic raw noise and its
calibration, Bayer demosaicing, TV-L1 optical flow and raw-domain warping,
self-supervised loss evaluators over black-box denoisers, and PSNR/SSIM
metrics. The ``rawvd`` command line exposes the same operations over
dataset directories.
"""

__version__ = "0.1.0"

from .bayer import (
    AffineMap,
    denormalize,
    mosaic,
    normalize,
    pack_planes,
    percentile_tonemap_apply,
    percentile_tonemap_fit,
    unpack_planes,
)
from .blindspot import RfProbeReport, probe_receptive_field, reference_blindspot_net
from .calibrate import (
    AffineNlf,
    NlfPointCloud,
    estimate_camera_nlf,
    estimate_nlf_frame,
    fit_affine_nlf,
    flatfield_calibrate,
)
from .demosaic import demosaic, demosaic_bilinear, demosaic_ha, remosaic
from .flow import (
    FlowField,
    OcclusionMask,
    TvL1Params,
    flow_input_raw,
    occlusion_mask,
    tvl1_flow,
)
from .frames import CfaPattern, RawFrame, RgbFrame, VideoSequence
from .losses import (
    DenoiserFn,
    FrameStack,
    blindspot_loss,
    build_frame_stack,
    build_mf2f_stack,
    gaussian_blur_denoiser,
    identity_denoiser,
    mf2f_loss,
    temporal_mean_denoiser,
)
from .metrics import gamma_display, psnr, ssim
from .noise import (
    HeteroGaussianParams,
    NoiseModel,
    PoissonTukeyParams,
    sample_hetero_gaussian,
    sample_poisson,
    sample_poisson_tukey,
    sample_tukey_lambda,
    synthesize_noisy_dataset,
)
from .rngstreams import derive_rng
from .unprocess import (
    CameraProfile,
    GainSample,
    apply_inverse_ccm,
    apply_inverse_whitebalance,
    dequantize,
    default_profile,
    linear_to_srgb,
    sample_gains,
    srgb_to_linear,
    unprocess_sequence,
)
from .warp import demosaic_warp_remosaic, warp_image, warp_raw, warp_rgb
