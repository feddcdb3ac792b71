"""Inverse-noise extraction and editing for next-scale token pyramids.

The package bundles a toy multi-scale residual-quantization codec, a
deterministic next-scale predictor, exact pseudo-inverses of Gumbel-max
sampling, noise-guided editing pipelines, quality metrics, and a CLI
harness, all driven by counter-based keyed randomness so every result
is reproducible bit for bit.
"""

from .codec import (
    Codebook,
    ScaleSchedule,
    decode,
    default_codebook,
    downsample_blockmean,
    dyadic_schedule,
    encode,
    encode_with_residuals,
    upsample_replicate,
)
from .editing import (
    EditConfig,
    EditResult,
    LambdaSchedule,
    edit_regeneration,
    edit_target_only,
    edit_with_inverse_noise,
    lambda_at,
)
from .errors import FormatError, InvariantError, ValidationError
from .gumbel import (
    gumbel_argmax_sample,
    gumbel_located,
    gumbel_standard,
    gumbel_trunc,
    ks_statistic,
)
from .inversion import (
    InverseNoiseSet,
    gaussian_ar_apply,
    gaussian_ar_invert,
    invert_pyramid,
    located_inverse,
    onehot_inverse,
    reconstruct_from_noise,
)
from .metrics import mse, psnr, ssim, token_agreement
from .predictor import (
    Condition,
    PredictorParams,
    condition_embed,
    generate,
    next_scale_logits,
)
from .rng import RngKey, uniform_open

__version__ = "0.1.0"

__all__ = [
    "Codebook",
    "Condition",
    "EditConfig",
    "EditResult",
    "FormatError",
    "InvariantError",
    "InverseNoiseSet",
    "LambdaSchedule",
    "PredictorParams",
    "RngKey",
    "ScaleSchedule",
    "ValidationError",
    "condition_embed",
    "decode",
    "default_codebook",
    "downsample_blockmean",
    "dyadic_schedule",
    "edit_regeneration",
    "edit_target_only",
    "edit_with_inverse_noise",
    "encode",
    "encode_with_residuals",
    "gaussian_ar_apply",
    "gaussian_ar_invert",
    "generate",
    "gumbel_argmax_sample",
    "gumbel_located",
    "gumbel_standard",
    "gumbel_trunc",
    "invert_pyramid",
    "ks_statistic",
    "lambda_at",
    "located_inverse",
    "mse",
    "next_scale_logits",
    "onehot_inverse",
    "psnr",
    "reconstruct_from_noise",
    "ssim",
    "token_agreement",
    "uniform_open",
    "upsample_replicate",
]
