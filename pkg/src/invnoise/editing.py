"""Prompt-conditioned editing of token pyramids.

Three pipelines over a shared sampling loop:

* regeneration: copy scales below the start scale from the source
  encoding, then sample the rest under the target condition with fresh
  Gumbel noise.
* noise-guided editing: additionally extract inverse noise from the
  source (under the source condition) and sample each edited scale from
  argmax(p + (1 - lambda) * g + lambda * n).  lambda = 1 replays the
  source tokens exactly; lambda = 0 collapses to regeneration.
* target-only variant: same pipeline, but the inverse noise is
  extracted under the target condition as well, with a lower default
  margin.

Fresh edit noise draws use their own purpose tag, so the lambda = 0
endpoint matches regeneration bit for bit under a shared seed.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .codec import decode, encode
from .errors import ValidationError
from .gumbel import standard_from_uniform
from .inversion import KIND_LAI, InverseNoiseSet, invert_pyramid
from .predictor import Condition, PredictorParams, condition_embed, next_scale_logits
from .rng import PURPOSE_EDIT_NOISE, uniform_values

CONTEXT_GENERATED = "generated-prefix"
CONTEXT_SOURCE = "source-prefix"

DEFAULT_TAU = 18.0
# The target-only pipeline works best with a smaller margin; 12 sits in
# the middle of its useful range.
TARGET_ONLY_DEFAULT_TAU = 12.0


def default_start_scale(num_scales: int) -> int:
    """Map the reference default (6 of 14 scales) onto a schedule."""
    return max(1, min(num_scales, round(6 * num_scales / 14)))


@dataclass(frozen=True)
class LambdaSchedule:
    """Per-scale interpolation weight between fresh and inverse noise.

    ``linear`` ramps from 1 at the start scale down to 0 at the final
    scale (a single-scale edit range pins it at 1).  ``constant`` holds
    a fixed value in [0, 1].
    """

    kind: str = "linear"
    value: float = 1.0

    def __post_init__(self):
        if self.kind not in ("linear", "constant"):
            raise ValidationError(f"unknown lambda schedule kind {self.kind!r}")
        if self.kind == "constant" and not (0.0 <= self.value <= 1.0):
            raise ValidationError("constant lambda must lie in [0, 1]")


def lambda_at(schedule: LambdaSchedule, k: int, start_scale: int, final_scale: int) -> float:
    """Interpolation weight for scale k within [start_scale, final_scale]."""
    if not start_scale <= k <= final_scale:
        raise ValidationError(
            f"scale {k} outside edit range [{start_scale}, {final_scale}]"
        )
    if schedule.kind == "constant":
        return schedule.value
    if final_scale == start_scale:
        return 1.0
    lam = 1.0 - (k - start_scale) / (final_scale - start_scale)
    return min(1.0, max(0.0, lam))


@dataclass(frozen=True)
class EditConfig:
    source_label: str = ""
    target_label: str = ""
    start_scale: Optional[int] = None  # None -> default_start_scale(K)
    tau: Optional[float] = None  # None -> pipeline default
    lambda_schedule: LambdaSchedule = LambdaSchedule()
    seed: int = 0
    context_mode: str = CONTEXT_GENERATED

    def __post_init__(self):
        if self.context_mode not in (CONTEXT_GENERATED, CONTEXT_SOURCE):
            raise ValidationError(f"unknown context mode {self.context_mode!r}")
        if self.tau is not None and not (np.isfinite(self.tau) and self.tau >= 0):
            raise ValidationError("tau must be a non-negative finite real")

    def resolved(self, num_scales: int, default_tau: float = DEFAULT_TAU) -> "EditConfig":
        out = self
        if out.start_scale is None:
            out = replace(out, start_scale=default_start_scale(num_scales))
        if not 1 <= out.start_scale <= num_scales:
            raise ValidationError(
                f"start scale {out.start_scale} outside 1..{num_scales}"
            )
        if out.tau is None:
            out = replace(out, tau=default_tau)
        return out


@dataclass(frozen=True)
class EditResult:
    pyramid: tuple
    grid: np.ndarray
    lambdas: tuple  # per scale; NaN for scales copied from the source
    change_fraction: tuple  # per scale, vs the source encoding
    source_pyramid: tuple


def _fresh_gumbel(seed: int, scale: int, shape: tuple[int, int, int]) -> np.ndarray:
    h, w, c = shape
    u = uniform_values(
        seed,
        PURPOSE_EDIT_NOISE,
        scale,
        np.arange(h)[:, None, None],
        np.arange(w)[None, :, None],
        np.arange(c)[None, None, :],
    )
    return standard_from_uniform(u)


def _run_edit_loop(
    source_pyramid,
    target_cond: Condition,
    params: PredictorParams,
    start_scale: int,
    seed: int,
    noises: Optional[tuple],
    lambdas_by_scale: dict[int, float],
    context_mode: str,
) -> EditResult:
    num_scales = params.schedule.num_scales
    edited = [np.array(t, copy=True) for t in source_pyramid[: start_scale - 1]]
    lambdas = [float("nan")] * (start_scale - 1)
    for t in range(start_scale, num_scales + 1):
        context = (
            edited[: t - 1] if context_mode == CONTEXT_GENERATED else source_pyramid[: t - 1]
        )
        logits = next_scale_logits(context, target_cond, t, params)
        g = _fresh_gumbel(seed, t, logits.shape)
        lam = lambdas_by_scale[t]
        if noises is None:
            mixed = g
        else:
            mixed = (1.0 - lam) * g + lam * noises[t - 1]
        edited.append(np.argmax(logits + mixed, axis=-1).astype(np.int32))
        lambdas.append(lam)
    change = tuple(
        float(np.mean(np.asarray(a) != np.asarray(b)))
        for a, b in zip(edited, source_pyramid)
    )
    return EditResult(
        pyramid=tuple(edited),
        grid=decode(edited, params.codebook, params.schedule),
        lambdas=tuple(lambdas),
        change_fraction=change,
        source_pyramid=tuple(np.asarray(t) for t in source_pyramid),
    )


def edit_with_inverse_noise(
    source_grid: np.ndarray,
    config: EditConfig,
    params: PredictorParams,
    noise_set: Optional[InverseNoiseSet] = None,
) -> EditResult:
    """Noise-guided edit: invert under the source condition, then sample
    edited scales under the target condition with interpolated noise."""
    num_scales = params.schedule.num_scales
    cfg = config.resolved(num_scales)
    source_pyramid = encode(source_grid, params.codebook, params.schedule)
    if noise_set is None:
        src_cond = condition_embed(cfg.source_label, params)
        noise_set = invert_pyramid(
            source_pyramid, src_cond, cfg.tau, params, cfg.seed, kind=KIND_LAI
        )
    elif noise_set.num_scales != num_scales:
        raise ValidationError("noise set does not match the schedule")
    target_cond = condition_embed(cfg.target_label, params)
    lambdas = {
        t: lambda_at(cfg.lambda_schedule, t, cfg.start_scale, num_scales)
        for t in range(cfg.start_scale, num_scales + 1)
    }
    return _run_edit_loop(
        source_pyramid,
        target_cond,
        params,
        cfg.start_scale,
        cfg.seed,
        noise_set.noises,
        lambdas,
        cfg.context_mode,
    )


def edit_regeneration(
    source_grid: np.ndarray,
    target_label: str,
    start_scale: int,
    params: PredictorParams,
    seed: int,
) -> EditResult:
    """Baseline: copy scales < start_scale, regenerate the rest fresh.

    ``start_scale = K + 1`` performs no regeneration at all and returns
    the source encoding unchanged.
    """
    num_scales = params.schedule.num_scales
    if not 1 <= start_scale <= num_scales + 1:
        raise ValidationError(f"start scale {start_scale} outside 1..{num_scales + 1}")
    source_pyramid = encode(source_grid, params.codebook, params.schedule)
    target_cond = condition_embed(target_label, params)
    lambdas = {t: 0.0 for t in range(start_scale, num_scales + 1)}
    return _run_edit_loop(
        source_pyramid,
        target_cond,
        params,
        start_scale,
        seed,
        None,
        lambdas,
        CONTEXT_GENERATED,
    )


def edit_target_only(
    source_grid: np.ndarray,
    config: EditConfig,
    params: PredictorParams,
    noise_set: Optional[InverseNoiseSet] = None,
) -> EditResult:
    """Variant that extracts the inverse noise under the target condition."""
    num_scales = params.schedule.num_scales
    cfg = config.resolved(num_scales, default_tau=TARGET_ONLY_DEFAULT_TAU)
    if noise_set is None:
        source_pyramid = encode(source_grid, params.codebook, params.schedule)
        tgt_cond = condition_embed(cfg.target_label, params)
        noise_set = invert_pyramid(
            source_pyramid, tgt_cond, cfg.tau, params, cfg.seed, kind=KIND_LAI
        )
    return edit_with_inverse_noise(
        source_grid, replace(cfg, source_label=cfg.target_label), params, noise_set
    )
