"""Toy multi-scale residual-quantization codec.

A continuous d-channel feature grid is encoded into a pyramid of token
maps at increasing resolutions: at each scale the current residual is
block-mean downsampled, each coarse cell is snapped to the nearest
codebook vector, and the replicated embedding is subtracted from the
residual.  Decoding sums the replicated embeddings back up.

Block-mean down / replicate up (rather than any smooth resampler) makes
the per-scale residual energy provably non-increasing as long as the
codebook contains the zero vector, which this codec pins at entry 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .rng import PURPOSE_CODEBOOK, normal_values, uniform_values


@dataclass(frozen=True)
class ScaleSchedule:
    """Ordered (h, w) resolutions, coarsest to finest.

    Every coarser resolution must divide the finest exactly so block
    up/downsampling is well defined.
    """

    resolutions: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if not self.resolutions:
            raise ValidationError("schedule needs at least one scale")
        object.__setattr__(
            self, "resolutions", tuple((int(h), int(w)) for h, w in self.resolutions)
        )
        hk, wk = self.resolutions[-1]
        prev = (0, 0)
        for h, w in self.resolutions:
            if h <= 0 or w <= 0:
                raise ValidationError("resolutions must be positive")
            if h < prev[0] or w < prev[1]:
                raise ValidationError("resolutions must be non-decreasing")
            if hk % h or wk % w:
                raise ValidationError(
                    f"finest resolution {(hk, wk)} not divisible by {(h, w)}"
                )
            prev = (h, w)

    @property
    def num_scales(self) -> int:
        return len(self.resolutions)

    @property
    def finest(self) -> tuple[int, int]:
        return self.resolutions[-1]


def dyadic_schedule(num_scales: int = 5) -> ScaleSchedule:
    """1x1, 2x2, 4x4, ... doubling square schedule."""
    if num_scales < 1:
        raise ValidationError("num_scales must be >= 1")
    return ScaleSchedule(tuple((2**k, 2**k) for k in range(num_scales)))


@dataclass(frozen=True)
class Codebook:
    """(C, d) embedding table with entry 0 pinned to the zero vector."""

    vectors: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] < 2:
            raise ValidationError("codebook must be (C, d) with C >= 2")
        if not np.all(np.isfinite(v)):
            raise ValidationError("codebook entries must be finite")
        if np.any(v[0] != 0.0):
            raise ValidationError("codebook entry 0 must be the zero vector")
        object.__setattr__(self, "vectors", v)

    @property
    def size(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def default_codebook(size: int = 64, dim: int = 4, seed: int = 101) -> Codebook:
    """Entry 0 zero, remaining entries drawn uniformly in the unit ball."""
    if size < 2:
        raise ValidationError("codebook size must be >= 2")
    entries = np.arange(1, size)[:, None]
    dims = np.arange(dim)[None, :]
    gauss = normal_values(seed, PURPOSE_CODEBOOK, 0, entries, 0, dims)
    radii_u = uniform_values(seed, PURPOSE_CODEBOOK, 1, entries, 0, 0)
    norms = np.linalg.norm(gauss, axis=1, keepdims=True)
    vectors = np.zeros((size, dim))
    vectors[1:] = gauss / norms * radii_u ** (1.0 / dim)
    return Codebook(vectors)


def _check_divisible(fine: tuple[int, int], coarse: tuple[int, int]):
    if fine[0] % coarse[0] or fine[1] % coarse[1]:
        raise ValidationError(f"shape {fine} not divisible by {coarse}")


def downsample_blockmean(grid: np.ndarray, target: tuple[int, int]) -> np.ndarray:
    """Average (d, H, W) over non-overlapping blocks down to (d, h, w)."""
    d, big_h, big_w = grid.shape
    h, w = target
    _check_divisible((big_h, big_w), (h, w))
    fh, fw = big_h // h, big_w // w
    return grid.reshape(d, h, fh, w, fw).mean(axis=(2, 4))


def upsample_replicate(grid: np.ndarray, target: tuple[int, int]) -> np.ndarray:
    """Replicate (d, h, w) up to (d, H, W) by block copy."""
    d, h, w = grid.shape
    big_h, big_w = target
    _check_divisible((big_h, big_w), (h, w))
    return np.repeat(np.repeat(grid, big_h // h, axis=1), big_w // w, axis=2)


def quantize_cells(cells: np.ndarray, codebook: Codebook) -> np.ndarray:
    """Nearest codebook index per (h, w, d) cell; ties go to the lowest index."""
    diffs = cells[:, :, None, :] - codebook.vectors[None, None, :, :]
    dist2 = np.einsum("hwcd,hwcd->hwc", diffs, diffs)
    return np.argmin(dist2, axis=-1).astype(np.int32)


def embed_tokens(tokens: np.ndarray, codebook: Codebook) -> np.ndarray:
    """Token map (h, w) to its (d, h, w) embedding."""
    if np.any(tokens < 0) or np.any(tokens >= codebook.size):
        raise ValidationError("token index out of codebook range")
    return np.moveaxis(codebook.vectors[tokens], -1, 0)


def validate_grid(grid: np.ndarray, codebook: Codebook, schedule: ScaleSchedule):
    grid = np.asarray(grid, dtype=np.float64)
    expect = (codebook.dim, *schedule.finest)
    if grid.shape != expect:
        raise ValidationError(f"grid shape {grid.shape}, expected {expect}")
    if not np.all(np.isfinite(grid)):
        raise ValidationError("grid values must be finite")
    return grid


def validate_pyramid(pyramid, codebook: Codebook, schedule: ScaleSchedule):
    if len(pyramid) != schedule.num_scales:
        raise ValidationError(
            f"pyramid has {len(pyramid)} scales, schedule has {schedule.num_scales}"
        )
    out = []
    for tokens, (h, w) in zip(pyramid, schedule.resolutions):
        tokens = np.asarray(tokens)
        if tokens.shape != (h, w):
            raise ValidationError(f"token map shape {tokens.shape}, expected {(h, w)}")
        if not np.issubdtype(tokens.dtype, np.integer):
            raise ValidationError("token maps must be integer arrays")
        if np.any(tokens < 0) or np.any(tokens >= codebook.size):
            raise ValidationError("token index out of codebook range")
        out.append(tokens.astype(np.int32, copy=False))
    return out


def encode_with_residuals(
    grid: np.ndarray, codebook: Codebook, schedule: ScaleSchedule
) -> tuple[list[np.ndarray], list[float]]:
    """Encode and report the residual energy before and after each scale.

    Returns (pyramid, energies) where energies has num_scales + 1 entries:
    the sum of squares of the residual before scale 1, after scale 1, ...
    """
    residual = validate_grid(grid, codebook, schedule).copy()
    finest = schedule.finest
    pyramid: list[np.ndarray] = []
    energies = [float(np.sum(residual**2))]
    for h, w in schedule.resolutions:
        coarse = downsample_blockmean(residual, (h, w))
        tokens = quantize_cells(np.moveaxis(coarse, 0, -1), codebook)
        residual -= upsample_replicate(embed_tokens(tokens, codebook), finest)
        pyramid.append(tokens)
        energies.append(float(np.sum(residual**2)))
    return pyramid, energies


def encode(grid: np.ndarray, codebook: Codebook, schedule: ScaleSchedule) -> list[np.ndarray]:
    """Feature grid -> token pyramid (one (h, w) int map per scale)."""
    return encode_with_residuals(grid, codebook, schedule)[0]


def decode(pyramid, codebook: Codebook, schedule: ScaleSchedule) -> np.ndarray:
    """Token pyramid -> feature grid: sum of replicated embeddings."""
    maps = validate_pyramid(pyramid, codebook, schedule)
    finest = schedule.finest
    out = np.zeros((codebook.dim, *finest))
    for tokens in maps:
        out += upsample_replicate(embed_tokens(tokens, codebook), finest)
    return out


def partial_decode(prefix, codebook: Codebook, schedule: ScaleSchedule) -> np.ndarray:
    """Decode the leading scales of a pyramid (prefix may be empty)."""
    finest = schedule.finest
    out = np.zeros((codebook.dim, *finest))
    for tokens, (h, w) in zip(prefix, schedule.resolutions):
        tokens = np.asarray(tokens)
        if tokens.shape != (h, w):
            raise ValidationError(f"prefix map shape {tokens.shape}, expected {(h, w)}")
        out += upsample_replicate(embed_tokens(tokens, codebook), finest)
    return out
