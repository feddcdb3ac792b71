"""Reconstruction and preservation metrics.

MSE, PSNR, and SSIM over d-channel feature grids, each with an optional
region mask; masked variants score only the cells outside the edit
region (the background).  Token agreement measures exact reconstruction
of pyramids.  All of these are checked against independent naive-loop
implementations in the test suite.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError

PSNR_CAP = 99.0
SSIM_DEFAULT_WINDOW = 7
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def validate_region_mask(mask: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Edit-region mask: boolean (h, w) with both regions non-empty."""
    mask = np.asarray(mask)
    if mask.dtype != bool or mask.shape != shape:
        raise ValidationError(f"mask must be boolean with shape {shape}")
    if not mask.any() or mask.all():
        raise ValidationError("region mask needs at least one cell on each side")
    return mask


def _paired(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValidationError(f"grid shapes differ: {a.shape} vs {b.shape}")
    if a.ndim != 3:
        raise ValidationError("grids must be (d, h, w)")
    return a, b


def _background(a: np.ndarray, mask) -> np.ndarray:
    """Select cells outside the edit region, flattened per channel."""
    mask = np.asarray(mask)
    if mask.dtype != bool or mask.shape != a.shape[1:]:
        raise ValidationError(f"mask must be boolean with shape {a.shape[1:]}")
    keep = ~mask
    if not keep.any():
        raise ValidationError("mask leaves no background cells")
    return a[:, keep]


def mse(a: np.ndarray, b: np.ndarray, mask=None) -> float:
    """Mean squared difference; with a mask, over background cells only."""
    a, b = _paired(a, b)
    if mask is not None:
        a, b = _background(a, mask), _background(b, mask)
    return float(np.mean((a - b) ** 2))


def psnr(a: np.ndarray, b: np.ndarray, peak: float | None = None, mask=None) -> float:
    """10 log10(peak^2 / MSE), capped at 99.0 when the MSE is zero.

    ``peak`` defaults to the maximum absolute value over both grids.
    """
    err = mse(a, b, mask=mask)
    if err == 0.0:
        return PSNR_CAP
    if peak is None:
        peak = max(float(np.max(np.abs(a))), float(np.max(np.abs(b))))
    if not (np.isfinite(peak) and peak > 0):
        raise ValidationError("peak must be positive and finite")
    return float(min(10.0 * np.log10(peak**2 / err), PSNR_CAP))


def _window_stats(x: np.ndarray, window: int) -> tuple[np.ndarray, np.ndarray]:
    """Means and mean-of-squares of all full windows of one channel."""
    views = np.lib.stride_tricks.sliding_window_view(x, (window, window))
    mu = views.mean(axis=(-1, -2))
    sq = (views**2).mean(axis=(-1, -2))
    return mu, sq


def ssim(
    a: np.ndarray,
    b: np.ndarray,
    window: int | None = None,
    k1: float = SSIM_K1,
    k2: float = SSIM_K2,
    peak: float | None = None,
) -> float:
    """Mean local structural similarity with a uniform window.

    Windows are fully interior (no padding).  The default window is 7,
    falling back to the largest odd size that fits; an explicit window
    must be odd and fit the grid.  Identical all-zero grids score 1.0
    by convention.
    """
    a, b = _paired(a, b)
    h, w = a.shape[1:]
    if window is None:
        window = min(SSIM_DEFAULT_WINDOW, h, w)
        if window % 2 == 0:
            window -= 1
    elif not (1 <= window <= min(h, w)) or window % 2 == 0:
        raise ValidationError(
            f"ssim window must be odd and fit the grid, got {window} for {(h, w)}"
        )
    if peak is None:
        peak = max(float(np.max(np.abs(a))), float(np.max(np.abs(b))))
    if peak == 0.0:
        return 1.0  # both grids all-zero, hence identical
    if not (np.isfinite(peak) and peak > 0):
        raise ValidationError("peak must be positive and finite")
    c1 = (k1 * peak) ** 2
    c2 = (k2 * peak) ** 2
    scores = []
    for ch in range(a.shape[0]):
        mu_a, sq_a = _window_stats(a[ch], window)
        mu_b, sq_b = _window_stats(b[ch], window)
        views_ab = np.lib.stride_tricks.sliding_window_view(
            a[ch] * b[ch], (window, window)
        )
        mu_ab = views_ab.mean(axis=(-1, -2))
        var_a = sq_a - mu_a**2
        var_b = sq_b - mu_b**2
        cov = mu_ab - mu_a * mu_b
        num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
        den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
        scores.append(np.mean(num / den))
    return float(np.mean(scores))


def token_agreement(p1, p2, per_scale: bool = False):
    """Fraction of equal tokens between two pyramids on one schedule."""
    if len(p1) != len(p2):
        raise ValidationError("pyramids have different scale counts")
    fractions = []
    matches = 0
    total = 0
    for a, b in zip(p1, p2):
        a, b = np.asarray(a), np.asarray(b)
        if a.shape != b.shape:
            raise ValidationError(f"scale shapes differ: {a.shape} vs {b.shape}")
        eq = a == b
        fractions.append(float(np.mean(eq)))
        matches += int(np.sum(eq))
        total += eq.size
    if per_scale:
        return fractions
    return matches / total
