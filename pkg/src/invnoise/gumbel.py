"""Gumbel distribution primitives.

Standard and located sampling, closed-form truncated sampling, argmax
(Gumbel-max) categorical sampling, and the Kolmogorov-Smirnov statistic
used to judge how Gumbel-like a batch of values is.

Each sampler comes in two layers: a ``*_from_uniform`` core that maps
explicit uniform draws through the closed-form transform (pure math,
easy to pin in tests), and a keyed wrapper that sources the uniforms
from :mod:`invnoise.rng`.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence, Union

import numpy as np

from .errors import ValidationError
from .rng import RngKey, uniform_open, uniform_values

EULER_MASCHERONI = 0.5772156649015329


def standard_from_uniform(u):
    """Standard Gumbel transform g = -log(-log u) for u in (0,1)."""
    return -np.log(-np.log(u))


def located_from_uniform(phi, u):
    """Gumbel(phi, 1) transform; phi must be finite."""
    phi = np.asarray(phi, dtype=np.float64)
    if not np.all(np.isfinite(phi)):
        raise ValidationError("location phi must be finite")
    return phi + standard_from_uniform(u)


def truncated_from_uniform(phi, trunc, u):
    """Gumbel(phi, 1) conditioned on being <= trunc.

    Closed form phi - log(exp(phi - trunc) - log u), computed through
    logaddexp so exp(phi - trunc) never overflows, then clamped so the
    bound holds exactly in float64.
    """
    phi = np.asarray(phi, dtype=np.float64)
    trunc = np.asarray(trunc, dtype=np.float64)
    if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(trunc))):
        raise ValidationError("phi and trunc must be finite")
    value = phi - np.logaddexp(phi - trunc, np.log(-np.log(u)))
    return np.minimum(value, trunc)


def gumbel_standard(key: RngKey) -> float:
    return float(standard_from_uniform(uniform_open(key)))


def gumbel_located(phi: float, key: RngKey) -> float:
    return float(located_from_uniform(phi, uniform_open(key)))


def gumbel_trunc(phi: float, trunc: float, key: RngKey) -> float:
    return float(truncated_from_uniform(phi, trunc, uniform_open(key)))


def gumbel_argmax_sample(logits: Sequence[float], keys: Sequence[RngKey]) -> int:
    """Gumbel-max categorical draw over one row of logits.

    Ties are broken toward the lowest index (np.argmax semantics).
    """
    p = np.asarray(logits, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ValidationError("logits must be a non-empty 1-D row")
    if not np.all(np.isfinite(p)):
        raise ValidationError("logits must be finite")
    if len(keys) != p.size:
        raise ValidationError(f"need {p.size} keys, got {len(keys)}")
    g = np.array([gumbel_standard(k) for k in keys])
    return int(np.argmax(p + g))


def sample_token_map(
    logits: np.ndarray, seed: int, purpose: int, scale: int
) -> np.ndarray:
    """Gumbel-max draw at every cell of an (h, w, C) logits map."""
    h, w, c = logits.shape
    u = uniform_values(
        seed,
        purpose,
        scale,
        np.arange(h)[:, None, None],
        np.arange(w)[None, :, None],
        np.arange(c)[None, None, :],
    )
    return np.argmax(logits + standard_from_uniform(u), axis=-1).astype(np.int32)


# --- reference CDFs ---------------------------------------------------------


def gumbel_cdf(z, loc: float = 0.0):
    """CDF exp(-exp(-(z - loc))) of Gumbel(loc, 1)."""
    # exp overflow at very negative z saturates to the correct limit 0
    with np.errstate(over="ignore"):
        return np.exp(-np.exp(-(np.asarray(z, dtype=np.float64) - loc)))


def truncated_gumbel_cdf(z, loc: float, trunc: float):
    """CDF of Gumbel(loc, 1) conditioned on <= trunc."""
    z = np.asarray(z, dtype=np.float64)
    out = gumbel_cdf(np.minimum(z, trunc), loc) / gumbel_cdf(trunc, loc)
    return out


_erf = np.vectorize(math.erf, otypes=[np.float64])


def normal_cdf(z):
    return 0.5 * (1.0 + _erf(np.asarray(z, dtype=np.float64) / math.sqrt(2.0)))


def uniform_cdf(z):
    return np.clip(np.asarray(z, dtype=np.float64), 0.0, 1.0)


_NAMED_CDFS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "gumbel": gumbel_cdf,
    "uniform": uniform_cdf,
    "normal": normal_cdf,
}


def ks_statistic(samples, cdf: Union[str, Callable[[np.ndarray], np.ndarray]]) -> float:
    """Sup-distance between the empirical CDF of samples and a reference.

    ``cdf`` is either a named reference ("gumbel", "uniform", "normal")
    or a callable mapping values to cumulative probabilities.
    """
    x = np.sort(np.asarray(samples, dtype=np.float64).ravel())
    if x.size == 0:
        raise ValidationError("ks_statistic needs at least one sample")
    if isinstance(cdf, str):
        try:
            cdf_fn = _NAMED_CDFS[cdf]
        except KeyError:
            raise ValidationError(f"unknown cdf identifier {cdf!r}") from None
    else:
        cdf_fn = cdf
    f = np.asarray(cdf_fn(x), dtype=np.float64)
    n = x.size
    steps = np.arange(n, dtype=np.float64)
    d_plus = np.max((steps + 1.0) / n - f)
    d_minus = np.max(f - steps / n)
    return float(max(d_plus, d_minus))
