"""Probability-vector math: normalization, entropy, KL and Jensen-Shannon divergence.

Distributions are 1-D float vectors that are non-negative, sum to one
(within ``SUM_TOL``), and have at least two entries.  Raw model outputs are
per-class sigmoid values in [0, 1]; :func:`normalize` turns them into a
distribution by dividing by their sum, which preserves the argmax and the
relative mass between classes.

All entropies and divergences use the natural logarithm (nats), with the
usual convention 0 * log 0 = 0.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "AllZeroOutput",
    "LengthMismatch",
    "SUM_TOL",
    "entropy",
    "jsd",
    "kl_div",
    "normalize",
]

# Absolute tolerance on the sum of a probability vector.  Generous enough
# for double-precision accumulation over ~1e4 classes.
SUM_TOL = 1e-9

# Smoothing mass added to the reference distribution in kl_div's optional
# epsilon mode.
KL_SMOOTH_EPS = 1e-12


class AllZeroOutput(ValueError):
    """Raw output vector sums to zero and cannot be normalized."""


class LengthMismatch(ValueError):
    """Two vectors of different lengths were combined."""


def _as_raw(values) -> np.ndarray:
    raw = np.asarray(values, dtype=np.float64)
    if raw.ndim != 1 or raw.size < 2:
        raise ValueError(f"raw output must be a 1-D vector of length >= 2, got shape {raw.shape}")
    if not np.all(np.isfinite(raw)):
        raise ValueError("raw output contains non-finite values")
    if np.any(raw < 0.0) or np.any(raw > 1.0):
        raise ValueError("raw output values must lie in [0, 1]")
    return raw


def _as_distribution(values) -> np.ndarray:
    d = np.asarray(values, dtype=np.float64)
    if d.ndim != 1 or d.size < 2:
        raise ValueError(f"distribution must be a 1-D vector of length >= 2, got shape {d.shape}")
    if np.any(d < 0.0):
        raise ValueError("distribution has negative entries")
    if abs(float(d.sum()) - 1.0) > SUM_TOL:
        raise ValueError(f"distribution sums to {float(d.sum())!r}, not 1")
    return d


def normalize(raw) -> np.ndarray:
    """Scale a raw per-class output vector so it sums to one.

    Raises :class:`AllZeroOutput` when every entry is zero.
    """
    raw = _as_raw(raw)
    total = float(raw.sum())
    if total == 0.0:
        raise AllZeroOutput("cannot normalize an all-zero output vector")
    return raw / total


def entropy(d) -> float:
    """Shannon entropy H(p) = -sum p_i ln p_i, in [0, ln K]."""
    d = _as_distribution(d)
    nz = d[d > 0.0]
    return float(-np.sum(nz * np.log(nz)))


def kl_div(p, q, smoothing: bool = False) -> float:
    """Kullback-Leibler divergence KL(p || q) = sum p_i ln(p_i / q_i).

    Returns ``math.inf`` when p puts mass where q has none.  With
    ``smoothing=True`` a mass of ``KL_SMOOTH_EPS`` is added to q (then
    renormalized) so the result stays finite for ranking purposes.
    """
    p = _as_distribution(p)
    q = _as_distribution(q)
    if p.size != q.size:
        raise LengthMismatch(f"length mismatch: {p.size} vs {q.size}")
    if smoothing:
        q = q + KL_SMOOTH_EPS
        q = q / q.sum()
    mask = p > 0.0
    if np.any(q[mask] == 0.0):
        return math.inf
    pm = p[mask]
    return float(np.sum(pm * np.log(pm / q[mask])))


def jsd(p, q) -> float:
    """Jensen-Shannon divergence (KL(p||M) + KL(q||M)) / 2 with M = (p+q)/2.

    Symmetric in its arguments and bounded by ln 2; always finite because M
    has support wherever p or q does.
    """
    p = _as_distribution(p)
    q = _as_distribution(q)
    if p.size != q.size:
        raise LengthMismatch(f"length mismatch: {p.size} vs {q.size}")
    m = 0.5 * (p + q)
    return 0.5 * (kl_div(p, m) + kl_div(q, m))
