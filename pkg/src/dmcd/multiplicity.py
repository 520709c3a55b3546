"""Storey q-values over a batch of p-values."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptyBatch


@dataclass(frozen=True)
class QValueBatch:
    p_values: np.ndarray
    pi0: float
    lam: float
    q_values: np.ndarray


def _check(p_values: Sequence[float]) -> np.ndarray:
    p = np.asarray(p_values, dtype=float).ravel()
    if p.size == 0:
        raise EmptyBatch("no p-values")
    if np.any(~np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
        raise ValueError("p-values must lie in [0, 1]")
    return p


def estimate_pi0(p_values: Sequence[float], lam: float = 0.5) -> float:
    """Proportion of true nulls, ``#{p > lam} / (m (1 - lam))``.

    Clamped to ``[1/m, 1]``; the floor keeps small batches from producing
    all-zero q-values.
    """
    p = _check(p_values)
    if not 0 < lam < 1:
        raise ValueError("lambda must be in (0, 1)")
    m = p.size
    raw = np.count_nonzero(p > lam) / (m * (1 - lam))
    return float(max(1.0 / m, min(1.0, raw)))


def q_values(p_values: Sequence[float], pi0: float = 1.0) -> np.ndarray:
    """Step-up q-values; ``pi0 = 1`` gives Benjamini-Hochberg adjusted p-values."""
    p = _check(p_values)
    if not 0 < pi0 <= 1:
        raise ValueError("pi0 must be in (0, 1]")
    m = p.size
    order = np.argsort(p, kind="stable")
    ranked = pi0 * m * p[order] / np.arange(1, m + 1)
    ranked = np.minimum.accumulate(ranked[::-1])[::-1]
    out = np.empty(m)
    out[order] = np.minimum(ranked, 1.0)
    return out


def adjust(p_values: Sequence[float], lam: float = 0.5, bh: bool = False) -> QValueBatch:
    """Estimate pi0 (or fix it at 1 when ``bh``) and compute q-values."""
    p = _check(p_values)
    pi0 = 1.0 if bh else estimate_pi0(p, lam)
    return QValueBatch(p_values=p, pi0=pi0, lam=lam, q_values=q_values(p, pi0))
