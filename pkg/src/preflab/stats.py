"""Plain statistics used by the study report: IQR scaling and t-tests."""

from __future__ import annotations

import numpy as np
from scipy import stats as sps


def normalize_iqr(values) -> np.ndarray:
    """Affine rescale so the interquartile range maps onto [0, 1].

    Quartiles use linear interpolation. Raises on degenerate input
    (fewer than 4 values or Q3 == Q1).
    """
    x = np.asarray(values, dtype=np.float64)
    if x.size < 4:
        raise ValueError("need at least 4 values for IQR normalization")
    q1, q3 = np.percentile(x, [25, 75], method="linear")
    if q3 <= q1:
        raise ValueError("degenerate input: Q3 == Q1")
    return (x - q1) / (q3 - q1)


def welch_t(a, b) -> tuple[float, float]:
    """Welch's unequal-variance t-test; returns (t, two-sided p).

    Identical samples give (0.0, 1.0); zero pooled variance with unequal
    means gives (nan, nan).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise ValueError("need at least 2 values per sample")
    va, vb = a.var(ddof=1), b.var(ddof=1)
    na, nb = a.size, b.size
    denom = va / na + vb / nb
    if denom == 0.0:
        if a.mean() == b.mean():
            return 0.0, 1.0
        return float("nan"), float("nan")
    t = (a.mean() - b.mean()) / np.sqrt(denom)
    df = denom**2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1))
    p = 2.0 * sps.t.sf(abs(t), df)
    return float(t), float(p)


def paired_t(diffs) -> tuple[float, float]:
    """One-sample t-test on paired differences; returns (t, two-sided p)."""
    d = np.asarray(diffs, dtype=np.float64)
    if d.size < 2:
        raise ValueError("need at least 2 paired differences")
    sd = d.std(ddof=1)
    if sd == 0.0:
        if d.mean() == 0.0:
            return 0.0, 1.0
        return float("nan"), float("nan")
    t = d.mean() / (sd / np.sqrt(d.size))
    p = 2.0 * sps.t.sf(abs(t), d.size - 1)
    return float(t), float(p)
