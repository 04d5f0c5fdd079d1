"""Survival curves, median-ratio gain, and the two-sample KS test."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SurvivalCurve", "GainEstimate", "KsResult", "survival_curve", "median",
    "gain_estimate", "ks_two_sample", "q_ks", "predicted_gain",
]


@dataclass(frozen=True)
class SurvivalCurve:
    support: np.ndarray
    probability: np.ndarray

    def __call__(self, v):
        """Evaluate P(value >= v) at arbitrary points (step function)."""
        v = np.asarray(v, dtype=float)
        idx = np.searchsorted(self.support, v, side="left")
        padded = np.append(self.probability, 0.0)
        return padded[idx]


@dataclass(frozen=True)
class GainEstimate:
    g: float
    ci_low: float
    ci_high: float
    n_with: int
    n_without: int


@dataclass(frozen=True)
class KsResult:
    d: float
    p: float


def _sample(samples, name="samples") -> np.ndarray:
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise ValueError(f"{name} must not be empty")
    return x


def survival_curve(samples) -> SurvivalCurve:
    """Complement ECDF, ``P(v) = #{x >= v} / n`` on the sorted unique values."""
    x = np.sort(_sample(samples))
    if x[0] < 0:
        raise ValueError("survival samples must be >= 0")
    support, first = np.unique(x, return_index=True)
    prob = (x.size - first) / x.size
    return SurvivalCurve(support, prob)


def median(samples) -> float:
    return float(np.median(_sample(samples)))


def gain_estimate(with_fb, without_fb, n_boot: int = 1000, seed=None) -> GainEstimate:
    """Median ratio with a percentile bootstrap interval.

    Each arm is resampled independently ``n_boot`` times; the interval is
    the 2.5/97.5 percentile of the resampled ratios, widened if needed so
    that it contains the point estimate.
    """
    a = _sample(with_fb, "with_fb")
    b = _sample(without_fb, "without_fb")
    if n_boot < 1000:
        raise ValueError(f"n_boot must be >= 1000 (got {n_boot})")
    m_b = np.median(b)
    if m_b <= 0:
        raise ZeroDivisionError("median of the without-feedback arm is zero: ratio undefined")
    g = float(np.median(a) / m_b)
    rng = np.random.default_rng(seed)
    ma = np.median(a[rng.integers(0, a.size, size=(n_boot, a.size))], axis=1)
    mb = np.median(b[rng.integers(0, b.size, size=(n_boot, b.size))], axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = ma / mb
    ratios = ratios[~np.isnan(ratios)]
    lo, hi = np.percentile(ratios, [2.5, 97.5])
    return GainEstimate(g, float(min(lo, g)), float(max(hi, g)), int(a.size), int(b.size))


def q_ks(lam: float) -> float:
    """Kolmogorov tail ``2 sum_j (-1)^(j-1) exp(-2 j^2 lam^2)``.

    The alternating series is cut once a term drops below 1e-12; if that
    has not happened within 100 terms (small ``lam``) the tail is 1.
    """
    a2 = -2.0 * lam * lam
    total = 0.0
    sign = 2.0
    for j in range(1, 101):
        term = sign * math.exp(a2 * j * j)
        total += term
        if abs(term) < 1e-12:
            return min(max(total, np.finfo(float).tiny), 1.0)
        sign = -sign
    return 1.0


def _ks_d(a: np.ndarray, b: np.ndarray) -> float:
    a = np.sort(a)
    b = np.sort(b)
    pts = np.concatenate([a, b])
    fa = np.searchsorted(a, pts, side="right") / a.size
    fb = np.searchsorted(b, pts, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def ks_two_sample(a, b, method: str = "asymptotic", n_perm: int = 10_000,
                  seed=None) -> KsResult:
    """Two-sample Kolmogorov-Smirnov test.

    ``d`` is the largest gap between the two right-continuous ECDFs (ties are
    kept as repeated values).  The asymptotic p-value uses the effective size
    ``n_e = n_a n_b / (n_a + n_b)`` and ``q_ks((sqrt(n_e) + 0.12 + 0.11/sqrt(n_e)) d)``.
    ``method="permutation"`` instead counts label shuffles with a statistic at
    least as large.
    """
    a = _sample(a, "a")
    b = _sample(b, "b")
    if a.size < 4 or b.size < 4:
        raise ValueError(f"each sample needs at least 4 values (got {a.size}, {b.size})")
    d = _ks_d(a, b)
    if method == "asymptotic":
        ne = a.size * b.size / (a.size + b.size)
        en = math.sqrt(ne)
        return KsResult(d, q_ks((en + 0.12 + 0.11 / en) * d))
    if method == "permutation":
        rng = np.random.default_rng(seed)
        pooled = np.concatenate([a, b])
        hits = 0
        for _ in range(n_perm):
            perm = rng.permutation(pooled)
            if _ks_d(perm[: a.size], perm[a.size:]) >= d - 1e-12:
                hits += 1
        return KsResult(d, (hits + 1) / (n_perm + 1))
    raise ValueError(f"unknown method {method!r}")


def predicted_gain(mean_tau_t: float, tau_d: float) -> float:
    """Expected enhancement ``<tau_t> / tau_d`` (not clamped at 1)."""
    if not (mean_tau_t > 0 and tau_d > 0):
        raise ValueError("mean_tau_t and tau_d must both be > 0")
    return mean_tau_t / tau_d


def dkw_epsilon(n: int, alpha: float = 0.05) -> float:
    """Dvoretzky-Kiefer-Wolfowitz half-width for an n-sample ECDF."""
    return math.sqrt(math.log(2.0 / alpha) / (2.0 * n))
