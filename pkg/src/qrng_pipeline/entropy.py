"""Min-entropy evaluation and the variance-vs-power line fit.

Two routes to H_inf = -log2(p_max): empirical (largest histogram bin over the
total) and analytic (Gaussian bin masses integrated over unit-code bins, with
the two edge bins absorbing the clamped tails).  The analytic route is what
ties the source model to an extraction ratio; `solve_sigma_for_min_entropy`
inverts it on the rising branch so a target entropy picks the source sigma.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr

from .noise import AdcConfig, RawSampleBlock


@dataclass(frozen=True)
class Histogram:
    """Counts per ADC code, length 2^bits."""

    counts: np.ndarray
    total: int

    def __post_init__(self):
        if self.counts.ndim != 1:
            raise ValueError("counts must be one-dimensional")
        if int(self.counts.sum()) != self.total:
            raise ValueError("total must equal the sum of counts")
        if self.counts.size and int(self.counts.min()) < 0:
            raise ValueError("counts must be nonnegative")


@dataclass(frozen=True)
class EntropyReport:
    min_entropy_bits_per_sample: float
    p_max: float
    method: str
    sample_count: int

    def to_json_dict(self) -> dict:
        return {
            "min_entropy_bits": self.min_entropy_bits_per_sample,
            "p_max": self.p_max,
            "method": self.method,
            "sample_count": self.sample_count,
        }


@dataclass(frozen=True)
class VarianceFit:
    slope: float
    intercept: float
    r_squared: float

    def to_json_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept, "r2": self.r_squared}


def histogram_from_block(block: RawSampleBlock) -> Histogram:
    if block.count == 0:
        raise ValueError("empty block")
    counts = np.bincount(block.samples, minlength=1 << block.adc.bits)
    return Histogram(counts=counts.astype(np.int64), total=block.count)


def min_entropy_empirical(h: Histogram) -> EntropyReport:
    if h.total < 1:
        raise ValueError("histogram is empty")
    p_max = float(h.counts.max()) / h.total
    return EntropyReport(
        min_entropy_bits_per_sample=float(-np.log2(p_max)),
        p_max=p_max,
        method="empirical",
        sample_count=h.total,
    )


def gaussian_code_probabilities(
    sigma_codes: float, adc: AdcConfig, mean_code: float
) -> np.ndarray:
    """Probability mass of each ADC code for a Gaussian in code units.

    Code c collects the density over [c - 0.5, c + 0.5); the first and last
    codes extend to -inf and +inf because quantization clamps.
    """
    if sigma_codes < 0:
        raise ValueError("sigma_codes must be >= 0")
    n_codes = 1 << adc.bits
    if sigma_codes == 0.0:
        masses = np.zeros(n_codes)
        hit = int(np.clip(np.floor(mean_code + 0.5), 0, n_codes - 1))
        masses[hit] = 1.0
        return masses
    edges = np.arange(n_codes + 1, dtype=np.float64) - 0.5
    cdf = ndtr((edges - mean_code) / sigma_codes)
    cdf[0] = 0.0
    cdf[-1] = 1.0
    return np.diff(cdf)


def min_entropy_gaussian(
    sigma_codes: float, adc: AdcConfig, mean_code: float = 512.0
) -> EntropyReport:
    p_max = float(gaussian_code_probabilities(sigma_codes, adc, mean_code).max())
    return EntropyReport(
        min_entropy_bits_per_sample=float(-np.log2(p_max)),
        p_max=p_max,
        method="analytic_gaussian",
        sample_count=0,
    )


def solve_sigma_for_min_entropy(
    target_bits: float, adc: AdcConfig, mean_code: float = 512.0
) -> float:
    """Find sigma (codes) whose analytic min-entropy equals target_bits.

    Min-entropy rises with sigma while the peak bin flattens, then falls once
    the clamped edge bins dominate, so the curve is unimodal.  We locate the
    peak by ternary search and take the root on the rising branch, which is
    the operationally meaningful solution (smallest sigma achieving the
    target).
    """
    if target_bits <= 0:
        raise ValueError("target_bits must be > 0")

    def entropy(sigma: float) -> float:
        return min_entropy_gaussian(sigma, adc, mean_code).min_entropy_bits_per_sample

    lo, hi = 1e-6, 1e6
    for _ in range(200):
        m1 = lo + (hi - lo) / 3
        m2 = hi - (hi - lo) / 3
        if entropy(m1) < entropy(m2):
            lo = m1
        else:
            hi = m2
    sigma_peak = 0.5 * (lo + hi)
    if entropy(sigma_peak) < target_bits:
        raise ValueError(
            f"target {target_bits} bits exceeds the achievable maximum "
            f"{entropy(sigma_peak):.4f} bits for this ADC"
        )
    return float(brentq(lambda s: entropy(s) - target_bits, 1e-9, sigma_peak, xtol=1e-12))


def fit_variance_line(points: list[tuple[float, float]]) -> VarianceFit:
    """Ordinary least squares of variance against LO power."""
    if len(points) < 2:
        raise ValueError("need at least 2 points")
    powers = np.asarray([p for p, _ in points], dtype=np.float64)
    variances = np.asarray([v for _, v in points], dtype=np.float64)
    if np.unique(powers).size < 2:
        raise ValueError("need at least 2 distinct power values")
    design = np.column_stack([powers, np.ones_like(powers)])
    (slope, intercept), *_ = np.linalg.lstsq(design, variances, rcond=None)
    residuals = variances - (slope * powers + intercept)
    ss_res = float(residuals @ residuals)
    centered = variances - variances.mean()
    ss_tot = float(centered @ centered)
    if ss_tot == 0.0:
        r_squared = 1.0 if ss_res < 1e-24 else 0.0
    else:
        r_squared = 1.0 - ss_res / ss_tot
    return VarianceFit(slope=float(slope), intercept=float(intercept), r_squared=r_squared)


def recommend_output_length(
    min_entropy_bits: float,
    n_bits: int,
    bits_per_sample: int,
    safety_factor: float = 0.977,
) -> int:
    """Output block length m = floor(n * (H_inf / bits_per_sample) * safety).

    The default safety factor trims the entropy-limited ratio to the
    operating point used by the streaming presets.
    """
    if min_entropy_bits < 0:
        raise ValueError("min_entropy_bits must be >= 0")
    if min_entropy_bits > bits_per_sample:
        raise ValueError("min_entropy_bits cannot exceed bits_per_sample")
    if not 0.0 < safety_factor <= 1.0:
        raise ValueError("safety_factor must be in (0, 1]")
    return int(np.floor(n_bits * (min_entropy_bits / bits_per_sample) * safety_factor))
