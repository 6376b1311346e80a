"""Statistical validation: autocorrelation, Welch PSD, histogram, reports.

Autocorrelation uses the biased estimator (global mean, denominator over the
full series), the common convention for lag plots of random data.  The PSD
is an averaged periodogram over detrended, windowed, overlapping segments,
scaled so the mean over bins equals the windowed-segment variance; white
noise therefore reads as a flat line at its variance.
"""

from __future__ import annotations

import csv
import operator
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .entropy import Histogram, histogram_from_block
from .nist import TestResult, nist_subset
from .noise import RawSampleBlock

__all__ = [
    "AutocorrResult",
    "PsdResult",
    "AnalysisReport",
    "autocorrelation",
    "psd_welch",
    "histogram",
    "nist_subset",
    "write_autocorr_csv",
    "write_psd_csv",
]

AUTOCORR_BOUND_3SIGMA = 4.89


@dataclass(frozen=True)
class AutocorrResult:
    """Coefficients for lags 1..max_lag plus the 3-sigma null bound 4.89/sqrt(N)."""

    coefficients: np.ndarray
    sample_count: int
    confidence_bound: float

    @property
    def max_lag(self) -> int:
        return self.coefficients.size

    def coefficient(self, lag: int) -> float:
        if not 1 <= lag <= self.max_lag:
            raise IndexError("lag out of range")
        return float(self.coefficients[lag - 1])


@dataclass(frozen=True)
class PsdResult:
    frequencies: np.ndarray
    power: np.ndarray
    segment_length: int
    overlap: int

    def __post_init__(self):
        if self.frequencies.size != self.power.size:
            raise ValueError("frequencies and power must have equal length")


@dataclass
class AnalysisReport:
    nist_results: list[TestResult] = field(default_factory=list)
    autocorr: AutocorrResult | None = None
    psd: PsdResult | None = None

    @property
    def all_passed(self) -> bool:
        ran = [r for r in self.nist_results if not r.skipped]
        return bool(ran) and all(r.passed for r in ran)

    def to_json_dict(self) -> dict:
        out: dict = {"nist": [r.to_json_dict() for r in self.nist_results]}
        if self.autocorr is not None:
            out["autocorrelation"] = {
                "coefficients": self.autocorr.coefficients.tolist(),
                "sample_count": self.autocorr.sample_count,
                "confidence_bound": self.autocorr.confidence_bound,
            }
        if self.psd is not None:
            out["psd"] = {
                "frequencies": self.psd.frequencies.tolist(),
                "power": self.psd.power.tolist(),
                "segment_length": self.psd.segment_length,
                "overlap": self.psd.overlap,
            }
        return out


def autocorrelation(samples: np.ndarray, max_lag: int) -> AutocorrResult:
    """rho(k) = sum (x_t - xbar)(x_{t+k} - xbar) / sum (x_t - xbar)^2, k = 1..max_lag."""
    x = np.asarray(samples, dtype=np.float64)
    if max_lag < 1:
        raise ValueError("max_lag must be >= 1")
    if x.size < max_lag + 2:
        raise ValueError("need at least max_lag + 2 samples")
    d = x - x.mean()
    denom = float(d @ d)
    if denom == 0.0:
        raise ValueError("constant sequence has no autocorrelation")
    coeffs = np.empty(max_lag, dtype=np.float64)
    for k in range(1, max_lag + 1):
        coeffs[k - 1] = float(d[:-k] @ d[k:]) / denom
    return AutocorrResult(
        coefficients=coeffs,
        sample_count=x.size,
        confidence_bound=AUTOCORR_BOUND_3SIGMA / np.sqrt(x.size),
    )


def psd_welch(
    samples: np.ndarray,
    segment_length: int,
    overlap: int,
    window: str = "rectangular",
) -> PsdResult:
    """Averaged one-sided periodogram; mean over bins = windowed-segment variance."""
    x = np.asarray(samples, dtype=np.float64)
    if segment_length < 2 or segment_length & (segment_length - 1):
        raise ValueError("segment_length must be a power of two >= 2")
    try:
        overlap = operator.index(overlap)
    except TypeError:
        raise ValueError("overlap is a sample count and must be an integer") from None
    if not 0 <= overlap < segment_length:
        raise ValueError("overlap must be in [0, segment_length)")
    if x.size < segment_length:
        raise ValueError("too few samples for one segment")
    if window == "rectangular":
        w = np.ones(segment_length)
    elif window == "hann":
        w = np.hanning(segment_length)
    else:
        raise ValueError(f"unknown window {window!r}")
    step = segment_length - overlap
    nbins = segment_length // 2 + 1
    scale = np.full(nbins, 2.0)
    scale[0] = 1.0
    scale[-1] = 1.0
    accum = np.zeros(nbins)
    count = 0
    for start in range(0, x.size - segment_length + 1, step):
        seg = x[start : start + segment_length]
        y = (seg - seg.mean()) * w
        spectrum = np.abs(np.fft.rfft(y)) ** 2
        accum += scale * spectrum * nbins / segment_length**2
        count += 1
    return PsdResult(
        frequencies=np.fft.rfftfreq(segment_length),
        power=accum / count,
        segment_length=segment_length,
        overlap=overlap,
    )


def histogram(block: RawSampleBlock) -> Histogram:
    return histogram_from_block(block)


def write_autocorr_csv(path: str | Path, result: AutocorrResult) -> Path:
    path = Path(path)
    with path.open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["lag", "rho"])
        for lag in range(1, result.max_lag + 1):
            writer.writerow([lag, repr(result.coefficient(lag))])
    return path


def write_psd_csv(path: str | Path, result: PsdResult) -> Path:
    path = Path(path)
    with path.open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["freq", "power"])
        for freq, power in zip(result.frequencies, result.power):
            writer.writerow([repr(float(freq)), repr(float(power))])
    return path
