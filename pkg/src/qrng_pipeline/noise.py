"""Simulated homodyne vacuum-noise source and ADC digitization.

The physical entropy source is replaced by a parametric Gaussian model: the
measured amplitude has variance quantum_slope * lo_power_mw +
classical_variance (in ADC code units squared), centered on mean_code.  An
optional band shape applies a frequency-domain mask to the white noise before
quantization, mimicking the analog high-pass/low-pass chain.

All randomness flows through numpy's seeded Generator, so identical
(params, seed) always produce identical blocks, from any number of workers.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class AdcConfig:
    """ADC geometry: resolution and the analog span mapped onto the code range."""

    bits: int = 10
    full_scale_min: float = 0.0
    full_scale_max: float = 1023.0

    def __post_init__(self):
        if self.bits < 1:
            raise ValueError("bits must be >= 1")
        if not self.full_scale_min < self.full_scale_max:
            raise ValueError("full_scale_min must be < full_scale_max")

    @property
    def code_max(self) -> int:
        return (1 << self.bits) - 1

    @classmethod
    def code_units(cls, bits: int = 10) -> "AdcConfig":
        """An ADC whose analog units coincide with code units."""
        return cls(bits=bits, full_scale_min=0.0, full_scale_max=float((1 << bits) - 1))


@dataclass(frozen=True)
class NoiseModelParams:
    """Source model: sigma_total^2 = quantum_slope * lo_power_mw + classical_variance."""

    quantum_slope: float
    classical_variance: float
    lo_power_mw: float
    mean_code: float = 512.0

    def __post_init__(self):
        if self.quantum_slope < 0:
            raise ValueError("quantum_slope must be >= 0")
        if self.classical_variance < 0:
            raise ValueError("classical_variance must be >= 0")
        if self.lo_power_mw < 0:
            raise ValueError("lo_power_mw must be >= 0")

    @property
    def total_variance(self) -> float:
        return self.quantum_slope * self.lo_power_mw + self.classical_variance

    @property
    def sigma_codes(self) -> float:
        return float(np.sqrt(self.total_variance))


@dataclass(frozen=True)
class BandShape:
    """Pass band as fractions of the sampling rate (0.5 = Nyquist)."""

    low_cut_fraction: float
    high_cut_fraction: float

    def __post_init__(self):
        if not (0.0 <= self.low_cut_fraction < self.high_cut_fraction <= 0.5):
            raise ValueError("require 0 <= low_cut_fraction < high_cut_fraction <= 0.5")


@dataclass(frozen=True)
class RawSampleBlock:
    """A block of ADC output codes held in 16-bit containers."""

    samples: np.ndarray
    adc: AdcConfig
    count: int

    def __post_init__(self):
        if self.samples.dtype != np.uint16:
            raise ValueError("samples must be uint16")
        if self.count != self.samples.size:
            raise ValueError("count does not match samples length")
        if self.samples.size and int(self.samples.max()) > self.adc.code_max:
            raise ValueError("sample exceeds ADC code range")


def _round_half_up_clamp(values_in_codes: np.ndarray, adc: AdcConfig) -> np.ndarray:
    codes = np.floor(values_in_codes + 0.5)
    np.clip(codes, 0, adc.code_max, out=codes)
    return codes.astype(np.uint16)


def quantize(value: float, adc: AdcConfig) -> int:
    """Map an analog value onto the ADC code range (round half-up, clamped)."""
    span = adc.full_scale_max - adc.full_scale_min
    scaled = (value - adc.full_scale_min) / span * adc.code_max
    return int(_round_half_up_clamp(np.asarray([scaled], dtype=np.float64), adc)[0])


def _band_mask_noise(noise: np.ndarray, band: BandShape) -> np.ndarray:
    """Mask white noise in the frequency domain, rescaled to keep its variance."""
    spectrum = np.fft.rfft(noise)
    freqs = np.fft.rfftfreq(noise.size)
    keep = (freqs >= band.low_cut_fraction) & (freqs <= band.high_cut_fraction)
    if not keep.any():
        raise ValueError("band keeps no frequency bins at this block length")
    spectrum[~keep] = 0.0
    shaped = np.fft.irfft(spectrum, n=noise.size)
    std = shaped.std()
    if std == 0.0:
        return shaped
    return shaped * (noise.std() / std)


def simulate_block(
    params: NoiseModelParams,
    adc: AdcConfig,
    count: int,
    prng_seed: int | Sequence[int],
    band: BandShape | None = None,
) -> RawSampleBlock:
    """Draw one block of Gaussian samples (in code units) and quantize it."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(prng_seed)
    noise = rng.standard_normal(count) * params.sigma_codes
    if band is not None:
        noise = _band_mask_noise(noise, band)
    codes = _round_half_up_clamp(noise + params.mean_code, adc)
    return RawSampleBlock(samples=codes, adc=adc, count=count)


def sweep_lo_power(
    params_base: NoiseModelParams,
    powers: Sequence[float],
    adc: AdcConfig,
    count: int,
    prng_seed: int,
) -> list[tuple[float, float]]:
    """Simulate one block per LO power and report (power, empirical variance)."""
    if len(powers) == 0:
        raise ValueError("powers must be nonempty")
    out = []
    for idx, power in enumerate(powers):
        if power < 0:
            raise ValueError("powers must be >= 0")
        params = NoiseModelParams(
            quantum_slope=params_base.quantum_slope,
            classical_variance=params_base.classical_variance,
            lo_power_mw=float(power),
            mean_code=params_base.mean_code,
        )
        block = simulate_block(params, adc, count, [prng_seed, idx])
        variance = float(np.var(block.samples.astype(np.float64)))
        out.append((float(power), variance))
    return out


def write_raw_samples(
    path: str | Path,
    block: RawSampleBlock,
    params: NoiseModelParams | None = None,
    seed: int | Sequence[int] | None = None,
) -> Path:
    """Write samples as little-endian uint16 words plus a JSON sidecar."""
    path = Path(path)
    path.write_bytes(block.samples.astype("<u2").tobytes())
    meta: dict = {
        "bits": block.adc.bits,
        "count": block.count,
        "full_scale_min": block.adc.full_scale_min,
        "full_scale_max": block.adc.full_scale_max,
    }
    if params is not None:
        meta["params"] = asdict(params)
    if seed is not None:
        meta["seed"] = list(seed) if isinstance(seed, (list, tuple)) else seed
    Path(str(path) + ".json").write_text(json.dumps(meta, indent=2) + "\n")
    return path


def read_raw_samples(path: str | Path) -> tuple[RawSampleBlock, dict]:
    path = Path(path)
    meta = json.loads(Path(str(path) + ".json").read_text())
    adc = AdcConfig(
        bits=int(meta["bits"]),
        full_scale_min=float(meta.get("full_scale_min", 0.0)),
        full_scale_max=float(meta.get("full_scale_max", float((1 << int(meta["bits"])) - 1))),
    )
    samples = np.frombuffer(path.read_bytes(), dtype="<u2").astype(np.uint16)
    return RawSampleBlock(samples=samples, adc=adc, count=samples.size), meta
