"""Request/response models shared by the HTTP service and the CLI client.

Every CLI subcommand that does computation builds one of these requests; the
CLI either executes it in-process or POSTs it to a running service.  File
paths inside requests are resolved on the machine doing the work.
"""

from __future__ import annotations

from pydantic import BaseModel, Field

from ..noise import AdcConfig, BandShape, NoiseModelParams
from ..pipeline import (
    DEFAULT_CLASSICAL_VARIANCE,
    DEFAULT_LO_POWER_MW,
    DEFAULT_MEAN_CODE,
    DEFAULT_QUANTUM_SLOPE,
    DEFAULT_SAFETY_FACTOR,
    DEFAULT_SAMPLE_RATE_HZ,
    DEFAULT_TARGET_RATIO,
    PipelineConfig,
)


class NoiseModel(BaseModel):
    quantum_slope: float = DEFAULT_QUANTUM_SLOPE
    classical_variance: float = DEFAULT_CLASSICAL_VARIANCE
    lo_power_mw: float = DEFAULT_LO_POWER_MW
    mean_code: float = DEFAULT_MEAN_CODE

    def to_params(self) -> NoiseModelParams:
        return NoiseModelParams(
            quantum_slope=self.quantum_slope,
            classical_variance=self.classical_variance,
            lo_power_mw=self.lo_power_mw,
            mean_code=self.mean_code,
        )


class AdcModel(BaseModel):
    bits: int = 10
    full_scale_min: float = 0.0
    full_scale_max: float = 1023.0

    def to_config(self) -> AdcConfig:
        return AdcConfig(
            bits=self.bits,
            full_scale_min=self.full_scale_min,
            full_scale_max=self.full_scale_max,
        )


class BandModel(BaseModel):
    low_cut_fraction: float
    high_cut_fraction: float

    def to_band(self) -> BandShape:
        return BandShape(
            low_cut_fraction=self.low_cut_fraction,
            high_cut_fraction=self.high_cut_fraction,
        )


class GeometryModel(BaseModel):
    n: int = 1000
    k: int = 50
    m: int | None = None
    target_ratio: float | None = DEFAULT_TARGET_RATIO
    safety_factor: float = DEFAULT_SAFETY_FACTOR
    fresh_seed_per_block: bool = False


class RunSettingsModel(BaseModel):
    total_samples: int = 1_000_000
    chunk_samples: int = 1_000_000
    held_out_fraction: float = 1.0 / 256.0
    workers: int = 1
    analysis_bits: int = 10_000_000
    autocorr_max_lag: int = 100


class ConfigModel(BaseModel):
    noise: NoiseModel = Field(default_factory=NoiseModel)
    adc: AdcModel = Field(default_factory=AdcModel)
    extractor: GeometryModel = Field(default_factory=GeometryModel)
    band: BandModel | None = None
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ
    seed_source: int = 20260819
    seed_extractor: int = 709
    run: RunSettingsModel = Field(default_factory=RunSettingsModel)

    def to_config(self) -> PipelineConfig:
        return PipelineConfig(
            noise=self.noise.to_params(),
            adc=self.adc.to_config(),
            n=self.extractor.n,
            k=self.extractor.k,
            m=self.extractor.m,
            target_ratio=self.extractor.target_ratio,
            safety_factor=self.extractor.safety_factor,
            band=self.band.to_band() if self.band is not None else None,
            sample_rate_hz=self.sample_rate_hz,
            seed_source=self.seed_source,
            seed_extractor=self.seed_extractor,
            total_samples=self.run.total_samples,
            chunk_samples=self.run.chunk_samples,
            held_out_fraction=self.run.held_out_fraction,
            workers=self.run.workers,
            fresh_seed_per_block=self.extractor.fresh_seed_per_block,
            analysis_bits=self.run.analysis_bits,
            autocorr_max_lag=self.run.autocorr_max_lag,
        )

    @classmethod
    def from_config(cls, config: PipelineConfig) -> "ConfigModel":
        return cls(
            noise=NoiseModel(
                quantum_slope=config.noise.quantum_slope,
                classical_variance=config.noise.classical_variance,
                lo_power_mw=config.noise.lo_power_mw,
                mean_code=config.noise.mean_code,
            ),
            adc=AdcModel(
                bits=config.adc.bits,
                full_scale_min=config.adc.full_scale_min,
                full_scale_max=config.adc.full_scale_max,
            ),
            extractor=GeometryModel(
                n=config.n, k=config.k, m=config.m,
                target_ratio=config.target_ratio,
                safety_factor=config.safety_factor,
                fresh_seed_per_block=config.fresh_seed_per_block,
            ),
            band=None if config.band is None else BandModel(
                low_cut_fraction=config.band.low_cut_fraction,
                high_cut_fraction=config.band.high_cut_fraction,
            ),
            sample_rate_hz=config.sample_rate_hz,
            seed_source=config.seed_source,
            seed_extractor=config.seed_extractor,
            run=RunSettingsModel(
                total_samples=config.total_samples,
                chunk_samples=config.chunk_samples,
                held_out_fraction=config.held_out_fraction,
                workers=config.workers,
                analysis_bits=config.analysis_bits,
                autocorr_max_lag=config.autocorr_max_lag,
            ),
        )


# --- report fragments -------------------------------------------------------

class EntropyReportModel(BaseModel):
    min_entropy_bits: float
    p_max: float
    method: str
    sample_count: int


class VarianceFitModel(BaseModel):
    slope: float
    intercept: float
    r2: float


class TestResultModel(BaseModel):
    name: str
    p: float | None
    passed: bool | None = Field(serialization_alias="pass")
    statistic: float | None
    alpha: float
    skipped: bool


class AutocorrModel(BaseModel):
    coefficients: list[float]
    sample_count: int
    confidence_bound: float


class PsdModel(BaseModel):
    frequencies: list[float]
    power: list[float]
    segment_length: int
    overlap: int


class ThroughputModel(BaseModel):
    raw_bits_per_s: float
    extracted_bits_per_s: float
    ratio: float
    wall_seconds: float
    worker_count: int


class GeometryReportModel(BaseModel):
    n: int
    m: int
    k: int
    ratio: float


# --- endpoint payloads -------------------------------------------------------

class SimulateRequest(BaseModel):
    noise: NoiseModel = Field(default_factory=NoiseModel)
    adc: AdcModel = Field(default_factory=AdcModel)
    band: BandModel | None = None
    count: int
    seed: int
    out_path: str


class SimulateResponse(BaseModel):
    path: str
    sidecar: str
    count: int
    mean: float
    variance: float


class EstimateRequest(BaseModel):
    in_path: str | None = None
    noise: NoiseModel = Field(default_factory=NoiseModel)
    adc: AdcModel = Field(default_factory=AdcModel)
    powers: list[float] | None = None
    sweep_count: int = 1_000_000
    seed: int = 0
    n_bits: int | None = None
    safety_factor: float = DEFAULT_SAFETY_FACTOR


class EstimateResponse(BaseModel):
    empirical: EntropyReportModel | None = None
    analytic: EntropyReportModel | None = None
    fit: VarianceFitModel | None = None
    sweep: list[list[float]] | None = None
    recommended_m: int | None = None


class ExtractRequest(BaseModel):
    in_path: str
    out_path: str
    n: int = 1000
    k: int = 50
    m: int | None = None
    target_ratio: float | None = DEFAULT_TARGET_RATIO
    safety_factor: float = DEFAULT_SAFETY_FACTOR
    seed_file: str | None = None
    seed_prng: int = 709
    workers: int = 1


class ExtractResponse(BaseModel):
    out_path: str
    seed_path: str
    bit_count: int
    blocks: int
    geometry: GeometryReportModel
    raw_bits_used: int
    wall_seconds: float


class AnalyzeRequest(BaseModel):
    in_path: str
    max_bits: int = 10_000_000
    autocorr_max_lag: int = 100
    alpha: float = 0.01
    psd_segment_length: int | None = None
    psd_overlap: int = 0
    psd_window: str = "rectangular"
    csv_dir: str | None = None
    report_path: str | None = None


class AnalyzeResponse(BaseModel):
    kind: str
    bit_count: int | None = None
    sample_count: int | None = None
    nist: list[TestResultModel] = Field(default_factory=list)
    autocorr: AutocorrModel | None = None
    psd: PsdModel | None = None
    entropy: EntropyReportModel | None = None
    all_passed: bool = False
    report_path: str | None = None


class RunRequest(BaseModel):
    config: ConfigModel = Field(default_factory=ConfigModel)
    output_dir: str


class RunResponse(BaseModel):
    geometry: GeometryReportModel
    entropy_analytic: EntropyReportModel
    entropy_empirical: EntropyReportModel | None
    throughput: ThroughputModel
    nominal_raw_gbps: float
    nominal_extracted_gbps: float
    nist: list[TestResultModel]
    autocorr: AutocorrModel | None
    raw_bits_used: int
    extracted_bits: int
    held_out_samples: int
    outputs: dict[str, str]
    all_passed: bool
    params_note: str


class BenchRequest(BaseModel):
    n: int = 1000
    k: int = 50
    m: int | None = None
    target_ratio: float | None = DEFAULT_TARGET_RATIO
    duration_s: float = 2.0
    workers: list[int] = Field(default_factory=lambda: [1])


class BenchResponse(BaseModel):
    reports: list[ThroughputModel]


class HealthResponse(BaseModel):
    status: str
    version: str
    numba: bool
