"""Simulated vacuum-noise QRNG data path.

Modules: noise (simulated homodyne source + ADC), entropy (min-entropy and
variance fitting), toeplitz (GF(2) Toeplitz-hashing extractor), nist and
analysis (statistical validation), pipeline (end-to-end orchestration),
streaming (framed TCP transport), service (HTTP API), cli (entry point).
"""

__version__ = "0.1.0"

from .bits import BitStream
from .entropy import (
    EntropyReport,
    Histogram,
    VarianceFit,
    fit_variance_line,
    min_entropy_empirical,
    min_entropy_gaussian,
    recommend_output_length,
    solve_sigma_for_min_entropy,
)
from .noise import (
    AdcConfig,
    BandShape,
    NoiseModelParams,
    RawSampleBlock,
    quantize,
    simulate_block,
    sweep_lo_power,
)
from .pipeline import (
    PipelineConfig,
    PipelineResult,
    ThroughputReport,
    bench_extractor,
    run_pipeline,
)
from .toeplitz import (
    BatchExtractor,
    ExtractorConfig,
    ToeplitzSeed,
    extract_blocked,
    extract_direct,
    matrix_entry,
    seed_from_entropy,
    stream_extract,
)

__all__ = [
    "__version__",
    "AdcConfig",
    "BandShape",
    "BatchExtractor",
    "BitStream",
    "EntropyReport",
    "ExtractorConfig",
    "Histogram",
    "NoiseModelParams",
    "PipelineConfig",
    "PipelineResult",
    "RawSampleBlock",
    "ThroughputReport",
    "ToeplitzSeed",
    "VarianceFit",
    "bench_extractor",
    "extract_blocked",
    "extract_direct",
    "fit_variance_line",
    "matrix_entry",
    "min_entropy_empirical",
    "min_entropy_gaussian",
    "quantize",
    "recommend_output_length",
    "run_pipeline",
    "seed_from_entropy",
    "simulate_block",
    "solve_sigma_for_min_entropy",
    "stream_extract",
    "sweep_lo_power",
]
