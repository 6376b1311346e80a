"""Executors behind the service endpoints (and the in-process CLI path)."""

from __future__ import annotations

import json
import time
from pathlib import Path

import numpy as np

from ..analysis import (
    AnalysisReport,
    autocorrelation,
    psd_welch,
    write_autocorr_csv,
    write_psd_csv,
)
from ..bits import read_bitstream, write_bitstream
from ..entropy import (
    fit_variance_line,
    histogram_from_block,
    min_entropy_empirical,
    min_entropy_gaussian,
    recommend_output_length,
)
from ..nist import nist_subset
from ..noise import read_raw_samples, simulate_block, sweep_lo_power, write_raw_samples
from ..pipeline import PipelineConfig, bench_extractor, run_pipeline
from ..toeplitz import (
    ExtractorConfig,
    read_seed,
    samples_to_bits,
    seed_from_entropy,
    stream_extract,
    write_seed,
)
from . import schemas as s


def _entropy_model(report) -> s.EntropyReportModel:
    return s.EntropyReportModel(
        min_entropy_bits=report.min_entropy_bits_per_sample,
        p_max=report.p_max,
        method=report.method,
        sample_count=report.sample_count,
    )


def _test_models(results) -> list[s.TestResultModel]:
    return [
        s.TestResultModel(
            name=r.test_name, p=r.p_value, passed=r.passed,
            statistic=r.statistic, alpha=r.alpha, skipped=r.skipped,
        )
        for r in results
    ]


def _autocorr_model(result) -> s.AutocorrModel:
    return s.AutocorrModel(
        coefficients=[float(c) for c in result.coefficients],
        sample_count=result.sample_count,
        confidence_bound=result.confidence_bound,
    )


def run_simulate(req: s.SimulateRequest) -> s.SimulateResponse:
    params = req.noise.to_params()
    adc = req.adc.to_config()
    band = req.band.to_band() if req.band is not None else None
    block = simulate_block(params, adc, req.count, req.seed, band)
    path = write_raw_samples(req.out_path, block, params=params, seed=req.seed)
    samples = block.samples.astype(np.float64)
    return s.SimulateResponse(
        path=str(path),
        sidecar=str(path) + ".json",
        count=block.count,
        mean=float(samples.mean()),
        variance=float(samples.var()),
    )


def run_estimate(req: s.EstimateRequest) -> s.EstimateResponse:
    resp = s.EstimateResponse()
    adc = req.adc.to_config()
    if req.in_path is not None:
        block, _ = read_raw_samples(req.in_path)
        empirical = min_entropy_empirical(histogram_from_block(block))
        resp.empirical = _entropy_model(empirical)
        if req.n_bits is not None:
            resp.recommended_m = recommend_output_length(
                empirical.min_entropy_bits_per_sample,
                req.n_bits, block.adc.bits, req.safety_factor,
            )
        return resp
    params = req.noise.to_params()
    analytic = min_entropy_gaussian(params.sigma_codes, adc, params.mean_code)
    resp.analytic = _entropy_model(analytic)
    if req.powers:
        points = sweep_lo_power(params, req.powers, adc, req.sweep_count, req.seed)
        fit = fit_variance_line(points)
        resp.fit = s.VarianceFitModel(slope=fit.slope, intercept=fit.intercept, r2=fit.r_squared)
        resp.sweep = [[p, v] for p, v in points]
    if req.n_bits is not None:
        resp.recommended_m = recommend_output_length(
            analytic.min_entropy_bits_per_sample, req.n_bits, adc.bits, req.safety_factor,
        )
    return resp


def run_extract(req: s.ExtractRequest) -> s.ExtractResponse:
    block, _ = read_raw_samples(req.in_path)
    bits_per_sample = block.adc.bits
    if req.m is not None:
        m = req.m
    elif req.target_ratio is not None:
        m = int(np.floor(req.target_ratio * req.n + 1e-9))
    else:
        empirical = min_entropy_empirical(histogram_from_block(block))
        m = recommend_output_length(
            empirical.min_entropy_bits_per_sample,
            req.n, bits_per_sample, req.safety_factor,
        )
    config = ExtractorConfig(n=req.n, m=m, k=req.k)
    if req.seed_file is not None:
        seed = read_seed(req.seed_file)
        if (seed.n, seed.m) != (req.n, m):
            raise ValueError(
                f"seed file geometry ({seed.m}, {seed.n}) does not match ({m}, {req.n})"
            )
        seed_path = Path(req.seed_file)
    else:
        seed = seed_from_entropy(req.seed_prng, m, req.n)
        seed_path = write_seed(str(req.out_path) + ".seed", seed)
    t0 = time.perf_counter()
    extracted = stream_extract(config, seed, block, workers=req.workers)
    wall = time.perf_counter() - t0
    if extracted.bit_count == 0:
        raise ValueError(
            f"input has {block.count * bits_per_sample} bits, "
            f"fewer than one {req.n}-bit block"
        )
    out = write_bitstream(req.out_path, extracted, extra={"n": req.n, "m": m, "k": req.k})
    blocks = extracted.bit_count // m
    return s.ExtractResponse(
        out_path=str(out),
        seed_path=str(seed_path),
        bit_count=extracted.bit_count,
        blocks=blocks,
        geometry=s.GeometryReportModel(n=req.n, m=m, k=req.k, ratio=m / req.n),
        raw_bits_used=blocks * req.n,
        wall_seconds=wall,
    )


def _sidecar_kind(in_path: str) -> str:
    sidecar = Path(str(in_path) + ".json")
    if not sidecar.exists():
        raise ValueError(f"no sidecar found at {sidecar}")
    meta = json.loads(sidecar.read_text())
    if "bit_count" in meta:
        return "bitstream"
    if "bits" in meta and "count" in meta:
        return "raw"
    raise ValueError("sidecar is neither a bitstream nor a raw-sample descriptor")


def run_analyze(req: s.AnalyzeRequest) -> s.AnalyzeResponse:
    kind = _sidecar_kind(req.in_path)
    resp = s.AnalyzeResponse(kind=kind)
    report = AnalysisReport()
    if kind == "bitstream":
        stream = read_bitstream(req.in_path)
        arr = stream.to_bit_array()[: req.max_bits]
        resp.bit_count = int(arr.size)
        report.nist_results = nist_subset(arr, alpha=req.alpha)
        if arr.size >= req.autocorr_max_lag + 2:
            report.autocorr = autocorrelation(arr, req.autocorr_max_lag)
    else:
        block, _ = read_raw_samples(req.in_path)
        samples = block.samples
        resp.sample_count = int(samples.size)
        resp.entropy = _entropy_model(min_entropy_empirical(histogram_from_block(block)))
        bit_arr = samples_to_bits(samples, block.adc.bits)[: req.max_bits]
        report.nist_results = nist_subset(bit_arr, alpha=req.alpha)
        if samples.size >= req.autocorr_max_lag + 2:
            report.autocorr = autocorrelation(samples, req.autocorr_max_lag)
        if req.psd_segment_length is not None:
            report.psd = psd_welch(
                samples, req.psd_segment_length, req.psd_overlap, req.psd_window
            )
    resp.nist = _test_models(report.nist_results)
    if report.autocorr is not None:
        resp.autocorr = _autocorr_model(report.autocorr)
    if report.psd is not None:
        resp.psd = s.PsdModel(
            frequencies=[float(f) for f in report.psd.frequencies],
            power=[float(p) for p in report.psd.power],
            segment_length=report.psd.segment_length,
            overlap=report.psd.overlap,
        )
    resp.all_passed = report.all_passed
    if req.csv_dir is not None:
        csv_dir = Path(req.csv_dir)
        csv_dir.mkdir(parents=True, exist_ok=True)
        if report.autocorr is not None:
            write_autocorr_csv(csv_dir / "autocorrelation.csv", report.autocorr)
        if report.psd is not None:
            write_psd_csv(csv_dir / "psd.csv", report.psd)
    if req.report_path is not None:
        Path(req.report_path).write_text(
            json.dumps(report.to_json_dict(), indent=2) + "\n"
        )
        resp.report_path = req.report_path
    return resp


def run_run(req: s.RunRequest) -> s.RunResponse:
    result = run_pipeline(req.config.to_config(), req.output_dir)
    cfg = result.extractor_config
    return s.RunResponse(
        geometry=s.GeometryReportModel(n=cfg.n, m=cfg.m, k=cfg.k, ratio=cfg.ratio),
        entropy_analytic=_entropy_model(result.entropy_analytic),
        entropy_empirical=(
            _entropy_model(result.entropy_empirical)
            if result.entropy_empirical is not None else None
        ),
        throughput=s.ThroughputModel(**result.throughput.to_json_dict()),
        nominal_raw_gbps=result.nominal_raw_gbps,
        nominal_extracted_gbps=result.nominal_extracted_gbps,
        nist=_test_models(result.analysis.nist_results),
        autocorr=(
            _autocorr_model(result.analysis.autocorr)
            if result.analysis.autocorr is not None else None
        ),
        raw_bits_used=result.raw_bits_used,
        extracted_bits=result.extracted.bit_count,
        held_out_samples=result.held_out_samples,
        outputs={k: str(v) for k, v in result.output_paths.items()},
        all_passed=result.analysis.all_passed,
        params_note=result.to_json_dict()["params_note"],
    )


def run_bench(req: s.BenchRequest) -> s.BenchResponse:
    config = PipelineConfig(
        n=req.n, k=req.k, m=req.m, target_ratio=req.target_ratio,
    )
    reports = [
        bench_extractor(config, req.duration_s, workers=w) for w in req.workers
    ]
    return s.BenchResponse(
        reports=[s.ThroughputModel(**r.to_json_dict()) for r in reports]
    )
