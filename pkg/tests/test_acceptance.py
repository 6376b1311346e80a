"""Acceptance gate: seven verifiable end-to-end claims, one report line each.

Criteria 1-6 are hard gates (the test fails if the measurement misses its
threshold).  Criterion 7 is a throughput report: its reference figures are
informational because absolute rates depend on the host, so the line is
printed but never gated.  Run with -s (the suite default) to see the lines.
"""

import threading
import time

import numpy as np

from conftest import brute_extract
from qrng_pipeline.analysis import autocorrelation
from qrng_pipeline.bits import BitStream
from qrng_pipeline.entropy import (
    fit_variance_line,
    histogram_from_block,
    min_entropy_empirical,
    min_entropy_gaussian,
    solve_sigma_for_min_entropy,
)
from qrng_pipeline.nist import nist_subset
from qrng_pipeline.noise import NoiseModelParams, simulate_block, sweep_lo_power
from qrng_pipeline.pipeline import (
    PipelineConfig,
    bench_extractor,
    bench_scaling,
    run_pipeline,
)
from qrng_pipeline.streaming import StreamServer, sink_stream
from qrng_pipeline.toeplitz import (
    BatchExtractor,
    ExtractorConfig,
    ToeplitzSeed,
    extract_blocked_k,
    extract_direct,
)


def _report(index: int, slug: str, ok: bool, detail: str, t0: float) -> bool:
    status = "PASS" if ok else "FAIL"
    elapsed = time.perf_counter() - t0
    print(f"\nACCEPTANCE {index} {slug}: {status} | {detail} | runtime {elapsed:.1f}s")
    return ok


def test_criterion_1_extractor_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1001)
    mismatches = 0
    exhaustive_cases = 0

    # (a) every geometry m, n <= 8, every possible seed, 100 random inputs;
    # the reference is an integer matrix product reduced mod 2
    for m in range(1, 9):
        for n in range(1, 9):
            length = m + n - 1
            count = 1 << length
            seed_bits = (
                (np.arange(count, dtype=np.uint32)[:, None]
                 >> np.arange(length, dtype=np.uint32)[None, :]) & 1
            ).astype(np.uint8)
            idx = (np.arange(m)[:, None] - np.arange(n)[None, :]) + n - 1
            tmats = seed_bits[:, idx]
            x = rng.integers(0, 2, size=(100, n), dtype=np.uint8)
            oracle = np.einsum("smn,xn->sxm", tmats, x) & 1
            weights = 1 << np.arange(m, dtype=np.uint64)
            oracle_ints = (oracle.astype(np.uint64) * weights).sum(axis=2).tolist()
            inputs = [BitStream.from_bit_array(row) for row in x]
            for s in range(count):
                seed = ToeplitzSeed(BitStream.from_bit_array(seed_bits[s]), m, n)
                expect = oracle_ints[s]
                for xi, stream in enumerate(inputs):
                    if extract_direct(seed, stream).to_int() != expect[xi]:
                        mismatches += 1
                    if extract_blocked_k(seed, stream, 1).to_int() != expect[xi]:
                        mismatches += 1
                exhaustive_cases += 100

    # (b) production-scale geometry, every submatrix width, plus the
    # batch kernel on a sample of the cases
    m, n = 771, 1024
    random_cases = 0
    for case in range(1000):
        seed_bits = rng.integers(0, 2, size=m + n - 1, dtype=np.uint8)
        seed = ToeplitzSeed(BitStream.from_bit_array(seed_bits), m, n)
        x_bits = rng.integers(0, 2, size=n, dtype=np.uint8)
        stream = BitStream.from_bit_array(x_bits)
        expect = BitStream.from_bit_array(brute_extract(seed_bits, m, n, x_bits)).to_int()
        if extract_direct(seed, stream).to_int() != expect:
            mismatches += 1
        for k in (1, 64, 256, 1024):
            if extract_blocked_k(seed, stream, k).to_int() != expect:
                mismatches += 1
        if case < 50:
            batch = BatchExtractor(ExtractorConfig(n=n, m=m, k=64), seed)
            if batch.extract_bit_array(x_bits).to_int() != expect:
                mismatches += 1
        random_cases += 1

    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed <= 300.0
    assert _report(
        1, "extractor-equivalence", ok,
        f"{exhaustive_cases:,} exhaustive + {random_cases:,} random n=1024 cases, "
        f"{mismatches} mismatches (threshold 0), limit 300s", t0,
    )


def test_criterion_2_min_entropy_reproduction():
    t0 = time.perf_counter()
    base = PipelineConfig()
    sigma = solve_sigma_for_min_entropy(7.71, base.adc)
    analytic = min_entropy_gaussian(sigma, base.adc).min_entropy_bits_per_sample
    shipped = min_entropy_gaussian(
        base.noise.sigma_codes, base.adc, base.noise.mean_code
    ).min_entropy_bits_per_sample
    block = simulate_block(base.noise, base.adc, 10_000_000, 20260819)
    empirical = min_entropy_empirical(
        histogram_from_block(block)
    ).min_entropy_bits_per_sample
    elapsed = time.perf_counter() - t0
    ok = (
        abs(analytic - 7.71) <= 1e-9
        and abs(shipped - 7.71) <= 1e-9
        and 7.66 <= empirical <= 7.76
        and elapsed <= 120.0
    )
    assert _report(
        2, "min-entropy-reproduction", ok,
        f"analytic {analytic:.9f} (target 7.71 +/- 1e-9), empirical {empirical:.4f} "
        f"over 1e7 samples (window [7.66, 7.76]), limit 120s", t0,
    )


def test_criterion_3_rate_arithmetic():
    t0 = time.perf_counter()
    config = PipelineConfig(
        total_samples=10_000_000, held_out_fraction=0.0, analysis_bits=0,
    )
    result = run_pipeline(config)
    raw = result.raw_bits_used
    extracted = result.extracted.bit_count
    nominal = result.nominal_extracted_gbps
    label_err = abs(nominal - 18.8) / 18.8
    ok = (
        raw == 100_000_000
        and extracted == 75_300_000
        and nominal == 18.825
        and label_err <= 0.002
    )
    assert _report(
        3, "rate-arithmetic", ok,
        f"raw {raw:,} (expect 100,000,000), extracted {extracted:,} "
        f"(expect 75,300,000 exactly), nominal {nominal} Gbps vs 18.8 "
        f"({label_err * 100:.3f}% off, threshold 0.2%)", t0,
    )


def test_criterion_4_variance_linearity():
    t0 = time.perf_counter()
    true_slope, true_intercept = 2000.0, 400.0
    params = NoiseModelParams(
        quantum_slope=true_slope, classical_variance=true_intercept,
        lo_power_mw=0.0, mean_code=512.0,
    )
    powers = [0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5]
    points = sweep_lo_power(params, powers, PipelineConfig().adc, 10_000_000, 41)
    fit = fit_variance_line(points)
    v0 = points[0][1]
    slope_err = abs(fit.slope - true_slope) / true_slope
    intercept_err = abs(fit.intercept - true_intercept) / true_intercept
    v0_err = abs(fit.intercept - v0) / v0
    ok = (
        slope_err <= 0.02
        and intercept_err <= 0.02
        and fit.r_squared >= 0.999
        and v0_err <= 0.02
    )
    assert _report(
        4, "variance-linearity", ok,
        f"slope {fit.slope:.1f} ({slope_err * 100:.2f}% off 2000), intercept "
        f"{fit.intercept:.1f} ({intercept_err * 100:.2f}% off 400), r2 "
        f"{fit.r_squared:.6f} (>= 0.999), intercept vs P=0 measurement "
        f"{v0_err * 100:.2f}% (threshold 2%)", t0,
    )


def test_criterion_5_statistical_validation():
    t0 = time.perf_counter()
    base = PipelineConfig()
    result = run_pipeline(PipelineConfig(total_samples=1_340_000, analysis_bits=0))
    bits = result.extracted.to_bit_array()[:10_000_000]
    assert bits.size == 10_000_000
    extracted_results = nist_subset(bits, alpha=0.01)
    extracted_failed = [
        r.test_name for r in extracted_results if not r.skipped and not r.passed
    ]
    executed = [r for r in extracted_results if not r.skipped]
    min_p = min(r.p_value for r in executed)

    raw_block = simulate_block(base.noise, base.adc, 1_000_000, 20260819)
    from qrng_pipeline.toeplitz import samples_to_bits
    raw_bits = samples_to_bits(raw_block.samples, base.adc.bits)
    raw_failed = [
        r.test_name for r in nist_subset(raw_bits, alpha=0.01)
        if not r.skipped and not r.passed
    ]

    ac = autocorrelation(bits, 100)
    violations = int(np.sum(np.abs(ac.coefficients) > ac.confidence_bound))
    ok = (
        len(executed) == 10
        and not extracted_failed
        and len(raw_failed) >= 1
        and violations <= 1
    )
    assert _report(
        5, "statistical-validation", ok,
        f"extracted 1e7 bits: 10/10 tests pass (min p {min_p:.4f}, alpha 0.01, "
        f"failed: {extracted_failed or 'none'}); raw bits fail {len(raw_failed)} "
        f"tests (need >= 1: {', '.join(raw_failed)}); autocorr violations "
        f"{violations}/100 lags (allowed 1)", t0,
    )


def test_criterion_6_determinism_across_workers(tmp_path):
    t0 = time.perf_counter()
    outputs = {}
    for workers in (1, 2, 8):
        out_dir = tmp_path / f"w{workers}"
        run_pipeline(
            PipelineConfig(total_samples=200_000, analysis_bits=0, workers=workers),
            out_dir,
        )
        outputs[workers] = (out_dir / "extracted.bits").read_bytes()
    sizes = {w: len(b) for w, b in outputs.items()}
    ok = outputs[1] == outputs[2] == outputs[8] and len(outputs[1]) > 0
    assert _report(
        6, "worker-determinism", ok,
        f"extracted.bits byte-identical for workers 1/2/8 "
        f"({sizes[1]:,} bytes each: {ok})", t0,
    )


def test_criterion_7_throughput_report():
    t0 = time.perf_counter()
    bench_cfg = PipelineConfig(n=1024, k=64, m=771, target_ratio=None)
    single = bench_extractor(bench_cfg, 3.0, workers=1)
    single_mbps = single.extracted_bits_per_s / 1e6
    scale = bench_scaling(bench_cfg, 2.0, [1, 2])
    scale_ratio = scale[1].extracted_bits_per_s / scale[0].extracted_bits_per_s

    server = StreamServer(
        PipelineConfig(
            total_samples=3_000_000_000, held_out_fraction=0.0, analysis_bits=0,
        ),
        payload_bytes=65536,
        duration_s=60.0,
    )
    box = {}
    thread = threading.Thread(target=lambda: box.update(srv=server.serve_once()))
    thread.start()
    sink = sink_stream(server.host, server.port, connect_timeout=30.0)
    thread.join(timeout=120)
    integrity_ok = (
        "srv" in box and sink.payload_sha256 == box["srv"].payload_sha256
    )
    ok = single_mbps >= 200.0 and sink.mbps_sustained >= 100.0 and integrity_ok
    # soft criterion: the line reports the measurements, the test never gates
    # on them; hardware-scale nominal rates (18.8 Gbps) are labels, not
    # software targets
    _report(
        7, "throughput-benchmark (soft, not gated)", ok,
        f"single-worker n=1024 extraction {single_mbps:.0f} Mbps (ref 200); "
        f"2-worker scaling x{scale_ratio:.2f} (single-CPU host); 60s loopback "
        f"sink sustained {sink.mbps_sustained:.0f} Mbps, mean {sink.mbps_mean:.0f} "
        f"Mbps (ref 100), {sink.frames_received:,} frames, integrity "
        f"{'clean' if integrity_ok else 'MISMATCH'}", t0,
    )
