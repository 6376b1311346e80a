"""Command-line entry point.

Compute subcommands (simulate, estimate, extract, analyze, run, bench) build
a request model and either execute it in-process or, with --api-url, POST it
to a running service instance.  serve and sink speak the raw framed-TCP
protocol directly.  Subcommands that validate data exit nonzero when any
executed validation fails.
"""

from __future__ import annotations

import argparse
import json
import sys

from .pipeline import (
    PipelineConfig,
    apply_overrides,
    load_config,
)
from .service import runners
from .service import schemas as s
from .streaming import StreamIntegrityError, serve_stream, sink_stream


def _emit(doc: dict) -> None:
    print(json.dumps(doc, indent=2))


def _post(api_url: str, endpoint: str, request) -> dict:
    import httpx

    resp = httpx.post(
        api_url.rstrip("/") + endpoint,
        json=request.model_dump(mode="json"),
        timeout=None,
    )
    if resp.status_code != 200:
        raise SystemExit(f"service error {resp.status_code}: {resp.text}")
    return resp.json()


def _execute(args, endpoint: str, request, runner) -> dict:
    if args.api_url:
        return _post(args.api_url, endpoint, request)
    return runner(request).model_dump(mode="json", by_alias=True)


def _failed_tests(doc: dict) -> list[str]:
    return [
        t["name"]
        for t in doc.get("nist", [])
        if not t.get("skipped") and t.get("pass") is False
    ]


def _noise_model(args) -> s.NoiseModel:
    return s.NoiseModel(
        quantum_slope=args.quantum_slope,
        classical_variance=args.classical_variance,
        lo_power_mw=args.lo_power,
        mean_code=args.mean_code,
    )


def _band_model(args) -> s.BandModel | None:
    if args.band is None:
        return None
    low, high = (float(x) for x in args.band.split(","))
    return s.BandModel(low_cut_fraction=low, high_cut_fraction=high)


def _add_noise_flags(p: argparse.ArgumentParser) -> None:
    defaults = s.NoiseModel()
    p.add_argument("--quantum-slope", type=float, default=defaults.quantum_slope,
                   help="quantum-noise variance slope, code^2 per mW")
    p.add_argument("--classical-variance", type=float, default=defaults.classical_variance,
                   help="classical noise variance, code^2")
    p.add_argument("--lo-power", type=float, default=defaults.lo_power_mw,
                   help="LO equivalent power, mW")
    p.add_argument("--mean-code", type=float, default=defaults.mean_code)
    p.add_argument("--adc-bits", type=int, default=10)
    p.add_argument("--band", default=None, metavar="LOW,HIGH",
                   help="pass band as fractions of the sample rate, e.g. 0.05,0.45")


def _adc_model(args) -> s.AdcModel:
    return s.AdcModel(
        bits=args.adc_bits,
        full_scale_min=0.0,
        full_scale_max=float((1 << args.adc_bits) - 1),
    )


def _load_run_config(args) -> PipelineConfig:
    config = load_config(args.config) if args.config else PipelineConfig()
    return apply_overrides(
        config,
        workers=getattr(args, "workers", None),
        total_samples=getattr(args, "total_samples", None),
        chunk_samples=getattr(args, "chunk_samples", None),
        seed_source=getattr(args, "seed_source", None),
        seed_extractor=getattr(args, "seed_extractor", None),
        analysis_bits=getattr(args, "analysis_bits", None),
        held_out_fraction=getattr(args, "held_out_fraction", None),
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qrng-pipeline",
        description="Simulated vacuum-noise randomness pipeline",
    )
    parser.add_argument("--api-url", default=None,
                        help="POST the request to a running service instead of running locally")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate raw ADC samples to a file")
    _add_noise_flags(p)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("estimate", help="min-entropy report, optional power sweep fit")
    _add_noise_flags(p)
    p.add_argument("--in", dest="in_path", default=None,
                   help="raw sample file; empirical estimate instead of analytic")
    p.add_argument("--powers", default=None, metavar="P0,P1,...",
                   help="sweep these LO powers (mW) and fit the variance line")
    p.add_argument("--sweep-count", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-bits", type=int, default=None,
                   help="also recommend an output length m for this input block size")
    p.add_argument("--safety", type=float, default=s.EstimateRequest().safety_factor)

    p = sub.add_parser("extract", help="Toeplitz-extract a raw sample file")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--k", type=int, default=50)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--m", type=int, default=None)
    group.add_argument("--ratio", type=float, default=None,
                       help="target output ratio m/n (default 0.753)")
    group.add_argument("--auto-m", action="store_true",
                       help="derive m from the file's empirical min-entropy")
    p.add_argument("--safety", type=float, default=s.ExtractRequest(in_path="", out_path="").safety_factor)
    p.add_argument("--seed-file", default=None)
    p.add_argument("--seed", type=int, default=709)
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("analyze", help="statistical validation of a bitstream or raw file")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--max-bits", type=int, default=10_000_000)
    p.add_argument("--max-lag", type=int, default=100)
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--psd-segment", type=int, default=None)
    p.add_argument("--psd-overlap", type=int, default=0)
    p.add_argument("--psd-window", choices=["rectangular", "hann"], default="rectangular")
    p.add_argument("--csv-dir", default=None)
    p.add_argument("--report", default=None, help="write the analysis report JSON here")

    p = sub.add_parser("run", help="full pipeline: simulate, estimate, extract, analyze")
    p.add_argument("--config", default=None, help="YAML config file")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--total-samples", type=int, default=None)
    p.add_argument("--chunk-samples", type=int, default=None)
    p.add_argument("--seed-source", type=int, default=None)
    p.add_argument("--seed-extractor", type=int, default=None)
    p.add_argument("--analysis-bits", type=int, default=None)
    p.add_argument("--held-out-fraction", type=float, default=None)

    p = sub.add_parser("bench", help="extractor throughput benchmark")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--k", type=int, default=50)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--m", type=int, default=None)
    group.add_argument("--ratio", type=float, default=None)
    p.add_argument("--duration", type=float, default=2.0)
    p.add_argument("--workers", default="1", metavar="W0,W1,...",
                   help="comma-separated worker counts to measure")

    p = sub.add_parser("serve", help="serve extracted bits as framed TCP stream")
    p.add_argument("--config", default=None)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=41000)
    p.add_argument("--payload-bytes", type=int, default=65536)
    p.add_argument("--max-frames", type=int, default=None)
    p.add_argument("--duration", type=float, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--total-samples", type=int, default=None)
    p.add_argument("--chunk-samples", type=int, default=None)
    p.add_argument("--seed-source", type=int, default=None)
    p.add_argument("--seed-extractor", type=int, default=None)

    p = sub.add_parser("sink", help="receive and verify a framed TCP stream")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=41000)
    p.add_argument("--expect-mbps", type=float, default=None)
    p.add_argument("--out", default=None, help="write received payload bytes here")

    p = sub.add_parser("api", help="launch the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except (FileNotFoundError, ValueError) as exc:
        # Same error classes the service maps to HTTP 400; keep the CLI
        # surface equally clean instead of dumping a traceback.
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _dispatch(args) -> int:
    if args.command == "simulate":
        req = s.SimulateRequest(
            noise=_noise_model(args), adc=_adc_model(args), band=_band_model(args),
            count=args.count, seed=args.seed, out_path=args.out,
        )
        _emit(_execute(args, "/simulate", req, runners.run_simulate))
        return 0

    if args.command == "estimate":
        powers = None
        if args.powers is not None:
            powers = [float(x) for x in args.powers.split(",")]
        req = s.EstimateRequest(
            in_path=args.in_path, noise=_noise_model(args), adc=_adc_model(args),
            powers=powers, sweep_count=args.sweep_count, seed=args.seed,
            n_bits=args.n_bits, safety_factor=args.safety,
        )
        _emit(_execute(args, "/estimate", req, runners.run_estimate))
        return 0

    if args.command == "extract":
        ratio = args.ratio
        if args.m is None and ratio is None and not args.auto_m:
            ratio = s.ExtractRequest(in_path="", out_path="").target_ratio
        req = s.ExtractRequest(
            in_path=args.in_path, out_path=args.out, n=args.n, k=args.k,
            m=args.m, target_ratio=ratio, safety_factor=args.safety,
            seed_file=args.seed_file, seed_prng=args.seed, workers=args.workers,
        )
        _emit(_execute(args, "/extract", req, runners.run_extract))
        return 0

    if args.command == "analyze":
        req = s.AnalyzeRequest(
            in_path=args.in_path, max_bits=args.max_bits,
            autocorr_max_lag=args.max_lag, alpha=args.alpha,
            psd_segment_length=args.psd_segment, psd_overlap=args.psd_overlap,
            psd_window=args.psd_window, csv_dir=args.csv_dir,
            report_path=args.report,
        )
        doc = _execute(args, "/analyze", req, runners.run_analyze)
        _emit(doc)
        failed = _failed_tests(doc)
        if failed:
            print(f"FAILED tests: {', '.join(failed)}", file=sys.stderr)
            return 1
        return 0

    if args.command == "run":
        config = _load_run_config(args)
        req = s.RunRequest(config=s.ConfigModel.from_config(config), output_dir=args.out_dir)
        doc = _execute(args, "/run", req, runners.run_run)
        _emit(doc)
        failed = _failed_tests(doc)
        if failed:
            print(f"FAILED tests: {', '.join(failed)}", file=sys.stderr)
            return 1
        return 0

    if args.command == "bench":
        req = s.BenchRequest(
            n=args.n, k=args.k, m=args.m,
            target_ratio=args.ratio if (args.ratio is not None or args.m is None) else None,
            duration_s=args.duration,
            workers=[int(x) for x in args.workers.split(",")],
        )
        _emit(_execute(args, "/bench", req, runners.run_bench))
        return 0

    if args.command == "serve":
        config = _load_run_config(args)
        report = serve_stream(
            config, args.host, args.port, payload_bytes=args.payload_bytes,
            max_frames=args.max_frames, duration_s=args.duration,
        )
        _emit(report.to_json_dict())
        return 0

    if args.command == "sink":
        try:
            report = sink_stream(
                args.host, args.port,
                expected_rate_mbps=args.expect_mbps, out_path=args.out,
            )
        except StreamIntegrityError as exc:
            print(f"stream integrity failure: {exc}", file=sys.stderr)
            return 1
        _emit(report.to_json_dict())
        return 0

    if args.command == "api":
        import uvicorn

        uvicorn.run("qrng_pipeline.service.app:app", host=args.host, port=args.port)
        return 0

    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    raise SystemExit(main())
