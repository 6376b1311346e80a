"""Command-line interface, exercised in-process through main(argv).

Output capture uses redirect_stdout/redirect_stderr because the suite runs
with capture disabled (-s) for the acceptance report lines.
"""

import contextlib
import io
import json
import socket
import struct
import subprocess
import sys
import threading
import time
import zlib

import pytest

from qrng_pipeline.cli import main
from qrng_pipeline.pipeline import PipelineConfig, save_config


def run_cli(argv):
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = main(argv)
    return code, out.getvalue(), err.getvalue()


def free_port() -> int:
    probe = socket.socket()
    probe.bind(("127.0.0.1", 0))
    port = probe.getsockname()[1]
    probe.close()
    return port


@pytest.fixture(scope="module")
def raw_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "capture.raw"
    code, out, _ = run_cli(["simulate", "--count", "3000", "--seed", "11",
                            "--out", str(path)])
    assert code == 0
    return path, json.loads(out)


@pytest.fixture(scope="module")
def bits_file(raw_file, tmp_path_factory):
    raw, _ = raw_file
    path = tmp_path_factory.mktemp("cli-bits") / "out.bits"
    code, out, _ = run_cli(["extract", "--in", str(raw), "--out", str(path)])
    assert code == 0
    return path, json.loads(out)


def test_simulate_emits_json_and_writes_file(raw_file):
    path, doc = raw_file
    assert path.exists()
    assert doc["count"] == 3000
    assert abs(doc["mean"] - 512.0) < 10.0


def test_estimate_analytic():
    code, out, _ = run_cli(["estimate"])
    assert code == 0
    doc = json.loads(out)
    assert abs(doc["analytic"]["min_entropy_bits"] - 7.71) < 1e-6


def test_estimate_empirical_from_file(raw_file):
    path, _ = raw_file
    code, out, _ = run_cli(["estimate", "--in", str(path), "--n-bits", "1000"])
    assert code == 0
    doc = json.loads(out)
    assert doc["empirical"]["sample_count"] == 3000
    assert doc["recommended_m"] > 0


def test_extract_defaults(bits_file):
    path, doc = bits_file
    assert path.exists()
    assert doc["geometry"] == {"n": 1000, "m": 753, "k": 50, "ratio": 0.753}
    assert doc["bit_count"] == 30 * 753


def test_extract_m_and_ratio_are_mutually_exclusive(raw_file, tmp_path):
    path, _ = raw_file
    with pytest.raises(SystemExit) as exc:
        run_cli(["extract", "--in", str(path), "--out", str(tmp_path / "x.bits"),
                 "--m", "700", "--ratio", "0.7"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        run_cli(["extract", "--in", str(path), "--out", str(tmp_path / "x.bits"),
                 "--m", "700", "--auto-m"])
    assert exc.value.code == 2


def test_analyze_extracted_passes(bits_file):
    path, _ = bits_file
    code, out, err = run_cli(["analyze", "--in", str(path)])
    assert code == 0
    assert err == ""
    doc = json.loads(out)
    assert doc["kind"] == "bitstream"
    executed = [t for t in doc["nist"] if not t["skipped"]]
    assert executed and all(t["pass"] for t in executed)


def test_analyze_raw_bits_fail_and_exit_nonzero(raw_file):
    # serialized raw ADC samples are not uniform bits; the validation
    # command must say which tests failed and exit nonzero
    path, _ = raw_file
    code, out, err = run_cli(["analyze", "--in", str(path)])
    assert code == 1
    assert err.startswith("FAILED tests:")
    assert "dft_spectral" in err
    assert json.loads(out)["kind"] == "raw"


def test_run_with_overrides(tmp_path):
    out_dir = tmp_path / "run"
    code, out, err = run_cli([
        "run", "--out-dir", str(out_dir),
        "--total-samples", "100000", "--analysis-bits", "100000",
    ])
    assert code == 0, err
    doc = json.loads(out)
    assert doc["geometry"]["m"] == 753
    assert doc["all_passed"] is True
    assert (out_dir / "run_report.json").exists()
    assert (out_dir / "extracted.bits").exists()


def test_run_with_yaml_config(tmp_path):
    cfg_path = tmp_path / "pipeline.yaml"
    save_config(cfg_path, PipelineConfig(
        total_samples=30_000, chunk_samples=10_000, analysis_bits=0,
    ))
    out_dir = tmp_path / "run"
    code, out, _ = run_cli(["run", "--config", str(cfg_path),
                            "--out-dir", str(out_dir)])
    assert code == 0
    doc = json.loads(out)
    held = 30_000 // 256
    blocks = (30_000 - held) * 10 // 1000
    assert doc["extracted_bits"] == blocks * 753
    # flag override beats the file value
    code, out, _ = run_cli(["run", "--config", str(cfg_path),
                            "--out-dir", str(tmp_path / "run2"),
                            "--total-samples", "20000"])
    held = 20_000 // 256
    blocks = (20_000 - held) * 10 // 1000
    assert json.loads(out)["extracted_bits"] == blocks * 753


def test_bench_json(tmp_path):
    code, out, _ = run_cli(["bench", "--duration", "1.0", "--workers", "1"])
    assert code == 0
    (report,) = json.loads(out)["reports"]
    assert report["worker_count"] == 1
    assert report["extracted_bits_per_s"] > 0


def test_serve_and_sink_commands(tmp_path):
    # the sink runs as a real subprocess (it retries connecting until the
    # server binds); redirect-based capture is not thread-safe, so only the
    # in-process serve side uses run_cli
    port = free_port()
    received = tmp_path / "sink.bin"
    sink = subprocess.Popen(
        [sys.executable, "-m", "qrng_pipeline.cli", "sink",
         "--port", str(port), "--out", str(received)],
        stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True,
    )
    try:
        serve_code, serve_out, _ = run_cli([
            "serve", "--port", str(port), "--payload-bytes", "4096",
            "--total-samples", "20000", "--chunk-samples", "10000",
        ])
        sink_out, sink_err = sink.communicate(timeout=60)
    finally:
        if sink.poll() is None:
            sink.kill()
    assert serve_code == 0
    assert sink.returncode == 0, sink_err
    srv = json.loads(serve_out)
    snk = json.loads(sink_out)
    assert snk["frames_received"] == srv["frames_sent"]
    assert snk["payload_sha256"] == srv["payload_sha256"]
    assert received.stat().st_size == snk["payload_bytes"]


def test_sink_reports_integrity_failure(tmp_path):
    # a server that corrupts the CRC of its second frame
    listener = socket.socket()
    listener.bind(("127.0.0.1", 0))
    listener.listen(1)
    port = listener.getsockname()[1]

    def encode(seq, payload):
        header = struct.pack("<QI", seq, len(payload))
        crc = zlib.crc32(header + payload) & 0xFFFFFFFF
        return b"QRNG" + header + payload + struct.pack("<I", crc)

    def bad_server():
        conn, _ = listener.accept()
        conn.sendall(encode(0, b"a" * 64))
        frame = bytearray(encode(1, b"b" * 64))
        frame[-1] ^= 0xFF  # corrupt the stored CRC
        conn.sendall(bytes(frame))
        time.sleep(0.2)
        conn.close()
        listener.close()

    thread = threading.Thread(target=bad_server)
    thread.start()
    code, _, err = run_cli(["sink", "--port", str(port)])
    thread.join(timeout=10)
    assert code == 1
    assert err.startswith("stream integrity failure:")
    assert "crc mismatch at sequence 1" in err


def test_api_url_routes_through_service():
    import uvicorn

    from qrng_pipeline.service.app import create_app

    port = free_port()
    server = uvicorn.Server(uvicorn.Config(
        app=create_app(), host="127.0.0.1", port=port, log_level="error",
    ))
    thread = threading.Thread(target=server.run)
    thread.start()
    try:
        deadline = time.time() + 15
        while not server.started:
            assert time.time() < deadline, "service did not start"
            time.sleep(0.05)
        url = f"http://127.0.0.1:{port}"
        code, out, _ = run_cli(["--api-url", url, "estimate"])
        assert code == 0
        remote = json.loads(out)
        _, local_out, _ = run_cli(["estimate"])
        assert remote == json.loads(local_out)
    finally:
        server.should_exit = True
        thread.join(timeout=10)
