"""HTTP service endpoints exercised in-process through the test client."""

import json
import math

import pytest
from fastapi.testclient import TestClient

from qrng_pipeline import __version__
from qrng_pipeline.entropy import fit_variance_line, recommend_output_length
from qrng_pipeline.service.app import create_app


@pytest.fixture(scope="module")
def client():
    with TestClient(create_app()) as c:
        yield c


@pytest.fixture(scope="module")
def raw_file(client, tmp_path_factory):
    """A simulated raw-sample capture shared by the file-based endpoints."""
    path = tmp_path_factory.mktemp("svc") / "capture.raw"
    resp = client.post("/simulate", json={
        "count": 3000, "seed": 11, "out_path": str(path),
    })
    assert resp.status_code == 200
    return path, resp.json()


def test_health_reports_version(client):
    doc = client.get("/health").json()
    assert doc["status"] == "ok"
    assert doc["version"] == __version__
    assert isinstance(doc["numba"], bool)


def test_simulate_writes_raw_file(raw_file):
    path, doc = raw_file
    assert path.exists()
    assert path.with_name(path.name + ".json").exists()
    assert doc["count"] == 3000
    assert abs(doc["mean"] - 512.0) < 10.0
    # default model: sigma^2 = slope * lo_power + classical variance
    assert 0.8 * 83.53**2 < doc["variance"] < 1.2 * 83.53**2


def test_estimate_analytic_default_model(client):
    doc = client.post("/estimate", json={}).json()
    assert doc["empirical"] is None
    analytic = doc["analytic"]
    assert math.isclose(analytic["min_entropy_bits"], 7.71, abs_tol=1e-6)
    assert math.isclose(analytic["p_max"], 2 ** -7.71, rel_tol=1e-6)
    assert analytic["method"] == "analytic_gaussian"


def test_estimate_empirical_from_file(client, raw_file):
    path, _ = raw_file
    doc = client.post("/estimate", json={
        "in_path": str(path), "n_bits": 1024,
    }).json()
    emp = doc["empirical"]
    assert emp["method"] == "empirical"
    assert emp["sample_count"] == 3000
    # small capture, so only a loose sanity window around the analytic 7.71
    assert 5.0 < emp["min_entropy_bits"] < 7.71
    expected_m = recommend_output_length(emp["min_entropy_bits"], 1024, 10)
    assert doc["recommended_m"] == expected_m


def test_estimate_sweep_fits_variance_line(client):
    powers = [0.0, 1.5, 3.0]
    doc = client.post("/estimate", json={
        "powers": powers, "sweep_count": 200_000, "seed": 5,
    }).json()
    assert [p for p, _ in doc["sweep"]] == powers
    fit = doc["fit"]
    # the returned fit must be the least-squares line through the returned
    # sweep points; slope tracks the default quantum slope 2075.435...
    oracle = fit_variance_line([(p, v) for p, v in doc["sweep"]])
    assert math.isclose(fit["slope"], oracle.slope, rel_tol=1e-12)
    assert math.isclose(fit["intercept"], oracle.intercept, rel_tol=1e-12)
    assert math.isclose(fit["slope"], 2075.435, rel_tol=0.02)
    assert fit["r2"] > 0.999


def test_extract_defaults_to_target_ratio(client, raw_file, tmp_path):
    path, _ = raw_file
    out = tmp_path / "out.bits"
    doc = client.post("/extract", json={
        "in_path": str(path), "out_path": str(out),
    }).json()
    assert doc["geometry"] == {"n": 1000, "m": 753, "k": 50, "ratio": 0.753}
    # 3000 samples * 10 bits = 30000 bits -> 30 whole input blocks
    assert doc["blocks"] == 30
    assert doc["bit_count"] == 30 * 753
    assert doc["raw_bits_used"] == 30 * 1000
    assert out.exists()
    assert doc["seed_path"] == str(out) + ".seed"


def test_extract_seed_file_reuse_is_deterministic(client, raw_file, tmp_path):
    path, _ = raw_file
    first = tmp_path / "a.bits"
    doc1 = client.post("/extract", json={
        "in_path": str(path), "out_path": str(first),
    }).json()
    second = tmp_path / "b.bits"
    doc2 = client.post("/extract", json={
        "in_path": str(path), "out_path": str(second),
        "seed_file": doc1["seed_path"],
    }).json()
    assert doc2["seed_path"] == doc1["seed_path"]
    assert first.read_bytes() == second.read_bytes()


def test_extract_rejects_mismatched_seed_geometry(client, raw_file, tmp_path):
    path, _ = raw_file
    out = tmp_path / "c.bits"
    doc = client.post("/extract", json={
        "in_path": str(path), "out_path": str(out),
    }).json()
    resp = client.post("/extract", json={
        "in_path": str(path), "out_path": str(tmp_path / "d.bits"),
        "m": 700, "seed_file": doc["seed_path"],
    })
    assert resp.status_code == 400
    assert "does not match" in resp.json()["detail"]


def test_extract_rejects_bad_geometry(client, raw_file, tmp_path):
    path, _ = raw_file
    resp = client.post("/extract", json={
        "in_path": str(path), "out_path": str(tmp_path / "x.bits"), "k": 7,
    })
    assert resp.status_code == 400
    assert "k must divide n" in resp.json()["detail"]


def test_extract_rejects_input_shorter_than_one_block(client, tmp_path):
    small = tmp_path / "small.raw"
    client.post("/simulate", json={"count": 50, "seed": 1, "out_path": str(small)})
    resp = client.post("/extract", json={
        "in_path": str(small), "out_path": str(tmp_path / "y.bits"),
    })
    assert resp.status_code == 400
    assert "fewer than one" in resp.json()["detail"]


def test_missing_file_maps_to_400(client, tmp_path):
    resp = client.post("/analyze", json={"in_path": str(tmp_path / "nope.bits")})
    assert resp.status_code == 400
    assert "sidecar" in resp.json()["detail"]


def test_analyze_bitstream(client, raw_file, tmp_path):
    path, _ = raw_file
    out = tmp_path / "z.bits"
    client.post("/extract", json={"in_path": str(path), "out_path": str(out)})
    resp = client.post("/analyze", json={"in_path": str(out)})
    doc = resp.json()
    assert doc["kind"] == "bitstream"
    assert doc["bit_count"] == 30 * 753
    names = {t["name"] for t in doc["nist"]}
    assert "monobit" in names and "runs" in names
    # the serialized pass flag uses the report key "pass"
    assert all("pass" in t and "passed" not in t for t in doc["nist"])
    assert doc["autocorr"]["sample_count"] == 30 * 753
    assert doc["entropy"] is None and doc["psd"] is None


def test_analyze_raw_with_psd_and_csv(client, raw_file, tmp_path):
    path, _ = raw_file
    csv_dir = tmp_path / "csv"
    report_path = tmp_path / "analysis.json"
    doc = client.post("/analyze", json={
        "in_path": str(path),
        "psd_segment_length": 256, "psd_overlap": 128, "psd_window": "hann",
        "csv_dir": str(csv_dir), "report_path": str(report_path),
    }).json()
    assert doc["kind"] == "raw"
    assert doc["sample_count"] == 3000
    assert doc["entropy"]["method"] == "empirical"
    assert doc["psd"]["segment_length"] == 256
    assert len(doc["psd"]["frequencies"]) == 129
    assert (csv_dir / "autocorrelation.csv").exists()
    assert (csv_dir / "psd.csv").exists()
    saved = json.loads(report_path.read_text())
    assert {"nist", "autocorrelation", "psd"} <= set(saved)


def test_run_end_to_end(client, tmp_path):
    out_dir = tmp_path / "run"
    doc = client.post("/run", json={
        "config": {
            "run": {
                "total_samples": 100_000, "chunk_samples": 50_000,
                "analysis_bits": 100_000,
            },
        },
        "output_dir": str(out_dir),
    }).json()
    assert doc["geometry"] == {"n": 1000, "m": 753, "k": 50, "ratio": 0.753}
    assert math.isclose(doc["entropy_analytic"]["min_entropy_bits"], 7.71,
                        abs_tol=1e-6)
    assert doc["entropy_empirical"]["method"] == "empirical"
    assert doc["nominal_raw_gbps"] == 25.0
    assert doc["nominal_extracted_gbps"] == 18.825
    held = 100_000 // 256
    blocks = (100_000 - held) * 10 // 1000
    assert doc["held_out_samples"] == held
    assert doc["extracted_bits"] == blocks * 753
    assert doc["raw_bits_used"] == blocks * 1000
    assert doc["throughput"]["ratio"] == 0.753
    assert {t["name"] for t in doc["nist"]} >= {"monobit", "runs", "dft_spectral"}
    assert doc["params_note"]
    for rel in ("run_report.json", "extracted.bits", "toeplitz.seed"):
        assert (out_dir / rel).exists(), rel


def test_run_rejects_entropy_margin_violation(client, tmp_path):
    resp = client.post("/run", json={
        "config": {
            "extractor": {"m": 900, "target_ratio": None},
            "run": {"total_samples": 10_000, "analysis_bits": 0},
        },
        "output_dir": str(tmp_path / "bad"),
    })
    assert resp.status_code == 400
    assert "min-entropy" in resp.json()["detail"]


def test_bench_reports_rates(client):
    doc = client.post("/bench", json={"duration_s": 1.0, "workers": [1]}).json()
    (report,) = doc["reports"]
    assert report["worker_count"] == 1
    assert report["raw_bits_per_s"] > 0
    assert math.isclose(report["ratio"], 0.753, rel_tol=1e-12)
    assert math.isclose(
        report["extracted_bits_per_s"] / report["raw_bits_per_s"],
        0.753, rel_tol=1e-9,
    )


def test_bench_rejects_nonpositive_duration(client):
    resp = client.post("/bench", json={"duration_s": 0.0})
    assert resp.status_code == 400
