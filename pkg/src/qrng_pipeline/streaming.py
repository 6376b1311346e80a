"""Framed TCP transport: a stream server and a verifying sink.

Wire format, little-endian throughout:

    magic   4 bytes  "QRNG"
    seq     8 bytes  unsigned, starts at 0, increments by 1 per frame
    len     4 bytes  payload byte count; 0 marks clean end of stream
    payload len bytes of packed random bits
    crc32   4 bytes  zlib.crc32 over seq+len+payload (magic excluded)

The server runs a three-stage bounded pipeline (simulate -> extract ->
frame/send) with back-pressure through bounded queues; emission preserves
block order, so the byte stream equals a serial extraction of the same
seeds.  The sink verifies magic, CRC, and sequence continuity, aborting
with the offending sequence number on any mismatch, and reports per-second
throughput windows.
"""

from __future__ import annotations

import hashlib
import queue
import socket
import struct
import threading
import time
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .noise import simulate_block
from .pipeline import PipelineConfig, resolve_extractor_config
from .toeplitz import BatchExtractor, samples_to_bits, seed_from_entropy

FRAME_MAGIC = b"QRNG"
_HEADER = struct.Struct("<QI")
_CRC = struct.Struct("<I")


class StreamIntegrityError(RuntimeError):
    pass


def encode_frame(sequence: int, payload: bytes) -> bytes:
    header = _HEADER.pack(sequence, len(payload))
    crc = zlib.crc32(header + payload) & 0xFFFFFFFF
    return FRAME_MAGIC + header + payload + _CRC.pack(crc)


def _recv_exact(sock: socket.socket, nbytes: int) -> bytes:
    buf = bytearray()
    while len(buf) < nbytes:
        chunk = sock.recv(nbytes - len(buf))
        if not chunk:
            raise StreamIntegrityError(
                f"connection closed mid-frame ({len(buf)}/{nbytes} bytes)"
            )
        buf.extend(chunk)
    return bytes(buf)


def read_frame(sock: socket.socket, expected_sequence: int) -> bytes | None:
    """Read and verify one frame; returns payload, or None on end-of-stream."""
    magic = _recv_exact(sock, 4)
    if magic != FRAME_MAGIC:
        raise StreamIntegrityError(
            f"bad magic {magic!r} at sequence {expected_sequence}"
        )
    header = _recv_exact(sock, _HEADER.size)
    sequence, payload_len = _HEADER.unpack(header)
    payload = _recv_exact(sock, payload_len) if payload_len else b""
    (crc_stated,) = _CRC.unpack(_recv_exact(sock, _CRC.size))
    crc_actual = zlib.crc32(header + payload) & 0xFFFFFFFF
    if crc_actual != crc_stated:
        raise StreamIntegrityError(f"crc mismatch at sequence {sequence}")
    if sequence != expected_sequence:
        raise StreamIntegrityError(
            f"sequence gap: expected {expected_sequence}, got {sequence}"
        )
    return None if payload_len == 0 else payload


@dataclass
class ServerReport:
    frames_sent: int
    payload_bytes: int
    wall_seconds: float
    payload_sha256: str

    def to_json_dict(self) -> dict:
        return {
            "frames_sent": self.frames_sent,
            "payload_bytes": self.payload_bytes,
            "wall_seconds": self.wall_seconds,
            "payload_sha256": self.payload_sha256,
        }


@dataclass
class SinkReport:
    frames_received: int
    payload_bytes: int
    wall_seconds: float
    mbps_mean: float
    mbps_windows: list[float] = field(default_factory=list)
    payload_sha256: str = ""

    @property
    def mbps_sustained(self) -> float:
        """Worst full one-second window (mean rate if the run was under 1 s)."""
        return min(self.mbps_windows) if self.mbps_windows else self.mbps_mean

    def to_json_dict(self) -> dict:
        return {
            "frames_received": self.frames_received,
            "payload_bytes": self.payload_bytes,
            "wall_seconds": self.wall_seconds,
            "mbps_mean": self.mbps_mean,
            "mbps_sustained": self.mbps_sustained,
            "mbps_windows": self.mbps_windows,
            "payload_sha256": self.payload_sha256,
        }


class StreamServer:
    """Serves one client: extracted bits framed as StreamFrames.

    The stream ends (with a payload_len=0 frame) when the configured sample
    budget is exhausted, or earlier at max_frames / duration_s.  The final
    partial byte of extracted bits, if any, is zero-padded, mirroring the
    bitstream file convention.
    """

    def __init__(
        self,
        config: PipelineConfig,
        host: str = "127.0.0.1",
        port: int = 0,
        payload_bytes: int = 65536,
        max_frames: int | None = None,
        duration_s: float | None = None,
    ):
        if payload_bytes < 1:
            raise ValueError("payload_bytes must be >= 1")
        if config.fresh_seed_per_block:
            raise ValueError("the stream server reuses one extractor seed")
        self.config = config
        self.ext_cfg = resolve_extractor_config(config)
        if self.ext_cfg.n % 8 != 0:
            raise ValueError("streaming requires n divisible by 8")
        self.payload_bytes = payload_bytes
        self.max_frames = max_frames
        self.duration_s = duration_s
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._sock.bind((host, port))
        self._sock.listen(1)
        self.host, self.port = self._sock.getsockname()[:2]

    def _simulate_stage(self, q_raw: queue.Queue, abort: threading.Event) -> None:
        cfg = self.config
        produced = 0
        chunk_index = 0
        held_out = int(cfg.total_samples * cfg.held_out_fraction)
        skipped = 0
        try:
            while produced < cfg.total_samples and not abort.is_set():
                count = min(cfg.chunk_samples, cfg.total_samples - produced)
                block = simulate_block(
                    cfg.noise, cfg.adc, count, [cfg.seed_source, chunk_index], cfg.band
                )
                produced += count
                chunk_index += 1
                samples = block.samples
                if skipped < held_out:
                    take = min(held_out - skipped, samples.size)
                    skipped += take
                    samples = samples[take:]
                if samples.size:
                    q_raw.put(samples)
        finally:
            q_raw.put(None)

    def _extract_stage(
        self, q_raw: queue.Queue, q_bits: queue.Queue, abort: threading.Event
    ) -> None:
        cfg = self.config
        n, m = self.ext_cfg.n, self.ext_cfg.m
        extractor = BatchExtractor(self.ext_cfg, seed_from_entropy(cfg.seed_extractor, m, n))
        carry = np.empty(0, dtype=np.uint8)
        try:
            while not abort.is_set():
                samples = q_raw.get()
                if samples is None:
                    break
                bits = samples_to_bits(samples, cfg.adc.bits)
                if carry.size:
                    bits = np.concatenate([carry, bits])
                num_blocks = bits.size // n
                carry = bits[num_blocks * n :].copy()
                if num_blocks == 0:
                    continue
                in_bytes = np.packbits(bits[: num_blocks * n], bitorder="little")
                out_words = extractor.extract_packed(
                    in_bytes.reshape(num_blocks, n // 8), workers=cfg.workers
                )
                out_bits = np.unpackbits(
                    out_words.view(np.uint8).reshape(num_blocks, -1),
                    axis=1, bitorder="little",
                )[:, :m]
                q_bits.put(out_bits.reshape(-1))
        finally:
            q_bits.put(None)

    def serve_once(self) -> ServerReport:
        conn, _ = self._sock.accept()
        conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        abort = threading.Event()
        q_raw: queue.Queue = queue.Queue(maxsize=4)
        q_bits: queue.Queue = queue.Queue(maxsize=4)
        stages = [
            threading.Thread(target=self._simulate_stage, args=(q_raw, abort), daemon=True),
            threading.Thread(target=self._extract_stage, args=(q_raw, q_bits, abort), daemon=True),
        ]
        for s in stages:
            s.start()
        digest = hashlib.sha256()
        pending = np.empty(0, dtype=np.uint8)
        payload_bits = self.payload_bytes * 8
        sequence = 0
        sent_bytes = 0
        exhausted = False
        t0 = time.perf_counter()
        try:
            while True:
                if self.max_frames is not None and sequence >= self.max_frames:
                    break
                if self.duration_s is not None and time.perf_counter() - t0 >= self.duration_s:
                    break
                while pending.size < payload_bits and not exhausted:
                    chunk = q_bits.get()
                    if chunk is None:
                        exhausted = True
                    else:
                        pending = np.concatenate([pending, chunk]) if pending.size else chunk
                if pending.size == 0 and exhausted:
                    break
                take = min(payload_bits, pending.size)
                payload = np.packbits(pending[:take], bitorder="little").tobytes()
                pending = pending[take:]
                conn.sendall(encode_frame(sequence, payload))
                digest.update(payload)
                sent_bytes += len(payload)
                sequence += 1
            conn.sendall(encode_frame(sequence, b""))
            wall = time.perf_counter() - t0
        finally:
            abort.set()
            # unblock producers stuck on a full queue
            for q in (q_raw, q_bits):
                try:
                    while True:
                        q.get_nowait()
                except queue.Empty:
                    pass
            conn.close()
            self._sock.close()
        for s in stages:
            s.join(timeout=5)
        return ServerReport(
            frames_sent=sequence,
            payload_bytes=sent_bytes,
            wall_seconds=wall,
            payload_sha256=digest.hexdigest(),
        )


def serve_stream(
    config: PipelineConfig,
    host: str,
    port: int,
    payload_bytes: int = 65536,
    max_frames: int | None = None,
    duration_s: float | None = None,
) -> ServerReport:
    server = StreamServer(
        config, host=host, port=port, payload_bytes=payload_bytes,
        max_frames=max_frames, duration_s=duration_s,
    )
    return server.serve_once()


def sink_stream(
    host: str,
    port: int,
    expected_rate_mbps: float | None = None,
    out_path: str | Path | None = None,
    connect_timeout: float = 10.0,
) -> SinkReport:
    """Receive until the end-of-stream frame; verify every frame; report rates.

    Connection attempts are retried until connect_timeout elapses, so the
    sink may be started before the server is listening.
    """
    deadline = time.perf_counter() + connect_timeout
    while True:
        try:
            sock = socket.create_connection((host, port), timeout=connect_timeout)
            break
        except ConnectionRefusedError:
            if time.perf_counter() >= deadline:
                raise
            time.sleep(0.05)
    sock.settimeout(30.0)
    digest = hashlib.sha256()
    out_file = Path(out_path).open("wb") if out_path is not None else None
    frames = 0
    total_bytes = 0
    arrivals: list[tuple[float, int]] = []
    t0 = time.perf_counter()
    try:
        while True:
            payload = read_frame(sock, frames)
            if payload is None:
                break
            frames += 1
            total_bytes += len(payload)
            arrivals.append((time.perf_counter() - t0, len(payload)))
            digest.update(payload)
            if out_file is not None:
                out_file.write(payload)
        wall = time.perf_counter() - t0
    finally:
        if out_file is not None:
            out_file.close()
        sock.close()
    windows: list[float] = []
    full_seconds = int(wall)
    if full_seconds >= 1:
        bucket_bytes = [0] * full_seconds
        for t, nbytes in arrivals:
            idx = int(t)
            if idx < full_seconds:
                bucket_bytes[idx] += nbytes
        windows = [b * 8 / 1e6 for b in bucket_bytes]
    report = SinkReport(
        frames_received=frames,
        payload_bytes=total_bytes,
        wall_seconds=wall,
        mbps_mean=(total_bytes * 8 / 1e6 / wall) if wall > 0 else 0.0,
        mbps_windows=windows,
        payload_sha256=digest.hexdigest(),
    )
    if expected_rate_mbps is not None and report.mbps_mean < expected_rate_mbps:
        raise StreamIntegrityError(
            f"sustained rate {report.mbps_mean:.1f} Mbps below expected "
            f"{expected_rate_mbps:.1f} Mbps"
        )
    return report
