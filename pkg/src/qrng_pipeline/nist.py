"""SP 800-22-style statistical test subset.

Eight test families, ten p-values: monobit frequency, block frequency
(M=128), runs, longest run of ones, cumulative sums (forward and reverse),
serial (m=16, two p-values), approximate entropy (m=10), and the DFT
spectral test.  Statistics follow the reference definitions; reference
distributions are chi-square (via the regularized upper incomplete gamma),
half-normal (via erfc), and the cumulative-sums range formula (via the
normal CDF).

Each test declares a minimum stream length; on shorter input the driver
reports it as skipped rather than failed.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import erfc, log, sqrt

import numpy as np
from scipy.special import gammaincc, ndtr

from .bits import BitStream


@dataclass(frozen=True)
class TestResult:
    # not a test case, despite the name pytest pattern-matches on
    __test__ = False

    test_name: str
    p_value: float | None
    passed: bool | None
    statistic: float | None
    alpha: float = 0.01
    skipped: bool = False

    def __post_init__(self):
        if self.skipped:
            return
        if self.p_value is None or not 0.0 <= self.p_value <= 1.0:
            raise ValueError("p_value must be in [0, 1]")
        if self.passed != (self.p_value >= self.alpha):
            raise ValueError("passed must equal (p_value >= alpha)")

    def to_json_dict(self) -> dict:
        return {
            "name": self.test_name,
            "p": self.p_value,
            "pass": self.passed,
            "statistic": self.statistic,
            "alpha": self.alpha,
            "skipped": self.skipped,
        }


def monobit(bits: np.ndarray) -> tuple[float, float]:
    n = bits.size
    s_obs = abs(2 * int(bits.sum()) - n) / sqrt(n)
    return erfc(s_obs / sqrt(2)), s_obs


def block_frequency(bits: np.ndarray, block_size: int = 128) -> tuple[float, float]:
    n = bits.size
    num_blocks = n // block_size
    pi = bits[: num_blocks * block_size].reshape(num_blocks, block_size).mean(axis=1)
    chi2 = 4.0 * block_size * float(np.sum((pi - 0.5) ** 2))
    return float(gammaincc(num_blocks / 2.0, chi2 / 2.0)), chi2


def runs(bits: np.ndarray) -> tuple[float, float]:
    n = bits.size
    pi = float(bits.mean())
    if abs(pi - 0.5) >= 2.0 / sqrt(n):
        return 0.0, float("inf")
    v_obs = int(np.count_nonzero(np.diff(bits))) + 1
    num = abs(v_obs - 2.0 * n * pi * (1 - pi))
    den = 2.0 * sqrt(2.0 * n) * pi * (1 - pi)
    return erfc(num / den), v_obs


_LONGEST_RUN_TIERS = [
    (128, 8, [1, 2, 3, 4], [0.21484375, 0.3671875, 0.23046875, 0.1875]),
    (6272, 128, [4, 5, 6, 7, 8, 9],
     [0.1174035788, 0.242955959, 0.249363483, 0.17517706, 0.102701071, 0.112398847]),
    (750000, 10000, [10, 11, 12, 13, 14, 15, 16],
     [0.0882, 0.2092, 0.2483, 0.1933, 0.1208, 0.0675, 0.0727]),
]


def longest_run(bits: np.ndarray) -> tuple[float, float]:
    n = bits.size
    selected = None
    for threshold, block_size, v_cats, pis in _LONGEST_RUN_TIERS:
        if n >= threshold:
            selected = (block_size, v_cats, pis)
    if selected is None:
        raise ValueError("longest-run test needs at least 128 bits")
    block_size, v_cats, pis = selected
    num_blocks = n // block_size
    blocks = bits[: num_blocks * block_size].reshape(num_blocks, block_size)
    padded = np.zeros((num_blocks, block_size + 2), dtype=np.int8)
    padded[:, 1:-1] = blocks
    d = np.diff(padded, axis=1)
    starts_r, starts_c = np.where(d == 1)
    _, ends_c = np.where(d == -1)
    longest = np.zeros(num_blocks, dtype=np.int64)
    run_lengths = ends_c - starts_c
    if run_lengths.size:
        np.maximum.at(longest, starts_r, run_lengths)
    nu = np.array(
        [(longest <= v_cats[0]).sum()]
        + [(longest == v).sum() for v in v_cats[1:-1]]
        + [(longest >= v_cats[-1]).sum()]
    )
    expected = num_blocks * np.array(pis)
    chi2 = float(((nu - expected) ** 2 / expected).sum())
    return float(gammaincc((len(v_cats) - 1) / 2.0, chi2 / 2.0)), chi2


def cumulative_sums(bits: np.ndarray, reverse: bool = False) -> tuple[float, float]:
    x = 2 * bits.astype(np.int64) - 1
    if reverse:
        x = x[::-1]
    partial = np.cumsum(x)
    z = int(np.max(np.abs(partial)))
    n = bits.size
    sn = sqrt(n)
    k1 = np.arange(int(np.floor((-n / z + 1) / 4)), int(np.floor((n / z - 1) / 4)) + 1)
    term1 = (ndtr((4 * k1 + 1) * z / sn) - ndtr((4 * k1 - 1) * z / sn)).sum()
    k2 = np.arange(int(np.floor((-n / z - 3) / 4)), int(np.floor((n / z - 1) / 4)) + 1)
    term2 = (ndtr((4 * k2 + 3) * z / sn) - ndtr((4 * k2 + 1) * z / sn)).sum()
    return float(1.0 - term1 + term2), float(z)


def _pattern_counts(bits: np.ndarray, m: int) -> np.ndarray:
    """Occurrences of each m-bit pattern over the circularly extended stream."""
    n = bits.size
    ext = np.concatenate([bits, bits[: m - 1]])
    val = np.zeros(n, dtype=np.int64)
    for b in range(m):
        val = (val << 1) | ext[b : b + n]
    return np.bincount(val, minlength=1 << m)


def _psi_squared(bits: np.ndarray, m: int) -> float:
    if m <= 0:
        return 0.0
    n = bits.size
    counts = _pattern_counts(bits, m).astype(np.float64)
    return ((1 << m) / n) * float((counts**2).sum()) - n


def serial(bits: np.ndarray, m: int = 16) -> tuple[float, float, float, float]:
    """Returns (p1, p2, del1, del2) for the two serial-test statistics."""
    psi_m = _psi_squared(bits, m)
    psi_m1 = _psi_squared(bits, m - 1)
    psi_m2 = _psi_squared(bits, m - 2)
    del1 = psi_m - psi_m1
    del2 = psi_m - 2 * psi_m1 + psi_m2
    p1 = float(gammaincc(2 ** (m - 2), del1 / 2.0))
    p2 = float(gammaincc(2 ** (m - 3), del2 / 2.0))
    return p1, p2, del1, del2


def approximate_entropy(bits: np.ndarray, m: int = 10) -> tuple[float, float]:
    n = bits.size

    def phi(mm: int) -> float:
        counts = _pattern_counts(bits, mm).astype(np.float64)
        probs = counts[counts > 0] / n
        return float((probs * np.log(probs)).sum())

    ap_en = phi(m) - phi(m + 1)
    chi2 = 2.0 * n * (log(2.0) - ap_en)
    return float(gammaincc(2 ** (m - 1), chi2 / 2.0)), chi2


def dft_spectral(bits: np.ndarray) -> tuple[float, float]:
    n = bits.size
    x = 2.0 * bits - 1.0
    magnitudes = np.abs(np.fft.rfft(x))[: n // 2]
    threshold = sqrt(n * log(1 / 0.05))
    n0 = 0.95 * n / 2.0
    n1 = int((magnitudes < threshold).sum())
    d = (n1 - n0) / sqrt(n * 0.95 * 0.05 / 4.0)
    return erfc(abs(d) / sqrt(2)), d


def _serial_rows(bits: np.ndarray) -> list[tuple[str, float, float]]:
    p1, p2, del1, del2 = serial(bits)
    return [("_p1", p1, del1), ("_p2", p2, del2)]


# (name, minimum stream length, runner returning [(suffix, p, statistic), ...])
_SUBSET = [
    ("monobit", 100, lambda b: [("", *monobit(b))]),
    ("block_frequency", 128, lambda b: [("", *block_frequency(b))]),
    ("runs", 100, lambda b: [("", *runs(b))]),
    ("longest_run_of_ones", 128, lambda b: [("", *longest_run(b))]),
    ("cumulative_sums", 100,
     lambda b: [("_forward", *cumulative_sums(b, False)),
                ("_reverse", *cumulative_sums(b, True))]),
    ("serial", 1 << 19, _serial_rows),
    ("approximate_entropy", 1 << 15, lambda b: [("", *approximate_entropy(b))]),
    ("dft_spectral", 1000, lambda b: [("", *dft_spectral(b))]),
]


def nist_subset(bits: BitStream | np.ndarray, alpha: float = 0.01) -> list[TestResult]:
    """Run the eight-test subset; under-length tests are reported as skipped."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    arr = bits.to_bit_array() if isinstance(bits, BitStream) else np.asarray(bits, dtype=np.uint8)
    results: list[TestResult] = []
    for name, min_bits, runner in _SUBSET:
        if arr.size < min_bits:
            results.append(TestResult(
                test_name=name, p_value=None, passed=None,
                statistic=None, alpha=alpha, skipped=True,
            ))
            continue
        for suffix, p, stat in runner(arr):
            results.append(TestResult(
                test_name=name + suffix, p_value=float(p),
                passed=bool(p >= alpha), statistic=float(stat), alpha=alpha,
            ))
    return results
