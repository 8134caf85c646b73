"""Reproducible random streams, streaming moments and confidence intervals.

Every Monte-Carlo estimator in the package splits its sample into fixed-size
batches; batch ``i`` draws from the stream ``(master_seed, i)``.  Results are
therefore independent of how batches are scheduled across workers.

The accumulator keeps its sums in exact integer arithmetic, so merging is
associative and commutative bit-for-bit and a merged accumulator finalizes to
exactly the same estimate as a single pass over the union of the samples.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from statistics import NormalDist
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "NORMAL_METHOD",
    "EXPONENTIAL_METHOD",
    "InsufficientDataError",
    "SeedSpec",
    "RandomStream",
    "make_stream",
    "Accumulator",
    "McEstimate",
    "accumulate",
    "merge",
    "finalize",
    "wilson_interval",
    "proportion_estimate",
    "run_batches",
]

NORMAL_METHOD = "ziggurat (numpy Generator.standard_normal) over Philox4x64 counter streams"
EXPONENTIAL_METHOD = "inverse CDF -log(U), U uniform on the open interval (0, 1) with 53-bit resolution"

_MASK64 = (1 << 64) - 1
# Every finite double is an integer multiple of 2**-1126 once the frexp
# mantissa is scaled to 53 bits; squares are multiples of 2**-2252.
_SHIFT1 = 1126
_SHIFT2 = 2 * _SHIFT1


class InsufficientDataError(ValueError):
    """Raised when an estimate is requested from fewer than two samples."""


@dataclass(frozen=True)
class SeedSpec:
    master_seed: int
    stream_index: int = 0

    def __post_init__(self):
        if not 0 <= self.master_seed <= _MASK64:
            raise ValueError(f"master_seed must be a 64-bit unsigned integer, got {self.master_seed}")
        if self.stream_index < 0:
            raise ValueError(f"stream_index must be non-negative, got {self.stream_index}")


class RandomStream:
    """Counter-based stream derived from a :class:`SeedSpec`.

    The key of the Philox generator comes from ``SeedSequence(master_seed,
    spawn_key=(stream_index,))``, the same derivation numpy uses for spawned
    children, so distinct pairs give independent streams.
    """

    def __init__(self, seed: SeedSpec):
        self.seed = seed
        ss = np.random.SeedSequence(seed.master_seed, spawn_key=(seed.stream_index,))
        self._gen = np.random.Generator(np.random.Philox(ss))

    def words(self, size) -> np.ndarray:
        return self._gen.bit_generator.random_raw(size)

    def uniforms(self, size) -> np.ndarray:
        # (k + 1/2) * 2**-53 never hits 0 or 1.
        w = np.asarray(self._gen.bit_generator.random_raw(size), dtype=np.uint64)
        return ((w >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53

    def normals(self, size) -> np.ndarray:
        return self._gen.standard_normal(size)

    def exponentials(self, size) -> np.ndarray:
        return -np.log(self.uniforms(size))


def make_stream(seed: SeedSpec | int, stream_index: int | None = None) -> RandomStream:
    if not isinstance(seed, SeedSpec):
        seed = SeedSpec(int(seed), 0 if stream_index is None else stream_index)
    elif stream_index is not None:
        seed = SeedSpec(seed.master_seed, stream_index)
    return RandomStream(seed)


def _exact_sums(values: np.ndarray) -> tuple[int, int]:
    """Return (sum, sum of squares) scaled by 2**1126 and 2**2252 as ints."""
    v = np.ascontiguousarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        return 0, 0
    if not np.all(np.isfinite(v)):
        raise ValueError("accumulator received a non-finite value")
    mant, expo = np.frexp(v)
    m = (mant * 2.0**53).astype(np.int64)
    shift = (expo.astype(np.int64) - 53 + _SHIFT1)
    nz = m != 0
    m, shift = m[nz], shift[nz]
    if m.size == 0:
        return 0, 0
    s1 = 0
    s2 = 0
    # Group by exponent so each group is summed with one big-int shift.
    order = np.argsort(shift, kind="stable")
    m, shift = m[order], shift[order]
    bounds = np.flatnonzero(np.diff(shift)) + 1
    starts = np.concatenate(([0], bounds))
    ends = np.concatenate((bounds, [m.size]))
    for a, b in zip(starts.tolist(), ends.tolist()):
        sh = int(shift[a])
        grp = m[a:b]
        # |m| < 2**53: split so int64 partial sums cannot overflow.
        hi = grp >> 26
        lo = grp & ((1 << 26) - 1)
        s1 += (int(hi.sum()) * (1 << 26) + int(lo.sum())) << sh
        sq = sum(int(x) * int(x) for x in grp.tolist()) if grp.size < 64 else _sum_squares(grp)
        s2 += sq << (2 * sh)
    return s1, s2


def _sum_squares(m: np.ndarray) -> int:
    a = np.abs(m)
    hi = a >> 27          # < 2**26
    lo = a & ((1 << 27) - 1)
    total = 0
    # Every partial product is below 2**54, so 256-element chunks fit in int64.
    for i in range(0, a.size, 256):
        h = hi[i:i + 256]
        l = lo[i:i + 256]
        total += (int((h * h).sum()) << 54) + (int((h * l).sum()) << 28) + int((l * l).sum())
    return total


@dataclass
class Accumulator:
    """Single-writer streaming accumulator of count, sum and sum of squares.

    Sums are exact (scaled integers).  Mean and centered second moment are
    derived at finalize time with no cancellation error.
    """

    count: int = 0
    _s1: int = 0
    _s2: int = 0

    def add(self, value: float) -> "Accumulator":
        return self.extend(np.array([value], dtype=np.float64))

    def extend(self, values) -> "Accumulator":
        values = np.asarray(values, dtype=np.float64)
        s1, s2 = _exact_sums(values)
        self.count += int(values.size)
        self._s1 += s1
        self._s2 += s2
        return self

    def merged(self, other: "Accumulator") -> "Accumulator":
        return Accumulator(self.count + other.count, self._s1 + other._s1, self._s2 + other._s2)

    @property
    def mean(self) -> float:
        if self.count == 0:
            raise InsufficientDataError("empty accumulator has no mean")
        return float(Fraction(self._s1, self.count << _SHIFT1))

    def _mean_fraction(self) -> Fraction:
        return Fraction(self._s1, self.count << _SHIFT1)

    def centered_m2(self) -> Fraction:
        """Exact sum of squared deviations from the mean."""
        s1 = Fraction(self._s1, 1 << _SHIFT1)
        s2 = Fraction(self._s2, 1 << _SHIFT2)
        return s2 - s1 * s1 / self.count

    @property
    def variance(self) -> float:
        if self.count < 2:
            raise InsufficientDataError("sample variance needs at least two values")
        return float(self.centered_m2() / (self.count - 1))


def accumulate(acc: Accumulator | None, value) -> Accumulator:
    """Return a new accumulator with ``value`` (scalar or array) appended."""
    base = Accumulator() if acc is None else Accumulator(acc.count, acc._s1, acc._s2)
    return base.extend(np.atleast_1d(np.asarray(value, dtype=np.float64)))


def merge(a: Accumulator, b: Accumulator) -> Accumulator:
    return a.merged(b)


@dataclass(frozen=True)
class McEstimate:
    mean: float
    stderr: float
    n: int
    ci_low: float
    ci_high: float
    level: float = 0.99

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "stderr": self.stderr,
            "n": self.n,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "level": self.level,
        }

    def scaled(self, factor: float) -> "McEstimate":
        """Estimate of ``factor * quantity`` (factor > 0)."""
        return McEstimate(self.mean * factor, self.stderr * factor, self.n,
                          self.ci_low * factor, self.ci_high * factor, self.level)

    def combined_sigma(self, other: "McEstimate") -> float:
        return math.hypot(self.stderr, other.stderr)

    def agrees_with(self, other: "McEstimate", k: float = 3.0) -> bool:
        return abs(self.mean - other.mean) <= k * self.combined_sigma(other)


def _z(level: float) -> float:
    if not 0.0 < level < 1.0:
        raise ValueError(f"confidence level must lie in (0, 1), got {level}")
    return NormalDist().inv_cdf(0.5 + level / 2.0)


def finalize(acc: Accumulator, confidence_level: float = 0.99) -> McEstimate:
    if acc.count < 2:
        raise InsufficientDataError(f"need at least 2 samples, got {acc.count}")
    z = _z(confidence_level)
    mean = float(acc._mean_fraction())
    var = acc.centered_m2() / (acc.count - 1)
    stderr = math.sqrt(float(var / acc.count))
    half = z * stderr
    return McEstimate(mean, stderr, acc.count, min(mean - half, mean), max(mean + half, mean),
                      confidence_level)


def estimate_from_values(values, confidence_level: float = 0.99) -> McEstimate:
    return finalize(Accumulator().extend(values), confidence_level)


def wilson_interval(successes: int, n: int, confidence_level: float = 0.99) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise InsufficientDataError("Wilson interval needs n >= 1")
    z = _z(confidence_level)
    p = successes / n
    z2 = z * z
    denom = 1.0 + z2 / n
    centre = (p + z2 / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / denom
    # the bounds at 0 and n successes are exactly 0 and 1; avoid rounding residue
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == n else min(1.0, centre + half)
    return lo, hi


def proportion_estimate(successes: int, n: int, confidence_level: float = 0.99) -> McEstimate:
    """Binomial proportion with a Wilson interval in place of the normal one."""
    lo, hi = wilson_interval(successes, n, confidence_level)
    p = successes / n
    return McEstimate(p, math.sqrt(p * (1 - p) / n), n, lo, hi, confidence_level)


def run_batches(
    n: int,
    batch_size: int,
    master_seed: int,
    fn: Callable[[RandomStream, int], object],
    threads: int | None = 1,
    stream_base: int = 0,
) -> list:
    """Run ``fn(stream, size)`` over fixed batches and return results in batch order.

    Batch ``i`` always uses stream index ``stream_base + i`` and the same size,
    whatever the thread count.
    """
    if n < 1:
        raise ValueError("n must be positive")
    sizes = [batch_size] * (n // batch_size)
    if n % batch_size:
        sizes.append(n % batch_size)

    def job(i: int):
        return fn(make_stream(SeedSpec(master_seed, stream_base + i)), sizes[i])

    if threads is None or threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(job, range(len(sizes))))
    return [job(i) for i in range(len(sizes))]


def merge_all(accs: Iterable[Accumulator]) -> Accumulator:
    out = Accumulator()
    for a in accs:
        out = out.merged(a)
    return out


def concat(parts: Sequence[np.ndarray]) -> np.ndarray:
    return np.concatenate([np.asarray(p) for p in parts]) if parts else np.empty(0)
