"""Time-resolved fourfold coincidence engine.

Builds the 3-D lag histogram over (n14, n24, n34) pulse-period lags from four
sorted tag streams, using peak-centered gating: a pairwise difference to the
channel-4 reference tag belongs to lag n when it lies within the gate
half-width of n*T.  Also provides the exhaustive oracle, the coincidence-plane
slice and CC/ACC ratio extraction with Poisson errors.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

BRUTE_FORCE_MAX_TAGS = 10_000

# the four accidental bars: adjacent-pulse pair combinations on the
# coincidence plane n34 = n14 + n24
ACC_BINS = ((-1, 0, -1), (1, 0, 1), (0, -1, -1), (0, 1, 1))


@dataclass(frozen=True)
class CoincConfig:
    period_ps: int = 3125
    gate_halfwidth_ps: int = 1280
    max_lag: int = 5

    def __post_init__(self):
        if not 0 < self.gate_halfwidth_ps < self.period_ps / 2:
            raise ValueError(
                f"gate_halfwidth_ps must be in (0, period/2), got "
                f"{self.gate_halfwidth_ps} with period {self.period_ps}"
            )
        if self.max_lag < 1:
            raise ValueError(f"max_lag must be >= 1, got {self.max_lag}")


@dataclass
class FourfoldHistogram:
    """Sparse counts over integer lag triples plus total in-window quadruples."""

    counts: dict[tuple[int, int, int], int]
    total_quadruples: int
    max_lag: int

    def __eq__(self, other):
        if not isinstance(other, FourfoldHistogram):
            return NotImplemented
        return (
            self.counts == other.counts
            and self.total_quadruples == other.total_quadruples
            and self.max_lag == other.max_lag
        )


@dataclass
class CarResult:
    cc: int
    acc_bars: dict[tuple[int, int, int], int]
    acc_mean: float
    ratio: float | None
    cc_err: float
    acc_err: float
    ratio_err: float | None


def _check_sorted(streams) -> list[np.ndarray]:
    arrs = []
    for i, s in enumerate(streams):
        a = np.asarray(s, dtype=np.int64)
        if a.ndim != 1:
            raise ValueError(f"stream {i + 1} is not one-dimensional")
        if a.size > 1 and np.any(np.diff(a) < 0):
            raise ValueError(f"stream {i + 1} is not sorted ascending")
        arrs.append(a)
    if len(arrs) != 4:
        raise ValueError(f"need exactly 4 streams, got {len(arrs)}")
    return arrs


def _nearest_lag(delta: np.ndarray, period: int) -> np.ndarray:
    """Nearest multiple of the period; exact ties resolve toward smaller |n|."""
    mag = np.abs(delta)
    n = (mag + (period - 1) // 2) // period
    return np.where(delta < 0, -n, n)


def count_fourfolds(
    streams,
    config: CoincConfig,
    workers: int = 1,
    chunk_size: int = 500_000,
) -> FourfoldHistogram:
    """Histogram every qualifying quadruple (one tag per channel).

    Channel-4 tags are the references; candidate tags in channels 1-3 are
    found by binary-searched windows of half-width max_lag*T + gate, so the
    cost is O(N log N) plus the number of in-window quadruples.  Reference
    tags may be partitioned across threads; the merged result is bit-identical
    to the single-threaded one for any worker count.
    """
    t1, t2, t3, t4 = _check_sorted(streams)
    L = 2 * config.max_lag + 1
    dense = np.zeros(L**3, dtype=np.int64)
    total = 0

    chunks = [(lo, min(lo + chunk_size, t4.size)) for lo in range(0, t4.size, chunk_size)]
    if workers <= 1 or len(chunks) <= 1:
        results = [_count_chunk(t1, t2, t3, t4, config, lo, hi) for lo, hi in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(
                pool.map(lambda c: _count_chunk(t1, t2, t3, t4, config, *c), chunks)
            )
    for part, q in results:
        dense += part
        total += q

    counts = {}
    for flat in np.nonzero(dense)[0]:
        n1, rem = divmod(int(flat), L * L)
        n2, n3 = divmod(rem, L)
        counts[(n1 - config.max_lag, n2 - config.max_lag, n3 - config.max_lag)] = int(
            dense[flat]
        )
    return FourfoldHistogram(counts, total, config.max_lag)


def _count_chunk(t1, t2, t3, t4, config, lo, hi):
    period = config.period_ps
    gate = config.gate_halfwidth_ps
    max_lag = config.max_lag
    L = 2 * max_lag + 1
    dense = np.zeros(L**3, dtype=np.int64)

    refs = t4[lo:hi]
    if refs.size == 0:
        return dense, 0
    half = max_lag * period + gate
    bounds = []
    for t in (t1, t2, t3):
        left = np.searchsorted(t, refs - half, side="left")
        right = np.searchsorted(t, refs + half, side="right")
        bounds.append((left, right - left))
    (l1, k1), (l2, k2), (l3, k3) = bounds

    live = (k1 > 0) & (k2 > 0) & (k3 > 0)
    total = int((k1[live] * k2[live] * k3[live]).sum())
    if total == 0:
        return dense, 0

    refs, l1, k1, l2, k2, l3, k3 = (
        a[live] for a in (refs, l1, k1, l2, k2, l3, k3)
    )
    q = k1 * k2 * k3
    rep = np.repeat(np.arange(refs.size), q)
    starts = np.concatenate(([0], np.cumsum(q)[:-1]))
    off = np.arange(total) - np.repeat(starts, q)
    k23 = k2 * k3
    i1 = off // k23[rep]
    rem = off % k23[rep]
    i2 = rem // k3[rep]
    i3 = rem % k3[rep]

    ref_t = refs[rep]
    valid = np.ones(total, dtype=bool)
    bins = np.zeros(total, dtype=np.int64)
    for t, lft, idx in ((t1, l1, i1), (t2, l2, i2), (t3, l3, i3)):
        d = t[lft[rep] + idx] - ref_t
        n = _nearest_lag(d, period)
        valid &= (np.abs(d - n * period) <= gate) & (np.abs(n) <= max_lag)
        bins = bins * L + (n + max_lag)
    dense += np.bincount(bins[valid], minlength=dense.size)
    return dense, total


def brute_force_fourfolds(streams, config: CoincConfig) -> FourfoldHistogram:
    """Exhaustive windowed quadruple enumeration; test oracle for small inputs."""
    arrs = _check_sorted(streams)
    for i, a in enumerate(arrs):
        if a.size > BRUTE_FORCE_MAX_TAGS:
            raise ValueError(
                f"stream {i + 1} has {a.size} tags; oracle limit is {BRUTE_FORCE_MAX_TAGS}"
            )
    t1, t2, t3, t4 = (a.tolist() for a in arrs)
    period = config.period_ps
    gate = config.gate_halfwidth_ps
    max_lag = config.max_lag
    half = max_lag * period + gate

    counts: dict[tuple[int, int, int], int] = {}
    total = 0
    for ref in t4:
        windows = []
        for t in (t1, t2, t3):
            windows.append([x for x in t if abs(x - ref) <= half])
        if not all(windows):
            continue
        total += len(windows[0]) * len(windows[1]) * len(windows[2])
        for a in windows[0]:
            na = _classify(a - ref, period, gate, max_lag)
            if na is None:
                continue
            for b in windows[1]:
                nb = _classify(b - ref, period, gate, max_lag)
                if nb is None:
                    continue
                for c in windows[2]:
                    nc = _classify(c - ref, period, gate, max_lag)
                    if nc is None:
                        continue
                    key = (na, nb, nc)
                    counts[key] = counts.get(key, 0) + 1
    return FourfoldHistogram(counts, total, max_lag)


def _classify(delta: int, period: int, gate: int, max_lag: int) -> int | None:
    """Smallest |n| with |delta - n*period| <= gate, or None."""
    for n in sorted(range(-max_lag, max_lag + 1), key=abs):
        if abs(delta - n * period) <= gate:
            return n
    return None


def plane_slice(hist: FourfoldHistogram) -> dict[tuple[int, int], int]:
    """Bins on the two-pair coincidence plane n34 = n14 + n24."""
    return {
        (n1, n2): c for (n1, n2, n3), c in hist.counts.items() if n3 == n1 + n2
    }


def extract_car(hist: FourfoldHistogram) -> CarResult:
    """CC, the four accidental bars, and R = CC / (2 * mean ACC) with errors."""
    cc = hist.counts.get((0, 0, 0), 0)
    bars = {b: hist.counts.get(b, 0) for b in ACC_BINS}
    acc_sum = sum(bars.values())
    acc_mean = acc_sum / 4.0
    cc_err = math.sqrt(cc)
    acc_err = math.sqrt(acc_sum) / 4.0
    if acc_mean == 0:
        return CarResult(cc, bars, acc_mean, None, cc_err, acc_err, None)
    ratio = cc / (2.0 * acc_mean)
    if cc > 0:
        ratio_err = ratio * math.sqrt(1.0 / cc + (acc_err / acc_mean) ** 2)
    else:
        ratio_err = 1.0 / (2.0 * acc_mean)  # error floor from one CC count
    return CarResult(cc, bars, acc_mean, ratio, cc_err, acc_err, ratio_err)
