"""Monte Carlo four-channel time-tag generator.

Emulates one run of the seeded-FWM experiment: a pulsed pump makes forward
pairs (idler to channel 1, signal reflected back as the seed), the reflected
pump makes a backward pair (idler to channel 2) at a rate enhanced when the
seed overlaps it, and all backward signal photons are split 50:50 onto
channels 3 and 4.  Detector efficiency, Gaussian jitter, dark counts and dead
time are applied per channel.  Everything is vectorized over pulses and
deterministic for a fixed rng seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import OverlapModel, pair_gen_enhancement


@dataclass(frozen=True)
class PulseTrainConfig:
    """Pump pulse train: period in integer picoseconds and number of pulses."""

    period_ps: int = 3125
    n_pulses: int = 1_000_000

    def __post_init__(self):
        if self.period_ps <= 0:
            raise ValueError(f"period_ps must be > 0, got {self.period_ps}")
        if self.n_pulses < 0:
            raise ValueError(f"n_pulses must be >= 0, got {self.n_pulses}")


@dataclass(frozen=True)
class SourceConfig:
    """Pair-generation probabilities, overlap model and seed-path parameters.

    ``tau_ps`` is the adjustable seed/pump delay (the delay-line setting);
    ``loop_transmission`` is the probability that the reflected seed survives
    back into the fiber.
    """

    p1: float = 0.03
    p2: float = 0.03
    overlap: OverlapModel = field(default_factory=lambda: OverlapModel(0.71, 4.25))
    tau_ps: float = 0.0
    loop_transmission: float = 1.0

    def __post_init__(self):
        for key in ("p1", "p2", "loop_transmission"):
            v = getattr(self, key)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{key} must be in [0, 1], got {v}")


@dataclass(frozen=True)
class DetectorConfig:
    """One click detector: efficiency, timing jitter, darks, dead time, offset."""

    efficiency: float = 0.10
    jitter_sigma_ps: float = 70.0
    dark_rate_hz: float = 0.0
    dead_time_ps: float = 0.0
    nominal_offset_ps: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError(f"efficiency must be in [0, 1], got {self.efficiency}")
        for key in ("jitter_sigma_ps", "dark_rate_hz", "dead_time_ps"):
            if getattr(self, key) < 0:
                raise ValueError(f"{key} must be >= 0, got {getattr(self, key)}")


def simulate(
    pulse: PulseTrainConfig,
    source: SourceConfig,
    detectors: tuple[DetectorConfig, DetectorConfig, DetectorConfig, DetectorConfig],
    rng_seed: int,
) -> list[np.ndarray]:
    """Generate four sorted int64 timestamp arrays (ps), one per channel 1..4.

    At most one pair per direction per pulse; a surviving seed and a
    backward-generated signal photon arriving together follow the two-photon
    splitter statistics.  A bunched double hit on one detector is dropped
    entirely: keeping it would raise the per-port click probability above the
    single-photon value eta/2 and bias the accidental legs of the fourfold
    ratio, while true coincidences only ever come from split pairs.
    """
    if len(detectors) != 4:
        raise ValueError(f"need exactly 4 detector configs, got {len(detectors)}")
    enh = pair_gen_enhancement(True, source.tau_ps, source.overlap)
    if source.p2 * enh > 1.0:
        raise ValueError(
            f"p2 * enhancement = {source.p2 * enh:.3g} exceeds 1; lower p2"
        )

    rng = np.random.default_rng(rng_seed)
    n = pulse.n_pulses
    period = pulse.period_ps

    fwd = rng.random(n) < source.p1
    seed_alive = fwd & (rng.random(n) < source.loop_transmission)
    p_back = np.where(seed_alive, source.p2 * enh, source.p2)
    bwd = rng.random(n) < p_back

    # photon multiplicity reaching each channel, per pulse
    mult = np.zeros((4, n), dtype=np.int8)
    mult[0] = fwd
    mult[1] = bwd

    n_sig = seed_alive.astype(np.int8) + bwd.astype(np.int8)
    u = rng.random(n)
    one = n_sig == 1
    mult[2][one & (u < 0.5)] = 1
    mult[3][one & (u >= 0.5)] = 1
    two = n_sig == 2
    mult[2][two & (u < 0.25)] = 2
    split = two & (u >= 0.25) & (u < 0.75)
    mult[2][split] = 1
    mult[3][split] = 1
    mult[3][two & (u >= 0.75)] = 2

    duration_ps = n * period
    streams: list[np.ndarray] = []
    for ch in range(4):
        det = detectors[ch]
        p_click = det.efficiency * (mult[ch] == 1)
        hit = rng.random(n) < p_click
        idx = np.nonzero(hit)[0]
        times = idx.astype(np.int64) * period
        times = times + np.int64(round(det.nominal_offset_ps))
        if det.jitter_sigma_ps > 0:
            times = np.rint(
                times + rng.normal(0.0, det.jitter_sigma_ps, idx.size)
            ).astype(np.int64)
        if det.dark_rate_hz > 0 and duration_ps > 0:
            n_dark = rng.poisson(det.dark_rate_hz * duration_ps * 1e-12)
            darks = rng.integers(0, duration_ps, n_dark, dtype=np.int64)
            times = np.concatenate([times, darks])
        np.maximum(times, 0, out=times)
        times.sort(kind="stable")
        if det.dead_time_ps > 0:
            times = _dead_time_filter(times, int(det.dead_time_ps))
        streams.append(times)
    return streams


def _dead_time_filter(times: np.ndarray, dead_ps: int) -> np.ndarray:
    """Drop tags closer than ``dead_ps`` after the last accepted tag."""
    keep = np.zeros(times.size, dtype=bool)
    last = -np.inf
    for i, t in enumerate(times):
        if t - last > dead_ps:
            keep[i] = True
            last = t
    return times[keep]


def expected_singles_rate(
    source: SourceConfig,
    detectors: tuple[DetectorConfig, ...],
    pulse: PulseTrainConfig,
) -> np.ndarray:
    """Analytic per-channel tag rate in Hz (dead time ignored)."""
    rep_hz = 1e12 / pulse.period_ps
    enh = pair_gen_enhancement(True, source.tau_ps, source.overlap)
    p_seed = source.p1 * source.loop_transmission
    # backward-pair probability averaged over seed presence
    p_b = source.p2 * (p_seed * enh + (1.0 - p_seed))
    # bunched double hits never click, so a port clicks with eta/2 whenever
    # the splitter sees at least one photon
    p_any_signal = 1.0 - (1.0 - p_seed) * (1.0 - source.p2)

    rates = np.empty(4)
    for ch, det in enumerate(detectors):
        eta = det.efficiency
        if ch == 0:
            p_click = source.p1 * eta
        elif ch == 1:
            p_click = p_b * eta
        else:
            p_click = p_any_signal * 0.5 * eta
        rates[ch] = p_click * rep_hz + det.dark_rate_hz
    return rates
