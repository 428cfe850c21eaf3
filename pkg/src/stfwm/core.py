"""Analytic model of seeded four-wave mixing in a single fiber pass.

First-order photon-pair amplitudes, the seeded enhancement factor, 50:50
splitter statistics, fourfold coincidence/accidental rate formulas and the
cloning-fidelity estimate.  Everything here is a closed-form expression; the
Monte Carlo simulator and the coincidence engine are checked against these.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

DEFAULT_TRUNCATION = 4

# Above this gain magnitude the dropped higher-order terms are no longer
# negligible and the first-order amplitudes stop being trustworthy.
GAIN_WARN_THRESHOLD = 0.3


@dataclass(frozen=True)
class FockState:
    """Photon-number state with ``n_signal`` signal and ``m_idler`` idler photons."""

    n_signal: int
    m_idler: int

    def __post_init__(self):
        if self.n_signal < 0 or self.m_idler < 0:
            raise ValueError("photon counts must be non-negative")


@dataclass(frozen=True)
class GainParam:
    """Dimensionless complex pair-generation amplitude of one fiber pass."""

    g: complex

    def __post_init__(self):
        if abs(self.g) >= 1.0:
            raise ValueError(f"|g| must be < 1, got {abs(self.g):.3g}")
        if abs(self.g) > GAIN_WARN_THRESHOLD:
            warnings.warn(
                f"|g| = {abs(self.g):.3g} exceeds {GAIN_WARN_THRESHOLD}; "
                "first-order amplitudes are unreliable at this gain",
                stacklevel=2,
            )


@dataclass(frozen=True)
class OverlapModel:
    """Gaussian seed/pump temporal-overlap model.

    ``visibility`` absorbs both temporal-mode and polarization mismatch as a
    single scalar; ``sigma_tau_ps`` is the standard deviation of the
    enhancement window; ``tau0_ps`` its center.
    """

    visibility: float
    sigma_tau_ps: float
    tau0_ps: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.visibility <= 1.0:
            raise ValueError(f"visibility must be in [0, 1], got {self.visibility}")
        if self.sigma_tau_ps <= 0.0:
            raise ValueError(f"sigma_tau_ps must be > 0, got {self.sigma_tau_ps}")


@dataclass(frozen=True)
class AnalyticRates:
    """Per-pulse pair probabilities and the four channel detection efficiencies."""

    p1: float
    p2: float
    eta: tuple[float, float, float, float]

    def __post_init__(self):
        if not 0.0 <= self.p1 <= 1.0:
            raise ValueError(f"p1 must be in [0, 1], got {self.p1}")
        if not 0.0 <= self.p2 <= 1.0:
            raise ValueError(f"p2 must be in [0, 1], got {self.p2}")
        if len(self.eta) != 4 or any(not 0.0 <= e <= 1.0 for e in self.eta):
            raise ValueError(f"eta must be four efficiencies in [0, 1], got {self.eta}")


def evolve_first_order(
    state: FockState, gain: GainParam, truncation: int = DEFAULT_TRUNCATION
) -> dict[FockState, complex]:
    """First-order pair-generation amplitudes for one pass through the fiber.

    Input |n, m> maps to itself with amplitude 1 plus |n+1, m+1> with
    amplitude g * sqrt((n+1)(m+1)).  The map is left unnormalized: the input
    basis state keeps amplitude exactly 1, and probabilities are squared
    magnitudes of the perturbative term.
    """
    n, m = state.n_signal, state.m_idler
    if n + 1 > truncation or m + 1 > truncation:
        raise ValueError(
            f"input |{n},{m}> exceeds truncation {truncation} after pair generation"
        )
    out: dict[FockState, complex] = {state: 1.0 + 0.0j}
    amp = gain.g * math.sqrt((n + 1) * (m + 1))
    if amp != 0:
        out[FockState(n + 1, m + 1)] = amp
    return out


def pair_gen_enhancement(seed_present: bool, tau_ps: float, overlap: OverlapModel) -> float:
    """Pair-generation rate multiplier from a seed photon at delay ``tau_ps``.

    1 with no seed; 1 + V*exp(-(tau-tau0)^2 / (2 sigma^2)) with a seed, so the
    fully-overlapped ideal case doubles the rate.
    """
    if not seed_present:
        return 1.0
    x = (tau_ps - overlap.tau0_ps) / overlap.sigma_tau_ps
    return 1.0 + overlap.visibility * math.exp(-0.5 * x * x)


def bs_two_photon_split() -> dict[tuple[int, int], float]:
    """Output-occupation distribution for two same-mode photons on a 50:50 splitter.

    Keys are (photons in port A, photons in port B).  The split probability is
    exactly 1/2; bunching into either single port carries 1/4 each.
    """
    return {(2, 0): 0.25, (1, 1): 0.5, (0, 2): 0.25}


def bs_single_photon_split() -> dict[tuple[int, int], float]:
    """One photon on a 50:50 splitter: even odds for either port."""
    return {(1, 0): 0.5, (0, 1): 0.5}


def analytic_cc_rate(rates: AnalyticRates, stimulated: bool) -> float:
    """Per-pulse fourfold coincidence probability.

    (1/2) p1 p2 eta1 eta2 eta3 eta4, doubled when the backward process is
    seeded; the 1/2 is the probability that the two signal photons exit
    opposite splitter ports.
    """
    e1, e2, e3, e4 = rates.eta
    rate = 0.5 * rates.p1 * rates.p2 * e1 * e2 * e3 * e4
    return 2.0 * rate if stimulated else rate


def analytic_acc_rate(rates: AnalyticRates) -> float:
    """Per-pulse-pair accidental probability for each of the four lag bars.

    (1/4) p1 p2 eta1 eta2 eta3 eta4.  Accidentals pair photons from distinct
    pulses, so seeding the backward process leaves them unchanged.
    """
    e1, e2, e3, e4 = rates.eta
    return 0.25 * rates.p1 * rates.p2 * e1 * e2 * e3 * e4


def predicted_car(stimulated: bool) -> float:
    """Ideal coincidence-to-accidental ratio: 1 spontaneous, 2 fully seeded."""
    return 2.0 if stimulated else 1.0


def cloning_fidelity(r_prime: float) -> float:
    """Estimated 1-to-2 cloning fidelity F = (2R' + 1) / (2R' + 2).

    Strictly increasing in ``r_prime``, from 1/2 at R' = 0; R' = 2 (the ideal
    seeded ratio) gives the 5/6 one-to-two cloning bound.
    """
    if r_prime < 0:
        raise ValueError(f"r_prime must be >= 0, got {r_prime}")
    return (2.0 * r_prime + 1.0) / (2.0 * r_prime + 2.0)
