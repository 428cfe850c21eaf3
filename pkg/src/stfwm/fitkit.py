"""Delay-scan fitting: Gaussian-plus-baseline least squares and derived ratios.

The coincidence counts versus seed/pump delay follow a Gaussian bump on a
flat floor; the accidentals stay flat.  This module fits both, builds the
corner-scan confidence band, and turns the fit into the peak-to-baseline
ratio and its first-order error.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

MAX_ITER = 200
REL_TOL = 1e-8


class FitError(RuntimeError):
    """Raised when a caller requires a converged fit and none was reached."""


@dataclass(frozen=True)
class DelayScanPoint:
    tau_ps: float
    cc_count: float
    acc_count: float

    def __post_init__(self):
        if self.cc_count < 0 or self.acc_count < 0:
            raise ValueError("counts must be >= 0")

    @property
    def cc_err(self) -> float:
        return math.sqrt(max(self.cc_count, 1.0))

    @property
    def acc_err(self) -> float:
        return math.sqrt(max(self.acc_count, 1.0))


@dataclass
class GaussianFit:
    """A * exp(-(tau - tau0)^2 / (2 w^2)) + B with w in std-dev convention."""

    amplitude: float
    tau0_ps: float
    width_ps: float
    baseline: float
    covariance: np.ndarray
    residual_sum: float
    converged: bool
    n_iter: int

    @property
    def params(self) -> np.ndarray:
        return np.array([self.amplitude, self.tau0_ps, self.width_ps, self.baseline])

    @property
    def param_errors(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    @property
    def fwhm_ps(self) -> float:
        return 2.0 * math.sqrt(2.0 * math.log(2.0)) * self.width_ps


@dataclass
class BaselineFit:
    value: float
    stderr: float
    slope: float
    slope_stderr: float

    @property
    def slope_significance(self) -> float:
        return abs(self.slope) / self.slope_stderr if self.slope_stderr > 0 else 0.0


def _model(p: np.ndarray, tau: np.ndarray) -> np.ndarray:
    a, t0, w, b = p
    return a * np.exp(-((tau - t0) ** 2) / (2.0 * w * w)) + b


def _jacobian(p: np.ndarray, tau: np.ndarray) -> np.ndarray:
    a, t0, w, _ = p
    x = tau - t0
    e = np.exp(-(x**2) / (2.0 * w * w))
    jac = np.empty((tau.size, 4))
    jac[:, 0] = e
    jac[:, 1] = a * e * x / (w * w)
    jac[:, 2] = a * e * x * x / (w**3)
    jac[:, 3] = 1.0
    return jac


def _initial_guess(tau: np.ndarray, y: np.ndarray) -> np.ndarray:
    order = np.argsort(tau)
    tau_s, y_s = tau[order], y[order]
    edge = max(1, tau.size // 6)
    baseline = float(np.median(np.concatenate([y_s[:edge], y_s[-edge:]])))
    amp = float(y.max() - baseline)
    t0 = float(tau[np.argmax(y)])
    half = baseline + 0.5 * amp
    above = tau_s[y_s > half]
    if amp > 0 and above.size >= 2 and np.ptp(above) > 0:
        width = np.ptp(above) / 2.355
    else:
        width = (tau.max() - tau.min()) / 6.0 or 1.0
    return np.array([amp, t0, width, baseline])


def fit_delay_scan(points: list[DelayScanPoint]) -> GaussianFit:
    """Weighted Levenberg-Marquardt fit of the coincidence delay scan.

    Weights are 1/max(count, 1) (Poisson); the Jacobian is analytic; accepted
    steps never increase the weighted residual sum.  Covariance is the inverse
    weighted normal matrix at the optimum.
    """
    if len(points) < 6:
        raise ValueError(f"need >= 6 scan points, got {len(points)}")
    tau = np.array([p.tau_ps for p in points], dtype=float)
    y = np.array([p.cc_count for p in points], dtype=float)
    wgt = 1.0 / np.maximum(y, 1.0)
    sw = np.sqrt(wgt)

    p = _initial_guess(tau, y)
    if p[2] <= 0:
        p[2] = 1.0
    res = sw * (y - _model(p, tau))
    cost = float(res @ res)
    lam = 1e-3
    converged = False
    it = 0
    for it in range(1, MAX_ITER + 1):
        jac = sw[:, None] * _jacobian(p, tau)
        jtj = jac.T @ jac
        grad = jac.T @ res
        accepted = False
        for _ in range(30):
            damped = jtj + lam * np.diag(np.clip(np.diag(jtj), 1e-12, None))
            try:
                step = np.linalg.solve(damped, grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            p_new = p + step
            p_new[2] = abs(p_new[2]) or 1e-9  # width sign is a gauge freedom
            res_new = sw * (y - _model(p_new, tau))
            cost_new = float(res_new @ res_new)
            if cost_new <= cost:
                rel = (cost - cost_new) / max(cost, 1e-300)
                p, res, cost = p_new, res_new, cost_new
                lam = max(lam / 3.0, 1e-12)
                accepted = True
                if rel < REL_TOL:
                    converged = True
                break
            lam *= 10.0
        if not accepted:
            converged = True  # no damped step improves: stalled at a minimum
            break
        if converged:
            break

    jac = sw[:, None] * _jacobian(p, tau)
    jtj = jac.T @ jac
    try:
        cov = np.linalg.inv(jtj)
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(jtj)
    cov = 0.5 * (cov + cov.T)
    return GaussianFit(
        amplitude=float(p[0]),
        tau0_ps=float(p[1]),
        width_ps=float(abs(p[2])),
        baseline=float(p[3]),
        covariance=cov,
        residual_sum=cost,
        converged=converged,
        n_iter=it,
    )


def fit_baseline(points: list[DelayScanPoint]) -> BaselineFit:
    """Weighted constant fit of the accidentals plus a slope check.

    The slope of a weighted straight-line fit (with its standard error) is
    reported so delay-independence can be verified.
    """
    if len(points) < 2:
        raise ValueError(f"need >= 2 points, got {len(points)}")
    tau = np.array([p.tau_ps for p in points], dtype=float)
    y = np.array([p.acc_count for p in points], dtype=float)
    w = 1.0 / np.maximum(y, 1.0)

    sw = w.sum()
    value = float((w * y).sum() / sw)
    stderr = float(1.0 / math.sqrt(sw))

    # weighted straight line for the flatness statistic
    tbar = (w * tau).sum() / sw
    sxx = (w * (tau - tbar) ** 2).sum()
    if sxx > 0:
        slope = float((w * (tau - tbar) * y).sum() / sxx)
        slope_err = float(1.0 / math.sqrt(sxx))
    else:
        slope, slope_err = 0.0, float("inf")
    return BaselineFit(value, stderr, slope, slope_err)


def confidence_band(
    fit: GaussianFit, tau_grid: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Corner-scan band: min/max of the model over all 16 parameter +-sigma corners.

    Presentation-grade (matches how the scan figure's shaded band is built),
    not an inferential interval.
    """
    if not np.all(np.isfinite(fit.covariance)):
        raise ValueError("covariance is not finite")
    tau_grid = np.asarray(tau_grid, dtype=float)
    sigma = fit.param_errors
    lo = np.full(tau_grid.shape, np.inf)
    hi = np.full(tau_grid.shape, -np.inf)
    for signs in itertools.product((-1.0, 1.0), repeat=4):
        p = fit.params + np.array(signs) * sigma
        p[2] = max(p[2], 1e-6 * max(fit.width_ps, 1.0))
        curve = _model(p, tau_grid)
        np.minimum(lo, curve, out=lo)
        np.maximum(hi, curve, out=hi)
    return lo, hi


def r_prime(fit: GaussianFit) -> tuple[float, float]:
    """Peak-to-baseline ratio of the fitted scan evaluated at zero delay.

    Returns (value, first-order propagated error); the baseline must be
    positive for the ratio to exist.
    """
    a, t0, w, b = fit.params
    if b <= 0:
        raise ValueError(f"baseline must be > 0, got {b}")
    e = math.exp(-(t0 * t0) / (2.0 * w * w))
    value = (a * e + b) / b
    grad = np.array(
        [
            e / b,
            -a * e * t0 / (w * w * b),
            a * e * t0 * t0 / (w**3 * b),
            -a * e / (b * b),
        ]
    )
    var = float(grad @ fit.covariance @ grad)
    return float(value), math.sqrt(max(var, 0.0))
