"""Closed-form accuracy predictors for the reconstruction.

All formulas are empirical scaling laws in the number of waveforms ``n_wf``,
the effective number of detected modes ``n_mode`` and the mean photon number
``n`` of the occupied mode:

* mean real-mode infidelity   ``(n_mode/2)/n_wf * (1/n) * (1 + 1/(2n))``
* its standard deviation      ``sqrt(n_mode/2)/n_wf * (1/n) * (1 + 1/(2n))``
* vacuum photon-number spread ``sqrt(n_mode/n_wf)``
* photon-number bias          ``(n_mode/2)/n_wf * (1 + 1/(2n))``
* complex-mode infidelity between the balanced case (real formula at ``n/2``)
  and the real-target case ``sqrt(n_mode/n_wf) / n``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .errors import DomainError

REGIME_OK = 0.1
REGIME_WARN = 0.3
# parameter ranges over which the scaling laws were established by simulation
ENVELOPE = {"n_wf": (1e2, 1e7), "n_mode": (20.0, 500.0), "n": (1e-3, 1e2)}


@dataclass(frozen=True)
class AccuracyInputs:
    n_wf: float
    n_mode: float
    n: float

    def __post_init__(self):
        if not self.n_wf >= 1:
            raise DomainError(f"n_wf must be >= 1, got {self.n_wf}")
        if not self.n_mode >= 1:
            raise DomainError(f"n_mode must be >= 1, got {self.n_mode}")
        if not self.n >= 0:
            raise DomainError(f"n must be >= 0, got {self.n}")


@dataclass(frozen=True)
class AccuracyPrediction:
    mean_infidelity_real: float
    std_infidelity_real: float
    vacuum_dn: float
    mean_dn: float
    complex_bounds: tuple
    regime_ok: bool
    regime_ratio: float
    regime_tier: str
    extrapolated: bool

    def to_dict(self) -> dict:
        d = asdict(self)
        d["complex_bounds"] = list(self.complex_bounds)
        return d


def _check_n(n: float):
    if not n > 0:
        raise DomainError("infidelity predictions need n > 0")


def mean_infidelity_real(n_wf, n_mode, n) -> float:
    _check_n(n)
    return (n_mode / 2) / n_wf * (1 / n) * (1 + 1 / (2 * n))


def std_infidelity_real(n_wf, n_mode, n) -> float:
    _check_n(n)
    return math.sqrt(n_mode / 2) / n_wf * (1 / n) * (1 + 1 / (2 * n))


def vacuum_dn(n_wf, n_mode) -> float:
    return math.sqrt(n_mode / n_wf)


def mean_dn(n_wf, n_mode, n) -> float:
    _check_n(n)
    return (n_mode / 2) / n_wf * (1 + 1 / (2 * n))


def complex_bounds(n_wf, n_mode, n) -> tuple:
    """(balanced-mode lower edge, real-target upper edge) of the complex infidelity."""
    _check_n(n)
    lower = (n_mode / 2) / n_wf * (2 / n) * (1 + 1 / n)
    upper = (1 / n) * math.sqrt(n_mode / n_wf)
    return lower, upper


def regime_ratio(n_wf, n_mode, n) -> float:
    return math.inf if n == 0 else math.sqrt(n_mode / n_wf) / n


def regime_tier(ratio: float) -> str:
    if ratio <= REGIME_OK:
        return "ok"
    if ratio <= REGIME_WARN:
        return "warning"
    if ratio < 1.0:
        return "marginal"
    return "breakdown"


def in_envelope(n_wf, n_mode, n) -> bool:
    vals = {"n_wf": n_wf, "n_mode": n_mode, "n": n}
    return all(lo <= vals[k] <= hi for k, (lo, hi) in ENVELOPE.items())


def predict(inputs: AccuracyInputs) -> AccuracyPrediction:
    """Evaluate every predictor; infidelity fields are NaN when ``n == 0``."""
    w, m, n = inputs.n_wf, inputs.n_mode, inputs.n
    ratio = regime_ratio(w, m, n)
    if n > 0:
        mu, sd, bias = mean_infidelity_real(w, m, n), std_infidelity_real(w, m, n), mean_dn(w, m, n)
        bounds = complex_bounds(w, m, n)
    else:
        mu = sd = bias = math.nan
        bounds = (math.nan, math.nan)
    return AccuracyPrediction(mu, sd, vacuum_dn(w, m), bias, bounds, ratio <= REGIME_OK,
                              ratio, regime_tier(ratio), not in_envelope(w, m, n))


def required_waveforms(target_infidelity: float, n_mode: float, n: float,
                       regime: str = "real") -> int:
    """Smallest ``n_wf`` whose predicted infidelity does not exceed the target.

    ``regime`` is ``"real"`` (mean real-mode infidelity) or ``"complex_upper"``
    (upper edge of the complex band).
    """
    if not target_infidelity > 0:
        raise DomainError("target infidelity must be positive")
    _check_n(n)
    if regime == "real":
        def f(w): return mean_infidelity_real(w, n_mode, n)
        guess = (n_mode / 2) / target_infidelity / n * (1 + 1 / (2 * n))
    elif regime == "complex_upper":
        def f(w): return complex_bounds(w, n_mode, n)[1]
        guess = n_mode / (n * target_infidelity) ** 2
    else:
        raise DomainError(f"unknown regime {regime!r}")
    # float rounding in the inversion: tolerate a relative 1e-12 on the target
    tol = target_infidelity * (1 + 1e-12)
    w = max(1, math.floor(guess) - 1)
    while f(w) > tol:
        w += 1
    while w > 1 and f(w - 1) <= tol:
        w -= 1
    return w
