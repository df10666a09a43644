"""Girsanov reweighting of simulated ensembles.

The drift-removal exponential of a filtered drift against the innovation,

    log rho = - sum_k <uhat_k, dZ_k> - 1/2 sum_k |uhat_k|^2 dt,

defines the tilted measure under which the observation plays the role of
the driving noise.  Because the exponential need not integrate to one
(that hypothesis can fail, and with quantized noise it simply is false),
all downstream estimators use self-normalized weights, and a diagnostic
reports how far the raw mean is from one.  Localization caps the filtered
energy at a threshold by freezing the drift at the first grid time the
running energy exceeds it, which restores integrability for any bounded
threshold.

Log-domain arithmetic with max subtraction throughout: raw weights span
hundreds of nats on fine grids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import AdaptedSamples, Path
from .errors import DegeneracyError, NumericalError, ShapeError, UsageError
from .filtering import FilterEstimate

__all__ = [
    "LogWeight",
    "StoppingRule",
    "WeightedEnsemble",
    "NormalizationDiagnostic",
    "girsanov_log_weight",
    "log_weights_ensemble",
    "stop_indices",
    "localize_values",
    "active_mask",
    "localize",
    "normalization_diagnostic",
    "reweight",
]

UNLOCALIZED = math.inf


@dataclass(frozen=True)
class LogWeight:
    """Log Radon-Nikodym factor of the tilted measure on one path."""

    value: float
    level: float = UNLOCALIZED

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise NumericalError(f"log-weight must be finite, got {self.value}")


@dataclass(frozen=True)
class StoppingRule:
    """First grid index whose preceding cumulative filtered energy exceeds n."""

    threshold: float

    def __post_init__(self):
        if not self.threshold > 0:
            raise UsageError(f"stopping threshold must be positive, got {self.threshold}")


@dataclass(frozen=True)
class NormalizationDiagnostic:
    """Sample mean and standard error of exp(log-weight) with a pass flag.

    Passing means the mean is within three standard errors of one; a fail
    is the cue to run the localized pipeline instead of trusting raw
    weights.
    """

    mean: float
    se: float
    passed: bool


@dataclass(frozen=True)
class WeightedEnsemble:
    """Self-normalized importance weights over ensemble members."""

    log_weights: np.ndarray
    weights: np.ndarray
    ess: float
    level: float = UNLOCALIZED
    members: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return len(self.weights)


def log_weights_ensemble(uhat: np.ndarray, Z: np.ndarray, dt: float) -> np.ndarray:
    """Stacked log rho over an ensemble: uhat (m, N, d), Z (m, N+1, d)."""
    with np.errstate(invalid="ignore", over="ignore"):
        dZ = np.diff(Z, axis=1)
        ito = np.einsum("mkd,mkd->m", uhat, dZ)
        en = np.einsum("mkd,mkd->m", uhat, uhat) * dt
        out = -ito - 0.5 * en
    if not np.all(np.isfinite(out)):
        raise NumericalError("non-finite log-weight encountered")
    return out


def girsanov_log_weight(filtered: AdaptedSamples, Z: Path,
                        level: float = UNLOCALIZED) -> LogWeight:
    """Log drift-removal factor for one path."""
    if filtered.grid != Z.grid or filtered.dimension != Z.dimension:
        raise ShapeError("filtered drift and innovation live on different grids")
    val = log_weights_ensemble(filtered.values[None], Z.values[None], Z.grid.dt)[0]
    return LogWeight(float(val), level)


def stop_indices(uhat: np.ndarray, dt: float, threshold: float) -> np.ndarray:
    """Per-member stopping index: first k with sum_{j<k} |uhat_j|^2 dt > n.

    Returns N when the running energy never exceeds the threshold.
    """
    m, N = uhat.shape[0], uhat.shape[1]
    step_energy = np.einsum("mkd,mkd->mk", uhat, uhat) * dt
    before = np.concatenate([np.zeros((m, 1)), np.cumsum(step_energy, axis=1)], axis=1)
    exceeded = before[:, :-1] > threshold  # energy before step k, k = 0..N-1
    idx = np.where(exceeded.any(axis=1), exceeded.argmax(axis=1), N)
    return idx


def active_mask(stop_idx: np.ndarray, steps: int) -> np.ndarray:
    """Boolean (m, N) mask of steps strictly before each stopping index."""
    return np.arange(steps)[None, :] < stop_idx[:, None]


def localize_values(uhat: np.ndarray, stop_idx: np.ndarray) -> np.ndarray:
    """Zero the filtered drift from each member's stopping index onward."""
    mask = active_mask(stop_idx, uhat.shape[1])
    return uhat * mask[:, :, None]


def localize(filtered: FilterEstimate, rule: StoppingRule) -> FilterEstimate:
    """Freeze the filtered drift at the stopping time (zero rate afterwards)."""
    vals = filtered.values.values[None]
    idx = stop_indices(vals, filtered.values.grid.dt, rule.threshold)
    out = localize_values(vals, idx)[0]
    return FilterEstimate(AdaptedSamples(filtered.values.grid, out),
                          filtered.method, filtered.particle_count, filtered.ess)


def normalization_diagnostic(log_weights: np.ndarray) -> NormalizationDiagnostic:
    """Check the unit-mean property of the raw Girsanov exponential."""
    lw = np.asarray(log_weights, dtype=float)
    if lw.size < 100:
        raise UsageError(f"normalization diagnostic needs >= 100 members, got {lw.size}")
    top = np.max(lw)
    scaled = np.exp(lw - top)
    mean = float(np.exp(top) * scaled.mean())
    se = float(np.exp(top) * scaled.std(ddof=1) / np.sqrt(lw.size))
    passed = bool(np.isfinite(mean) and np.isfinite(se) and abs(mean - 1.0) <= 3.0 * se)
    return NormalizationDiagnostic(mean, se, passed)


def reweight(log_weights: np.ndarray, level: float = UNLOCALIZED,
             members: Optional[dict] = None) -> WeightedEnsemble:
    """Self-normalized weights w_i = exp(l_i - max l) / sum_j exp(l_j - max l)."""
    lw = np.asarray(log_weights, dtype=float)
    if lw.size < 2:
        raise UsageError(f"need at least two members, got {lw.size}")
    if np.any(np.isnan(lw)):
        raise NumericalError("NaN log-weight")
    top = np.max(lw)
    if not np.isfinite(top):
        raise DegeneracyError("all log-weights are -inf")
    w = np.exp(lw - top)
    w = w / w.sum()
    ess = float(1.0 / np.sum(w**2))
    return WeightedEnsemble(lw, w, ess, level, members or {})
