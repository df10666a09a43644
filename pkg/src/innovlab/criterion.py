"""Entropy and energy estimators for the innovation-filtration criterion.

For each localization level the pipeline estimates two numbers under the
self-normalized tilted measure:

* energy: half the expected localized filtered-drift energy;
* entropy: half the expected squared second-level fit, i.e. the energy of
  the projection of the filtered drift onto innovation-history features.

When the filtered drift is measurable with respect to the innovation
history the two agree (up to the feature-projection bias, whose direction
is downward on the entropy side, making equality verdicts conservative);
an information gap shows up as energy strictly above entropy.  Exact
reference values for the linear family come from `lingauss`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import TimeGrid
from .errors import UsageError
from .filtering import BasisSpec, FeatureBuilder, weighted_ridge_fit
from .girsanov import (
    UNLOCALIZED,
    active_mask,
    log_weights_ensemble,
    normalization_diagnostic,
    reweight,
    stop_indices,
)
from .lingauss import linear_gaussian_summary
from .models import DriftModel

__all__ = [
    "EQUALITY_CONSISTENT",
    "POSITIVE_GAP",
    "INCONCLUSIVE",
    "GAP_FLOOR",
    "LevelReport",
    "energy_under_nu",
    "entropy_jensen_estimator",
    "inequality_check",
    "classify_level",
    "criterion_verdict",
    "gaussian_path_kl",
    "criterion_levels",
    "DEFAULT_LEVELS",
]

EQUALITY_CONSISTENT = "EQUALITY-CONSISTENT"
POSITIVE_GAP = "POSITIVE-GAP"
INCONCLUSIVE = "INCONCLUSIVE"

# absolute floor (nats) below which a gap is treated as numerically void;
# absorbs discretization and feature-projection bias at desk scale
GAP_FLOOR = 0.02

DEFAULT_LEVELS = (0.5, 1.0, 2.0, 4.0, 8.0, UNLOCALIZED)


@dataclass(frozen=True)
class LevelReport:
    """Both sides of the criterion at one localization level."""

    level: float
    entropy: float
    entropy_se: float
    energy: float
    energy_se: float
    gap: float
    gap_se: float
    ess: float
    norm_mean: float
    norm_se: float
    norm_passed: bool
    verdict: str
    method: str


def _weighted_mean_se(weights: np.ndarray, values: np.ndarray) -> tuple[float, float]:
    """Self-normalized mean and delta-method standard error."""
    mean = float(weights @ values)
    se = float(np.sqrt(np.sum(weights**2 * (values - mean) ** 2)))
    return mean, se


def energy_under_nu(weights: np.ndarray, uhat_localized: np.ndarray,
                    dt: float) -> tuple[float, float]:
    """Half the weighted mean localized drift energy, with standard error."""
    if len(weights) != uhat_localized.shape[0]:
        raise UsageError("weights and ensemble sizes disagree")
    e = np.einsum("mkd,mkd->m", uhat_localized, uhat_localized) * dt
    mean, se = _weighted_mean_se(weights, 0.5 * e)
    return mean, se


def entropy_jensen_estimator(weights: np.ndarray, fits: Optional[np.ndarray],
                             dt: float, mask: Optional[np.ndarray] = None
                             ) -> tuple[float, float]:
    """Half the weighted mean energy of the second-level fits.

    fits: per-member fitted conditional drifts, shape (m, N, d); mask, when
    given, zeroes the steps at and beyond each member's stopping index
    (the indicator is itself an innovation-history functional, so masking
    the fit *is* the fit of the masked response).
    """
    if fits is None or fits.ndim != 3:
        raise UsageError("second-level fits for all steps are required")
    if len(weights) != fits.shape[0]:
        raise UsageError("weights and ensemble sizes disagree")
    if mask is not None:
        q = np.einsum("mkd,mkd,mk->m", fits, fits, mask.astype(float)) * dt
    else:
        q = np.einsum("mkd,mkd->m", fits, fits) * dt
    mean, se = _weighted_mean_se(weights, 0.5 * q)
    return mean, se


def inequality_check(entropy: float, entropy_se: float, energy: float,
                     energy_se: float) -> bool:
    """Entropy below energy within three combined standard errors.

    A few ulps of absolute slack cover the case where both sides are the
    same number reached through different reduction orders.
    """
    return entropy <= energy + 3.0 * math.hypot(entropy_se, energy_se) + 1e-12


def classify_level(gap: float, gap_se: float, floor: float = GAP_FLOOR) -> str:
    """Classify one level's gap.

    POSITIVE-GAP needs the gap to clear both the statistical band and the
    absolute floor.  EQUALITY-CONSISTENT needs the gap inside the band and
    the band itself narrow enough (3 se <= 2 floor) to mean something.
    Everything else is INCONCLUSIVE.
    """
    band = 3.0 * gap_se
    if gap > max(band, floor):
        return POSITIVE_GAP
    if abs(gap) <= max(band, floor) and band <= 2.0 * floor:
        return EQUALITY_CONSISTENT
    return INCONCLUSIVE


def criterion_verdict(reports: Sequence[LevelReport]) -> str:
    """Aggregate verdict: a gap at any level wins; equality needs all levels."""
    if not reports:
        raise UsageError("need at least one level report")
    verdicts = [r.verdict for r in reports]
    if POSITIVE_GAP in verdicts:
        return POSITIVE_GAP
    if all(v == EQUALITY_CONSISTENT for v in verdicts):
        return EQUALITY_CONSISTENT
    return INCONCLUSIVE


def gaussian_path_kl(model: DriftModel, grid: TimeGrid,
                     target: str = "innovation") -> float:
    """Exact relative entropy for the linear family.

    target "innovation": law of the innovation increments under the tilted
    measure against independent N(0, dt) increments.  target "observation":
    law of the observation increments under the sampling measure against
    the same reference.
    """
    s = linear_gaussian_summary(model, grid)
    if target == "innovation":
        return s.innovation_kl
    if target == "observation":
        return s.observation_kl
    raise UsageError(f"unknown target {target!r}")


def criterion_levels(Z: np.ndarray, uhat: np.ndarray, grid: TimeGrid,
                     levels: Sequence[float] = DEFAULT_LEVELS,
                     basis: BasisSpec = BasisSpec(),
                     floor: float = GAP_FLOOR,
                     method: str = "") -> list[LevelReport]:
    """Run the per-level criterion over a filtered ensemble.

    Z: stacked innovation values (m, N+1, d); uhat: stacked filtered drift
    (m, N, d).  For each level the filtered drift is localized, weights are
    rebuilt, and the second-level regression is re-solved under those
    weights (the response is the unlocalized drift; the localization
    indicator, being an innovation functional, multiplies the fit).
    """
    m, N, d = uhat.shape
    dt = grid.dt
    levels = list(levels)
    if not levels:
        raise UsageError("need at least one localization level")

    masks, weight_sets, diags, ensembles = [], [], [], []
    unlocalized_slot = None
    for lv in levels:
        if math.isinf(lv):
            mask = np.ones((m, N), dtype=bool)
        else:
            mask = active_mask(stop_indices(uhat, dt, lv), N)
        if mask.all() and unlocalized_slot is not None:
            # nothing stopped: identical to the unlocalized computation
            masks.append(masks[unlocalized_slot])
            weight_sets.append(weight_sets[unlocalized_slot])
            diags.append(diags[unlocalized_slot])
            ensembles.append(ensembles[unlocalized_slot])
            continue
        loc = uhat * mask[:, :, None]
        lw = log_weights_ensemble(loc, Z, dt)
        diag = normalization_diagnostic(lw) if m >= 100 else None
        ens = reweight(lw, level=lv)
        if mask.all():
            unlocalized_slot = len(masks)
        masks.append(mask)
        weight_sets.append(ens.weights)
        diags.append(diag)
        ensembles.append(ens)

    # one regression per step per distinct weight set, features shared
    L = len(levels)
    distinct = []
    slot_of = []
    for i in range(L):
        for j, k in enumerate(distinct):
            if weight_sets[k] is weight_sets[i]:
                slot_of.append(j)
                break
        else:
            slot_of.append(len(distinct))
            distinct.append(i)

    q = np.zeros((len(distinct), m))
    builder = FeatureBuilder(Z, dt, basis)
    for k in range(N):
        F = builder.features_at(k)
        for s, i in enumerate(distinct):
            w = weight_sets[i]
            fitted = np.empty((m, d))
            for j in range(d):
                _, fitted[:, j] = weighted_ridge_fit(F, uhat[:, k, j], w, basis.ridge)
            contrib = np.einsum("md,md->m", fitted, fitted) * dt
            q[s] += contrib * masks[i][:, k]

    reports = []
    for i, lv in enumerate(levels):
        w = weight_sets[i]
        mask = masks[i]
        e = np.einsum("mkd,mkd,mk->m", uhat, uhat, mask.astype(float)) * dt
        qi = q[slot_of[i]]
        energy, energy_se = _weighted_mean_se(w, 0.5 * e)
        entropy, entropy_se = _weighted_mean_se(w, 0.5 * qi)
        gap, gap_se = _weighted_mean_se(w, 0.5 * (e - qi))
        diag = diags[i]
        reports.append(
            LevelReport(
                level=lv,
                entropy=entropy,
                entropy_se=entropy_se,
                energy=energy,
                energy_se=energy_se,
                gap=gap,
                gap_se=gap_se,
                ess=ensembles[i].ess,
                norm_mean=diag.mean if diag else float("nan"),
                norm_se=diag.se if diag else float("nan"),
                norm_passed=diag.passed if diag else False,
                verdict=classify_level(gap, gap_se, floor),
                method=method or f"jensen[{basis.describe()}]",
            )
        )
    return reports
