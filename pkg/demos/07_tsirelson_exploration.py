"""Exploring the truncated iterated-fractional-part drift.

The classical construction has an infinite past; the truncated version
replaces it with an independent uniform seed at the first geometric level.
Whether the truncation shows an entropy-energy gap at desk scale is an
empirical question -- the continuum pathology needs infinitely many
levels, while on a discrete grid the innovation is always invertible, so
any reported gap mixes truncation effects with the documented downward
bias of the feature regression.  The numbers below are reported, not
gated.
"""

import numpy as np

from innovlab import RandomStream, TimeGrid, criterion_levels, make_model, simulate_ensemble
from innovlab.filtering import ensemble_conditional_drift, innovation_values

M = 8_000

for K, steps in [(2, 128), (4, 128), (6, 256), (8, 512)]:
    grid = TimeGrid(steps=steps)
    model = make_model("tsirelson", levels=K)
    sim = simulate_ensemble(model, grid, M, RandomStream(seed=61))
    filt = ensemble_conditional_drift(model, sim)
    Z = innovation_values(sim.U, filt.values, grid.dt)
    r = criterion_levels(Z, filt.values, grid, levels=(float("inf"),))[0]
    lo, hi = r.gap - 3 * r.gap_se, r.gap + 3 * r.gap_se
    print(f"K={K} N={steps:4d}: H={r.entropy:.5f} E={r.energy:.5f} "
          f"gap={r.gap:+.5f} CI3=[{lo:+.5f}, {hi:+.5f}] norm={r.norm_mean:.4f}")

print("""
Reading the table: the energy side is stable across K (the drift values
live in [0, 1)); the entropy side reflects how much of the filtered drift
the innovation-history features can explain.  The fractional-part map is
where the information hides -- increasing K pushes more of the drift's
dependence into fine oscillations that short feature windows cannot see,
which is the direction the continuum construction exploits.
""")
