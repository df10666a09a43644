"""Discretized Wiener space in five minutes.

Grids, Brownian paths from reproducible counter-based streams, left-point
Ito sums, and the Cameron-Martin energy functional.
"""

import numpy as np

from innovlab import AdaptedSamples, RandomStream, TimeGrid, energy, ito_integral, primitive, sample_brownian

# A grid is just [0, horizon] cut into N steps.
grid = TimeGrid(steps=256)
print(f"grid: N={grid.steps}, dt={grid.dt:.5f}, t_N={grid.times[-1]}")

# Streams are pure functions of (seed, substream): same pair, same path.
stream = RandomStream(seed=2024, substream=0)
B = sample_brownian(grid, d=1, stream=stream)
B_again = sample_brownian(grid, d=1, stream=stream)
print("bit-identical resampling:", np.array_equal(B.values, B_again.values))

# Distinct substreams are independent; that is what makes ensembles
# reproducible no matter how they are chunked over workers.
B1 = sample_brownian(grid, d=1, stream=RandomStream(seed=2024, substream=1))
corr = np.corrcoef(B.increments()[:, 0], B1.increments()[:, 0])[0, 1]
print(f"cross-substream increment correlation: {corr:+.4f}")

# The Ito sum uses the left endpoint of each step:  sum a_k (X_{k+1} - X_k).
ones = AdaptedSamples(grid, np.ones((grid.steps, 1)))
print(f"int 1 dB = {ito_integral(ones, B):+.5f} vs B(1) = {B.terminal()[0]:+.5f}")

# Energy is the squared Cameron-Martin norm of the primitive.
ramp = AdaptedSamples(grid, grid.left_times[:, None])  # a'(t) = t
print(f"energy of a'(t)=t: {energy(ramp):.5f} (continuum value 1/3)")

# primitive() integrates a rate back into a path.
path = primitive(ramp)
print(f"primitive terminal: {path.terminal()[0]:.5f} (continuum value 1/2)")

# Monte Carlo sanity: terminal variance equals the horizon.
M = 20_000
terminal = np.array([
    sample_brownian(grid, 1, RandomStream(seed=7, substream=i)).terminal()[0]
    for i in range(M)
])
print(f"terminal variance over {M} paths: {terminal.var():.4f} (expect 1.0)")
