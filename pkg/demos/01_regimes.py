import numpy as np

from mutualism import (JumpMeasure, classify_regime, constant_model, find_theta, moment_bound,
                       permanence_bounds)

# ### Predicted regimes
#
# Each species grows at a per-capita rate that rises from `a1` (partner absent)
# towards `a2` (partner abundant), minus crowding `c x`.  White noise and the
# two kinds of jumps enter through a single penalty per species, so the
# classification only needs the coefficient functions.

extinct = constant_model(a1=0.1, c=0.5, sigma=1.0)
permanent = constant_model(a1=0.6, c=0.5, sigma=0.4)
gap = constant_model(a1=0.2, a2=0.8, sigma=1.0)

for m in (extinct, permanent, gap):
    print(classify_regime(m).summary())

# The permanence margin is the smallest of the two worst-case net growth
# rates.  When it is positive, the search for a small exponent `theta` at
# which the Lyapunov coefficient `K0` turns positive succeeds.

print("theta, K0 =", find_theta(permanent))
print("no theta for the extinct model:", find_theta(extinct))

# ### Jumps change the penalty
#
# Centred jumps always cost growth (the convexity term `g - ln(1+g)` is
# nonnegative).  Raw jumps with `d > 0` add `ln(1+d)` per unit rate, so they
# can rescue a population the diffusion alone would drive to extinction.

rescued = constant_model(a1=0.1, sigma=1.0, pi2=JumpMeasure((0.0,), (2.0,)), delta=(0.5,))
print(classify_regime(rescued).summary())

# ### Bounds
#
# `moment_bound` is the supremum over time and state that caps the long-run
# p-th moment.  `permanence_bounds` turns it into an interval `[h, H]` holding
# each species with probability at least `1 - eps`.

for p in (1.0, 2.0):
    print(f"K({p:g}) =", [round(moment_bound(permanent, i, p), 6) for i in (0, 1)])

for eps in (0.2, 0.05, 0.01):
    b = permanence_bounds(permanent, eps)
    print(f"eps = {eps:<5} h = {np.round(b.h, 6)}  H = {np.round(b.H, 2)}")
