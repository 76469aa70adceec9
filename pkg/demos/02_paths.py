import numpy as np

from mutualism import (JumpMeasure, Scheme, constant_model, generate_noise_path, simulate)
from mutualism.functions import Periodic
from mutualism.model import MutualismModel, SpeciesCoefficients

# ### One noise path, two schemes
#
# A `NoisePath` holds every random ingredient of one realization: the
# Brownian increments on a grid that includes each jump time, and the jump
# events themselves.  Both integrators consume the same path.

m = constant_model(a1=0.9, a2=1.2, c=0.5, sigma=0.3,
                   pi1=JumpMeasure((0.0,), (1.0,)), gamma=(-0.2,),
                   pi2=JumpMeasure((1.0,), (0.5,)), delta=(0.3,))
path = generate_noise_path(m, horizon=20.0, n_steps=2000, seed=3, path_index=0)
print(len(path.events), "jump events on a grid of", len(path.times), "times")

log_traj = simulate(m, path, Scheme.LOG_EULER)
direct = simulate(m, path, Scheme.DIRECT_EULER)
print("x(T), log scheme:   ", log_traj.final)
print("x(T), direct scheme:", direct.final)
print("largest relative gap:", np.max(np.abs(log_traj.states - direct.states) / log_traj.states))

# The log scheme integrates `ln x`, so states stay positive however large the
# step.  The direct scheme can overshoot below zero; it clamps and counts.

coarse = generate_noise_path(m, horizon=20.0, n_steps=20, seed=3, path_index=0)
print("breaches at dt = 1:", simulate(m, coarse, Scheme.DIRECT_EULER).breaches)
print("min state, log scheme at dt = 1:", simulate(m, coarse).states.min())

# ### Seasonal coefficients
#
# Coefficients may be periodic or piecewise constant.  Here the cooperative
# benefit swings with period 1 while crowding stays fixed.

sp = SpeciesCoefficients(Periodic(0.6, 0.4, 1.0), Periodic(1.4, 0.3, 1.0), Periodic(0.5, 0.0, 1.0),
                         Periodic(0.3, 0.1, 1.0))
seasonal = MutualismModel((sp, sp), JumpMeasure(), JumpMeasure(), (0.5, 2.0))
traj = simulate(seasonal, generate_noise_path(seasonal, 30.0, 3000, 0, 0))
late = traj.times > 20
print("late-window mean:", traj.states[late].mean(axis=0))
