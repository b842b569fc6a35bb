"""Room-temperature radiation and the rotational populations it sets up."""
# %%
import numpy as np

from hdrot import EinsteinSet, ThermalEnvironment, bbr_rates, planck_occupancy, thermal_rotational_populations
from hdrot.kinetics import prepare_cooled_state

env = ThermalEnvironment(300.0)
ein = EinsteinSet.rigid_rotor()

# %% Photon occupancy at the first few rotational transitions.
for n in range(1, 5):
    f = env.transition_frequency(n)
    print("N=%d-%d  %.4f THz  nbar = %.4f" % (n - 1, n, f / 1e12, planck_occupancy(f, 300.0)))

# %% Absorption, stimulated and spontaneous rates (per second) per transition.
for n in range(1, 5):
    up, stim, spont = bbr_rates(ein, env, 2 * n - 1, 2 * n + 1, n_upper=n)
    print("N=%d<->%d  up %.4f  stim %.4f  spont %.4f" % (n - 1, n, up, stim, spont))

# %% Thermal distribution versus the rotationally cooled start.
p = thermal_rotational_populations(env, 8)
s = prepare_cooled_state(1.0, 0.7)
cooled = s.manifolds() / s.total
for n in range(6):
    print("N=%d  thermal %.4f  cooled %.4f" % (n, p[n], cooled[n]))
print("p0 - p1: thermal %.4f, cooled %.4f" % (p[0] - p[1], cooled[0] - cooled[1]))
