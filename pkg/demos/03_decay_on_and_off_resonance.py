"""A single Method I data point: molecules lost on resonance versus the background."""
# %%
import numpy as np

from hdrot import SimulationConfig, simulate
from hdrot.analysis import fit_exponential, local_decay_rate

cfg = SimulationConfig()
runs = {name: simulate(cfg, "I", name, reps=10) for name in ("A'", "detuned500")}

# %% Noise-free molecule number after REMPD turn-on.
for name, res in runs.items():
    t = res.trajectory.times - res.timeline.rempd_start
    m = res.trajectory.molecules
    marks = [0, 5, 10, 20, 40]
    print("%-11s" % name + "  ".join("t=%2ds %6.1f" % (k, np.interp(k, t, m)) for k in marks))
    print("%-11s local rate at 25 s %.4f/s" % ("", local_decay_rate(t, m, cfg.rate_window_s)))

# %% Fits to the averaged, background-subtracted trace over the first 10 s.
bg = cfg.fluorescence_I.background_counts_per_s
for name, res in runs.items():
    avg = res.average
    fit = fit_exponential(avg.replace(fluorescence=avg.fluorescence - bg), cfg.fit_window_s, offset=False)
    rates = np.array(res.values)
    print("%-10s average fit %.4f/s; single decays %.4f +- %.4f/s" % (
        name, fit.rate, rates.mean(), rates.std(ddof=1)))
