"""How the two calibrated rates in the default configuration are obtained."""
# %%
from hdrot.config import PUMP_RATE_DEFAULT, REMPD_RATE_DEFAULT
from hdrot.pipeline import tune_cooling_pump_rate, tune_rempd_rate

# %% Pump rate giving 70 % ground-state population after 35 s of cooling.
pump = tune_cooling_pump_rate()
print("pump rate  %.6f/s  (default %.4f)" % (pump, PUMP_RATE_DEFAULT))

# %% Dissociation rate giving a 0.04/s background decay 25 s into the observation.
gd = tune_rempd_rate()
print("REMPD rate %.6f/s  (default %.4f)" % (gd, REMPD_RATE_DEFAULT))

# %% Other targets work the same way.
for target in (0.03, 0.05, 0.06):
    print("background %.2f/s  ->  REMPD rate %.4f/s" % (target, tune_rempd_rate(target=target)))
