"""Both spectra: decay-rate ratios (Method I) and relative losses (Method II)."""
# %%
from hdrot import SimulationConfig, spectrum

cfg = SimulationConfig()

# %% Method I: liquid-phase ions, rates divided by the 500 MHz detuned mean.
for p in spectrum(cfg, "I", ["A'", "B", "C", "detuned500"], reps=9, workers=4):
    print("I   %-10s %6.3f +- %.3f" % (p.list_name, p.normalized_signal, p.stddev))

# %% Method II: crystallised ions, mean relative decrease after 3 s of excitation.
for p in spectrum(cfg, "II", ["A", "D", "E", "B", "C", "detuned500"], reps=9, workers=4):
    print("II  %-10s %6.3f +- %.3f" % (p.list_name, p.normalized_signal, p.stddev))

# %% A hotter ensemble smears the line and the A' contrast shrinks.
hot = cfg.replace(ion_temperature_liquid_K=0.4)
for p in spectrum(hot, "I", ["A'", "detuned500"], reps=9, workers=2):
    print("I @ 400 mK  %-10s %6.3f +- %.3f" % (p.list_name, p.normalized_signal, p.stddev))
