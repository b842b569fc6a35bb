"""Where the targeted hyperfine lines sit, and how they move with magnetic field."""
# %%
import numpy as np

from hdrot import default_catalog, doppler_fwhm, DopplerParams, line_position

cat = default_catalog()
print("reference frequency %.3f MHz" % (cat.reference_frequency / 1e6))
print("%d lines, %d targeted" % (len(cat.lines), len(cat.targeted)))

# %% Offsets (MHz) of the targeted lines against the field.
fields = np.linspace(0.0, 2.0, 5)
print("line".ljust(34) + "".join("%9.1f G" % b for b in fields))
for ln in cat.targeted:
    print(ln.label.ljust(34) + "".join("%11.4f" % (line_position(ln, b) / 1e6) for b in fields))

# %% The lists step through offsets; at 1 G every entry of list A lands on a line.
for name, fl in cat.lists.items():
    print("%-11s %s" % (name, ", ".join("%.4f" % (e / 1e6) for e in fl.entries)))

# %% Compare the Zeeman shifts above with the thermal width of the ions.
for T in (0.010, 0.012, 0.150):
    print("T = %5.0f mK   FWHM = %6.1f kHz" % (T * 1e3, doppler_fwhm(DopplerParams(T)) / 1e3))
