"""Physical constants (CODATA 2018, exact where the SI fixes them) and HD+ defaults."""

PLANCK = 6.62607015e-34  # J s
BOLTZMANN = 1.380649e-23  # J/K
SPEED_OF_LIGHT = 299792458.0  # m/s
ATOMIC_MASS_UNIT = 1.66053906660e-27  # kg

HD_ION_MASS_U = 3.02151
HD_ION_MASS = HD_ION_MASS_U * ATOMIC_MASS_UNIT

# spinless (v=0,N=0) -> (v'=0,N'=1) frequency
F0_THEORY = 1_314_925_752_000.0  # Hz

MHZ = 1e6
KHZ = 1e3
