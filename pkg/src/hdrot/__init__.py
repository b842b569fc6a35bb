"""Simulation and analysis of THz rotational spectroscopy on trapped HD+ ions.

Modules
-------
levelcat   level structure, line catalog and excitation frequency lists
radfield   black-body occupancy, Einstein rates, thermal populations
lineshape  Doppler widths, Zeeman line positions, THz excitation rates
kinetics   population rate equations and their RK4 integration
protocol   Method I / II timelines and fluorescence trace synthesis
analysis   exponential decay fits and spectrum aggregation
pipeline   end-to-end runs built from a SimulationConfig
"""
from .analysis import (
    DegenerateFitError,
    FitResult,
    SpectrumPoint,
    aggregate,
    average_traces,
    fit_exponential,
    local_decay_rate,
)
from .config import ConfigError, SimulationConfig, load_config
from .kinetics import (
    PopulationState,
    Radiation,
    RateModel,
    decay_rate,
    derivatives,
    integrate,
    prepare_cooled_state,
)
from .levelcat import (
    Catalog,
    FrequencyList,
    HyperfineLine,
    HyperfineState,
    builtin_lists,
    default_catalog,
    load_catalog,
    save_catalog,
    targeted_lines,
)
from .lineshape import (
    DopplerParams,
    MagneticField,
    doppler_fwhm,
    excitation_rate,
    instantaneous_thz_frequency,
    line_position,
)
from .pipeline import simulate, spectrum
from .protocol import FluorescenceModel, build_timeline, method2_signal, synthesize_trace
from .radfield import EinsteinSet, ThermalEnvironment, bbr_rates, planck_occupancy, thermal_rotational_populations

__version__ = "0.1.0"
