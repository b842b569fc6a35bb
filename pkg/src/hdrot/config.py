"""Simulation configuration: a flat TOML file with units spelled out in the keys."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path

import tomli

from .protocol import FluorescenceModel, TimelineConfig

__all__ = ["ConfigError", "FluorescenceConfig", "SimulationConfig", "load_config", "dump_config",
           "loads_config", "dumps_config"]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class FluorescenceConfig:
    background_counts_per_s: float = 200.0
    gain_counts_per_s_per_molecule: float = 2.0
    saturation_molecules: float = 0.0  # 0 disables saturation
    noise_sigma_counts_per_s: float = 10.0
    sample_interval_s: float = 0.1
    poisson_noise: bool = False

    def model(self, seed: int) -> FluorescenceModel:
        return FluorescenceModel(
            background_level=self.background_counts_per_s,
            gain=self.gain_counts_per_s_per_molecule,
            saturation_number=self.saturation_molecules or None,
            noise_sigma=self.noise_sigma_counts_per_s,
            rng_seed=int(seed),
            poisson=self.poisson_noise,
            sample_interval=self.sample_interval_s,
        )


# Calibrated defaults (see hdrot.pipeline.tune_* for how they are obtained):
#   pump rates: 35 s of cooling from 300 K equilibrium leaves 0.70 in N=0
#   REMPD rate: Method I background decays at 0.040/s, 25 s after REMPD turn-on
PUMP_RATE_DEFAULT = 0.2826
REMPD_RATE_DEFAULT = 0.2645


@dataclass(frozen=True)
class SimulationConfig:
    catalog_path: str = ""  # empty: bundled catalog
    magnetic_field_gauss: float = 1.0
    magnetic_field_spread_gauss: float = 0.35
    ion_temperature_liquid_K: float = 0.150
    ion_temperature_crystal_K: float = 0.012
    ion_mass_u: float = 3.02151
    molecule_count: float = 300.0
    ground_fraction: float = 0.7
    initial_state: str = "prepared"  # or "thermal": simulate the cooling phase too
    bbr_temperature_K: float = 300.0
    einstein_A_per_s: tuple[float, ...] = ()  # A(N->N-1), N=1..n_max; empty: rigid-rotor scaling
    einstein_A10_per_s: float = 7.0e-3
    n_max: int = 8
    rempd_rate_per_s: float = REMPD_RATE_DEFAULT
    rempd_saturated_rate_per_s: float = 200.0
    thz_peak_rate_per_s: float = 4.0
    thz_reference_temperature_K: float = 0.012  # peak rate quoted at this Doppler width
    pump_5p5_rate_per_s: float = PUMP_RATE_DEFAULT
    pump_2p7_rate_per_s: float = PUMP_RATE_DEFAULT
    master_seed: int = 20120301
    dt_s: float = 1e-3
    fit_window_s: tuple[float, float] = (0.0, 10.0)
    rate_window_s: tuple[float, float] = (20.0, 30.0)
    prep_s: float = 2.0
    cooling_s: float = 35.0
    observation_s: float = 60.0
    normalization_s: float = 3.0
    excitation_s: float = 3.0
    readout_s: float = 3.0
    fluorescence_I: FluorescenceConfig = field(default_factory=lambda: FluorescenceConfig(
        noise_sigma_counts_per_s=80.0))
    fluorescence_II: FluorescenceConfig = field(default_factory=FluorescenceConfig)

    def __post_init__(self):
        object.__setattr__(self, "einstein_A_per_s", tuple(float(a) for a in self.einstein_A_per_s))
        object.__setattr__(self, "fit_window_s", tuple(float(x) for x in self.fit_window_s))
        object.__setattr__(self, "rate_window_s", tuple(float(x) for x in self.rate_window_s))
        if self.initial_state not in ("prepared", "thermal"):
            raise ConfigError("initial_state must be 'prepared' or 'thermal'")
        if not 0.0 <= self.ground_fraction <= 1.0:
            raise ConfigError("ground_fraction must lie in [0, 1]")
        for name in ("molecule_count", "rempd_rate_per_s", "thz_peak_rate_per_s",
                     "pump_5p5_rate_per_s", "pump_2p7_rate_per_s", "magnetic_field_gauss",
                     "magnetic_field_spread_gauss"):
            if getattr(self, name) < 0:
                raise ConfigError("%s must be non-negative" % name)
        for name in ("ion_temperature_liquid_K", "ion_temperature_crystal_K", "ion_mass_u",
                     "bbr_temperature_K", "dt_s", "thz_reference_temperature_K"):
            if not getattr(self, name) > 0:
                raise ConfigError("%s must be positive" % name)
        if self.einstein_A_per_s and len(self.einstein_A_per_s) < self.n_max:
            raise ConfigError("einstein_A_per_s needs %d values (N=1..n_max)" % self.n_max)

    def ion_temperature(self, method: str) -> float:
        return self.ion_temperature_liquid_K if method == "I" else self.ion_temperature_crystal_K

    def fluorescence(self, method: str) -> FluorescenceConfig:
        return self.fluorescence_I if method == "I" else self.fluorescence_II

    def timeline_config(self) -> TimelineConfig:
        return TimelineConfig(prep=self.prep_s, cooling=self.cooling_s, observation=self.observation_s,
                              normalization=self.normalization_s, excitation=self.excitation_s,
                              readout=self.readout_s)

    def replace(self, **kw) -> "SimulationConfig":
        return dataclasses.replace(self, **kw)


# --- TOML round trip ---------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, str):
        return '"%s"' % v.replace("\\", "\\\\").replace('"', '\\"')
    if isinstance(v, (tuple, list)):
        return "[%s]" % ", ".join(_fmt(x) for x in v)
    raise TypeError("cannot write %r" % (v,))


def dumps_config(cfg: SimulationConfig) -> str:
    out = ["# hdrot simulation configuration; units are part of each key", "[simulation]"]
    nested = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, FluorescenceConfig):
            nested.append((f.name, v))
        else:
            out.append("%s = %s" % (f.name, _fmt(v)))
    for name, sub in nested:
        out += ["", "[%s]" % name]
        out += ["%s = %s" % (g.name, _fmt(getattr(sub, g.name))) for g in fields(sub)]
    return "\n".join(out) + "\n"


def _coerce(cls, table: dict, where: str):
    known = {f.name: f for f in fields(cls)}
    unknown = set(table) - set(known)
    if unknown:
        raise ConfigError("unknown keys in [%s]: %s" % (where, ", ".join(sorted(unknown))))
    defaults = cls()
    kw = {}
    for name, val in table.items():
        default = getattr(defaults, name)
        if isinstance(default, FluorescenceConfig):
            raise ConfigError("%s must be given as its own [%s] section" % (name, name))
        if isinstance(default, bool):
            if not isinstance(val, bool):
                raise ConfigError("%s must be true/false" % name)
        elif isinstance(default, int) and not isinstance(default, bool):
            if not isinstance(val, int) or isinstance(val, bool):
                raise ConfigError("%s must be an integer" % name)
        elif isinstance(default, float):
            if isinstance(val, bool) or not isinstance(val, (int, float)):
                raise ConfigError("%s must be a number" % name)
            val = float(val)
        elif isinstance(default, str) and not isinstance(val, str):
            raise ConfigError("%s must be a string" % name)
        kw[name] = val
    return kw


def loads_config(text: str) -> SimulationConfig:
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(str(exc)) from exc
    extra = set(doc) - {"simulation", "fluorescence_I", "fluorescence_II"}
    if extra:
        raise ConfigError("unknown sections: %s" % ", ".join(sorted(extra)))
    kw = _coerce(SimulationConfig, doc.get("simulation", {}), "simulation")
    for name in ("fluorescence_I", "fluorescence_II"):
        if name in doc:
            base = getattr(SimulationConfig(), name)
            kw[name] = dataclasses.replace(base, **_coerce(FluorescenceConfig, doc[name], name))
    try:
        return SimulationConfig(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> SimulationConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("cannot read config %s: %s" % (path, exc)) from exc
    return loads_config(text)


def dump_config(cfg: SimulationConfig, path) -> None:
    Path(path).write_text(dumps_config(cfg))
