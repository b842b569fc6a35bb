"""End-to-end runs: configuration -> rate model -> trajectory -> noisy traces ->
decay rates / Method II signals -> spectrum points."""
from __future__ import annotations

import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq

from . import analysis
from .config import SimulationConfig
from .constants import ATOMIC_MASS_UNIT
from .kinetics import (
    RateModel,
    Radiation,
    Trajectory,
    integrate,
    prepare_cooled_state,
    thermal_state,
)
from .levelcat import Catalog, FrequencyList, default_catalog, load_catalog
from .lineshape import DopplerParams, MagneticField, doppler_sigma
from .protocol import (
    DecayTrace,
    ProtocolTimeline,
    build_timeline,
    method2_levels,
    method2_signal,
    synthesize_trace,
)
from .radfield import EinsteinSet, ThermalEnvironment

__all__ = [
    "BACKGROUND_LIST",
    "SimulationResult",
    "catalog_for",
    "build_model",
    "run_trajectory",
    "rep_seed",
    "simulate",
    "spectrum",
    "tune_cooling_pump_rate",
    "tune_rempd_rate",
]

BACKGROUND_LIST = "detuned500"


def catalog_for(cfg: SimulationConfig) -> Catalog:
    return load_catalog(cfg.catalog_path) if cfg.catalog_path else default_catalog()


def _einstein(cfg: SimulationConfig) -> EinsteinSet:
    if cfg.einstein_A_per_s:
        return EinsteinSet({n + 1: a for n, a in enumerate(cfg.einstein_A_per_s)})
    return EinsteinSet.rigid_rotor(cfg.einstein_A10_per_s, cfg.n_max)


def build_model(cfg: SimulationConfig, method: str, catalog: Catalog | None = None,
                rempd_rate: float | None = None) -> RateModel:
    """Rate model for one method.

    The THz peak rate is quoted at the Doppler width of
    ``thz_reference_temperature_K`` and scaled by sigma_ref / sigma, keeping
    the integrated line strength fixed as the ions heat up.
    """
    catalog = catalog or catalog_for(cfg)
    mass = cfg.ion_mass_u * ATOMIC_MASS_UNIT
    doppler = DopplerParams(cfg.ion_temperature(method), mass, catalog.reference_frequency)
    ref = DopplerParams(cfg.thz_reference_temperature_K, mass, catalog.reference_frequency)
    peak = cfg.thz_peak_rate_per_s * doppler_sigma(ref) / doppler_sigma(doppler)
    return RateModel(
        einstein=_einstein(cfg),
        env=ThermalEnvironment(cfg.bbr_temperature_K, catalog.reference_frequency / 2.0),
        n_max=cfg.n_max,
        lines=catalog.lines,
        thz_peak_rate=peak,
        rempd_rate=cfg.rempd_rate_per_s if rempd_rate is None else rempd_rate,
        pump_5p5_rate=cfg.pump_5p5_rate_per_s,
        pump_2p7_rate=cfg.pump_2p7_rate_per_s,
        magnetic_field=MagneticField(cfg.magnetic_field_gauss, cfg.magnetic_field_spread_gauss),
        doppler=doppler,
    )


def run_trajectory(cfg: SimulationConfig, method: str, flist: FrequencyList,
                   catalog: Catalog | None = None, rempd_rate: float | None = None,
                   t_stop: float | None = None) -> tuple[ProtocolTimeline, Trajectory]:
    """Integrate one data point.

    With ``initial_state = "prepared"`` the cooled population is placed at REMPD
    turn-on and only the rest of the timeline is integrated (nothing is lost
    before then).  With ``"thermal"`` the run starts in 300 K equilibrium and
    the cooling phase is simulated.
    """
    model = build_model(cfg, method, catalog, rempd_rate)
    tl = build_timeline(method, flist, cfg.timeline_config())
    t_end = tl.duration if t_stop is None else t_stop
    if cfg.initial_state == "prepared":
        s = prepare_cooled_state(cfg.molecule_count, cfg.ground_fraction, cfg.n_max, env=model.env)
        s.time = tl.rempd_start
    else:
        s = thermal_state(cfg.molecule_count, model.env, cfg.n_max)
    return tl, integrate(s, model, tl, t_end, dt=cfg.dt_s)


def rep_seed(master_seed: int, method: str, list_name: str, rep: int) -> int:
    """Seed of one repetition; depends only on its labels, not on run order."""
    key = zlib.crc32(("%s/%s" % (method, list_name)).encode())
    return int(np.random.SeedSequence([master_seed, key, rep]).generate_state(1)[0])


@dataclass
class SimulationResult:
    method: str
    list_name: str
    timeline: ProtocolTimeline
    trajectory: Trajectory
    traces: list[DecayTrace]
    values: list[float]  # decay rate (I) or relative decrease (II) per repetition
    fits: list[analysis.FitResult]

    @property
    def average(self) -> DecayTrace:
        return analysis.average_traces(self.traces)


def _rep_value(cfg: SimulationConfig, method: str, tl: ProtocolTimeline, trace: DecayTrace):
    fc = cfg.fluorescence(method)
    if method == "I":
        # the level without molecules is known, so fit the excess without an offset
        sub = trace.replace(fluorescence=trace.fluorescence - fc.background_counts_per_s)
        fit = analysis.fit_exponential(sub, cfg.fit_window_s, offset=False)
        return fit.rate, fit
    before, after = method2_levels(trace, tl, background=fc.background_counts_per_s)
    floor = fc.noise_sigma_counts_per_s
    return 1.0 - method2_signal(before, after, noise_floor=floor), None


def simulate(cfg: SimulationConfig, method: str, list_name: str, reps: int = 1,
             catalog: Catalog | None = None) -> SimulationResult:
    """Run ``reps`` seeded repetitions of one (method, list) data point.

    All repetitions share one deterministic trajectory and differ only in
    measurement noise.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    catalog = catalog or catalog_for(cfg)
    flist = catalog.frequency_list(list_name)
    tl, traj = run_trajectory(cfg, method, flist, catalog)
    fc = cfg.fluorescence(method)
    traces, values, fits = [], [], []
    for rep in range(reps):
        seed = rep_seed(cfg.master_seed, method, list_name, rep)
        tr = synthesize_trace(traj, fc.model(seed), tl, rep=rep)
        v, fit = _rep_value(cfg, method, tl, tr)
        traces.append(tr)
        values.append(v)
        if fit is not None:
            fits.append(fit)
    return SimulationResult(method, list_name, tl, traj, traces, values, fits)


def _simulate_job(args):
    cfg, method, name, reps = args
    res = simulate(cfg, method, name, reps)
    return name, res.values


def spectrum(cfg: SimulationConfig, method: str, lists, reps: int = 9,
             workers: int = 1) -> list[analysis.SpectrumPoint]:
    """One spectrum point per list.

    Method I points are decay rates divided by the mean background rate of the
    500 MHz detuned list (simulated even if not requested); Method II points are
    mean relative decreases in molecule number.
    """
    lists = list(lists)
    if not lists:
        raise ValueError("need at least one frequency list")
    names = list(lists)
    if method == "I" and BACKGROUND_LIST not in names:
        names.append(BACKGROUND_LIST)
    jobs = [(cfg, method, n, reps) for n in names]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = dict(ex.map(_simulate_job, jobs))
    else:
        results = dict(map(_simulate_job, jobs))
    norm = None
    if method == "I":
        norm = analysis.aggregate(results[BACKGROUND_LIST]).normalized_signal
    return [analysis.aggregate(results[n], norm, list_name=n, method=method) for n in lists]


# --- calibration ---------------------------------------------------------------------

def tune_cooling_pump_rate(cfg: SimulationConfig | None = None, target: float = 0.7) -> float:
    """Common 5.5/2.7 um pump rate for which cooling from equilibrium ends with
    ``target`` of the molecules in N=0 after ``cooling_s``."""
    cfg = cfg or SimulationConfig()
    base = build_model(cfg, "I").with_radiation(Radiation(cooling_5p5=True, cooling_2p7=True))

    def ground_after(rate):
        m = replace(base, pump_5p5_rate=rate, pump_2p7_rate=rate)
        tr = integrate(thermal_state(1.0, m.env, cfg.n_max), m, None, cfg.cooling_s,
                       dt=cfg.dt_s, record_every=10**9)
        return tr.manifolds()[-1, 0] - target

    return brentq(ground_after, 1e-3, 10.0, xtol=1e-6)


def tune_rempd_rate(cfg: SimulationConfig | None = None, target: float = 0.040) -> float:
    """REMPD rate for which the Method I background decays at ``target`` (s^-1)
    at the centre of ``rate_window_s``."""
    cfg = cfg or SimulationConfig()
    catalog = catalog_for(cfg)
    flist = catalog.frequency_list(BACKGROUND_LIST)
    lo, hi = cfg.rate_window_s

    def rate_at(gd):
        tl = build_timeline("I", flist, cfg.timeline_config())
        _, tr = run_trajectory(cfg, "I", flist, catalog, rempd_rate=gd,
                               t_stop=tl.rempd_start + hi + 1.0)
        t = tr.times - tl.rempd_start
        return analysis.local_decay_rate(t, tr.molecules, (lo, hi)) - target

    return brentq(rate_at, 1e-3, 50.0, xtol=1e-6)
