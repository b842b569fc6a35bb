"""Acceptance checks shared by the test suite and ``hdrot selftest``.

Each check returns a :class:`Check` holding a pass flag and a one-line detail
string with the measured numbers.
"""
from __future__ import annotations

import math
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import analysis, kinetics, pipeline
from .config import SimulationConfig
from .constants import HD_ION_MASS
from .kinetics import Radiation, integrate, prepare_cooled_state, stationary_distribution
from .levelcat import default_catalog
from .lineshape import DopplerParams, doppler_fwhm, line_position
from .radfield import (
    EinsteinSet,
    ThermalEnvironment,
    bbr_rates,
    planck_occupancy,
    thermal_rotational_populations,
)

__all__ = ["Check", "CHECKS", "iter_checks", "run_all"]


@dataclass(frozen=True)
class Check:
    number: int
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return "[%s] %d. %s: %s" % ("PASS" if self.passed else "FAIL", self.number, self.name, self.detail)


def _within(x, target, rel):
    return abs(x - target) <= rel * abs(target)


def doppler_width() -> Check:
    w = {T: doppler_fwhm(DopplerParams(T, HD_ION_MASS)) for T in (0.010, 0.015, 0.100, 0.200)}
    ok = all(54e3 <= w[T] <= 67e3 for T in (0.010, 0.015)) and abs(w[0.100] - 171e3) < 1e3
    detail = "FWHM 10 mK %.1f kHz, 15 mK %.1f kHz, 100 mK %.1f kHz (200 mK %.1f kHz)" % tuple(
        w[T] / 1e3 for T in (0.010, 0.015, 0.100, 0.200))
    return Check(1, "Doppler width", ok, detail)


def bbr_consistency() -> Check:
    env = ThermalEnvironment(300.0)
    ein = EinsteinSet.rigid_rotor()
    absorb, _, _ = bbr_rates(ein, env, 1, 3, n_upper=1)
    _, stim, spont = bbr_rates(ein, env, 3, 5, n_upper=2)
    ratio = stim / spont
    nbar = planck_occupancy(env.transition_frequency(2), 300.0)
    ok = (_within(absorb, 0.09, 0.10) and math.isclose(ratio, nbar, rel_tol=1e-12)
          and _within(ratio, 0.12 / 0.06, 0.15) and _within(spont, 0.06, 0.15)
          and _within(stim, 0.12, 0.15))
    detail = "0->1 absorption %.4f/s; 2->1 stimulated %.4f/s, spontaneous %.4f/s, ratio %.4f" % (
        absorb, stim, spont, ratio)
    return Check(2, "BBR consistency", ok, detail)


def thermal_population() -> Check:
    p = thermal_rotational_populations(ThermalEnvironment(300.0), 10)
    s = prepare_cooled_state(300.0, 0.7)
    frac = s.manifolds() / s.total
    diff_cooled = frac[0] - frac[1]
    ok = abs((p[0] - p[1]) + 0.145) <= 0.01 and abs(diff_cooled - 0.70) < 1e-12
    return Check(3, "Thermal population", ok,
                 "p0-p1 at 300 K %.4f; after cooling %.4f" % (p[0] - p[1], diff_cooled))


def background_decay(cfg: SimulationConfig | None = None) -> Check:
    cfg = cfg or SimulationConfig()
    cat = default_catalog()
    flist = cat.frequency_list(pipeline.BACKGROUND_LIST)
    lo, hi = cfg.rate_window_s
    tl, tr = pipeline.run_trajectory(cfg, "I", flist, cat,
                                     rempd_rate=cfg.rempd_saturated_rate_per_s)
    sat = kinetics.decay_rate(tr, cfg.fit_window_s, origin=tl.rempd_start, offset=False)
    tl, tr = pipeline.run_trajectory(cfg, "I", flist, cat)
    at25 = analysis.local_decay_rate(tr.times - tl.rempd_start, tr.molecules, (lo, hi))
    ok = _within(sat, 0.075, 0.15) and _within(at25, 0.04, 0.25)
    return Check(4, "Background decay", ok,
                 "saturated fit %.4f/s; tuned rate at 25 s %.4f/s" % (sat, at25))


def _separation(p, q):
    return (p.normalized_signal - q.normalized_signal) / math.hypot(p.stddev, q.stddev)


def spectrum_ordering(cfg: SimulationConfig | None = None, reps: int = 9, workers: int = 1) -> Check:
    cfg = cfg or SimulationConfig()
    s1 = {p.list_name: p for p in pipeline.spectrum(cfg, "I", ["A'", "B", "C", "detuned500"], reps, workers)}
    s2 = {p.list_name: p for p in pipeline.spectrum(cfg, "II", ["A", "B", "C", "D", "E", "detuned500"],
                                                    reps, workers)}
    a_sep = min(_separation(s1["A'"], s1[n]) for n in ("B", "C", "detuned500"))
    ok1 = a_sep >= 2.0 and all(abs(s1[n].normalized_signal - 1.0) <= s1[n].stddev for n in ("B", "C"))

    def se(p):
        return p.stddev / math.sqrt(p.n_reps)

    def greater(a, b):
        # difference of the means beyond two standard errors
        pa, pb = s2[a], s2[b]
        return pa.normalized_signal - pb.normalized_signal > 2.0 * math.hypot(se(pa), se(pb))

    def similar(a, b):
        pa, pb = s2[a], s2[b]
        return abs(pa.normalized_signal - pb.normalized_signal) <= math.hypot(pa.stddev, pb.stddev)

    ok2 = (greater("A", "D") and greater("A", "E") and similar("D", "E")
           and all(greater(h, l) for h in ("D", "E") for l in ("B", "C"))
           and similar("B", "C") and similar("B", "detuned500") and similar("C", "detuned500"))
    detail = "I: A' %.2f+-%.2f (%.1f sd), B %.2f+-%.2f, C %.2f+-%.2f; II: %s" % (
        s1["A'"].normalized_signal, s1["A'"].stddev, a_sep,
        s1["B"].normalized_signal, s1["B"].stddev, s1["C"].normalized_signal, s1["C"].stddev,
        " ".join("%s %.3f" % (n, s2[n].normalized_signal) for n in ("A", "D", "E", "B", "C", "detuned500")))
    return Check(5, "Spectrum ordering", ok1 and ok2, detail)


def line_positions() -> Check:
    cat = default_catalog()
    la = cat.frequency_list("A")
    pairs = [(e, [l for l in cat.targeted if abs(line_position(l, 1.0) - e) <= 1e3]) for e in la.entries]
    ok_a = all(len(ls) == 1 for _, ls in pairs)
    l111 = next(l for l in cat.targeted if l.lower.label == (1, 1, 1))
    p0 = line_position(l111, 0.0)
    ok = ok_a and abs(p0 + 6.617e6) < 1.0
    worst = max((abs(line_position(ls[0], 1.0) - e) for e, ls in pairs if ls), default=float("nan"))
    return Check(6, "Line positions", ok,
                 "list A matched %d/4 (worst %.3g Hz); (1,1,1) at 0 G %.6f MHz" % (
                     sum(len(ls) == 1 for _, ls in pairs), worst, p0 / 1e6))


def invariant_suite(cfg: SimulationConfig | None = None) -> Check:
    cfg = cfg or SimulationConfig()
    cat = default_catalog()
    notes, oks = [], []

    # conservation along a full Method I run on resonance
    tl, tr = pipeline.run_trajectory(cfg, "I", cat.frequency_list("A"), cat)
    drift = float(np.max(np.abs(tr.total / tr.total[0] - 1.0)))
    oks.append(drift <= 1e-6)
    notes.append("conservation %.1e" % drift)

    # dt halving on a 20 s stretch after REMPD turn-on
    short = cfg.replace(observation_s=20.0)
    rates = []
    for dt in (cfg.dt_s, cfg.dt_s / 2):
        tl, tr = pipeline.run_trajectory(short.replace(dt_s=dt), "I", cat.frequency_list("A"), cat)
        rates.append(kinetics.decay_rate(tr, cfg.fit_window_s, origin=tl.rempd_start, offset=False))
    rel = abs(rates[1] / rates[0] - 1.0)
    oks.append(rel <= 1e-3)
    notes.append("dt halving %.1e" % rel)

    # BBR-only relaxation to the thermal distribution
    model = pipeline.build_model(cfg, "I", cat).with_radiation(Radiation())
    start = prepare_cooled_state(1.0, 1.0, cfg.n_max)
    traj = integrate(start, model, None, 400.0, dt=cfg.dt_s, record_every=10**9)
    p_th = thermal_rotational_populations(model.env, cfg.n_max, tail_limit=1.0)
    p_end = traj.manifolds()[-1][: cfg.n_max + 1]
    p_stat = stationary_distribution(model)[: cfg.n_max + 1]
    dev = max(float(np.max(np.abs(p_end / p_th - 1.0))), float(np.max(np.abs(p_stat / p_th - 1.0))))
    oks.append(dev <= 0.01)
    notes.append("thermal relaxation %.1e" % dev)

    # exact recovery of a known rate
    t = np.linspace(0.0, 10.0, 501)
    fit = analysis.fit_exponential_arrays(t, 100.0 * np.exp(-0.075 * t) + 10.0, (0.0, 10.0))
    err = abs(fit.rate - 0.075)
    oks.append(err <= 1e-6 and fit.converged)
    notes.append("fit error %.1e" % err)

    # byte-identical outputs for identical seeds
    ok_det = _deterministic(cfg)
    oks.append(ok_det)
    notes.append("determinism %s" % ("ok" if ok_det else "broken"))
    return Check(7, "Invariant suite", all(oks), "; ".join(notes))


def _deterministic(cfg: SimulationConfig) -> bool:
    from .cli import write_simulation_outputs

    blobs = []
    with tempfile.TemporaryDirectory() as tmp:
        for k in range(2):
            out = Path(tmp) / str(k)
            res = pipeline.simulate(cfg, "II", "A", reps=2)
            write_simulation_outputs(res, cfg, out)
            blobs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    return blobs[0] == blobs[1]


CHECKS = (doppler_width, bbr_consistency, thermal_population, background_decay, spectrum_ordering,
          line_positions, invariant_suite)


def iter_checks(cfg: SimulationConfig | None = None, workers: int = 1):
    """Run the checks in order, yielding each result as soon as it is known."""
    for fn in CHECKS:
        if fn is spectrum_ordering:
            yield fn(cfg, workers=workers)
        elif fn in (background_decay, invariant_suite):
            yield fn(cfg)
        else:
            yield fn()


def run_all(cfg: SimulationConfig | None = None, workers: int = 1) -> list[Check]:
    return list(iter_checks(cfg, workers))
