"""Measurement protocols (Methods I and II) as timed phase schedules, and the
synthesis of fluorescence traces from population trajectories."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .kinetics import Radiation, Trajectory
from .levelcat import FrequencyList

__all__ = [
    "Phase",
    "ProtocolTimeline",
    "TimelineConfig",
    "FluorescenceModel",
    "DecayTrace",
    "build_timeline",
    "synthesize_trace",
    "method2_levels",
    "method2_signal",
    "SignalFloorError",
]

METHODS = ("I", "II")


class SignalFloorError(ValueError):
    """The reference fluorescence level is at or below the noise floor."""


@dataclass(frozen=True)
class Phase:
    name: str
    start: float
    duration: float
    radiation: Radiation
    frequency_list: FrequencyList | None = None

    @property
    def stop(self) -> float:
        return self.start + self.duration


@dataclass(frozen=True)
class TimelineConfig:
    """Phase durations in seconds."""

    prep: float = 2.0
    cooling: float = 35.0  # T_c
    observation: float = 60.0  # method I, after REMPD turn-on
    normalization: float = 3.0  # method II, secular scan on at the start of cooling
    excitation: float = 3.0  # method II THz + REMPD window
    readout: float = 3.0  # method II
    trap_drive_MHz: float = 14.2
    secular_scan_kHz: tuple[float, float] = (740.0, 900.0)

    def __post_init__(self):
        for name in ("prep", "cooling", "observation", "normalization", "excitation", "readout"):
            if not getattr(self, name) > 0:
                raise ValueError("%s duration must be positive" % name)
        if self.normalization >= self.cooling:
            raise ValueError("normalization window must end before cooling does")


@dataclass(frozen=True)
class ProtocolTimeline:
    method: str
    phases: tuple[Phase, ...]
    metadata: dict = field(default_factory=dict)

    @property
    def duration(self) -> float:
        return self.phases[-1].stop

    @property
    def rempd_start(self) -> float:
        return self.metadata["rempd_start"]

    @property
    def rempd_stop(self) -> float:
        return self.metadata["rempd_stop"]

    def phase_at(self, t: float) -> Phase | None:
        for ph in self.phases:
            if ph.start <= t < ph.stop:
                return ph
        return None

    def radiation_at(self, t: float) -> Radiation:
        ph = self.phase_at(t)
        return ph.radiation if ph is not None else Radiation()

    def secular_mask(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        mask = np.zeros(t.shape, dtype=bool)
        for ph in self.phases:
            if ph.radiation.secular_scan:
                mask |= (t >= ph.start) & (t < ph.stop)
        # the last instant of the timeline belongs to the final phase
        last = self.phases[-1]
        if last.radiation.secular_scan:
            mask |= np.isclose(t, last.stop)
        return mask

    def to_text(self) -> str:
        doc = {
            "method": self.method,
            "metadata": self.metadata,
            "phases": [
                {
                    "name": ph.name,
                    "start_s": ph.start,
                    "duration_s": ph.duration,
                    "flags": ph.radiation.as_dict(),
                    "list": ph.frequency_list.name if ph.frequency_list is not None else None,
                }
                for ph in self.phases
            ],
        }
        return json.dumps(doc, indent=2)


def build_timeline(method: str, flist: FrequencyList, config: TimelineConfig | None = None) -> ProtocolTimeline:
    """Phase sequence of one data point.

    Method I: prep, then cooling with the secular scan on, then REMPD + THz
    with the 5.5 um pump and the secular scan still on.  Method II: the scan
    runs only at the start of cooling and again after a short REMPD + THz
    window taken with both cooling lasers blocked.
    """
    cfg = config or TimelineConfig()
    if method not in METHODS:
        raise ValueError("method must be one of %s, got %r" % (METHODS, method))
    prep = Phase("prep", 0.0, cfg.prep, Radiation())
    t = cfg.prep
    if method == "I":
        cool = Phase("cooling", t, cfg.cooling,
                     Radiation(cooling_5p5=True, cooling_2p7=True, secular_scan=True))
        t += cfg.cooling
        obs = Phase("spectroscopy", t, cfg.observation,
                     Radiation(cooling_5p5=True, rempd=True, thz=True, secular_scan=True), flist)
        phases = (prep, cool, obs)
        rempd = (obs.start, obs.stop)
    else:
        norm = Phase("normalization", t, cfg.normalization,
                     Radiation(cooling_5p5=True, cooling_2p7=True, secular_scan=True))
        t += cfg.normalization
        cool = Phase("cooling", t, cfg.cooling - cfg.normalization,
                     Radiation(cooling_5p5=True, cooling_2p7=True))
        t += cfg.cooling - cfg.normalization
        exc = Phase("excitation", t, cfg.excitation, Radiation(rempd=True, thz=True), flist)
        t += cfg.excitation
        read = Phase("readout", t, cfg.readout, Radiation(secular_scan=True))
        phases = (prep, norm, cool, exc, read)
        rempd = (exc.start, exc.stop)
    meta = {
        "cooling_duration_s": cfg.cooling,
        "rempd_start": rempd[0],
        "rempd_stop": rempd[1],
        "list": flist.name,
        "trap_drive_MHz": cfg.trap_drive_MHz,
        "secular_scan_kHz": list(cfg.secular_scan_kHz),
    }
    return ProtocolTimeline(method, phases, meta)


@dataclass(frozen=True)
class FluorescenceModel:
    background_level: float = 200.0  # counts/s
    gain: float = 2.0  # counts/s per molecule
    saturation_number: float | None = None  # molecules
    noise_sigma: float = 10.0  # counts/s
    rng_seed: int = 0
    poisson: bool = False  # shot noise instead of additive Gaussian
    sample_interval: float = 0.1  # s

    def __post_init__(self):
        if not self.gain > 0:
            raise ValueError("gain must be positive")
        if self.noise_sigma < 0 or self.background_level < 0:
            raise ValueError("noise_sigma and background_level must be non-negative")
        if self.saturation_number is not None and not self.saturation_number > 0:
            raise ValueError("saturation_number must be positive")
        if not self.sample_interval > 0:
            raise ValueError("sample_interval must be positive")

    def signal(self, molecules):
        """Noise-free fluorescence above background for ``molecules`` heated ions."""
        m = np.asarray(molecules, dtype=float)
        if self.saturation_number is None:
            return self.gain * m
        return self.gain * m / (1.0 + m / self.saturation_number)


@dataclass(frozen=True)
class DecayTrace:
    """Fluorescence samples; ``times`` are measured from REMPD turn-on."""

    times: np.ndarray
    fluorescence: np.ndarray
    method: str = ""
    list_name: str = ""
    rep: int = 0
    seed: int = 0

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        f = np.asarray(self.fluorescence, dtype=float)
        if t.shape != f.shape or t.ndim != 1:
            raise ValueError("times and fluorescence must be 1-d arrays of equal length")
        if np.any(np.diff(t) <= 0):
            raise ValueError("trace times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "fluorescence", f)

    def replace(self, **kw) -> "DecayTrace":
        return replace(self, **kw)

    def csv_rows(self) -> list[str]:
        return ["%.17g,%.17g,%s,%s,%d,%d" % (t, f, self.method, self.list_name, self.rep, self.seed)
                for t, f in zip(self.times, self.fluorescence)]

    def to_csv(self, path) -> None:
        write_traces_csv([self], path)


def write_traces_csv(traces, path) -> None:
    rows = ["time_s,fluorescence,method,list,rep,seed"]
    for tr in traces:
        rows += tr.csv_rows()
    Path(path).write_text("\n".join(rows) + "\n")


def _rng(seed: int) -> np.random.Generator:
    # counter-based bit generator: streams depend only on the seed
    return np.random.Generator(np.random.Philox(seed))


def synthesize_trace(trajectory: Trajectory, fm: FluorescenceModel, timeline: ProtocolTimeline,
                     rep: int = 0) -> DecayTrace:
    """Fluorescence over the whole timeline, sampled every ``fm.sample_interval``.

    While the secular scan runs the level is background plus the (optionally
    saturating) molecule signal; otherwise it is background alone.  Noise is
    drawn from a Philox stream seeded with ``fm.rng_seed``.
    """
    n = int(round(timeline.duration / fm.sample_interval))
    t_abs = np.arange(n + 1) * fm.sample_interval
    if trajectory.times[0] > timeline.rempd_start + 1e-9:
        raise ValueError("trajectory must start no later than REMPD turn-on")
    m = trajectory.molecules_at(t_abs)
    clean = fm.background_level + np.where(timeline.secular_mask(t_abs), fm.signal(m), 0.0)
    rng = _rng(fm.rng_seed)
    if fm.poisson:
        counts = rng.poisson(np.clip(clean, 0.0, None) * fm.sample_interval)
        y = counts / fm.sample_interval
    elif fm.noise_sigma > 0:
        y = clean + fm.noise_sigma * rng.standard_normal(clean.shape)
    else:
        y = clean
    return DecayTrace(t_abs - timeline.rempd_start, y, timeline.method,
                      timeline.metadata.get("list", ""), rep, fm.rng_seed)


def method2_levels(trace: DecayTrace, timeline: ProtocolTimeline, background: float = 0.0,
                   settle: float = 0.5) -> tuple[float, float]:
    """Mean fluorescence above ``background`` in the normalization and readout windows.

    The first ``settle`` seconds of each window are skipped.
    """
    origin = timeline.rempd_start
    out = []
    for name in ("normalization", "readout"):
        ph = next(p for p in timeline.phases if p.name == name)
        lo, hi = ph.start - origin + settle, ph.stop - origin
        sel = (trace.times >= lo) & (trace.times < hi)
        if not sel.any():
            raise ValueError("no samples in the %s window" % name)
        out.append(float(trace.fluorescence[sel].mean()) - background)
    return out[0], out[1]


def method2_signal(before: float, after: float, noise_floor: float = 0.0) -> float:
    """Ratio after/before of the two fluorescence levels (surviving fraction)."""
    if before <= noise_floor or before <= 0:
        raise SignalFloorError("reference level %g is not above the noise floor %g" % (before, noise_floor))
    return after / before
