"""Population rate equations for HD+ under BBR, THz excitation, rotational
cooling and REMPD, integrated with fixed-step fourth-order Runge-Kutta.

The state vector is laid out as::

    [ground_hf (4) | n1_hf (10) | N=2..n_max (n_max-1) | dissociated (1)]

Black-body coupling is hyperfine-blind: a transition out of a manifold is
taken at the manifold rate and arrivals are shared by hyperfine degeneracy.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np

from .levelcat import GROUND_STATES, N1_STATES, HyperfineLine
from .lineshape import DopplerParams, MagneticField, excitation_rates, instantaneous_thz_frequency
from .radfield import EinsteinSet, ThermalEnvironment, planck_occupancy, thermal_rotational_populations

__all__ = [
    "IntegrationError",
    "NegativePopulationError",
    "Radiation",
    "PopulationState",
    "RateModel",
    "Trajectory",
    "DEFAULT_N_MAX",
    "derivatives",
    "rk4_step",
    "integrate",
    "prepare_cooled_state",
    "thermal_state",
    "decay_rate",
    "stationary_distribution",
]

DEFAULT_N_MAX = 8
MAX_DT = 1e-3
NEGATIVITY_LIMIT = -1e-9

N_GROUND = len(GROUND_STATES)
N_N1 = len(N1_STATES)
_G_GROUND = np.array([s.degeneracy for s in GROUND_STATES], dtype=float)
_G_N1 = np.array([s.degeneracy for s in N1_STATES], dtype=float)


class IntegrationError(RuntimeError):
    pass


class NegativePopulationError(IntegrationError):
    pass


@dataclass(frozen=True)
class Radiation:
    """Which radiation sources act on the ions."""

    bbr: bool = True
    thz: bool = False
    rempd: bool = False
    cooling_5p5: bool = False
    cooling_2p7: bool = False
    secular_scan: bool = False  # no dynamical role; read by the fluorescence model

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("bbr", "thz", "rempd", "cooling_5p5", "cooling_2p7", "secular_scan")}


@dataclass
class PopulationState:
    ground_hf: np.ndarray
    n1_hf: np.ndarray
    coarse: np.ndarray  # N = 2 .. n_max
    dissociated: float = 0.0
    time: float = 0.0

    def __post_init__(self):
        self.ground_hf = np.asarray(self.ground_hf, dtype=float)
        self.n1_hf = np.asarray(self.n1_hf, dtype=float)
        self.coarse = np.asarray(self.coarse, dtype=float)
        if self.ground_hf.shape != (N_GROUND,) or self.n1_hf.shape != (N_N1,):
            raise ValueError("expected %d ground and %d N=1 hyperfine populations" % (N_GROUND, N_N1))

    @property
    def n_max(self) -> int:
        return len(self.coarse) + 1

    def vector(self) -> np.ndarray:
        return np.concatenate([self.ground_hf, self.n1_hf, self.coarse, [self.dissociated]])

    @classmethod
    def from_vector(cls, y, time: float = 0.0) -> "PopulationState":
        y = np.asarray(y, dtype=float)
        g = N_GROUND
        n1 = g + N_N1
        return cls(y[:g].copy(), y[g:n1].copy(), y[n1:-1].copy(), float(y[-1]), time)

    def manifolds(self) -> np.ndarray:
        """Population of each rotational level N = 0 .. n_max."""
        return np.concatenate([[self.ground_hf.sum(), self.n1_hf.sum()], self.coarse])

    @property
    def molecules(self) -> float:
        return float(self.manifolds().sum())

    @property
    def total(self) -> float:
        return self.molecules + self.dissociated


def _dim(n_max: int) -> int:
    return N_GROUND + N_N1 + (n_max - 1) + 1


def _manifold_slices(n_max: int):
    """Index arrays and degeneracy shares for each rotational manifold."""
    out = [(np.arange(N_GROUND), _G_GROUND / _G_GROUND.sum()),
           (np.arange(N_GROUND, N_GROUND + N_N1), _G_N1 / _G_N1.sum())]
    base = N_GROUND + N_N1
    for N in range(2, n_max + 1):
        out.append((np.array([base + N - 2]), np.ones(1)))
    return out


def _add_transfer(K, src_idx, dst_idx, dst_share, rate):
    """Move population from every index in ``src_idx`` into the ``dst`` manifold at ``rate``."""
    if rate == 0.0:
        return
    for i in src_idx:
        K[i, i] -= rate
        K[dst_idx, i] += rate * dst_share


@dataclass(frozen=True)
class RateModel:
    """Rates (s^-1) and radiation state defining the linear rate equations."""

    einstein: EinsteinSet = field(default_factory=EinsteinSet.rigid_rotor)
    env: ThermalEnvironment = field(default_factory=ThermalEnvironment)
    n_max: int = DEFAULT_N_MAX
    lines: tuple[HyperfineLine, ...] = ()
    thz_peak_rate: float = 0.0
    rempd_rate: float = 0.0
    pump_5p5_rate: float = 0.0
    pump_2p7_rate: float = 0.0
    magnetic_field: MagneticField = field(default_factory=MagneticField)
    doppler: DopplerParams = field(default_factory=lambda: DopplerParams(0.150))
    radiation: Radiation = field(default_factory=Radiation)

    def __post_init__(self):
        object.__setattr__(self, "lines", tuple(self.lines))
        for name in ("thz_peak_rate", "rempd_rate", "pump_5p5_rate", "pump_2p7_rate"):
            if getattr(self, name) < 0:
                raise ValueError("%s must be non-negative" % name)
        if self.n_max < 2:
            raise ValueError("n_max must be at least 2")
        missing = [n for n in range(1, self.n_max + 1) if n not in self.einstein]
        if missing:
            raise ValueError("Einstein set lacks A(N->N-1) for N=%s" % missing)

    def with_radiation(self, radiation: Radiation) -> "RateModel":
        return replace(self, radiation=radiation)

    @property
    def dim(self) -> int:
        return _dim(self.n_max)

    @cached_property
    def bbr_matrix(self) -> np.ndarray:
        n = self.dim
        K = np.zeros((n, n))
        man = _manifold_slices(self.n_max)
        for N in range(self.n_max):
            lo_idx, lo_share = man[N]
            up_idx, up_share = man[N + 1]
            a = self.einstein[N + 1]
            nbar = float(planck_occupancy(self.env.transition_frequency(N + 1), self.env.temperature))
            g_lo, g_up = 2 * N + 1, 2 * N + 3
            _add_transfer(K, lo_idx, up_idx, up_share, a * nbar * g_up / g_lo)
            _add_transfer(K, up_idx, lo_idx, lo_share, a * (1.0 + nbar))
        return K

    def _laser_matrix(self, radiation: Radiation) -> np.ndarray:
        n = self.dim
        K = np.zeros((n, n))
        man = _manifold_slices(self.n_max)
        g_idx, g_share = man[0]
        if radiation.cooling_2p7:
            _add_transfer(K, man[1][0], g_idx, g_share, self.pump_2p7_rate)
        if radiation.cooling_5p5:
            _add_transfer(K, man[2][0], g_idx, g_share, self.pump_5p5_rate)
        if radiation.rempd:
            for i in man[1][0]:
                K[i, i] -= self.rempd_rate
                K[-1, i] += self.rempd_rate
        return K

    @cached_property
    def constant_matrix(self) -> np.ndarray:
        """Time-independent part of the rate matrix under ``self.radiation``."""
        K = self._laser_matrix(self.radiation)
        if self.radiation.bbr:
            K = K + self.bbr_matrix
        return K

    @cached_property
    def thz_matrices(self) -> np.ndarray:
        """Per-line unit-rate coupling matrices, shape (n_lines, dim, dim).

        Upward rate r from the lower state, stimulated return r * g_lower/g_upper.
        """
        n = self.dim
        M = np.zeros((len(self.lines), n, n))
        for k, ln in enumerate(self.lines):
            try:
                a = GROUND_STATES.index(ln.lower)
                b = N_GROUND + N1_STATES.index(ln.upper)
            except ValueError:
                raise ValueError("line %s does not connect the modelled hyperfine states" % ln.label)
            down = ln.lower.degeneracy / ln.upper.degeneracy
            M[k, a, a] -= 1.0
            M[k, b, a] += 1.0
            M[k, b, b] -= down
            M[k, a, b] += down
        return M

    def thz_rates(self, thz_offset) -> np.ndarray:
        return excitation_rates(self.lines, thz_offset, self.magnetic_field, self.doppler, self.thz_peak_rate)

    def matrix(self, thz_offset=None) -> np.ndarray:
        K = self.constant_matrix
        if self.radiation.thz and thz_offset is not None and self.lines:
            K = K + np.tensordot(self.thz_rates(thz_offset), self.thz_matrices, axes=1)
        return K


def derivatives(state: PopulationState, model: RateModel, thz_offset=None) -> PopulationState:
    """Time derivative of ``state``; ``thz_offset=None`` means the THz source is off."""
    dy = model.matrix(thz_offset) @ state.vector()
    return PopulationState.from_vector(dy, state.time)


def rk4_step(f, t: float, y: np.ndarray, dt: float) -> np.ndarray:
    """One classical Runge-Kutta step for dy/dt = f(t, y)."""
    k1 = f(t, y)
    k2 = f(t + 0.5 * dt, y + 0.5 * dt * k1)
    k3 = f(t + 0.5 * dt, y + 0.5 * dt * k2)
    k4 = f(t + dt, y + dt * k3)
    return y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _rk4_propagators(A1, A2, A3, dt):
    """RK4 step matrices for y' = A(t) y given A at t, t+dt/2, t+dt (batched)."""
    eye = np.eye(A1.shape[-1])
    K1 = A1
    K2 = A2 @ (eye + 0.5 * dt * K1)
    K3 = A2 @ (eye + 0.5 * dt * K2)
    K4 = A3 @ (eye + dt * K3)
    return eye + dt / 6.0 * (K1 + 2.0 * K2 + 2.0 * K3 + K4)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (n_times, dim)
    n_max: int

    def __len__(self):
        return len(self.times)

    def state(self, i: int) -> PopulationState:
        return PopulationState.from_vector(self.states[i], float(self.times[i]))

    @property
    def ground(self) -> np.ndarray:
        return self.states[:, :N_GROUND].sum(axis=1)

    @property
    def n1(self) -> np.ndarray:
        return self.states[:, N_GROUND:N_GROUND + N_N1].sum(axis=1)

    @property
    def n2plus(self) -> np.ndarray:
        return self.states[:, N_GROUND + N_N1:-1].sum(axis=1)

    @property
    def dissociated(self) -> np.ndarray:
        return self.states[:, -1]

    @property
    def molecules(self) -> np.ndarray:
        return self.states[:, :-1].sum(axis=1)

    @property
    def total(self) -> np.ndarray:
        return self.states.sum(axis=1)

    def manifolds(self) -> np.ndarray:
        """(n_times, n_max+1) populations per rotational level."""
        return np.column_stack([self.ground, self.n1, self.states[:, N_GROUND + N_N1:-1]])

    def molecules_at(self, t) -> np.ndarray:
        """Undissociated number at ``t`` by linear interpolation.

        Times before the first sample take the first value; this is exact for
        phases without REMPD, where the molecule number is conserved.
        """
        t = np.asarray(t, dtype=float)
        if np.any(t > self.times[-1] + 1e-9):
            raise ValueError("trajectory ends at %g s" % self.times[-1])
        return np.interp(t, self.times, self.molecules)

    def to_csv(self, path) -> None:
        cols = np.column_stack([self.times, self.ground, self.n1, self.n2plus,
                                self.dissociated, self.total])
        lines = ["time_s,N0,N1,N2plus,dissociated,total"]
        lines += [",".join("%.17g" % v for v in row) for row in cols]
        Path(path).write_text("\n".join(lines) + "\n")


def _phase_index(phases, t, eps):
    for i, ph in enumerate(phases):
        if ph.start - eps <= t < ph.start + ph.duration - eps:
            return i
    return -1


def integrate(initial: PopulationState, model: RateModel, schedule, t_end: float,
              dt: float = MAX_DT, t_start: float | None = None, record_every: int = 10,
              chunk: int = 2048) -> Trajectory:
    """Fixed-step RK4 trajectory from ``initial`` to ``t_end``.

    ``schedule`` is a protocol timeline (anything with ``phases`` carrying
    ``start``, ``duration``, ``radiation`` and ``frequency_list``) or None, in
    which case ``model.radiation`` applies throughout with the THz source
    off.  Radiation flags are taken from the phase active at the start of
    each step; the list cycle restarts at each THz phase start.  Times outside
    every phase see black-body radiation only.
    """
    if dt > MAX_DT * (1 + 1e-12) or dt <= 0:
        raise IntegrationError("dt must be in (0, %g] s, got %g" % (MAX_DT, dt))
    if initial.n_max != model.n_max:
        raise ValueError("state n_max %d does not match model n_max %d" % (initial.n_max, model.n_max))
    t0 = initial.time if t_start is None else float(t_start)
    if not t_end > t0:
        raise IntegrationError("t_end must exceed the start time")
    n_steps = int(round((t_end - t0) / dt))
    if abs(n_steps * dt - (t_end - t0)) > 1e-9 * max(1.0, abs(t_end)):
        raise IntegrationError("integration span is not a whole number of steps")
    record_every = max(1, int(record_every))

    phases = list(schedule.phases) if schedule is not None else []
    eps = 1e-6 * dt
    step_times = t0 + dt * np.arange(n_steps)
    idx = np.array([_phase_index(phases, t, eps) for t in step_times]) if phases else np.full(n_steps, -1)

    y = initial.vector()
    rec_t = [t0]
    rec_y = [y.copy()]
    k = 0
    while k < n_steps:
        j = k
        while j < n_steps and idx[j] == idx[k]:
            j += 1
        if idx[k] >= 0:
            ph = phases[idx[k]]
            m = model.with_radiation(ph.radiation)
            flist = ph.frequency_list if ph.radiation.thz else None
        else:
            dark = Radiation(bbr=model.radiation.bbr) if phases else replace(model.radiation, thz=False)
            m = model.with_radiation(dark)
            flist, ph = None, None
        y = _run_segment(m, flist, ph.start if ph is not None else t0, step_times[k:j], y, dt,
                         k, record_every, rec_t, rec_y, chunk, n_steps)
        k = j
    if rec_t[-1] != t0 + n_steps * dt:
        rec_t.append(t0 + n_steps * dt)
        rec_y.append(y.copy())
    return Trajectory(np.array(rec_t), np.array(rec_y), model.n_max)


def _run_segment(m: RateModel, flist, phase_start, times, y, dt, k0, record_every,
                 rec_t, rec_y, chunk, n_steps):
    def record(step_index, yy):
        if step_index % record_every == 0 or step_index == n_steps:
            rec_t.append(times[0] + (step_index - k0) * dt)
            rec_y.append(yy.copy())

    def check(yy, t):
        if yy.min() < NEGATIVITY_LIMIT:
            raise NegativePopulationError("population %.3g below zero at t=%.6g s" % (yy.min(), t))

    if flist is None or not m.lines or m.thz_peak_rate == 0.0:
        A = m.constant_matrix
        S = _rk4_propagators(A, A, A, dt)
        for i in range(len(times)):
            y = S @ y
            record(k0 + i + 1, y)
        check(y, times[-1] + dt)
        return y

    K0 = m.constant_matrix
    M = m.thz_matrices
    for c in range(0, len(times), chunk):
        tt = times[c:c + chunk] - phase_start
        stage_t = np.stack([tt, tt + 0.5 * dt, tt + dt], axis=1)
        rates = m.thz_rates(instantaneous_thz_frequency(flist, np.maximum(stage_t, 0.0)))
        A = K0 + np.tensordot(rates, M, axes=1)  # (n, 3, dim, dim)
        S = _rk4_propagators(A[:, 0], A[:, 1], A[:, 2], dt)
        for i in range(len(tt)):
            y = S[i] @ y
            record(k0 + c + i + 1, y)
        check(y, times[min(c + chunk, len(times)) - 1] + dt)
    return y


def prepare_cooled_state(total_molecules: float, ground_fraction: float,
                         n_max: int = DEFAULT_N_MAX, residue=None,
                         env: ThermalEnvironment | None = None) -> PopulationState:
    """Population after rotational cooling.

    ``ground_fraction`` of the molecules sit in N=0 (shared 1:3:3:5 over the
    hyperfine states), N=1 is empty and the remainder is spread over
    N=2..n_max following ``residue`` (default: thermal proportions).
    """
    if not 0.0 <= ground_fraction <= 1.0:
        raise ValueError("ground_fraction must lie in [0, 1]")
    if total_molecules < 0:
        raise ValueError("total_molecules must be non-negative")
    if residue is None:
        p = thermal_rotational_populations(env or ThermalEnvironment(), n_max, tail_limit=1.0)
        residue = p[2:]
    residue = np.asarray(residue, dtype=float)
    if residue.shape != (n_max - 1,) or np.any(residue < 0) or residue.sum() == 0:
        raise ValueError("residue must be %d non-negative weights for N=2..%d" % (n_max - 1, n_max))
    ground = total_molecules * ground_fraction * _G_GROUND / _G_GROUND.sum()
    coarse = total_molecules * (1.0 - ground_fraction) * residue / residue.sum()
    return PopulationState(ground, np.zeros(N_N1), coarse)


def thermal_state(total_molecules: float, env: ThermalEnvironment | None = None,
                  n_max: int = DEFAULT_N_MAX) -> PopulationState:
    """Black-body equilibrium population, hyperfine states filled by degeneracy."""
    p = thermal_rotational_populations(env or ThermalEnvironment(), n_max) * total_molecules
    return PopulationState(p[0] * _G_GROUND / _G_GROUND.sum(), p[1] * _G_N1 / _G_N1.sum(), p[2:])


def stationary_distribution(model: RateModel) -> np.ndarray:
    """Normalised null vector of the constant rate matrix, as manifold fractions."""
    K = model.constant_matrix[:-1, :-1]
    w, v = np.linalg.eig(K)
    vec = np.real(v[:, np.argmin(np.abs(w))])
    vec = vec / vec.sum()
    st = PopulationState.from_vector(np.append(vec, 0.0))
    return st.manifolds()


def decay_rate(trajectory: Trajectory, window=(0.0, 10.0), origin: float | None = None,
               offset: bool = False) -> float:
    """Exponential decay rate (s^-1) of the undissociated molecule number.

    ``window`` is measured from ``origin`` (default: the first trajectory time).
    The molecule number has no baseline, so no offset is fitted by default.
    """
    from .analysis import fit_exponential_arrays

    t0 = trajectory.times[0] if origin is None else origin
    res = fit_exponential_arrays(trajectory.times - t0, trajectory.molecules, window, offset=offset)
    return res.rate

