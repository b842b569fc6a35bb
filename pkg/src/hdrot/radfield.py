"""Black-body radiation field: Planck occupancy, Einstein rate relations and
thermal rotational populations of a rigid rotor."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .constants import BOLTZMANN, F0_THEORY, PLANCK

__all__ = [
    "TruncationError",
    "ThermalEnvironment",
    "EinsteinSet",
    "planck_occupancy",
    "bbr_rates",
    "thermal_rotational_populations",
    "DEFAULT_A10",
]

# Back-computed so that N=0 -> 1 BBR absorption at 300 K is ~0.09/s; not ab initio.
DEFAULT_A10 = 7.0e-3  # s^-1


class TruncationError(ValueError):
    """The rotational ladder is cut below the thermally populated range."""


@dataclass(frozen=True)
class ThermalEnvironment:
    temperature: float = 300.0  # K
    rotational_constant: float = F0_THEORY / 2.0  # Hz

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")
        if not self.rotational_constant > 0:
            raise ValueError("rotational constant must be positive")

    def energy(self, N):
        """Rigid-rotor energy of level N in frequency units (Hz)."""
        N = np.asarray(N)
        return self.rotational_constant * N * (N + 1)

    def transition_frequency(self, n_upper: int) -> float:
        """Frequency of N = n_upper -> n_upper - 1."""
        return 2.0 * self.rotational_constant * n_upper


@dataclass(frozen=True)
class EinsteinSet:
    """Spontaneous emission rates A(N -> N-1) within v=0, keyed by upper N."""

    a_values: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        vals = {int(n): float(a) for n, a in dict(self.a_values).items()}
        for n, a in vals.items():
            if n < 1 or not a > 0:
                raise ValueError("need A > 0 for N >= 1, got A(%d)=%r" % (n, a))
        object.__setattr__(self, "a_values", vals)

    @classmethod
    def rigid_rotor(cls, a10: float = DEFAULT_A10, n_max: int = 8) -> "EinsteinSet":
        """Scale A(1->0) up the ladder as nu^3 * N/(2N+1), i.e. A_N = A_1 * 3 N^4 / (2N+1).

        The dipole moment is held constant.
        """
        return cls({n: a10 * 3.0 * n**4 / (2 * n + 1) for n in range(1, n_max + 1)})

    def __getitem__(self, n_upper: int) -> float:
        return self.a_values[n_upper]

    def __contains__(self, n_upper):
        return n_upper in self.a_values

    @property
    def n_max(self) -> int:
        return max(self.a_values) if self.a_values else 0


def planck_occupancy(frequency, temperature):
    """Mean photon number 1/(exp(hf/kT) - 1) of a thermal mode; zero at T = 0."""
    f = np.asarray(frequency, dtype=float)
    T = np.asarray(temperature, dtype=float)
    if np.any(f <= 0):
        raise ValueError("frequency must be positive")
    if np.any(T < 0):
        raise ValueError("temperature must be non-negative")
    with np.errstate(divide="ignore", over="ignore"):
        x = PLANCK * f / (BOLTZMANN * np.where(T > 0, T, 1.0))
        n = np.where(T > 0, 1.0 / np.expm1(x), 0.0)
    return n[()] if n.ndim == 0 else n


def bbr_rates(einstein: EinsteinSet, env: ThermalEnvironment, lower_deg: int, upper_deg: int,
              n_upper: int = 1) -> tuple[float, float, float]:
    """(absorption, stimulated, spontaneous) rates for N = n_upper <-> n_upper - 1.

    Absorption is per molecule in the lower level, the two emission rates per
    molecule in the upper level.
    """
    if lower_deg <= 0 or upper_deg <= 0:
        raise ValueError("degeneracies must be positive")
    a = einstein[n_upper]
    nbar = float(planck_occupancy(env.transition_frequency(n_upper), env.temperature))
    return a * nbar * upper_deg / lower_deg, a * nbar, a


def thermal_rotational_populations(env: ThermalEnvironment, n_max: int,
                                   tail_limit: float = 1e-3) -> np.ndarray:
    """Boltzmann fractions p_0..p_{n_max} of a rigid rotor, normalised to one.

    Raises TruncationError if the population above ``n_max`` exceeds
    ``tail_limit`` of the total.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if env.temperature == 0:
        p = np.zeros(n_max + 1)
        p[0] = 1.0
        return p
    # extend the ladder far enough to measure what the cut discards
    N = np.arange(0, n_max + 200)
    x = PLANCK * env.energy(N) / (BOLTZMANN * env.temperature)
    w = (2 * N + 1) * np.exp(-(x - x[0]))
    total = w.sum()
    tail = w[n_max + 1:].sum() / total
    if tail >= tail_limit:
        raise TruncationError("population above N=%d is %.2e of total" % (n_max, tail))
    p = w[: n_max + 1]
    return p / p.sum()
