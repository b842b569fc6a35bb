"""Doppler widths, Zeeman-shifted line positions and the THz excitation profile."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import BOLTZMANN, F0_THEORY, HD_ION_MASS, SPEED_OF_LIGHT
from .levelcat import FrequencyList, HyperfineLine

__all__ = [
    "DopplerParams",
    "MagneticField",
    "doppler_fwhm",
    "doppler_sigma",
    "line_position",
    "instantaneous_thz_frequency",
    "excitation_rate",
    "excitation_rates",
    "list_excitation",
]

FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))
GH_NODES = 16


@dataclass(frozen=True)
class DopplerParams:
    ion_temperature: float  # K
    ion_mass: float = HD_ION_MASS  # kg
    transition_frequency: float = F0_THEORY  # Hz

    def __post_init__(self):
        if self.ion_temperature < 0:
            raise ValueError("ion temperature must be non-negative")
        if not (self.ion_mass > 0 and self.transition_frequency > 0):
            raise ValueError("ion mass and transition frequency must be positive")


@dataclass(frozen=True)
class MagneticField:
    magnitude: float = 1.0  # G
    spread: float = 0.0  # G, Gaussian standard deviation across the ensemble

    def __post_init__(self):
        if self.magnitude < 0 or self.spread < 0:
            raise ValueError("field magnitude and spread must be non-negative")


def doppler_fwhm(p: DopplerParams) -> float:
    """Gaussian Doppler FWHM f0 * sqrt(8 ln2 kT / (m c^2)), Hz."""
    return p.transition_frequency * math.sqrt(
        8.0 * math.log(2.0) * BOLTZMANN * p.ion_temperature / (p.ion_mass * SPEED_OF_LIGHT**2)
    )


def doppler_sigma(p: DopplerParams) -> float:
    return doppler_fwhm(p) / FWHM_PER_SIGMA


def line_position(line: HyperfineLine, b: MagneticField | float) -> float:
    """Offset of ``line`` from the spinless frequency at the mean field, Hz."""
    bg = b.magnitude if isinstance(b, MagneticField) else float(b)
    return line.position(bg)


def instantaneous_thz_frequency(flist: FrequencyList, t):
    """THz offset at time ``t`` after the list was started.

    Entries are stepped every ``dwell`` seconds and cycled; a sinusoidal FM of
    peak deviation ``fm_amplitude`` is added on top.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    entries = np.asarray(flist.entries)
    k = np.floor(t / flist.dwell).astype(np.int64) % len(entries)
    f = entries[k] + flist.fm_amplitude * np.sin(2.0 * np.pi * flist.fm_rate * t)
    return f[()] if f.ndim == 0 else f


def _line_arrays(lines):
    off = np.array([ln.zero_field_offset for ln in lines], dtype=float)
    c1 = np.array([ln.zeeman_c1 for ln in lines], dtype=float)
    c2 = np.array([ln.zeeman_c2 for ln in lines], dtype=float)
    w = np.array([ln.weight for ln in lines], dtype=float)
    return off, c1, c2, w


def _gh_order(c1, c2, b: MagneticField, sigma):
    # 16 nodes unless the field spread maps onto a position spread much wider
    # than the Doppler width, where the fixed rule would leave gaps between nodes
    slope = np.abs(c1) + 2.0 * np.abs(c2) * (b.magnitude + 3.0 * b.spread)
    ratio = float(np.max(slope * b.spread / sigma)) if slope.size else 0.0
    return int(min(150, max(GH_NODES, math.ceil(8.0 * ratio))))


def excitation_rates(lines, thz_offset, b: MagneticField, doppler: DopplerParams,
                     peak_rate: float) -> np.ndarray:
    """Gaussian excitation rate of every line at every THz offset.

    Returns an array of shape ``thz_offset.shape + (len(lines),)`` in s^-1.
    Lines that are linear in B are convolved with the field spread in closed
    form; lines with a quadratic term use Gauss-Hermite quadrature.
    """
    if peak_rate < 0:
        raise ValueError("peak_rate must be non-negative")
    f = np.asarray(thz_offset, dtype=float)[..., None]
    if len(lines) == 0:
        return np.zeros(f.shape[:-1] + (0,))
    off, c1, c2, w = _line_arrays(lines)
    sigma = doppler_sigma(doppler)
    B0, sB = b.magnitude, b.spread
    centre = off + c1 * B0 + c2 * B0**2

    if sigma == 0.0:
        if sB > 0:
            raise ValueError("zero Doppler width with a field spread has no finite profile")
        return np.where(f == centre, peak_rate * w, 0.0)

    if sB == 0.0:
        return peak_rate * w * np.exp(-0.5 * ((f - centre) / sigma) ** 2)

    out = np.empty(np.broadcast_shapes(f.shape, centre.shape))
    lin = c2 == 0.0
    if np.any(lin):
        s_tot = np.hypot(sigma, c1[lin] * sB)
        out[..., lin] = (peak_rate * w[lin] * (sigma / s_tot)
                         * np.exp(-0.5 * ((f - centre[lin]) / s_tot) ** 2))
    quad = ~lin
    if np.any(quad):
        x, wx = np.polynomial.hermite.hermgauss(_gh_order(c1[quad], c2[quad], b, sigma))
        Bn = B0 + math.sqrt(2.0) * sB * x  # (n,)
        pos = off[quad] + c1[quad] * Bn[:, None] + c2[quad] * Bn[:, None] ** 2  # (n, L)
        g = np.exp(-0.5 * ((f[..., None, :] - pos) / sigma) ** 2)  # (..., n, L)
        out[..., quad] = peak_rate * w[quad] * np.einsum("n,...nl->...l", wx / math.sqrt(math.pi), g)
    return out


def excitation_rate(line: HyperfineLine, thz_offset, b: MagneticField, doppler: DopplerParams,
                    peak_rate: float):
    """Excitation rate (s^-1) of a single line at THz offset ``thz_offset``."""
    r = excitation_rates([line], thz_offset, b, doppler, peak_rate)[..., 0]
    return r[()] if r.ndim == 0 else r


def list_excitation(lines, flist: FrequencyList, b: MagneticField, doppler: DopplerParams,
                    peak_rate: float = 1.0) -> float:
    """Dwell-averaged summed excitation rate of ``lines`` under ``flist`` (FM ignored)."""
    r = excitation_rates(lines, np.asarray(flist.entries), b, doppler, peak_rate)
    return float(r.sum(axis=-1).mean())
