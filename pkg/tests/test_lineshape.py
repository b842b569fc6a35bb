import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import constants as sc
from scipy.integrate import quad

from hdrot.constants import HD_ION_MASS
from hdrot.levelcat import GROUND_STATES, N1_STATES, FrequencyList, HyperfineLine
from hdrot.lineshape import (
    DopplerParams,
    MagneticField,
    doppler_fwhm,
    doppler_sigma,
    excitation_rate,
    excitation_rates,
    instantaneous_thz_frequency,
    line_position,
    list_excitation,
)

MHZ = 1e6
F0 = 1.314925752e12


def fwhm_oracle(T, mass_u=3.02151):
    m = mass_u * sc.physical_constants["atomic mass constant"][0]
    return F0 * math.sqrt(8 * math.log(2) * sc.k * T / (m * sc.c**2))


def _line(offset=0.0, c1=0.0, c2=0.0, weight=1.0):
    return HyperfineLine(GROUND_STATES[0], N1_STATES[3], offset, c1, c2, weight=weight)


# --- Doppler width --------------------------------------------------------------------

def test_fwhm_10mk():
    w = doppler_fwhm(DopplerParams(0.010, HD_ION_MASS, F0))
    assert w == pytest.approx(fwhm_oracle(0.010), rel=1e-8)
    assert abs(w - 54.2e3) <= 0.1e3


def test_fwhm_15mk():
    w = doppler_fwhm(DopplerParams(0.015))
    assert w == pytest.approx(fwhm_oracle(0.015), rel=1e-8)
    assert abs(w - 66.4e3) <= 0.1e3


def test_fwhm_zero_temperature():
    assert doppler_fwhm(DopplerParams(0.0)) == 0.0


def test_sigma_relation():
    p = DopplerParams(0.010)
    assert doppler_sigma(p) == pytest.approx(doppler_fwhm(p) / (2 * math.sqrt(2 * math.log(2))))
    assert doppler_sigma(p) == pytest.approx(23e3, abs=0.1e3)


@settings(max_examples=100, deadline=None)
@given(T=st.floats(1e-4, 10.0))
def test_fwhm_scaling(T):
    assert doppler_fwhm(DopplerParams(4 * T)) == pytest.approx(2 * doppler_fwhm(DopplerParams(T)), rel=1e-14)


def test_bad_params():
    with pytest.raises(ValueError):
        DopplerParams(-1.0)
    with pytest.raises(ValueError):
        MagneticField(-1.0)
    with pytest.raises(ValueError):
        MagneticField(1.0, -0.1)


# --- line positions -------------------------------------------------------------------

def test_111_line_positions(catalog):
    (ln,) = [l for l in catalog.targeted if l.lower.label == (1, 1, 1)]
    assert line_position(ln, MagneticField(0.0)) == pytest.approx(-6.617 * MHZ, abs=1e-3)
    assert line_position(ln, MagneticField(1.0)) == pytest.approx(-6.539 * MHZ, abs=1e-3)


def test_zero_field_identity(catalog):
    for ln in catalog.lines:
        assert line_position(ln, 0.0) == ln.zero_field_offset


@settings(max_examples=100, deadline=None)
@given(off=st.floats(-50e6, 50e6), c1=st.floats(-2e6, 2e6), c2=st.floats(-1e5, 1e5), b=st.floats(0, 5))
def test_position_polynomial(off, c1, c2, b):
    ln = _line(off, c1, c2)
    shift = line_position(ln, b) - line_position(ln, 0.0)
    assert shift == pytest.approx(c1 * b + c2 * b * b, abs=1e-9 * max(1.0, abs(off)))


# --- THz frequency --------------------------------------------------------------------

def test_thz_frequency_examples(catalog):
    la = catalog.frequency_list("A")
    assert instantaneous_thz_frequency(la, 0.0) == pytest.approx(-33.211 * MHZ, abs=1e-6)
    assert instantaneous_thz_frequency(la, 0.05) == pytest.approx(-33.211 * MHZ + 2e3, abs=1e-6)
    fm = 2e3 * math.sin(2 * math.pi * 5 * 0.21)
    assert instantaneous_thz_frequency(la, 0.21) == pytest.approx(-6.539 * MHZ + fm, abs=1e-6)


def test_thz_frequency_cycles():
    fl = FrequencyList("x", (1.0, 2.0, 3.0), fm_amplitude=0.0)
    t = np.array([0.0, 0.1, 0.3, 0.5, 0.7, 1.3])
    assert list(instantaneous_thz_frequency(fl, t)) == [1.0, 1.0, 2.0, 3.0, 1.0, 1.0]


# --- excitation rates -----------------------------------------------------------------

def test_on_resonance_peak():
    d = DopplerParams(0.010)
    for w in (1.0, 0.3):
        assert excitation_rate(_line(weight=w), 0.0, MagneticField(0.0), d, 2.5) == pytest.approx(2.5 * w)


def test_half_maximum():
    d = DopplerParams(0.010)
    r = excitation_rate(_line(), doppler_fwhm(d) / 2, MagneticField(0.0), d, 1.0)
    assert r == pytest.approx(0.5, rel=1e-12)


def test_list_b_tail(catalog):
    (ln,) = [l for l in catalog.targeted if l.lower.label == (1, 0, 0)]
    d = DopplerParams(0.010)
    delta = -9.773 * MHZ - line_position(ln, 1.0)
    assert abs(delta) == pytest.approx(0.70 * MHZ, abs=0.01 * MHZ)
    assert excitation_rate(ln, -9.773 * MHZ, MagneticField(1.0), d, 1.0) < 1e-10


@settings(max_examples=100, deadline=None)
@given(delta=st.floats(0.0, 3e5), T=st.floats(0.005, 0.3))
def test_symmetric_and_maximal(delta, T):
    d, b = DopplerParams(T), MagneticField(0.0)
    up = excitation_rate(_line(), delta, b, d, 1.0)
    down = excitation_rate(_line(), -delta, b, d, 1.0)
    assert up == pytest.approx(down, rel=1e-12, abs=1e-300)
    assert up <= excitation_rate(_line(), 0.0, b, d, 1.0)


def _spread_oracle(line, nu, b, d):
    """Direct numerical average of the Gaussian profile over the field distribution."""
    s = doppler_sigma(d)

    def integrand(x):
        pos = line.position(x)
        g = math.exp(-0.5 * ((x - b.magnitude) / b.spread) ** 2) / (b.spread * math.sqrt(2 * math.pi))
        return g * math.exp(-0.5 * ((nu - pos) / s) ** 2)

    lo, hi = b.magnitude - 10 * b.spread, b.magnitude + 10 * b.spread
    # resonances in B can be narrow; give quad a dense set of break points
    pts = list(np.linspace(lo, hi, 41)[1:-1])
    return quad(integrand, lo, hi, points=pts, limit=1000, epsabs=1e-14)[0]


@pytest.mark.parametrize("c1,c2,nu", [
    (1.4e6, 0.0, 0.0), (1.4e6, 0.0, 2e5), (0.0, 78e3, 78e3), (0.0, 78e3, 60e3),
    (2e5, 5e4, 2.6e5), (0.0, -6.2e3, -6.2e3),
])
def test_field_spread_matches_quadrature(c1, c2, nu):
    ln = _line(0.0, c1, c2)
    b, d = MagneticField(1.0, 0.35), DopplerParams(0.012)
    assert excitation_rate(ln, nu, b, d, 1.0) == pytest.approx(_spread_oracle(ln, nu, b, d), rel=2e-3, abs=1e-9)


def test_rates_vectorised(catalog):
    lines = catalog.lines
    nu = np.linspace(-40e6, 10e6, 7)
    r = excitation_rates(lines, nu, MagneticField(1.0, 0.35), DopplerParams(0.15), 1.0)
    assert r.shape == (7, len(lines))
    for i, x in enumerate(nu):
        assert r[i, 3] == pytest.approx(excitation_rate(lines[3], x, MagneticField(1.0, 0.35), DopplerParams(0.15), 1.0))


def test_list_ordering(catalog):
    b, d = MagneticField(1.0), DopplerParams(0.010)
    s = {n: list_excitation(catalog.targeted, catalog.frequency_list(n), b, d) for n in "ABCDE"}
    assert s["A"] > max(s["D"], s["E"])
    assert min(s["D"], s["E"]) > max(s["B"], s["C"])
