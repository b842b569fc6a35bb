import math
from pathlib import Path

import numpy as np
import pytest
import tomli
from hypothesis import given, settings
from hypothesis import strategies as st

from hdrot.levelcat import (
    GROUND_STATES,
    N1_STATES,
    Catalog,
    CatalogError,
    CatalogParseError,
    FrequencyList,
    HyperfineLine,
    builtin_lists,
    dumps_catalog,
    load_catalog,
    loads_catalog,
    rovib_level,
    save_catalog,
    targeted_lines,
)

MHZ = 1e6
DATA = Path(__file__).resolve().parents[1] / "src" / "hdrot" / "data" / "default_catalog.toml"

# frequency lists as printed, MHz, columns (1,2,2) (1,1,1) (1,0,0) (0,1,1)
LIST_A = [-33.211, -6.539, -9.069, -2.138]
LIST_A_PRIME = [-33.211, -6.597, -6.578, -6.558, -6.539, -9.069, -2.138]
LIST_B = [-34.993, -7.850, -9.773, -2.465]
LIST_C = [-31.408, -5.096, -8.355, -1.812]
LIST_D = [-34.102, -7.194, -9.421, -2.301]
LIST_E = [-32.310, -5.817, -8.712, -1.975]


def mhz(fl):
    return [e / MHZ for e in fl.entries]


# --- level structure ----------------------------------------------------------------

def test_ground_states_and_degeneracies():
    assert {s.label for s in GROUND_STATES} == {(1, 0, 0), (0, 1, 1), (1, 1, 1), (1, 2, 2)}
    assert sum(s.degeneracy for s in GROUND_STATES) == 12
    assert all(s.degeneracy == 2 * s.J + 1 > 0 for s in GROUND_STATES + N1_STATES)


def test_n1_manifold_has_36_substates():
    assert sum(s.degeneracy for s in N1_STATES) == 36


def test_rovib_energy_offsets():
    assert rovib_level(0).energy_offset == 0.0
    e = [rovib_level(n).energy_offset for n in range(6)]
    assert all(b > a for a, b in zip(e, e[1:]))


# --- bundled catalog ------------------------------------------------------------------

def test_default_catalog_list_a(catalog):
    assert mhz(catalog.frequency_list("A")) == pytest.approx(LIST_A, abs=1e-9)


def test_default_reference_frequency(catalog):
    assert catalog.reference_frequency == 1_314_925_752_000.0


@pytest.mark.parametrize("name,values", [
    ("A", LIST_A), ("A'", LIST_A_PRIME), ("B", LIST_B), ("C", LIST_C),
    ("D", LIST_D), ("E", LIST_E), ("detuned500", [500.0]),
])
def test_builtin_lists_verbatim(name, values):
    fl = builtin_lists()[name]
    assert mhz(fl) == pytest.approx(values, abs=1e-9)
    assert (fl.dwell, fl.fm_amplitude, fl.fm_rate) == (0.2, 2e3, 5.0)


def test_builtin_lists_match_bundled_file(catalog):
    assert dict(catalog.lists) == builtin_lists()


def test_list_lengths(catalog):
    n = {k: len(v.entries) for k, v in catalog.lists.items()}
    assert n == {"A'": 7, "A": 4, "B": 4, "C": 4, "D": 4, "E": 4, "detuned500": 1}


def test_lists_within_40_mhz(catalog):
    for name in "ABCDE":
        assert all(abs(e) <= 40 * MHZ for e in catalog.frequency_list(name).entries)


def test_list_b_is_reference_plus_detunings():
    a, b = builtin_lists()["A"], builtin_lists()["B"]
    det = np.subtract(b.entries, a.entries) / MHZ
    assert det == pytest.approx([-1.782, -1.311, -0.704, -0.327], abs=1e-6)


def test_half_detuning_lists():
    lists = builtin_lists()
    a = np.array(lists["A"].entries)
    for half, full in (("D", "B"), ("E", "C")):
        d = np.array(lists[half].entries) - a
        f = np.array(lists[full].entries) - a
        assert np.all(np.abs(d - 0.5 * f) <= 1e3)


def test_a_prime_111_steps():
    entries = np.array(builtin_lists()["A'"].entries[1:5])
    assert (entries - (-6.617 * MHZ)) / 1e3 == pytest.approx([20, 39, 59, 78], abs=1.0)


def test_unsuitable_line_present_not_targeted(catalog):
    (ln,) = [l for l in catalog.lines if abs(l.zero_field_offset - 11.78 * MHZ) < 1e3]
    assert not ln.targeted


def test_low_shift_and_111_invariants(catalog):
    low = [l for l in catalog.lines if l.low_shift]
    assert len(low) >= 4
    for l in low:
        assert l.zeeman_c1 == 0.0 and abs(l.zeeman_c2) <= 6.2e3
    (l111,) = [l for l in catalog.targeted if l.lower.label == (1, 1, 1)]
    assert l111.upper.label == (1, 1, 0) and l111.zeeman_c1 == 0.0
    assert l111.zeeman_c2 == pytest.approx(78e3)


# --- targeted_lines -------------------------------------------------------------------

def _raw_positions(b):
    """Line positions straight from the catalog file, bypassing the package."""
    doc = tomli.loads(DATA.read_text())
    return [(tuple(r["lower"]), (r["offset_MHz"] + r["c1_kHz_per_G"] * 1e-3 * b
                                 + r["c2_kHz_per_G2"] * 1e-3 * b * b) * MHZ)
            for r in doc["lines"]]


def test_targeted_list_a(catalog):
    pairs = targeted_lines(catalog, catalog.frequency_list("A"), 10e3, b_gauss=1.0)
    assert len(pairs) == 4
    assert {ln.lower.label for _, ln in pairs} == {s.label for s in GROUND_STATES}
    assert sorted(e for e, _ in pairs) == sorted(catalog.frequency_list("A").entries)


def test_targeted_detuned_empty(catalog):
    for b in (0.0, 1.0, 5.0):
        assert targeted_lines(catalog, catalog.frequency_list("detuned500"), 1e6, b_gauss=b) == []


def test_targeted_list_b_matches_brute_force(catalog):
    brute = [(e, lo) for e in LIST_B for lo, pos in _raw_positions(1.0) if abs(pos - e * MHZ) <= 10e3]
    assert brute == []
    assert targeted_lines(catalog, catalog.frequency_list("B"), 10e3, b_gauss=1.0) == []


def test_targeted_bad_tolerance(catalog):
    with pytest.raises(ValueError):
        targeted_lines(catalog, catalog.frequency_list("A"), 0.0)


# --- file handling --------------------------------------------------------------------

def _only_lists_text():
    text = DATA.read_text()
    return "[meta]\nreference_frequency_MHz = 1314925.752\n\n" + text[text.index('[list."A\'"]'):]


def test_empty_line_set(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text(_only_lists_text())
    cat = load_catalog(p)
    assert cat.lines == ()
    assert len(cat.frequency_list("A").entries) == 4


def test_round_trip(catalog, tmp_path):
    p = tmp_path / "c.toml"
    save_catalog(catalog, p)
    again = load_catalog(p)
    assert again == catalog
    assert dumps_catalog(again) == dumps_catalog(catalog)


@settings(max_examples=60, deadline=None)
@given(
    offset=st.floats(-40.0, 40.0, allow_nan=False),
    c1=st.floats(-2000.0, 2000.0, allow_nan=False),
    c2=st.floats(-100.0, 100.0, allow_nan=False),
    weight=st.floats(0.0, 10.0, allow_nan=False),
    pol=st.sampled_from(["pi", "sigma"]),
)
def test_round_trip_property(offset, c1, c2, weight, pol):
    ln = HyperfineLine(GROUND_STATES[0], N1_STATES[3], offset * MHZ, c1 * 1e3, c2 * 1e3, pol, weight)
    cat = Catalog(lines=(ln,), lists=builtin_lists())
    assert loads_catalog(dumps_catalog(cat)) == cat


def test_list_a_wrong_length_rejected():
    text = _only_lists_text().replace("entries_MHz = [-33.211, -6.539, -9.069, -2.138]",
                                      "entries_MHz = [-33.211, -6.539, -9.069]")
    assert text != _only_lists_text()
    with pytest.raises(CatalogError):
        loads_catalog(text)


def test_list_beyond_40_mhz_rejected():
    text = _only_lists_text().replace("-31.408", "-41.408")
    with pytest.raises(CatalogError):
        loads_catalog(text)


def test_detuned_value_checked():
    lists = dict(builtin_lists())
    lists["detuned500"] = FrequencyList("detuned500", (400 * MHZ,))
    with pytest.raises(CatalogError):
        Catalog(lists=lists).validate()


def test_low_shift_bound_rejected():
    ln = HyperfineLine(GROUND_STATES[0], N1_STATES[3], -9.0 * MHZ, 0.0, 7e3, low_shift=True)
    with pytest.raises(CatalogError):
        Catalog(lines=(ln,)).validate()
    ln = HyperfineLine(GROUND_STATES[0], N1_STATES[3], -9.0 * MHZ, 1.0, 1e3, low_shift=True)
    with pytest.raises(CatalogError):
        Catalog(lines=(ln,)).validate()


def test_111_linear_term_rejected():
    lo = next(s for s in GROUND_STATES if s.label == (1, 1, 1))
    up = next(s for s in N1_STATES if s.label == (1, 1, 0))
    ln = HyperfineLine(lo, up, -6.617 * MHZ, 5e3, 78e3, lower_jz=0, upper_jz=0)
    with pytest.raises(CatalogError):
        Catalog(lines=(ln,)).validate()


def test_malformed_file():
    with pytest.raises(CatalogParseError):
        loads_catalog("[meta\nreference_frequency_MHz = 1")
    with pytest.raises(CatalogParseError):
        loads_catalog("[[lines]]\nlower = [1, 0, 0]\n")


def test_unknown_state_rejected():
    with pytest.raises(CatalogError):
        loads_catalog("[[lines]]\nlower = [2, 0, 0]\nupper = [1, 0, 1]\noffset_MHz = 0.0\n")


def test_frequency_list_defaults_and_errors(catalog):
    fl = FrequencyList("x", (1.0, 2.0))
    assert math.isclose(fl.cycle_time, 0.4)
    with pytest.raises(CatalogError):
        FrequencyList("x", ())
    with pytest.raises(KeyError):
        catalog.frequency_list("nope")
