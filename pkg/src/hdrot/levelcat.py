"""Level structure and transition-line catalog for the HD+ rotational line.

Frequencies are held in Hz internally.  On disk the catalog is a TOML file
with offsets in MHz relative to the spinless reference frequency, so the
numbers can be compared by eye with the excitation frequency lists.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from types import MappingProxyType
from typing import Mapping

import tomli

from .constants import F0_THEORY, KHZ, MHZ

__all__ = [
    "CatalogError",
    "CatalogParseError",
    "RoVibLevel",
    "HyperfineState",
    "HyperfineLine",
    "FrequencyList",
    "Catalog",
    "rovib_level",
    "GROUND_STATES",
    "N1_STATES",
    "builtin_lists",
    "default_catalog",
    "load_catalog",
    "save_catalog",
    "dumps_catalog",
    "targeted_lines",
]

LOW_SHIFT_LIMIT = 6.2 * KHZ  # |c2| (1 G)^2 bound for the Jz=0 -> Jz'=0 lines
LIST_SPAN_LIMIT = 40.0 * MHZ
DETUNED_OFFSET = 500.0 * MHZ


class CatalogError(ValueError):
    """A catalog violates one of its structural invariants."""


class CatalogParseError(CatalogError):
    """A catalog file could not be parsed."""


@dataclass(frozen=True)
class RoVibLevel:
    v: int
    N: int
    energy_offset: float  # Hz, relative to (v=0, N=0)

    def __post_init__(self):
        if self.v < 0 or self.N < 0:
            raise ValueError("quantum numbers must be non-negative")


def rovib_level(N: int, reference_frequency: float = F0_THEORY) -> RoVibLevel:
    """Rigid-rotor level of v=0 with rotational constant ``reference_frequency / 2``."""
    b_rot = reference_frequency / 2.0
    return RoVibLevel(0, N, b_rot * N * (N + 1))


@dataclass(frozen=True)
class HyperfineState:
    level: RoVibLevel
    F: int
    S: int
    J: int

    @property
    def degeneracy(self) -> int:
        return 2 * self.J + 1

    @property
    def label(self) -> tuple[int, int, int]:
        return (self.F, self.S, self.J)

    def __str__(self):
        return "N=%d(%d,%d,%d)" % (self.level.N, self.F, self.S, self.J)


_L0 = rovib_level(0)
_L1 = rovib_level(1)

# Order fixes the layout of population vectors: degeneracies 1:3:3:5.
GROUND_STATES: tuple[HyperfineState, ...] = tuple(
    HyperfineState(_L0, *fsj) for fsj in [(1, 0, 0), (0, 1, 1), (1, 1, 1), (1, 2, 2)]
)

# The ten (F, S, J) states of N'=1, 36 magnetic substates in total.
N1_STATES: tuple[HyperfineState, ...] = tuple(
    HyperfineState(_L1, *fsj)
    for fsj in [
        (0, 1, 0), (0, 1, 1), (0, 1, 2),
        (1, 0, 1),
        (1, 1, 0), (1, 1, 1), (1, 1, 2),
        (1, 2, 1), (1, 2, 2), (1, 2, 3),
    ]
)

_STATES_BY_N = {0: GROUND_STATES, 1: N1_STATES}


def _state(N: int, fsj) -> HyperfineState:
    fsj = tuple(int(q) for q in fsj)
    for s in _STATES_BY_N[N]:
        if s.label == fsj:
            return s
    raise CatalogError("no hyperfine state (F,S,J)=%s in N=%d" % (fsj, N))


@dataclass(frozen=True)
class HyperfineLine:
    """One electric-dipole component between hyperfine (sub)states.

    ``zero_field_offset`` is relative to the spinless frequency; the Zeeman
    coefficients are in Hz/G and Hz/G^2.
    """

    lower: HyperfineState
    upper: HyperfineState
    zero_field_offset: float
    zeeman_c1: float = 0.0
    zeeman_c2: float = 0.0
    polarization: str = "pi"
    weight: float = 1.0
    targeted: bool = False
    low_shift: bool = False
    lower_jz: int | None = None
    upper_jz: int | None = None

    def __post_init__(self):
        if self.polarization not in ("pi", "sigma"):
            raise CatalogError("polarization must be 'pi' or 'sigma', got %r" % self.polarization)
        if self.weight < 0:
            raise CatalogError("line weight must be non-negative")

    def position(self, b_gauss: float = 0.0) -> float:
        """Offset from the spinless frequency at field ``b_gauss`` (Hz)."""
        return self.zero_field_offset + self.zeeman_c1 * b_gauss + self.zeeman_c2 * b_gauss**2

    @property
    def label(self) -> str:
        lo = "(%d,%d,%d)" % self.lower.label
        up = "(%d,%d,%d)" % self.upper.label
        if self.lower_jz is not None:
            lo += "[%+d]" % self.lower_jz
        if self.upper_jz is not None:
            up += "[%+d]" % self.upper_jz
        return lo + "->" + up


@dataclass(frozen=True)
class FrequencyList:
    """A cycled set of THz excitation frequencies (offsets in Hz)."""

    name: str
    entries: tuple[float, ...]
    dwell: float = 0.200
    fm_amplitude: float = 2.0 * KHZ
    fm_rate: float = 5.0
    total_duration: float | None = None
    # lower (F,S,J) each entry is aimed at, if known
    targets: tuple[tuple[int, int, int], ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(float(e) for e in self.entries))
        if not self.entries:
            raise CatalogError("frequency list %r has no entries" % self.name)
        if self.dwell <= 0:
            raise CatalogError("dwell must be positive")
        if self.fm_amplitude < 0 or self.fm_rate < 0:
            raise CatalogError("FM amplitude and rate must be non-negative")
        if self.targets is not None:
            t = tuple(tuple(int(q) for q in x) for x in self.targets)
            if len(t) != len(self.entries):
                raise CatalogError("list %r: targets and entries differ in length" % self.name)
            object.__setattr__(self, "targets", t)

    @property
    def cycle_time(self) -> float:
        return self.dwell * len(self.entries)


@dataclass(frozen=True)
class Catalog:
    reference_frequency: float = F0_THEORY
    lines: tuple[HyperfineLine, ...] = ()
    lists: Mapping[str, FrequencyList] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "lines", tuple(self.lines))
        object.__setattr__(self, "lists", MappingProxyType(dict(self.lists)))

    def __eq__(self, other):
        if not isinstance(other, Catalog):
            return NotImplemented
        return (
            self.reference_frequency == other.reference_frequency
            and self.lines == other.lines
            and dict(self.lists) == dict(other.lists)
        )

    __hash__ = None

    def frequency_list(self, name: str) -> FrequencyList:
        try:
            return self.lists[name]
        except KeyError:
            raise KeyError("unknown frequency list %r (have: %s)" % (name, ", ".join(self.lists)))

    @property
    def targeted(self) -> tuple[HyperfineLine, ...]:
        return tuple(ln for ln in self.lines if ln.targeted)

    def validate(self) -> "Catalog":
        _validate(self)
        return self


# --- excitation frequency lists ------------------------------------------------

_COLS = [(1, 2, 2), (1, 1, 1), (1, 0, 0), (0, 1, 1)]
_TABLE_MHZ = {
    "A'": ([-33.211, -6.597, -6.578, -6.558, -6.539, -9.069, -2.138],
           [(1, 2, 2)] + [(1, 1, 1)] * 4 + [(1, 0, 0), (0, 1, 1)]),
    "A": ([-33.211, -6.539, -9.069, -2.138], _COLS),
    "B": ([-34.993, -7.850, -9.773, -2.465], _COLS),
    "C": ([-31.408, -5.096, -8.355, -1.812], _COLS),
    "D": ([-34.102, -7.194, -9.421, -2.301], _COLS),
    "E": ([-32.310, -5.817, -8.712, -1.975], _COLS),
    "detuned500": ([500.0], None),
}


def builtin_lists() -> dict[str, FrequencyList]:
    """The seven excitation lists, keyed by name, with default dwell and FM."""
    return {
        name: FrequencyList(name, tuple(x * MHZ for x in mhz), targets=targets)
        for name, (mhz, targets) in _TABLE_MHZ.items()
    }


def _validate(cat: Catalog) -> None:
    if not cat.reference_frequency > 0:
        raise CatalogError("reference frequency must be positive")
    expected_len = {"A'": 7, "A": 4, "B": 4, "C": 4, "D": 4, "E": 4, "detuned500": 1}
    for name, fl in cat.lists.items():
        if fl.name != name:
            raise CatalogError("list stored under %r is named %r" % (name, fl.name))
        n = expected_len.get(name)
        if n is not None and len(fl.entries) != n:
            raise CatalogError("list %s must have %d entries, has %d" % (name, n, len(fl.entries)))
        if name in ("A", "B", "C", "D", "E"):
            if any(abs(e) > LIST_SPAN_LIMIT for e in fl.entries):
                raise CatalogError("list %s has an entry beyond +-40 MHz" % name)
        if name == "detuned500" and abs(fl.entries[0] - DETUNED_OFFSET) > 1.0:
            raise CatalogError("detuned500 must hold the single value +500 MHz")
    for ln in cat.lines:
        if ln.lower.level.N != 0 or ln.upper.level.N != 1:
            raise CatalogError("line %s is not an N=0 -> N'=1 component" % ln.label)
        if ln.low_shift:
            if ln.zeeman_c1 != 0.0 or abs(ln.zeeman_c2) > LOW_SHIFT_LIMIT * (1 + 1e-12):
                raise CatalogError("low-shift line %s exceeds the Zeeman bounds" % ln.label)
        if ln.lower.label == (1, 1, 1) and ln.upper.label == (1, 1, 0) and ln.lower_jz == 0:
            if ln.zeeman_c1 != 0.0:
                raise CatalogError("(1,1,1)->(1,1,0) Jz=0 line must have no linear Zeeman term")


# --- file format ------------------------------------------------------------------

def _parse_lines(rows, path) -> list[HyperfineLine]:
    out = []
    for i, row in enumerate(rows):
        try:
            out.append(HyperfineLine(
                lower=_state(0, row["lower"]),
                upper=_state(1, row["upper"]),
                zero_field_offset=float(row["offset_MHz"]) * MHZ,
                zeeman_c1=float(row.get("c1_kHz_per_G", 0.0)) * KHZ,
                zeeman_c2=float(row.get("c2_kHz_per_G2", 0.0)) * KHZ,
                polarization=str(row.get("polarization", "pi")),
                weight=float(row.get("weight", 1.0)),
                targeted=bool(row.get("targeted", False)),
                low_shift=bool(row.get("low_shift", False)),
                lower_jz=row.get("lower_jz"),
                upper_jz=row.get("upper_jz"),
            ))
        except (KeyError, TypeError) as exc:
            raise CatalogParseError("%s: line %d: missing or bad field %s" % (path, i, exc))
    return out


def _parse_lists(table, path) -> dict[str, FrequencyList]:
    out = {}
    for name, t in table.items():
        try:
            out[name] = FrequencyList(
                name,
                tuple(float(x) * MHZ for x in t["entries_MHz"]),
                dwell=float(t.get("dwell_s", 0.2)),
                fm_amplitude=float(t.get("fm_amplitude_kHz", 2.0)) * KHZ,
                fm_rate=float(t.get("fm_rate_Hz", 5.0)),
                total_duration=t.get("total_duration_s"),
                targets=t.get("targets"),
            )
        except (KeyError, TypeError) as exc:
            raise CatalogParseError("%s: list %s: missing or bad field %s" % (path, name, exc))
    return out


def loads_catalog(text: str, path: str = "<string>") -> Catalog:
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise CatalogParseError("%s: %s" % (path, exc)) from exc
    meta = doc.get("meta", {})
    ref = float(meta.get("reference_frequency_MHz", F0_THEORY / MHZ)) * MHZ
    lines = _parse_lines(doc.get("lines", []), path)
    lists = _parse_lists(doc.get("list", {}), path)
    return Catalog(ref, lines, lists).validate()


def load_catalog(path) -> Catalog:
    """Read and validate a catalog file."""
    path = Path(path)
    return loads_catalog(path.read_text(), str(path))


def default_catalog() -> Catalog:
    text = resources.files("hdrot").joinpath("data/default_catalog.toml").read_text()
    return loads_catalog(text, "default_catalog.toml")


def _scaled_repr(x: float, unit: float) -> str:
    # shortest decimal y with float(y) * unit == x, so save/load round-trips exactly
    y = x / unit
    for cand in (y, math.nextafter(y, math.inf), math.nextafter(y, -math.inf)):
        if cand * unit == x:
            return repr(cand)
    raise CatalogError("value %r cannot be stored exactly in units of %g" % (x, unit))


_BARE_KEY = re.compile(r"^[A-Za-z0-9_-]+$")


def _key(name: str) -> str:
    return name if _BARE_KEY.match(name) else '"%s"' % name.replace('"', '\\"')


def dumps_catalog(cat: Catalog) -> str:
    out = ["[meta]", "reference_frequency_MHz = %s" % _scaled_repr(cat.reference_frequency, MHZ), ""]
    for ln in cat.lines:
        out.append("[[lines]]")
        out.append("lower = [%d, %d, %d]" % ln.lower.label)
        out.append("upper = [%d, %d, %d]" % ln.upper.label)
        if ln.lower_jz is not None:
            out.append("lower_jz = %d" % ln.lower_jz)
        if ln.upper_jz is not None:
            out.append("upper_jz = %d" % ln.upper_jz)
        out.append("offset_MHz = %s" % _scaled_repr(ln.zero_field_offset, MHZ))
        out.append("c1_kHz_per_G = %s" % _scaled_repr(ln.zeeman_c1, KHZ))
        out.append("c2_kHz_per_G2 = %s" % _scaled_repr(ln.zeeman_c2, KHZ))
        out.append('polarization = "%s"' % ln.polarization)
        out.append("weight = %r" % ln.weight)
        out.append("targeted = %s" % str(ln.targeted).lower())
        out.append("low_shift = %s" % str(ln.low_shift).lower())
        out.append("")
    for name, fl in cat.lists.items():
        out.append("[list.%s]" % _key(name))
        out.append("entries_MHz = [%s]" % ", ".join(_scaled_repr(e, MHZ) for e in fl.entries))
        out.append("dwell_s = %r" % fl.dwell)
        out.append("fm_amplitude_kHz = %s" % _scaled_repr(fl.fm_amplitude, KHZ))
        out.append("fm_rate_Hz = %r" % fl.fm_rate)
        if fl.total_duration is not None:
            out.append("total_duration_s = %r" % fl.total_duration)
        if fl.targets is not None:
            out.append("targets = [%s]" % ", ".join("[%d, %d, %d]" % t for t in fl.targets))
        out.append("")
    return "\n".join(out)


def save_catalog(cat: Catalog, path) -> None:
    Path(path).write_text(dumps_catalog(cat))


def targeted_lines(catalog: Catalog, flist: FrequencyList, tolerance: float,
                   b_gauss: float = 1.0) -> list[tuple[float, HyperfineLine]]:
    """Pair each list entry with the catalog lines within ``tolerance`` of it at ``b_gauss``."""
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    pairs = []
    for entry in flist.entries:
        for ln in catalog.lines:
            if abs(ln.position(b_gauss) - entry) <= tolerance:
                pairs.append((entry, ln))
    return pairs
