"""Accommodation and vergence arithmetic.

Sign convention: minus lenses and simulation deltas are negative diopters,
lens power adds to the eye's optical system, and the accommodative demand
for an object at distance ``d`` (meters) seen through a lens ``P`` is
``1/d - P``.  Everything here is a pure function.
"""

from __future__ import annotations

import bisect
import enum
import math
from dataclasses import dataclass, field

from presbysim.errors import DomainError, InvalidArgument

#: Sanity bound for any power handled by the program.
MAX_ABS_DIOPTER = 100.0

#: Lens hardware range (D) and pupillary-distance range (mm).
LENS_POWER_MIN = -15.0
LENS_POWER_MAX = 15.0
PD_RANGE_MM = (55.0, 70.0)


class AgeBracket(enum.Enum):
    TWENTIES = "20s"
    THIRTIES = "30s"


class AgeMode(enum.Enum):
    BASELINE = "baseline"
    FORTIES = "40s"
    FIFTIES = "50s"
    SIXTIES = "60s"

    @classmethod
    def parse(cls, text: str) -> "AgeMode":
        key = str(text).strip().lower()
        for mode in cls:
            if key in (mode.value, mode.name.lower()):
                return mode
        raise InvalidArgument(f"unknown age mode {text!r}")


SIMULATED_MODES = (AgeMode.FORTIES, AgeMode.FIFTIES, AgeMode.SIXTIES)

# Lens deltas per (wearer bracket, target mode), one decimal place.
DELTA_TABLE: dict[tuple[AgeBracket, AgeMode], float] = {
    (AgeBracket.TWENTIES, AgeMode.FORTIES): -5.8,
    (AgeBracket.TWENTIES, AgeMode.FIFTIES): -7.3,
    (AgeBracket.TWENTIES, AgeMode.SIXTIES): -8.5,
    (AgeBracket.THIRTIES, AgeMode.FORTIES): -3.3,
    (AgeBracket.THIRTIES, AgeMode.FIFTIES): -5.1,
    (AgeBracket.THIRTIES, AgeMode.SIXTIES): -6.0,
}

# Target amplitudes of the simulated age groups. The 40s value is the
# published unrounded one (9.75 - 5.75); the table's -5.8 would give 3.95.
TARGET_AMPLITUDE: dict[AgeMode, float] = {
    AgeMode.FORTIES: 4.0,
    AgeMode.FIFTIES: 2.45,
    AgeMode.SIXTIES: 1.25,
}

REFERENCE_AMPLITUDE_20 = 9.75


@dataclass(frozen=True)
class AccommodationModel:
    """Piecewise-linear amplitude-of-accommodation curve over age."""

    anchors: tuple[tuple[float, float], ...] = (
        (20.0, 9.75),
        (30.0, 7.3),
        (40.0, 4.0),
        (50.0, 2.45),
        (60.0, 1.25),
    )

    def __post_init__(self):
        if not self.anchors:
            raise InvalidArgument("accommodation model needs at least one anchor")
        ages = [a for a, _ in self.anchors]
        amps = [v for _, v in self.anchors]
        if any(b <= a for a, b in zip(ages, ages[1:])):
            raise InvalidArgument("anchor ages must be strictly increasing")
        if any(b >= a for a, b in zip(amps, amps[1:])):
            raise InvalidArgument("anchor amplitudes must be strictly decreasing")

    @property
    def min_age(self) -> float:
        return self.anchors[0][0]

    @property
    def max_age(self) -> float:
        return self.anchors[-1][0]


DEFAULT_MODEL = AccommodationModel()


def duane_amplitude(age_years: float, model: AccommodationModel = DEFAULT_MODEL) -> float:
    """Amplitude of accommodation (D) at ``age_years``, interpolated linearly."""
    if not (model.min_age <= age_years <= model.max_age):
        raise DomainError(
            f"age {age_years} outside model range [{model.min_age}, {model.max_age}]"
        )
    ages = [a for a, _ in model.anchors]
    i = bisect.bisect_left(ages, age_years)
    if ages[i] == age_years:
        return model.anchors[i][1]
    (a0, v0), (a1, v1) = model.anchors[i - 1], model.anchors[i]
    return v0 + (v1 - v0) * (age_years - a0) / (a1 - a0)


def bracket_for_age(age_years: float) -> AgeBracket:
    if 18 <= age_years < 30:
        return AgeBracket.TWENTIES
    if 30 <= age_years < 40:
        return AgeBracket.THIRTIES
    raise InvalidArgument(f"wearer age {age_years} has no delta row (supported: 18-39)")


def mode_delta(bracket: AgeBracket, mode: AgeMode) -> float:
    if mode is AgeMode.BASELINE:
        raise InvalidArgument("baseline mode carries no delta")
    try:
        return DELTA_TABLE[(AgeBracket(bracket), mode)]
    except (KeyError, ValueError):
        raise InvalidArgument(f"no delta for bracket={bracket!r} mode={mode!r}") from None


def target_amplitude(mode: AgeMode) -> float:
    if mode is AgeMode.BASELINE:
        raise InvalidArgument("baseline mode has no target amplitude")
    return TARGET_AMPLITUDE[mode]


def near_point(aoa: float) -> float:
    """Near point in meters of a fully corrected eye with amplitude ``aoa``."""
    if not aoa > 0:
        raise DomainError(f"amplitude must be positive, got {aoa}")
    return 1.0 / aoa


def mode_threshold(mode: AgeMode) -> float:
    """Switching distance (m) below which the presbyopic delta is applied."""
    return near_point(target_amplitude(mode))


def accommodation_demand(distance: float, lens_power: float) -> float:
    if not distance > 0:
        raise DomainError(f"distance must be positive, got {distance}")
    return 1.0 / distance - lens_power


def defocus(demand: float, aoa: float, dof: float = 0.0) -> float:
    """Accommodative deficit: the part of ``demand`` the eye cannot supply."""
    if aoa < 0 or dof < 0:
        raise DomainError("aoa and dof must be non-negative")
    return max(0.0, demand - aoa - dof)


def blur(demand: float, aoa: float, dof: float = 0.0) -> float:
    """Two-sided defocus magnitude.

    Adds the over-plus side to :func:`defocus`: a negative demand puts the
    image in front of the retina and relaxing accommodation cannot fix it.
    """
    if aoa < 0 or dof < 0:
        raise DomainError("aoa and dof must be non-negative")
    return max(0.0, demand - aoa - dof, -demand - dof)


@dataclass
class WearerProfile:
    age_years: float
    offset_left: float = 0.0
    offset_right: float = 0.0
    aoa: float | None = None
    pd_mm: float = 63.0
    bracket: AgeBracket = field(init=False)

    def __post_init__(self):
        self.bracket = bracket_for_age(self.age_years)
        if self.aoa is None:
            self.aoa = duane_amplitude(max(self.age_years, DEFAULT_MODEL.min_age))
        if not (self.aoa > 0 and math.isfinite(self.aoa)):
            raise InvalidArgument(f"wearer amplitude must be positive, got {self.aoa}")
        for name in ("offset_left", "offset_right"):
            value = getattr(self, name)
            if not (LENS_POWER_MIN <= value <= LENS_POWER_MAX):
                raise InvalidArgument(f"{name}={value} D outside lens range")
        if not (PD_RANGE_MM[0] <= self.pd_mm <= PD_RANGE_MM[1]):
            raise InvalidArgument(f"pd_mm={self.pd_mm} outside {PD_RANGE_MM}")
