"""Virtual hardware: eye, time-of-flight sensor, lens drift and the push-up rig."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from presbysim import optics
from presbysim.calibration import Eye
from presbysim.controller import (
    ControllerConfig,
    ControllerState,
    LensCommand,
    SensorSample,
    is_settled,
    new_state,
    step,
)
from presbysim.errors import InvalidArgument
from presbysim.optics import AgeMode, WearerProfile
from presbysim.traces import ScenarioTrace


@dataclass(frozen=True)
class EyeModel:
    """A spherical eye.

    ``refraction_d`` is the distance prescription (negative for myopes); the
    eye focuses through a lens ``P`` as an emmetrope would through
    ``P - refraction_d``.
    """

    refraction_d: float = 0.0
    aoa_d: float = optics.REFERENCE_AMPLITUDE_20
    dof_d: float = 0.0
    pupil_mm: float = 4.0

    def __post_init__(self):
        if not self.aoa_d > 0:
            raise InvalidArgument("eye amplitude must be positive")
        if self.dof_d < 0 or not self.pupil_mm > 0:
            raise InvalidArgument("dof must be >= 0 and pupil > 0")

    def demand(self, lens_power: float, distance_m: float) -> float:
        return optics.accommodation_demand(distance_m, lens_power - self.refraction_d)

    def blur(self, lens_power: float, distance_m: float) -> float:
        return optics.blur(self.demand(lens_power, distance_m), self.aoa_d, self.dof_d)


def sees_clearly(eye: EyeModel, lens_power: float, distance_m: float) -> bool:
    return eye.blur(lens_power, distance_m) == 0.0


def clarity_probe(eye: EyeModel | tuple[EyeModel, EyeModel], distance_m: float = 1.0):
    """Calibration probe ``(Eye, lens_power) -> clear`` backed by virtual eyes."""
    left, right = (eye, eye) if isinstance(eye, EyeModel) else eye

    def probe(which: Eye, power: float) -> bool:
        return sees_clearly(left if which is Eye.LEFT else right, power, distance_m)

    return probe


def lens_optical_power(command_d: float, temp_c: float, cfg: ControllerConfig) -> float:
    """Delivered power of a lens whose thermal drift mirrors the compensation model."""
    return command_d - cfg.temp_coeff_d_per_c * (temp_c - cfg.temp_ref_c)


@dataclass
class TofModel:
    rate_hz: float = 30.0
    noise_sigma_mm: float = 3.0
    outlier_prob: float = 0.01
    outlier_range_mm: tuple[int, int] = (20, 2000)
    min_mm: int = 20
    max_mm: int = 2000
    seed: int = 0
    _rng: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.rate_hz > 0 or self.noise_sigma_mm < 0:
            raise InvalidArgument("rate must be positive and sigma non-negative")
        if not 0.0 <= self.outlier_prob <= 1.0:
            raise InvalidArgument("outlier_prob must be within [0, 1]")
        if not (0 <= self.min_mm < self.max_mm):
            raise InvalidArgument("sensor range must satisfy 0 <= min < max")
        lo, hi = self.outlier_range_mm
        if lo > hi:
            raise InvalidArgument("outlier range is reversed")
        self.outlier_range_mm = (int(lo), int(hi))
        self.reset()

    def reset(self, seed: int | None = None):
        if seed is not None:
            self.seed = seed
        self._rng = np.random.default_rng(self.seed)

    def measure(self, true_mm: float) -> int:
        # both draws happen on every call so the stream position never
        # depends on the outcome
        u = self._rng.random()
        z = self._rng.standard_normal()
        if u < self.outlier_prob:
            lo, hi = self.outlier_range_mm
            value = lo + (hi - lo) * self._rng.random()
        else:
            value = true_mm + self.noise_sigma_mm * z
        return int(min(max(round(value), self.min_mm), self.max_mm))

    def trace(self, distances_mm, temp_c: float = 25.0, t0_ms: int = 0) -> ScenarioTrace:
        """Sample a sequence of true distances at ``rate_hz``."""
        period = 1000.0 / self.rate_hz
        return ScenarioTrace([
            SensorSample(t0_ms + round(i * period), self.measure(d), temp_c)
            for i, d in enumerate(distances_mm)
        ])


@dataclass
class PushUpConfig:
    """Board approach for a push-up near-point measurement.

    The board starts at ``start_mm`` and advances in ``step_mm`` increments
    at ``speed_mm_per_s``.  At each position it holds until the lens command
    has settled (at most ``max_hold_s``), the way an examiner pauses to let
    the reader judge.  The near point is the first position at which
    ``sustain_ticks`` consecutive blurred ticks are observed.
    """

    start_mm: float = 1000.0
    speed_mm_per_s: float = 20.0
    sustain_ticks: int = 10
    step_mm: float = 1.0
    min_mm: float = 30.0
    max_hold_s: float = 10.0
    temp_c: float = 25.0

    def __post_init__(self):
        largest = max(optics.mode_threshold(m) for m in optics.SIMULATED_MODES) * 1000
        if not self.start_mm > largest:
            raise InvalidArgument(f"start_mm must exceed the largest threshold ({largest:.1f} mm)")
        if not (self.speed_mm_per_s > 0 and self.step_mm > 0 and self.max_hold_s > 0):
            raise InvalidArgument("speed, step and hold time must be positive")
        if not (isinstance(self.sustain_ticks, int) and self.sustain_ticks >= 1):
            raise InvalidArgument("sustain_ticks must be an integer >= 1")
        if not 0 < self.min_mm < self.start_mm:
            raise InvalidArgument("min_mm must lie between 0 and start_mm")


def run_push_up(
    eye: EyeModel | tuple[EyeModel, EyeModel],
    wearer: WearerProfile,
    mode: AgeMode,
    cfg: PushUpConfig | None = None,
    controller_cfg: ControllerConfig | None = None,
    tof: TofModel | None = None,
) -> float | None:
    """Simulated near point in mm, or ``None`` when blur never sets in.

    The wearer's offsets should already come from calibration.  Viewing is
    binocular: a tick counts as blurred only when both eyes are blurred.
    ``tof=None`` uses an ideal sensor that reports the rounded distance.
    """
    cfg = cfg or PushUpConfig()
    ccfg = controller_cfg or ControllerConfig()
    left, right = (eye, eye) if isinstance(eye, EyeModel) else eye
    state = new_state(mode, wearer, ccfg)
    rate = ccfg.refresh_hz
    temp = cfg.temp_c
    transit_ticks = max(1, round(cfg.step_mm / cfg.speed_mm_per_s * rate))
    max_hold = max(1, math.ceil(cfg.max_hold_s * rate))
    min_hold = ccfg.debounce_len
    tick = 0
    run = 0

    def advance(d_mm: float) -> bool:
        nonlocal tick, run
        reading = tof.measure(d_mm) if tof is not None else int(round(d_mm))
        cmd = step(state, SensorSample(round(tick * 1000 / rate), reading, temp), ccfg)
        tick += 1
        d_m = d_mm / 1000.0
        blurred = not (
            sees_clearly(left, lens_optical_power(cmd.power_left, temp, ccfg), d_m)
            or sees_clearly(right, lens_optical_power(cmd.power_right, temp, ccfg), d_m)
        )
        run = run + 1 if blurred else 0
        return blurred

    pos = cfg.start_mm
    prev = None
    while pos >= cfg.min_mm:
        if prev is not None:
            for i in range(1, transit_ticks):
                advance(prev + (pos - prev) * i / transit_ticks)
        for held in range(1, max_hold + 1):
            blurred = advance(pos)
            if run >= cfg.sustain_ticks:
                return pos
            if held >= min_hold and not blurred and is_settled(state, ccfg):
                break
        prev = pos
        pos = cfg.start_mm - cfg.step_mm * round((cfg.start_mm - pos) / cfg.step_mm + 1)
    return None


def replay(trace: ScenarioTrace, state: ControllerState, cfg: ControllerConfig) -> list[LensCommand]:
    """Drive ``state`` with every sample of ``trace``; one command per sample."""
    trace.validate()
    return [step(state, s, cfg) for s in trace.samples]
