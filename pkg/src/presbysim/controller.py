"""Distance-driven lens controller.

One call to :func:`step` runs the whole per-sample pipeline::

    debounce -> region -> target power -> exponential slew
             -> temperature compensation -> quantize/clamp

and returns a :class:`LensCommand` for both eyes.  The controller state is
owned by a single caller; independent states can run side by side.
"""

from __future__ import annotations

import enum
import logging
import math
from collections import deque
from dataclasses import dataclass, field

from presbysim import optics
from presbysim.errors import InvalidArgument
from presbysim.optics import AgeMode, WearerProfile

log = logging.getLogger(__name__)

OPERATING_TEMP_C = (0.0, 45.0)
SANE_TEMP_C = (-20.0, 80.0)


class Region(enum.Enum):
    CORRECTIVE = "corrective"
    PRESBYOPIC = "presbyopic"


@dataclass
class ControllerConfig:
    refresh_hz: float = 60.0
    tau_s: float = 0.3
    tau_by_mode: dict[AgeMode, float] = field(default_factory=dict)
    debounce_len: int = 5
    debounce_threshold: int = 3
    debounce_bucket_mm: int = 10
    temp_coeff_d_per_c: float = 0.01
    temp_ref_c: float = 25.0
    power_min: float = optics.LENS_POWER_MIN
    power_max: float = optics.LENS_POWER_MAX
    quantum_d: float = 0.1
    dof_d: float = 0.0
    hysteresis_mm: float = 0.0

    def __post_init__(self):
        if not self.refresh_hz > 0:
            raise InvalidArgument("refresh_hz must be positive")
        if not self.tau_s > 0 or any(not t > 0 for t in self.tau_by_mode.values()):
            raise InvalidArgument("time constants must be positive")
        if not (isinstance(self.debounce_len, int) and self.debounce_len >= 1):
            raise InvalidArgument("debounce_len must be an integer >= 1")
        if not (isinstance(self.debounce_threshold, int)
                and 1 <= self.debounce_threshold <= self.debounce_len):
            raise InvalidArgument("debounce_threshold must be in [1, debounce_len]")
        if not (isinstance(self.debounce_bucket_mm, int) and self.debounce_bucket_mm >= 1):
            raise InvalidArgument("debounce_bucket_mm must be an integer >= 1")
        if not self.power_min < self.power_max:
            raise InvalidArgument("power_min must be below power_max")
        if not self.quantum_d > 0:
            raise InvalidArgument("quantum_d must be positive")
        if self.dof_d < 0 or self.hysteresis_mm < 0:
            raise InvalidArgument("dof_d and hysteresis_mm must be non-negative")

    def tau_for(self, mode: AgeMode) -> float:
        return self.tau_by_mode.get(mode, self.tau_s)


@dataclass(frozen=True)
class SensorSample:
    t_ms: int
    distance_mm: int
    temp_c: float = 25.0

    def __post_init__(self):
        if self.distance_mm < 0:
            raise InvalidArgument(f"negative distance {self.distance_mm}")
        if not (SANE_TEMP_C[0] <= self.temp_c <= SANE_TEMP_C[1]):
            raise InvalidArgument(f"temperature {self.temp_c} C outside sanity band")


@dataclass(frozen=True)
class LensCommand:
    t_ms: int
    power_left: float
    power_right: float
    region: Region
    clamped: bool
    temp_warning: bool = False


class DebounceBuffer:
    """Ring of the latest raw readings with a bucketed consensus vote.

    Readings are grouped into ``bucket_mm`` wide bins for counting.  If a bin
    holds at least ``threshold`` readings, the most recent raw reading from
    that bin is the stable value (the most recently seen bin wins ties);
    otherwise the incoming reading is passed through.
    """

    def __init__(self, size: int = 5, threshold: int = 3, bucket_mm: int = 10):
        self.values: deque[int] = deque(maxlen=size)
        self.threshold = threshold
        self.bucket_mm = bucket_mm

    def __len__(self):
        return len(self.values)

    def push(self, distance_mm: int) -> int:
        self.values.append(distance_mm)
        bucket = self.bucket_mm
        counts: dict[int, int] = {}
        for v in self.values:
            counts[v // bucket] = counts.get(v // bucket, 0) + 1
        for v in reversed(self.values):
            if counts[v // bucket] >= self.threshold:
                return v
        return distance_mm


@dataclass
class ControllerState:
    mode: AgeMode
    wearer: WearerProfile
    buffer: DebounceBuffer
    current_left: float
    current_right: float
    target_left: float
    target_right: float
    last_stable_mm: int | None = None
    last_t_ms: int | None = None
    last_temp_c: float = 25.0
    region: Region = Region.CORRECTIVE
    last_command: LensCommand | None = None


def new_state(mode: AgeMode, wearer: WearerProfile, cfg: ControllerConfig) -> ControllerState:
    """Fresh state with both lenses resting at the wearer's corrective offsets."""
    if mode is not AgeMode.BASELINE:
        optics.mode_delta(wearer.bracket, mode)
    return ControllerState(
        mode=mode,
        wearer=wearer,
        buffer=DebounceBuffer(cfg.debounce_len, cfg.debounce_threshold, cfg.debounce_bucket_mm),
        current_left=wearer.offset_left,
        current_right=wearer.offset_right,
        target_left=wearer.offset_left,
        target_right=wearer.offset_right,
        last_temp_c=cfg.temp_ref_c,
    )


def debounce_push(state: ControllerState, distance_mm: int) -> int:
    if distance_mm < 0:
        raise InvalidArgument(f"negative distance {distance_mm}")
    return state.buffer.push(distance_mm)


def region_of(
    stable_mm: float,
    mode: AgeMode,
    previous: Region | None = None,
    hysteresis_mm: float = 0.0,
) -> Region:
    if mode is AgeMode.BASELINE:
        return Region.CORRECTIVE
    threshold_mm = optics.mode_threshold(mode) * 1000.0
    if previous is Region.PRESBYOPIC:
        threshold_mm += hysteresis_mm
    return Region.PRESBYOPIC if stable_mm < threshold_mm else Region.CORRECTIVE


def target_power(
    stable_mm: float,
    mode: AgeMode,
    wearer: WearerProfile,
    region: Region | None = None,
) -> tuple[float, float]:
    if region is None:
        region = region_of(stable_mm, mode)
    if region is Region.CORRECTIVE:
        return wearer.offset_left, wearer.offset_right
    delta = optics.mode_delta(wearer.bracket, mode)
    return delta + wearer.offset_left, delta + wearer.offset_right


def slew(current: float, target: float, dt_s: float, tau_s: float) -> float:
    """Exponential approach of ``current`` toward ``target`` over ``dt_s``."""
    if not (dt_s > 0 and tau_s > 0):
        raise InvalidArgument("dt_s and tau_s must be positive")
    return target + (current - target) * math.exp(-dt_s / tau_s)


def temperature_in_spec(temp_c: float) -> bool:
    return OPERATING_TEMP_C[0] <= temp_c <= OPERATING_TEMP_C[1]


def compensate_temperature(power: float, temp_c: float, cfg: ControllerConfig) -> float:
    """Offset ``power`` linearly for lens thermal drift about the reference temperature."""
    return power + cfg.temp_coeff_d_per_c * (temp_c - cfg.temp_ref_c)


def quantize(power: float, quantum: float) -> float:
    # ties away from zero; the epsilon absorbs binary representation error
    # (-5.75 / 0.1 evaluates to -57.49999...)
    steps = math.floor(abs(power) / quantum + 0.5 + 1e-9)
    return round(math.copysign(steps * quantum, power), 9) + 0.0


def quantize_clamp(power: float, cfg: ControllerConfig) -> tuple[float, bool]:
    if not math.isfinite(power):
        raise InvalidArgument(f"non-finite power {power}")
    q = quantize(power, cfg.quantum_d)
    if q < cfg.power_min:
        return cfg.power_min, True
    if q > cfg.power_max:
        return cfg.power_max, True
    return q, False


def step(state: ControllerState, sample: SensorSample, cfg: ControllerConfig) -> LensCommand:
    if state.last_t_ms is not None and sample.t_ms < state.last_t_ms:
        raise InvalidArgument(
            f"timestamp {sample.t_ms} precedes previous sample at {state.last_t_ms}"
        )
    stable = debounce_push(state, sample.distance_mm)
    region = region_of(stable, state.mode, state.region, cfg.hysteresis_mm)
    tgt_l, tgt_r = target_power(stable, state.mode, state.wearer, region)

    if state.last_t_ms is None:
        dt_s = 1.0 / cfg.refresh_hz
    else:
        dt_s = (sample.t_ms - state.last_t_ms) / 1000.0
    if dt_s > 0:
        tau = cfg.tau_for(state.mode)
        state.current_left = slew(state.current_left, tgt_l, dt_s, tau)
        state.current_right = slew(state.current_right, tgt_r, dt_s, tau)

    warn = not temperature_in_spec(sample.temp_c)
    if warn:
        log.warning("lens temperature %.1f C outside operating range", sample.temp_c)
    out_l, clamp_l = quantize_clamp(
        compensate_temperature(state.current_left, sample.temp_c, cfg), cfg)
    out_r, clamp_r = quantize_clamp(
        compensate_temperature(state.current_right, sample.temp_c, cfg), cfg)

    state.target_left, state.target_right = tgt_l, tgt_r
    state.last_stable_mm = stable
    state.last_t_ms = sample.t_ms
    state.last_temp_c = sample.temp_c
    state.region = region
    cmd = LensCommand(sample.t_ms, out_l, out_r, region, clamp_l or clamp_r, warn)
    state.last_command = cmd
    return cmd


def is_settled(state: ControllerState, cfg: ControllerConfig) -> bool:
    """True once the last emitted command equals the quantized target."""
    cmd = state.last_command
    if cmd is None:
        return False
    want_l, _ = quantize_clamp(compensate_temperature(state.target_left, state.last_temp_c, cfg), cfg)
    want_r, _ = quantize_clamp(compensate_temperature(state.target_right, state.last_temp_c, cfg), cfg)
    return cmd.power_left == want_l and cmd.power_right == want_r


class Controller:
    """Stateful convenience wrapper around :func:`step`."""

    def __init__(self, mode: AgeMode, wearer: WearerProfile, cfg: ControllerConfig | None = None):
        self.cfg = cfg or ControllerConfig()
        self.state = new_state(mode, wearer, self.cfg)

    def step(self, sample: SensorSample) -> LensCommand:
        return step(self.state, sample, self.cfg)

    @property
    def settled(self) -> bool:
        return is_settled(self.state, self.cfg)
