"""Per-eye corrective offset search against a 1 m fixation target.

The wearer (or a virtual eye) answers "is the target clear?" for a given
lens power.  Through a lens the clear range is an interval: too much minus
exceeds the available accommodation, too much plus fogs the target.  The
search finds the most-plus lens that still reads clear (the relaxed-eye
edge) and subtracts the vergence of the target distance, which yields the
distance prescription.
"""

from __future__ import annotations

import enum
from typing import Callable

from presbysim.controller import ControllerConfig, quantize
from presbysim.errors import CalibrationError

TARGET_DISTANCE_M = 1.0

Probe = Callable[[float], bool]


class Eye(enum.Enum):
    LEFT = "left"
    RIGHT = "right"
    BOTH = "both"


def _find_clear(probe: Probe, lo: float, hi: float, coarse: float, fine: float) -> float | None:
    for step in (coarse, fine):
        k = 0
        while True:
            tried = False
            for p in ((0.0,) if k == 0 else (k * step, -k * step)):
                if lo <= p <= hi:
                    tried = True
                    if probe(p):
                        return p
            if not tried and k > 0:
                break
            k += 1
    return None


def calibrate(
    probe: Probe,
    cfg: ControllerConfig | None = None,
    target_distance_m: float = TARGET_DISTANCE_M,
    coarse_step: float = 0.5,
) -> float:
    """Return the corrective offset (D) for one eye, quantized to the lens step."""
    cfg = cfg or ControllerConfig()
    lo, hi = cfg.power_min, cfg.power_max
    clear = _find_clear(probe, lo, hi, coarse_step, cfg.quantum_d)
    if clear is None:
        raise CalibrationError("no lens power in range gives a clear target")

    if probe(hi):
        edge = hi
    else:
        a, b = clear, hi
        tol = cfg.quantum_d / 20
        while b - a > tol:
            mid = 0.5 * (a + b)
            if probe(mid):
                a = mid
            else:
                b = mid
        edge = a

    offset = quantize(edge - 1.0 / target_distance_m, cfg.quantum_d)
    if not (lo <= offset <= hi):
        raise CalibrationError(f"required offset {offset:+.1f} D is outside the lens range")
    return offset


def calibrate_eye(
    probe: Callable[[Eye, float], bool],
    eye: Eye,
    cfg: ControllerConfig | None = None,
) -> tuple[float, float] | float:
    """Calibrate one eye, or both through a single shared dial.

    ``Eye.BOTH`` drives both lenses together and requires both eyes to
    report clear; it returns the shared offset as a ``(left, right)`` pair.
    """
    if eye is Eye.BOTH:
        shared = calibrate(lambda p: probe(Eye.LEFT, p) and probe(Eye.RIGHT, p), cfg)
        return shared, shared
    return calibrate(lambda p: probe(eye, p), cfg)


def calibrate_pair(
    probe: Callable[[Eye, float], bool],
    individual: bool,
    cfg: ControllerConfig | None = None,
) -> tuple[float, float]:
    """Offsets for both eyes; ``individual`` is for wearers with anisometropia."""
    if not individual:
        return calibrate_eye(probe, Eye.BOTH, cfg)
    return calibrate_eye(probe, Eye.LEFT, cfg), calibrate_eye(probe, Eye.RIGHT, cfg)
