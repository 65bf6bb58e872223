"""Synthetic-population push-up study.

Each simulated participant gets an age, an accommodation amplitude and a
refractive error, is calibrated with the virtual-eye probe, and then runs
the push-up test in baseline and every simulated mode.  Wearer ``i`` draws
from its own child of the root :class:`numpy.random.SeedSequence`, so the
outcome does not depend on how wearers are scheduled across workers.
"""

from __future__ import annotations

import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from presbysim import optics
from presbysim.calibration import calibrate_pair
from presbysim.controller import ControllerConfig
from presbysim.device import EyeModel, PushUpConfig, TofModel, clarity_probe, run_push_up
from presbysim.errors import InvalidArgument
from presbysim.optics import AgeMode, WearerProfile

ALL_MODES = (AgeMode.BASELINE, *optics.SIMULATED_MODES)

# Published median near points (mm) from a 19-participant push-up test.
REFERENCE_MEDIANS_MM = {
    AgeMode.BASELINE: 132.0,
    AgeMode.FORTIES: 233.0,
    AgeMode.FIFTIES: 378.0,
    AgeMode.SIXTIES: 782.0,
}
REFERENCE_TOLERANCE = 0.12

AGE_CLIP = (18.0, 35.0)


@dataclass
class StudyConfig:
    n: int = 19
    age_mean: float = 27.8
    age_sd: float = 4.1
    seed: int = 2025
    jitter_sd: float = 0.5
    myope_fraction: float = 0.5
    aniso_fraction: float = 0.15
    workers: int = 1

    def __post_init__(self):
        if not (isinstance(self.n, int) and self.n >= 1):
            raise InvalidArgument(f"n must be an integer >= 1, got {self.n!r}")
        if self.age_sd < 0 or self.jitter_sd < 0:
            raise InvalidArgument("standard deviations must be non-negative")
        if not (0 <= self.myope_fraction <= 1 and 0 <= self.aniso_fraction <= 1):
            raise InvalidArgument("fractions must lie in [0, 1]")
        if self.workers < 1:
            raise InvalidArgument("workers must be >= 1")


@dataclass
class Participant:
    index: int
    age: float
    aoa: float
    refraction: tuple[float, float]
    offsets: tuple[float, float] = (0.0, 0.0)
    near_points: dict[AgeMode, float | None] = field(default_factory=dict)


@dataclass
class StudyResult:
    participants: list[Participant]
    medians: dict[AgeMode, float | None]

    def relative_errors(self) -> dict[AgeMode, float | None]:
        out = {}
        for mode, ref in REFERENCE_MEDIANS_MM.items():
            m = self.medians.get(mode)
            out[mode] = None if m is None else (m - ref) / ref
        return out

    def passes(self, tolerance: float = REFERENCE_TOLERANCE) -> dict[AgeMode, bool]:
        return {m: e is not None and abs(e) <= tolerance
                for m, e in self.relative_errors().items()}


def _rx(value: float) -> float:
    # prescriptions come in quarter-diopter steps
    return round(value * 4) / 4 + 0.0


def sample_participant(index: int, seed_seq: np.random.SeedSequence, cfg: StudyConfig,
                       model: optics.AccommodationModel = optics.DEFAULT_MODEL) -> Participant:
    rng = np.random.default_rng(seed_seq)
    z_age, z_aoa = rng.standard_normal(2)
    u_myope, u_aniso = rng.random(2)
    rx_mag, aniso = rng.uniform(0.5, 6.0), rng.uniform(-1.5, 1.5)

    age = float(np.clip(cfg.age_mean + cfg.age_sd * z_age, *AGE_CLIP))
    # the amplitude curve starts at 20; younger wearers get its first value
    aoa = optics.duane_amplitude(min(max(age, model.min_age), model.max_age), model)
    aoa = max(0.5, aoa + cfg.jitter_sd * z_aoa)
    left = -_rx(rx_mag) if u_myope < cfg.myope_fraction else 0.0
    right = _rx(left + aniso) if u_aniso < cfg.aniso_fraction else left
    return Participant(index, age, aoa, (left, right))


def measure_participant(p: Participant, pushup: PushUpConfig, ccfg: ControllerConfig,
                        tof: TofModel | None = None) -> Participant:
    eyes = (EyeModel(p.refraction[0], p.aoa, ccfg.dof_d), EyeModel(p.refraction[1], p.aoa, ccfg.dof_d))
    individual = p.refraction[0] != p.refraction[1]
    p.offsets = calibrate_pair(clarity_probe(eyes), individual, ccfg)
    wearer = WearerProfile(p.age, p.offsets[0], p.offsets[1], aoa=p.aoa)
    for mode in ALL_MODES:
        if tof is not None:
            tof.reset()
        p.near_points[mode] = run_push_up(eyes, wearer, mode, pushup, ccfg, tof)
    return p


def study_medians(participants: list[Participant]) -> dict[AgeMode, float | None]:
    out = {}
    for mode in ALL_MODES:
        values = [p.near_points[mode] for p in participants if p.near_points.get(mode) is not None]
        out[mode] = statistics.median(values) if values else None
    return out


def _measure_job(args):
    return measure_participant(*args)


def run_study(
    cfg: StudyConfig | None = None,
    pushup: PushUpConfig | None = None,
    controller_cfg: ControllerConfig | None = None,
    tof: TofModel | None = None,
) -> StudyResult:
    cfg = cfg or StudyConfig()
    pushup = pushup or PushUpConfig()
    ccfg = controller_cfg or ControllerConfig()
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.n)
    participants = [sample_participant(i, s, cfg) for i, s in enumerate(children)]
    jobs = [(p, pushup, ccfg, tof) for p in participants]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            participants = list(pool.map(_measure_job, jobs))
    else:
        participants = [_measure_job(j) for j in jobs]
    return StudyResult(participants, study_medians(participants))
