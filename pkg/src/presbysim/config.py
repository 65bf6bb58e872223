"""Run configuration loaded from a YAML file.

Every section is optional; omitted keys take the library defaults.  See
``configs/example.yaml`` for an annotated file covering every key.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from presbysim.controller import ControllerConfig
from presbysim.device import EyeModel, PushUpConfig, TofModel
from presbysim.errors import InvalidArgument
from presbysim.optics import AgeMode, WearerProfile
from presbysim.render import Kernel, RenderParams
from presbysim.study import StudyConfig

SECTIONS = {"seed", "mode", "wearer", "eye", "controller", "tof", "pushup", "study", "render"}


@dataclass
class EyeSection:
    refraction_left: float = 0.0
    refraction_right: float = 0.0
    aoa: float | None = None
    dof: float | None = None
    pupil_mm: float = 4.0


@dataclass
class RunConfig:
    seed: int = 2025
    mode: AgeMode = AgeMode.FORTIES
    wearer: WearerProfile = field(default_factory=lambda: WearerProfile(20.0))
    eye: EyeSection = field(default_factory=EyeSection)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    tof: TofModel | None = None
    pushup: PushUpConfig = field(default_factory=PushUpConfig)
    calibrate_first: bool = True
    study: StudyConfig = field(default_factory=StudyConfig)
    render: RenderParams = field(default_factory=RenderParams)

    def eyes(self) -> tuple[EyeModel, EyeModel]:
        aoa = self.eye.aoa if self.eye.aoa is not None else self.wearer.aoa
        dof = self.eye.dof if self.eye.dof is not None else self.controller.dof_d
        return (EyeModel(self.eye.refraction_left, aoa, dof, self.eye.pupil_mm),
                EyeModel(self.eye.refraction_right, aoa, dof, self.eye.pupil_mm))


def _build(cls, data: Any, section: str, **extra):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise InvalidArgument(f"[{section}] must be a mapping")
    names = {f.name for f in dataclasses.fields(cls) if f.init}
    unknown = set(data) - names
    if unknown:
        raise InvalidArgument(f"[{section}] unknown keys: {', '.join(sorted(unknown))}")
    try:
        return cls(**{**data, **extra})
    except TypeError as exc:
        raise InvalidArgument(f"[{section}] {exc}") from None


def _int(value: Any, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise InvalidArgument(f"{name} must be an integer, got {value!r}")
    return value


def from_dict(raw: dict | None) -> RunConfig:
    raw = dict(raw or {})
    unknown = set(raw) - SECTIONS
    if unknown:
        raise InvalidArgument(f"unknown config sections: {', '.join(sorted(unknown))}")
    seed = _int(raw.get("seed", 2025), "seed")
    mode = AgeMode.parse(raw.get("mode", "40s"))

    ctrl = dict(raw.get("controller") or {})
    if "tau_by_mode" in ctrl:
        ctrl["tau_by_mode"] = {AgeMode.parse(k): float(v) for k, v in ctrl["tau_by_mode"].items()}
    controller = _build(ControllerConfig, ctrl, "controller")

    wearer_raw = dict(raw.get("wearer") or {"age_years": 20.0})
    if "age_years" not in wearer_raw:
        raise InvalidArgument("[wearer] age_years is required")
    wearer = _build(WearerProfile, wearer_raw, "wearer")

    tof_raw = dict(raw.get("tof") or {})
    tof = None
    if tof_raw.pop("enabled", False):
        if "outlier_range_mm" in tof_raw:
            tof_raw["outlier_range_mm"] = tuple(tof_raw["outlier_range_mm"])
        tof = _build(TofModel, tof_raw, "tof", seed=tof_raw.get("seed", seed))

    pushup_raw = dict(raw.get("pushup") or {})
    calibrate_first = bool(pushup_raw.pop("calibrate", True))

    study_raw = dict(raw.get("study") or {})
    study_raw.setdefault("seed", seed)
    study = _build(StudyConfig, study_raw, "study")

    render_raw = dict(raw.get("render") or {})
    if "kernel" in render_raw:
        try:
            render_raw["kernel"] = Kernel(str(render_raw["kernel"]).lower())
        except ValueError:
            raise InvalidArgument(f"[render] unknown kernel {render_raw['kernel']!r}") from None

    cfg = RunConfig(
        seed=seed,
        mode=mode,
        wearer=wearer,
        eye=_build(EyeSection, raw.get("eye"), "eye"),
        controller=controller,
        tof=tof,
        pushup=_build(PushUpConfig, pushup_raw, "pushup"),
        calibrate_first=calibrate_first,
        study=study,
        render=_build(RenderParams, render_raw, "render"),
    )
    cfg.eyes()  # validates the virtual eye section
    return cfg


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return from_dict({})
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise InvalidArgument(f"{path}: {exc}") from None
    if raw is not None and not isinstance(raw, dict):
        raise InvalidArgument(f"{path}: top level must be a mapping")
    return from_dict(raw)
