"""Offline presbyopic blur rendering from an image and a depth map.

For every pixel the renderer asks the controller what lens power it would
settle on at that depth, works out the eye's residual defocus through that
lens, and blurs with a kernel whose radius is proportional to defocus and
pupil size.  Edges are clamped.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from presbysim.calibration import Eye
from presbysim.controller import (
    ControllerConfig,
    compensate_temperature,
    quantize_clamp,
    region_of,
    target_power,
)
from presbysim.device import EyeModel, lens_optical_power
from presbysim.errors import InvalidArgument
from presbysim.optics import AgeMode, WearerProfile


class Kernel(enum.Enum):
    GAUSSIAN = "gaussian"
    DISC = "disc"


@dataclass(frozen=True)
class RenderParams:
    pupil_mm: float = 4.0
    px_per_d_mm: float = 2.0
    kernel: Kernel = Kernel.GAUSSIAN
    # bin radii to this step to bound the number of distinct kernels (None = exact)
    radius_step_px: float | None = None

    def __post_init__(self):
        if not (self.pupil_mm > 0 and self.px_per_d_mm > 0):
            raise InvalidArgument("pupil_mm and px_per_d_mm must be positive")
        if self.radius_step_px is not None and not self.radius_step_px > 0:
            raise InvalidArgument("radius_step_px must be positive")


@dataclass(frozen=True)
class ControllerSnapshot:
    """Steady-state view of a controller: what it commands at a given depth."""

    mode: AgeMode
    wearer: WearerProfile
    cfg: ControllerConfig = field(default_factory=ControllerConfig)
    side: Eye = Eye.LEFT
    temp_c: float = 25.0

    def lens_power(self, depth_mm: float) -> float:
        region = region_of(depth_mm, self.mode)
        left, right = target_power(depth_mm, self.mode, self.wearer, region)
        power = right if self.side is Eye.RIGHT else left
        command, _ = quantize_clamp(compensate_temperature(power, self.temp_c, self.cfg), self.cfg)
        return lens_optical_power(command, self.temp_c, self.cfg)


def coc_radius(defocus_d: float, params: RenderParams) -> float:
    if defocus_d < 0:
        raise InvalidArgument("defocus must be non-negative")
    return defocus_d * params.pupil_mm * params.px_per_d_mm


def gaussian_profile(radius_px: float) -> np.ndarray:
    """Normalized 1-D Gaussian with sigma = radius / 2, truncated at 3 sigma."""
    if radius_px <= 0:
        return np.ones(1)
    sigma = radius_px / 2.0
    half = max(1, math.ceil(3.0 * sigma))
    x = np.arange(-half, half + 1, dtype=float)
    g = np.exp(-0.5 * (x / sigma) ** 2)
    return g / g.sum()


def gaussian_kernel(radius_px: float) -> np.ndarray:
    g = gaussian_profile(radius_px)
    return np.outer(g, g)


def disc_kernel(radius_px: float) -> np.ndarray:
    if radius_px <= 0:
        return np.ones((1, 1))
    half = math.ceil(radius_px)
    y, x = np.mgrid[-half:half + 1, -half:half + 1]
    k = (x * x + y * y <= radius_px * radius_px).astype(float)
    return k / k.sum()


def make_kernel(radius_px: float, kind: Kernel) -> np.ndarray:
    return gaussian_kernel(radius_px) if kind is Kernel.GAUSSIAN else disc_kernel(radius_px)


def convolve_clamped(channel: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Correlate a 2-D array with ``kernel`` using clamp-to-edge padding."""
    kh, kw = kernel.shape
    ph, pw = kh // 2, kw // 2
    padded = np.pad(channel, ((ph, ph), (pw, pw)), mode="edge")
    h, w = channel.shape
    out = np.zeros((h, w))
    for dy in range(kh):
        for dx in range(kw):
            wgt = kernel[dy, dx]
            if wgt:
                out += wgt * padded[dy:dy + h, dx:dx + w]
    return out


def _gaussian_clamped(channel: np.ndarray, g: np.ndarray) -> np.ndarray:
    # separable form of convolve_clamped(channel, outer(g, g))
    p = len(g) // 2
    padded = np.pad(channel, p, mode="edge")
    h, w = channel.shape
    rows = np.zeros((h + 2 * p, w))
    for dx, wgt in enumerate(g):
        rows += wgt * padded[:, dx:dx + w]
    out = np.zeros((h, w))
    for dy, wgt in enumerate(g):
        out += wgt * rows[dy:dy + h]
    return out


def blur_channel(channel: np.ndarray, radius_px: float, kind: Kernel = Kernel.GAUSSIAN) -> np.ndarray:
    if kind is Kernel.GAUSSIAN:
        return _gaussian_clamped(channel, gaussian_profile(radius_px))
    return convolve_clamped(channel, disc_kernel(radius_px))


def _blur_image(img: np.ndarray, radius_px: float, kind: Kernel) -> np.ndarray:
    if img.ndim == 2:
        return blur_channel(img, radius_px, kind)
    return np.stack([blur_channel(img[..., c], radius_px, kind) for c in range(img.shape[2])],
                    axis=-1)


def radius_map(depth_mm: np.ndarray, eye: EyeModel, snapshot: ControllerSnapshot,
               params: RenderParams) -> np.ndarray:
    depths, inverse = np.unique(np.asarray(depth_mm, dtype=float), return_inverse=True)
    radii = np.empty(len(depths))
    for i, d in enumerate(depths):
        radii[i] = coc_radius(eye.blur(snapshot.lens_power(d), d / 1000.0), params)
    if params.radius_step_px is not None:
        radii = np.round(radii / params.radius_step_px) * params.radius_step_px
    return radii[inverse].reshape(np.shape(depth_mm))


def render(image: np.ndarray, depth_mm: np.ndarray, eye: EyeModel,
           snapshot: ControllerSnapshot, params: RenderParams | None = None) -> np.ndarray:
    """Blurred float64 copy of ``image`` (H x W or H x W x C)."""
    params = params or RenderParams()
    img = np.asarray(image, dtype=float)
    depth = np.asarray(depth_mm, dtype=float)
    if img.shape[:2] != depth.shape or img.ndim not in (2, 3):
        raise InvalidArgument(
            f"image shape {img.shape} does not match depth map shape {depth.shape}")
    if not np.all(depth > 0):
        raise InvalidArgument("depth values must be positive")

    radii = radius_map(depth, eye, snapshot, params)
    out = img.copy()
    for r in np.unique(radii):
        if r <= 0:
            continue
        mask = radii == r
        blurred = _blur_image(img, float(r), params.kernel)
        out[mask] = blurred[mask]
    return out


def to_uint8(image: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(image), 0, 255).astype(np.uint8)
