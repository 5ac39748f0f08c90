"""Synthetic degradation pipeline: blur -> sub-pixel shift -> downsample -> noise.

Stands in for the unknown real-world operator so that verification code can
reconstruct ground-truth pairings while training remains strictly unpaired.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import imaging

MANIFEST_VERSION = 1
MANIFEST_NAME = "degradation_manifest.json"


class DegradationError(ValueError):
    pass


@dataclass(frozen=True)
class DegradationConfig:
    blur_sigma_range: tuple[float, float] = (1.0, 3.0)
    shift_range: tuple[float, float] = (-2.0, 2.0)
    noise_sigma: float = 0.02
    scale: int = 4
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.blur_sigma_range
        if not (0 <= lo <= hi):
            raise DegradationError(f"bad blur_sigma_range {self.blur_sigma_range}")
        lo, hi = self.shift_range
        if lo > hi:
            raise DegradationError(f"bad shift_range {self.shift_range}")
        if self.noise_sigma < 0:
            raise DegradationError("noise_sigma must be >= 0")
        if self.scale < 1:
            raise DegradationError("scale must be >= 1")


@dataclass(frozen=True)
class BlurKernel:
    size: int
    weights: np.ndarray

    def __post_init__(self):
        if self.weights.shape != (self.size, self.size):
            raise DegradationError("kernel weights shape mismatch")
        if np.any(self.weights < 0):
            raise DegradationError("kernel weights must be non-negative")
        if abs(float(self.weights.sum()) - 1.0) > 1e-10:
            raise DegradationError("kernel weights must sum to 1")


def make_blur_kernel(sigma_x: float, sigma_y: float, angle: float, size: int) -> BlurKernel:
    """Anisotropic Gaussian on the integer grid, rotated by `angle`, unit sum."""
    if size < 3 or size % 2 == 0:
        raise DegradationError(f"kernel size must be odd and >= 3, got {size}")
    if sigma_x < 0 or sigma_y < 0:
        raise DegradationError("sigmas must be >= 0")
    half = size // 2
    if sigma_x == 0 and sigma_y == 0:
        w = np.zeros((size, size), dtype=np.float64)
        w[half, half] = 1.0
        return BlurKernel(size=size, weights=w)
    sx = max(sigma_x, 1e-8)
    sy = max(sigma_y, 1e-8)
    ys, xs = np.mgrid[-half : half + 1, -half : half + 1].astype(np.float64)
    # rotate coordinates into the kernel's principal axes
    c, s = np.cos(angle), np.sin(angle)
    u = c * xs + s * ys
    v = -s * xs + c * ys
    w = np.exp(-0.5 * ((u / sx) ** 2 + (v / sy) ** 2))
    total = w.sum()
    if total == 0:
        w = np.zeros((size, size), dtype=np.float64)
        w[half, half] = 1.0
    else:
        w = w / total
    return BlurKernel(size=size, weights=w)


@dataclass(frozen=True)
class DrawnParams:
    """Per-image degradation parameters drawn from the config's ranges."""
    sigma_x: float
    sigma_y: float
    angle: float
    shift_y: float
    shift_x: float
    noise_seed: int


def draw_params(cfg: DegradationConfig, image_key: int) -> DrawnParams:
    ss = np.random.SeedSequence([cfg.seed & 0xFFFFFFFFFFFFFFFF, int(image_key)])
    rng = np.random.default_rng(ss)
    lo, hi = cfg.blur_sigma_range
    sigma_x = float(rng.uniform(lo, hi))
    sigma_y = float(rng.uniform(lo, hi))
    angle = float(rng.uniform(0.0, np.pi))
    slo, shi = cfg.shift_range
    shift_y = float(rng.uniform(slo, shi))
    shift_x = float(rng.uniform(slo, shi))
    noise_seed = int(rng.integers(0, 2**63 - 1))
    return DrawnParams(sigma_x, sigma_y, angle, shift_y, shift_x, noise_seed)


def _kernel_size_for(sigma: float) -> int:
    size = int(2 * np.ceil(3.0 * max(sigma, 0.5)) + 1)
    return max(size, 3)


def _subpixel_shift(img: np.ndarray, shift_y: float, shift_x: float) -> np.ndarray:
    """Translate by a fractional offset with separable cubic taps, reflect border."""
    if shift_y == 0.0 and shift_x == 0.0:
        return img
    out = img
    for axis, shift in ((0, shift_y), (1, shift_x)):
        if shift == 0.0:
            continue
        base = int(np.floor(shift))
        frac = shift - base
        taps = np.arange(-1, 3)  # cubic support around the source sample
        weights = imaging._cubic_kernel(taps - frac)
        weights = weights / weights.sum()
        n = out.shape[axis]
        idx = np.arange(n)
        acc = np.zeros_like(out)
        for t, wt in zip(taps, weights):
            src = idx - base - t
            # reflect (mirror without edge repeat degenerates for tiny n; use symmetric)
            src = np.abs(src)
            src = np.where(src >= n, 2 * (n - 1) - src, src)
            src = np.clip(src, 0, n - 1)
            acc += wt * np.take(out, src, axis=axis)
        out = acc
    return out


def degrade_image(z: np.ndarray, cfg: DegradationConfig, image_key: int) -> np.ndarray:
    lr, _ = degrade_image_with_params(z, cfg, image_key)
    return lr


def degrade_image_with_params(
    z: np.ndarray, cfg: DegradationConfig, image_key: int
) -> tuple[np.ndarray, DrawnParams]:
    z = imaging.check_image(z, "z")
    h, w = z.shape[:2]
    if h % cfg.scale != 0 or w % cfg.scale != 0:
        raise DegradationError(
            f"image dims {h}x{w} not divisible by scale {cfg.scale}"
        )
    params = draw_params(cfg, image_key)
    kernel = make_blur_kernel(
        params.sigma_x,
        params.sigma_y,
        params.angle,
        _kernel_size_for(max(params.sigma_x, params.sigma_y)),
    )
    if params.sigma_x == 0 and params.sigma_y == 0:
        blurred = z
    else:
        blurred = np.stack(
            [ndimage.convolve(z[:, :, c], kernel.weights, mode="reflect") for c in range(3)],
            axis=2,
        )
    shifted = _subpixel_shift(blurred, params.shift_y, params.shift_x)
    if cfg.scale > 1:
        lr = imaging.bicubic_resize(shifted, 1.0 / cfg.scale)
    else:
        lr = shifted
    if cfg.noise_sigma > 0:
        noise_rng = np.random.default_rng(params.noise_seed)
        lr = lr + noise_rng.normal(0.0, cfg.noise_sigma, size=lr.shape)
    return imaging.clamp01(lr), params


def degrade_corpus(hr_dir, cfg: DegradationConfig, out_dir) -> dict:
    """Degrade every PNG in hr_dir into out_dir; returns the written manifest.

    The manifest records per-image drawn parameters for verification only;
    training code must not read the pairing fields.
    """
    hr_dir = Path(hr_dir)
    out_dir = Path(out_dir)
    if not hr_dir.is_dir():
        raise DegradationError(f"unreadable input directory: {hr_dir}")
    out_dir.mkdir(parents=True, exist_ok=True)
    records = []
    for i, path in enumerate(sorted(hr_dir.glob("*.png"))):
        hr = imaging.load_png(path)
        lr, params = degrade_image_with_params(hr, cfg, image_key=i)
        out_path = out_dir / path.name
        imaging.save_png(lr, out_path)
        rec = {"filename": path.name, "image_key": i}
        rec.update(asdict(params))
        records.append(rec)
    manifest = {
        "version": MANIFEST_VERSION,
        "config": {
            "blur_sigma_range": list(cfg.blur_sigma_range),
            "shift_range": list(cfg.shift_range),
            "noise_sigma": cfg.noise_sigma,
            "scale": cfg.scale,
            "seed": cfg.seed,
        },
        "images": records,
    }
    manifest_path = out_dir / MANIFEST_NAME
    with open(manifest_path, "w") as f:
        json.dump(manifest, f, indent=1, sort_keys=True)
        f.write("\n")
    return manifest


def load_manifest(out_dir) -> dict:
    with open(Path(out_dir) / MANIFEST_NAME) as f:
        manifest = json.load(f)
    if manifest.get("version") != MANIFEST_VERSION:
        raise DegradationError(f"unsupported manifest version {manifest.get('version')}")
    return manifest
