"""Pixel-domain primitives: image container conventions, resampling, metrics.

Images are numpy float64 arrays of shape (H, W, 3) with values in [0, 1].
Networks consume the [-1, 1] model range via ``to_model_range``.
"""

from __future__ import annotations

import numpy as np
from PIL import Image as _PILImage
from scipy import ndimage

PSNR_CAP = 100.0

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03

# cubic convolution parameter; defines "bicubic" for the whole codebase
CUBIC_A = -0.5


class ImageError(ValueError):
    pass


def check_image(img: np.ndarray, name: str = "image") -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ImageError(f"{name} must have shape (H, W, 3), got {img.shape}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise ImageError(f"{name} must be at least 1x1, got {img.shape}")
    return img


def clamp01(img: np.ndarray) -> np.ndarray:
    return np.clip(img, 0.0, 1.0)


# ----------------------------------------------------------------------------
# PNG I/O (8-bit RGB; decode divides by 255, encode rounds half-away-from-zero)

def load_png(path) -> np.ndarray:
    with _PILImage.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float64)
    return arr / 255.0


def save_png(img: np.ndarray, path) -> None:
    img = check_image(img)
    scaled = clamp01(img) * 255.0
    # round half away from zero (values are non-negative here)
    quantized = np.floor(scaled + 0.5).astype(np.uint8)
    _PILImage.fromarray(quantized, mode="RGB").save(path)


# ----------------------------------------------------------------------------
# Metrics

def psnr(a: np.ndarray, b: np.ndarray, border_crop: int = 0) -> float:
    """Peak signal-to-noise ratio in dB, capped at PSNR_CAP for identical inputs."""
    a = check_image(a, "a")
    b = check_image(b, "b")
    if a.shape != b.shape:
        raise ImageError(f"shape mismatch: {a.shape} vs {b.shape}")
    if border_crop < 0:
        raise ImageError("border_crop must be non-negative")
    if border_crop > 0:
        if 2 * border_crop >= a.shape[0] or 2 * border_crop >= a.shape[1]:
            raise ImageError(
                f"border_crop={border_crop} leaves no pixels in {a.shape[:2]}"
            )
        a = a[border_crop:-border_crop, border_crop:-border_crop]
        b = b[border_crop:-border_crop, border_crop:-border_crop]
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * np.log10(1.0 / mse))


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    coords = np.arange(size, dtype=np.float64) - half
    g = np.exp(-(coords**2) / (2.0 * sigma**2))
    w = np.outer(g, g)
    return w / w.sum()


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean local SSIM over sliding 11x11 Gaussian windows, averaged over RGB."""
    a = check_image(a, "a")
    b = check_image(b, "b")
    if a.shape != b.shape:
        raise ImageError(f"shape mismatch: {a.shape} vs {b.shape}")
    h, w = a.shape[:2]
    if h < SSIM_WINDOW or w < SSIM_WINDOW:
        raise ImageError(f"image {a.shape[:2]} smaller than {SSIM_WINDOW}x{SSIM_WINDOW} window")
    win = _gaussian_window(SSIM_WINDOW, SSIM_SIGMA)
    c1 = SSIM_K1**2
    c2 = SSIM_K2**2
    half = SSIM_WINDOW // 2

    def _filt(x):
        out = ndimage.correlate(x, win, mode="constant")
        return out[half:-half, half:-half]

    vals = []
    for c in range(3):
        x = a[:, :, c]
        y = b[:, :, c]
        mu_x = _filt(x)
        mu_y = _filt(y)
        mu_xx = _filt(x * x)
        mu_yy = _filt(y * y)
        mu_xy = _filt(x * y)
        var_x = mu_xx - mu_x**2
        var_y = mu_yy - mu_y**2
        cov = mu_xy - mu_x * mu_y
        num = (2 * mu_x * mu_y + c1) * (2 * cov + c2)
        den = (mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2)
        vals.append(np.mean(num / den))
    return float(np.mean(vals))


# ----------------------------------------------------------------------------
# Bicubic resampling

def _cubic_kernel(t: np.ndarray) -> np.ndarray:
    a = CUBIC_A
    t = np.abs(t)
    out = np.zeros_like(t)
    m1 = t <= 1.0
    m2 = (t > 1.0) & (t < 2.0)
    out[m1] = (a + 2.0) * t[m1] ** 3 - (a + 3.0) * t[m1] ** 2 + 1.0
    out[m2] = a * t[m2] ** 3 - 5.0 * a * t[m2] ** 2 + 8.0 * a * t[m2] - 4.0 * a
    return out


def resize_matrix(n_in: int, n_out: int) -> np.ndarray:
    """Row-stochastic (n_out, n_in) resampling matrix for one axis.

    Center-aligned mapping with edge clamping; the kernel support is widened
    by the scale factor when downscaling (antialias prefilter).
    """
    scale = n_out / n_in
    support_scale = max(1.0, 1.0 / scale)
    mat = np.zeros((n_out, n_in), dtype=np.float64)
    radius = 2.0 * support_scale
    for i in range(n_out):
        center = (i + 0.5) / scale - 0.5
        lo = int(np.ceil(center - radius))
        hi = int(np.floor(center + radius))
        taps = np.arange(lo, hi + 1)
        weights = _cubic_kernel((taps - center) / support_scale)
        taps = np.clip(taps, 0, n_in - 1)
        s = weights.sum()
        if s == 0.0:
            raise ImageError("degenerate resampling window")
        weights = weights / s
        np.add.at(mat[i], taps, weights)
    return mat


def bicubic_resize(img: np.ndarray, scale: float) -> np.ndarray:
    """Separable bicubic resize (a = -0.5), antialiased on downscale.

    Output dims are round(input dims * scale); output is clamped to [0, 1].
    """
    img = check_image(img)
    if scale <= 0:
        raise ImageError(f"scale must be positive, got {scale}")
    h, w = img.shape[:2]
    h_out = int(round(h * scale))
    w_out = int(round(w * scale))
    if h_out < 1 or w_out < 1:
        raise ImageError(f"resize of {img.shape[:2]} by {scale} collapses to zero size")
    if h_out == h and w_out == w and scale == 1:
        return img.copy()
    mh = resize_matrix(h, h_out)
    mw = resize_matrix(w, w_out)
    out = np.einsum("ij,jkc->ikc", mh, img)
    out = np.einsum("kj,ijc->ikc", mw, out)
    return clamp01(out)


# ----------------------------------------------------------------------------
# Dihedral augmentation and cropping

def dihedral_transform(img: np.ndarray, k: int) -> np.ndarray:
    """Apply element k of the dihedral group: rot90 k%4 times, then hflip if k>=4."""
    img = check_image(img)
    if not 0 <= k <= 7:
        raise ImageError(f"dihedral index must be in [0, 7], got {k}")
    out = np.rot90(img, k % 4, axes=(0, 1))
    if k >= 4:
        out = out[:, ::-1, :]
    return np.ascontiguousarray(out)


def dihedral_inverse(k: int) -> int:
    if not 0 <= k <= 7:
        raise ImageError(f"dihedral index must be in [0, 7], got {k}")
    if k < 4:
        return (4 - k) % 4
    return k  # flip-composed elements are involutions


def crop_patch(img: np.ndarray, top: int, left: int, size: int) -> np.ndarray:
    img = check_image(img)
    h, w = img.shape[:2]
    if size < 1:
        raise ImageError(f"crop size must be positive, got {size}")
    if top < 0 or left < 0 or top + size > h or left + size > w:
        raise ImageError(
            f"crop (top={top}, left={left}, size={size}) out of bounds for {h}x{w}"
        )
    return img[top : top + size, left : left + size].copy()


# ----------------------------------------------------------------------------
# Model-range conversion

def to_model_range(img: np.ndarray) -> np.ndarray:
    return np.asarray(img, dtype=np.float64) * 2.0 - 1.0


def from_model_range(arr: np.ndarray) -> np.ndarray:
    return np.clip((np.asarray(arr, dtype=np.float64) + 1.0) / 2.0, 0.0, 1.0)
