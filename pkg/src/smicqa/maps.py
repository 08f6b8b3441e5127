"""Local distortion maps for PSNR, SSIM and an LPIPS-style feature distance."""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage

from .exceptions import PreconditionError, StageTooSmallError

# ITU-R BT.601 luma weights
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])

SSIM_SIGMA = 1.5
SSIM_WIN = 11
SSIM_K1 = 0.01
SSIM_K2 = 0.03

DEFAULT_PATCH = 7
LPIPS_EPS = 1e-10


@dataclass(frozen=True)
class DistortionMap:
    """A spatial grid of local differences.

    ``kind`` is ``"psnr"`` (squared error, >= 0), ``"ssim"`` (similarity in
    [-1, 1]) or ``"deep"`` (squared feature distance, >= 0).
    """

    values: np.ndarray
    kind: str
    stage: Optional[int] = None

    @property
    def shape(self):
        return self.values.shape

    def mean(self):
        return float(np.mean(self.values))


def as_image(image):
    """Validate an image array and return it as float64 ``(H, W, C)``."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3 or arr.shape[2] not in (1, 3):
        raise PreconditionError(f"image must be HxW, HxWx1 or HxWx3; got shape {arr.shape}")
    if not np.all(np.isfinite(arr)) or arr.min(initial=0.0) < 0.0 or arr.max(initial=0.0) > 1.0:
        raise PreconditionError("image values must lie in [0, 1]")
    return arr


def _check_pair(ref, dist):
    ref, dist = as_image(ref), as_image(dist)
    if ref.shape != dist.shape:
        raise PreconditionError(f"image shapes differ: {ref.shape} vs {dist.shape}")
    return ref, dist


def luminance(image):
    image = as_image(image)
    if image.shape[2] == 1:
        return image[:, :, 0]
    return image @ LUMA_WEIGHTS


def psnr_error_map(ref, dist):
    """Per-pixel squared error averaged over channels; its mean is the MSE."""
    ref, dist = _check_pair(ref, dist)
    return DistortionMap(np.mean((ref - dist) ** 2, axis=2), "psnr")


def ssim_local_map(ref, dist):
    """SSIM index map on luminance with an 11x11 Gaussian window (sigma 1.5).

    Only positions where the window fits inside the image are kept, so the
    map is ``(H - 10) x (W - 10)`` and its mean is the usual scalar SSIM.
    """
    ref, dist = _check_pair(ref, dist)
    if min(ref.shape[:2]) < SSIM_WIN:
        raise PreconditionError(
            f"image too small for SSIM: {ref.shape[:2]}, need at least {SSIM_WIN} per side"
        )
    x, y = luminance(ref), luminance(dist)
    c1, c2 = SSIM_K1 ** 2, SSIM_K2 ** 2

    def blur(a):
        return ndimage.gaussian_filter(a, sigma=SSIM_SIGMA, truncate=3.5, mode="reflect")

    mx, my = blur(x), blur(y)
    vx = blur(x * x) - mx * mx
    vy = blur(y * y) - my * my
    cxy = blur(x * y) - mx * my
    s = ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx ** 2 + my ** 2 + c1) * (vx + vy + c2))
    pad = (SSIM_WIN - 1) // 2
    return DistortionMap(s[pad:-pad, pad:-pad], "ssim")


def patch_grid_shape(dims, patch, stride, stage=None):
    h, w = int(dims[0]), int(dims[1])
    if patch < 1 or stride < 1:
        raise PreconditionError("patch and stride must be positive")
    if h < patch or w < patch:
        raise StageTooSmallError(stage, (h, w), patch)
    return (h - patch) // stride + 1, (w - patch) // stride + 1


def extract_patch_grid(features, patch=DEFAULT_PATCH, stride=DEFAULT_PATCH, stage=None):
    """Top-left corners of all complete tiles, row-major.

    Partial tiles at the bottom/right borders are dropped. Accepts an array
    (first two axes spatial) or a ``(H, W)`` tuple.
    """
    dims = features if isinstance(features, tuple) else np.shape(features)[:2]
    gh, gw = patch_grid_shape(dims, patch, stride, stage)
    return [(r * stride, c * stride) for r in range(gh) for c in range(gw)]


def unit_normalize(features, eps=LPIPS_EPS):
    """Scale each spatial site's channel vector to unit L2 norm."""
    norm = np.sqrt(np.sum(features ** 2, axis=-1, keepdims=True))
    return features / (norm + eps)


def tile_sums(site_values, patch, stride):
    """Sum a 2-D per-site map over each tile of the patch grid."""
    windows = sliding_window_view(site_values, (patch, patch))[::stride, ::stride]
    return windows.sum(axis=(2, 3))


def deep_distortion_map(ref_features, dist_features, stage=None, patch=DEFAULT_PATCH,
                        stride=DEFAULT_PATCH, normalize=True):
    """Per-tile squared feature distance divided by the tile area.

    With ``normalize`` each site's channel vector is unit-normalized first,
    as in LPIPS; channel weights are all one.
    """
    ref = np.asarray(ref_features, dtype=np.float64)
    dist = np.asarray(dist_features, dtype=np.float64)
    if ref.shape != dist.shape or ref.ndim != 3:
        raise PreconditionError(
            f"feature shapes must match and be HxWxC: {ref.shape} vs {dist.shape}"
        )
    patch_grid_shape(ref.shape, patch, stride, stage)
    if normalize:
        ref, dist = unit_normalize(ref), unit_normalize(dist)
    site = np.sum((ref - dist) ** 2, axis=-1)
    return DistortionMap(tile_sums(site, patch, stride) / (patch * patch), "deep", stage)
