"""Image representation, colour conversions and file I/O.

Images are plain numpy arrays: RGB images are ``(height, width, 3)`` float64
arrays with channels in [0, 1], gray images are ``(height, width)`` float64
arrays in [0, 1]. Quantization only happens at the file boundary.
"""

import logging
from pathlib import Path
from typing import NamedTuple

import cv2
import numpy as np

logger = logging.getLogger(__name__)

# BT.601 luma weights (r, g, b)
GRAY_WEIGHTS = (0.299, 0.587, 0.114)

_DEPTH_MAX = {8: 255, 16: 65535}
_SUFFIXES = {".png", ".tif", ".tiff"}


class ImageError(ValueError):
    """Raised for unreadable, unsupported or malformed images."""


class PixelCoord(NamedTuple):
    x: int
    y: int


def as_rgb(img) -> np.ndarray:
    """Validate and return ``img`` as a float64 ``(H, W, 3)`` array."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ImageError(f"expected an (H, W, 3) RGB array, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ImageError("image has a zero dimension")
    if not np.all(np.isfinite(arr)):
        raise ImageError("image contains non-finite values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ImageError("channel values must lie in [0, 1]")
    return arr


def as_gray(img) -> np.ndarray:
    """Validate and return ``img`` as a float64 ``(H, W)`` array."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise ImageError(f"expected an (H, W) gray array, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ImageError("image has a zero dimension")
    if not np.all(np.isfinite(arr)):
        raise ImageError("image contains non-finite values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ImageError("gray values must lie in [0, 1]")
    return arr


def to_gray(img) -> np.ndarray:
    img = as_rgb(img)
    r, g, b = GRAY_WEIGHTS
    gray = r * img[..., 0] + g * img[..., 1] + b * img[..., 2]
    # weights sum to 1 only up to rounding
    return np.clip(gray, 0.0, 1.0)


def rgb_to_hsv_value(img) -> np.ndarray:
    """HSV value channel, i.e. the per-pixel channel maximum."""
    return as_rgb(img).max(axis=2)


def load_image(path, *, with_depth: bool = False):
    """Read an 8- or 16-bit PNG/TIFF as an RGB float image in [0, 1].

    Gray files are replicated to three channels and an alpha channel is
    dropped with a warning. With ``with_depth=True`` the source bit depth is
    returned as well, as ``(img, depth)``.
    """
    path = Path(path)
    if path.suffix.lower() not in _SUFFIXES:
        raise ImageError(f"{path}: unsupported file type {path.suffix!r}")
    if not path.is_file():
        raise ImageError(f"{path}: file not found")
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise ImageError(f"{path}: unreadable image")
    if raw.dtype == np.uint8:
        depth = 8
    elif raw.dtype == np.uint16:
        depth = 16
    else:
        raise ImageError(f"{path}: unsupported sample type {raw.dtype}")
    if raw.ndim == 3 and raw.shape[2] == 1:
        raw = raw[..., 0]
    if raw.ndim == 2:
        rgb = np.repeat(raw[..., None], 3, axis=2)
    elif raw.ndim == 3 and raw.shape[2] in (3, 4):
        if raw.shape[2] == 4:
            logger.warning("%s: alpha channel dropped", path)
        rgb = raw[..., 2::-1]  # BGR(A) -> RGB
    else:
        raise ImageError(f"{path}: unsupported channel layout {raw.shape}")
    if rgb.shape[0] == 0 or rgb.shape[1] == 0:
        raise ImageError(f"{path}: zero-dimension image")
    img = rgb.astype(np.float64) / _DEPTH_MAX[depth]
    if with_depth:
        return img, depth
    return img


def quantize(img, depth: int = 8) -> np.ndarray:
    """Round-half-up quantization of [0, 1] values to unsigned integers."""
    if depth not in _DEPTH_MAX:
        raise ImageError(f"unsupported bit depth {depth}; use 8 or 16")
    top = _DEPTH_MAX[depth]
    q = np.floor(np.clip(img, 0.0, 1.0) * top + 0.5)
    return q.astype(np.uint8 if depth == 8 else np.uint16)


def save_image(img, path, depth: int = 8) -> None:
    img = as_rgb(img)
    path = Path(path)
    if path.suffix.lower() not in _SUFFIXES:
        raise ImageError(f"{path}: unsupported file type {path.suffix!r}")
    data = np.ascontiguousarray(quantize(img, depth)[..., ::-1])
    try:
        ok = cv2.imwrite(str(path), data)
    except cv2.error as exc:
        raise OSError(f"{path}: cannot write image ({exc})") from exc
    if not ok:
        raise OSError(f"{path}: cannot write image")


def save_gray(img, path, depth: int = 8) -> None:
    """Write a gray image as a single-channel file."""
    img = as_gray(img)
    path = Path(path)
    if path.suffix.lower() not in _SUFFIXES:
        raise ImageError(f"{path}: unsupported file type {path.suffix!r}")
    try:
        ok = cv2.imwrite(str(path), quantize(img, depth))
    except cv2.error as exc:
        raise OSError(f"{path}: cannot write image ({exc})") from exc
    if not ok:
        raise OSError(f"{path}: cannot write image")
