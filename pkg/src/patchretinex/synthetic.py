"""Seeded synthetic transmitted-light slides with known illuminant casts.

Tissue is rendered with Beer-Lambert absorption of two stains over a bright
glass background, then a diagonal colour cast and sensor noise are applied.
Used by the acceptance suite and the kernel benchmark.
"""

from dataclasses import dataclass

import cv2
import numpy as np

# stain optical-density directions (r, g, b)
STAINS = {
    "hematoxylin": (0.65, 0.70, 0.29),
    "eosin": (0.07, 0.99, 0.11),
    "saffron": (0.10, 0.35, 0.93),
    "dab": (0.27, 0.57, 0.78),
}
SERIES_STAINS = {
    "HPS": ("hematoxylin", "eosin", "saffron"),
    "CK34": ("hematoxylin", "dab"),
    "KI67": ("hematoxylin", "dab"),
}
NEUTRAL = np.ones(3) / np.sqrt(3.0)


@dataclass
class SyntheticSlide:
    image: np.ndarray
    background: np.ndarray  # boolean mask of clear-glass pixels
    cast: np.ndarray  # diagonal gains applied to the scene, max channel = 1
    cast_angle: float  # degrees from neutral
    series: str


def cast_gains(angle_deg: float, rng: np.random.Generator) -> np.ndarray:
    """Diagonal gains whose direction lies ``angle_deg`` from neutral."""
    v = rng.normal(size=3)
    v -= v.dot(NEUTRAL) * NEUTRAL
    v /= np.linalg.norm(v)
    theta = np.deg2rad(angle_deg)
    d = np.cos(theta) * NEUTRAL + np.sin(theta) * v
    if np.any(d <= 0):
        raise ValueError(f"cast angle {angle_deg} leaves the positive octant")
    return d / d.max()


def _soften(mask, blur):
    return cv2.GaussianBlur(mask.astype(np.float64), (0, 0), blur)


def _tissue_mask(shape, rng, coverage_max, blur):
    # coverage is checked on the blurred footprint so the halo never eats
    # into the guaranteed clear background
    h, w = shape
    yy, xx = np.mgrid[0:h, 0:w]
    mask = np.zeros(shape, dtype=bool)
    for _ in range(rng.integers(4, 12)):
        cy, cx = rng.uniform(0, h), rng.uniform(0, w)
        ry, rx = rng.uniform(0.05, 0.22) * h, rng.uniform(0.05, 0.22) * w
        ang = rng.uniform(0, np.pi)
        dy, dx = yy - cy, xx - cx
        u = (dx * np.cos(ang) + dy * np.sin(ang)) / rx
        v = (-dx * np.sin(ang) + dy * np.cos(ang)) / ry
        blob = u * u + v * v <= 1.0
        if (_soften(mask | blob, blur) > 0).mean() > coverage_max:
            continue
        mask |= blob
    return mask


def make_slide(size=256, *, rng=None, series="HPS", cast_angle=None,
               noise=0.01, background_level=None, coverage_max=0.6):
    """Render one synthetic slide.

    ``cast_angle`` (degrees) defaults to a uniform draw in [2, 10]. The clear
    background covers at least ``1 - coverage_max`` of the pixels.
    """
    if rng is None:
        rng = np.random.default_rng()
    if series not in SERIES_STAINS:
        raise ValueError(f"unknown series {series!r}")
    h = w = int(size)
    blur = max(1.0, size / 200)
    mask = _tissue_mask((h, w), rng, coverage_max, blur)
    soft = _soften(mask, blur)

    od = np.zeros((h, w, 3))
    for name in SERIES_STAINS[series]:
        field = cv2.GaussianBlur(rng.random((h, w)), (0, 0), max(1.0, size / 64))
        field = (field - field.min()) / (np.ptp(field) + 1e-12)
        density = soft * rng.uniform(0.2, 0.9) * (0.3 + field)
        od += density[..., None] * np.asarray(STAINS[name])

    level = rng.uniform(0.88, 0.95) if background_level is None else background_level
    scene = level * np.exp(-od)
    if cast_angle is None:
        cast_angle = rng.uniform(2.0, 10.0)
    cast = cast_gains(cast_angle, rng)
    img = scene * cast + rng.normal(scale=noise, size=scene.shape)
    return SyntheticSlide(
        image=np.clip(img, 0.0, 1.0),
        background=soft == 0,
        cast=cast,
        cast_angle=float(cast_angle),
        series=series,
    )


def make_corpus(n, *, seed=0, size=256, noise=0.01):
    """``n`` slides cycling through the HPS, CK34 and KI67 series."""
    rng = np.random.default_rng(seed)
    series = list(SERIES_STAINS)
    return [make_slide(size, rng=rng, series=series[i % len(series)], noise=noise)
            for i in range(n)]
