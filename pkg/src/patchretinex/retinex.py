"""Path-based retinex lightness, Single-Scale and Multi-Scale Retinex."""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _backend
from .image import PixelCoord, as_gray

KERNELS = ("gaussian", "cross_average")

DEFAULT_MSR_SCALES = ((15.0, 1.0 / 3.0), (80.0, 1.0 / 3.0), (250.0, 1.0 / 3.0))
# default surround radius for the (non-separable) cross-average kernel
CROSS_AVERAGE_RADIUS = 15


@dataclass(frozen=True)
class RetinexParams:
    """Parameters shared by every retinex-family operation.

    Attributes
    ----------
    threshold : float
        Contrast threshold ``t`` in [0, 1] applied to path log ratios.
    num_paths : int
        Number of random paths averaged per target pixel.
    path_length : int
        Pixels per path, target included (>= 2).
    sigma : float
        Gaussian surround scale in pixels.
    kernel : str
        Surround function, ``"gaussian"`` or ``"cross_average"``.
    kernel_radius : int or None
        Surround half-width. ``None`` means ``ceil(3 * sigma)`` for the
        Gaussian and ``CROSS_AVERAGE_RADIUS`` for the cross average.
    msr_scales : tuple of (sigma, weight)
        Multi-Scale Retinex scales; weights are non-negative and sum to 1.
    epsilon : float
        Offset added before every logarithm.
    rng_seed : int
        Seed of the path sampler.
    """

    threshold: float = 0.05
    num_paths: int = 16
    path_length: int = 32
    sigma: float = 80.0
    kernel: str = "gaussian"
    kernel_radius: int | None = None
    msr_scales: tuple = field(default=DEFAULT_MSR_SCALES)
    epsilon: float = 1.0 / 255.0
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError(f"threshold must lie in [0, 1], got {self.threshold}")
        if int(self.num_paths) != self.num_paths or self.num_paths < 1:
            raise ValueError(f"num_paths must be a positive integer, got {self.num_paths}")
        if int(self.path_length) != self.path_length or self.path_length < 2:
            raise ValueError(f"path_length must be an integer >= 2, got {self.path_length}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.kernel not in KERNELS:
            raise ValueError(f"kernel must be one of {KERNELS}, got {self.kernel!r}")
        if self.kernel_radius is not None and self.kernel_radius < 1:
            raise ValueError(f"kernel_radius must be >= 1, got {self.kernel_radius}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.rng_seed < 0:
            raise ValueError(f"rng_seed must be non-negative, got {self.rng_seed}")
        scales = tuple((float(s), float(w)) for s, w in self.msr_scales)
        object.__setattr__(self, "msr_scales", scales)
        if scales:
            if any(s <= 0 for s, _ in scales):
                raise ValueError("msr scale sigmas must be positive")
            if any(w < 0 for _, w in scales):
                raise ValueError("msr weights must be non-negative")
            if abs(sum(w for _, w in scales) - 1.0) > 1e-6:
                raise ValueError("msr weights must sum to 1")

    def replace(self, **changes) -> "RetinexParams":
        return replace(self, **changes)

    def radius_for(self, kind: str, sigma: float) -> int:
        if self.kernel_radius is not None:
            return int(self.kernel_radius)
        if kind == "gaussian":
            return max(1, math.ceil(3.0 * sigma))
        return CROSS_AVERAGE_RADIUS


def parse_msr_scales(text: str) -> tuple:
    """Parse ``"15:0.33,80:0.34,250:0.33"`` into ``((15.0, 0.33), ...)``."""
    scales = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        sigma, sep, weight = item.partition(":")
        if not sep:
            raise ValueError(f"bad msr scale {item!r}, expected sigma:weight")
        try:
            scales.append((float(sigma), float(weight)))
        except ValueError:
            raise ValueError(f"bad msr scale {item!r}, expected sigma:weight") from None
    if not scales:
        raise ValueError("empty msr scale list")
    return tuple(scales)


# -- path retinex -----------------------------------------------------------


def delta_threshold(s: float, t: float) -> float:
    """Contrast threshold: pass ``s`` through when ``|s| >= t``, else 0."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {t}")
    return s if abs(s) >= t else 0.0


def path_lightness(img, path, params: RetinexParams) -> float:
    """Thresholded sum of log ratios along one path.

    ``path`` is a sequence of ``(x, y)`` pixels ordered from the path start
    to its end; each consecutive pair contributes
    ``delta(log((I(a) + eps) / (I(b) + eps)))``.
    """
    img = as_gray(img)
    pts = [PixelCoord(int(p[0]), int(p[1])) for p in path]
    if len(pts) < 2:
        raise ValueError("a path needs at least 2 pixels")
    h, w = img.shape
    for p in pts:
        if not (0 <= p.x < w and 0 <= p.y < h):
            raise ValueError(f"path pixel {p} outside a {w}x{h} image")
    eps = params.epsilon
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        s = math.log((img[a.y, a.x] + eps) / (img[b.y, b.x] + eps))
        total += delta_threshold(s, params.threshold)
    return total


def _path_draws(params: RetinexParams, target: PixelCoord) -> np.ndarray:
    # per-target sub-seed: results do not depend on evaluation order
    rng = np.random.default_rng([params.rng_seed, target.y, target.x])
    return rng.random((params.num_paths, params.path_length - 1))


def _check_target(shape, target) -> PixelCoord:
    target = PixelCoord(int(target[0]), int(target[1]))
    h, w = shape
    if h * w < 2:
        raise ValueError("path sampling needs an image with at least 2 pixels")
    if not (0 <= target.x < w and 0 <= target.y < h):
        raise ValueError(f"target {target} outside a {w}x{h} image")
    return target


def sample_paths(shape, target, params: RetinexParams) -> np.ndarray:
    """Seeded random walks ending at ``target``.

    Walks are generated backward from the target with uniform 8-neighbour
    steps restricted to the image. Returns an int array of shape
    ``(num_paths, path_length, 2)`` holding ``(x, y)`` pairs ordered from the
    random start to the target.
    """
    target = _check_target(shape, target)
    yx = _backend.walk_paths(shape[0], shape[1], target.y, target.x,
                             _path_draws(params, target))
    return np.ascontiguousarray(yx[:, :, ::-1])


def retinex_lightness(img, target, params: RetinexParams) -> float:
    """Mean path lightness over ``num_paths`` sampled paths ending at ``target``."""
    img = as_gray(img)
    target = _check_target(img.shape, target)
    logimg = np.log(img + params.epsilon)
    return float(_backend.path_retinex(logimg, target.y, target.x,
                                       _path_draws(params, target), params.threshold))


def retinex_lightness_map(img, params: RetinexParams) -> np.ndarray:
    """Path retinex lightness for every pixel (row-major sweep)."""
    img = as_gray(img)
    h, w = img.shape
    _check_target(img.shape, (0, 0))
    logimg = np.log(img + params.epsilon)
    out = np.empty((h, w), dtype=np.float64)
    for y in range(h):
        for x in range(w):
            draws = _path_draws(params, PixelCoord(x, y))
            out[y, x] = _backend.path_retinex(logimg, y, x, draws, params.threshold)
    return out


# -- surround retinex -------------------------------------------------------


def gaussian_weights(sigma: float, radius: int) -> np.ndarray:
    """Normalised 1-D Gaussian taps on ``[-radius, radius]``."""
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if radius < 1:
        raise ValueError(f"radius must be >= 1, got {radius}")
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return g / g.sum()


def surround_kernel(kind: str, sigma: float, radius: int) -> np.ndarray:
    """2-D surround function normalised to unit sum.

    ``gaussian`` is ``C exp(-(x^2 + y^2) / (2 sigma^2))``; ``cross_average``
    is ``C / (x^2 + y^2)`` with the undefined centre set to the distance-1
    value before normalisation (``sigma`` is ignored for it).
    """
    if kind not in KERNELS:
        raise ValueError(f"kernel must be one of {KERNELS}, got {kind!r}")
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if radius < 1:
        raise ValueError(f"radius must be >= 1, got {radius}")
    ax = np.arange(-radius, radius + 1, dtype=np.float64)
    r2 = ax[None, :] ** 2 + ax[:, None] ** 2
    if kind == "gaussian":
        k = np.exp(-r2 / (2.0 * sigma * sigma))
    else:
        r2[radius, radius] = 1.0
        k = 1.0 / r2
    return k / k.sum()


def mirror_pad(channel: np.ndarray, radius: int) -> np.ndarray:
    """Half-sample symmetric extension (edge pixel repeated), any radius."""
    return np.pad(channel, radius, mode="symmetric")


def surround(channel, kind: str, sigma: float, radius: int, method: str = "auto") -> np.ndarray:
    """Surround average ``I * F`` with mirrored borders.

    ``method`` is ``"separable"`` (Gaussian only), ``"direct"`` (full 2-D
    sum) or ``"auto"``, which picks separable whenever it applies. Both
    kernels are symmetric, so correlation equals convolution here.
    """
    channel = np.ascontiguousarray(channel, dtype=np.float64)
    if method == "auto":
        method = "separable" if kind == "gaussian" else "direct"
    padded = mirror_pad(channel, radius)
    if method == "separable":
        if kind != "gaussian":
            raise ValueError("only the gaussian surround is separable")
        g = gaussian_weights(sigma, radius)
        rows = _backend.correlate_rows(padded, g)
        cols = _backend.correlate_rows(np.ascontiguousarray(rows.T), g)
        return np.ascontiguousarray(cols.T)
    if method == "direct":
        return _backend.correlate2d(padded, surround_kernel(kind, sigma, radius))
    raise ValueError(f"unknown convolution method {method!r}")


def ssr(channel, params: RetinexParams, *, sigma: float | None = None,
        method: str = "auto") -> np.ndarray:
    """Single-Scale Retinex ``log(I + eps) - log(I * F + eps)``.

    Returns an unbounded log-domain lightness map with the shape of
    ``channel``. ``sigma`` overrides ``params.sigma``.
    """
    channel = as_gray(channel)
    sigma = params.sigma if sigma is None else float(sigma)
    radius = params.radius_for(params.kernel, sigma)
    blurred = surround(channel, params.kernel, sigma, radius, method=method)
    eps = params.epsilon
    return np.log(channel + eps) - np.log(blurred + eps)


def msr(channel, params: RetinexParams, *, method: str = "auto") -> np.ndarray:
    """Weighted sum of SSR maps over ``params.msr_scales``."""
    if not params.msr_scales:
        raise ValueError("msr needs at least one scale")
    channel = as_gray(channel)
    out = None
    for sigma, weight in params.msr_scales:
        term = weight * ssr(channel, params, sigma=sigma, method=method)
        out = term if out is None else out + term
    return out


def lightness_to_image(lightness) -> np.ndarray:
    """Affine rescale of a lightness map to [0, 1]; constant maps give 0.5."""
    m = np.asarray(lightness, dtype=np.float64)
    if not np.all(np.isfinite(m)):
        raise ValueError("lightness map contains non-finite values")
    lo, hi = m.min(), m.max()
    if hi == lo:
        return np.full(m.shape, 0.5)
    return np.clip((m - lo) / (hi - lo), 0.0, 1.0)
