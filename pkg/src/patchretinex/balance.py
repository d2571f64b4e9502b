"""White-balance operators and the Normal Patch Retinex pipeline.

Every operator maps an RGB image to a :class:`BalanceResult`; the
:class:`MethodRegistry` dispatches them by name for batch evaluation.
"""

from collections.abc import Callable, Mapping
from dataclasses import dataclass

import numpy as np

from .image import PixelCoord, as_rgb
from .retinex import RetinexParams, ssr

CHANNELS = ("red", "green", "blue")

# Names reserved for baselines that are not implemented
RESERVED_METHODS = ("mean_shift_gray_pixel", "cheng_pca", "all_gray_pixels", "yuv_gray_pixels")

# Share of brightest Average Illuminant pixels used as the white reference
REFERENCE_FRACTION = 0.05

# Channel statistics at or below this carry no usable signal; 16-bit data
# steps by 1.5e-5, so only subnormal-like inputs are affected
MIN_SIGNAL = 1e-12


class DegenerateChannelError(ValueError):
    """A channel carries no signal (zero, or below ``MIN_SIGNAL``)."""

    def __init__(self, channel, message=None):
        self.channel = channel
        super().__init__(message or f"{channel} channel is identically zero")


class UnknownMethodError(KeyError):
    def __init__(self, name, available):
        self.name = name
        self.available = tuple(available)
        super().__init__(name)

    def __str__(self):
        return f"unknown method {self.name!r}; available: {', '.join(self.available)}"


class MethodNotImplementedError(NotImplementedError):
    """Raised for reserved baseline names that have no implementation."""


@dataclass(frozen=True)
class Illuminant:
    r: float
    g: float
    b: float

    def __post_init__(self):
        vals = (self.r, self.g, self.b)
        if not all(np.isfinite(v) for v in vals):
            raise ValueError(f"illuminant components must be finite, got {vals}")
        if any(v < 0 for v in vals):
            raise ValueError(f"illuminant components must be non-negative, got {vals}")
        if not any(v > 0 for v in vals):
            raise ValueError("illuminant must not be all zero")

    @classmethod
    def from_array(cls, values) -> "Illuminant":
        r, g, b = (float(v) for v in np.asarray(values, dtype=np.float64).ravel())
        return cls(r, g, b)

    @classmethod
    def neutral(cls) -> "Illuminant":
        return cls(1.0, 1.0, 1.0)

    def as_array(self) -> np.ndarray:
        return np.array([self.r, self.g, self.b], dtype=np.float64)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.as_array()))

    def unit_direction(self) -> np.ndarray:
        v = self.as_array()
        return v / np.linalg.norm(v)


@dataclass(frozen=True)
class BalanceResult:
    """Output of a white-balance operator.

    ``gains`` is the diagonal correction applied to the input (for the
    affine histogram stretch, the per-channel slope). ``degenerate`` names
    channels that were passed through or handled by a fallback rule.
    """

    corrected: np.ndarray
    estimated_illuminant: Illuminant
    method_name: str
    gains: tuple
    degenerate: tuple = ()


def _gains_tuple(gains) -> tuple:
    return tuple(float(g) for g in gains)


def white_patch_maxima(img):
    """Per-channel maximum and the row-major first pixel holding it.

    Returns three ``(value, PixelCoord)`` pairs for red, green and blue.
    """
    img = as_rgb(img)
    h, w, _ = img.shape
    out = []
    for c in range(3):
        idx = int(np.argmax(img[..., c]))  # first occurrence, row-major
        y, x = divmod(idx, w)
        out.append((float(img[y, x, c]), PixelCoord(x, y)))
    return tuple(out)


def white_patch_balance(img) -> BalanceResult:
    img = as_rgb(img)
    maxima = np.array([m for m, _ in white_patch_maxima(img)])
    for c in range(3):
        if maxima[c] <= MIN_SIGNAL:
            raise DegenerateChannelError(CHANNELS[c])
    # divide rather than multiply by the reciprocal: the maximum maps to 1.0 exactly
    corrected = np.clip(img / maxima, 0.0, 1.0)
    return BalanceResult(
        corrected=corrected,
        estimated_illuminant=Illuminant.from_array(maxima),
        method_name="white_patch",
        gains=_gains_tuple(1.0 / maxima),
    )


def histogram_normalisation(img, low: float = 1.0, high: float = 99.0) -> BalanceResult:
    """Per-channel percentile stretch of ``[p_low, p_high]`` onto ``[0, 1]``.

    The high percentile anchors white: on a transmitted-light slide it is the
    clear background, i.e. the light source itself. Constant channels are
    passed through and reported in ``degenerate``.
    """
    img = as_rgb(img)
    if not 0.0 <= low < high <= 100.0:
        raise ValueError(f"need 0 <= low < high <= 100, got {low}, {high}")
    corrected = img.copy()
    tops = np.zeros(3)
    gains = np.ones(3)
    flagged = []
    for c in range(3):
        lo, hi = np.percentile(img[..., c], [low, high])
        tops[c] = hi
        if hi - lo <= MIN_SIGNAL:
            flagged.append(CHANNELS[c])
            continue
        gains[c] = 1.0 / (hi - lo)
        corrected[..., c] = np.clip((img[..., c] - lo) / (hi - lo), 0.0, 1.0)
    if not np.any(tops > MIN_SIGNAL):
        raise DegenerateChannelError("all", "image is black in every channel")
    return BalanceResult(
        corrected=corrected,
        estimated_illuminant=Illuminant.from_array(tops),
        method_name="histogram_normalisation",
        gains=_gains_tuple(gains),
        degenerate=tuple(flagged),
    )


def gray_world(img) -> BalanceResult:
    img = as_rgb(img)
    means = img.reshape(-1, 3).mean(axis=0)
    for c in range(3):
        if means[c] <= MIN_SIGNAL:
            raise DegenerateChannelError(CHANNELS[c], f"{CHANNELS[c]} channel has zero mean")
    gray = means.sum() / 3.0
    gains = gray / means
    return BalanceResult(
        corrected=np.clip(img * gains, 0.0, 1.0),
        estimated_illuminant=Illuminant.from_array(means),
        method_name="gray_world",
        gains=_gains_tuple(gains),
    )


def white_patch_retinex(img, params: RetinexParams | None = None) -> BalanceResult:
    """White Patch anchored at the strongest retinex response of each channel.

    Each channel is passed through SSR; the pixel with the largest SSR value
    is taken as the white patch and its original channel value as the
    illuminant component. A flat SSR map, or an anchor pixel whose value is
    zero, falls back to the plain channel maximum.
    """
    img = as_rgb(img)
    params = params or RetinexParams()
    h, w, _ = img.shape
    anchors = np.zeros(3)
    flagged = []
    for c in range(3):
        channel = img[..., c]
        cmax = channel.max()
        if cmax <= MIN_SIGNAL:
            raise DegenerateChannelError(CHANNELS[c])
        response = ssr(channel, params)
        value = 0.0
        if np.ptp(response) > 1e-12:
            y, x = divmod(int(np.argmax(response)), w)
            value = channel[y, x]
        if value <= MIN_SIGNAL:
            if np.ptp(response) > 1e-12:
                flagged.append(CHANNELS[c])
            value = cmax
        anchors[c] = value
    return BalanceResult(
        corrected=np.clip(img / anchors, 0.0, 1.0),
        estimated_illuminant=Illuminant.from_array(anchors),
        method_name="white_patch_retinex",
        gains=_gains_tuple(1.0 / anchors),
        degenerate=tuple(flagged),
    )


def average_illuminant(a, b) -> np.ndarray:
    """Pixelwise mean of two images of the same shape."""
    a = as_rgb(a)
    b = as_rgb(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return (a + b) / 2.0


def chromatic_adaptation(img, illum: Illuminant, target: Illuminant) -> np.ndarray:
    """Von Kries diagonal adaptation from ``illum`` to ``target``, clamped."""
    img = as_rgb(img)
    src = illum.as_array()
    for c in range(3):
        if src[c] <= MIN_SIGNAL:
            raise DegenerateChannelError(CHANNELS[c], f"illuminant {CHANNELS[c]} component is zero")
    return np.clip(img * (target.as_array() / src), 0.0, 1.0)


def neutral_target(illum: Illuminant) -> Illuminant:
    """Achromatic illuminant with the same magnitude as ``illum``."""
    v = illum.norm / np.sqrt(3.0)
    return Illuminant(v, v, v)


def reference_illuminant(img, avg, fraction: float = REFERENCE_FRACTION) -> Illuminant:
    """Diagonal illuminant relating ``img`` to its Average Illuminant image.

    The reference white is the brightest ``fraction`` of the Average
    Illuminant pixels (ranked by HSV value, ties in row-major order); the
    illuminant is the per-channel ratio of source to average over them.
    """
    flat_img = img.reshape(-1, 3)
    flat_avg = avg.reshape(-1, 3)
    v = flat_avg.max(axis=1)
    k = max(1, int(np.ceil(fraction * v.size)))
    idx = np.argsort(-v, kind="stable")[:k]
    num = flat_img[idx].mean(axis=0)
    den = flat_avg[idx].mean(axis=0)
    for c in range(3):
        if num[c] <= MIN_SIGNAL or den[c] <= MIN_SIGNAL:
            raise DegenerateChannelError(CHANNELS[c], f"{CHANNELS[c]} channel is zero on the reference white")
    return Illuminant.from_array(num / den)


@dataclass(frozen=True)
class NPRStages:
    """Intermediate images of one Normal Patch Retinex run."""

    stretched: BalanceResult
    patched: BalanceResult
    average: np.ndarray
    result: BalanceResult


def normal_patch_retinex_stages(img, params: RetinexParams | None = None) -> NPRStages:
    img = as_rgb(img)
    params = params or RetinexParams()
    # the two branches are independent of each other
    stretched = histogram_normalisation(img)
    patched = white_patch_retinex(img, params)
    avg = average_illuminant(stretched.corrected, patched.corrected)
    est = reference_illuminant(img, avg)
    target = neutral_target(est)
    result = BalanceResult(
        corrected=chromatic_adaptation(img, est, target),
        estimated_illuminant=est,
        method_name="normal_patch_retinex",
        gains=_gains_tuple(target.as_array() / est.as_array()),
        degenerate=stretched.degenerate + patched.degenerate,
    )
    return NPRStages(stretched, patched, avg, result)


def normal_patch_retinex(img, params: RetinexParams | None = None) -> BalanceResult:
    """Normal Patch Retinex white balance.

    The image goes through a percentile histogram stretch and, separately,
    White Patch Retinex. The pixelwise mean of the two outputs is the
    Average Illuminant image; the illuminant it implies on the reference
    white (:func:`reference_illuminant`) is then removed from the source by
    von Kries adaptation to a neutral light of equal magnitude.
    """
    return normal_patch_retinex_stages(img, params).result


# -- registry ---------------------------------------------------------------


def _original(img, params):
    from .evaluation import estimate_scene_illuminant

    img = as_rgb(img)
    return BalanceResult(
        corrected=img,
        estimated_illuminant=estimate_scene_illuminant(img),
        method_name="original",
        gains=(1.0, 1.0, 1.0),
    )


def _named(fn, name):
    def run(img, params):
        res = fn(img)
        return BalanceResult(res.corrected, res.estimated_illuminant, name, res.gains, res.degenerate)

    return run


class MethodRegistry(Mapping):
    """Immutable ordered catalogue of operators ``(img, params) -> BalanceResult``."""

    def __init__(self, methods: Mapping[str, Callable], reserved=RESERVED_METHODS):
        self._methods = dict(methods)
        self._reserved = tuple(reserved)

    def __getitem__(self, name):
        return self._methods[name]

    def __iter__(self):
        return iter(self._methods)

    def __len__(self):
        return len(self._methods)

    @property
    def reserved(self) -> tuple:
        return self._reserved

    def resolve(self, name: str) -> Callable:
        if name in self._methods:
            return self._methods[name]
        if name in self._reserved:
            raise MethodNotImplementedError(f"method {name!r} is reserved but not implemented")
        raise UnknownMethodError(name, self._methods)

    def run(self, name: str, img, params: RetinexParams | None = None) -> BalanceResult:
        return self.resolve(name)(img, params or RetinexParams())


DEFAULT_REGISTRY = MethodRegistry({
    "original": _original,
    "histogram_normalisation": _named(histogram_normalisation, "histogram_normalisation"),
    "gray_world": _named(gray_world, "gray_world"),
    "white_patch_retinex": white_patch_retinex,
    "normal_patch_retinex": normal_patch_retinex,
})


def registry_run(name: str, img, params: RetinexParams | None = None,
                 registry: MethodRegistry = DEFAULT_REGISTRY) -> BalanceResult:
    """Run the operator registered as ``name``."""
    return registry.run(name, img, params)
