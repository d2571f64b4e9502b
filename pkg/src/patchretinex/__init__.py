"""Retinex family and Normal Patch Retinex white balance for microscopy images.

The convolution and path-sampling inner loops run in a compiled Cython
extension when it is available and in numpy otherwise; ``BACKEND`` tells
which one was picked at import.
"""

from ._backend import BACKEND
from .balance import (
    DEFAULT_REGISTRY,
    BalanceResult,
    DegenerateChannelError,
    Illuminant,
    MethodNotImplementedError,
    MethodRegistry,
    UnknownMethodError,
    average_illuminant,
    chromatic_adaptation,
    gray_world,
    histogram_normalisation,
    normal_patch_retinex,
    registry_run,
    white_patch_balance,
    white_patch_maxima,
    white_patch_retinex,
)
from .evaluation import (
    AngularErrorReport,
    GroundTruth,
    angular_error,
    estimate_scene_illuminant,
    evaluate_batch,
    load_ground_truth,
    report_to_table,
)
from .image import PixelCoord, load_image, rgb_to_hsv_value, save_image, to_gray
from .retinex import (
    RetinexParams,
    delta_threshold,
    lightness_to_image,
    msr,
    path_lightness,
    retinex_lightness,
    ssr,
    surround_kernel,
)

__version__ = "0.1.0"
