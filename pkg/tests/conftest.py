import math

import numpy as np
import pytest

# criterion label -> (passed, detail); filled by the acceptance module
ACCEPTANCE = {}


def record(label, passed, detail=""):
    ACCEPTANCE[label] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, (passed, detail) in ACCEPTANCE.items():
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {label}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- independent oracles ----------------------------------------------------


def mirror_index(i, n):
    """Half-sample symmetric reflection of index ``i`` into ``[0, n)``."""
    period = 2 * n
    m = i % period
    return m if m < n else period - 1 - m


def naive_surround(channel, kernel):
    """Direct O(H W K^2) correlation with mirrored borders, one pixel at a time."""
    h, w = channel.shape
    r = kernel.shape[0] // 2
    offs = np.arange(-r, r + 1)
    out = np.empty((h, w))
    for y in range(h):
        rows = np.array([mirror_index(y + o, h) for o in offs])
        for x in range(w):
            cols = np.array([mirror_index(x + o, w) for o in offs])
            out[y, x] = np.sum(kernel * channel[np.ix_(rows, cols)])
    return out


def naive_gaussian_kernel(sigma, radius):
    k = np.empty((2 * radius + 1, 2 * radius + 1))
    for i in range(-radius, radius + 1):
        for j in range(-radius, radius + 1):
            k[i + radius, j + radius] = math.exp(-(i * i + j * j) / (2 * sigma * sigma))
    return k / k.sum()


def loop_path_lightness(img, path, t, eps):
    """Thresholded log-ratio sum over ``(x, y)`` path pixels, plain Python."""
    total = 0.0
    for (x0, y0), (x1, y1) in zip(path[:-1], path[1:]):
        s = math.log((img[y0][x0] + eps) / (img[y1][x1] + eps))
        if abs(s) >= t:
            total += s
    return total
