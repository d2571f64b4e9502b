"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``.

Each function accumulates in the same per-element order as its compiled
twin, so both backends produce identical floating point results.
"""

import numpy as np

DY = np.array([-1, -1, -1, 0, 0, 1, 1, 1], dtype=np.int64)
DX = np.array([-1, 0, 1, -1, 1, -1, 0, 1], dtype=np.int64)


def correlate_rows(padded, weights):
    padded = np.ascontiguousarray(padded, dtype=np.float64)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    taps = weights.shape[0]
    cols = padded.shape[1] - taps + 1
    if cols < 1:
        raise ValueError("padded rows shorter than the kernel")
    out = np.zeros((padded.shape[0], cols), dtype=np.float64)
    for k in range(taps):
        out += weights[k] * padded[:, k:k + cols]
    return out


def correlate2d(padded, kernel):
    padded = np.ascontiguousarray(padded, dtype=np.float64)
    kernel = np.ascontiguousarray(kernel, dtype=np.float64)
    kh, kw = kernel.shape
    rows = padded.shape[0] - kh + 1
    cols = padded.shape[1] - kw + 1
    if rows < 1 or cols < 1:
        raise ValueError("padded image smaller than the kernel")
    out = np.zeros((rows, cols), dtype=np.float64)
    for a in range(kh):
        for b in range(kw):
            out += kernel[a, b] * padded[a:a + rows, b:b + cols]
    return out


def _steps(height, width, y, x, draw):
    """Vectorised single step for every path; returns chosen offset indices."""
    ny = y[:, None] + DY[None, :]
    nx = x[:, None] + DX[None, :]
    valid = (ny >= 0) & (ny < height) & (nx >= 0) & (nx < width)
    n = valid.sum(axis=1)
    idx = np.minimum((draw * n).astype(np.int64), n - 1)
    rank = np.cumsum(valid, axis=1) - 1
    hit = valid & (rank == idx[:, None])
    return np.argmax(hit, axis=1)


def walk_paths(height, width, ty, tx, draws):
    draws = np.asarray(draws, dtype=np.float64)
    npaths, steps = draws.shape
    out = np.empty((npaths, steps + 1, 2), dtype=np.int64)
    y = np.full(npaths, ty, dtype=np.int64)
    x = np.full(npaths, tx, dtype=np.int64)
    out[:, steps, 0] = y
    out[:, steps, 1] = x
    for s in range(steps):
        d = _steps(height, width, y, x, draws[:, s])
        y = y + DY[d]
        x = x + DX[d]
        out[:, steps - 1 - s, 0] = y
        out[:, steps - 1 - s, 1] = x
    return out


def path_retinex(logimg, ty, tx, draws, threshold):
    logimg = np.asarray(logimg, dtype=np.float64)
    paths = walk_paths(logimg.shape[0], logimg.shape[1], ty, tx, draws)
    # paths are stored start -> target; walk them target -> start like the kernel
    vals = logimg[paths[:, :, 0], paths[:, :, 1]]
    acc = np.zeros(paths.shape[0], dtype=np.float64)
    for s in range(paths.shape[1] - 1, 0, -1):
        diff = vals[:, s - 1] - vals[:, s]
        acc += np.where(np.abs(diff) >= threshold, diff, 0.0)
    total = 0.0
    for value in acc:
        total += value
    return total / paths.shape[0]
