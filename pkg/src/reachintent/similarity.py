"""Similarity metrics between an observed partial hand trajectory and a
generated candidate.

Windowed MSE is the acceptance metric used everywhere; Hausdorff and
discrete Frechet serve as slower reference oracles in tests and
diagnostics.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import AlignmentError, ParameterError


@dataclass(frozen=True)
class Window:
    """Number of most-recent observation points compared."""

    w: int = 10

    def __post_init__(self):
        if self.w < 1:
            raise ParameterError("window length must be >= 1")


class SimilarityValue(NamedTuple):
    """Scalar metric plus whether fewer than w points were available."""

    value: float
    partial: bool

    def __float__(self):
        return self.value


def _window_slice(n_observed, t_index, w):
    """Start index of the comparison window ending at t_index."""
    if t_index < 0 or t_index >= n_observed:
        raise ParameterError(
            f"t_index {t_index} outside observed range 0..{n_observed - 1}")
    start = t_index - w + 1
    if start < 0:
        return 0, True
    return start, False


def windowed_mse(observed, generated, t_index, window=Window()):
    """Mean squared point distance over the last `window.w` points.

    Compares observed[t_index-w+1 : t_index+1] against the same index
    range of the generated trajectory (both onset-aligned at index 0).
    With fewer than w points observed so far, all available points are
    used and the result is flagged partial.
    """
    if abs(observed.dt - generated.dt) > 1e-12:
        raise AlignmentError(
            f"dt mismatch: observed {observed.dt} vs generated {generated.dt}")
    if t_index >= len(generated):
        raise ParameterError(
            f"generated trajectory has {len(generated)} points, "
            f"needs > {t_index}")
    start, partial = _window_slice(len(observed), t_index, window.w)
    a = observed.points[start:t_index + 1]
    b = generated.points[start:t_index + 1]
    diff = a - b
    value = float(np.mean(np.sum(diff * diff, axis=1)))
    return SimilarityValue(value, partial)


def windowed_mse_many(observed, batch_points, t_index, window=Window()):
    """Vectorized windowed MSE of one observation against many candidates.

    `batch_points` is (B, n, 3); returns (values (B,), partial). This is
    the grid evaluation path, so it must agree with windowed_mse.
    """
    batch_points = np.asarray(batch_points)
    if batch_points.ndim != 3 or batch_points.shape[2] != 3:
        raise ParameterError("batch_points must be (B, n, 3)")
    if t_index >= batch_points.shape[1]:
        raise ParameterError(
            f"candidates have {batch_points.shape[1]} points, "
            f"needs > {t_index}")
    start, partial = _window_slice(len(observed), t_index, window.w)
    a = np.asarray(observed.points[start:t_index + 1], dtype=float)
    # cast after slicing; the full batch may be large and float32
    b = np.asarray(batch_points[:, start:t_index + 1, :], dtype=float)
    diff = b - a[None, :, :]
    values = np.mean(np.sum(diff * diff, axis=2), axis=1)
    return values, partial


def _pairwise_distances(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ParameterError("point lists must be (n, d) with matching d")
    if len(a) == 0 or len(b) == 0:
        raise ParameterError("point lists must be non-empty")
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=2))


def hausdorff(a, b):
    """Symmetric Hausdorff distance between two point sets."""
    d = _pairwise_distances(a, b)
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def discrete_frechet(a, b):
    """Discrete Frechet distance via the standard DP over the coupling
    table: ca[i,j] = max(d[i,j], min(ca[i-1,j], ca[i-1,j-1], ca[i,j-1]))."""
    d = _pairwise_distances(a, b)
    n, m = d.shape
    ca = np.empty((n, m))
    ca[0, 0] = d[0, 0]
    for j in range(1, m):
        ca[0, j] = max(ca[0, j - 1], d[0, j])
    for i in range(1, n):
        ca[i, 0] = max(ca[i - 1, 0], d[i, 0])
        row = ca[i]
        prev = ca[i - 1]
        for j in range(1, m):
            best = prev[j]
            if prev[j - 1] < best:
                best = prev[j - 1]
            if row[j - 1] < best:
                best = row[j - 1]
            row[j] = best if best > d[i, j] else d[i, j]
    return float(ca[n - 1, m - 1])
