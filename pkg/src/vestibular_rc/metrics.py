"""Long-term attractor statistics for closed-loop predictions.

Two gridded visitation-frequency measures (an L1 deviation and a
smoothed KL divergence), a Rosenstein-style largest-Lyapunov estimator,
and a bound check for flagging divergent trajectories.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import TimeSeries
from .errors import (
    GridMismatchError,
    InsufficientDataError,
    InvalidInputError,
)

__all__ = [
    "AttractorHistogram",
    "PredictionStats",
    "build_histogram",
    "deviation_value",
    "kl_divergence",
    "embedding_params",
    "largest_lyapunov",
    "check_divergence",
]

KL_EPSILON = 1e-10


@dataclass
class AttractorHistogram:
    """Normalized 2-D visitation frequencies of a projected attractor."""

    freqs: np.ndarray
    grid_bounds: tuple
    g: int
    proj: tuple

    def __post_init__(self):
        self.freqs = np.asarray(self.freqs, dtype=float)
        if self.freqs.shape != (self.g, self.g):
            raise InvalidInputError(
                f"frequency grid {self.freqs.shape} does not match g={self.g}"
            )
        if np.any(self.freqs < 0):
            raise InvalidInputError("visitation frequencies must be nonnegative")
        if abs(float(self.freqs.sum()) - 1.0) > 1e-9:
            raise InvalidInputError("visitation frequencies must sum to 1")


@dataclass
class PredictionStats:
    """Scores of one train/validate/test pipeline run."""

    train_nrmse: float
    val_nrmse: float
    dv: float
    kl: float
    lle_pred: float
    lle_truth: float
    diverged: bool

    def __post_init__(self):
        if not self.diverged:
            vals = (self.train_nrmse, self.val_nrmse, self.dv, self.kl,
                    self.lle_pred, self.lle_truth)
            if not all(np.isfinite(v) for v in vals):
                raise InvalidInputError(
                    "non-divergent stats must be finite"
                )


def build_histogram(
    series: TimeSeries,
    proj: tuple = (0, 1),
    g: int = 50,
    bounds: tuple = ((0.0, 1.0), (0.0, 1.0)),
) -> AttractorHistogram:
    """Grid the projection of a trajectory into visitation frequencies.

    The series is projected onto the two channels in ``proj`` and binned
    on a g x g grid over ``bounds``.  Samples outside the bounds are
    clamped to the edge cells so every sample is counted and the
    frequencies always sum to one.
    """
    if series.n_samples == 0:
        raise InsufficientDataError("cannot build a histogram of an empty series")
    i, j = proj
    if not (0 <= i < series.n_channels and 0 <= j < series.n_channels):
        raise InvalidInputError(
            f"projection {proj} out of range for {series.n_channels} channels"
        )
    if g < 1:
        raise InvalidInputError("grid resolution must be at least 1")
    (lo1, hi1), (lo2, hi2) = bounds
    if not (hi1 > lo1 and hi2 > lo2):
        raise InvalidInputError("grid bounds must have positive extent")
    a = np.clip(series.values[:, i], lo1, hi1)
    b = np.clip(series.values[:, j], lo2, hi2)
    counts, _, _ = np.histogram2d(a, b, bins=g, range=((lo1, hi1), (lo2, hi2)))
    return AttractorHistogram(
        freqs=counts / series.n_samples,
        grid_bounds=((lo1, hi1), (lo2, hi2)),
        g=g,
        proj=(i, j),
    )


def _check_same_grid(h1: AttractorHistogram, h2: AttractorHistogram) -> None:
    if h1.g != h2.g or h1.grid_bounds != h2.grid_bounds or h1.proj != h2.proj:
        raise GridMismatchError(
            f"histogram grids differ: ({h1.g}, {h1.grid_bounds}, {h1.proj}) "
            f"vs ({h2.g}, {h2.grid_bounds}, {h2.proj})"
        )


def deviation_value(truth: AttractorHistogram, pred: AttractorHistogram) -> float:
    """L1 distance between visitation-frequency grids, in [0, 2]."""
    _check_same_grid(truth, pred)
    return float(np.abs(truth.freqs - pred.freqs).sum())


def kl_divergence(
    truth: AttractorHistogram,
    pred: AttractorHistogram,
    epsilon: float = KL_EPSILON,
) -> float:
    """Smoothed KL divergence between visitation-frequency grids.

    epsilon is added to every cell of both grids before renormalizing,
    so empty predicted cells cannot produce infinities.  Natural log.
    """
    _check_same_grid(truth, pred)
    p = truth.freqs + epsilon
    p /= p.sum()
    q = pred.freqs + epsilon
    q /= q.sum()
    return float(np.sum(p * np.log(p / q)))


def _scalar_channel(series) -> np.ndarray:
    if isinstance(series, TimeSeries):
        return np.ascontiguousarray(series.values[:, 0])
    x = np.asarray(series, dtype=float).ravel()
    return x


def _autocorrelation(x: np.ndarray) -> np.ndarray:
    n = x.size
    xc = x - x.mean()
    f = np.fft.rfft(xc, 2 * n)
    acf = np.fft.irfft(f * np.conj(f))[:n]
    if acf[0] <= 0:
        return np.ones(n)
    return acf / acf[0]


def _first_acf_minimum(x: np.ndarray) -> int:
    """First local minimum of the autocorrelation, used as embedding delay."""
    acf = _autocorrelation(x)
    n = acf.size
    for lag in range(1, n - 1):
        if acf[lag] <= acf[lag - 1] and acf[lag] < acf[lag + 1]:
            return lag
    # monotone decay: fall back to the 1/e crossing
    below = np.nonzero(acf < 1.0 / np.e)[0]
    return int(below[0]) if below.size else 1


def _mean_period(x: np.ndarray) -> int:
    """Dominant period in samples, from the mean frequency of the spectrum."""
    xc = x - x.mean()
    psd = np.abs(np.fft.rfft(xc)) ** 2
    freqs = np.fft.rfftfreq(x.size)
    psd[0] = 0.0
    total = psd.sum()
    if total <= 0:
        return 1
    mean_freq = float((freqs * psd).sum() / total)
    if mean_freq <= 0:
        return 1
    return max(1, int(np.ceil(1.0 / mean_freq)))


def embedding_params(series) -> tuple[int, int]:
    """Delay and Theiler window a series selects for itself.

    Returns (first autocorrelation minimum, dominant period in
    samples).  Compute these once on a reference series and pass them
    to ``largest_lyapunov`` for every series being compared, so the
    exponents differ only through the data and not through estimator
    settings.
    """
    x = _scalar_channel(series)
    if x.size < 4:
        raise InsufficientDataError("series too short to embed")
    return _first_acf_minimum(x), _mean_period(x)


def largest_lyapunov(
    series,
    emb_dim: int = 6,
    delay: int | None = None,
    theiler: int | None = None,
    fit_range: tuple = (1, 30),
) -> float:
    """Largest Lyapunov exponent per sample step, Rosenstein-style.

    The scalar signal (channel 0 of a TimeSeries, or a 1-D array) is
    delay-embedded, each point is paired with its nearest neighbor
    outside the Theiler window, and the exponent is the least-squares
    slope of the mean log separation over ``fit_range`` steps ahead.

    delay defaults to the first autocorrelation minimum; theiler to the
    dominant period in samples.  Divide by dt for a per-time-unit rate.
    """
    x = _scalar_channel(series)
    if emb_dim < 1:
        raise InvalidInputError("embedding dimension must be at least 1")
    k_min, k_max = int(fit_range[0]), int(fit_range[1])
    if not (0 < k_min < k_max):
        raise InvalidInputError(f"bad fit range {fit_range}")
    if x.size < 4:
        raise InsufficientDataError("series too short to embed")
    if delay is None:
        delay = _first_acf_minimum(x)
    delay = int(delay)
    if delay < 1:
        raise InvalidInputError("delay must be positive")
    if theiler is None:
        theiler = _mean_period(x)
    theiler = int(theiler)

    m = x.size - (emb_dim - 1) * delay
    m_start = m - k_max  # start points must have k_max followable steps
    if m_start < 2 or m_start <= theiler + 1:
        raise InsufficientDataError(
            f"series of {x.size} samples too short for emb_dim={emb_dim}, "
            f"delay={delay}, theiler={theiler}, fit to {k_max}"
        )
    idx = np.arange(m)[:, None] + delay * np.arange(emb_dim)[None, :]
    emb = x[idx]
    points = emb[:m_start]

    sq = np.einsum("ij,ij->i", points, points)
    nn = np.empty(m_start, dtype=np.intp)
    cols = np.arange(m_start)
    block = 512
    for s in range(0, m_start, block):
        e = min(s + block, m_start)
        d2 = sq[s:e, None] + sq[None, :] - 2.0 * (points[s:e] @ points.T)
        excl = np.abs(np.arange(s, e)[:, None] - cols[None, :]) <= theiler
        d2[excl] = np.inf
        nn[s:e] = np.argmin(d2, axis=1)

    ks = np.arange(k_min, k_max + 1)
    y = np.empty(ks.size)
    i_idx = np.arange(m_start)
    for t, k in enumerate(ks):
        diff = emb[i_idx + k] - emb[nn + k]
        d = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        good = d > 0
        if not np.any(good):
            raise InsufficientDataError("all neighbor separations collapsed to 0")
        y[t] = float(np.mean(np.log(d[good])))
    slope = np.polyfit(ks.astype(float), y, 1)[0]
    return float(slope)


def check_divergence(series, bound: float = 5.0) -> bool:
    """True when the trajectory left [-bound, bound] or turned non-finite."""
    values = series.values if isinstance(series, TimeSeries) else np.asarray(series, dtype=float)
    if values.size == 0:
        return False
    if not np.all(np.isfinite(values)):
        return True
    return bool(np.any(np.abs(values) > bound))
