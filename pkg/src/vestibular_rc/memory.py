"""Memory function and memory capacity estimation.

The memory function M_F(tau) scores how well a reservoir driven by a
stochastic scalar signal can reconstruct the input from tau steps in
the past, as the squared Pearson correlation between the delayed input
and a ridge-fitted readout of the states.  Memory capacity M_C is the
sum of M_F over delays.

Three empirical windowing schemes are provided.  The refined scheme
keeps the state window fixed for every delay, so each delay is scored
on the same amount of data; it is the canonical estimator here.  The
standard and alternative schemes shrink their windows as the delay
grows and are kept for cross-checks.

For a linear echo state network the memory function has a closed form
that depends only on the eigenvalues of the coupling matrix: with H
the N x T matrix of descending eigenvalue powers and H_tau the vector
of tau-th powers,

    M_F(tau) = H_tau' (H H')^+ H_tau,      M_C = rank(H) <= N.

Spectrum-matched coupled and uncoupled networks therefore have
identical linear memory, which is the equivalence the empirical tools
probe on the nonlinear reservoir.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .dynamics import TimeSeries
from .errors import (
    ConfigurationError,
    InsufficientDataError,
    InvalidInputError,
)
from .readout import augment
from .reservoir import ReservoirConfig, drive_open_loop
from .topology import ConnectivityMatrix, InputWeights

__all__ = [
    "MemoryCurve",
    "LinearEsn",
    "stochastic_input",
    "linear_esn_run",
    "memory_function",
    "memory_capacity",
    "analytic_mf_linear",
    "analytic_memory_curve",
    "analytic_mc",
    "memory_curve_vestibular",
]

MEMORY_RIDGE_LAMBDA = 1e-8
# Shared relative cutoff for the analytic pseudoinverse and the rank
# count, so that summing M_F over all delays reproduces the rank.
ANALYTIC_RCOND = 1e-12

MEMORY_METHODS = ("standard", "alternative", "refined")


@dataclass
class MemoryCurve:
    """M_F samples at delays 0..tau_max plus their sum M_C."""

    mf: np.ndarray
    mc: float
    method: str
    t_window: int
    t0: int

    def __post_init__(self):
        self.mf = np.asarray(self.mf, dtype=float).ravel()
        if self.mf.size == 0:
            raise InvalidInputError("memory curve cannot be empty")
        if self.method not in MEMORY_METHODS + ("analytic",):
            raise InvalidInputError(f"unknown memory method {self.method!r}")
        if np.any(self.mf < 0.0) or np.any(self.mf > 1.0 + 1e-9):
            raise InvalidInputError("memory function values must lie in [0, 1]")
        if abs(float(self.mf.sum()) - self.mc) > 1e-9:
            raise InvalidInputError("mc must equal the sum of the mf samples")
        if self.t_window < 1:
            raise InvalidInputError("t_window must be positive")
        if self.t0 < 0:
            raise InvalidInputError("t0 must be nonnegative")

    @property
    def tau_max(self) -> int:
        return self.mf.size - 1


@dataclass
class LinearEsn:
    """A linear echo state network r(t+1) = A r(t) + w_in u(t).

    Stability of the iteration requires every eigenvalue of A inside
    the unit circle; the input must be scalar.
    """

    a: ConnectivityMatrix
    w_in: InputWeights

    def __post_init__(self):
        if self.w_in.d != 1:
            raise ConfigurationError(
                f"linear memory analysis takes scalar input, got D={self.w_in.d}"
            )
        if self.a.n != self.w_in.n:
            raise ConfigurationError(
                f"size mismatch: coupling {self.a.n}, input {self.w_in.n}"
            )
        if np.max(np.abs(self.a.eigenvalues)) >= 1.0:
            raise ConfigurationError(
                "spectral radius must be below 1 for a stable linear network"
            )

    @property
    def n(self) -> int:
        return self.a.n


def stochastic_input(t_total: int, rng: np.random.Generator,
                     dt: float = 1.0) -> TimeSeries:
    """I.i.d. uniform [0, 1] scalar input series of length t_total."""
    if t_total < 1:
        raise InvalidInputError(f"t_total must be at least 1, got {t_total}")
    values = rng.uniform(0.0, 1.0, size=(int(t_total), 1))
    return TimeSeries(values=values, dt=dt, channel_names=("u",))


def _scalar_input(u) -> np.ndarray:
    if isinstance(u, TimeSeries):
        if u.n_channels != 1:
            raise InvalidInputError(
                f"memory analysis takes a scalar input, got {u.n_channels} channels"
            )
        return np.ascontiguousarray(u.values[:, 0])
    x = np.asarray(u, dtype=float)
    if x.ndim != 1:
        raise InvalidInputError("input series must be one scalar channel")
    return x


def linear_esn_run(esn: LinearEsn, u, r0: np.ndarray | None = None) -> np.ndarray:
    """Iterate the linear network over the input; N x T state matrix.

    Column k is the state after consuming u[k], matching the sampling
    convention of the vestibular reservoir.  r0 defaults to zero.
    """
    x = _scalar_input(u)
    n = esn.n
    if r0 is None:
        r = np.zeros(n)
    else:
        r = np.asarray(r0, dtype=float).ravel().copy()
        if r.size != n:
            raise InvalidInputError(f"r0 has {r.size} entries, expected {n}")
    a = esn.a.a
    w = esn.w_in.w_in[:, 0]
    out = np.empty((n, x.size))
    for k in range(x.size):
        r = a @ r + w * x[k]
        out[:, k] = r
    return out


def _squared_correlation(target: np.ndarray, pred: np.ndarray) -> float:
    """Squared Pearson correlation; degenerate fits read as zero memory."""
    tc = target - target.mean()
    pc = pred - pred.mean()
    vt = float(tc @ tc)
    vp = float(pc @ pc)
    if vt <= 1e-300 or vp <= 1e-300:
        return 0.0
    cov = float(tc @ pc)
    return cov * cov / (vt * vp)


def _ridge_predict(states: np.ndarray, target: np.ndarray,
                   ridge_lambda: float) -> np.ndarray:
    # fit mean-centered so the readout chases correlation, not the
    # offset a nonzero-mean input leaves in every state
    xc = states - states.mean(axis=1, keepdims=True)
    yc = target - target.mean()
    g = xc @ xc.T
    g[np.diag_indices_from(g)] += ridge_lambda
    w = np.linalg.solve(g, xc @ yc)
    return w @ xc


def memory_function(
    states: np.ndarray,
    u,
    tau: int,
    method: str = "refined",
    t0: int = 200,
    ridge_lambda: float = MEMORY_RIDGE_LAMBDA,
    t_window: int | None = None,
) -> float:
    """Score reconstruction of the input delayed by tau from the states.

    states has one column per input sample (column k responds to u[k]);
    pass the augmented matrix to score an augmented readout.  A ridge
    readout is fitted per delay and the squared Pearson correlation
    between the delayed input and the fitted prediction is returned.

    The ``refined`` method fits on the fixed state window
    [t0, t0 + t_window) for every delay (t_window defaults to all
    columns after t0), so tau may not exceed t0.  The ``alternative``
    method fits states[:, tau:] against the input shifted back by tau,
    a window that shrinks with tau.  The ``standard`` method fits the
    same shrinking window but scores the fit on the state columns
    shifted back by tau, where training and scoring windows overlap
    only in the middle, so its window shrinks twice as fast.

    A target or prediction with zero variance scores 0.
    """
    states = np.asarray(states, dtype=float)
    if states.ndim != 2:
        raise InvalidInputError("states must be a 2-D matrix")
    x = _scalar_input(u)
    t_full = states.shape[1]
    if t_full != x.size:
        raise InvalidInputError(
            f"states have {t_full} columns but the input has {x.size} samples"
        )
    if tau < 0:
        raise InvalidInputError(f"delay must be nonnegative, got {tau}")
    if method not in MEMORY_METHODS:
        raise InvalidInputError(f"unknown memory method {method!r}")
    if ridge_lambda < 0:
        raise InvalidInputError("ridge_lambda must be nonnegative")

    if method == "refined":
        if t0 < 0 or t0 >= t_full:
            raise InvalidInputError(f"t0={t0} outside the state record")
        t = t_full - t0 if t_window is None else int(t_window)
        if t < 2:
            raise InsufficientDataError("refined window needs at least 2 samples")
        if t0 + t > t_full:
            raise InsufficientDataError(
                f"window [t0, t0+{t}) runs past the {t_full} recorded samples"
            )
        if tau > t0:
            raise InvalidInputError(
                f"delay {tau} exceeds the leading offset t0={t0}"
            )
        r_win = states[:, t0 : t0 + t]
        target = x[t0 - tau : t0 - tau + t]
        pred = _ridge_predict(r_win, target, ridge_lambda)
        return _squared_correlation(target, pred)

    t_used = t_full if t_window is None else int(t_window)
    if t_used > t_full:
        raise InsufficientDataError(
            f"t_window={t_used} exceeds the {t_full} recorded samples"
        )
    if method == "alternative":
        if t_used - tau < 2:
            raise InsufficientDataError(
                f"delay {tau} leaves fewer than 2 samples in the window"
            )
        r_win = states[:, tau:t_used]
        target = x[: t_used - tau]
        pred = _ridge_predict(r_win, target, ridge_lambda)
        return _squared_correlation(target, pred)

    # standard: train on [tau, t_used), score on the columns shifted
    # back by tau, i.e. where delayed targets exist for both windows
    if t_used - 2 * tau < 2:
        raise InsufficientDataError(
            f"delay {tau} leaves fewer than 2 overlap samples"
        )
    r_train = states[:, tau:t_used]
    y_train = x[: t_used - tau]
    mu = r_train.mean(axis=1, keepdims=True)
    xc = r_train - mu
    g = xc @ xc.T
    g[np.diag_indices_from(g)] += ridge_lambda
    w = np.linalg.solve(g, xc @ (y_train - y_train.mean()))
    r_eval = states[:, tau : t_used - tau] - mu
    target = x[: t_used - 2 * tau]
    return _squared_correlation(target, w @ r_eval)


def memory_capacity(mf_curve) -> float:
    """Sum of the memory function samples."""
    if isinstance(mf_curve, MemoryCurve):
        return float(mf_curve.mc)
    arr = np.asarray(mf_curve, dtype=float).ravel()
    if arr.size == 0:
        raise InvalidInputError("memory curve cannot be empty")
    return float(arr.sum())


def _validate_eigs(eigs) -> np.ndarray:
    lam = np.asarray(eigs, dtype=float).ravel()
    if lam.size and np.max(np.abs(lam)) >= 1.0:
        raise InvalidInputError(
            "analytic memory requires all eigenvalues inside the unit circle"
        )
    return lam


def _gram_spectrum(lam: np.ndarray, t_window: int):
    """Eigendecomposition of H H' computed from geometric sums."""
    prod = lam[:, None] * lam[None, :]
    with np.errstate(over="ignore"):
        powed = prod ** t_window
    g = np.where(np.abs(1.0 - prod) < 1e-14, float(t_window),
                 (1.0 - powed) / (1.0 - prod))
    s, q = np.linalg.eigh(g)
    keep = s > ANALYTIC_RCOND * max(float(s[-1]), 0.0) if s.size else s > 0
    return q, s, keep


def analytic_mf_linear(eigs, t_window: int, tau: int) -> float:
    """Closed-form linear-reservoir memory function at one delay.

    Depends only on the eigenvalue list: the projection weight of the
    tau-th eigenvalue powers under the pseudoinverse of H H'.
    """
    lam = _validate_eigs(eigs)
    if t_window < 1:
        raise InvalidInputError("t_window must be positive")
    if not 0 <= tau <= t_window - 1:
        raise InvalidInputError(
            f"delay must lie in [0, {t_window - 1}], got {tau}"
        )
    if lam.size == 0:
        return 0.0
    q, s, keep = _gram_spectrum(lam, t_window)
    h_tau = lam ** tau
    coeffs = q.T @ h_tau
    return float(np.sum(coeffs[keep] ** 2 / s[keep]))


def analytic_memory_curve(eigs, t_window: int,
                          tau_max: int | None = None) -> MemoryCurve:
    """Closed-form memory curve over delays 0..tau_max.

    tau_max defaults to t_window - 1, the full range whose sum equals
    the rank bound.
    """
    lam = _validate_eigs(eigs)
    if t_window < 1:
        raise InvalidInputError("t_window must be positive")
    if tau_max is None:
        tau_max = t_window - 1
    if not 0 <= tau_max <= t_window - 1:
        raise InvalidInputError(
            f"tau_max must lie in [0, {t_window - 1}], got {tau_max}"
        )
    if lam.size == 0:
        mf = np.zeros(tau_max + 1)
    else:
        q, s, keep = _gram_spectrum(lam, t_window)
        taus = np.arange(tau_max + 1)
        h = lam[:, None] ** taus[None, :]
        coeffs = q.T @ h
        mf = np.clip(np.sum(coeffs[keep] ** 2 / s[keep, None], axis=0),
                     0.0, 1.0)
    return MemoryCurve(mf=mf, mc=float(mf.sum()), method="analytic",
                       t_window=int(t_window), t0=0)


def analytic_mc(eigs, t_window: int) -> float:
    """Linear memory capacity over all delays: the rank of H, at most N."""
    lam = _validate_eigs(eigs)
    if t_window < 1:
        raise InvalidInputError("t_window must be positive")
    if lam.size == 0:
        return 0.0
    _, s, keep = _gram_spectrum(lam, t_window)
    return float(np.count_nonzero(keep))


def _refined_curve(states: np.ndarray, x: np.ndarray, tau_max: int,
                   t_window: int, t0: int, ridge_lambda: float) -> np.ndarray:
    """Refined-method curve sharing one factorization across delays."""
    r_win = states[:, t0 : t0 + t_window]
    xc = r_win - r_win.mean(axis=1, keepdims=True)
    g = xc @ xc.T
    g[np.diag_indices_from(g)] += ridge_lambda
    cho = scipy.linalg.cho_factor(g)
    mf = np.empty(tau_max + 1)
    for tau in range(tau_max + 1):
        target = x[t0 - tau : t0 - tau + t_window]
        yc = target - target.mean()
        w = scipy.linalg.cho_solve(cho, xc @ yc)
        mf[tau] = _squared_correlation(target, w @ xc)
    return mf


def memory_curve_vestibular(
    cfg: ReservoirConfig,
    u: TimeSeries,
    tau_max: int = 100,
    t_window: int = 500,
    t0: int = 200,
) -> MemoryCurve:
    """Memory curve of the vestibular reservoir under a stochastic drive.

    Drives the reservoir open-loop with the scalar series u, augments
    the voltage states with their squares, and scores delays
    0..tau_max with the refined method on the fixed window
    [t0, t0 + t_window).  The leading t0 samples double as the
    transient discard.
    """
    if cfg.w_in.d != 1:
        raise InvalidInputError(
            f"memory analysis drives a scalar input, config has D={cfg.w_in.d}"
        )
    x = _scalar_input(u)
    if tau_max < 0:
        raise InvalidInputError("tau_max must be nonnegative")
    if tau_max > t0:
        raise InvalidInputError(
            f"tau_max={tau_max} exceeds the leading offset t0={t0}"
        )
    if t0 + t_window > x.size:
        raise InsufficientDataError(
            f"need at least t0+t_window={t0 + t_window} samples, got {x.size}"
        )
    states = drive_open_loop(cfg, u if isinstance(u, TimeSeries)
                             else TimeSeries(values=x[:, None], dt=1.0))
    aug = augment(states)
    mf = _refined_curve(aug, x, tau_max, int(t_window), int(t0),
                        MEMORY_RIDGE_LAMBDA)
    mf = np.clip(mf, 0.0, 1.0)
    return MemoryCurve(mf=mf, mc=float(mf.sum()), method="refined",
                       t_window=int(t_window), t0=int(t0))
