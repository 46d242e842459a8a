"""The vestibular reservoir: canal mechanics driving FHN neurons.

Each node is a damped second-order mechanical element (endolymph volume
x and speed y) whose displacement injects a current sigma*x into a
FitzHugh-Nagumo neuron (voltage v, recovery w).  Nodes interact through
the connectivity matrix acting on x, and the input enters the
mechanical equation through the input weights.  Per node:

    x' = y
    y' = (-c*y - k*x)/m + (A x)_i + (W_in u)_i
    v' = d*v - v**3/3 - w + sigma*x
    w' = v + a - b*w

The recorded reservoir state is the membrane voltage v only.  The FHN
parameters sit in the fixed-point regime, which gives the network the
echo state property: trajectories forget their initial conditions under
a common input.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .dynamics import TimeSeries
from .errors import ConfigurationError, DivergenceError, InvalidInputError
from .readout import ReadoutMatrix
from .topology import ConnectivityMatrix, InputWeights

__all__ = [
    "VestibularParams",
    "ReservoirState",
    "ReservoirConfig",
    "ClosedLoopRun",
    "vestibular_derivative",
    "fhn_fixed_point",
    "drive_open_loop",
    "run_closed_loop",
]


@dataclass
class VestibularParams:
    """Physical constants of the canal + neuron node model.

    Defaults place the FHN subsystem in its stable fixed-point regime.
    """

    m: float = 2.0
    c: float = 12.0
    k: float = 50.0
    d_fhn: float = -3.8
    a_fhn: float = 0.7
    b_fhn: float = 2.0
    sigma_gain: float = 6.5

    def __post_init__(self):
        if self.m <= 0:
            raise ConfigurationError(f"fluid mass must be positive, got {self.m}")


@dataclass
class ReservoirState:
    """Full per-node state (x, y, v, w), each a length-N vector."""

    x: np.ndarray
    y: np.ndarray
    v: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float).ravel()
        self.y = np.asarray(self.y, dtype=float).ravel()
        self.v = np.asarray(self.v, dtype=float).ravel()
        self.w = np.asarray(self.w, dtype=float).ravel()
        n = self.x.size
        if not (self.y.size == self.v.size == self.w.size == n):
            raise InvalidInputError("state vectors must share one length")

    @classmethod
    def zeros(cls, n: int) -> "ReservoirState":
        return cls(np.zeros(n), np.zeros(n), np.zeros(n), np.zeros(n))

    def copy(self) -> "ReservoirState":
        return ReservoirState(
            self.x.copy(), self.y.copy(), self.v.copy(), self.w.copy()
        )


@dataclass
class ReservoirConfig:
    """Everything needed to run one reservoir."""

    n: int
    a: ConnectivityMatrix
    w_in: InputWeights
    params: VestibularParams = field(default_factory=VestibularParams)
    time_constant: float = 1.0
    substeps: int = 10

    def __post_init__(self):
        if self.a.n != self.n or self.w_in.n != self.n:
            raise ConfigurationError(
                f"size mismatch: n={self.n}, coupling {self.a.n}, input {self.w_in.n}"
            )
        if self.time_constant <= 0:
            raise ConfigurationError("time_constant must be positive")
        if self.substeps < 1:
            raise ConfigurationError("substeps must be at least 1")


@dataclass
class ClosedLoopRun:
    """Closed-loop output plus its divergence marker.

    failed_at is the step index at which the feedback left the valid
    region (None when the run completed cleanly).  n_clipped counts the
    scalar feedback entries that hit the clamp, when one was requested;
    the recorded series itself is never clipped.
    """

    series: TimeSeries
    diverged: bool
    failed_at: int | None = None
    n_clipped: int = 0


@njit(cache=True)
def _stage(a, xs, ys, vs, ws, wu, m, c, k, dfhn, afhn, bfhn, sigma, tau,
           kx, ky, kv, kw):
    n = xs.shape[0]
    for i in range(n):
        acc = 0.0
        for j in range(n):
            acc += a[i, j] * xs[j]
        kx[i] = tau * ys[i]
        ky[i] = tau * ((-c * ys[i] - k * xs[i]) / m + acc + wu[i])
        kv[i] = tau * (dfhn * vs[i] - vs[i] ** 3 / 3.0 - ws[i] + sigma * xs[i])
        kw[i] = tau * (vs[i] + afhn - bfhn * ws[i])


@njit(cache=True)
def _advance_sample(a, wu, x, y, v, w, m, c, k, dfhn, afhn, bfhn, sigma, tau,
                    h, substeps):
    """RK4-advance the state through one held-input sample interval."""
    n = x.shape[0]
    k1x = np.empty(n); k1y = np.empty(n); k1v = np.empty(n); k1w = np.empty(n)
    k2x = np.empty(n); k2y = np.empty(n); k2v = np.empty(n); k2w = np.empty(n)
    k3x = np.empty(n); k3y = np.empty(n); k3v = np.empty(n); k3w = np.empty(n)
    k4x = np.empty(n); k4y = np.empty(n); k4v = np.empty(n); k4w = np.empty(n)
    sx = np.empty(n); sy = np.empty(n); sv = np.empty(n); sw = np.empty(n)
    for _ in range(substeps):
        _stage(a, x, y, v, w, wu, m, c, k, dfhn, afhn, bfhn, sigma, tau,
               k1x, k1y, k1v, k1w)
        for i in range(n):
            sx[i] = x[i] + (0.5 * h) * k1x[i]
            sy[i] = y[i] + (0.5 * h) * k1y[i]
            sv[i] = v[i] + (0.5 * h) * k1v[i]
            sw[i] = w[i] + (0.5 * h) * k1w[i]
        _stage(a, sx, sy, sv, sw, wu, m, c, k, dfhn, afhn, bfhn, sigma, tau,
               k2x, k2y, k2v, k2w)
        for i in range(n):
            sx[i] = x[i] + (0.5 * h) * k2x[i]
            sy[i] = y[i] + (0.5 * h) * k2y[i]
            sv[i] = v[i] + (0.5 * h) * k2v[i]
            sw[i] = w[i] + (0.5 * h) * k2w[i]
        _stage(a, sx, sy, sv, sw, wu, m, c, k, dfhn, afhn, bfhn, sigma, tau,
               k3x, k3y, k3v, k3w)
        for i in range(n):
            sx[i] = x[i] + h * k3x[i]
            sy[i] = y[i] + h * k3y[i]
            sv[i] = v[i] + h * k3v[i]
            sw[i] = w[i] + h * k3w[i]
        _stage(a, sx, sy, sv, sw, wu, m, c, k, dfhn, afhn, bfhn, sigma, tau,
               k4x, k4y, k4v, k4w)
        for i in range(n):
            x[i] = x[i] + (h / 6.0) * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i])
            y[i] = y[i] + (h / 6.0) * (k1y[i] + 2.0 * k2y[i] + 2.0 * k3y[i] + k4y[i])
            v[i] = v[i] + (h / 6.0) * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i])
            w[i] = w[i] + (h / 6.0) * (k1w[i] + 2.0 * k2w[i] + 2.0 * k3w[i] + k4w[i])


@njit(cache=True)
def _state_ok(x, y, v, w):
    for i in range(x.shape[0]):
        if not (np.isfinite(x[i]) and np.isfinite(y[i])
                and np.isfinite(v[i]) and np.isfinite(w[i])):
            return False
    return True


@njit(cache=True)
def _drive_kernel(a, w_in, u_seq, x, y, v, w, m, c, k, dfhn, afhn, bfhn, sigma,
                  tau, h, substeps):
    n = x.shape[0]
    n_samples = u_seq.shape[0]
    d = u_seq.shape[1]
    out = np.empty((n, n_samples))
    wu = np.empty(n)
    for t in range(n_samples):
        for i in range(n):
            acc = 0.0
            for j in range(d):
                acc += w_in[i, j] * u_seq[t, j]
            wu[i] = acc
        _advance_sample(a, wu, x, y, v, w, m, c, k, dfhn, afhn, bfhn, sigma,
                        tau, h, substeps)
        if not _state_ok(x, y, v, w):
            return out[:, :t], t
        for i in range(n):
            out[i, t] = v[i]
    return out, -1


@njit(cache=True)
def _closed_kernel(a, w_in, w_lin, w_sq, x, y, v, w, m, c, k, dfhn, afhn, bfhn,
                   sigma, tau, h, substeps, n_steps, bound, use_clip,
                   clip_lo, clip_hi):
    n = x.shape[0]
    d = w_lin.shape[0]
    out = np.empty((n_steps, d))
    wu = np.empty(n)
    u = np.empty(d)
    n_clip = 0
    for t in range(n_steps):
        for j in range(d):
            acc = 0.0
            for i in range(n):
                acc += w_lin[j, i] * v[i] + w_sq[j, i] * (v[i] * v[i])
            u[j] = acc
        finite = True
        within = True
        for j in range(d):
            if not np.isfinite(u[j]):
                finite = False
            elif np.abs(u[j]) > bound:
                within = False
        if not finite:
            return out[:t], t, n_clip
        for j in range(d):
            out[t, j] = u[j]
        if not within:
            return out[: t + 1], t, n_clip
        if use_clip:
            for j in range(d):
                if u[j] < clip_lo[j]:
                    u[j] = clip_lo[j]
                    n_clip += 1
                elif u[j] > clip_hi[j]:
                    u[j] = clip_hi[j]
                    n_clip += 1
        for i in range(n):
            acc = 0.0
            for j in range(d):
                acc += w_in[i, j] * u[j]
            wu[i] = acc
        _advance_sample(a, wu, x, y, v, w, m, c, k, dfhn, afhn, bfhn, sigma,
                        tau, h, substeps)
        if not _state_ok(x, y, v, w):
            return out[: t + 1], t, n_clip
    return out, -1, n_clip


def _param_tuple(cfg: ReservoirConfig) -> tuple:
    p = cfg.params
    return (p.m, p.c, p.k, p.d_fhn, p.a_fhn, p.b_fhn, p.sigma_gain,
            cfg.time_constant)


def vestibular_derivative(state: ReservoirState, u, cfg: ReservoirConfig) -> ReservoirState:
    """Unscaled vector field f(r, u) of the node equations.

    The integrator multiplies this by the time constant; with the
    default time_constant = 1 the two coincide.
    """
    u = np.asarray(u, dtype=float).ravel()
    if state.x.size != cfg.n:
        raise InvalidInputError(f"state has {state.x.size} nodes, config {cfg.n}")
    if u.size != cfg.w_in.d:
        raise InvalidInputError(f"input has {u.size} channels, expected {cfg.w_in.d}")
    p = cfg.params
    dx = state.y.copy()
    dy = ((-p.c * state.y - p.k * state.x) / p.m
          + cfg.a.a @ state.x + cfg.w_in.w_in @ u)
    dv = (p.d_fhn * state.v - state.v**3 / 3.0 - state.w
          + p.sigma_gain * state.x)
    dw = state.v + p.a_fhn - p.b_fhn * state.w
    return ReservoirState(dx, dy, dv, dw)


def fhn_fixed_point(params: VestibularParams | None = None) -> tuple[float, float]:
    """Resting point (v*, w*) of an unforced node (x = y = 0).

    Solves v**3/3 + (1/b - d)v + a/b = 0 for its real root and returns
    the matching recovery value w* = (v* + a)/b.
    """
    p = params or VestibularParams()
    roots = np.roots([1.0 / 3.0, 0.0, 1.0 / p.b_fhn - p.d_fhn, p.a_fhn / p.b_fhn])
    real = roots[np.abs(roots.imag) < 1e-9].real
    v_star = float(real[np.argmin(np.abs(real))])
    return v_star, (v_star + p.a_fhn) / p.b_fhn


def drive_open_loop(
    cfg: ReservoirConfig,
    input_series: TimeSeries,
    init: ReservoirState | None = None,
    return_final_state: bool = False,
):
    """Drive the reservoir with an external input and record v.

    Each input sample is held constant (zero-order hold) for one sample
    interval dt, during which the ODE advances by ``cfg.substeps`` RK4
    steps of size dt/substeps; the voltage vector after the interval
    becomes that sample's recorded column.

    Parameters
    ----------
    cfg : ReservoirConfig
    input_series : TimeSeries
        L samples by D channels; D must match the input weights.
    init : ReservoirState, optional
        Defaults to all zeros; the washout makes the choice immaterial.
    return_final_state : bool
        When True, also return the post-run ReservoirState so a closed
        loop can continue from where the open loop stopped.

    Returns
    -------
    ndarray, shape (N, L)
        Recorded voltages, or (matrix, final_state) when requested.

    Raises
    ------
    DivergenceError
        If the state turns non-finite; carries the sample index.
    """
    if input_series.n_channels != cfg.w_in.d:
        raise InvalidInputError(
            f"input has {input_series.n_channels} channels, weights expect {cfg.w_in.d}"
        )
    state = ReservoirState.zeros(cfg.n) if init is None else init.copy()
    if state.x.size != cfg.n:
        raise InvalidInputError("initial state size does not match config")
    n_samples = input_series.n_samples
    if n_samples == 0:
        out = np.empty((cfg.n, 0))
        return (out, state) if return_final_state else out
    h = input_series.dt / cfg.substeps
    out, failed = _drive_kernel(
        cfg.a.a, cfg.w_in.w_in, np.ascontiguousarray(input_series.values),
        state.x, state.y, state.v, state.w, *_param_tuple(cfg), h, cfg.substeps,
    )
    if failed >= 0:
        raise DivergenceError(
            f"reservoir state non-finite at sample {failed}", step_index=failed
        )
    return (out, state) if return_final_state else out


def run_closed_loop(
    cfg: ReservoirConfig,
    readout: ReadoutMatrix,
    init: ReservoirState,
    n_steps: int,
    dt: float,
    bound: float = 5.0,
    clip_bounds: np.ndarray | None = None,
) -> ClosedLoopRun:
    """Run the reservoir autonomously, feeding its own predictions back.

    At each step the prediction u = W_out [v; v**2] is recorded and then
    held as the input for one sample interval.  A non-finite prediction,
    a prediction beyond ``bound`` in magnitude, or a non-finite internal
    state stops the run; the partial series is returned with the
    divergence marker set rather than raising.

    Parameters
    ----------
    cfg : ReservoirConfig
    readout : ReadoutMatrix
        Shape D x 2N with D equal to the input dimension.
    init : ReservoirState
        Starting state, normally the final open-loop state.
    n_steps : int
    dt : float
        Sample interval of the emitted series.
    bound : float
        Divergence threshold, in the units the readout emits.
    clip_bounds : ndarray of shape (D, 2), optional
        Per-channel (low, high) clamp applied to the fed-back value
        only; the recorded prediction stays untouched.  Keeps a slowly
        drifting loop inside the region the readout was trained on.
    """
    d = cfg.w_in.d
    if readout.w_out.shape != (d, 2 * cfg.n):
        raise InvalidInputError(
            f"readout shape {readout.w_out.shape} incompatible with "
            f"D={d}, N={cfg.n}"
        )
    if n_steps < 0:
        raise ConfigurationError("n_steps must be nonnegative")
    if clip_bounds is None:
        use_clip = False
        clip_lo = np.zeros(d)
        clip_hi = np.zeros(d)
    else:
        clip_arr = np.asarray(clip_bounds, dtype=float)
        if clip_arr.shape != (d, 2):
            raise InvalidInputError(
                f"clip_bounds shape {clip_arr.shape}, expected ({d}, 2)"
            )
        if not np.all(np.isfinite(clip_arr)) or np.any(
            clip_arr[:, 0] >= clip_arr[:, 1]
        ):
            raise InvalidInputError("clip_bounds rows must be finite (low, high)")
        use_clip = True
        clip_lo = np.ascontiguousarray(clip_arr[:, 0])
        clip_hi = np.ascontiguousarray(clip_arr[:, 1])
    state = init.copy()
    if n_steps == 0:
        series = TimeSeries(values=np.empty((0, d)), dt=dt,
                            channel_names=tuple(f"u{i+1}" for i in range(d)))
        return ClosedLoopRun(series=series, diverged=False)
    w_lin = np.ascontiguousarray(readout.w_out[:, : cfg.n])
    w_sq = np.ascontiguousarray(readout.w_out[:, cfg.n :])
    h = dt / cfg.substeps
    out, failed, n_clip = _closed_kernel(
        cfg.a.a, cfg.w_in.w_in, w_lin, w_sq,
        state.x, state.y, state.v, state.w, *_param_tuple(cfg),
        h, cfg.substeps, n_steps, bound, use_clip, clip_lo, clip_hi,
    )
    series = TimeSeries(values=out.copy(), dt=dt,
                        channel_names=tuple(f"u{i+1}" for i in range(d)))
    if failed >= 0:
        return ClosedLoopRun(series=series, diverged=True, failed_at=int(failed),
                             n_clipped=int(n_clip))
    return ClosedLoopRun(series=series, diverged=False, n_clipped=int(n_clip))
