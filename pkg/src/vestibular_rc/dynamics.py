"""Benchmark chaotic systems and fixed-step integration.

Two three-dimensional autonomous flows are provided as forecasting
benchmarks: the Lorenz system and a three-species resource/consumer/
predator food chain.  Both are integrated with a classical fixed-step
fourth-order Runge-Kutta scheme, subsampled to the working sample
interval, and min-max normalized to [0, 1] per channel.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import (
    ConfigurationError,
    DegenerateChannelError,
    DivergenceError,
    InvalidInputError,
    SingularityError,
)

__all__ = [
    "TimeSeries",
    "LorenzParams",
    "FoodChainParams",
    "system_derivative",
    "rk4_integrate",
    "generate_benchmark",
    "normalize_minmax",
    "denormalize_minmax",
]

# Denominator guard for the food-chain Holling terms.
_DENOM_FLOOR = 1e-12

_LORENZ = 0
_FOOD_CHAIN = 1


@dataclass
class TimeSeries:
    """A regularly sampled multichannel series.

    Parameters
    ----------
    values : ndarray, shape (L, D)
        One row per sample.  Dimensionless after normalization.
    dt : float
        Sample interval in model time units.
    channel_names : tuple of str
        D labels; autogenerated as ``ch1..chD`` when omitted.
    norm_record : ndarray, shape (D, 2), optional
        Per-channel (min, max) of the raw data this series was
        normalized from.  Present iff the series is normalized, in
        which case every entry lies in [0, 1].
    """

    values: np.ndarray
    dt: float
    channel_names: tuple = ()
    norm_record: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if self.dt <= 0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if not np.all(np.isfinite(self.values)):
            raise InvalidInputError("TimeSeries values must be finite")
        if not self.channel_names:
            self.channel_names = tuple(
                f"ch{i + 1}" for i in range(self.values.shape[1])
            )
        if len(self.channel_names) != self.values.shape[1]:
            raise ConfigurationError("channel_names length must match D")
        if self.norm_record is not None:
            self.norm_record = np.asarray(self.norm_record, dtype=float)
            if self.norm_record.shape != (self.values.shape[1], 2):
                raise ConfigurationError("norm_record must have shape (D, 2)")

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_channels(self) -> int:
        return self.values.shape[1]

    def channel(self, index: int) -> np.ndarray:
        """Return one channel as a flat array."""
        return self.values[:, index]

    def denormalized(self) -> np.ndarray:
        """Map the values back to raw coordinates via ``norm_record``."""
        if self.norm_record is None:
            raise ConfigurationError("series carries no normalization record")
        return denormalize_minmax(self.values, self.norm_record)


@dataclass
class LorenzParams:
    """Parameters of the Lorenz flow; classic chaotic defaults."""

    sigma_l: float = 10.0
    rho_l: float = 28.0
    beta_l: float = 8.0 / 3.0

    def as_array(self) -> np.ndarray:
        return np.array([self.sigma_l, self.rho_l, self.beta_l], dtype=float)


@dataclass
class FoodChainParams:
    """Parameters of the three-species food-chain flow.

    cap_k is the resource carrying capacity; (a1, b1) and (a2, b2) set
    the consumer and predator metabolic/ingestion rates; a10 and a20
    are the half-saturation constants of the two Holling type II
    functional responses.
    """

    cap_k: float = 0.98
    a1: float = 0.4
    b1: float = 2.009
    a2: float = 0.08
    b2: float = 2.876
    a10: float = 0.16129
    a20: float = 0.5

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.cap_k, self.a1, self.b1, self.a2, self.b2, self.a10, self.a20],
            dtype=float,
        )


_DEFAULT_PARAMS = {"lorenz": LorenzParams, "food_chain": FoodChainParams}

# Default start states; anything in the attractor basin works since the
# transient is discarded.
_DEFAULT_STATE0 = {
    "lorenz": (1.0, 1.0, 1.0),
    "food_chain": (0.8, 0.2, 9.0),
}


def _system_id(system: str) -> int:
    if system == "lorenz":
        return _LORENZ
    if system == "food_chain":
        return _FOOD_CHAIN
    raise ConfigurationError(f"unknown system {system!r}")


@njit(cache=True)
def _rhs(sys_id, p, s, out):
    if sys_id == 0:
        out[0] = p[0] * (s[1] - s[0])
        out[1] = s[0] * (p[1] - s[2]) - s[1]
        out[2] = s[0] * s[1] - p[2] * s[2]
    else:
        u1 = s[0]
        u2 = s[1]
        u3 = s[2]
        out[0] = u1 * (1.0 - u1 / p[0]) - p[1] * p[2] * u2 * u1 / (u1 + p[5])
        out[1] = (
            p[1] * u2 * (p[2] * u1 / (u1 + p[5]) - 1.0)
            - p[3] * p[4] * u3 * u2 / (u2 + p[6])
        )
        out[2] = p[3] * u3 * (p[4] * u2 / (u2 + p[6]) - 1.0)


@njit(cache=True)
def _rk4_trajectory(sys_id, p, s0, h, n_steps):
    """Fixed-step RK4 sweep; returns (trajectory, first bad step or -1)."""
    dim = s0.shape[0]
    traj = np.empty((n_steps + 1, dim))
    s = np.empty(dim)
    for j in range(dim):
        s[j] = s0[j]
        traj[0, j] = s0[j]
    k1 = np.empty(dim)
    k2 = np.empty(dim)
    k3 = np.empty(dim)
    k4 = np.empty(dim)
    tmp = np.empty(dim)
    for i in range(n_steps):
        _rhs(sys_id, p, s, k1)
        for j in range(dim):
            tmp[j] = s[j] + (0.5 * h) * k1[j]
        _rhs(sys_id, p, tmp, k2)
        for j in range(dim):
            tmp[j] = s[j] + (0.5 * h) * k2[j]
        _rhs(sys_id, p, tmp, k3)
        for j in range(dim):
            tmp[j] = s[j] + h * k3[j]
        _rhs(sys_id, p, tmp, k4)
        for j in range(dim):
            s[j] = s[j] + (h / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
        ok = True
        for j in range(dim):
            if not np.isfinite(s[j]):
                ok = False
        if not ok:
            return traj[: i + 1], i
        for j in range(dim):
            traj[i + 1, j] = s[j]
    return traj, -1


@njit(cache=True)
def _rk4_sampled(sys_id, p, s0, h, stride, n_samples):
    """RK4 sweep recording every ``stride``-th state; (samples, bad step or -1).

    Arithmetic is step-for-step identical to :func:`_rk4_trajectory`; only
    the recording differs, so long runs stay in O(n_samples) memory.
    """
    dim = s0.shape[0]
    out = np.empty((n_samples, dim))
    s = np.empty(dim)
    for j in range(dim):
        s[j] = s0[j]
        out[0, j] = s0[j]
    k1 = np.empty(dim)
    k2 = np.empty(dim)
    k3 = np.empty(dim)
    k4 = np.empty(dim)
    tmp = np.empty(dim)
    for i in range(1, n_samples):
        for sub in range(stride):
            _rhs(sys_id, p, s, k1)
            for j in range(dim):
                tmp[j] = s[j] + (0.5 * h) * k1[j]
            _rhs(sys_id, p, tmp, k2)
            for j in range(dim):
                tmp[j] = s[j] + (0.5 * h) * k2[j]
            _rhs(sys_id, p, tmp, k3)
            for j in range(dim):
                tmp[j] = s[j] + h * k3[j]
            _rhs(sys_id, p, tmp, k4)
            for j in range(dim):
                s[j] = s[j] + (h / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
            ok = True
            for j in range(dim):
                if not np.isfinite(s[j]):
                    ok = False
            if not ok:
                return out[:i], (i - 1) * stride + sub
        for j in range(dim):
            out[i, j] = s[j]
    return out, -1


def system_derivative(system: str, state, params=None) -> np.ndarray:
    """Right-hand side of one benchmark flow.

    Parameters
    ----------
    system : {'lorenz', 'food_chain'}
    state : array-like, shape (3,)
    params : LorenzParams or FoodChainParams, optional
        Defaults to the benchmark's standard chaotic parameter set.

    Returns
    -------
    ndarray, shape (3,)
    """
    sys_id = _system_id(system)
    state = np.asarray(state, dtype=float)
    if state.shape != (3,):
        raise InvalidInputError(f"state must have shape (3,), got {state.shape}")
    if not np.all(np.isfinite(state)):
        raise InvalidInputError("state must be finite")
    if params is None:
        params = _DEFAULT_PARAMS[system]()
    p = params.as_array()
    if sys_id == _FOOD_CHAIN:
        if abs(state[0] + p[5]) < _DENOM_FLOOR or abs(state[1] + p[6]) < _DENOM_FLOOR:
            raise SingularityError("food-chain functional-response denominator vanishes")
    out = np.empty(3)
    _rhs(sys_id, p, state, out)
    return out


def rk4_integrate(deriv, state0, h: float, n_steps: int) -> np.ndarray:
    """Classical fourth-order Runge-Kutta trajectory.

    Parameters
    ----------
    deriv : callable
        Maps a state vector to its time derivative.
    state0 : array-like
        Initial state; included as row 0 of the result.
    h : float
        Step size, must be positive.
    n_steps : int
        Number of steps, must be nonnegative.

    Returns
    -------
    ndarray, shape (n_steps + 1, D)

    Raises
    ------
    DivergenceError
        If the state becomes non-finite; carries the failing step index.
    """
    if h <= 0:
        raise ConfigurationError(f"h must be positive, got {h}")
    if n_steps < 0:
        raise ConfigurationError(f"n_steps must be nonnegative, got {n_steps}")
    s = np.asarray(state0, dtype=float).ravel()
    traj = np.empty((n_steps + 1, s.size))
    traj[0] = s
    for i in range(n_steps):
        k1 = np.asarray(deriv(s))
        k2 = np.asarray(deriv(s + (0.5 * h) * k1))
        k3 = np.asarray(deriv(s + (0.5 * h) * k2))
        k4 = np.asarray(deriv(s + h * k3))
        s = s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(s)):
            raise DivergenceError(f"state non-finite at step {i}", step_index=i)
        traj[i + 1] = s
    return traj


def normalize_minmax(raw) -> tuple[np.ndarray, np.ndarray]:
    """Per-channel min-max normalization to [0, 1].

    Returns
    -------
    normalized : ndarray, same shape as ``raw``
    record : ndarray, shape (D, 2)
        Per-channel (min, max), sufficient to invert the map.
    """
    raw = np.atleast_2d(np.asarray(raw, dtype=float))
    lo = raw.min(axis=0)
    hi = raw.max(axis=0)
    span = hi - lo
    if np.any(span <= 0):
        bad = int(np.argmax(span <= 0))
        raise DegenerateChannelError(f"channel {bad} is constant; cannot normalize")
    record = np.stack([lo, hi], axis=1)
    return (raw - lo) / span, record


def denormalize_minmax(normalized, record) -> np.ndarray:
    """Inverse of :func:`normalize_minmax` given its (min, max) record."""
    normalized = np.atleast_2d(np.asarray(normalized, dtype=float))
    record = np.asarray(record, dtype=float)
    lo = record[:, 0]
    hi = record[:, 1]
    return normalized * (hi - lo) + lo


def generate_benchmark(
    system: str,
    params=None,
    h: float = 1e-3,
    dt: float = 0.1,
    n_samples: int = 10000,
    transient_samples: int = 1000,
    state0=None,
) -> TimeSeries:
    """Integrate a benchmark flow and emit its normalized sampled series.

    The flow is integrated at step ``h``, subsampled every ``dt/h``
    steps, the first ``transient_samples`` samples are discarded so the
    emitted window sits on the attractor, and the result is min-max
    normalized per channel.

    Parameters
    ----------
    system : {'lorenz', 'food_chain'}
    params : optional parameter dataclass for the chosen system
    h : float
        Integrator step.
    dt : float
        Sample interval; ``dt/h`` must be an integer stride.
    n_samples : int
        Emitted sample count (post-transient).
    transient_samples : int
        Samples discarded from the front, counted at the ``dt`` rate.
    state0 : array-like, shape (3,), optional

    Returns
    -------
    TimeSeries
        With ``norm_record`` set and all values in [0, 1].
    """
    sys_id = _system_id(system)
    if n_samples < 1:
        raise ConfigurationError("n_samples must be at least 1")
    if transient_samples < 0:
        raise ConfigurationError("transient_samples must be nonnegative")
    ratio = dt / h
    stride = int(round(ratio))
    if stride < 1 or abs(ratio - stride) > 1e-9:
        raise ConfigurationError(f"dt/h = {ratio} is not an integer stride")
    if params is None:
        params = _DEFAULT_PARAMS[system]()
    if state0 is None:
        state0 = _DEFAULT_STATE0[system]
    s0 = np.asarray(state0, dtype=float).ravel()
    if s0.shape != (3,):
        raise InvalidInputError("state0 must have shape (3,)")

    total = transient_samples + n_samples
    sampled, failed = _rk4_sampled(sys_id, params.as_array(), s0, h, stride, total)
    if failed >= 0:
        raise DivergenceError(
            f"{system} integration non-finite at step {failed}", step_index=failed
        )
    emitted = sampled[transient_samples:]
    normalized, record = normalize_minmax(emitted)
    return TimeSeries(
        values=normalized,
        dt=dt,
        channel_names=("u1", "u2", "u3"),
        norm_record=record,
    )
