"""Reservoir connectivity construction.

Coupled reservoirs use a random sparse symmetric matrix whose spectrum
is affinely remapped onto a strictly negative interval with a pinned
spectral radius.  Uncoupled reservoirs are diagonal.  Conversions in
both directions preserve the eigenvalue list exactly, which is the
condition under which the two topologies carry identical linear memory.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConfigurationError, InvalidInputError

__all__ = [
    "ConnectivityMatrix",
    "InputWeights",
    "build_coupled",
    "build_uncoupled",
    "match_spectrum_uncoupled",
    "couple_with_spectrum",
    "build_input_weights",
]

# Eigenvalues are kept at or below -delta = -1e-3*rho so fading memory
# holds strictly; 0 is never an admissible eigenvalue.
DELTA_FRACTION = 1e-3


@dataclass
class ConnectivityMatrix:
    """An N x N reservoir coupling matrix with its spectral summary.

    kind is 'coupled' (symmetric, generically non-diagonal) or
    'uncoupled' (diagonal).  All eigenvalues are strictly negative and
    the largest magnitude equals ``spectral_radius``.
    """

    a: np.ndarray
    kind: str
    spectral_radius: float
    eigenvalues: np.ndarray

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)
        self.eigenvalues = np.sort(np.asarray(self.eigenvalues, dtype=float))
        if self.kind not in ("coupled", "uncoupled"):
            raise ConfigurationError(f"unknown kind {self.kind!r}")
        if self.a.ndim != 2 or self.a.shape[0] != self.a.shape[1]:
            raise InvalidInputError("connectivity matrix must be square")

    @property
    def n(self) -> int:
        return self.a.shape[0]


@dataclass
class InputWeights:
    """An N x D input weight matrix with entries in [-gamma, gamma]."""

    w_in: np.ndarray
    gamma: float

    def __post_init__(self):
        self.w_in = np.atleast_2d(np.asarray(self.w_in, dtype=float))

    @property
    def n(self) -> int:
        return self.w_in.shape[0]

    @property
    def d(self) -> int:
        return self.w_in.shape[1]


def _check_n_rho(n: int, rho: float) -> None:
    if n < 1:
        raise ConfigurationError(f"n must be at least 1, got {n}")
    if rho <= 0:
        raise ConfigurationError(f"spectral radius must be positive, got {rho}")


def build_coupled(
    n: int, density: float, rho: float, rng: np.random.Generator
) -> ConnectivityMatrix:
    """Random sparse symmetric coupling with spectrum in [-rho, -delta].

    A symmetric sparsity pattern with approximately ``density * n**2``
    nonzeros is filled with uniform [-1, 1] entries, eigendecomposed,
    and its spectrum affinely mapped onto [-rho, -delta] with
    delta = 1e-3 * rho.  The affine map preserves eigenvectors, so off
    the diagonal the sparsity pattern survives; the smallest eigenvalue
    lands exactly at -rho.

    Parameters
    ----------
    n : int
        Node count.
    density : float
        Link density in (0, 1].
    rho : float
        Target spectral radius.
    rng : numpy Generator
    """
    _check_n_rho(n, rho)
    if not 0 < density <= 1:
        raise ConfigurationError(f"density must be in (0, 1], got {density}")

    # Sample unordered pairs (including the diagonal) so the symmetrized
    # pattern has density*n^2 expected nonzeros.
    mask_upper = np.triu(rng.random((n, n)) < density)
    values = np.triu(rng.uniform(-1.0, 1.0, size=(n, n)))
    raw = mask_upper * values
    raw = raw + np.triu(raw, 1).T

    eigvals, eigvecs = scipy.linalg.eigh(raw)
    delta = DELTA_FRACTION * rho
    lo, hi = eigvals[0], eigvals[-1]
    if hi - lo < 1e-12:
        # Degenerate spectrum (n=1 or all-equal): collapse to -rho.
        scale, shift = 0.0, -rho
    else:
        scale = (rho - delta) / (hi - lo)
        shift = -rho - scale * lo
    mapped = scale * eigvals + shift
    a = scale * raw + shift * np.eye(n)
    return ConnectivityMatrix(
        a=a, kind="coupled", spectral_radius=rho, eigenvalues=mapped
    )


def build_uncoupled(n: int, rho: float, rng: np.random.Generator) -> ConnectivityMatrix:
    """Diagonal coupling with entries uniform on [-rho, -delta].

    One randomly chosen entry is pinned to -rho so the spectral radius
    is exact.
    """
    _check_n_rho(n, rho)
    delta = DELTA_FRACTION * rho
    diag = rng.uniform(-rho, -delta, size=n)
    diag[rng.integers(n)] = -rho
    return ConnectivityMatrix(
        a=np.diag(diag), kind="uncoupled", spectral_radius=rho, eigenvalues=diag
    )


def match_spectrum_uncoupled(coupled: ConnectivityMatrix) -> ConnectivityMatrix:
    """Diagonal reservoir sharing the coupled reservoir's spectrum exactly."""
    if coupled.kind != "coupled":
        raise InvalidInputError("input must be a coupled connectivity matrix")
    if not np.allclose(coupled.a, coupled.a.T, atol=1e-12):
        raise InvalidInputError("coupled matrix must be symmetric")
    eigs = coupled.eigenvalues
    return ConnectivityMatrix(
        a=np.diag(eigs),
        kind="uncoupled",
        spectral_radius=coupled.spectral_radius,
        eigenvalues=eigs,
    )


def couple_with_spectrum(
    uncoupled: ConnectivityMatrix, rng: np.random.Generator
) -> ConnectivityMatrix:
    """Dense symmetric reservoir sharing the uncoupled spectrum exactly.

    A = Q diag(lambda) Q^T with Q a random orthogonal matrix obtained by
    orthonormalizing a standard-normal matrix.
    """
    if uncoupled.kind != "uncoupled":
        raise InvalidInputError("input must be an uncoupled connectivity matrix")
    n = uncoupled.n
    eigs = uncoupled.eigenvalues
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    q = q * np.sign(np.diag(r))  # fix the sign convention for determinism
    a = (q * eigs) @ q.T
    return ConnectivityMatrix(
        a=a,
        kind="coupled",
        spectral_radius=uncoupled.spectral_radius,
        eigenvalues=eigs,
    )


def build_input_weights(
    n: int, d: int, gamma: float, rng: np.random.Generator
) -> InputWeights:
    """Input weight matrix with i.i.d. uniform entries on [-gamma, gamma]."""
    if n < 1 or d < 1:
        raise ConfigurationError("n and d must be at least 1")
    if gamma < 0:
        raise ConfigurationError(f"gamma must be nonnegative, got {gamma}")
    return InputWeights(w_in=rng.uniform(-gamma, gamma, size=(n, d)), gamma=gamma)
