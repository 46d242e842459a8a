"""Linear readout: state augmentation, ridge regression, and scoring."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DegenerateChannelError, InvalidInputError

__all__ = ["ReadoutMatrix", "augment", "ridge_fit", "predict_open", "nrmse"]

# Below this smallest eigenvalue, an unregularized normal matrix is
# treated as rank-deficient and solved by pseudoinverse.
_RANK_EPS = 1e-12


@dataclass
class ReadoutMatrix:
    """Trained output weights W_out (D x 2N) plus the ridge strength used."""

    w_out: np.ndarray
    ridge_lambda: float

    def __post_init__(self):
        self.w_out = np.atleast_2d(np.asarray(self.w_out, dtype=float))
        if not np.all(np.isfinite(self.w_out)):
            raise InvalidInputError("readout weights must be finite")
        if self.ridge_lambda < 0:
            raise InvalidInputError("ridge_lambda must be nonnegative")


def augment(r_int: np.ndarray) -> np.ndarray:
    """Stack a state matrix on top of its elementwise square: [R; R**2]."""
    r_int = np.atleast_2d(np.asarray(r_int, dtype=float))
    return np.vstack([r_int, r_int**2])


def ridge_fit(r_aug: np.ndarray, y: np.ndarray, ridge_lambda: float) -> ReadoutMatrix:
    """Ridge regression of targets on states.

    Solves W_out = Y R^T (R R^T + lambda I)^(-1).  With lambda = 0 and a
    rank-deficient normal matrix the pseudoinverse is used instead.

    Parameters
    ----------
    r_aug : ndarray, shape (M, L)
        State matrix, one column per sample (augmented by the caller).
    y : ndarray, shape (D, L)
        Targets, one column per sample.
    ridge_lambda : float
        Tikhonov regularization strength, >= 0.
    """
    r_aug = np.atleast_2d(np.asarray(r_aug, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if r_aug.shape[1] != y.shape[1]:
        raise InvalidInputError(
            f"sample counts differ: states {r_aug.shape[1]}, targets {y.shape[1]}"
        )
    if not (np.all(np.isfinite(r_aug)) and np.all(np.isfinite(y))):
        raise InvalidInputError("states and targets must be finite")
    if ridge_lambda < 0:
        raise InvalidInputError("ridge_lambda must be nonnegative")

    m = r_aug.shape[0]
    gram = r_aug @ r_aug.T
    cross = r_aug @ y.T  # (M, D)
    if ridge_lambda == 0.0 and scipy.linalg.eigvalsh(gram)[0] < _RANK_EPS:
        w = np.linalg.pinv(gram) @ cross
    else:
        reg = gram + ridge_lambda * np.eye(m)
        try:
            factor = scipy.linalg.cho_factor(reg)
            w = scipy.linalg.cho_solve(factor, cross)
        except np.linalg.LinAlgError:
            w = np.linalg.pinv(reg) @ cross
    return ReadoutMatrix(w_out=w.T, ridge_lambda=ridge_lambda)


def predict_open(readout: ReadoutMatrix, r_aug: np.ndarray) -> np.ndarray:
    """One-step open-loop predictions: y_hat = W_out R."""
    r_aug = np.atleast_2d(np.asarray(r_aug, dtype=float))
    if readout.w_out.shape[1] != r_aug.shape[0]:
        raise InvalidInputError(
            f"readout expects {readout.w_out.shape[1]} state rows, got {r_aug.shape[0]}"
        )
    return readout.w_out @ r_aug


def nrmse(y: np.ndarray, y_hat: np.ndarray) -> float:
    """RMSE normalized by the truth's population standard deviation.

    Computed per channel and averaged, so a constant predictor at the
    channel mean scores exactly 1.
    """
    y = np.atleast_2d(np.asarray(y, dtype=float))
    y_hat = np.atleast_2d(np.asarray(y_hat, dtype=float))
    if y.shape != y_hat.shape:
        raise InvalidInputError(f"shape mismatch: {y.shape} vs {y_hat.shape}")
    if y.shape[1] < 2:
        raise InvalidInputError("need at least 2 samples per channel")
    sigma = y.std(axis=1)
    if np.any(sigma == 0):
        bad = int(np.argmax(sigma == 0))
        raise DegenerateChannelError(f"truth channel {bad} is constant")
    rmse = np.sqrt(np.mean((y - y_hat) ** 2, axis=1))
    return float(np.mean(rmse / sigma))
