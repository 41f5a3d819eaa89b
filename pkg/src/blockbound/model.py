"""AR(p) least squares without intercept, squared-error loss and empirical risk."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .core import ChunkMatrix, DegenerateDesignError, DimensionError, InputError

RCOND_MIN = 1e-12


@dataclass(frozen=True)
class ArModel:
    """Lag coefficients of a no-intercept AR(p) predictor.

    ``theta[j]`` multiplies chunk column ``j``, so the most recent lag is
    ``theta[-1]``.
    """

    theta: np.ndarray

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float).reshape(-1)
        if theta.size < 1:
            raise InputError("an AR model needs at least one lag")
        if not np.all(np.isfinite(theta)):
            raise InputError("AR coefficients must be finite")
        theta.flags.writeable = False
        object.__setattr__(self, "theta", theta)

    @property
    def p(self) -> int:
        return self.theta.size

    @property
    def d(self) -> int:
        return self.theta.size + 1


@dataclass(frozen=True)
class RiskEstimate:
    value: float
    n_terms: int


def _as_array(chunks: Union[ChunkMatrix, np.ndarray]) -> np.ndarray:
    arr = chunks.values if isinstance(chunks, ChunkMatrix) else np.asarray(chunks, dtype=float)
    if arr.ndim != 2:
        raise DimensionError("chunks must be a 2-D matrix")
    return arr


def fit_batch(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares fits for a stack of designs.

    Parameters
    ----------
    X : ndarray, shape (B, n, p)
    y : ndarray, shape (B, n)

    Returns
    -------
    theta : ndarray, shape (B, p)
        Coefficients; rows of failed fits are NaN.
    ok : ndarray of bool, shape (B,)
        False where the design's reciprocal condition number is below
        ``RCOND_MIN`` (or not finite).
    """
    q, r = np.linalg.qr(X)
    qty = np.einsum("bnp,bn->bp", q, y)
    sv = np.linalg.svd(r, compute_uv=False)
    with np.errstate(divide="ignore", invalid="ignore"):
        rcond = sv[:, -1] / sv[:, 0]
    ok = np.isfinite(rcond) & (rcond >= RCOND_MIN)
    p = X.shape[2]
    r_safe = np.where(ok[:, None, None], r, np.eye(p))
    theta = np.linalg.solve(r_safe, qty[..., None])[..., 0]
    theta[~ok] = np.nan
    return theta, ok


def batch_risk(X: np.ndarray, y: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Mean squared residual of each stacked design under its own coefficients."""
    resid = y - np.einsum("bnp,bp->bn", X, theta)
    return np.mean(resid * resid, axis=1)


def fit_ar(chunks: Union[ChunkMatrix, np.ndarray]) -> ArModel:
    """Fit an AR(d-1) model by least squares: last column on the others.

    Raises
    ------
    DegenerateDesignError
        If the lag matrix is rank deficient or its reciprocal condition
        number is below ``RCOND_MIN``.
    """
    arr = _as_array(chunks)
    n, d = arr.shape
    if d < 2:
        raise DimensionError("AR fitting needs chunks of width d >= 2")
    if n < d - 1:
        raise InputError(f"{n} chunks cannot identify {d - 1} coefficients")
    theta, ok = fit_batch(arr[None, :, :-1], arr[None, :, -1])
    if not ok[0]:
        raise DegenerateDesignError("lag Gram matrix is singular or ill-conditioned")
    return ArModel(theta[0])


def loss(z, model: ArModel) -> float:
    """Squared one-step prediction error ``(z_d - theta . z_{1:d-1})**2``."""
    z = np.asarray(z, dtype=float).reshape(-1)
    if z.size != model.d:
        raise DimensionError(f"chunk has length {z.size}, model expects {model.d}")
    resid = z[-1] - float(np.dot(model.theta, z[:-1]))
    return resid * resid


def empirical_risk(chunks: Union[ChunkMatrix, np.ndarray], model: ArModel) -> RiskEstimate:
    """Average loss of ``model`` over every chunk row."""
    arr = _as_array(chunks)
    if arr.shape[0] == 0:
        raise InputError("cannot evaluate risk on zero chunks")
    if arr.shape[1] != model.d:
        raise DimensionError(f"chunk width {arr.shape[1]} does not match model dimension {model.d}")
    resid = arr[:, -1] - arr[:, :-1] @ model.theta
    return RiskEstimate(float(np.mean(resid * resid)), arr.shape[0])
