"""Circular block bootstrap of chunks, block-length selection, and the risk bound."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .core import (
    CIRCULAR,
    LINEAR,
    ChunkMatrix,
    DegenerateDesignError,
    InputError,
    RngStream,
    SeriesLike,
    as_series,
    as_stream,
    embed,
    empirical_quantile,
)
from .model import batch_risk, empirical_risk, fit_ar, fit_batch

log = logging.getLogger(__name__)

MAX_FAILED_FRACTION = 0.01
# replicates stacked per vectorised fit; bounds peak memory at ~batch * t0 * d floats
_BATCH = 128


@dataclass(frozen=True)
class CbbPlan:
    """Block layout of one circular block bootstrap resample."""

    ell: int
    n_chunks_available: int
    n_rows_out: int

    def __post_init__(self):
        if self.ell < 1:
            raise InputError(f"block length must be >= 1, got {self.ell}")
        if self.n_rows_out < 1:
            raise InputError(f"resample must have >= 1 rows, got {self.n_rows_out}")
        if self.n_chunks_available < 1:
            raise InputError("no chunks to resample from")

    @property
    def b(self) -> int:
        return -(-self.n_rows_out // self.ell)


def cbb_indices(plan: CbbPlan, gen: np.random.Generator) -> np.ndarray:
    """Circular chunk row indices of one resample (0-based).

    Draws ``plan.b`` block starts uniformly from all ``t`` circular chunks;
    each block contributes ``ell`` consecutive rows, wrapping mod ``t``, and
    the concatenation is truncated to ``n_rows_out``.
    """
    starts = gen.integers(0, plan.n_chunks_available, size=plan.b)
    return block_rows(starts, plan)


def block_rows(starts: np.ndarray, plan: CbbPlan) -> np.ndarray:
    """Concatenate the blocks beginning at ``starts`` and truncate the tail.

    ``starts`` has shape ``(..., b)``; leading axes index separate resamples.
    """
    starts = np.asarray(starts, dtype=np.intp)
    if starts.shape[-1:] != (plan.b,):
        raise InputError(f"expected {plan.b} block starts, got shape {starts.shape}")
    idx = (starts[..., :, None] + np.arange(plan.ell)) % plan.n_chunks_available
    return idx.reshape(*starts.shape[:-1], -1)[..., : plan.n_rows_out]


def cbb_resample(circular_chunks: ChunkMatrix, plan: CbbPlan, rng: RngStream) -> ChunkMatrix:
    """One circular block bootstrap resample of the chunk rows."""
    if circular_chunks.mode != CIRCULAR:
        raise InputError("cbb_resample needs circular-mode chunks")
    if plan.n_chunks_available != circular_chunks.n_chunks:
        raise InputError(
            f"plan expects {plan.n_chunks_available} chunks, matrix has {circular_chunks.n_chunks}"
        )
    idx = cbb_indices(plan, as_stream(rng).generator())
    return ChunkMatrix(circular_chunks.values[idx], CIRCULAR)


def block_length(series: SeriesLike) -> int:
    """Automatic circular-bootstrap block length (Politis & White, 2004).

    Flat-top lag window with the bandwidth picked from the first run of
    ``K_n`` insignificant autocorrelations, and the circular-bootstrap
    constant ``D = 4/3 * (spectral mass at 0)^2``.  Deterministic.
    """
    x = as_series(series).values
    n = x.size
    if n < 10:
        raise InputError(f"block length selection needs >= 10 observations, got {n}")
    if np.ptp(x) == 0.0:
        return 1

    kn = max(5, math.ceil(math.sqrt(math.log10(n))))
    m_max = math.ceil(math.sqrt(n)) + kn
    max_lag = min(n - 1, m_max + kn)
    xc = x - x.mean()
    acov = np.array([np.dot(xc[: n - k], xc[k:]) / n for k in range(max_lag + 1)])
    rho = acov / acov[0]
    band = 2.0 * math.sqrt(math.log10(n) / n)

    insignificant = np.abs(rho[1:]) < band  # insignificant[k-1] refers to lag k
    m_hat = None
    for m in range(1, m_max + 1):
        hi = m + kn
        if hi > max_lag:
            break
        if insignificant[m:hi].all():
            m_hat = m
            break
    if m_hat is None:
        m_hat = min(m_max, max_lag // 2)

    big_m = min(2 * m_hat, max_lag)
    lags = np.arange(1, big_m + 1)
    w = np.where(lags <= big_m / 2, 1.0, 2.0 * (1.0 - lags / big_m))
    g_hat = 2.0 * np.sum(w * lags * acov[1 : big_m + 1])
    s_hat = acov[0] + 2.0 * np.sum(w * acov[1 : big_m + 1])
    d_hat = (4.0 / 3.0) * s_hat**2

    upper = math.ceil(min(3.0 * math.sqrt(n), n / 3.0))
    if d_hat <= 0.0:
        return upper
    raw = (2.0 * g_hat**2 / d_hat) ** (1.0 / 3.0) * n ** (1.0 / 3.0)
    return int(min(upper, max(1, math.floor(raw + 0.5))))


@dataclass(frozen=True)
class BoundResult:
    train_error: float
    eta_samples: np.ndarray
    eta_quantile: float
    upper_bound: float
    alpha: float
    ell_used: int
    seed: int
    n_failed: int = 0

    def requantile(self, alpha: float) -> "BoundResult":
        """Same bootstrap draws, different nominal level."""
        q = empirical_quantile(self.eta_samples, 1.0 - alpha)
        return BoundResult(
            self.train_error, self.eta_samples, q, self.train_error + q, alpha,
            self.ell_used, self.seed, self.n_failed,
        )


def bootstrap_eta(
    series: SeriesLike, d: int, B: int, ell: int, rng: RngStream
) -> tuple[np.ndarray, int]:
    """Bootstrap generalisation-error draws ``test* - train*``.

    Replicate ``i`` uses stream ``rng.spawn(i)``, drawing the training blocks
    then the (independent) test blocks.  Both resamples have ``t - d + 1``
    rows.  Returns the draws of the successful replicates, in replicate order,
    and the number of failed (singular) fits.
    """
    s = as_series(series)
    t = len(s)
    t0 = t - d + 1
    circ = embed(s, d, CIRCULAR).values
    plan = CbbPlan(int(ell), t, t0)
    rng = as_stream(rng)

    out = []
    n_failed = 0
    for lo in range(0, B, _BATCH):
        hi = min(B, lo + _BATCH)
        idx_train = np.empty((hi - lo, t0), dtype=np.intp)
        idx_test = np.empty_like(idx_train)
        for i in range(lo, hi):
            gen = rng.spawn(i).generator()
            idx_train[i - lo] = cbb_indices(plan, gen)
            idx_test[i - lo] = cbb_indices(plan, gen)
        train = circ[idx_train]
        test = circ[idx_test]
        theta, ok = fit_batch(train[..., :-1], train[..., -1])
        n_failed += int((~ok).sum())
        theta = theta[ok]
        eta = batch_risk(test[ok, :, :-1], test[ok, :, -1], theta) - batch_risk(
            train[ok, :, :-1], train[ok, :, -1], theta
        )
        out.append(eta)
    return np.concatenate(out), n_failed


def gen_error_bound(
    series: SeriesLike,
    d: int,
    B: int = 500,
    alpha: float = 0.1,
    ell: Union[int, str] = "auto",
    rng: Union[RngStream, int, None] = None,
) -> BoundResult:
    """Upper ``1 - alpha`` confidence bound on the forecasting risk of an AR(d-1) fit.

    Fits on the observed chunks, then approximates the distribution of the
    generalisation error with ``B`` circular block bootstrap train/test pairs;
    the bound is the training error plus the ``1 - alpha`` order statistic of
    the bootstrap draws.

    Raises
    ------
    DegenerateDesignError
        If the real-data fit is singular, or more than 1% of the bootstrap
        fits are.
    """
    s = as_series(series)
    t = len(s)
    if d < 2:
        raise InputError("d must be >= 2 for an AR predictor")
    if t < 2 * d:
        raise InputError(f"series of length {t} is too short for d={d} (need >= {2 * d})")
    if B < 1:
        raise InputError("B must be >= 1")
    if not 0.0 < alpha < 1.0:
        raise InputError(f"alpha must lie in (0, 1), got {alpha}")
    rng = as_stream(rng)

    lin = embed(s, d, LINEAR)
    model = fit_ar(lin)
    train_error = empirical_risk(lin, model).value

    ell_used = block_length(s) if ell == "auto" else int(ell)
    eta, n_failed = bootstrap_eta(s, d, B, ell_used, rng)
    if n_failed > MAX_FAILED_FRACTION * B:
        raise DegenerateDesignError(f"{n_failed} of {B} bootstrap fits were singular")
    if n_failed:
        log.info("dropped %d singular bootstrap replicates of %d", n_failed, B)
    eta.flags.writeable = False
    q = empirical_quantile(eta, 1.0 - alpha)
    return BoundResult(train_error, eta, q, train_error + q, alpha, ell_used, rng.seed, n_failed)
