"""Contiguous k-fold cross-validated risk for AR models on dependent data."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .core import LINEAR, DegenerateDesignError, InputError, RngStream, SeriesLike, as_series, as_stream, embed
from .dgp import DEFAULT_BURNIN, DgpSpec, simulate
from .model import RiskEstimate, empirical_risk, fit_ar

log = logging.getLogger(__name__)

MAX_FAILED_FRACTION = 0.02


@dataclass(frozen=True)
class FoldAssignment:
    """Contiguous folds over ``n_chunks`` chunk rows.

    The first ``n_chunks % k`` folds take one extra chunk each.
    """

    k: int
    n_chunks: int

    def __post_init__(self):
        if self.k < 2:
            raise InputError(f"k must be >= 2, got {self.k}")
        if self.n_chunks < self.k:
            raise InputError(f"{self.n_chunks} chunks cannot form {self.k} folds")

    @property
    def sizes(self) -> np.ndarray:
        base, extra = divmod(self.n_chunks, self.k)
        return np.array([base + (i < extra) for i in range(self.k)])

    @property
    def bounds(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.sizes)])

    @property
    def fold_of_chunk(self) -> np.ndarray:
        return np.repeat(np.arange(self.k), self.sizes)


def kfold_cv_risk(series: SeriesLike, d: int, k: int = 5) -> RiskEstimate:
    """Average held-out AR(d-1) risk over ``k`` contiguous folds of chunks.

    Each fold's model is fitted on the pooled chunks of the other ``k - 1``
    folds.  ``n_terms`` of the result counts the held-out chunks, i.e. ``t0``.
    """
    s = as_series(series)
    if k < 2:
        raise InputError(f"k must be >= 2, got {k}")
    chunks = embed(s, d, LINEAR).values
    t0 = chunks.shape[0]
    if t0 < 2 * k:
        raise InputError(f"{t0} chunks are too few for {k}-fold CV (need >= {2 * k})")
    folds = FoldAssignment(k, t0)
    edges = folds.bounds
    risks = []
    for i in range(k):
        held = chunks[edges[i] : edges[i + 1]]
        train = np.concatenate([chunks[: edges[i]], chunks[edges[i + 1] :]])
        if train.shape[0] < d - 1:
            raise InputError(f"training folds for fold {i} have too few chunks")
        risks.append(empirical_risk(held, fit_ar(train)).value)
    return RiskEstimate(float(np.mean(risks)), t0)


def cv_risk_samples(
    dgp: DgpSpec,
    n: int,
    d: int,
    k: int,
    n_runs: int,
    rng: RngStream,
    burnin: int = DEFAULT_BURNIN,
) -> np.ndarray:
    """Raw cross-validated risks of ``n_runs`` independent series.

    Run ``j`` uses ``rng.spawn(j)``.  Runs whose fits are degenerate are
    dropped and logged; more than 2% of them raise.
    """
    rng = as_stream(rng)
    out = []
    failed = 0
    for j in range(n_runs):
        x = simulate(dgp, n, burnin, rng.spawn(j)).series
        try:
            out.append(kfold_cv_risk(x, d, k).value)
        except DegenerateDesignError:
            failed += 1
    if failed > MAX_FAILED_FRACTION * n_runs:
        raise DegenerateDesignError(f"{failed} of {n_runs} cross-validation runs had singular fits")
    if failed:
        log.warning("dropped %d of %d cross-validation runs with singular fits", failed, n_runs)
    return np.array(out)


def standardize(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    sd = x.std(ddof=1)
    if not sd > 0:
        raise InputError("cannot standardise samples with zero spread")
    return (x - x.mean()) / sd


def cv_normality_samples(
    dgp: DgpSpec,
    n: int,
    d: int,
    k: int,
    n_runs: int,
    rng: RngStream,
    burnin: int = DEFAULT_BURNIN,
) -> np.ndarray:
    """Standardised cross-validated risks of ``n_runs`` independent series."""
    if n_runs < 100:
        raise InputError(f"n_runs must be >= 100, got {n_runs}")
    return standardize(cv_risk_samples(dgp, n, d, k, n_runs, rng, burnin))
