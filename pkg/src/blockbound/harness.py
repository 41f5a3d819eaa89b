"""Monte Carlo experiments: risk oracle, coverage, true sampling distribution, Q-Q data."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np
from scipy import stats

from .bootstrap import gen_error_bound
from .core import (
    LINEAR,
    BlockBoundError,
    DegenerateDesignError,
    InputError,
    RngStream,
    as_stream,
    embed,
    empirical_quantile,
)
from .dgp import DEFAULT_BURNIN, DgpSpec, simulate
from .model import ArModel, empirical_risk, fit_ar

log = logging.getLogger(__name__)

DEFAULT_HORIZON = 1000
MAX_FAILED_FRACTION = 0.02
CONTINUATION = "continuation"
INDEPENDENT = "independent"


def run_ordered(func: Callable, tasks: Sequence, workers: int = 1) -> list:
    """``[func(t) for t in tasks]``, optionally spread over worker processes.

    Results always come back in task order, so the output does not depend on
    ``workers``.
    """
    tasks = list(tasks)
    if workers <= 1 or len(tasks) <= 1:
        return [func(t) for t in tasks]
    chunksize = max(1, len(tasks) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, tasks, chunksize=chunksize))


@dataclass(frozen=True)
class RiskOracleResult:
    risk: float
    horizon: int


def oracle_risk(
    dgp: DgpSpec,
    model: ArModel,
    m: int = DEFAULT_HORIZON,
    rng: Union[RngStream, int, None] = None,
    *,
    state=None,
    context: Optional[Sequence[float]] = None,
    mode: str = CONTINUATION,
    burnin: int = DEFAULT_BURNIN,
) -> RiskOracleResult:
    """Monte Carlo estimate of the long-run average loss of ``model``.

    In ``"continuation"`` mode the realisation whose final simulator ``state``
    is given is run ``m`` steps further; ``context`` holds its last ``d - 1``
    observed values so the first prediction uses real lags.  In
    ``"independent"`` mode a fresh stationary path is simulated instead.
    """
    if m < 1:
        raise InputError(f"oracle horizon must be >= 1, got {m}")
    d = model.d
    if mode == CONTINUATION:
        if state is None or context is None:
            raise InputError("continuation mode needs the simulator state and the last d-1 values")
        context = np.asarray(context, dtype=float).reshape(-1)
        if context.size != d - 1:
            raise InputError(f"context must hold {d - 1} values, got {context.size}")
        cont = simulate(dgp, m, 0, rng, state=state).series.values
        path = np.concatenate([context, cont])
    elif mode == INDEPENDENT:
        path = simulate(dgp, m + d - 1, burnin, rng).series.values
    else:
        raise InputError(f"unknown oracle mode {mode!r}")
    risk = empirical_risk(embed(path, d, LINEAR), model)
    return RiskOracleResult(risk.value, risk.n_terms)


@dataclass(frozen=True)
class CoverageReport:
    dgp_name: str
    d: int
    alpha: float
    sample_sizes: tuple
    coverage: tuple
    failures: tuple
    n_outer: int
    n_bootstrap: int
    oracle_horizon: int
    seed: int

    @property
    def p(self) -> int:
        return self.d - 1

    def rows(self) -> list[tuple]:
        return [
            (self.dgp_name, n, self.alpha, c, self.n_outer, self.n_bootstrap, f)
            for n, c, f in zip(self.sample_sizes, self.coverage, self.failures)
        ]


COVERAGE_COLUMNS = ("dgp", "n", "alpha", "coverage", "n_outer", "B", "failures")


@dataclass(frozen=True)
class _ReplicateTask:
    dgp: DgpSpec
    n: int
    d: int
    B: int
    alphas: tuple
    ell: Union[int, str]
    horizon: int
    burnin: int
    oracle_mode: str
    rng: RngStream


def _coverage_replicate(task: _ReplicateTask):
    """Upper bounds (one per alpha) and oracle risk for one fresh realisation; None on failure."""
    sim = simulate(task.dgp, task.n, task.burnin, task.rng.spawn(0))
    try:
        bound = gen_error_bound(sim.series, task.d, task.B, task.alphas[0], task.ell, task.rng.spawn(1))
        model = fit_ar(embed(sim.series, task.d, LINEAR))
    except DegenerateDesignError:
        return None
    context = sim.series.values[len(sim.series) - (task.d - 1) :]
    risk = oracle_risk(
        task.dgp, model, task.horizon, task.rng.spawn(2),
        state=sim.state, context=context, mode=task.oracle_mode, burnin=task.burnin,
    ).risk
    uppers = [bound.train_error + empirical_quantile(bound.eta_samples, 1.0 - a) for a in task.alphas]
    return risk, uppers


def coverage_sweep(
    dgp: DgpSpec,
    d: int,
    sample_sizes: Iterable[int],
    n_outer: int,
    B: int,
    alphas: Sequence[float],
    rng: Union[RngStream, int, None] = None,
    *,
    ell: Union[int, str] = "auto",
    horizon: int = DEFAULT_HORIZON,
    burnin: int = DEFAULT_BURNIN,
    oracle_mode: str = CONTINUATION,
    workers: int = 1,
    dgp_name: Optional[str] = None,
) -> list[CoverageReport]:
    """Coverage of the bootstrap upper bound at several nominal levels.

    All levels share the same realisations and bootstrap draws, so coverage
    is monotone in ``alpha`` by construction.  Outer replicate ``j`` at sample
    size index ``s`` uses stream ``rng.spawn(s, j)``.

    Raises
    ------
    DegenerateDesignError
        If more than 2% of the replicates at some sample size fail.
    """
    sample_sizes = tuple(int(n) for n in sample_sizes)
    alphas = tuple(float(a) for a in alphas)
    if n_outer < 1 or B < 1 or horizon < 1 or not sample_sizes or not alphas:
        raise InputError("n_outer, B, horizon and the grids must all be non-empty / >= 1")
    for a in alphas:
        if not 0 < a < 1:
            raise InputError(f"alpha must lie in (0, 1), got {a}")
    rng = as_stream(rng)
    name = dgp_name or dgp.name

    hits = np.zeros((len(alphas), len(sample_sizes)))
    failures = []
    for s, n in enumerate(sample_sizes):
        tasks = [
            _ReplicateTask(dgp, n, d, B, alphas, ell, horizon, burnin, oracle_mode, rng.spawn(s, j))
            for j in range(n_outer)
        ]
        results = run_ordered(_coverage_replicate, tasks, workers)
        done = [r for r in results if r is not None]
        n_failed = n_outer - len(done)
        if n_failed > MAX_FAILED_FRACTION * n_outer:
            raise DegenerateDesignError(f"{n_failed} of {n_outer} replicates failed at n={n}")
        failures.append(n_failed)
        for a in range(len(alphas)):
            hits[a, s] = np.mean([risk <= uppers[a] for risk, uppers in done])
        log.info("%s n=%d coverage=%s failed=%d", name, n, hits[:, s].round(3).tolist(), n_failed)

    return [
        CoverageReport(
            name, d, a, sample_sizes, tuple(float(c) for c in hits[i]), tuple(failures),
            n_outer, B, horizon, rng.seed,
        )
        for i, a in enumerate(alphas)
    ]


def coverage_experiment(
    dgp: DgpSpec,
    d: int,
    sample_sizes: Iterable[int],
    n_outer: int,
    B: int,
    alpha: float,
    rng: Union[RngStream, int, None] = None,
    **kwargs,
) -> CoverageReport:
    """Empirical coverage of the ``1 - alpha`` bootstrap bound at each sample size.

    For every outer replicate a fresh realisation of length ``n`` is
    simulated, the bound is computed with an automatically chosen block
    length, and the realisation is continued ``horizon`` steps to estimate
    the fitted model's actual risk.
    """
    return coverage_sweep(dgp, d, sample_sizes, n_outer, B, [alpha], rng, **kwargs)[0]


def _eta_run(args) -> float:
    dgp, n, d, burnin, stream = args
    t0 = n - d + 1
    x = simulate(dgp, 2 * t0 + d - 1, burnin, stream).series
    chunks = embed(x, d, LINEAR).values
    model = fit_ar(chunks[:t0])
    return empirical_risk(chunks[t0:], model).value - empirical_risk(chunks[:t0], model).value


def sampling_distribution_eta(
    dgp: DgpSpec,
    n: int,
    d: int,
    n_runs: int,
    rng: Union[RngStream, int, None] = None,
    *,
    burnin: int = DEFAULT_BURNIN,
    workers: int = 1,
) -> np.ndarray:
    """Draws of test error minus training error over ``n_runs`` independent realisations.

    Each realisation has ``2 * t0`` chunks (``t0 = n - d + 1``): the model is
    fitted on the first ``t0`` and tested on the next ``t0``.
    """
    if n_runs < 100:
        raise InputError(f"n_runs must be >= 100, got {n_runs}")
    if n - d + 1 < d - 1:
        raise InputError("n too small for the model order")
    rng = as_stream(rng)
    tasks = [(dgp, n, d, burnin, rng.spawn(j)) for j in range(n_runs)]
    return np.array(run_ordered(_eta_run, tasks, workers))


def qq_data(samples: Sequence[float]) -> np.ndarray:
    """Normal Q-Q pairs ``(Phi^-1((i - 0.5)/n), x_(i))``, one row per sample."""
    x = np.sort(np.asarray(samples, dtype=float).reshape(-1))
    n = x.size
    if n < 100:
        raise InputError(f"Q-Q data needs >= 100 samples, got {n}")
    theo = stats.norm.ppf((np.arange(1, n + 1) - 0.5) / n)
    return np.column_stack([theo, x])


def qq_correlation(samples: Sequence[float]) -> float:
    """Correlation between the two Q-Q columns (1 for exactly normal quantiles)."""
    q = qq_data(samples)
    return float(np.corrcoef(q[:, 0], q[:, 1])[0, 1])


def ks_distance(a: Sequence[float], b: Sequence[float]) -> float:
    """Two-sample Kolmogorov-Smirnov statistic."""
    return float(stats.ks_2samp(a, b).statistic)
