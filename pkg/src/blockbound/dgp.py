"""Simulators for the ARMA, AR(1)-ARCH(1) and Markov-switching test processes.

Every simulator can resume from the state returned by a previous call, so a
realisation can be continued past its observed segment (used by the risk
oracle).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Any, Optional, Union

import numpy as np
from scipy import signal

from .core import InputError, RngStream, Series, SpecError, as_stream

DEFAULT_BURNIN = 1000
# E[log z^2] for standard normal z is -(gamma + log 2) ~= -1.2704
_ARCH_LOG_BOUND = 1.2703628454614782


class NonStationaryWarning(UserWarning):
    pass


def ar_roots(phi) -> np.ndarray:
    """Roots of ``1 - phi_1 z - ... - phi_p z^p``."""
    phi = np.asarray(phi, dtype=float)
    if phi.size == 0 or not np.any(phi):
        return np.array([])
    coeffs = np.concatenate([-phi[::-1], [1.0]])
    return np.roots(np.trim_zeros(coeffs, "f"))


@dataclass(frozen=True)
class ArmaSpec:
    """``X_t = sum phi_i X_{t-i} + sum theta_j e_{t-j} + e_t``, ``e ~ N(0, noise_sd^2)``.

    ``stationarity`` is ``"warn"`` (default), ``"error"`` or ``"ignore"`` and
    governs what happens when the AR polynomial has a root on or inside the
    unit circle.
    """

    phi: tuple = ()
    theta: tuple = ()
    noise_sd: float = 1.0
    stationarity: str = "warn"

    def __post_init__(self):
        object.__setattr__(self, "phi", tuple(float(v) for v in self.phi))
        object.__setattr__(self, "theta", tuple(float(v) for v in self.theta))
        if not (self.noise_sd >= 0 and math.isfinite(self.noise_sd)):
            raise SpecError("noise_sd must be finite and >= 0")
        if self.stationarity not in ("warn", "error", "ignore"):
            raise SpecError(f"unknown stationarity policy {self.stationarity!r}")
        roots = ar_roots(self.phi)
        if roots.size and np.min(np.abs(roots)) <= 1.0 + 1e-8 and self.stationarity != "ignore":
            msg = f"AR polynomial {self.phi} has a root with modulus {np.min(np.abs(roots)):.6g} <= 1"
            if self.stationarity == "error":
                raise SpecError(msg)
            warnings.warn(msg, NonStationaryWarning, stacklevel=3)

    name = "arma"

    def _run(self, n: int, gen: np.random.Generator, state) -> tuple[np.ndarray, Any]:
        p, q = len(self.phi), len(self.theta)
        eps = gen.standard_normal(n) * self.noise_sd
        b = np.concatenate([[1.0], self.theta])
        a = np.concatenate([[1.0], -np.asarray(self.phi)])
        if state is None:
            x_hist, e_hist = np.zeros(p), np.zeros(q)
        else:
            x_hist, e_hist = state
        if max(p, q) == 0:
            x = eps.copy()
        else:
            # lfiltic wants the most recent past value first
            zi = signal.lfiltic(b, a, x_hist[::-1], e_hist[::-1])
            x, _ = signal.lfilter(b, a, eps, zi=zi)
        x_all = np.concatenate([x_hist, x])
        e_all = np.concatenate([e_hist, eps])
        return x, (x_all[x_all.size - p :].copy(), e_all[e_all.size - q :].copy())


@dataclass(frozen=True)
class ArArchSpec:
    """AR(1) with ARCH(1) errors: ``e_t = sqrt(h_t) z_t``, ``h_t = omega + alpha1 e_{t-1}^2``."""

    phi1: float = 0.8
    omega: float = 1.0
    alpha1: float = 0.99

    def __post_init__(self):
        if not abs(self.phi1) < 1:
            raise SpecError(f"|phi1| must be < 1, got {self.phi1}")
        if not self.omega > 0:
            raise SpecError("omega must be > 0")
        if not self.alpha1 >= 0:
            raise SpecError("alpha1 must be >= 0")
        if self.alpha1 > 0 and not math.log(self.alpha1) < _ARCH_LOG_BOUND:
            raise SpecError(f"alpha1={self.alpha1} violates E[log(alpha1 z^2)] < 0")

    name = "ar_arch"

    def _run(self, n: int, gen: np.random.Generator, state):
        z = gen.standard_normal(n)
        phi1, omega, a1 = self.phi1, self.omega, self.alpha1
        if state is None:
            x_prev = 0.0
            h = omega / (1.0 - a1) if a1 < 1 else omega
        else:
            x_prev, e_prev = state
            h = omega + a1 * e_prev * e_prev
        out = np.empty(n)
        e = 0.0
        sqrt = math.sqrt
        for i, zi in enumerate(z.tolist()):
            e = sqrt(h) * zi
            x_prev = phi1 * x_prev + e
            out[i] = x_prev
            h = omega + a1 * e * e
        if n == 0 and state is not None:
            e = state[1]
        return out, (x_prev, e)


@dataclass(frozen=True)
class Regime:
    """``y_t = sum ar_i y_{t-i} + sum ma_j e_{t-j} + innovation * e_t``."""

    ar: tuple = ()
    ma: tuple = ()
    innovation: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "ar", tuple(float(v) for v in self.ar))
        object.__setattr__(self, "ma", tuple(float(v) for v in self.ma))


def stationary_distribution(transition) -> np.ndarray:
    """Left Perron eigenvector of a row-stochastic matrix, normalised to sum 1."""
    P = np.asarray(transition, dtype=float)
    vals, vecs = np.linalg.eig(P.T)
    v = np.real(vecs[:, np.argmin(np.abs(vals - 1.0))])
    return v / v.sum()


@dataclass(frozen=True)
class MarkovSwitchSpec:
    """Regime-switching ARMA recursions driven by a Markov chain.

    The ``y`` and ``e`` histories are shared across regimes: whichever regime
    is active reads the realised past.
    """

    regimes: tuple
    transition: tuple
    noise_sd: float = 1.0

    def __post_init__(self):
        regimes = tuple(r if isinstance(r, Regime) else Regime(**r) for r in self.regimes)
        object.__setattr__(self, "regimes", regimes)
        P = np.asarray(self.transition, dtype=float)
        k = len(regimes)
        if k == 0:
            raise SpecError("at least one regime is required")
        if P.shape != (k, k):
            raise SpecError(f"transition matrix must be {k}x{k}, got shape {P.shape}")
        if np.any(P < 0) or np.any(np.abs(P.sum(axis=1) - 1.0) > 1e-12):
            raise SpecError("transition matrix must be row-stochastic")
        object.__setattr__(self, "transition", tuple(tuple(row) for row in P.tolist()))
        if not (self.noise_sd >= 0 and math.isfinite(self.noise_sd)):
            raise SpecError("noise_sd must be finite and >= 0")

    name = "markov"

    def _run(self, n: int, gen: np.random.Generator, state, regimes_out: Optional[list] = None):
        P = np.asarray(self.transition)
        cum = np.cumsum(P, axis=1)
        cum[:, -1] = 1.0
        e_new = (gen.standard_normal(n) * self.noise_sd).tolist()
        u = gen.random(n + 1).tolist()
        p = max(len(r.ar) for r in self.regimes)
        q = max(len(r.ma) for r in self.regimes)
        if state is None:
            y_hist, e_hist = [0.0] * p, [0.0] * q
            pi = np.cumsum(stationary_distribution(P))
            regime = int(min(np.searchsorted(pi, u[0], side="right"), len(self.regimes) - 1))
            fresh = True
        else:
            y_hist, e_hist, regime = list(state[0]), list(state[1]), state[2]
            fresh = False
        coefs = [(r.ar, r.ma, r.innovation) for r in self.regimes]
        cum_rows = [row.tolist() for row in cum]
        out = np.empty(n)
        for i in range(n):
            if not (fresh and i == 0):
                row = cum_rows[regime]
                ui = u[i + 1]
                regime = 0
                while row[regime] <= ui:
                    regime += 1
            ar, ma, c = coefs[regime]
            e = e_new[i]
            y = c * e
            for j, a in enumerate(ar):
                y += a * y_hist[-1 - j]
            for j, m in enumerate(ma):
                y += m * e_hist[-1 - j]
            out[i] = y
            if p:
                y_hist.append(y)
                del y_hist[0]
            if q:
                e_hist.append(e)
                del e_hist[0]
            if regimes_out is not None:
                regimes_out.append(regime)
        return out, (tuple(y_hist), tuple(e_hist), regime)


DgpSpec = Union[ArmaSpec, ArArchSpec, MarkovSwitchSpec]


@dataclass
class SimulationResult:
    series: Series
    state: Any = field(repr=False)
    regimes: Optional[np.ndarray] = field(default=None, repr=False)


def _check_lengths(n: int, burnin: int):
    if n < 1:
        raise InputError(f"n must be >= 1, got {n}")
    if burnin < 0:
        raise InputError(f"burnin must be >= 0, got {burnin}")


def simulate(
    spec: DgpSpec,
    n: int,
    burnin: int = DEFAULT_BURNIN,
    rng: Union[RngStream, int, None] = None,
    state=None,
    return_regimes: bool = False,
) -> SimulationResult:
    """Simulate ``n`` values after discarding ``burnin``.

    With ``state`` (from a previous result) the path continues that
    realisation and ``burnin`` should normally be 0.
    """
    _check_lengths(n, burnin)
    gen = as_stream(rng).generator()
    regimes: Optional[list] = [] if return_regimes else None
    if isinstance(spec, MarkovSwitchSpec):
        x, new_state = spec._run(n + burnin, gen, state, regimes)
    else:
        if return_regimes:
            raise InputError("only Markov-switching specs have regimes")
        x, new_state = spec._run(n + burnin, gen, state)
    if not np.all(np.isfinite(x)):
        raise SpecError(f"{spec.name} simulation overflowed")
    reg = np.asarray(regimes[burnin:]) if regimes is not None else None
    return SimulationResult(Series(x[burnin:]), new_state, reg)


def simulate_arma(spec: ArmaSpec, n: int, burnin: int = DEFAULT_BURNIN, rng=None) -> Series:
    return simulate(spec, n, burnin, rng).series


def simulate_ar_arch(spec: ArArchSpec, n: int, burnin: int = DEFAULT_BURNIN, rng=None) -> Series:
    return simulate(spec, n, burnin, rng).series


def simulate_markov_switching(
    spec: MarkovSwitchSpec, n: int, burnin: int = DEFAULT_BURNIN, rng=None
) -> Series:
    return simulate(spec, n, burnin, rng).series


def preset_arma(stationarity: str = "warn") -> ArmaSpec:
    """ARMA(2,2) with phi = (0.5, 0.5), theta = (0.5, 0.25), N(0, 1) noise.

    The AR polynomial has a unit root, so this warns by default.
    """
    return ArmaSpec((0.5, 0.5), (0.5, 0.25), 1.0, stationarity)


def preset_ar_arch(omega: float = 1.0) -> ArArchSpec:
    return ArArchSpec(0.8, omega, 0.99)


def preset_markov() -> MarkovSwitchSpec:
    return MarkovSwitchSpec(
        regimes=(
            Regime(ar=(1.5,), ma=(0.6,)),
            Regime(ar=(0.9,), ma=(-1.2,)),
            Regime(ma=(0.7,), innovation=0.0),
        ),
        transition=((0.0, 0.2, 0.8), (0.7, 0.0, 0.3), (0.5, 0.0, 0.5)),
    )


# embedding dimension d = p + 1 of the AR(p) prediction model used with each process
PRESET_D = {"arma": 2, "ar_arch": 4, "markov": 3}


def preset(name: str) -> DgpSpec:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonStationaryWarning)
        table = {"arma": preset_arma, "ar_arch": preset_ar_arch, "markov": preset_markov}
        if name not in table:
            raise SpecError(f"unknown DGP {name!r}; choose from {sorted(table)}")
        return table[name]()
