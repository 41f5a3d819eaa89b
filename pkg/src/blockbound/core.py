"""Series container, delay embedding, order-statistic quantiles and seeded streams."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

LINEAR = "linear"
CIRCULAR = "circular"


class BlockBoundError(Exception):
    """Base class for all errors raised by this package."""


class InputError(BlockBoundError, ValueError):
    """Malformed or out-of-range input data."""


class DimensionError(InputError):
    """Embedding or vector dimension does not fit the data."""


class SpecError(BlockBoundError, ValueError):
    """Invalid data-generating-process specification."""


class DegenerateDesignError(BlockBoundError, ArithmeticError):
    """Least-squares design matrix is singular or numerically close to it."""


class Series:
    """Immutable, finite, real-valued time series.

    The values are stored as a read-only float64 array, so a ``Series`` can be
    shared between threads and workers without copying.
    """

    __slots__ = ("_values",)

    def __init__(self, values: Iterable[float]):
        if isinstance(values, Series):
            values = values.values
        arr = np.array(values, dtype=float).reshape(-1)
        if arr.size == 0:
            raise InputError("series is empty")
        if not np.all(np.isfinite(arr)):
            raise InputError("series contains NaN or infinite values")
        arr.flags.writeable = False
        object.__setattr__(self, "_values", arr)

    def __setattr__(self, name, value):
        raise AttributeError("Series is immutable")

    @property
    def values(self) -> np.ndarray:
        return self._values

    def __len__(self) -> int:
        return self._values.size

    def __array__(self, dtype=None, copy=None):
        return self._values if dtype is None else self._values.astype(dtype)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Series):
            return NotImplemented
        return np.array_equal(self._values, other._values)

    def __hash__(self):
        return hash(self._values.tobytes())

    def __repr__(self) -> str:
        return f"Series(n={len(self)})"


SeriesLike = Union[Series, Sequence[float], np.ndarray]


def as_series(x: SeriesLike) -> Series:
    return x if isinstance(x, Series) else Series(x)


@dataclass(frozen=True)
class ChunkMatrix:
    """Delay-embedded chunks, one row per chunk, oldest observation first.

    ``values[i]`` is ``(Y_i, ..., Y_{i+d-1})`` (0-based ``i``).  In circular
    mode there are ``t`` rows and indices past the end wrap to the start.
    """

    values: np.ndarray
    mode: str = LINEAR

    @property
    def n_chunks(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def __len__(self) -> int:
        return self.n_chunks


def embed_indices(t: int, d: int, mode: str = LINEAR) -> np.ndarray:
    """Row/column index array into a length-``t`` series for its delay embedding.

    The math is written 1-based (``k mod t`` with ``t mod t = t``); with 0-based
    positions that wrap is simply ``k % t``.  This is the only place the
    conversion happens.
    """
    if mode == LINEAR:
        n_rows = t - d + 1
    elif mode == CIRCULAR:
        n_rows = t
    else:
        raise InputError(f"unknown embedding mode {mode!r}")
    idx = np.arange(n_rows)[:, None] + np.arange(d)[None, :]
    return idx % t if mode == CIRCULAR else idx


def embed(series: SeriesLike, d: int, mode: str = LINEAR) -> ChunkMatrix:
    """Delay-embed ``series`` into chunks of width ``d``.

    Examples
    --------
    >>> embed([1, 2, 3, 4], 2, "circular").values.tolist()
    [[1.0, 2.0], [2.0, 3.0], [3.0, 4.0], [4.0, 1.0]]
    """
    s = as_series(series)
    t = len(s)
    if t < 2:
        raise InputError("embedding needs at least two observations")
    if d < 1:
        raise DimensionError(f"embedding dimension must be >= 1, got {d}")
    if d > t:
        raise DimensionError(f"embedding dimension {d} exceeds series length {t}")
    vals = s.values[embed_indices(t, d, mode)]
    vals.flags.writeable = False
    return ChunkMatrix(vals, mode)


def quantile_rank(n: int, level: float) -> int:
    """1-based rank of the ``level`` order statistic among ``n`` samples.

    ``level * n`` is rounded to 9 decimals before the ceiling so that e.g.
    ``0.07 * 100`` maps to rank 7, not 8.
    """
    return min(n, max(1, math.ceil(round(level * n, 9))))


def empirical_quantile(samples: Sequence[float], level: float) -> float:
    """The ``ceil(level * B)``-th smallest of ``B`` samples (no interpolation).

    >>> empirical_quantile(range(1, 101), 0.95)
    95.0
    """
    arr = np.asarray(samples, dtype=float).reshape(-1)
    if arr.size == 0:
        raise InputError("cannot take a quantile of an empty sample")
    if not 0.0 < level < 1.0:
        raise InputError(f"quantile level must lie in (0, 1), got {level}")
    k = quantile_rank(arr.size, level)
    return float(np.partition(arr, k - 1)[k - 1])


@dataclass(frozen=True)
class RngStream:
    """Reproducible random stream addressed by ``(seed, key)``.

    ``key`` is a path of non-negative integers.  Streams with different keys
    are independent (numpy ``SeedSequence`` spawn keys), and the draws depend
    only on ``(seed, key)``, never on which worker or in what order they are
    consumed.
    """

    seed: int
    key: tuple = field(default=())

    def __post_init__(self):
        if isinstance(self.key, int):
            object.__setattr__(self, "key", (self.key,))
        object.__setattr__(self, "key", tuple(int(k) for k in self.key))
        if self.seed < 0 or self.seed >= 2**64:
            raise InputError("seed must be a 64-bit unsigned integer")

    def spawn(self, *index: int) -> "RngStream":
        """Child stream ``key + index``."""
        return RngStream(self.seed, self.key + tuple(int(i) for i in index))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=self.key)
        return np.random.Generator(np.random.PCG64(ss))


def as_stream(rng: Union[RngStream, int, None]) -> RngStream:
    if isinstance(rng, RngStream):
        return rng
    if rng is None:
        return RngStream(0)
    return RngStream(int(rng))
