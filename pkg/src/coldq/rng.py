"""Counter-based random substreams for reproducible experiment generation.

Every draw comes from a Philox stream keyed by ``(seed, t, role)``, so each
round of each stream is statistically independent of every other and, more
importantly, *positionally* independent: adding a probe draw under one role
can never shift the values produced under another role or at another round.
Golden traces stay valid as long as the stream version below is unchanged.
"""

from __future__ import annotations

import numpy as np
from scipy.special import gammaln, ndtri

STREAM_VERSION = "philox4x64-v1"

# Substream roles. Values are part of the stream version contract: renumbering
# them invalidates recorded golden traces.
ROLE_LOSS = 0
ROLE_CONSTRAINT = 1
ROLE_NOISE = 2
ROLE_PERMUTATION = 3
ROLE_SOLVER = 4
ROLE_PROBE = 5
ROLE_ARRIVALS = 6
ROLE_PRICE = 7

_MASK64 = (1 << 64) - 1
_TWO53 = 1 << 53
_INV_TWO53 = 1.0 / _TWO53


def substream(seed: int, t: int, role: int) -> np.random.Generator:
    """Independent generator for one (seed, round, role) cell."""
    if not 0 <= t < (1 << 48):
        raise ValueError(f"round index out of keyable range: {t}")
    if not 0 <= role < (1 << 16):
        raise ValueError(f"role out of keyable range: {role}")
    key = np.array([seed & _MASK64, (role << 48) | t], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def open_unit(gen: np.random.Generator, size=None) -> np.ndarray | float:
    """Uniform draw on the open interval (0, 1), built from 53-bit integers.

    Never returns exactly 0 or 1, which keeps inverse-CDF transforms finite.
    """
    k = gen.integers(0, _TWO53, size=size, dtype=np.int64)
    return (k + 0.5) * _INV_TWO53


def uniform(gen: np.random.Generator, low: float, high: float, size=None):
    """Uniform draw on the half-open interval [low, high)."""
    return low + (high - low) * open_unit(gen, size=size)


def standard_normal(gen: np.random.Generator, size=None):
    """Standard normal via inverse CDF, for stream stability."""
    return ndtri(open_unit(gen, size=size))


_poisson_tables: dict[float, np.ndarray] = {}


def _poisson_cdf(mean: float) -> np.ndarray:
    table = _poisson_tables.get(mean)
    if table is None:
        # Support is truncated at mean + 60*sqrt(mean); the discarded tail mass
        # is far below float64 resolution for the means used here.
        cap = int(mean + 60.0 * np.sqrt(mean)) + 1
        k = np.arange(cap + 1, dtype=np.float64)
        log_pmf = k * np.log(mean) - mean - gammaln(k + 1.0)
        cdf = np.cumsum(np.exp(log_pmf))
        cdf[-1] = 1.0
        table = cdf
        _poisson_tables[mean] = table
    return table


def poisson_support_cap(mean: float) -> int:
    """Largest value the truncated-inversion Poisson sampler can return."""
    return len(_poisson_cdf(mean)) - 1


def poisson(gen: np.random.Generator, mean: float, size=None):
    """Poisson draw by CDF inversion against a cached table."""
    cdf = _poisson_cdf(mean)
    u = open_unit(gen, size=size)
    return np.searchsorted(cdf, u, side="left")


def permutation(gen: np.random.Generator, start: int, stop: int) -> np.ndarray:
    """Random permutation of the integers start..stop inclusive."""
    return gen.permutation(np.arange(start, stop + 1))
