"""Initial laws for the particle systems and their exact moments.

Two product laws are supported: ``gaussian`` (independent N(location_i,
scale^2) coordinates) and ``uniform-box`` (independent U[location_i - scale,
location_i + scale] coordinates).  The closed-form constants consume centered
moments E|X - EX|^p and raw moments E|X|^p of these laws; for even integer
orders both are computed exactly by expanding powers of the coordinate sum,
and for the gaussian the centered moment is available for any real order
through the gamma function.  A Monte Carlo estimator is provided as an
independent cross-check and as the fallback for orders without a closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .dynamics import LANE_INIT, RngStream
from .errors import ConfigurationError, InputError

LAW_NAMES = ("gaussian", "uniform-box")


@dataclass(frozen=True)
class InitialLaw:
    """A product law on R^d selected by name, location vector and scale."""

    name: str
    location: np.ndarray
    scale: float

    def __post_init__(self):
        if self.name not in LAW_NAMES:
            raise ConfigurationError(
                f"unknown initial law {self.name!r}; choose one of {', '.join(LAW_NAMES)}"
            )
        loc = np.atleast_1d(np.asarray(self.location, dtype=float))
        if loc.ndim != 1:
            raise InputError(f"location must be a vector, got shape {loc.shape}")
        if self.scale <= 0:
            raise ConfigurationError(f"law scale must be positive, got {self.scale}")
        loc.setflags(write=False)
        object.__setattr__(self, "location", loc)

    @property
    def d(self) -> int:
        return self.location.shape[0]


def sample_initial(law: InitialLaw, count: int, stream: RngStream, salt: int = 0) -> np.ndarray:
    """Draw ``count`` i.i.d. positions; deterministic in (stream, salt).

    The leading rows do not depend on ``count``, so nested ensembles drawn
    from the same stream share their common prefix exactly.
    """
    if count < 1:
        raise InputError(f"count must be >= 1, got {count}")
    gen = stream.generator(LANE_INIT, salt)
    if law.name == "gaussian":
        return law.location + law.scale * gen.standard_normal((count, law.d))
    return law.location + gen.uniform(-law.scale, law.scale, (count, law.d))


# ---------------------------------------------------------------------------
# Exact moments
# ---------------------------------------------------------------------------


def _double_factorial(n: int) -> int:
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out


def _coordinate_moments(law: InitialLaw, i: int, order: int, centered: bool) -> np.ndarray:
    """Moments E X_i^m for m = 0..order of one coordinate (centered or raw)."""
    c = 0.0 if centered else float(law.location[i])
    s = law.scale
    m = np.zeros(order + 1)
    if law.name == "gaussian":
        # E (c + s Z)^m via the binomial theorem and E Z^j = (j-1)!! (even j)
        for k in range(order + 1):
            total = 0.0
            for j in range(0, k + 1, 2):
                total += math.comb(k, j) * c ** (k - j) * s**j * _double_factorial(j - 1)
            m[k] = total
    else:
        # uniform on [c - s, c + s]: E X^k = ((c+s)^{k+1} - (c-s)^{k+1}) / (2s(k+1))
        for k in range(order + 1):
            m[k] = ((c + s) ** (k + 1) - (c - s) ** (k + 1)) / (2.0 * s * (k + 1))
    return m


def _moment_of_norm_power(law: InitialLaw, power: int, centered: bool) -> float:
    """E (sum_i X_i^2)^power computed exactly via per-coordinate moments.

    Dynamic programming over coordinates: with S_k the partial sum of squares,
    E S_k^j expands through the binomial theorem because coordinates are
    independent.
    """
    acc = np.zeros(power + 1)
    acc[0] = 1.0
    for i in range(law.d):
        coord = _coordinate_moments(law, i, 2 * power, centered)
        sq = np.array([coord[2 * m] for m in range(power + 1)])  # E (X_i^2)^m
        new = np.zeros(power + 1)
        for j in range(power + 1):
            new[j] = sum(math.comb(j, m) * acc[j - m] * sq[m] for m in range(j + 1))
        acc = new
    return float(acc[power])


def law_centered_moment(law: InitialLaw, p: float) -> float:
    """E |X - EX|^p for the law; exact for even integers (any p for gaussian)."""
    if p < 0:
        raise InputError(f"moment order must be nonnegative, got {p}")
    if law.name == "gaussian":
        # |X - EX|^2 / scale^2 is chi-square with d degrees of freedom
        half = 0.5 * p
        return law.scale**p * math.exp(
            half * math.log(2.0) + math.lgamma(0.5 * law.d + half) - math.lgamma(0.5 * law.d)
        )
    if p == int(p) and int(p) % 2 == 0:
        return _moment_of_norm_power(law, int(p) // 2, centered=True)
    raise ConfigurationError(
        f"centered moment of order {p} for {law.name} has no closed form here; "
        "use estimate_law_moment"
    )


def law_raw_moment(law: InitialLaw, p: float) -> float:
    """E |X|^p about the origin; exact for even integer orders."""
    if p < 0:
        raise InputError(f"moment order must be nonnegative, got {p}")
    if p == int(p) and int(p) % 2 == 0:
        return _moment_of_norm_power(law, int(p) // 2, centered=False)
    raise ConfigurationError(
        f"raw moment of order {p} for {law.name} has no closed form here; "
        "use estimate_law_moment"
    )


def estimate_law_moment(
    law: InitialLaw,
    p: float,
    stream: RngStream,
    centered: bool = True,
    sample_count: int = 1_000_000,
) -> Tuple[float, float]:
    """Monte Carlo estimate of a norm moment, with its standard error."""
    draws = sample_initial(law, sample_count, stream)
    ref = law.location if centered else np.zeros(law.d)
    values = np.linalg.norm(draws - ref, axis=1) ** p
    mean = float(values.mean())
    stderr = float(values.std(ddof=1) / math.sqrt(sample_count))
    return mean, stderr
