"""Objective functions with certified bounds and Lipschitz constants.

Every objective carries certified constants (lower bound, upper bound,
global Lipschitz constant) because the closed-form constants of the theory
consume them.  Built-ins are chosen so that those constants are exact in
closed form wherever possible; ``soft-rastrigin`` is the one exception and
its Lipschitz constant is certified numerically.

Objectives are immutable after construction, evaluate deterministically, and
are safe to call from many threads at once.  There is no gradient interface
anywhere: the method is derivative-free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError, InputError

BUILTIN_NAMES = ("saturating-norm", "gauss-well", "soft-rastrigin")

_RASTRIGIN_A = 10.0
_CERT_BOX_HALFWIDTH = 10.0  # certification samples live in [-10, 10]^d
_CERT_TOL = 1e-12


@dataclass(frozen=True)
class Objective:
    """A cost function on R^d together with its certified constants.

    ``lower_bound <= f(x) <= upper_bound`` must hold everywhere and
    ``|f(x) - f(y)| <= lipschitz * |x - y|`` for all pairs; both claims can
    be spot-checked with :func:`certify_objective`.
    """

    name: str
    dimension: int
    lower_bound: float
    upper_bound: float
    lipschitz: float
    batch: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    minimizer: Optional[np.ndarray] = None
    lipschitz_certification: str = "closed-form"  # or "numeric"

    def __post_init__(self):
        if self.dimension < 1:
            raise InputError(f"objective dimension must be >= 1, got {self.dimension}")
        if self.upper_bound < self.lower_bound:
            raise InputError("objective upper bound is below its lower bound")
        if self.lipschitz < 0:
            raise InputError("Lipschitz constant must be nonnegative")
        if self.minimizer is not None:
            m = np.asarray(self.minimizer, dtype=float)
            if m.shape != (self.dimension,):
                raise InputError(
                    f"minimizer has shape {m.shape}, expected ({self.dimension},)"
                )
            object.__setattr__(self, "minimizer", m)

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dimension,):
            raise InputError(f"point has shape {x.shape}, expected ({self.dimension},)")
        return float(self.batch(x[None, :])[0])


def eval_batch(obj: Objective, points) -> np.ndarray:
    """Evaluate ``obj`` at a batch of points, given as a list or (n, d) array."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None] if obj.dimension == 1 else pts[None, :]
    if pts.ndim != 2 or pts.shape[1] != obj.dimension:
        raise InputError(
            f"points have shape {np.shape(points)}, expected (n, {obj.dimension})"
        )
    return np.asarray(obj.batch(pts), dtype=float)


def _radii(points: np.ndarray, center: np.ndarray) -> np.ndarray:
    return np.linalg.norm(points - center, axis=1)


def _rastrigin(z: np.ndarray) -> np.ndarray:
    # componentwise z_i^2 - A cos(2 pi z_i) + A, summed; nonnegative, zero at 0
    return np.sum(z * z - _RASTRIGIN_A * np.cos(2.0 * np.pi * z) + _RASTRIGIN_A, axis=1)


def _soft_rastrigin_lipschitz(dimension: int, scale: float) -> float:
    """Numeric Lipschitz certificate for 1 - exp(-rastrigin/scale).

    The squared gradient norm factorizes through the separable structure, so
    it is bounded by d * max_t h(t)^2 / s^2 with
    h(t) = exp(-r1(t)/s) * |2t + 2 pi A sin(2 pi t)| and r1 the 1-d profile.
    The max is taken over a dense radial grid; a 1.1 safety factor covers the
    grid resolution.
    """
    t_max = math.sqrt(50.0 * scale) + 1.0
    t = np.linspace(0.0, t_max, 200_001)
    r1 = t * t - _RASTRIGIN_A * np.cos(2.0 * np.pi * t) + _RASTRIGIN_A
    g = np.abs(2.0 * t + 2.0 * np.pi * _RASTRIGIN_A * np.sin(2.0 * np.pi * t))
    h_max = float(np.max(np.exp(-r1 / scale) * g))
    return 1.1 * math.sqrt(dimension) * h_max / scale


def make_builtin(
    name: str,
    dimension: int,
    minimizer=None,
    scale: float = 10.0,
) -> Objective:
    """Construct a built-in objective with certified constants.

    ``saturating-norm``: r/(1+r) with r the distance to the minimizer;
    ``gauss-well``: 1 - exp(-r^2/2); ``soft-rastrigin``: 1 - exp(-R/scale)
    with R the Rastrigin profile.  All three take values in [0, 1].
    """
    if name not in BUILTIN_NAMES:
        raise ConfigurationError(
            f"unknown objective {name!r}; choose one of {', '.join(BUILTIN_NAMES)}"
        )
    if dimension < 1:
        raise ConfigurationError(f"objective dimension must be >= 1, got {dimension}")
    center = (
        np.zeros(dimension)
        if minimizer is None
        else np.asarray(minimizer, dtype=float).reshape(dimension)
    )

    if name == "saturating-norm":

        def batch(points: np.ndarray) -> np.ndarray:
            r = _radii(points, center)
            return r / (1.0 + r)

        return Objective(name, dimension, 0.0, 1.0, 1.0, batch, center)

    if name == "gauss-well":

        def batch(points: np.ndarray) -> np.ndarray:
            # overflow in the square saturates the well to 1, which is exact
            with np.errstate(over="ignore"):
                r2 = np.sum((points - center) ** 2, axis=1)
                return 1.0 - np.exp(-0.5 * r2)

        return Objective(name, dimension, 0.0, 1.0, math.exp(-0.5), batch, center)

    if scale <= 0:
        raise ConfigurationError(f"soft-rastrigin scale must be positive, got {scale}")

    def batch(points: np.ndarray) -> np.ndarray:
        return 1.0 - np.exp(-_rastrigin(points - center) / scale)

    lip = _soft_rastrigin_lipschitz(dimension, scale)
    return Objective(
        name, dimension, 0.0, 1.0, lip, batch, center, lipschitz_certification="numeric"
    )


@dataclass(frozen=True)
class CertificationReport:
    """Outcome of randomized spot checks of an objective's stated constants."""

    objective: str
    samples: int
    passed: bool
    max_range_violation: float
    max_difference_quotient: float
    lipschitz_claimed: float
    lipschitz_certification: str
    witness: Optional[tuple] = None  # worst pair (x, y) for the quotient


def certify_objective(obj: Objective, sample_count: int, seed: int) -> CertificationReport:
    """Spot-check the stated bounds and Lipschitz constant on random pairs.

    Draws ``sample_count`` point pairs uniformly in [-10, 10]^d and reports
    the largest bound violation and the largest difference quotient.  The
    report passes iff neither exceeds the stated constants by more than 1e-12.
    A report is always produced; failures carry a witness pair.
    """
    if sample_count < 2:
        raise InputError("sample_count must be >= 2")
    gen = np.random.default_rng(seed)
    x = gen.uniform(-_CERT_BOX_HALFWIDTH, _CERT_BOX_HALFWIDTH, (sample_count, obj.dimension))
    y = gen.uniform(-_CERT_BOX_HALFWIDTH, _CERT_BOX_HALFWIDTH, (sample_count, obj.dimension))
    fx = eval_batch(obj, x)
    fy = eval_batch(obj, y)

    values = np.concatenate([fx, fy])
    range_violation = float(
        max(np.max(obj.lower_bound - values), np.max(values - obj.upper_bound), 0.0)
    )

    dist = np.linalg.norm(x - y, axis=1)
    ok = dist > 0
    quotients = np.abs(fx[ok] - fy[ok]) / dist[ok]
    worst = int(np.argmax(quotients))
    max_quotient = float(quotients[worst])
    idx = np.flatnonzero(ok)[worst]
    witness = (x[idx].copy(), y[idx].copy())

    passed = range_violation <= _CERT_TOL and max_quotient <= obj.lipschitz + _CERT_TOL
    return CertificationReport(
        objective=obj.name,
        samples=sample_count,
        passed=passed,
        max_range_violation=range_violation,
        max_difference_quotient=max_quotient,
        lipschitz_claimed=obj.lipschitz,
        lipschitz_certification=obj.lipschitz_certification,
        witness=None if passed else witness,
    )
