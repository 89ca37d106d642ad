"""State, consensus operator, noise operators and Euler-Maruyama stepping.

The interacting particle system moves every particle toward the ensemble's
softmax-weighted mean (the consensus point) and diffuses it with
multiplicative noise, either isotropic (|v| times the identity) or
anisotropic (diag(v)).  One ``em_step`` freezes the consensus point at the
start of the step, applies the drift for one time step and adds the scaled
Brownian increment.

Randomness comes from keyed, counter-style streams: the Gaussian increments
for a given (master seed, replicate, step) are a pure function of those
coordinates, so common random numbers across coupled systems and across
worker threads hold by construction.  Within one block of increments the
leading rows do not depend on the requested number of rows, which is what
lets a size-J system share increments with the first J particles of a larger
coupled system.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .errors import InputError, NumericError
from .objectives import Objective

_SEED_MASK = 0xFFFFFFFFFFFFFFFF

# stream lanes keep independent uses of the same (seed, replicate) apart
LANE_NOISE = 0
LANE_INIT = 1
LANE_WM_REFERENCE = 2
LANE_WM_REPLICATE = 3


class NoiseKind(str, Enum):
    ISOTROPIC = "isotropic"
    ANISOTROPIC = "anisotropic"


def tau(kind: NoiseKind, dimension: int) -> int:
    """Noise prefactor: the ambient dimension for isotropic noise, 1 otherwise."""
    return dimension if kind is NoiseKind.ISOTROPIC else 1


@dataclass(frozen=True)
class RngStream:
    """Keyed random stream addressed by (master seed, replicate, step).

    Increments produced for fixed coordinates are identical regardless of
    generation order or thread assignment.
    """

    master_seed: int
    replicate: int = 0
    step: int = 0

    def for_replicate(self, replicate: int) -> "RngStream":
        return replace(self, replicate=int(replicate))

    def at_step(self, step: int) -> "RngStream":
        return replace(self, step=int(step))

    def generator(self, lane: int = LANE_NOISE, salt: int = 0) -> np.random.Generator:
        key = (self.master_seed & _SEED_MASK, lane, salt, self.replicate, self.step)
        return np.random.default_rng(np.random.SeedSequence(key))


def brownian_increments(stream: RngStream, J: int, d: int, dt: float) -> np.ndarray:
    """Draw the (J, d) Brownian increments for one step: N(0, dt) entries.

    Deterministic in (stream coordinates, J, d, dt); row j only depends on
    the stream and on j, never on J, so a smaller system consumes a prefix of
    the same increments.
    """
    if dt <= 0:
        raise InputError(f"dt must be positive, got {dt}")
    if J < 1 or d < 1:
        raise InputError(f"increment block needs J >= 1 and d >= 1, got ({J}, {d})")
    gen = stream.generator(LANE_NOISE)
    return gen.standard_normal((J, d)) * math.sqrt(dt)


@dataclass(frozen=True)
class Ensemble:
    """Positions of J particles in R^d at a simulation time.

    Value-like: the position array is copied on construction and marked
    read-only, and no operation mutates its input ensemble.
    """

    positions: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float, copy=True)
        if pos.ndim != 2 or pos.shape[0] < 1 or pos.shape[1] < 1:
            raise InputError(f"positions must be a (J, d) matrix, got shape {pos.shape}")
        if not np.all(np.isfinite(pos)):
            raise NumericError("ensemble positions contain non-finite entries")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

    @property
    def J(self) -> int:
        return self.positions.shape[0]

    @property
    def d(self) -> int:
        return self.positions.shape[1]


@dataclass(frozen=True)
class CboParams:
    """Dynamics parameters: inverse temperature, noise strength and kind, grid."""

    alpha: float
    sigma: float
    noise: NoiseKind
    dt: float
    horizon: float

    def __post_init__(self):
        object.__setattr__(self, "noise", NoiseKind(self.noise))
        if self.alpha < 0:
            raise InputError(f"alpha must be nonnegative, got {self.alpha}")
        if self.sigma < 0:
            raise InputError(f"sigma must be nonnegative, got {self.sigma}")
        if self.dt <= 0:
            raise InputError(f"dt must be positive, got {self.dt}")
        if self.horizon < 0:
            raise InputError(f"horizon must be nonnegative, got {self.horizon}")
        if self.horizon > 0 and self.dt > self.horizon:
            raise InputError(f"dt={self.dt} exceeds horizon={self.horizon}")

    def steps(self) -> int:
        """Number of steps covering the horizon (ceiling, robust to rounding)."""
        ratio = self.horizon / self.dt
        nearest = round(ratio)
        if abs(ratio - nearest) < 1e-9 * max(1.0, nearest):
            return int(nearest)
        return int(math.ceil(ratio))


def mean_point(ens: Ensemble) -> np.ndarray:
    """Arithmetic mean of the particle positions."""
    return ens.positions.mean(axis=0)


def consensus_point(ens: Ensemble, alpha: float, obj: Objective) -> np.ndarray:
    """Softmax-weighted mean of the positions with weights exp(-alpha f).

    Weights are shifted by the minimum cost value before exponentiating, so
    the largest weight is exactly 1 and the denominator is at least 1; the
    shift cancels in the ratio, so the result equals the unshifted weighted
    mean in exact arithmetic while staying safe at large alpha.
    """
    if alpha < 0:
        raise InputError(f"alpha must be nonnegative, got {alpha}")
    if obj.dimension != ens.d:
        raise InputError(
            f"objective dimension {obj.dimension} does not match ensemble dimension {ens.d}"
        )
    values = np.asarray(obj.batch(ens.positions), dtype=float)
    if not np.all(np.isfinite(values)):
        bad = int(np.flatnonzero(~np.isfinite(values))[0])
        raise NumericError(f"objective value is not finite for particle {bad}")
    weights = np.exp(-alpha * (values - values.min()))
    return (weights @ ens.positions) / weights.sum()


def noise_factor(kind: NoiseKind, v) -> np.ndarray:
    """The d x d noise matrix for deviation v: |v| I (isotropic) or diag(v)."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise InputError(f"deviation must be a vector, got shape {v.shape}")
    if NoiseKind(kind) is NoiseKind.ISOTROPIC:
        return float(np.linalg.norm(v)) * np.eye(v.size)
    return np.diag(v)


def _noise_term(kind: NoiseKind, centered: np.ndarray, dW: np.ndarray) -> np.ndarray:
    # row-wise S(x_j - m) dW_j, vectorized over the ensemble
    if kind is NoiseKind.ISOTROPIC:
        return np.linalg.norm(centered, axis=1, keepdims=True) * dW
    return centered * dW


def em_step(ens: Ensemble, params: CboParams, obj: Objective, dW) -> Ensemble:
    """One Euler-Maruyama step with the consensus point frozen at step start."""
    dW = np.asarray(dW, dtype=float)
    if dW.shape != ens.positions.shape:
        raise InputError(
            f"increment shape {dW.shape} does not match ensemble shape {ens.positions.shape}"
        )
    m = consensus_point(ens, params.alpha, obj)
    centered = ens.positions - m
    with np.errstate(over="ignore", invalid="ignore"):
        new_positions = ens.positions - centered * params.dt
        if params.sigma != 0.0:
            new_positions = new_positions + params.sigma * _noise_term(
                params.noise, centered, dW
            )
    finite_rows = np.isfinite(new_positions).all(axis=1)
    if not finite_rows.all():
        bad = int(np.flatnonzero(~finite_rows)[0])
        raise NumericError(
            f"non-finite position for particle {bad} after step at t={ens.time:.6g}"
        )
    return Ensemble(new_positions, time=ens.time + params.dt)


Observer = Callable[[int, Ensemble], None]


def simulate(
    init: Ensemble,
    params: CboParams,
    obj: Objective,
    stream: RngStream,
    observers: Sequence[Observer] = (),
    stride: int = 1,
) -> Ensemble:
    """Run the particle system over the horizon and return the final ensemble.

    Applies ceil(horizon/dt) steps.  Observers are called with
    (step_index, ensemble) at step 0, at every ``stride``-th step, and at the
    final step.  The run is a pure function of (init, params, stream); worker
    threads elsewhere never change the trajectory.  Increments are skipped
    entirely when sigma is zero, which does not perturb any other draw
    because every step has its own keyed stream.
    """
    if stride < 1:
        raise InputError(f"stride must be >= 1, got {stride}")
    n_steps = params.steps()
    for obs in observers:
        obs(0, init)
    ens = init
    for k in range(1, n_steps + 1):
        if params.sigma == 0.0:
            dW = np.zeros_like(init.positions)
        else:
            dW = brownian_increments(stream.at_step(k), init.J, init.d, params.dt)
        try:
            ens = em_step(ens, params, obj, dW)
        except NumericError as exc:
            raise NumericError(f"{exc} (step {k})") from exc
        # keep the grid exactly t0 + k*dt instead of accumulating additions
        ens = replace(ens, time=init.time + k * params.dt)
        if k % stride == 0 or k == n_steps:
            for obs in observers:
                obs(k, ens)
    return ens
