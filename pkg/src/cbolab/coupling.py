"""Synchronous couplings of the interacting particle system.

Two constructions are provided.  The mean-field coupling pairs a size-J
interacting system with a larger ensemble of M i.i.d. "mean-field" particles
that all move toward the consensus point of the whole size-M ensemble (the
empirical proxy for the weighted mean of the limiting law); the first J
mean-field particles start at the interacting particles' positions and
consume the same Brownian increments, row for row.  The stability coupling
runs two interacting copies from possibly different initial laws under
shared increments.

Both couplings are value-like containers; advancing one returns a new one.
Because increments are keyed by (replicate, step) and row j of a block never
depends on the block height, sharing increments between the size-J and
size-M systems is a by-construction guarantee rather than bookkeeping.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .constants import sigma_tilde_value
from .dynamics import CboParams, Ensemble, RngStream, consensus_point, em_step, tau
from .errors import ConfigurationError, InputError, NumericError
from .laws import InitialLaw, sample_initial
from .objectives import Objective


def _warn_if_supercritical(params: CboParams, obj: Objective) -> None:
    threshold = sigma_tilde_value(
        params.alpha, obj.upper_bound - obj.lower_bound, tau(params.noise, obj.dimension)
    )
    if params.sigma >= threshold:
        warnings.warn(
            f"sigma = {params.sigma:g} is at or above the uniform-in-time threshold "
            f"sigma_tilde = {threshold:.6g}; the coupling bounds are not guaranteed",
            stacklevel=3,
        )


@dataclass(frozen=True)
class MflCoupledSystem:
    """Interacting ensemble coupled to M >= J i.i.d. mean-field particles."""

    interacting: Ensemble
    meanfield: Ensemble
    params: CboParams
    objective: Objective

    def __post_init__(self):
        if self.interacting.d != self.meanfield.d:
            raise ConfigurationError("coupled ensembles must share the dimension")
        if self.meanfield.J < self.interacting.J:
            raise ConfigurationError(
                f"mean-field ensemble of size {self.meanfield.J} cannot couple "
                f"a system of size {self.interacting.J}"
            )

    @property
    def J(self) -> int:
        return self.interacting.J

    @property
    def M(self) -> int:
        return self.meanfield.J

    @property
    def d(self) -> int:
        return self.interacting.d


def init_mfl_coupling(
    law: InitialLaw,
    J: int,
    M: int,
    params: CboParams,
    obj: Objective,
    stream: RngStream,
) -> MflCoupledSystem:
    """Draw M i.i.d. positions and couple the first J as the interacting system.

    At time zero the coupled rows coincide exactly, so the mean-field error
    starts at 0.  A supercritical sigma only warns; exploring the breakdown
    of uniformity is allowed.
    """
    if M < J:
        raise ConfigurationError(f"need M >= J, got M={M}, J={J}")
    if law.d != obj.dimension:
        raise ConfigurationError(
            f"law dimension {law.d} does not match objective dimension {obj.dimension}"
        )
    _warn_if_supercritical(params, obj)
    draws = sample_initial(law, M, stream)
    return MflCoupledSystem(
        interacting=Ensemble(draws[:J]),
        meanfield=Ensemble(draws),
        params=params,
        objective=obj,
    )


def mfl_coupled_step(sys: MflCoupledSystem, dW_mf: np.ndarray) -> MflCoupledSystem:
    """Advance both subsystems one step under shared increments.

    The interacting system uses its own consensus point and rows 0..J-1 of
    ``dW_mf``; every mean-field particle moves toward the consensus point of
    the full size-M ensemble.
    """
    dW_mf = np.asarray(dW_mf, dtype=float)
    if dW_mf.shape != (sys.M, sys.d):
        raise InputError(
            f"increment shape {dW_mf.shape} does not match the mean-field shape "
            f"({sys.M}, {sys.d})"
        )
    try:
        interacting = em_step(sys.interacting, sys.params, sys.objective, dW_mf[: sys.J])
    except NumericError as exc:
        raise NumericError(f"interacting subsystem: {exc}") from exc
    try:
        meanfield = em_step(sys.meanfield, sys.params, sys.objective, dW_mf)
    except NumericError as exc:
        raise NumericError(f"mean-field subsystem: {exc}") from exc
    return replace(sys, interacting=interacting, meanfield=meanfield)


def mfl_error(sys: MflCoupledSystem) -> float:
    """Mean squared distance between coupled rows: the pathwise coupling error."""
    diff = sys.interacting.positions - sys.meanfield.positions[: sys.J]
    return float(np.mean(np.sum(diff * diff, axis=1)))


def wm_sampling_error(sys: MflCoupledSystem) -> float:
    """Squared distance between the proxy consensus and a size-J subsample's.

    Empirical stand-in for the squared weighted-mean sampling error of J
    i.i.d. particles; degenerate (and rejected) when M = J.
    """
    if sys.M <= sys.J:
        raise InputError("wm_sampling_error needs M > J; the proxy is degenerate at M = J")
    full = consensus_point(sys.meanfield, sys.params.alpha, sys.objective)
    sub = consensus_point(
        Ensemble(sys.meanfield.positions[: sys.J], time=sys.meanfield.time),
        sys.params.alpha,
        sys.objective,
    )
    return float(np.sum((full - sub) ** 2))


@dataclass(frozen=True)
class StabilityCoupledSystem:
    """Two interacting copies of equal size driven by the same increments."""

    copy_a: Ensemble
    copy_b: Ensemble
    params: CboParams
    objective: Objective

    def __post_init__(self):
        if self.copy_a.d != self.copy_b.d:
            raise ConfigurationError("stability copies must share the dimension")
        if self.copy_a.J != self.copy_b.J:
            raise ConfigurationError("stability copies must share the particle count")

    @property
    def J(self) -> int:
        return self.copy_a.J

    @property
    def d(self) -> int:
        return self.copy_a.d


def init_stability_coupling(
    law_a: InitialLaw,
    law_b: InitialLaw,
    J: int,
    params: CboParams,
    obj: Objective,
    stream: RngStream,
    shared_initial_stream: bool = False,
) -> StabilityCoupledSystem:
    """Draw the two copies independently from their laws.

    With ``shared_initial_stream`` the second copy reuses the first copy's
    sampling stream, so identical laws give identical copies (gap zero).
    """
    if law_a.d != law_b.d:
        raise ConfigurationError(
            f"stability laws have dimensions {law_a.d} and {law_b.d}"
        )
    if law_a.d != obj.dimension:
        raise ConfigurationError(
            f"law dimension {law_a.d} does not match objective dimension {obj.dimension}"
        )
    _warn_if_supercritical(params, obj)
    copy_a = sample_initial(law_a, J, stream, salt=0)
    copy_b = sample_initial(law_b, J, stream, salt=0 if shared_initial_stream else 1)
    return StabilityCoupledSystem(
        copy_a=Ensemble(copy_a), copy_b=Ensemble(copy_b), params=params, objective=obj
    )


def stability_coupled_step(sys: StabilityCoupledSystem, dW: np.ndarray) -> StabilityCoupledSystem:
    """Advance both copies with their own consensus points and the same noise."""
    dW = np.asarray(dW, dtype=float)
    if dW.shape != (sys.J, sys.d):
        raise InputError(
            f"increment shape {dW.shape} does not match the copies' shape ({sys.J}, {sys.d})"
        )
    try:
        copy_a = em_step(sys.copy_a, sys.params, sys.objective, dW)
    except NumericError as exc:
        raise NumericError(f"copy-a: {exc}") from exc
    try:
        copy_b = em_step(sys.copy_b, sys.params, sys.objective, dW)
    except NumericError as exc:
        raise NumericError(f"copy-b: {exc}") from exc
    return replace(sys, copy_a=copy_a, copy_b=copy_b)


def stability_gap(sys: StabilityCoupledSystem) -> float:
    """Mean squared distance between the two copies, row for row."""
    diff = sys.copy_a.positions - sys.copy_b.positions
    return float(np.mean(np.sum(diff * diff, axis=1)))
