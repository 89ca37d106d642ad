"""Moment functionals, exact transport distance, fits and excursion counts.

Everything here is pure: moments and the Huygens residual are direct
evaluations, the Wasserstein-2 distance between equal-size ensembles is an
exact assignment solve, decay rates and scaling slopes come from least
squares on the log scale, and the excursion probability is a plain count
over recorded moment trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import linear_sum_assignment

from .constants import c_m_value
from .dynamics import Ensemble, RngStream, LANE_WM_REFERENCE, LANE_WM_REPLICATE, consensus_point, mean_point
from .errors import ConfigurationError, FitError, InputError
from .laws import InitialLaw, sample_initial
from .objectives import Objective

W2_MAX_SIZE = 512


def centered_moment(ens: Ensemble, p: float) -> float:
    """p-th absolute moment of the ensemble about its own mean."""
    if p < 1:
        raise InputError(f"moment order must be >= 1, got {p}")
    deviations = np.linalg.norm(ens.positions - mean_point(ens), axis=1)
    return float(np.mean(deviations**p))


def raw_moment(ens: Ensemble, p: float) -> float:
    """p-th absolute moment of the ensemble about the origin."""
    if p < 1:
        raise InputError(f"moment order must be >= 1, got {p}")
    return float(np.mean(np.linalg.norm(ens.positions, axis=1) ** p))


def huygens_residual(points) -> float:
    """Residual of the mean-square decomposition; vanishes identically.

    For points z_j with mean m: mean|z|^2 - mean|z - m|^2 - |m|^2.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.shape[0] < 1:
        raise InputError("huygens_residual needs at least one point")
    m = pts.mean(axis=0)
    raw = np.mean(np.sum(pts * pts, axis=1))
    centered = np.mean(np.sum((pts - m) ** 2, axis=1))
    return float(raw - centered - float(m @ m))


def identity_pairing_cost(a: Ensemble, b: Ensemble) -> float:
    """Mean squared row-to-row distance; an upper bound for the squared W2."""
    if a.J != b.J or a.d != b.d:
        raise InputError("identity pairing needs ensembles of equal shape")
    diff = a.positions - b.positions
    return float(np.mean(np.sum(diff * diff, axis=1)))


def exact_w2(a: Ensemble, b: Ensemble) -> float:
    """Exact Wasserstein-2 distance between equal-size empirical measures.

    Solved as an assignment problem (cubic in J), so the size is capped at
    512; beyond that use the identity pairing cost, which upper-bounds the
    squared distance.
    """
    if a.J != b.J or a.d != b.d:
        raise InputError(
            f"exact_w2 needs equal-size ensembles of equal dimension, "
            f"got ({a.J}, {a.d}) and ({b.J}, {b.d})"
        )
    if a.J > W2_MAX_SIZE:
        raise InputError(
            f"exact_w2 is capped at J = {W2_MAX_SIZE} (got {a.J}); use "
            "identity_pairing_cost, which bounds the squared distance from above"
        )
    sq_a = np.sum(a.positions**2, axis=1)[:, None]
    sq_b = np.sum(b.positions**2, axis=1)[None, :]
    cost = np.maximum(sq_a + sq_b - 2.0 * (a.positions @ b.positions.T), 0.0)
    rows, cols = linear_sum_assignment(cost)
    return math.sqrt(float(cost[rows, cols].mean()))


@dataclass(frozen=True)
class MomentSeries:
    """A recorded scalar functional of the state along one trajectory."""

    times: np.ndarray
    values: np.ndarray
    kind: str  # centered-p, raw-p, mfl-error, stability-gap, wm-error, ...
    p: Optional[float] = None
    replicate: int = 0

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.shape != v.shape or t.ndim != 1:
            raise InputError("times and values must be 1-d arrays of equal length")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise InputError("times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.times.size


class MomentRecorder:
    """Observer that records a centered or raw moment during a simulation."""

    def __init__(self, p: float, centered: bool = True, replicate: int = 0):
        self.p = p
        self.centered = centered
        self.replicate = replicate
        self._times: List[float] = []
        self._values: List[float] = []

    def __call__(self, step: int, ens: Ensemble) -> None:
        self._times.append(ens.time)
        self._values.append(
            centered_moment(ens, self.p) if self.centered else raw_moment(ens, self.p)
        )

    def series(self) -> MomentSeries:
        kind = f"{'centered' if self.centered else 'raw'}-{self.p:g}"
        return MomentSeries(
            np.asarray(self._times), np.asarray(self._values), kind, self.p, self.replicate
        )


@dataclass(frozen=True)
class FitResult:
    """Least-squares rate or slope with its fit quality and window."""

    estimate: float
    intercept: float
    r_squared: float
    window: Tuple[int, int]


def _line_fit(x: np.ndarray, y: np.ndarray) -> Tuple[float, float, float]:
    slope, intercept = np.polyfit(x, y, 1)
    predicted = slope * x + intercept
    ss_res = float(np.sum((y - predicted) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(slope), float(intercept), r2


def fit_exp_decay(series: MomentSeries, window: Optional[Tuple[int, int]] = None) -> FitResult:
    """Fit value ~ C e^{-rate t} by least squares on the log scale.

    The estimate is the decay rate (negated slope).  Nonpositive values in
    the window mean the signal has bottomed out at the noise floor; the
    caller should shrink the window.
    """
    lo, hi = window if window is not None else (0, len(series))
    if hi - lo < 2:
        raise FitError(f"fit window [{lo}, {hi}) has fewer than two points")
    t = series.times[lo:hi]
    v = series.values[lo:hi]
    if np.any(v <= 0):
        raise FitError(
            "nonpositive values in the fit window; the decay has reached the "
            "noise floor, shrink the window"
        )
    slope, intercept, r2 = _line_fit(t, np.log(v))
    return FitResult(-slope, intercept, r2, (lo, hi))


def fit_power_law(sizes: Sequence[int], errors: Sequence[float]) -> FitResult:
    """Fit error ~ C J^slope on the log-log scale; the estimate is the slope."""
    sizes = np.asarray(sizes, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if sizes.shape != errors.shape or sizes.ndim != 1 or sizes.size < 3:
        raise InputError("fit_power_law needs at least three (size, error) pairs")
    if np.any(sizes <= 0):
        raise InputError("sizes must be positive")
    if np.any(errors <= 0):
        raise FitError("nonpositive error values cannot be fitted on the log scale")
    slope, intercept, r2 = _line_fit(np.log(sizes), np.log(errors))
    return FitResult(slope, intercept, r2, (0, sizes.size))


def excursion_probability(
    runs: Sequence[MomentSeries],
    kappa: float,
    threshold: float,
    baseline: Union[float, str],
) -> float:
    """Fraction of runs whose weighted moment curve ever reaches the bar.

    Counts runs with max_t e^{kappa t} value(t) >= baseline + threshold on
    the recorded grid.  ``baseline`` is a number (e.g. the initial law's
    second centered moment) or the string ``"empirical"``, which uses each
    run's own initial value.
    """
    if len(runs) == 0:
        raise InputError("excursion_probability needs at least one run")
    t0 = runs[0].times
    for run in runs[1:]:
        if run.times.shape != t0.shape or not np.allclose(run.times, t0):
            raise InputError("all runs must share the same time grid")
    hits = 0
    for run in runs:
        base = run.values[0] if baseline == "empirical" else float(baseline)
        if np.max(np.exp(kappa * run.times) * run.values) >= base + threshold:
            hits += 1
    return hits / len(runs)


def wm_stability_gap(
    a: Ensemble, b: Ensemble, alpha: float, obj: Objective
) -> Tuple[float, float]:
    """Both sides of the weighted-mean stability bound for two ensembles.

    Left side: |(M_alpha - M)(a) - (M_alpha - M)(b)|.  Right side:
    C_M (sqrt(M2(a)) + sqrt(M2(b))) W2(a, b) with C_M the weighted-mean
    stability constant of the objective.  The contract is lhs <= rhs.
    """
    lhs_vec = (
        consensus_point(a, alpha, obj)
        - mean_point(a)
        - consensus_point(b, alpha, obj)
        + mean_point(b)
    )
    lhs = float(np.linalg.norm(lhs_vec))
    rhs = (
        c_m_value(alpha, obj.lipschitz, obj.upper_bound - obj.lower_bound)
        * (math.sqrt(centered_moment(a, 2)) + math.sqrt(centered_moment(b, 2)))
        * exact_w2(a, b)
    )
    return lhs, rhs


def _wm_squared_deviations(
    law: InitialLaw,
    obj: Objective,
    alpha: float,
    J: int,
    reference_size: int,
    replicates: int,
    stream: RngStream,
) -> np.ndarray:
    if reference_size < 100 * J:
        raise ConfigurationError(
            f"reference_size must be at least 100*J = {100 * J}, got {reference_size}"
        )
    if replicates < 1:
        raise InputError("replicates must be >= 1")
    reference = consensus_point(
        Ensemble(sample_initial(law, reference_size, stream, salt=LANE_WM_REFERENCE)),
        alpha,
        obj,
    )
    deviations = np.empty(replicates)
    for r in range(replicates):
        sample = sample_initial(law, J, stream.for_replicate(r), salt=LANE_WM_REPLICATE)
        point = consensus_point(Ensemble(sample), alpha, obj)
        deviations[r] = float(np.sum((point - reference) ** 2))
    return deviations


def wm_mc_error(
    law: InitialLaw,
    obj: Objective,
    alpha: float,
    J: int,
    reference_size: int,
    replicates: int,
    stream: RngStream,
) -> Tuple[float, float]:
    """Estimate E |consensus of J samples - consensus of the law|^2.

    The law's weighted mean is approximated once by the consensus point of
    ``reference_size`` i.i.d. samples; the returned value is the average over
    replicates of the squared deviation of size-J sample consensus points,
    together with its standard error.
    """
    deviations = _wm_squared_deviations(
        law, obj, alpha, J, reference_size, replicates, stream
    )
    mean = float(deviations.mean())
    stderr = (
        float(deviations.std(ddof=1) / math.sqrt(replicates)) if replicates > 1 else 0.0
    )
    return mean, stderr
