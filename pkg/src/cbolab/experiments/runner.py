"""Replicate sweeps for the headline experiments.

Each runner executes R independent replicates (optionally on a thread pool;
replicate r derives every stream from (master seed, r), so the schedule
cannot change any number), aggregates the recorded series, fits rates or
slopes where the experiment calls for it, and returns an
:class:`ExperimentResult` whose content is a pure function of (config, seed).

Ladder experiments share work across the ladder: one replicate draws the
largest ensemble once and every smaller system is its prefix, consuming the
leading rows of the same increments.  This is numerically identical to
running the couplings one J at a time with the same streams, because blocks
of increments are prefix-stable by construction.
"""

from __future__ import annotations

import logging
import math
import time as _time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .. import __version__
from ..analysis import (
    FitResult,
    MomentRecorder,
    MomentSeries,
    excursion_probability,
    fit_exp_decay,
    fit_power_law,
    _wm_squared_deviations,
)
from ..constants import (
    ConstantsReport,
    ProblemProfile,
    c_bad_particle,
    c_wm_p,
    lambda_p,
    sigma_tilde,
    theorem_constants,
)
from ..dynamics import (
    CboParams,
    Ensemble,
    RngStream,
    brownian_increments,
    consensus_point,
    em_step,
    simulate,
)
from ..errors import FitError, PreconditionError
from ..laws import law_centered_moment, sample_initial
from ..objectives import Objective
from .config import ExperimentConfig

log = logging.getLogger("cbolab")


@dataclass(frozen=True)
class Aggregate:
    """Replicate mean of a series with its pointwise standard error."""

    times: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    n: int


@dataclass
class ExperimentResult:
    """Everything one experiment produced, sufficient to reproduce it."""

    kind: str
    version: str
    seed: int
    config_echo: dict
    series: Dict[str, List[MomentSeries]] = field(default_factory=dict)
    aggregates: Dict[str, Aggregate] = field(default_factory=dict)
    fits: Dict[str, dict] = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    constants: Optional[ConstantsReport] = None
    notes: List[str] = field(default_factory=list)
    wall_clock: float = 0.0


# ---------------------------------------------------------------------------
# Shared machinery
# ---------------------------------------------------------------------------


def _parallel_map(fn: Callable[[int], dict], count: int, workers: int) -> List[dict]:
    if workers <= 1:
        return [fn(r) for r in range(count)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(count)))


def _aggregate(series_list: Sequence[MomentSeries]) -> Aggregate:
    times = series_list[0].times
    values = np.stack([s.values for s in series_list])
    n = values.shape[0]
    mean = values.mean(axis=0)
    stderr = values.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros_like(mean)
    return Aggregate(times=times, mean=mean, stderr=stderr, n=n)


def _decay_window(agg: Aggregate, fraction: float, notes: List[str], label: str) -> Tuple[int, int]:
    """Window for a decay fit: leading fraction, trimmed above the noise floor."""
    hi = max(2, math.ceil(fraction * len(agg.times)))
    hi0 = hi
    while hi > 2 and (agg.mean[hi - 1] <= 0 or agg.mean[hi - 1] <= 10.0 * agg.stderr[hi - 1]):
        hi -= 1
    if hi != hi0:
        note = f"{label}: fit window shrunk from {hi0} to {hi} points (noise floor)"
        notes.append(note)
        log.info(note)
    return 0, hi


def _fit_dict(fit: FitResult, stderr: Optional[float] = None) -> dict:
    out = {
        "estimate": fit.estimate,
        "intercept": fit.intercept,
        "r_squared": fit.r_squared,
        "window_lo": fit.window[0],
        "window_hi": fit.window[1],
    }
    if stderr is not None:
        out["stderr"] = stderr
    return out


def _jackknife_stderr(estimates: Sequence[float]) -> float:
    theta = np.asarray(estimates, dtype=float)
    n = theta.size
    if n < 2 or not np.all(np.isfinite(theta)):
        return float("nan")
    return float(math.sqrt((n - 1) / n * np.sum((theta - theta.mean()) ** 2)))


def _leave_one_out_means(values: np.ndarray) -> np.ndarray:
    # values: (R, T) -> (R, T) of means over the other R-1 replicates
    total = values.sum(axis=0, keepdims=True)
    return (total - values) / (values.shape[0] - 1)


def _grid_sup(times: np.ndarray, mean: np.ndarray, lo: float, hi: float) -> float:
    mask = (times >= lo - 1e-12) & (times <= hi + 1e-12)
    return float(mean[mask].max()) if mask.any() else 0.0


def _wilson_interval(successes: int, n: int, z: float = 1.959963984540054) -> Tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    phat = successes / n
    denom = 1.0 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def _profile(config: ExperimentConfig) -> ProblemProfile:
    return ProblemProfile.from_components(
        config.build_objective(), config.build_params(), config.build_law(), q=config.q
    )


def _require_subcritical(config: ExperimentConfig, profile: ProblemProfile) -> None:
    threshold = sigma_tilde(profile)
    if profile.sigma >= threshold and not config.allow_supercritical:
        raise PreconditionError(
            f"sigma = {profile.sigma:g} is not below sigma_tilde = {threshold:.6g}; "
            "pass --allow-supercritical to run anyway"
        )


def _observation_steps(params: CboParams, stride: int) -> List[int]:
    n = params.steps()
    steps = list(range(0, n + 1, stride))
    if steps[-1] != n:
        steps.append(n)
    return steps


# ---------------------------------------------------------------------------
# moments: exponential decay of centered moments
# ---------------------------------------------------------------------------

_MOMENT_ORDERS = (2.0, 4.0, 8.0)


def run_moments(config: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    obj = config.build_objective()
    law = config.build_law()
    params = config.build_params()
    profile = _profile(config)
    result = _new_result(config)
    result.constants = theorem_constants(profile)

    base = RngStream(config.seed)
    J = config.particles

    def one_replicate(r: int) -> dict:
        stream = base.for_replicate(r)
        init = Ensemble(sample_initial(law, J, stream))
        recorders = [MomentRecorder(p, centered=True, replicate=r) for p in _MOMENT_ORDERS]
        simulate(init, params, obj, stream, recorders, stride=config.stride)
        return {f"centered-{p:g}": rec.series() for p, rec in zip(_MOMENT_ORDERS, recorders)}

    outputs = _parallel_map(one_replicate, config.replicates, workers)
    rates: Dict[str, dict] = {}
    for p in _MOMENT_ORDERS:
        label = f"centered-{p:g}"
        series = [out[label] for out in outputs]
        agg = _aggregate(series)
        result.series[label] = series
        result.aggregates[label] = agg
        window = _decay_window(agg, config.fit_window, result.notes, label)
        mean_series = MomentSeries(agg.times, agg.mean, label, p)
        fit = fit_exp_decay(mean_series, window)
        # jackknife over replicates for the rate uncertainty
        loo = _leave_one_out_means(np.stack([s.values for s in series]))
        loo_rates = []
        for row in loo:
            try:
                loo_rates.append(fit_exp_decay(MomentSeries(agg.times, row, label, p), window).estimate)
            except FitError:
                loo_rates.append(float("nan"))
        stderr = _jackknife_stderr(loo_rates)
        result.fits[f"decay-rate-{label}"] = _fit_dict(fit, stderr)
        lam = lambda_p(profile, p)
        rates[f"{p:g}"] = {
            "estimate": fit.estimate,
            "stderr": stderr,
            "r_squared": fit.r_squared,
            "lambda": lam,
            "satisfies_lower_bound": bool(
                fit.estimate >= lam - 2.0 * stderr if math.isfinite(stderr) else fit.estimate >= lam
            ),
        }
    result.checks = {"rates": rates}
    return result


# ---------------------------------------------------------------------------
# mfl: uniform-in-time propagation of chaos
# ---------------------------------------------------------------------------


def run_mfl(config: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    obj = config.build_objective()
    law = config.build_law()
    params = config.build_params()
    profile = _profile(config)
    _require_subcritical(config, profile)

    result = _new_result(config)
    result.constants = theorem_constants(profile)
    ladder = config.j_ladder
    M = config.oversample * max(ladder)
    obs_steps = set(_observation_steps(params, config.stride))
    n_steps = params.steps()
    base = RngStream(config.seed)

    def one_replicate(r: int) -> dict:
        stream = base.for_replicate(r)
        draws = sample_initial(law, M, stream)
        meanfield = Ensemble(draws)
        interacting = {J: Ensemble(draws[:J]) for J in ladder}
        times: List[float] = []
        errors = {J: [] for J in ladder}
        wm_err = {J: [] for J in ladder}

        def observe(step: int) -> None:
            times.append(step * params.dt)
            full_consensus = consensus_point(meanfield, params.alpha, obj)
            for J in ladder:
                diff = interacting[J].positions - meanfield.positions[:J]
                errors[J].append(float(np.mean(np.sum(diff * diff, axis=1))))
                sub = consensus_point(Ensemble(meanfield.positions[:J]), params.alpha, obj)
                wm_err[J].append(float(np.sum((full_consensus - sub) ** 2)))

        observe(0)
        for k in range(1, n_steps + 1):
            dW = brownian_increments(stream.at_step(k), M, meanfield.d, params.dt)
            for J in ladder:
                interacting[J] = em_step(interacting[J], params, obj, dW[:J])
            meanfield = em_step(meanfield, params, obj, dW)
            if k in obs_steps:
                observe(k)

        t = np.asarray(times)
        out = {}
        for J in ladder:
            out[f"mfl-error_J{J:05d}"] = MomentSeries(t, np.asarray(errors[J]), "mfl-error", None, r)
            out[f"wm-error_J{J:05d}"] = MomentSeries(t, np.asarray(wm_err[J]), "wm-error", None, r)
        return out

    outputs = _parallel_map(one_replicate, config.replicates, workers)
    for label in outputs[0]:
        series = [out[label] for out in outputs]
        result.series[label] = series
        result.aggregates[label] = _aggregate(series)

    horizon = params.horizon
    sups: Dict[str, float] = {}
    uniformity: Dict[str, float] = {}
    mfl_bound_ok: Dict[str, Optional[bool]] = {}
    c_mfl = result.constants.c_mfl
    error_values = {}
    for J in ladder:
        agg = result.aggregates[f"mfl-error_J{J:05d}"]
        sups[str(J)] = float(agg.mean.max())
        first = _grid_sup(agg.times, agg.mean, 0.0, horizon / 2)
        second = _grid_sup(agg.times, agg.mean, horizon / 2, horizon)
        uniformity[str(J)] = second / first if first > 0 else (0.0 if second == 0 else math.inf)
        mfl_bound_ok[str(J)] = (
            bool(agg.mean.max() <= c_mfl / J) if c_mfl is not None else None
        )
        error_values[J] = np.stack(
            [s.values for s in result.series[f"mfl-error_J{J:05d}"]]
        )

    sup_list = [sups[str(J)] for J in ladder]
    slope_fit, slope_se = _ladder_slope_with_jackknife(ladder, error_values, result.notes)
    if slope_fit is not None:
        result.fits["mfl-scaling"] = _fit_dict(slope_fit, slope_se)
    result.checks = {
        "sup_mean_error": sups,
        "uniformity_ratio": uniformity,
        "uniform_in_time": bool(
            all(v <= 2.0 for v in uniformity.values())
        ),
        "slope": slope_fit.estimate if slope_fit else None,
        "slope_stderr": slope_se,
        "r_squared": slope_fit.r_squared if slope_fit else None,
        "c_mfl": c_mfl,
        "mfl_bound_satisfied": mfl_bound_ok,
        "oversample_M": M,
    }
    return result


def _ladder_slope_with_jackknife(
    ladder: Sequence[int], per_j_values: Dict[int, np.ndarray], notes: List[str]
) -> Tuple[Optional[FitResult], float]:
    """Slope of log sup-of-mean vs log J, with a replicate jackknife."""
    sups = [float(per_j_values[J].mean(axis=0).max()) for J in ladder]
    if len(ladder) < 3:
        notes.append("scaling slope skipped: the ladder has fewer than three sizes")
        return None, float("nan")
    try:
        fit = fit_power_law(list(ladder), sups)
    except FitError:
        notes.append("scaling slope skipped: sup of the mean error is not positive")
        return None, float("nan")
    n = next(iter(per_j_values.values())).shape[0]
    loo_slopes = []
    for i in range(n):
        loo_sups = []
        for J in ladder:
            vals = per_j_values[J]
            loo_mean = (vals.sum(axis=0) - vals[i]) / (n - 1)
            loo_sups.append(float(loo_mean.max()))
        try:
            loo_slopes.append(fit_power_law(list(ladder), loo_sups).estimate)
        except FitError:
            loo_slopes.append(float("nan"))
    return fit, _jackknife_stderr(loo_slopes)


# ---------------------------------------------------------------------------
# stability: two interacting copies under shared noise
# ---------------------------------------------------------------------------


def run_stability(config: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    obj = config.build_objective()
    law_a = config.build_law()
    law_b = config.build_law_b()
    params = config.build_params()
    profile = _profile(config)
    result = _new_result(config)
    result.constants = theorem_constants(profile)

    ladder = config.j_ladder
    j_max = max(ladder)
    obs_steps = set(_observation_steps(params, config.stride))
    n_steps = params.steps()
    base = RngStream(config.seed)

    def one_replicate(r: int) -> dict:
        stream = base.for_replicate(r)
        draws_a = sample_initial(law_a, j_max, stream, salt=0)
        draws_b = sample_initial(law_b, j_max, stream, salt=1)
        copies = {J: (Ensemble(draws_a[:J]), Ensemble(draws_b[:J])) for J in ladder}
        times: List[float] = []
        gaps = {J: [] for J in ladder}

        def observe(step: int) -> None:
            times.append(step * params.dt)
            for J in ladder:
                a, b = copies[J]
                diff = a.positions - b.positions
                gaps[J].append(float(np.mean(np.sum(diff * diff, axis=1))))

        observe(0)
        for k in range(1, n_steps + 1):
            dW = brownian_increments(stream.at_step(k), j_max, law_a.d, params.dt)
            for J in ladder:
                a, b = copies[J]
                copies[J] = (
                    em_step(a, params, obj, dW[:J]),
                    em_step(b, params, obj, dW[:J]),
                )
            if k in obs_steps:
                observe(k)

        t = np.asarray(times)
        return {
            f"stability-gap_J{J:05d}": MomentSeries(t, np.asarray(gaps[J]), "stability-gap", None, r)
            for J in ladder
        }

    outputs = _parallel_map(one_replicate, config.replicates, workers)
    horizon = params.horizon
    e_g0: Dict[str, float] = {}
    sup_ratio: Dict[str, float] = {}
    late_ratio: Dict[str, float] = {}
    for label in outputs[0]:
        series = [out[label] for out in outputs]
        result.series[label] = series
        result.aggregates[label] = _aggregate(series)
    for J in ladder:
        agg = result.aggregates[f"stability-gap_J{J:05d}"]
        g0 = float(agg.mean[0])
        e_g0[str(J)] = g0
        sup_ratio[str(J)] = float(agg.mean.max()) / g0 if g0 > 0 else math.inf
        mid = _grid_sup(agg.times, agg.mean, horizon / 2, 3 * horizon / 4)
        late = _grid_sup(agg.times, agg.mean, 3 * horizon / 4, horizon)
        late_ratio[str(J)] = late / mid if mid > 0 else (0.0 if late == 0 else math.inf)

    ratios = list(sup_ratio.values())
    spread = max(ratios) / min(ratios) if min(ratios) > 0 else math.inf

    # one-sided theorem bound: sup_t E G_t <= C_stab1 E G_0 + C_stab2 / J^q
    # (the constants are astronomically conservative, often infinite in
    # float64, so this is informative only near sigma = 0)
    rate_q = result.constants.stability_rate_exponent
    bound_ok: Dict[str, Optional[bool]] = {}
    for J in ladder:
        if result.constants.c_stab_1 is None or rate_q is None:
            bound_ok[str(J)] = None
        else:
            bound = (
                result.constants.c_stab_1 * e_g0[str(J)]
                + result.constants.c_stab_2 / J**rate_q
            )
            agg = result.aggregates[f"stability-gap_J{J:05d}"]
            bound_ok[str(J)] = bool(agg.mean.max() <= bound)

    # residual scaling diagnostic: subtract the fitted J-independent part
    # c * E G_0 and fit the leftover sup against J where it stays positive
    c_fitted = min(ratios)
    residual_fit = None
    residual_points = {}
    for J in ladder:
        agg = result.aggregates[f"stability-gap_J{J:05d}"]
        floor = 10.0 * float(agg.stderr.max())
        residual_points[str(J)] = max(
            float(agg.mean.max()) - c_fitted * e_g0[str(J)], floor
        )
    try:
        if len(ladder) >= 3:
            fit = fit_power_law(list(ladder), [residual_points[str(J)] for J in ladder])
            residual_fit = _fit_dict(fit)
            result.fits["stability-residual-scaling"] = residual_fit
    except FitError:
        result.notes.append("stability residual slope skipped: residuals hit the floor")

    result.checks = {
        "e_g0": e_g0,
        "sup_ratio": sup_ratio,
        "ratio_spread": spread,
        "ratio_spread_below_2": bool(spread < 2.0),
        "late_growth_ratio": late_ratio,
        "no_late_growth": bool(all(v <= 1.5 for v in late_ratio.values())),
        "stability_bound_satisfied": bound_ok,
        "fitted_g0_coefficient": c_fitted,
        "residual_sup": residual_points,
    }
    return result


# ---------------------------------------------------------------------------
# concentration: excursion probabilities of the weighted second moment
# ---------------------------------------------------------------------------


def run_concentration(config: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    obj = config.build_objective()
    law = config.build_law()
    params = config.build_params()
    profile = _profile(config)
    result = _new_result(config)
    result.constants = theorem_constants(profile)

    q = config.q
    lam2 = lambda_p(profile, 2.0)
    lam2q = lambda_p(profile, 2.0 * q)
    lam8 = lambda_p(profile, 8.0)
    if config.kappa is not None:
        kappa = config.kappa
    else:
        if lam8 <= 0:
            raise PreconditionError(
                f"lambda_8 = {lam8:.6g} is not positive; pass an explicit kappa"
            )
        kappa = lam8 / 8.0
    valid_upper = min(lam2, lam2q / q)
    if kappa >= valid_upper and not config.allow_supercritical:
        raise PreconditionError(
            f"kappa = {kappa:.6g} is outside the valid interval (0, {valid_upper:.6g}) "
            f"= (0, min(lambda_2, lambda_{2 * q:g}/q))"
        )

    m2_law = law_centered_moment(law, 2.0)
    m2q_law = law_centered_moment(law, 2.0 * q)
    ladder = config.j_ladder
    base = RngStream(config.seed)

    try:
        bad_const = c_bad_particle(profile, q, kappa)
    except PreconditionError:
        bad_const = None
        result.notes.append("theoretical excursion ceiling unavailable for this kappa")

    probabilities: Dict[str, float] = {}
    stderrs: Dict[str, float] = {}
    wilson_low: Dict[str, float] = {}
    wilson_high: Dict[str, float] = {}
    ceilings: Dict[str, Optional[float]] = {}
    below_ceiling: Dict[str, Optional[bool]] = {}

    for J in ladder:

        def one_replicate(r: int, J=J) -> dict:
            stream = base.for_replicate(r)
            init = Ensemble(sample_initial(law, J, stream))
            rec = MomentRecorder(2.0, centered=True, replicate=r)
            simulate(init, params, obj, stream, [rec], stride=config.stride)
            return {"series": rec.series()}

        outputs = _parallel_map(one_replicate, config.replicates, workers)
        label = f"centered-2_J{J:05d}"
        series = [out["series"] for out in outputs]
        result.series[label] = series
        result.aggregates[label] = _aggregate(series)

        if config.baseline == "law":
            baseline = m2_law
        elif config.baseline == "expected":
            baseline = (1.0 - 1.0 / J) * m2_law
        else:
            baseline = "empirical"
        p_hat = excursion_probability(series, kappa, config.threshold_a, baseline)
        hits = round(p_hat * config.replicates)
        probabilities[str(J)] = p_hat
        stderrs[str(J)] = math.sqrt(max(p_hat * (1 - p_hat), 0.0) / config.replicates)
        lo, hi = _wilson_interval(hits, config.replicates)
        wilson_low[str(J)], wilson_high[str(J)] = lo, hi
        if bad_const is not None:
            ceiling = bad_const * config.threshold_a ** (-q) * J ** (-q / 2.0) * m2q_law
            ceilings[str(J)] = ceiling
            below_ceiling[str(J)] = bool(p_hat <= ceiling)
        else:
            ceilings[str(J)] = None
            below_ceiling[str(J)] = None

    p_values = [probabilities[str(J)] for J in ladder]
    inversions = sum(1 for a, b in zip(p_values, p_values[1:]) if b > a)
    significant = sum(
        1
        for J1, J2 in zip(ladder, ladder[1:])
        if wilson_low[str(J2)] > wilson_high[str(J1)]
    )
    result.checks = {
        "q": q,
        "kappa": kappa,
        "threshold_a": config.threshold_a,
        "baseline_mode": config.baseline,
        "baseline_m2": m2_law,
        "probabilities": probabilities,
        "stderr": stderrs,
        "wilson_low": wilson_low,
        "wilson_high": wilson_high,
        "inversions": inversions,
        "significant_increases": significant,
        "trend_ok": bool(inversions <= 1 and significant == 0),
        "ceiling": ceilings,
        "below_ceiling": below_ceiling,
    }
    return result


# ---------------------------------------------------------------------------
# wm-mc: Monte Carlo convergence of the weighted mean
# ---------------------------------------------------------------------------


def run_wm_mc(config: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    obj = config.build_objective()
    law = config.build_law()
    params = config.build_params()
    profile = _profile(config)
    result = _new_result(config)
    result.constants = theorem_constants(profile)

    ladder = config.j_ladder
    reference_size = config.reference_size or 100 * max(ladder)
    base = RngStream(config.seed)
    m2_law = law_centered_moment(law, 2.0)
    wm_const = c_wm_p(profile, 2.0)

    errors: Dict[str, float] = {}
    stderrs: Dict[str, float] = {}
    below_bound: Dict[str, bool] = {}
    product_checks: Dict[str, dict] = {}
    values_for_fit: List[float] = []
    for J in ladder:
        deviations = _wm_squared_deviations(
            law, obj, params.alpha, J, reference_size, config.replicates, base
        )
        label = f"wm-error_J{J:05d}"
        result.series[label] = [
            MomentSeries(np.array([0.0]), np.array([dev]), "wm-error", None, r)
            for r, dev in enumerate(deviations)
        ]
        mean = float(deviations.mean())
        se = (
            float(deviations.std(ddof=1) / math.sqrt(len(deviations)))
            if len(deviations) > 1
            else 0.0
        )
        errors[str(J)] = mean
        stderrs[str(J)] = se
        values_for_fit.append(mean)
        below_bound[str(J)] = bool(mean <= wm_const * m2_law / J)
        if params.alpha == 0.0:
            product_checks[str(J)] = {
                "product": mean * J,
                "target": m2_law,
                "within_3se": bool(abs(mean * J - m2_law) <= 3.0 * se * J),
            }

    fit = fit_power_law(list(ladder), values_for_fit)
    result.fits["wm-mc-scaling"] = _fit_dict(fit)
    result.checks = {
        "reference_size": reference_size,
        "errors": errors,
        "stderr": stderrs,
        "slope": fit.estimate,
        "r_squared": fit.r_squared,
        "wm_constant": wm_const,
        "m2_law": m2_law,
        "below_bound": below_bound,
        "alpha_zero_product": product_checks or None,
    }
    return result


# ---------------------------------------------------------------------------
# optimize and simulate: plain runners
# ---------------------------------------------------------------------------


class _ConsensusRecorder:
    """Observer recording the cost at the consensus point and the gap to x*."""

    def __init__(self, alpha: float, obj: Objective, replicate: int):
        self.alpha = alpha
        self.obj = obj
        self.replicate = replicate
        self.times: List[float] = []
        self.cost: List[float] = []
        self.gap: List[float] = []

    def __call__(self, step: int, ens: Ensemble) -> None:
        m = consensus_point(ens, self.alpha, self.obj)
        self.times.append(ens.time)
        self.cost.append(float(self.obj.batch(m[None, :])[0]))
        if self.obj.minimizer is not None:
            self.gap.append(float(np.linalg.norm(m - self.obj.minimizer)))


def run_optimize(config: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    obj = config.build_objective()
    law = config.build_law()
    params = config.build_params()
    result = _new_result(config)
    base = RngStream(config.seed)
    J = config.particles

    def one_replicate(r: int) -> dict:
        stream = base.for_replicate(r)
        init = Ensemble(sample_initial(law, J, stream))
        rec = _ConsensusRecorder(params.alpha, obj, r)
        simulate(init, params, obj, stream, [rec], stride=config.stride)
        out = {
            "objective-at-consensus": MomentSeries(
                np.asarray(rec.times), np.asarray(rec.cost), "objective-at-consensus", None, r
            )
        }
        if rec.gap:
            out["consensus-gap"] = MomentSeries(
                np.asarray(rec.times), np.asarray(rec.gap), "consensus-gap", None, r
            )
        return out

    outputs = _parallel_map(one_replicate, config.replicates, workers)
    for label in outputs[0]:
        series = [out[label] for out in outputs]
        result.series[label] = series
        result.aggregates[label] = _aggregate(series)

    checks: dict = {
        "final_objective_mean": float(result.aggregates["objective-at-consensus"].mean[-1])
    }
    if "consensus-gap" in result.series:
        final_gaps = [float(s.values[-1]) for s in result.series["consensus-gap"]]
        checks["final_gaps"] = final_gaps
        checks["final_gap_mean"] = float(np.mean(final_gaps))
        checks["success_fraction_0.1"] = float(np.mean([g <= 0.1 for g in final_gaps]))
    result.checks = checks
    return result


def run_simulate(config: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    obj = config.build_objective()
    law = config.build_law()
    params = config.build_params()
    result = _new_result(config)
    result.constants = theorem_constants(_profile(config))
    base = RngStream(config.seed)
    J = config.particles

    def one_replicate(r: int) -> dict:
        stream = base.for_replicate(r)
        init = Ensemble(sample_initial(law, J, stream))
        rec_c = MomentRecorder(2.0, centered=True, replicate=r)
        rec_r = MomentRecorder(2.0, centered=False, replicate=r)
        simulate(init, params, obj, stream, [rec_c, rec_r], stride=config.stride)
        return {"centered-2": rec_c.series(), "raw-2": rec_r.series()}

    outputs = _parallel_map(one_replicate, config.replicates, workers)
    for label in ("centered-2", "raw-2"):
        series = [out[label] for out in outputs]
        result.series[label] = series
        result.aggregates[label] = _aggregate(series)
    result.checks = {
        "final_centered_2": float(result.aggregates["centered-2"].mean[-1]),
        "final_raw_2": float(result.aggregates["raw-2"].mean[-1]),
    }
    return result


def run_constants(config: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    result = _new_result(config)
    result.constants = theorem_constants(_profile(config))
    return result


# ---------------------------------------------------------------------------
# Dispatch
# ---------------------------------------------------------------------------

_RUNNERS = {
    "constants": run_constants,
    "simulate": run_simulate,
    "optimize": run_optimize,
    "moments": run_moments,
    "mfl": run_mfl,
    "stability": run_stability,
    "concentration": run_concentration,
    "wm-mc": run_wm_mc,
}


def _new_result(config: ExperimentConfig) -> ExperimentResult:
    return ExperimentResult(
        kind=config.kind,
        version=__version__,
        seed=config.seed,
        config_echo=config.echo,
    )


def run_experiment(config: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    """Run the configured experiment and stamp its wall-clock time.

    ``workers`` sizes the replicate thread pool; it is an execution detail
    and cannot change any emitted number.
    """
    start = _time.perf_counter()
    result = _RUNNERS[config.kind](config, workers)
    result.wall_clock = _time.perf_counter() - start
    return result
