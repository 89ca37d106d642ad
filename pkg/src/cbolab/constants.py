"""Closed-form evaluation of the constants of the uniform-in-time theory.

Each function evaluates one displayed formula literally from a
:class:`ProblemProfile` (method parameters, certified objective bounds, and
moments of the initial law).  :func:`theorem_constants` evaluates the full
dependency chain

    kappa = lambda_8 / 8  ->  C_bad  ->  C_Q  ->  c_1, c_2  ->  C_MFL

and the stability branch ``C~_Q -> c~_1, c~_2 -> C_Stab``, recording every
intermediate.  The final exponentials routinely overflow float64 (the
constants are extremely conservative); base-10 logarithms are therefore
reported alongside and are always finite.

Two inputs are not pinned by the theory and are handled explicitly:

* ``c_mz_p`` (the constant in the p-th moment bound for centered i.i.d.
  sums) defaults to 1 for p = 2, where the bound holds with constant 1, and
  to the conventional bound (18 p^{3/2} / (p-1))^p for p > 2.  Defaults are
  flagged in the report and user-overridable.
* The raw-moment growth factor ``c_raw_p`` uses the factor p/lambda_p; a
  circulating variant with (p/lambda_p)^{1/p} is logged as a discrepancy
  note in every report and is not evaluated.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .dynamics import CboParams, NoiseKind, tau as noise_tau
from .errors import ConfigurationError, InputError, PreconditionError
from .laws import InitialLaw, law_centered_moment, law_raw_moment
from .objectives import Objective


def _exp(x: float) -> float:
    # IEEE overflow to inf instead of raising, for extreme parameter probes
    with np.errstate(over="ignore"):
        return float(np.exp(np.float64(x)))


def _pow(x: float, y: float) -> float:
    with np.errstate(over="ignore"):
        return float(np.float64(x) ** np.float64(y))


def default_c_mz(p: float) -> float:
    """Conventional bound for the centered-i.i.d.-sum moment constant.

    Exact (equal to 1) at p = 2; for p > 2 a standard conservative bound,
    flagged in reports and overridable through the profile.
    """
    if p < 2:
        raise InputError(f"c_mz is only used for orders p >= 2, got {p}")
    if p == 2:
        return 1.0
    return (18.0 * p**1.5 / (p - 1.0)) ** p


@dataclass(frozen=True)
class ProblemProfile:
    """Everything the closed-form constants depend on."""

    alpha: float
    sigma: float
    noise: NoiseKind
    dimension: int
    f_lower: float
    f_upper: float
    lipschitz: float
    m2: float  # E|X0 - EX0|^2 under the initial law
    m2q: float  # E|X0 - EX0|^(2q)
    m8_raw: float  # E|X0|^8
    q: float = 4.0
    c_mz: Dict[float, float] = field(default_factory=dict)
    c_mz_defaulted: bool = True

    def __post_init__(self):
        object.__setattr__(self, "noise", NoiseKind(self.noise))
        if self.f_upper < self.f_lower:
            raise InputError("f_upper is below f_lower")
        if self.sigma < 0 or self.alpha < 0:
            raise InputError("alpha and sigma must be nonnegative")
        if min(self.m2, self.m2q, self.m8_raw) < 0:
            raise InputError("initial-law moments must be nonnegative")
        if self.q < 2:
            raise InputError(f"the concentration exponent q must be >= 2, got {self.q}")
        table = dict(self.c_mz)
        defaulted = False
        for p in (2.0, 4.0, 8.0, 2.0 * self.q):
            if p not in table:
                table[p] = default_c_mz(p)
                defaulted = True
        object.__setattr__(self, "c_mz", table)
        object.__setattr__(self, "c_mz_defaulted", defaulted or self.c_mz_defaulted)

    @property
    def tau(self) -> int:
        return noise_tau(self.noise, self.dimension)

    @property
    def f_range(self) -> float:
        return self.f_upper - self.f_lower

    def c_mz_for(self, p: float) -> float:
        if p not in self.c_mz:
            raise ConfigurationError(f"no c_mz value for order p={p} in the profile")
        return self.c_mz[p]

    @classmethod
    def from_components(
        cls,
        objective: Objective,
        params: CboParams,
        law: InitialLaw,
        q: float = 4.0,
        c_mz: Optional[Dict[float, float]] = None,
    ) -> "ProblemProfile":
        """Build a profile from an objective, dynamics parameters and a law."""
        return cls(
            alpha=params.alpha,
            sigma=params.sigma,
            noise=params.noise,
            dimension=objective.dimension,
            f_lower=objective.lower_bound,
            f_upper=objective.upper_bound,
            lipschitz=objective.lipschitz,
            m2=law_centered_moment(law, 2.0),
            m2q=law_centered_moment(law, 2.0 * q),
            m8_raw=law_raw_moment(law, 8.0),
            q=q,
            c_mz=dict(c_mz or {}),
            c_mz_defaulted=not bool(c_mz),
        )


# ---------------------------------------------------------------------------
# Elementary constants
# ---------------------------------------------------------------------------


def lambda_p(profile: ProblemProfile, p: float) -> float:
    """Exponential decay rate of p-th centered moments (may be negative)."""
    if p < 2:
        raise InputError(f"lambda_p requires p >= 2, got {p}")
    if profile.sigma == 0.0:
        return float(p)
    bracket = 1.0 - 0.5 * (p - 2.0 + profile.tau) * profile.sigma * profile.sigma * (
        1.0 + _exp(profile.alpha * profile.f_range / p)
    ) ** 2
    return p * bracket


def sigma_tilde_value(alpha: float, f_range: float, tau: int) -> float:
    denom = (6.0 + 3.0 * tau) * (1.0 + _exp(0.5 * alpha * f_range)) ** 2
    return math.sqrt(2.0 / denom) if math.isfinite(denom) else 0.0


def sigma_tilde(profile: ProblemProfile) -> float:
    """Noise threshold below which the uniform-in-time theory applies."""
    return sigma_tilde_value(profile.alpha, profile.f_range, profile.tau)


def bdg_constants(p: float) -> Tuple[float, float]:
    """Lower and upper constants of the martingale-supremum moment bound."""
    if p <= 0:
        raise InputError(f"bdg_constants requires p > 0, got {p}")
    if p < 2:
        return (p / 2.0) ** p, (32.0 / p) ** (p / 2.0)
    if p == 2:
        return 1.0, 4.0
    lower = (2.0 * p) ** (-p / 2.0)
    upper = (p ** (p + 1) / (2.0 * (p - 1.0) ** (p - 1.0))) ** (p / 2.0)
    return lower, upper


def c_m_value(alpha: float, lipschitz: float, f_range: float) -> float:
    return 2.0 * alpha * lipschitz * _exp(2.0 * alpha * f_range)


def c_m(profile: ProblemProfile) -> float:
    """Stability constant of the weighted mean: 2 alpha L_f e^{2 alpha range}."""
    return c_m_value(profile.alpha, profile.lipschitz, profile.f_range)


def c_wm_p(profile: ProblemProfile, p: float) -> float:
    """Monte Carlo constant for the weighted mean of i.i.d. samples."""
    mz = profile.c_mz_for(p)
    r = profile.alpha * profile.f_range
    return mz * _exp(p * r) * _pow(1.0 + _exp(r / p), p)


def c_raw_p(profile: ProblemProfile, p: float) -> float:
    """Uniform-in-time raw-moment growth factor."""
    lam = lambda_p(profile, p)
    if lam <= 0:
        raise PreconditionError(
            f"c_raw_p needs lambda_p > 0, but lambda_{p:g} = {lam:.6g}"
        )
    _, upper = bdg_constants(p)
    return 1.0 + (p / lam) * (
        1.0 + profile.sigma * math.sqrt(profile.tau) * upper ** (1.0 / p)
    ) * (1.0 + _exp(profile.alpha * profile.f_range / p))


# ---------------------------------------------------------------------------
# Concentration constants (bad-set probabilities)
# ---------------------------------------------------------------------------


def _check_kappa(profile: ProblemProfile, q: float, kappa: float) -> float:
    lam_2q = lambda_p(profile, 2.0 * q)
    if lam_2q - q * kappa <= 0:
        raise PreconditionError(
            f"excursion constant needs q*kappa < lambda_2q: "
            f"q*kappa = {q * kappa:.6g}, lambda_{2 * q:g} = {lam_2q:.6g}"
        )
    return lam_2q


def c_bad_particle(profile: ProblemProfile, q: float, kappa: float) -> float:
    """Excursion-probability constant for the interacting particle system."""
    if q < 2:
        raise InputError(f"the excursion exponent q must be >= 2, got {q}")
    lam_2q = _check_kappa(profile, q, kappa)
    gap = lam_2q - q * kappa
    r = profile.alpha * profile.f_range
    # ((q-2)/gap)^(q/2-1) with the 0^0 = 1 convention at q = 2
    power = _pow((q - 2.0) / gap, q / 2.0 - 1.0)
    _, bdg_q = bdg_constants(q)
    return (
        2.0 ** (3.0 * q - 1.0) * profile.c_mz_for(2.0 * q)
        + 2.0 ** (4.0 * q + 1.0)
        * bdg_q
        * _pow(profile.sigma, q)
        * power
        * math.sqrt(1.0 + _exp(r))
        / gap
    )


def c_bad_meanfield(profile: ProblemProfile, q: float, kappa: float) -> float:
    """Excursion-probability constant for the coupled mean-field particles.

    Transcribed as displayed; the epsilon balancing inside the derivation is
    already folded into the bracketed factor.
    """
    lam_2q = _check_kappa(profile, q, kappa)
    lam_2 = lambda_p(profile, 2.0)
    if lam_2 - kappa <= 0:
        raise PreconditionError(
            f"excursion constant needs kappa < lambda_2: kappa = {kappa:.6g}, "
            f"lambda_2 = {lam_2:.6g}"
        )
    if lam_2q - kappa <= 0:
        raise PreconditionError(
            f"excursion constant needs kappa < lambda_2q: kappa = {kappa:.6g}, "
            f"lambda_{2 * q:g} = {lam_2q:.6g}"
        )
    gap = lam_2q - q * kappa
    r = profile.alpha * profile.f_range
    s2t = profile.sigma * profile.sigma * profile.tau
    bracket = 1.0 + (2.0 * s2t / (lam_2 - kappa)) * (1.0 + _exp(0.5 * r)) ** 2
    return (
        (3.0 / 2.0) ** q * c_bad_particle(profile, q, kappa)
        + 3.0**q
        * c_wm_p(profile, 2.0 * q)
        * 2.0 ** (q + 1.0)
        * _pow(profile.sigma, 2.0 * q)
        * _pow(profile.tau, q)
        * _pow(2.0 * (q - 1.0) / gap, q - 1.0)
        * _pow(bracket, q)
        / (lam_2q - kappa)
    )


# ---------------------------------------------------------------------------
# Theorem-level chain
# ---------------------------------------------------------------------------


def _c_q(profile: ProblemProfile, kappa: float) -> float:
    # quadratic-coupling constant; its derivation fixes the exponent at 4
    craw8 = c_raw_p(profile, 8.0)
    return 2.0**11 * math.sqrt(c_bad_meanfield(profile, 4.0, kappa)) * craw8**2 * (
        profile.m8_raw + 1.0
    )


def _c_q_stability(profile: ProblemProfile, q: float, kappa: float) -> float:
    # stability variant; both copies are given the profile's law moments
    craw8 = c_raw_p(profile, 8.0)
    return (
        2.0**4.5
        * math.sqrt(c_bad_meanfield(profile, q, kappa))
        * craw8**4
        * math.sqrt(2.0 * profile.m2q)
        * math.sqrt(2.0 * profile.m8_raw)
        + 2.0 * profile.m2
        + 2.0
    )


def _exp_with_log10(exponent: float, prefactor: float = 1.0) -> Tuple[float, float]:
    """prefactor * e^exponent as a float64 (possibly inf) plus its log10."""
    with np.errstate(over="ignore"):
        value = float(prefactor * np.exp(np.float64(exponent)))
    log10 = exponent / math.log(10.0) + (math.log10(prefactor) if prefactor > 0 else -math.inf)
    return value, log10


@dataclass
class ConstantsReport:
    """Every constant of the summary table evaluated for one profile."""

    # inputs echoed
    alpha: float
    sigma: float
    noise: str
    tau: int
    dimension: int
    f_lower: float
    f_upper: float
    lipschitz: float
    q: float
    m2_initial: float
    m2q_initial: float
    m8_raw_initial: float
    c_mz_2: float
    c_mz_4: float
    c_mz_8: float
    c_mz_2q: float
    c_mz_defaulted: bool
    # thresholds and decay rates
    sigma_tilde: float
    subcritical: bool
    lambda_2: float
    lambda_4: float
    lambda_8: float
    lambda_2q: float
    kappa: Optional[float]
    # structural flags
    lambda8_positive: bool
    lambda8_below_8lambda2: bool
    kappa_below_lambda2: Optional[bool]
    q_kappa_below_lambda_2q: Optional[bool]
    # per-order constants
    c_bdg_lower_2: float
    c_bdg_upper_2: float
    c_bdg_lower_q: float
    c_bdg_upper_q: float
    c_bdg_lower_8: float
    c_bdg_upper_8: float
    c_m: float
    c_wm_2: float
    c_wm_8: float
    c_wm_2q: float
    c_raw_8: Optional[float]
    # chain toward the mean-field and stability bounds
    c_bad_particle: Optional[float]
    c_bad_meanfield: Optional[float]
    c_bad_meanfield_q4: Optional[float]
    c_q: Optional[float]
    c_q_stability: Optional[float]
    c_1: Optional[float]
    c_2: Optional[float]
    c_mfl: Optional[float]
    c_mfl_log10: Optional[float]
    c_tilde_1: Optional[float]
    c_tilde_2: Optional[float]
    c_stab_1: Optional[float]
    c_stab_1_log10: Optional[float]
    c_stab_2: Optional[float]
    c_stab_2_log10: Optional[float]
    stability_rate_exponent: Optional[float]
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ConstantsReport":
        return cls(**data)

    def to_json(self, **kwargs) -> str:
        kwargs.setdefault("indent", 2)
        kwargs.setdefault("sort_keys", True)
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, text: str) -> "ConstantsReport":
        return cls.from_dict(json.loads(text))


_BASE_NOTES = [
    "c_mz defaults: 1 at p=2 (exact); (18 p^1.5/(p-1))^p for p>2 "
    "(conventional bound, user-overridable)",
    "c_raw_p uses the factor p/lambda_p; a circulating variant "
    "(p/lambda_p)^(1/p) is a known discrepancy and is not used",
    "c_bad_meanfield transcribed as displayed",
    "c_stab_1/c_stab_2 use the tilde constants c~_1, c~_2 of the stability "
    "bound; a variant printing plain c_1 there is treated as a typo",
    "c_q_stability evaluates both coupled copies at the profile's law moments",
]


def theorem_constants(profile: ProblemProfile, q: Optional[float] = None) -> ConstantsReport:
    """Evaluate the full constant chain; partial with flags when supercritical.

    ``q`` is the excursion exponent used for the reported bad-set constants
    and the stability branch (its rate in the particle count is q/4); it
    defaults to the profile's q.
    """
    q = float(profile.q if q is None else q)
    if q < 2:
        raise InputError(f"the excursion exponent q must be >= 2, got {q}")

    lam2 = lambda_p(profile, 2.0)
    lam4 = lambda_p(profile, 4.0)
    lam8 = lambda_p(profile, 8.0)
    lam2q = lambda_p(profile, 2.0 * q)
    sig_t = sigma_tilde(profile)
    subcritical = profile.sigma < sig_t
    notes = list(_BASE_NOTES)

    bdg2 = bdg_constants(2.0)
    bdgq = bdg_constants(q)
    bdg8 = bdg_constants(8.0)

    kappa = lam8 / 8.0 if lam8 > 0 else None
    if subcritical:
        # structural consequences of sigma < sigma_tilde
        assert lam8 > 0.0 and lam8 < 8.0 * lam2

    craw8 = c_raw_p(profile, 8.0) if lam8 > 0 else None

    c_bad_p = c_bad_mf = c_bad_mf4 = cq = cq_stab = None
    c1 = c2 = cmfl = cmfl_log = None
    ct1 = ct2 = cstab1 = cstab1_log = cstab2 = cstab2_log = None
    kappa_ok = q_kappa_ok = None

    if kappa is not None:
        kappa_ok = kappa < lam2
        q_kappa_ok = q * kappa < lam2q
        if q_kappa_ok and kappa_ok and lam2q > kappa:
            c_bad_p = c_bad_particle(profile, q, kappa)
            c_bad_mf = c_bad_meanfield(profile, q, kappa)
        else:
            notes.append(
                f"bad-set constants omitted: kappa={kappa:.6g} violates "
                f"kappa < lambda_2 or q*kappa < lambda_2q for q={q:g}"
            )

    if subcritical and kappa is not None:
        c_bad_mf4 = c_bad_meanfield(profile, 4.0, kappa)
        cq = _c_q(profile, kappa)
        cm = c_m(profile)
        cwm2 = c_wm_p(profile, 2.0)
        amp = 1.0 + 2.0 * profile.tau * profile.sigma**2
        c1 = (2.0 * cm**2 * cq * amp + 2.0) / kappa
        c2 = (2.0 * cm**2 * cq + cwm2 * profile.m2) * amp / kappa
        cmfl, cmfl_log = _exp_with_log10(2.0 * c1, 2.0 * c2)
        if c_bad_mf is not None:
            cq_stab = _c_q_stability(profile, q, kappa)
            amp_s = 1.0 + profile.tau * profile.sigma**2
            ct1 = 1.0 + 2.0 * cm**2 * cq_stab * amp_s
            ct2 = 2.0 * cm**2 * cq_stab * amp_s
            cstab1, cstab1_log = _exp_with_log10(16.0 * ct1 / lam8)
            cstab2, cstab2_log = _exp_with_log10(16.0 * ct1 / lam8, 16.0 * ct2 / lam8)
        if not math.isfinite(cmfl):
            notes.append("c_mfl overflows float64; use c_mfl_log10")
        if cstab1 is not None and not math.isfinite(cstab1):
            notes.append("c_stab_1/c_stab_2 overflow float64; use the *_log10 fields")
    elif not subcritical:
        notes.append(
            f"sigma = {profile.sigma:.6g} is not below sigma_tilde = {sig_t:.6g}; "
            "theorem-level constants omitted"
        )

    return ConstantsReport(
        alpha=profile.alpha,
        sigma=profile.sigma,
        noise=profile.noise.value,
        tau=profile.tau,
        dimension=profile.dimension,
        f_lower=profile.f_lower,
        f_upper=profile.f_upper,
        lipschitz=profile.lipschitz,
        q=q,
        m2_initial=profile.m2,
        m2q_initial=profile.m2q,
        m8_raw_initial=profile.m8_raw,
        c_mz_2=profile.c_mz_for(2.0),
        c_mz_4=profile.c_mz_for(4.0),
        c_mz_8=profile.c_mz_for(8.0),
        c_mz_2q=profile.c_mz_for(2.0 * q),
        c_mz_defaulted=profile.c_mz_defaulted,
        sigma_tilde=sig_t,
        subcritical=subcritical,
        lambda_2=lam2,
        lambda_4=lam4,
        lambda_8=lam8,
        lambda_2q=lam2q,
        kappa=kappa,
        lambda8_positive=lam8 > 0,
        lambda8_below_8lambda2=lam8 < 8.0 * lam2,
        kappa_below_lambda2=kappa_ok,
        q_kappa_below_lambda_2q=q_kappa_ok,
        c_bdg_lower_2=bdg2[0],
        c_bdg_upper_2=bdg2[1],
        c_bdg_lower_q=bdgq[0],
        c_bdg_upper_q=bdgq[1],
        c_bdg_lower_8=bdg8[0],
        c_bdg_upper_8=bdg8[1],
        c_m=c_m(profile),
        c_wm_2=c_wm_p(profile, 2.0),
        c_wm_8=c_wm_p(profile, 8.0),
        c_wm_2q=c_wm_p(profile, 2.0 * q),
        c_raw_8=craw8,
        c_bad_particle=c_bad_p,
        c_bad_meanfield=c_bad_mf,
        c_bad_meanfield_q4=c_bad_mf4,
        c_q=cq,
        c_q_stability=cq_stab,
        c_1=c1,
        c_2=c2,
        c_mfl=cmfl,
        c_mfl_log10=cmfl_log,
        c_tilde_1=ct1,
        c_tilde_2=ct2,
        c_stab_1=cstab1,
        c_stab_1_log10=cstab1_log,
        c_stab_2=cstab2,
        c_stab_2_log10=cstab2_log,
        stability_rate_exponent=q / 4.0 if cq_stab is not None else None,
        notes=notes,
    )


def render_text(report: ConstantsReport) -> str:
    """Human-readable rendering of a constants report."""
    lines = [
        f"profile: alpha={report.alpha:g} sigma={report.sigma:g} noise={report.noise} "
        f"tau={report.tau} d={report.dimension}",
        f"objective: bounds [{report.f_lower:g}, {report.f_upper:g}], "
        f"Lipschitz {report.lipschitz:.12g}",
        f"initial law moments: M2={report.m2_initial:.12g} "
        f"M{2 * report.q:g}={report.m2q_initial:.12g} m8={report.m8_raw_initial:.12g}",
        "",
        f"sigma_tilde = {report.sigma_tilde:.12g}  (subcritical: {report.subcritical})",
        f"lambda_2 = {report.lambda_2:.12g}  lambda_4 = {report.lambda_4:.12g}  "
        f"lambda_8 = {report.lambda_8:.12g}  lambda_{2 * report.q:g} = {report.lambda_2q:.12g}",
        f"kappa = lambda_8/8 = "
        + (f"{report.kappa:.12g}" if report.kappa is not None else "undefined"),
        f"flags: lambda8>0: {report.lambda8_positive}  lambda8<8*lambda2: "
        f"{report.lambda8_below_8lambda2}  kappa<lambda2: {report.kappa_below_lambda2}  "
        f"q*kappa<lambda_2q: {report.q_kappa_below_lambda_2q}",
        "",
        f"bdg (p=2): ({report.c_bdg_lower_2:g}, {report.c_bdg_upper_2:g})  "
        f"(p=q={report.q:g}): ({report.c_bdg_lower_q:.9g}, {report.c_bdg_upper_q:.9g})  "
        f"(p=8): ({report.c_bdg_lower_8:.9g}, {report.c_bdg_upper_8:.9g})",
        f"c_m = {report.c_m:.12g}",
        f"c_wm_2 = {report.c_wm_2:.12g}  c_wm_8 = {report.c_wm_8:.9g}  "
        f"c_wm_2q = {report.c_wm_2q:.9g}  (c_mz defaults used: {report.c_mz_defaulted})",
    ]

    def opt(label, value, digits=".9g"):
        return f"{label} = " + (format(value, digits) if value is not None else "undefined")

    lines += [
        opt("c_raw_8", report.c_raw_8),
        opt(f"c_bad_particle(q={report.q:g})", report.c_bad_particle),
        opt(f"c_bad_meanfield(q={report.q:g})", report.c_bad_meanfield),
        opt("c_q", report.c_q),
        opt("c_q_stability", report.c_q_stability),
        opt("c_1", report.c_1),
        opt("c_2", report.c_2),
        opt("c_mfl", report.c_mfl) + (
            f"   (log10 = {report.c_mfl_log10:.6g})" if report.c_mfl_log10 is not None else ""
        ),
        opt("c_stab_1", report.c_stab_1) + (
            f"   (log10 = {report.c_stab_1_log10:.6g})"
            if report.c_stab_1_log10 is not None
            else ""
        ),
        opt("c_stab_2", report.c_stab_2) + (
            f"   (log10 = {report.c_stab_2_log10:.6g})"
            if report.c_stab_2_log10 is not None
            else ""
        ),
        "",
        "notes:",
    ]
    lines += [f"  - {n}" for n in report.notes]
    return "\n".join(lines)
