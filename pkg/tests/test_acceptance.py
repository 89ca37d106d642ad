"""Acceptance suite: one test per criterion, each printing a PASS line.

Heavy experiment runs are cached per session and reused where two criteria
share a configuration (the scaling run feeds both the slope check and the
byte-identical rerun check).  Run with ``pytest tests/test_acceptance.py -v``
(add ``-s`` to see the printed lines for passing criteria).
"""

import json
import math

import numpy as np
import pytest

from cbolab.analysis import (
    centered_moment,
    exact_w2,
    huygens_residual,
    raw_moment,
    wm_stability_gap,
)
from cbolab.constants import (
    ProblemProfile,
    bdg_constants,
    c_m,
    c_wm_p,
    lambda_p,
    sigma_tilde,
)
from cbolab.dynamics import Ensemble, consensus_point, mean_point
from cbolab.experiments.config import config_from_mapping
from cbolab.experiments.output import write_result
from cbolab.experiments.runner import run_experiment
from cbolab.objectives import make_builtin

from test_analysis import brute_force_w2

OBJECTIVE = {"name": "gauss-well", "dimension": 2}
LAW = {"name": "gaussian", "location": 0.0, "scale": 1.0}


def _report(criterion: str, detail: str) -> None:
    print(f"ACCEPTANCE {criterion}: PASS ({detail})")


def _run(mapping, workers=4):
    return run_experiment(config_from_mapping(mapping), workers=workers)


# ---------------------------------------------------------------------------
# shared heavy runs
# ---------------------------------------------------------------------------

MFL_MAPPING = {
    "kind": "mfl",
    "seed": 20260805,
    "objective": OBJECTIVE,
    "initial_law": LAW,
    "params": {"alpha": 1.0, "sigma": 0.2, "noise": "anisotropic", "dt": 0.01, "horizon": 10.0},
    "j_ladder": [16, 32, 64, 128, 256, 512],
    "oversample": 16,
    "replicates": 64,
    "stride": 10,
    "allow_supercritical": True,  # sigma=0.2 exceeds the sufficient threshold
}


@pytest.fixture(scope="session")
def mfl_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("mfl_w2")
    result = run_experiment(config_from_mapping(MFL_MAPPING), workers=2)
    write_result(result, out)
    return result, out


# ---------------------------------------------------------------------------
# criterion 1: identity suite
# ---------------------------------------------------------------------------


def test_criterion_01_identity_suite():
    gen = np.random.default_rng(101)
    # Huygens residual on 10^4 random point sets, relative tolerance 1e-12
    for _ in range(10_000):
        J = int(gen.integers(1, 129))
        d = int(gen.integers(1, 17))
        pts = gen.normal(0, 4, (J, d))
        scale = max(np.mean(np.sum(pts * pts, axis=1)), 1e-30)
        assert abs(huygens_residual(pts)) <= 1e-12 * scale

    # consensus at alpha=0 equals the mean to 1e-14
    for _ in range(1000):
        J = int(gen.integers(2, 65))
        d = int(gen.integers(1, 9))
        ens = Ensemble(gen.normal(0, 3, (J, d)))
        obj = make_builtin("gauss-well", d)
        assert np.max(np.abs(consensus_point(ens, 0.0, obj) - mean_point(ens))) <= 1e-14

    # exact transport distance equals permutation brute force for J <= 7
    for _ in range(200):
        J = int(gen.integers(1, 8))
        d = int(gen.integers(1, 4))
        a = Ensemble(gen.normal(0, 2, (J, d)))
        b = Ensemble(gen.normal(0.5, 2, (J, d)))
        assert exact_w2(a, b) == pytest.approx(brute_force_w2(a, b), rel=1e-12, abs=1e-12)
    _report("criterion 1 (identity suite)", "huygens 1e4, consensus 1e3, w2 brute force 200")


# ---------------------------------------------------------------------------
# criterion 2: inequality suite
# ---------------------------------------------------------------------------


def test_criterion_02_inequality_suite():
    gen = np.random.default_rng(202)
    builtins = {d: [make_builtin(n, d) for n in ("saturating-norm", "gauss-well", "soft-rastrigin")]
                for d in (1, 2, 3, 4)}

    # Jensen gap: |M_alpha - M|^q <= e^{alpha range} * mean |x - M|^q
    for _ in range(1000):
        J = int(gen.integers(2, 49))
        d = int(gen.integers(1, 5))
        ens = Ensemble(gen.normal(0, 2.5, (J, d)))
        alpha = float(gen.uniform(0.0, 5.0))
        for obj in builtins[d]:
            gap = consensus_point(ens, alpha, obj) - mean_point(ens)
            amplifier = math.exp(alpha * (obj.upper_bound - obj.lower_bound))
            deviations = np.linalg.norm(ens.positions - mean_point(ens), axis=1)
            for q in (2, 4, 8):
                lhs = float(np.linalg.norm(gap)) ** q
                rhs = amplifier * float(np.mean(deviations**q))
                assert lhs <= rhs * (1 + 1e-12), (q, alpha, obj.name)

    # weighted-mean stability: lhs <= C_M (sqrt M2(a) + sqrt M2(b)) W2(a, b)
    for name in ("saturating-norm", "gauss-well", "soft-rastrigin"):
        for alpha in (0.5, 1.0, 2.0):
            for _ in range(1000):
                J = int(gen.integers(2, 17))
                d = int(gen.integers(1, 4))
                obj = make_builtin(name, d)
                a = Ensemble(gen.normal(0, 2, (J, d)))
                b = Ensemble(gen.normal(gen.uniform(-1, 1), 2, (J, d)))
                lhs, rhs = wm_stability_gap(a, b, alpha, obj)
                assert lhs <= rhs * (1 + 1e-12) + 1e-15, (name, alpha)

    # elementary moment comparison: centered <= 2^p raw
    for _ in range(1000):
        J = int(gen.integers(2, 65))
        d = int(gen.integers(1, 9))
        ens = Ensemble(gen.normal(1.0, 3.0, (J, d)))
        for p in (2, 4, 8):
            assert centered_moment(ens, p) <= 2**p * raw_moment(ens, p) * (1 + 1e-12)
    _report("criterion 2 (inequality suite)", "jensen, wm-stability, moment comparison")


# ---------------------------------------------------------------------------
# criterion 3: exact decay without noise
# ---------------------------------------------------------------------------


def _noiseless_rates(dt):
    mapping = {
        "kind": "moments",
        "seed": 20260803,
        "objective": OBJECTIVE,
        "initial_law": LAW,
        "params": {"alpha": 0.0, "sigma": 0.0, "noise": "anisotropic", "dt": dt, "horizon": 1.0},
        "particles": 64,
        "replicates": 4,
        "stride": 10,
    }
    result = _run(mapping, workers=1)
    return {p: result.checks["rates"][f"{p}"]["estimate"] for p in (2, 4, 8)}


def test_criterion_03_exact_decay_sigma_zero():
    rates = _noiseless_rates(1e-3)
    halved = _noiseless_rates(5e-4)
    for p in (2, 4, 8):
        assert rates[p] == pytest.approx(p, rel=0.02)
        # integrator-bias check: halving dt halves the residual
        residual = abs(rates[p] - p)
        residual_halved = abs(halved[p] - p)
        assert residual / residual_halved == pytest.approx(2.0, rel=0.1)
    _report(
        "criterion 3 (exact decay)",
        f"rates {rates[2]:.4f}/{rates[4]:.4f}/{rates[8]:.4f} vs 2/4/8",
    )


# ---------------------------------------------------------------------------
# criterion 4: noisy decay bound
# ---------------------------------------------------------------------------


def test_criterion_04_noisy_decay_bound():
    mapping = {
        "kind": "moments",
        "seed": 20260804,
        "objective": OBJECTIVE,
        "initial_law": LAW,
        "params": {"alpha": 1.0, "sigma": 0.15, "noise": "anisotropic", "dt": 0.01, "horizon": 10.0},
        "particles": 256,
        "replicates": 64,
        "stride": 10,
    }
    result = _run(mapping)
    entry = result.checks["rates"]["2"]
    assert entry["estimate"] >= entry["lambda"] - 2.0 * entry["stderr"], entry
    _report(
        "criterion 4 (noisy decay)",
        f"rate {entry['estimate']:.4f} >= lambda_2 {entry['lambda']:.4f} - 2se",
    )


# ---------------------------------------------------------------------------
# criterion 5: propagation-of-chaos scaling
# ---------------------------------------------------------------------------


def test_criterion_05_mfl_scaling(mfl_run):
    result, _ = mfl_run
    slope = result.checks["slope"]
    r2 = result.checks["r_squared"]
    assert -1.3 <= slope <= -0.7, slope
    assert r2 >= 0.9, r2
    for J, ratio in result.checks["uniformity_ratio"].items():
        assert ratio <= 2.0, (J, ratio)
    _report("criterion 5 (mfl scaling)", f"slope {slope:.3f}, r2 {r2:.4f}")


# ---------------------------------------------------------------------------
# criterion 6: stability boundedness
# ---------------------------------------------------------------------------


def test_criterion_06_stability_boundedness():
    mapping = {
        "kind": "stability",
        "seed": 20260806,
        "objective": OBJECTIVE,
        "initial_law": LAW,
        "initial_law_b": {"name": "gaussian", "location": 0.5, "scale": 1.0},
        "params": {"alpha": 1.0, "sigma": 0.2, "noise": "anisotropic", "dt": 0.01, "horizon": 10.0},
        "j_ladder": [32, 128, 512],
        "replicates": 64,
        "stride": 10,
        "allow_supercritical": True,
    }
    result = _run(mapping)
    assert result.checks["ratio_spread"] < 2.0, result.checks["sup_ratio"]
    assert result.checks["no_late_growth"], result.checks["late_growth_ratio"]
    _report(
        "criterion 6 (stability)",
        f"sup ratios {result.checks['sup_ratio']}, spread {result.checks['ratio_spread']:.3f}",
    )


# ---------------------------------------------------------------------------
# criterion 7: weighted-mean Monte Carlo rate
# ---------------------------------------------------------------------------

WM_MAPPING = {
    "kind": "wm-mc",
    "seed": 20260807,
    "objective": OBJECTIVE,
    "initial_law": LAW,
    "params": {"alpha": 1.0, "sigma": 0.2, "noise": "anisotropic", "dt": 0.01, "horizon": 10.0},
    "j_ladder": [64, 128, 256, 512, 1024, 2048, 4096],
    "replicates": 1000,
}


def test_criterion_07_wm_mc_rate():
    result = _run(WM_MAPPING, workers=1)
    slope = result.checks["slope"]
    assert -1.2 <= slope <= -0.8, slope
    assert all(result.checks["below_bound"].values()), result.checks["below_bound"]

    zero_alpha = dict(WM_MAPPING)
    zero_alpha["params"] = dict(WM_MAPPING["params"], alpha=0.0)
    result0 = _run(zero_alpha, workers=1)
    products = result0.checks["alpha_zero_product"]
    for J, entry in products.items():
        assert entry["within_3se"], (J, entry)
    _report(
        "criterion 7 (wm monte carlo)",
        f"slope {slope:.3f}; alpha=0 product matches M2 = 2 at every ladder point",
    )


# ---------------------------------------------------------------------------
# criterion 8: concentration trend
# ---------------------------------------------------------------------------


def test_criterion_08_concentration_trend():
    mapping = {
        "kind": "concentration",
        "seed": 20260808,
        "objective": OBJECTIVE,
        "initial_law": LAW,
        "params": {"alpha": 1.0, "sigma": 0.15, "noise": "anisotropic", "dt": 0.01, "horizon": 10.0},
        "j_ladder": [32, 128, 512],
        "replicates": 512,
        "stride": 10,
        "q": 2.0,
        "threshold_a": 1.0,
        "baseline": "law",
    }
    result = _run(mapping)
    assert result.checks["trend_ok"], result.checks
    assert all(v for v in result.checks["below_ceiling"].values())

    # without noise the weighted moment never exceeds its own starting level
    quiet = dict(mapping, baseline="empirical")
    quiet["params"] = dict(mapping["params"], sigma=0.0)
    result0 = _run(quiet)
    assert all(v == 0.0 for v in result0.checks["probabilities"].values())
    _report(
        "criterion 8 (concentration)",
        f"probabilities {result.checks['probabilities']}, zero without noise",
    )


# ---------------------------------------------------------------------------
# criterion 9: constants oracle
# ---------------------------------------------------------------------------


def test_criterion_09_constants_oracle():
    def profile(**kw):
        base = dict(
            alpha=0.0,
            sigma=0.0,
            noise="anisotropic",
            dimension=1,
            f_lower=0.0,
            f_upper=0.0,
            lipschitz=1.0,
            m2=1.0,
            m2q=3.0,
            m8_raw=105.0,
        )
        base.update(kw)
        return ProblemProfile(**base)

    rel = 1e-12
    assert lambda_p(profile(), 2) == pytest.approx(2.0, rel=rel)
    assert lambda_p(profile(sigma=0.5), 2) == pytest.approx(1.0, rel=rel)
    assert lambda_p(profile(sigma=0.1, noise="isotropic", dimension=3), 8) == pytest.approx(
        6.56, rel=rel
    )
    assert sigma_tilde(profile()) == pytest.approx(math.sqrt(1 / 18), rel=rel)
    assert sigma_tilde(profile(noise="isotropic", dimension=2)) == pytest.approx(
        math.sqrt(1 / 24), rel=rel
    )
    assert bdg_constants(2.0) == (1.0, 4.0)
    assert bdg_constants(4.0)[1] == pytest.approx((1024 / 54) ** 2, rel=rel)
    assert bdg_constants(1.0)[1] == pytest.approx(math.sqrt(32), rel=rel)
    assert c_m(profile(alpha=1.0)) == pytest.approx(2.0, rel=rel)
    assert c_m(profile(alpha=1.0, lipschitz=math.exp(-0.5), f_upper=1.0)) == pytest.approx(
        2.0 * math.exp(1.5), rel=rel
    )
    assert c_wm_p(profile(c_mz={2.0: 1.0}), 2) == pytest.approx(4.0, rel=rel)
    assert c_wm_p(
        profile(alpha=math.log(2.0), f_upper=1.0, c_mz={2.0: 1.0}), 2
    ) == pytest.approx(4 * (1 + math.sqrt(2)) ** 2, rel=rel)

    # structural grid scan over 10^4 subcritical profiles
    gen = np.random.default_rng(909)
    for _ in range(10_000):
        f_range = float(gen.uniform(0.0, 4.0))
        tau_val = int(gen.integers(1, 9))
        kw = dict(
            alpha=1.0,
            f_upper=f_range,
            noise="anisotropic" if tau_val == 1 else "isotropic",
            dimension=1 if tau_val == 1 else tau_val,
        )
        ceiling = sigma_tilde(profile(**kw))
        p = profile(sigma=float(gen.uniform(0.0, ceiling * 0.999999)), **kw)
        lam8, lam2 = lambda_p(p, 8), lambda_p(p, 2)
        assert lam8 > 0.0 and lam8 < 8.0 * lam2
    _report("criterion 9 (constants oracle)", "spot values at 1e-12, 1e4-profile scan")


# ---------------------------------------------------------------------------
# criterion 10: determinism across worker counts
# ---------------------------------------------------------------------------


def test_criterion_10_determinism_across_workers(mfl_run, tmp_path):
    _, first_dir = mfl_run
    rerun = run_experiment(config_from_mapping(MFL_MAPPING), workers=1)
    rerun_dir = tmp_path / "rerun"
    write_result(rerun, rerun_dir)

    names1 = sorted(p.name for p in first_dir.iterdir())
    names2 = sorted(p.name for p in rerun_dir.iterdir())
    assert names1 == names2
    for name in names1:
        assert (first_dir / name).read_bytes() == (rerun_dir / name).read_bytes(), name
    _report(
        "criterion 10 (determinism)",
        f"{len(names1)} files byte-identical across worker counts 2 and 1",
    )
