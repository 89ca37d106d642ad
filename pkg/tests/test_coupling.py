import math

import numpy as np
import pytest

from cbolab.coupling import (
    MflCoupledSystem,
    StabilityCoupledSystem,
    init_mfl_coupling,
    init_stability_coupling,
    mfl_coupled_step,
    mfl_error,
    stability_coupled_step,
    stability_gap,
    wm_sampling_error,
)
from cbolab.dynamics import (
    CboParams,
    Ensemble,
    NoiseKind,
    RngStream,
    brownian_increments,
    em_step,
)
from cbolab.errors import ConfigurationError, InputError
from cbolab.laws import InitialLaw, sample_initial
from cbolab.objectives import make_builtin


def gaussian_law(d=2, loc=0.0, scale=1.0):
    return InitialLaw("gaussian", np.full(d, loc), scale)


def params(alpha=0.0, sigma=0.0, dt=0.1, horizon=1.0, noise=NoiseKind.ANISOTROPIC):
    return CboParams(alpha=alpha, sigma=sigma, noise=noise, dt=dt, horizon=horizon)


# ---------------------------------------------------------------------------
# mean-field coupling
# ---------------------------------------------------------------------------


def test_init_mfl_zero_error_and_shared_rows():
    sys_ = init_mfl_coupling(
        gaussian_law(), 4, 16, params(), make_builtin("gauss-well", 2), RngStream(1)
    )
    assert mfl_error(sys_) == 0.0
    assert np.array_equal(sys_.interacting.positions, sys_.meanfield.positions[:4])


def test_init_mfl_deterministic():
    law, obj = gaussian_law(), make_builtin("gauss-well", 2)
    a = init_mfl_coupling(law, 4, 16, params(), obj, RngStream(5))
    b = init_mfl_coupling(law, 4, 16, params(), obj, RngStream(5))
    assert np.array_equal(a.meanfield.positions, b.meanfield.positions)


def test_init_mfl_rejects_small_proxy():
    with pytest.raises(ConfigurationError):
        init_mfl_coupling(
            gaussian_law(), 16, 8, params(), make_builtin("gauss-well", 2), RngStream(0)
        )


def test_supercritical_sigma_warns_but_runs():
    law, obj = gaussian_law(), make_builtin("gauss-well", 2)
    with pytest.warns(UserWarning, match="sigma_tilde"):
        init_mfl_coupling(law, 2, 4, params(sigma=5.0), obj, RngStream(0))


def test_mfl_error_examples():
    obj = make_builtin("gauss-well", 1)
    sys_ = MflCoupledSystem(
        interacting=Ensemble([[0.0]]),
        meanfield=Ensemble([[2.0]]),
        params=params(),
        objective=obj,
    )
    assert mfl_error(sys_) == pytest.approx(4.0)
    obj2 = make_builtin("gauss-well", 2)
    sys2 = MflCoupledSystem(
        interacting=Ensemble([[0.0, 0.0], [1.0, 1.0]]),
        meanfield=Ensemble([[1.0, 0.0], [1.0, 1.0]]),
        params=params(),
        objective=obj2,
    )
    assert mfl_error(sys2) == pytest.approx(0.5)


def test_degenerate_coupling_stays_exactly_zero():
    # sigma=0, alpha=0, J=M: both subsystems evolve by the identical map
    law, obj = gaussian_law(), make_builtin("gauss-well", 2)
    sys_ = init_mfl_coupling(law, 8, 8, params(), obj, RngStream(3))
    for k in range(1, 11):
        sys_ = mfl_coupled_step(sys_, np.zeros((8, 2)))
        assert mfl_error(sys_) == 0.0


def test_coupled_step_reuses_leading_increment_rows():
    law, obj = gaussian_law(), make_builtin("gauss-well", 2)
    p = params(alpha=1.0, sigma=0.2)
    sys_ = init_mfl_coupling(law, 3, 12, p, obj, RngStream(9))
    dW = brownian_increments(RngStream(9).at_step(1), 12, 2, p.dt)
    stepped = mfl_coupled_step(sys_, dW)
    # the interacting subsystem must equal a direct step with rows 0..J-1
    direct = em_step(sys_.interacting, p, obj, dW[:3])
    assert np.array_equal(stepped.interacting.positions, direct.positions)
    # and the mean-field ensemble steps toward its own consensus
    direct_mf = em_step(sys_.meanfield, p, obj, dW)
    assert np.array_equal(stepped.meanfield.positions, direct_mf.positions)


def test_wm_sampling_error_identical_rows():
    obj = make_builtin("gauss-well", 1)
    sys_ = MflCoupledSystem(
        interacting=Ensemble([[1.5]]),
        meanfield=Ensemble([[1.5], [1.5], [1.5]]),
        params=params(alpha=2.0),
        objective=obj,
    )
    assert wm_sampling_error(sys_) == 0.0


def test_wm_sampling_error_alpha_zero_reduces_to_means():
    obj = make_builtin("gauss-well", 1)
    sys_ = MflCoupledSystem(
        interacting=Ensemble([[0.0]]),
        meanfield=Ensemble([[0.0], [2.0]]),
        params=params(alpha=0.0),
        objective=obj,
    )
    # full mean 1, leading-row mean 0 -> squared distance 1
    assert wm_sampling_error(sys_) == pytest.approx(1.0)


def test_wm_sampling_error_degenerate_proxy():
    obj = make_builtin("gauss-well", 1)
    sys_ = MflCoupledSystem(
        interacting=Ensemble([[0.0], [1.0]]),
        meanfield=Ensemble([[0.0], [1.0]]),
        params=params(),
        objective=obj,
    )
    with pytest.raises(InputError, match="degenerate"):
        wm_sampling_error(sys_)


def test_mfl_monotone_trend_in_j():
    # median over replicates of sup_t E_t should not increase along a
    # doubling ladder (one inversion tolerated)
    law, obj = gaussian_law(d=1), make_builtin("gauss-well", 1)
    p = params(alpha=1.0, sigma=0.1, dt=0.02, horizon=2.0)
    ladder = [8, 16, 32, 64]
    M = 256
    sups = {J: [] for J in ladder}
    for r in range(16):
        stream = RngStream(606).for_replicate(r)
        draws = sample_initial(law, M, stream)
        meanfield = Ensemble(draws)
        interacting = {J: Ensemble(draws[:J]) for J in ladder}
        peak = {J: 0.0 for J in ladder}
        for k in range(1, p.steps() + 1):
            dW = brownian_increments(stream.at_step(k), M, 1, p.dt)
            for J in ladder:
                interacting[J] = em_step(interacting[J], p, obj, dW[:J])
            meanfield = em_step(meanfield, p, obj, dW)
            for J in ladder:
                diff = interacting[J].positions - meanfield.positions[:J]
                peak[J] = max(peak[J], float(np.mean(np.sum(diff * diff, axis=1))))
        for J in ladder:
            sups[J].append(peak[J])
    medians = [float(np.median(sups[J])) for J in ladder]
    inversions = sum(1 for a, b in zip(medians, medians[1:]) if b > a)
    assert inversions <= 1, medians


# ---------------------------------------------------------------------------
# stability coupling
# ---------------------------------------------------------------------------


def test_identical_laws_with_shared_stream_stay_identical():
    law, obj = gaussian_law(), make_builtin("gauss-well", 2)
    p = params(alpha=1.0, sigma=0.2)
    sys_ = init_stability_coupling(
        law, law, 6, p, obj, RngStream(4), shared_initial_stream=True
    )
    assert stability_gap(sys_) == 0.0
    for k in range(1, 6):
        sys_ = stability_coupled_step(
            sys_, brownian_increments(RngStream(4).at_step(k), 6, 2, p.dt)
        )
        assert stability_gap(sys_) == 0.0


def test_independent_draws_have_positive_gap():
    law, obj = gaussian_law(), make_builtin("gauss-well", 2)
    sys_ = init_stability_coupling(law, law, 6, params(), obj, RngStream(4))
    assert stability_gap(sys_) > 0.0
    other = init_stability_coupling(law, law, 6, params(), obj, RngStream(5))
    assert stability_gap(other) != stability_gap(sys_)


def test_stability_gap_examples():
    obj = make_builtin("gauss-well", 1)
    a = StabilityCoupledSystem(
        copy_a=Ensemble([[0.0]]), copy_b=Ensemble([[3.0]]), params=params(), objective=obj
    )
    assert stability_gap(a) == pytest.approx(9.0)
    b = StabilityCoupledSystem(
        copy_a=Ensemble([[0.0], [0.0]]),
        copy_b=Ensemble([[1.0], [-1.0]]),
        params=params(),
        objective=obj,
    )
    assert stability_gap(b) == pytest.approx(1.0)


def test_stability_gap_mc_value_for_shifted_gaussians():
    # E |A - B|^2 for A ~ N(0,1), B ~ N(1,1) independent is 1 + 1 + 1 = 3
    gen = np.random.default_rng(123)
    a = gen.normal(0.0, 1.0, 100_000)
    b = gen.normal(1.0, 1.0, 100_000)
    mc = np.mean((a - b) ** 2)
    assert mc == pytest.approx(3.0, abs=4 * np.std((a - b) ** 2) / math.sqrt(a.size))


def test_stability_swap_symmetry():
    law_a, law_b = gaussian_law(), gaussian_law(loc=0.5)
    obj = make_builtin("gauss-well", 2)
    p = params(alpha=1.0, sigma=0.15)
    sys_ = init_stability_coupling(law_a, law_b, 5, p, obj, RngStream(11))
    dW = brownian_increments(RngStream(11).at_step(1), 5, 2, p.dt)
    stepped = stability_coupled_step(sys_, dW)
    swapped = StabilityCoupledSystem(
        copy_a=sys_.copy_b, copy_b=sys_.copy_a, params=p, objective=obj
    )
    stepped_swapped = stability_coupled_step(swapped, dW)
    assert np.array_equal(stepped.copy_a.positions, stepped_swapped.copy_b.positions)
    assert np.array_equal(stepped.copy_b.positions, stepped_swapped.copy_a.positions)
    assert stability_gap(stepped) == stability_gap(stepped_swapped)


def test_stability_affine_dynamics_prediction():
    # sigma=0, alpha=0: centered differences contract by (1-dt) each step,
    # the mean difference persists
    law_a, law_b = gaussian_law(d=1), gaussian_law(d=1, loc=0.5)
    obj = make_builtin("gauss-well", 1)
    p = params(dt=0.1)
    sys_ = init_stability_coupling(law_a, law_b, 32, p, obj, RngStream(21))
    diff0 = sys_.copy_a.positions - sys_.copy_b.positions
    mean_diff = diff0.mean(axis=0)
    centered0 = diff0 - mean_diff
    for k in range(1, 8):
        sys_ = stability_coupled_step(sys_, np.zeros((32, 1)))
        diff = sys_.copy_a.positions - sys_.copy_b.positions
        expected = mean_diff + centered0 * (1 - p.dt) ** k
        assert diff == pytest.approx(expected, abs=1e-12)


def test_stability_dimension_mismatch():
    with pytest.raises(ConfigurationError):
        init_stability_coupling(
            gaussian_law(d=1),
            gaussian_law(d=2),
            4,
            params(),
            make_builtin("gauss-well", 1),
            RngStream(0),
        )
