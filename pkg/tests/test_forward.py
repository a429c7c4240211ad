import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ioc_forge.forward import (
    InfeasibleInitialTrajectory,
    LqObjective,
    condensed_gradient,
    condensed_lq,
    condensed_objective,
    data_enabled_lq,
    lifted_maps,
    lq_cost,
    lq_oracle,
)
from ioc_forge.lti import LtiSystem, Trajectory, simulate
from ioc_forge.vanilla import fit_costate, kkt_residual_vanilla

from conftest import random_psd


def test_objective_validation():
    with pytest.raises(ValueError):
        LqObjective(np.array([[1.0, 0.5], [0.0, 1.0]]), np.eye(1))
    with pytest.raises(ValueError):
        LqObjective(-np.eye(2), np.eye(1))
    with pytest.raises(ValueError):
        LqObjective(np.eye(2), np.zeros((1, 1)))
    obj = LqObjective(np.eye(2), 0.4)
    Qb, Rb = obj.lifted(3)
    assert Qb.shape == (6, 6) and Rb.shape == (3, 3)


def test_lifted_maps_match_simulation(rng):
    sys = LtiSystem(rng.standard_normal((3, 3)) * 0.5, rng.standard_normal((3, 2)),
                    rng.standard_normal((2, 3)), rng.standard_normal((2, 2)))
    x0, u = rng.standard_normal(3), rng.standard_normal((6, 2))
    G, Th = lifted_maps(sys, 6)
    assert np.allclose(G @ x0 + Th @ u.ravel(), simulate(sys, x0, u).stacked_outputs())


def test_oracle_zero_state_weight(cfg):
    obj = LqObjective(np.zeros((2, 2)), cfg.weights.R)
    w = lq_oracle(cfg.system, obj, cfg.x0, 8)
    assert np.allclose(w.inputs, 0)
    assert np.allclose(w.outputs, simulate(cfg.system, cfg.x0, np.zeros((8, 1))).outputs)


def test_oracle_zero_state(cfg):
    w = lq_oracle(cfg.system, cfg.weights, np.zeros(2), 8)
    assert np.array_equal(w.inputs, np.zeros((8, 1))) and np.array_equal(w.outputs, np.zeros((8, 2)))


def test_oracle_local_optimality(cfg, rng):
    w = lq_oracle(cfg.system, cfg.weights, cfg.x0, 13)
    u0 = w.stacked_inputs()
    J0 = lq_cost(u0, w.stacked_outputs(), cfg.weights)
    for _ in range(100):
        d = rng.standard_normal(u0.size)
        u = u0 + 1e-3 * d / np.linalg.norm(d)
        y = simulate(cfg.system, cfg.x0, u[:, None]).stacked_outputs()
        assert lq_cost(u, y, cfg.weights) > J0


@pytest.mark.parametrize("alpha", [0.01, 2.0, 37.0])
def test_oracle_scale_invariant_argmin(cfg, alpha):
    a = lq_oracle(cfg.system, cfg.weights, cfg.x0, 13).inputs
    b = lq_oracle(cfg.system, cfg.weights.scaled(alpha), cfg.x0, 13).inputs
    assert np.allclose(a, b, atol=1e-9)


def test_cost_positive_and_zero_only_at_origin(cfg):
    w = lq_oracle(cfg.system, cfg.weights, cfg.x0, 10)
    assert lq_cost(w.stacked_inputs(), w.stacked_outputs(), cfg.weights) > 0
    w = lq_oracle(cfg.system, cfg.weights, np.zeros(2), 10)
    assert lq_cost(w.stacked_inputs(), w.stacked_outputs(), cfg.weights) == 0


def test_data_enabled_matches_oracle(trial3, cfg):
    sol = data_enabled_lq(trial3.blocks, trial3.w_ini, cfg.weights)
    assert np.allclose(sol.u, trial3.w_tail.stacked_inputs(), atol=1e-6)
    assert np.allclose(sol.y, trial3.w_tail.stacked_outputs(), atol=1e-6)
    oracle_cost = lq_cost(trial3.w_tail.stacked_inputs(), trial3.w_tail.stacked_outputs(), cfg.weights)
    assert sol.cost == pytest.approx(oracle_cost, rel=1e-8)
    assert sol.cost == pytest.approx(lq_cost(sol.u, sol.y, cfg.weights), rel=1e-9)


def test_data_enabled_constraint_residual(trial3, cfg):
    sol = data_enabled_lq(trial3.blocks, trial3.w_ini, cfg.weights)
    target = np.concatenate([trial3.z_ini, sol.u, sol.y])
    assert np.linalg.norm(trial3.blocks.stacked() @ sol.g - target) <= 1e-8


def test_data_enabled_min_norm_g(trial3, cfg):
    sol = data_enabled_lq(trial3.blocks, trial3.w_ini, cfg.weights)
    H = trial3.blocks.stacked()
    # min-norm g lies in the row space of H
    P = np.linalg.pinv(H) @ H
    assert np.allclose(P @ sol.g, sol.g, atol=1e-9)


def test_data_enabled_at_rest(trial3, cfg):
    w_ini = Trajectory(np.zeros((3, 1)), np.zeros((3, 2)))
    sol = data_enabled_lq(trial3.blocks, w_ini, cfg.weights)
    assert np.allclose(sol.u, 0, atol=1e-12) and np.allclose(sol.y, 0, atol=1e-12)


def test_data_enabled_infeasible(trial3, cfg):
    bad = Trajectory(np.zeros((3, 1)), np.array([[0.0, 0.0], [5.0, 0.0], [0.0, 0.0]]))
    with pytest.raises(InfeasibleInitialTrajectory):
        data_enabled_lq(trial3.blocks, bad, cfg.weights)


def test_data_enabled_wrong_length(trial3, cfg):
    with pytest.raises(ValueError):
        data_enabled_lq(trial3.blocks, trial3.w_tail, cfg.weights)


def test_oracle_tail_satisfies_data_kkt(trial3, cfg):
    u, y = trial3.w_tail.stacked_inputs(), trial3.w_tail.stacked_outputs()
    lam = fit_costate(trial3.blocks, u, y, cfg.weights.Q, cfg.weights.R)
    r = kkt_residual_vanilla(trial3.blocks, u, y, cfg.weights.Q, cfg.weights.R, lam)
    assert np.linalg.norm(r) <= 1e-7


def test_condensed_matches_data_enabled(trial3, predictor3, cfg):
    u = condensed_lq(predictor3.K_p, predictor3.K_f, trial3.z_ini, cfg.weights)
    sol = data_enabled_lq(trial3.blocks, trial3.w_ini, cfg.weights)
    assert np.allclose(u, sol.u, atol=1e-6)
    g = condensed_gradient(predictor3.K_p, predictor3.K_f, trial3.z_ini, u, cfg.weights)
    assert np.linalg.norm(g) <= 1e-8 * (1 + np.linalg.norm(trial3.z_ini))


def test_condensed_zero_initial(predictor3, cfg):
    u = condensed_lq(predictor3.K_p, predictor3.K_f, np.zeros(9), cfg.weights)
    assert np.array_equal(u, np.zeros(10))


def test_condensed_rejects_bad_hessian(predictor3):
    # bypass validation to feed an indefinite R
    obj = object.__new__(LqObjective)
    object.__setattr__(obj, "Q", np.eye(2))
    object.__setattr__(obj, "R", -np.ones((1, 1)))
    with pytest.raises(ValueError):
        condensed_lq(predictor3.K_p, np.zeros_like(predictor3.K_f), np.ones(9), obj)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_condensed_gradient_finite_difference(seed):
    rng = np.random.default_rng(seed)
    Kp, Kf = rng.standard_normal((6, 4)), rng.standard_normal((6, 3))
    obj = LqObjective(random_psd(rng, 2), random_psd(rng, 1, floor=0.1))
    z, u = rng.standard_normal(4), rng.standard_normal(3)
    g = condensed_gradient(Kp, Kf, z, u, obj)
    h = 1e-5
    fd = np.array([
        (condensed_objective(Kp, Kf, z, u + h * e, obj) - condensed_objective(Kp, Kf, z, u - h * e, obj)) / (2 * h)
        for e in np.eye(3)
    ])
    assert np.allclose(fd, g, rtol=1e-5, atol=1e-5 * max(1.0, np.abs(g).max()))
