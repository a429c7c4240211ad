import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ioc_forge.estimate import UnidentifiableError
from ioc_forge.experiments import estimation_error, make_trial, simplified_matrix, trial_seed, vanilla_matrix
from ioc_forge.forward import condensed_gradient, data_enabled_lq
from ioc_forge.lti import HankelBlocks, simulate
from ioc_forge.simplified import (
    CondensedPredictor,
    assemble_phi_tilde,
    check_horizon,
    check_identifiability_simplified,
    compute_condensed_predictor,
    horizon_threshold,
    predict_output,
    simplified_kkt,
    solve_noiseless_simplified,
    solve_noisy_simplified,
    theta_simplified,
)
from ioc_forge.vanilla import solve_noiseless_vanilla

from conftest import random_psd, random_symmetric


@pytest.fixture(scope="module")
def sm3(trial3, predictor3):
    return assemble_phi_tilde(predictor3, trial3.z_ini, trial3.w_tail.stacked_inputs())


def test_predictor_dimensions(predictor3):
    assert predictor3.K_p.shape == (20, 9) and predictor3.K_f.shape == (20, 10)


def test_predictor_matches_simulation(cfg, predictor3, rng):
    for _ in range(20):
        x0 = rng.standard_normal(2) * 3
        u = rng.uniform(-1, 1, (13, 1))
        w = simulate(cfg.system, x0, u)
        z = np.concatenate([w.inputs[:3].ravel(), w.outputs[:3].ravel()])
        y = predict_output(predictor3, z, u[3:].ravel())
        assert np.allclose(y, w.outputs[3:].ravel(), atol=1e-6)


def test_predictor_zero_data():
    Z = np.zeros
    b = HankelBlocks(Z((2, 5)), Z((4, 5)), Z((3, 5)), Z((6, 5)), T_ini=2, N=3, m=1, p=2)
    cp = compute_condensed_predictor(b)
    assert np.array_equal(cp.K_p, Z((6, 6))) and np.array_equal(cp.K_f, Z((6, 3)))


def test_predict_output_linear(predictor3, rng):
    z1, z2, u1, u2 = rng.standard_normal(9), rng.standard_normal(9), rng.standard_normal(10), rng.standard_normal(10)
    assert np.array_equal(predict_output(predictor3, np.zeros(9), np.zeros(10)), np.zeros(20))
    lhs = predict_output(predictor3, 2 * z1 + z2, 2 * u1 + u2)
    rhs = 2 * predict_output(predictor3, z1, u1) + predict_output(predictor3, z2, u2)
    assert np.allclose(lhs, rhs, atol=1e-10)


def test_predict_matches_data_enabled(trial3, predictor3, cfg):
    sol = data_enabled_lq(trial3.blocks, trial3.w_ini, cfg.weights)
    assert np.allclose(predict_output(predictor3, trial3.z_ini, sol.u), sol.y, atol=1e-6)


def test_phi_dimensions(sm3):
    assert sm3.phi_tilde.shape == (10, 4) and sm3.n_weights == 4


def test_phi_matches_direct_kkt(trial3, predictor3, sm3, rng):
    u = trial3.w_tail.stacked_inputs()
    for _ in range(50):
        Q, R = random_symmetric(rng, 2), random_symmetric(rng, 1)
        direct = simplified_kkt(predictor3, trial3.z_ini, u, Q, R)
        assert np.max(np.abs(sm3.phi_tilde @ theta_simplified(Q, R) - direct)) <= 1e-10


def test_phi_zero_inputs(predictor3):
    sm = assemble_phi_tilde(predictor3, np.zeros(9), np.zeros(10))
    assert np.array_equal(sm.phi_tilde, np.zeros((10, 4)))


def test_phi_gradient_identity(trial3, predictor3, sm3, cfg):
    u = trial3.w_tail.stacked_inputs()
    for obj in (cfg.weights, cfg.weights.scaled(3.0)):
        g = condensed_gradient(predictor3.K_p, predictor3.K_f, trial3.z_ini, u, obj)
        assert np.allclose(g, 2 * sm3.phi_tilde @ theta_simplified(obj.Q, obj.R), atol=1e-10)


def test_true_weights_annihilated(sm3, cfg):
    assert np.linalg.norm(sm3.phi_tilde @ theta_simplified(cfg.weights.Q, cfg.weights.R)) <= 1e-7


def test_y_es_definition(trial3, predictor3, sm3):
    u = trial3.w_tail.stacked_inputs()
    assert np.array_equal(sm3.y_es, predictor3.K_f @ u + predictor3.K_p @ trial3.z_ini)


def test_identifiable_noiseless(sm3):
    ok, rep = check_identifiability_simplified(sm3)
    assert ok and rep.numerical_rank == 3


def test_identifiability_fails_on_noise(cfg):
    td = make_trial(cfg, 3, trial_seed(0, 7), 40.0, 8)
    ok, rep = check_identifiability_simplified(simplified_matrix(td))
    assert not ok and rep.numerical_rank == 4


def test_identifiability_short_horizon(cfg):
    c1 = cfg.with_(N=1)
    ok, rep = check_identifiability_simplified(simplified_matrix(make_trial(c1, 3, 5)))
    assert not ok and rep.numerical_rank <= 1


@pytest.mark.parametrize("m,p,N,expected", [(1, 2, 2, False), (1, 2, 3, True), (1, 2, 10, True), (1, 1, 1, True)])
def test_check_horizon(m, p, N, expected):
    assert check_horizon(m, p, N) is expected


def test_horizon_threshold_values():
    assert horizon_threshold(1, 2) == 3
    assert horizon_threshold(1, 1) == 1
    with pytest.raises(ValueError):
        check_horizon(0, 1, 1)


@given(st.integers(1, 4), st.integers(1, 4), st.integers(1, 20))
def test_horizon_matches_row_count(m, p, N):
    # doomed exactly when m N rows cannot reach rank n_weights - 1
    n_weights = (m * m + m + p * p + p) // 2
    assert check_horizon(m, p, N) == (m * N >= n_weights - 1)


def test_noiseless_recovery(sm3, cfg):
    est = solve_noiseless_simplified(sm3)
    assert estimation_error(est.Q_hat, est.R_hat, cfg.weights.Q, cfg.weights.R) <= 1e-6
    assert est.lambda_ini is None
    X = np.concatenate([np.linalg.eigvalsh(est.Q_hat), est.R_hat.ravel()])
    assert X.min() == pytest.approx(1.0, abs=1e-12)


def test_agrees_with_vanilla(trial3, sm3):
    a = solve_noiseless_simplified(sm3)
    b = solve_noiseless_vanilla(vanilla_matrix(trial3))
    assert estimation_error(a.Q_hat, a.R_hat, b.Q_hat, b.R_hat) <= 1e-6


@pytest.mark.parametrize("T_ini", [2, 5, 8])
def test_unknown_count_independent_of_tini(cfg, T_ini):
    assert simplified_matrix(make_trial(cfg, T_ini, 3)).phi_tilde.shape == (10, 4)


def test_noiseless_unidentifiable_raises(predictor3):
    with pytest.raises(UnidentifiableError):
        solve_noiseless_simplified(assemble_phi_tilde(predictor3, np.zeros(9), np.zeros(10)))


def test_noisy_on_clean_data(sm3):
    a, b = solve_noiseless_simplified(sm3), solve_noisy_simplified(sm3)
    assert estimation_error(b.Q_hat, b.R_hat, a.Q_hat, a.R_hat) <= 1e-6
    G = sm3.phi_tilde.T @ sm3.phi_tilde
    assert b.residual ** 2 == pytest.approx(max(np.linalg.eigvalsh(G)[0], 0.0), abs=1e-20)


def test_noisy_is_global_rayleigh_minimum(cfg, rng):
    td = make_trial(cfg, 3, trial_seed(0, 1, 2), 30.0, 11)
    sm = simplified_matrix(td)
    est = solve_noisy_simplified(sm)
    theta = theta_simplified(est.Q_hat, est.R_hat)
    assert np.linalg.norm(theta) == pytest.approx(1.0)
    best = np.linalg.norm(sm.phi_tilde @ theta)
    assert best == pytest.approx(est.residual, rel=1e-10)
    V = rng.standard_normal((10_000, 4))
    V /= np.linalg.norm(V, axis=1, keepdims=True)
    assert np.all(np.linalg.norm(V @ sm.phi_tilde.T, axis=1) >= best - 1e-14)
    assert np.trace(est.Q_hat) + np.trace(est.R_hat) > 0


def test_dimension_mismatch(predictor3):
    with pytest.raises(ValueError):
        assemble_phi_tilde(predictor3, np.zeros(8), np.zeros(10))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_phi_linearisation_random_predictor(seed):
    rng = np.random.default_rng(seed)
    m, p, N, T_ini = 2, 2, 4, 2
    cp = CondensedPredictor(rng.standard_normal((p * N, (m + p) * T_ini)), rng.standard_normal((p * N, m * N)),
                            m, p, T_ini, N)
    z, u = rng.standard_normal((m + p) * T_ini), rng.standard_normal(m * N)
    sm = assemble_phi_tilde(cp, z, u)
    Q, R = random_psd(rng, p), random_psd(rng, m)
    assert np.allclose(sm.phi_tilde @ theta_simplified(Q, R), simplified_kkt(cp, z, u, Q, R), atol=1e-9)
