import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from pipebot.lqr import (ConvergenceError, LqrGain, LqrWeights, SynthesisError,
                         lqr_control, riccati_residual, solve_lyapunov, solve_riccati,
                         stabilizing_gain)


def random_system(rng):
    n = int(rng.integers(2, 7))
    m = int(rng.integers(1, 4))
    A = rng.normal(size=(n, n))
    B = rng.normal(size=(n, m))
    C = rng.normal(size=(n, n))
    Q = C.T @ C + 0.1 * np.eye(n)
    R = np.diag(rng.uniform(0.1, 10.0, size=m))
    return A, B, Q, R


def test_scalar_integrator_exact():
    g = solve_riccati([[0.0]], [[1.0]], LqrWeights([[1.0]], [[1.0]]))
    assert g.P[0, 0] == pytest.approx(1.0, abs=1e-12)
    assert g.K[0, 0] == pytest.approx(1.0, abs=1e-12)


def test_double_integrator_closed_form():
    A = np.array([[0.0, 1.0], [0.0, 0.0]])
    B = np.array([[0.0], [1.0]])
    g = solve_riccati(A, B, LqrWeights(np.eye(2), [[1.0]]))
    r3 = math.sqrt(3.0)
    assert np.allclose(g.P, [[r3, 1.0], [1.0, r3]], atol=1e-12)
    assert np.allclose(g.K, [[1.0, r3]], atol=1e-12)


def test_random_systems_stabilised():
    rng = np.random.default_rng(20240)
    for _ in range(100):
        A, B, Q, R = random_system(rng)
        g = solve_riccati(A, B, LqrWeights(Q, R))
        res = np.linalg.norm(riccati_residual(g.P, A, B, Q, R))
        assert res <= 1e-9 * (1.0 + np.linalg.norm(g.P))
        assert np.max(g.closed_loop_eigenvalues(A, B).real) < 0
        assert np.allclose(g.P, g.P.T, atol=1e-12)
        assert np.min(np.linalg.eigvalsh(g.P)) > 0


def test_matches_scipy_are():
    rng = np.random.default_rng(7)
    for _ in range(20):
        A, B, Q, R = random_system(rng)
        P_ref = scipy.linalg.solve_continuous_are(A, B, Q, R)
        g = solve_riccati(A, B, LqrWeights(Q, R))
        assert np.allclose(g.P, P_ref, rtol=1e-7, atol=1e-9)


@settings(max_examples=25, deadline=None)
@given(alpha=st.floats(1e-3, 1e3), seed=st.integers(0, 10_000))
def test_weight_scaling(alpha, seed):
    A, B, Q, R = random_system(np.random.default_rng(seed))
    g1 = solve_riccati(A, B, LqrWeights(Q, R))
    g2 = solve_riccati(A, B, LqrWeights(alpha * Q, alpha * R))
    assert np.allclose(g2.P, alpha * g1.P, rtol=1e-8, atol=1e-10 * alpha)
    assert np.allclose(g2.K, g1.K, rtol=1e-8, atol=1e-10)


def test_lyapunov_solution():
    rng = np.random.default_rng(1)
    A = rng.normal(size=(5, 5)) - 6 * np.eye(5)
    C = rng.normal(size=(5, 5))
    C = C @ C.T
    X = solve_lyapunov(A, C)
    assert np.allclose(A.T @ X + X @ A + C, 0, atol=1e-12)


def test_initial_gain_stabilises():
    rng = np.random.default_rng(5)
    A, B, _, _ = random_system(rng)
    K0 = stabilizing_gain(A, B)
    assert np.max(np.linalg.eigvals(A - B @ K0).real) < 0


def test_unstabilizable_rejected():
    A = np.diag([1.0, -1.0])
    B = np.array([[0.0], [1.0]])
    with pytest.raises(SynthesisError, match="stabilizable"):
        solve_riccati(A, B, LqrWeights(np.eye(2), [[1.0]]))


def test_undetectable_rejected():
    A = np.diag([1.0, -1.0])
    B = np.eye(2)
    with pytest.raises(SynthesisError, match="detectable"):
        solve_riccati(A, B, LqrWeights(np.diag([0.0, 1.0]), np.eye(2)))


@pytest.mark.parametrize("Q,R", [
    (np.eye(2), [[0.0]]),
    (np.eye(2), [[-1.0]]),
    (np.diag([1.0, -1.0]), [[1.0]]),
    (np.array([[1.0, 0.5], [0.0, 1.0]]), [[1.0]]),
])
def test_bad_weights(Q, R):
    with pytest.raises(SynthesisError):
        LqrWeights(Q, R)


def test_shape_mismatch():
    with pytest.raises(SynthesisError):
        solve_riccati(np.eye(2), np.ones((2, 1)), LqrWeights(np.eye(3), [[1.0]]))


def test_iteration_budget_exhausted():
    rng = np.random.default_rng(11)
    A, B, Q, R = random_system(rng)
    with pytest.raises(ConvergenceError) as info:
        solve_riccati(A + 5 * np.eye(A.shape[0]), B, LqrWeights(Q, R), max_iter=1)
    assert info.value.residual > 0


def test_plant_design_gain(cfg):
    from pipebot.sim import design
    _, lin, gain = design(cfg)
    assert gain.residual <= 1e-9 * (1 + np.linalg.norm(gain.P))
    assert np.max(gain.closed_loop_eigenvalues(lin.A2, lin.B2).real) < 0


def test_lqr_control_linear():
    K = np.arange(12.0).reshape(3, 4)
    g = LqrGain(K, np.eye(4), 0.0)
    x = np.array([0.1, -0.2, 0.3, 0.05])
    assert np.array_equal(lqr_control(g, np.zeros(4)), np.zeros(3))
    assert np.allclose(lqr_control(g, 2 * x), 2 * lqr_control(g, x))
    assert np.allclose(lqr_control(K, x), -K @ x)
