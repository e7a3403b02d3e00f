import warnings

import numpy as np
import pytest

from conftest import three_state_mdp
from tdmjls import JumpLinearSystem, MarkovChain
from tdmjls.chain import stationary_distribution
from tdmjls.errors import ModelWarning, NonErgodicError, NumericalError, ValidationError
from tdmjls.mc import MCConfig, simulate_paths
from tdmjls.tdmodel import (PolicyEvalProblem, build_generic, build_td0,
                            center_offsets, td_fixed_point)


def test_single_state_bellman():
    prob = PolicyEvalProblem(np.array([[1.0]]), np.array([1.0]), 0.5, np.array([[1.0]]))
    model = build_td0(prob, 0.1)
    assert model.theta_star[0] == pytest.approx(2.0)
    assert model.sys.n == 1
    assert model.sys.A[0, 0, 0] == pytest.approx(-0.5)
    assert model.sys.b[0, 0] == pytest.approx(0.0, abs=1e-15)


def test_tabular_fixed_point_is_value_function():
    prob = three_state_mdp()
    tab = PolicyEvalProblem(prob.P_s, prob.r, prob.gamma, np.eye(3))
    v = np.linalg.solve(np.eye(3) - prob.gamma * prob.P_s, prob.r)
    assert np.allclose(build_td0(tab, 0.1).theta_star, v, rtol=0, atol=1e-10)


def test_pair_chain_structure():
    prob = three_state_mdp()
    model = build_td0(prob, 0.05)
    sys = model.sys
    assert sys.n == 9 and sys.d == 2
    d_s = model.state_distribution
    p_inf = stationary_distribution(sys.chain).p_inf
    expected = np.array([d_s[s] * prob.P_s[s, sn] for sn, s in model.pair_index])
    assert np.allclose(p_inf, expected, atol=1e-13)
    assert np.allclose(sys.chain.p0, p_inf, atol=1e-13)  # stationary start by default
    assert np.linalg.norm(p_inf @ sys.b) <= 1e-10
    # projected Bellman equation
    D = np.diag(d_s)
    lhs = prob.Phi.T @ D @ (prob.Phi - prob.gamma * prob.P_s @ prob.Phi) @ model.theta_star
    assert np.allclose(lhs, prob.Phi.T @ D @ prob.r, atol=1e-12)


def test_mode_matrices_match_td_update():
    prob = three_state_mdp()
    model = build_td0(prob, 0.05)
    theta = np.array([0.3, -1.2])
    for i, (sn, s) in enumerate(model.pair_index):
        phi, phin = prob.Phi[s], prob.Phi[sn]
        td_err = prob.r[s] + prob.gamma * phin @ theta - phi @ theta
        update = phi * td_err
        xi = theta - model.theta_star
        assert np.allclose(model.sys.A[i] @ xi + model.sys.b[i], update, atol=1e-12)


def test_pruning():
    P_s = np.array([[0.0, 1.0, 0.0], [0.5, 0.0, 0.5], [0.3, 0.3, 0.4]])
    prob = PolicyEvalProblem(P_s, np.array([1.0, 0.0, 2.0]), 0.9, np.eye(3))
    pruned = build_td0(prob, 0.1)
    full = build_td0(prob, 0.1, prune=False)
    assert full.sys.n == 9
    assert pruned.sys.n == int(np.count_nonzero(P_s))
    assert np.allclose(pruned.theta_star, full.theta_star)


def test_rejections():
    with pytest.raises(ValidationError):
        PolicyEvalProblem(np.eye(2) * 0.5 + 0.25, np.zeros(2), 0.9, np.array([[1.0, 2.0], [2.0, 4.0]]))
    periodic = PolicyEvalProblem(np.array([[0.0, 1.0], [1.0, 0.0]]), np.zeros(2), 0.9, np.eye(2))
    with pytest.raises(NonErgodicError):
        build_td0(periodic, 0.1)


def test_build_generic_warnings():
    chain = MarkovChain(np.array([[0.9, 0.1], [0.1, 0.9]]), np.array([1.0, 0.0]))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        build_generic(np.array([[[-1.0]], [[-2.0]]]), np.array([[1.0], [-1.0]]), chain, 0.1)
    with pytest.warns(ModelWarning, match="Hurwitz"):
        build_generic(np.array([[[1.0]], [[1.0]]]), np.array([[1.0], [-1.0]]), chain, 0.1)
    with pytest.warns(ModelWarning, match="center"):
        build_generic(np.array([[[-1.0]], [[-2.0]]]), np.array([[1.0], [1.0]]), chain, 0.1)


def test_center_offsets():
    one = MarkovChain(np.array([[1.0]]), np.array([1.0]))
    c, shift = center_offsets(JumpLinearSystem(one, [[-1.0]], [1.0], 0.1))
    assert shift[0] == pytest.approx(1.0) and c.b[0, 0] == pytest.approx(0.0)
    chain = MarkovChain(np.array([[0.9, 0.1], [0.1, 0.9]]), np.array([1.0, 0.0]))
    sys = JumpLinearSystem(chain, np.array([[[-1.0]], [[-2.0]]]), np.array([[1.0], [-1.0]]), 0.1)
    c, shift = center_offsets(sys)
    assert shift[0] == 0.0 and np.all(c.b == sys.b)
    singular = JumpLinearSystem(one, [[0.0]], [1.0], 0.1)
    with pytest.raises(NumericalError):
        center_offsets(singular)


def test_centering_invariance_pathwise():
    rng = np.random.default_rng(3)
    chain = MarkovChain(np.array([[0.7, 0.3], [0.4, 0.6]]), np.array([0.5, 0.5]))
    A = np.array([[[-1.0, 0.2], [0.0, -0.5]], [[-0.8, 0.0], [0.3, -1.5]]])
    sys = JumpLinearSystem(chain, A, rng.normal(size=(2, 2)), 0.1)
    c, shift = center_offsets(sys)
    cfg = MCConfig(200, 40, base_seed=99)
    xi0 = np.array([1.0, 2.0])
    s1, m1, _ = simulate_paths(sys, xi0, cfg)
    s2, m2, _ = simulate_paths(c, xi0 - shift, cfg)
    assert np.array_equal(m1, m2)
    assert np.allclose(s1, s2 + shift, atol=1e-12)


def test_fixed_point_singular():
    prob = PolicyEvalProblem(np.array([[1.0]]), np.array([1.0]), 0.0, np.array([[1.0]]))
    assert td_fixed_point(prob)[0] == pytest.approx(1.0)
