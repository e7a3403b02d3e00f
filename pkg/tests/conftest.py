import numpy as np
import pytest

from tdmjls import JumpLinearSystem, MarkovChain
from tdmjls.tdmodel import PolicyEvalProblem


def running_example(alpha=0.1, p0=(1.0, 0.0)):
    chain = MarkovChain(np.array([[0.9, 0.1], [0.1, 0.9]]), np.array(p0))
    return JumpLinearSystem(chain, np.array([[[-1.0]], [[-2.0]]]), np.array([[1.0], [-1.0]]), alpha)


def scalar_iid(alpha=0.1):
    chain = MarkovChain.iid(np.array([0.5, 0.5]))
    return JumpLinearSystem(chain, np.array([[[-1.0]], [[-1.0]]]), np.array([[1.0], [-1.0]]), alpha)


def three_state_mdp():
    P_s = np.array([[0.1, 0.6, 0.3], [0.4, 0.2, 0.4], [0.5, 0.3, 0.2]])
    r = np.array([1.0, -0.5, 2.0])
    Phi = np.array([[1.0, 0.0], [0.5, 1.0], [0.0, 1.0]])
    return PolicyEvalProblem(P_s, r, 0.8, Phi)


def random_chain(rng, n):
    P = rng.uniform(0.05, 1.0, size=(n, n))
    P /= P.sum(axis=1, keepdims=True)
    p0 = rng.dirichlet(np.ones(n))
    return MarkovChain(P, p0)


def random_system(rng, n, d, alpha=None):
    """Random system whose modes are individually Hurwitz, so small alpha is stable."""
    chain = random_chain(rng, n)
    A = np.empty((n, d, d))
    for i in range(n):
        R = rng.normal(size=(d, d))
        S = rng.normal(size=(d, d))
        A[i] = -(R @ R.T / d + 0.3 * np.eye(d)) + 0.3 * (S - S.T)
    b = rng.normal(size=(n, d))
    return JumpLinearSystem(chain, A, b, rng.uniform(0.02, 0.15) if alpha is None else alpha)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def stable_random_system(rng, n, d):
    from tdmjls.analysis import sigma_h22

    sys = random_system(rng, n, d)
    while sigma_h22(sys, "markov") >= 0.999:
        sys = sys.with_alpha(sys.alpha / 2)
    return sys
