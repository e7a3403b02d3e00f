import numpy as np
import pytest

from tdmjls.chain import (MarkovChain, distribution_path, evolve_distribution,
                          is_ergodic, stationary_distribution)
from tdmjls.errors import NonErgodicError, ValidationError

P2 = np.array([[0.9, 0.1], [0.1, 0.9]])


def test_frozen_chain():
    ch = MarkovChain(np.eye(3), np.array([0.2, 0.3, 0.5]))
    assert np.all(evolve_distribution(ch, 7) == ch.p0)


def test_one_step_and_limit():
    ch = MarkovChain(P2, np.array([1.0, 0.0]))
    assert np.allclose(evolve_distribution(ch, 1), [0.9, 0.1], rtol=0, atol=1e-15)
    assert np.allclose(evolve_distribution(ch, 400), [0.5, 0.5], atol=1e-12)
    path = distribution_path(ch, 5)
    assert path.shape == (6, 2)
    assert np.allclose(path[5], evolve_distribution(ch, 5))


def test_stationary_and_slem():
    a = stationary_distribution(MarkovChain(P2, np.array([1.0, 0.0])))
    assert np.allclose(a.p_inf, [0.5, 0.5], atol=1e-14)
    assert a.mixing_rate == pytest.approx(0.8)
    a = stationary_distribution(MarkovChain.iid(np.array([0.2, 0.3, 0.5])))
    assert np.allclose(a.p_inf, [0.2, 0.3, 0.5], atol=1e-14)
    assert a.mixing_rate == pytest.approx(0.0, abs=1e-12)


def test_periodic_chain_rejected():
    ch = MarkovChain(np.array([[0.0, 1.0], [1.0, 0.0]]), np.array([1.0, 0.0]))
    with pytest.raises(NonErgodicError):
        stationary_distribution(ch)
    assert not is_ergodic(ch)


def test_reducible_chain_rejected():
    assert not is_ergodic(MarkovChain(np.eye(2), np.array([0.5, 0.5])))


def test_validation_names_row():
    with pytest.raises(ValidationError, match="row 1"):
        MarkovChain(np.array([[0.5, 0.5], [0.5, 0.4]]), np.array([1.0, 0.0]))
    with pytest.raises(ValidationError):
        MarkovChain(P2, np.array([0.7, 0.7]))
    with pytest.raises(ValidationError):
        MarkovChain(np.array([[1.2, -0.2], [0.5, 0.5]]), np.array([1.0, 0.0]))


def test_random_stationary_is_fixed_point(rng):
    for _ in range(10):
        P = rng.uniform(0.01, 1, size=(5, 5))
        P /= P.sum(1, keepdims=True)
        p = stationary_distribution(MarkovChain(P, np.full(5, 0.2))).p_inf
        assert np.allclose(P.T @ p, p, atol=1e-14)
