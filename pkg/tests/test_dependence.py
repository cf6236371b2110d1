import numpy as np
import pytest

from superpareto.dependence import (
    Comonotone,
    GaussianNSD,
    Independence,
    Mixture,
    copula_from_dict,
    pivoted_cholesky,
    sample_joint,
    sample_uniforms,
)
from superpareto.distributions import Pareto
from superpareto.rng import RngStream


def test_comonotone_columns_equal():
    u = sample_uniforms(Comonotone(), 3, 1000, RngStream(0))
    assert np.array_equal(u[:, 0], u[:, 2])


def test_independence_uniform_moments():
    u = sample_uniforms(Independence(), 2, 200_000, RngStream(1))
    assert abs(u.mean() - 0.5) < 0.005
    assert abs(np.corrcoef(u.T)[0, 1]) < 0.01


def test_gaussian_minus_one_is_countermonotone():
    c = GaussianNSD(((1.0, -1.0), (-1.0, 1.0)))
    u = sample_uniforms(c, 2, 10_000, RngStream(2))
    np.testing.assert_allclose(u[:, 0] + u[:, 1], 1.0, atol=1e-9)


def test_gaussian_rejects_positive_and_bad_matrices():
    with pytest.raises(ValueError):
        GaussianNSD(((1.0, 0.3), (0.3, 1.0)))
    with pytest.raises(ValueError):
        GaussianNSD(((1.0, -0.9, -0.9), (-0.9, 1.0, -0.9), (-0.9, -0.9, 1.0)))
    with pytest.raises(ValueError):
        GaussianNSD(((2.0, 0.0), (0.0, 1.0)))


def test_pivoted_cholesky_reconstructs():
    a = np.array([[1.0, -0.5, -0.5], [-0.5, 1.0, -0.5], [-0.5, -0.5, 1.0]])
    f = pivoted_cholesky(a)
    assert f.shape[1] == 2
    np.testing.assert_allclose(f @ f.T, a, atol=1e-12)


def test_mixture_weights_validated():
    with pytest.raises(ValueError):
        Mixture((0.5, 0.4), (Independence(), Comonotone()))
    m = Mixture((1.0, 0.0), (Comonotone(), Independence()))
    u = sample_uniforms(m, 2, 1000, RngStream(3))
    assert np.array_equal(u[:, 0], u[:, 1])


def test_copula_round_trip():
    for c in (Independence(), Comonotone(), GaussianNSD(((1.0, -0.3), (-0.3, 1.0))),
              Mixture((0.5, 0.5), (Independence(), Comonotone()))):
        assert copula_from_dict(c.to_dict()).to_dict() == c.to_dict()


def test_joint_marginals():
    x = sample_joint(Pareto(1), GaussianNSD(((1.0, -0.5), (-0.5, 1.0))), 2, 200_000, RngStream(4))
    for j in range(2):
        assert abs(np.mean(x[:, j] > 2.0) - 0.5) < 0.005


def test_joint_thread_invariant():
    c = Mixture((0.3, 0.7), (Independence(), Comonotone()))
    a = sample_joint(Pareto(1), c, 3, 150_000, RngStream(5), threads=1)
    b = sample_joint(Pareto(1), c, 3, 150_000, RngStream(5), threads=3)
    assert np.array_equal(a, b)
