# -*- coding: utf-8 -*-
#
# test_objectives.py
#

import numpy as np
import pytest

from dmgattack.attack.eigen import EigenConvergenceError, principal_eigenvector
from dmgattack.attack.features import project_to_editable
from dmgattack.attack.objectives import (
    PerturbationWeights,
    delta_loss_neighbor,
    delta_loss_self,
    neighbor_weight,
    optimal_feature_perturbation,
    self_direction,
    self_objective,
    weighted_objective,
)
from dmgattack.dmg.graph import projection_from_adjacency


def _random_units(rng, count, size):

    units = rng.standard_normal((count, size))
    return units / np.linalg.norm(units, axis=1, keepdims=True)


def test_eigenvector_of_diagonal_matrix():

    vector, value = principal_eigenvector(np.diag([1.0, 3.0]))
    np.testing.assert_allclose(vector, [0.0, 1.0], atol=1e-9)
    assert value == pytest.approx(3.0)


def test_eigenvector_of_identity_is_deterministic():

    first, value = principal_eigenvector(np.eye(4), seed=2)
    second, _ = principal_eigenvector(np.eye(4), seed=2)
    assert value == pytest.approx(1.0)
    np.testing.assert_array_equal(first, second)
    assert first[np.argmax(np.abs(first))] > 0


def test_eigenvector_matches_dense_solver():

    rng = np.random.default_rng(0)
    for _ in range(200):
        size = int(rng.integers(2, 31))
        G = rng.standard_normal((size, size))
        M = G @ G.T

        vector, value = principal_eigenvector(M)
        values, vectors = np.linalg.eigh(M)
        assert abs(value - values[-1]) <= 1e-8 * values[-1]
        assert abs(vector @ vectors[:, -1]) >= 1 - 1e-8
        assert np.linalg.norm(M @ vector - value * vector) <= 1e-9 * value


def test_zero_matrix():

    vector, value = principal_eigenvector(np.zeros((3, 3)))
    assert value == 0.0
    np.testing.assert_array_equal(vector, [1.0, 0.0, 0.0])


def test_eigen_input_checks():

    with pytest.raises(ValueError):
        principal_eigenvector(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        principal_eigenvector(np.ones((2, 3)))


def test_eigen_non_convergence_reports_residual():

    with pytest.raises(EigenConvergenceError) as info:
        principal_eigenvector(np.diag([1.0, 0.999]), max_iter=1, squarings=0)
    assert info.value.residual > 0


def _two_node_projection():

    return projection_from_adjacency(
        np.zeros((2, 2)), np.zeros((2, 2)), ('domain', 'domain')
    )


def test_delta_loss_self_examples():

    projection = _two_node_projection()
    W = np.array([[1.0], [0.0]])

    assert delta_loss_self(projection, [0.0, 0.0], W, 0) == 0.0
    assert delta_loss_self(projection, [2.0, 0.0], W, 0) == pytest.approx(4.0)
    assert delta_loss_self(projection, [6.0, 0.0], W, 0) == pytest.approx(36.0)
    with pytest.raises(ValueError):
        delta_loss_self(projection, [1.0, 0.0, 0.0], W, 0)


def test_delta_loss_neighbor_examples():

    projection = _two_node_projection()
    W = np.array([[1.0, 0.5], [0.0, 2.0]])
    message = np.array([0.3, -0.7])

    assert delta_loss_neighbor(projection, -message, message, W, 1) == 0.0
    baseline = delta_loss_neighbor(projection, [0.0, 0.0], message, W, 1)
    assert baseline == pytest.approx(np.sum((message @ W) ** 2))


def test_weights_validation():

    with pytest.raises(ValueError):
        PerturbationWeights(0.7, 0.7)
    with pytest.raises(ValueError):
        PerturbationWeights(1.5, -0.5)
    assert PerturbationWeights.from_beta(0.0).self_only


def test_neighbor_weight_modes():

    assert neighbor_weight(4) == 0.25
    assert neighbor_weight(4, 'degree') == 4.0
    with pytest.raises(ValueError):
        neighbor_weight(4, 'uniform')
    with pytest.raises(ValueError):
        neighbor_weight(0)


def test_self_direction_is_optimal():

    rng = np.random.default_rng(1)
    eps = 2.0
    for _ in range(50):
        W = rng.standard_normal((int(rng.integers(2, 16)), int(rng.integers(1, 5))))

        dx = optimal_feature_perturbation(W, [], [], PerturbationWeights(), eps)
        largest = np.linalg.eigvalsh(W @ W.T)[-1]
        assert np.linalg.norm(dx) == pytest.approx(eps)

        units = _random_units(rng, 10000, W.shape[0])
        assert np.all(np.sum((units @ W) ** 2, axis=1) <= largest + 1e-9)
        assert np.sum(((dx / eps) @ W) ** 2) >= largest - 1e-9


def test_self_objective_is_largest_eigenvalue():

    rng = np.random.default_rng(2)
    for _ in range(100):
        W = rng.standard_normal((15, int(rng.integers(1, 5))))
        eps = float(rng.uniform(0.1, 5.0))

        dx = eps * self_direction(W)
        largest = np.linalg.eigvalsh(W @ W.T)[-1]
        assert self_objective(dx, W) == pytest.approx(largest * eps ** 2, rel=1e-8)


def test_self_only_mode_ignores_neighbors():

    rng = np.random.default_rng(4)
    W = rng.standard_normal((15, 2))
    messages = [rng.standard_normal(15) for _ in range(3)]

    dx = optimal_feature_perturbation(
        W, messages, [1 / 3] * 3, PerturbationWeights(1.0, 0.0), 1.5
    )
    np.testing.assert_allclose(dx, 1.5 * self_direction(W))


def test_combined_direction_beats_random_search():

    rng = np.random.default_rng(5)
    W = rng.standard_normal((15, 2))
    messages = [0.01 * rng.standard_normal(15) for _ in range(2)]
    neighbor_weights = [0.5, 0.5]
    weights = PerturbationWeights()
    eps = 1.0

    dx = optimal_feature_perturbation(W, messages, neighbor_weights, weights, eps)
    best = weighted_objective(dx, W, messages, neighbor_weights, weights)

    for unit in _random_units(rng, 10000, 15):
        assert weighted_objective(
            eps * unit, W, messages, neighbor_weights, weights
        ) <= best + 1e-9


def test_coordinated_perturbations_weaken_spillover():
    # Perturbations of ten adversary nodes arrive at one outside neighbor with
    # nonnegative propagation weights. Self-only perturbations all point the
    # same way and add up, coordinated ones partly cancel.

    rng = np.random.default_rng(6)
    eps = 1.0
    num_strict = 0
    num_instances = 500

    for _ in range(num_instances):
        W = rng.standard_normal((15, 2))
        arriving = rng.random(10)
        degree = 3

        single = eps * self_direction(W)
        coordinated = []
        for _ in range(10):
            messages = [rng.standard_normal(15) for _ in range(degree)]
            coordinated.append(optimal_feature_perturbation(
                W, messages, [1 / degree] * degree, PerturbationWeights(), eps
            ))

        m_single = np.linalg.norm(arriving.sum() * single)
        m_proposed = np.linalg.norm(arriving @ np.array(coordinated))
        assert m_proposed <= m_single * (1 + 1e-10)
        num_strict += m_proposed < m_single - 1e-9

    assert num_strict >= 0.95 * num_instances


def test_projection_to_editable_values():

    x = np.zeros(12)
    dx = np.zeros(12)
    dx[:5] = [3.4, 0.9, 0.2, 0.7, 0.6]

    realized = project_to_editable(x, dx)
    np.testing.assert_array_equal(realized[:5], [3.0, 1.0, 0.0, 1.0, 1.0])
    np.testing.assert_array_equal(realized[5:], x[5:])
    np.testing.assert_array_equal(project_to_editable(x, np.zeros(12)), x)


def test_projection_keeps_non_editable_components():

    rng = np.random.default_rng(7)
    x = rng.random(12)
    dx = rng.standard_normal(12)

    realized = project_to_editable(x, dx, editable=(1, 2))
    np.testing.assert_array_equal(np.delete(realized, [1, 2]), np.delete(x, [1, 2]))
    assert set(realized[[1, 2]]) <= {0.0, 1.0}
