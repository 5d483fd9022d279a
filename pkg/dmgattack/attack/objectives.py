# -*- coding: utf-8 -*-
#
# objectives.py
#

"""
Loss changes of the linearized surrogate and the closed-form weighted
perturbation of one adversary node.

With logits = B X W, a perturbation dx placed in row i changes the logits
by B[:, i] (dx W). The self objective ||W^T dx||^2 and the neighbor
objective ||Phi_j^T dx||^2 with Phi_j = W - H_j 1^T are maximized over
||dx|| = eps by the principal eigenvectors of W W^T and Phi_j Phi_j^T.
"""

import logging

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from ..dmg.graph import HomogeneousProjection
from .eigen import DEFAULT_MAX_ITER, DEFAULT_TOL, principal_eigenvector


logger = logging.getLogger(__name__)

NEIGHBOR_WEIGHT_MODES = ('inv_degree', 'degree')


@dataclass(frozen=True)
class PerturbationWeights:
    """Weights of the node's own loss (alpha) and its neighbors' (beta)."""

    alpha: float = 0.5
    beta: float = 0.5

    def __post_init__(self):

        if self.alpha < 0 or self.beta < 0:
            raise ValueError(
                f'alpha and beta must be >= 0, got {self.alpha}, {self.beta}'
            )
        if not np.isclose(self.alpha + self.beta, 1.0, rtol=0, atol=1e-12):
            raise ValueError(
                f'alpha + beta must equal 1, got {self.alpha + self.beta}'
            )

    @classmethod
    def from_beta(cls, beta: float) -> 'PerturbationWeights':
        return cls(alpha=1.0 - beta, beta=beta)

    @property
    def self_only(self) -> bool:
        return self.beta == 0


def _check_dx(dx: np.ndarray, W: np.ndarray) -> np.ndarray:

    dx = np.asarray(dx, dtype=float).ravel()
    if W.ndim != 2 or dx.shape[0] != W.shape[0]:
        raise ValueError(
            f'Perturbation of length {dx.shape[0]} does not match W of shape '
            f'{W.shape}'
        )
    return dx


def _column_sq_norm(projection: HomogeneousProjection, node: int) -> float:

    if not 0 <= node < projection.num_nodes:
        raise ValueError(f'Node {node} out of range')
    column = projection.B[:, node]
    return float(column.multiply(column).sum())


def delta_loss_self(projection: HomogeneousProjection, dx: np.ndarray,
                    W: np.ndarray, i: int) -> float:
    """||B dX W||^2 with dx in row i of dX and zeros elsewhere."""

    W = np.asarray(W, dtype=float)
    dx = _check_dx(dx, W)
    return _column_sq_norm(projection, i) * float(np.sum((dx @ W) ** 2))


def delta_loss_neighbor(projection: HomogeneousProjection, dx: np.ndarray,
                        message: np.ndarray, W: np.ndarray, j: int) -> float:
    """||B dX W||^2 with dx + H_j placed in row j."""

    W = np.asarray(W, dtype=float)
    dx = _check_dx(dx, W)
    message = _check_dx(message, W)
    return _column_sq_norm(projection, j) * float(np.sum(((dx + message) @ W) ** 2))


def neighbor_phi(W: np.ndarray, message: np.ndarray) -> np.ndarray:
    """Phi_j = W - H_j 1^T, the message subtracted from every column."""

    W = np.asarray(W, dtype=float)
    return W - _check_dx(message, W)[:, np.newaxis]


def self_objective(dx: np.ndarray, W: np.ndarray) -> float:

    W = np.asarray(W, dtype=float)
    return float(np.sum((_check_dx(dx, W) @ W) ** 2))


def neighbor_objective(dx: np.ndarray, W: np.ndarray, message: np.ndarray
                       ) -> float:

    phi = neighbor_phi(W, message)
    return float(np.sum((_check_dx(dx, phi) @ phi) ** 2))


def neighbor_weight(degree: int, mode: str = 'inv_degree') -> float:

    if mode not in NEIGHBOR_WEIGHT_MODES:
        raise ValueError(
            f'Neighbor weight mode must be one of {NEIGHBOR_WEIGHT_MODES}, '
            f'got {mode!r}'
        )
    if degree < 1:
        raise ValueError(f'Neighbor degree must be >= 1, got {degree}')
    return 1.0 / degree if mode == 'inv_degree' else float(degree)


def weighted_objective(dx: np.ndarray, W: np.ndarray,
                       messages: Sequence[np.ndarray],
                       neighbor_weights: Sequence[float],
                       weights: PerturbationWeights) -> float:
    """alpha * F1 + beta * sum_j w_j * F2_j."""

    value = weights.alpha * self_objective(dx, W)
    for message, weight in zip(messages, neighbor_weights):
        value += weights.beta * weight * neighbor_objective(dx, W, message)
    return value


def orient_direction(direction: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Sign the direction so it does not raise the malicious margin."""

    W = np.asarray(W, dtype=float)
    if direction @ (W[:, 1] - W[:, 0]) > 0:
        return -direction
    return direction


def self_direction(W: np.ndarray, tol: float = DEFAULT_TOL,
                   max_iter: int = DEFAULT_MAX_ITER, seed: int = 0
                   ) -> np.ndarray:

    W = np.asarray(W, dtype=float)
    direction, _ = principal_eigenvector(W @ W.T, tol, max_iter, seed)
    return orient_direction(direction, W)


def neighbor_direction(W: np.ndarray, message: np.ndarray,
                       tol: float = DEFAULT_TOL,
                       max_iter: int = DEFAULT_MAX_ITER, seed: int = 0
                       ) -> np.ndarray:

    phi = neighbor_phi(W, message)
    direction, _ = principal_eigenvector(phi @ phi.T, tol, max_iter, seed)
    return orient_direction(direction, W)


def combine_directions(self_dir: np.ndarray,
                       neighbor_dirs: Sequence[np.ndarray],
                       neighbor_weights: Sequence[float],
                       weights: PerturbationWeights) -> np.ndarray:
    """alpha e_i + beta sum_j w_j e_j, before rescaling."""

    combined = weights.alpha * np.asarray(self_dir, dtype=float)
    if weights.beta > 0:
        for direction, weight in zip(neighbor_dirs, neighbor_weights):
            combined = combined + weights.beta * weight * np.asarray(direction)
    return combined


def optimal_feature_perturbation(W: np.ndarray,
                                 messages: Sequence[np.ndarray],
                                 neighbor_weights: Sequence[float],
                                 weights: PerturbationWeights,
                                 eps: float,
                                 tol: float = DEFAULT_TOL,
                                 max_iter: int = DEFAULT_MAX_ITER,
                                 seed: int = 0) -> np.ndarray:
    """Weighted combination of the self and neighbor eigen-directions.

    Args:
        W: Surrogate weights (k' x C).
        messages: Pre-weight messages H_j of the node's adversary neighbors.
        neighbor_weights: Weight w_j of each neighbor.
        weights: alpha and beta.
        eps: L2 norm of the returned perturbation.

    Returns:
        Perturbation of norm eps. A vanishing combination falls back to the
        self direction.

    """
    if eps <= 0:
        raise ValueError(f'eps must be > 0, got {eps}')
    if len(messages) != len(neighbor_weights):
        raise ValueError(
            f'{len(messages)} messages but {len(neighbor_weights)} weights'
        )

    self_dir = self_direction(W, tol, max_iter, seed)
    neighbor_dirs: List[np.ndarray] = []
    if weights.beta > 0:
        neighbor_dirs = [
            neighbor_direction(W, message, tol, max_iter, seed)
            for message in messages
        ]

    combined = combine_directions(self_dir, neighbor_dirs, neighbor_weights, weights)
    norm = np.linalg.norm(combined)
    if norm <= 1e-12:
        logger.debug('Neighbor directions cancel, using the self direction')
        combined, norm = self_dir, np.linalg.norm(self_dir)

    return eps * combined / norm
