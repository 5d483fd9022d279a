# -*- coding: utf-8 -*-
#
# eigen.py
#

"""
Power iteration for the dominant eigenpair of a symmetric positive
semidefinite matrix.
"""

import logging

from typing import Tuple

import numpy as np


logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-9

DEFAULT_MAX_ITER = 10000

# The iteration applies M^(2^squarings) per step, the residual is always
# measured against M itself.
DEFAULT_SQUARINGS = 3


class EigenConvergenceError(RuntimeError):
    """Power iteration did not reach the residual tolerance."""

    def __init__(self, residual: float, num_iter: int):

        super().__init__(
            f'Power iteration stopped after {num_iter} iterations with '
            f'residual {residual:.3e}; the top eigenvalues may be near '
            'degenerate'
        )
        self.residual = residual
        self.num_iter = num_iter


def canonical_sign(vector: np.ndarray) -> np.ndarray:
    """Flip the sign so the largest-magnitude component is positive."""

    if vector[np.argmax(np.abs(vector))] < 0:
        return -vector
    return vector


def _check_symmetric(M: np.ndarray) -> np.ndarray:

    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f'Expected a square matrix, got shape {M.shape}')
    if not np.all(np.isfinite(M)):
        raise ValueError('Matrix contains non-finite values')

    scale = max(np.max(np.abs(M)), 1.0) if M.size else 1.0
    if not np.allclose(M, M.T, rtol=0, atol=1e-10 * scale):
        raise ValueError('Matrix is not symmetric')
    return 0.5 * (M + M.T)


def principal_eigenvector(M: np.ndarray,
                          tol: float = DEFAULT_TOL,
                          max_iter: int = DEFAULT_MAX_ITER,
                          seed: int = 0,
                          squarings: int = DEFAULT_SQUARINGS
                          ) -> Tuple[np.ndarray, float]:
    """Dominant eigenpair by power iteration from a seeded random start.

    Args:
        M: Symmetric positive semidefinite matrix.
        tol: Relative residual tolerance, ||M e - lambda e|| <= tol * lambda.
        max_iter: Maximum number of iterations.
        seed: Seed of the start vector.
        squarings: Number of repeated squarings of M forming the iteration
            operator.

    Returns:
        (tuple): Unit eigenvector with its largest-magnitude component
            positive, and the eigenvalue.

    Raises:
        EigenConvergenceError: The residual tolerance was not reached.

    """
    M = _check_symmetric(M)
    size = M.shape[0]
    if size == 0:
        raise ValueError('Empty matrix')

    if not np.any(M):
        unit = np.zeros(size)
        unit[0] = 1.0
        return unit, 0.0

    operator = M / np.max(np.abs(M))
    for _ in range(squarings):
        operator = operator @ operator
        operator = operator / max(np.max(np.abs(operator)), np.finfo(float).tiny)

    rng = np.random.default_rng(seed)
    vector = rng.standard_normal(size)
    vector /= np.linalg.norm(vector)

    residual = np.inf
    for num_iter in range(1, max_iter + 1):
        image = operator @ vector
        norm = np.linalg.norm(image)
        if norm == 0:
            # Start vector in the null space of the squared operator.
            vector = rng.standard_normal(size)
            vector /= np.linalg.norm(vector)
            continue
        vector = image / norm

        eigenvalue = float(vector @ M @ vector)
        residual = float(np.linalg.norm(M @ vector - eigenvalue * vector))
        if residual <= tol * eigenvalue:
            logger.debug(
                'Power iteration converged after %d iterations (lambda %.6g)',
                num_iter, eigenvalue,
            )
            return canonical_sign(vector), eigenvalue

    raise EigenConvergenceError(residual, max_iter)
