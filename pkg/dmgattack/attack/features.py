# -*- coding: utf-8 -*-
#
# features.py
#

"""
Sequential feature perturbation of the adversary's domains.

Nodes are visited from the most to the least malicious by surrogate margin.
Each node receives the weighted eigen-direction computed against the current
(already perturbed) graph, projected onto the editable features, realized as
a rename and charged with the L2 norm of its realized editable feature
change.
"""

import logging

from dataclasses import dataclass
from typing import Dict, FrozenSet, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from ..dmg.features import EDITABLE_INDICES, MAX_LENGTH_LEVEL, EditableTarget
from ..dmg.names import UnrealizableEditError
from .objectives import (
    PerturbationWeights,
    neighbor_weight,
    optimal_feature_perturbation,
)
from .realize import relation_constraints, realize_name_edit
from .state import AttackState


logger = logging.getLogger(__name__)

# L2 norm of a full swing of the editable features of one node, sqrt(5^2 + 4).
DEFAULT_NODE_EPS = 5.38


class FeatureRange(NamedTuple):
    """Domain of an editable component: binary or an integer grid."""

    kind: str
    low: float = 0.0
    high: float = 1.0


DEFAULT_RANGES: Dict[int, FeatureRange] = {
    0: FeatureRange('grid', 1.0, float(MAX_LENGTH_LEVEL)),
    1: FeatureRange('binary'),
    2: FeatureRange('binary'),
    3: FeatureRange('binary'),
    4: FeatureRange('binary'),
}


@dataclass(frozen=True)
class FeatureBudget:
    """Total L2 budget k_f and the norm of each node's raw perturbation."""

    k_f: float
    per_node_eps: float = DEFAULT_NODE_EPS

    def __post_init__(self):

        if self.k_f < 0:
            raise ValueError(f'k_f must be >= 0, got {self.k_f}')
        if self.per_node_eps <= 0:
            raise ValueError(f'per_node_eps must be > 0, got {self.per_node_eps}')

    @classmethod
    def per_node(cls, num_nodes: int, per_node_eps: float = DEFAULT_NODE_EPS
                 ) -> 'FeatureBudget':
        return cls(k_f=per_node_eps * num_nodes, per_node_eps=per_node_eps)


class FeatureEdit(NamedTuple):
    """Outcome of one node's feature perturbation."""

    node_id: int
    old_name: str
    new_name: str
    raw_delta: Tuple[float, ...]
    target: Tuple[float, ...]
    realized: Tuple[float, ...]
    delta_norm: float


class FeatureAttackResult(NamedTuple):

    state: AttackState
    edits: List[FeatureEdit]
    spent: float
    attacked: int


def project_to_editable(x: np.ndarray, dx: np.ndarray,
                        editable: Sequence[int] = EDITABLE_INDICES,
                        ranges: Dict[int, FeatureRange] = None) -> np.ndarray:
    """Closest in-range editable values to x + dx, other components kept.

    Binary components are clamped to [0, 1] and thresholded at 0.5. Grid
    components take the nearest of the grid points and the current value,
    ties going to the lower value.
    """
    if ranges is None:
        ranges = DEFAULT_RANGES

    x = np.asarray(x, dtype=float)
    dx = np.asarray(dx, dtype=float)
    if x.shape != dx.shape:
        raise ValueError(f'x of shape {x.shape} and dx of shape {dx.shape}')

    wanted = x + dx
    realized = np.array(x)
    for index in editable:
        value_range = ranges[index]
        if value_range.kind == 'binary':
            realized[index] = float(np.clip(wanted[index], 0.0, 1.0) >= 0.5)
            continue

        grid = np.arange(value_range.low, value_range.high + 1.0)
        candidates = np.unique(np.append(grid, x[index]))
        distances = np.abs(candidates - wanted[index])
        # np.unique sorts, so argmin breaks ties towards the lower value.
        realized[index] = candidates[np.argmin(distances)]
    return realized


def propagate(A: np.ndarray, X: np.ndarray) -> np.ndarray:
    """B X with B the squared normalized adjacency of dense A."""

    scaling = (1.0 / np.sqrt(A.sum(axis=1) + 1.0))[:, np.newaxis]
    values = np.asarray(X, dtype=float)
    for _ in range(2):
        scaled = scaling * values
        values = scaling * (A @ scaled + scaled)
    return values


def _realize(state: AttackState, node: int, target: EditableTarget,
             taken: FrozenSet[str], seed: int) -> Optional[str]:

    constraints = relation_constraints(state, node, state, taken)
    name = state.names[node]
    try:
        return realize_name_edit(
            name, target, seed=seed, config=state.feature_config,
            constraints=constraints,
        )
    except UnrealizableEditError as error:
        logger.debug('Cannot realize %s for %s: %s', tuple(target), name, error)

    current_length = state.X[node, 0]
    if target.length == current_length:
        return None
    try:
        return realize_name_edit(
            name, target._replace(length=float(current_length)), seed=seed,
            config=state.feature_config, constraints=constraints,
        )
    except UnrealizableEditError as error:
        logger.debug('Cannot realize %s at the current length: %s', name, error)
    return None


def minta_features(state: AttackState,
                   W: np.ndarray,
                   budget: FeatureBudget,
                   weights: PerturbationWeights = PerturbationWeights(),
                   editable: Sequence[int] = EDITABLE_INDICES,
                   seed: int = 0,
                   neighbor_weight_mode: str = 'inv_degree',
                   max_nodes: int = None,
                   taken: FrozenSet[str] = frozenset()) -> FeatureAttackResult:
    """Perturb the features of the adversary's domains within budget.

    Args:
        state: The adversary's working graph.
        W: Surrogate weights.
        budget: Feature budget.
        weights: Self and neighbor weights.
        editable: Indices of the editable features.
        seed: Seed of the eigen solver starts and the name synthesis.
        neighbor_weight_mode: `inv_degree` or `degree`.
        max_nodes: Stop after attacking this many nodes.
        taken: Registered names a rename must avoid.

    Returns:
        The perturbed state, the per-node edits, the L2 norm spent and the
        number of nodes attacked.

    """
    if state.num_domains == 0:
        raise ValueError('The adversary subgraph is empty')

    spent_sq = 0.0
    edits: List[FeatureEdit] = []
    if budget.k_f == 0 or max_nodes == 0:
        return FeatureAttackResult(state, edits, 0.0, 0)

    margins = state.margins(W)
    order = np.argsort(-margins, kind='stable')
    taken = frozenset(taken) | frozenset(state.names)
    limit = budget.k_f ** 2

    attacked = 0
    for node in order.tolist():
        if max_nodes is not None and attacked >= max_nodes:
            break

        A = state.adjacency()
        degrees = A.sum(axis=1)
        messages = propagate(A, state.X)
        neighbors = np.flatnonzero(A[node, :state.num_domains]).tolist()

        dx = optimal_feature_perturbation(
            W,
            [messages[j] for j in neighbors],
            [neighbor_weight(int(degrees[j]), neighbor_weight_mode) for j in neighbors],
            weights,
            budget.per_node_eps,
            seed=seed,
        )
        projected = project_to_editable(state.X[node], dx, editable)
        target = EditableTarget.from_vector(projected[list(EDITABLE_INDICES)])

        new_name = _realize(state, node, target, taken, seed + node)
        attacked += 1
        if new_name is None:
            logger.warning(
                'Skipping %s: no realizable name for %s',
                state.names[node], tuple(target),
            )
            continue

        new_state = state.with_name(node, new_name)
        delta = (new_state.X[node] - state.X[node])[list(EDITABLE_INDICES)]
        norm_sq = float(delta @ delta)
        if spent_sq + norm_sq > limit:
            logger.info(
                'Feature budget %.3f exhausted after %d nodes', budget.k_f,
                len(edits),
            )
            attacked -= 1
            break

        spent_sq += norm_sq
        edits.append(FeatureEdit(
            node_id=state.node_ids[node],
            old_name=state.names[node],
            new_name=new_name,
            raw_delta=tuple(float(value) for value in dx),
            target=tuple(float(value) for value in target),
            realized=tuple(float(value) for value in new_state.domain_features()[node]),
            delta_norm=float(np.sqrt(norm_sq)),
        ))
        if new_name != state.names[node]:
            taken = taken | {new_name}
        logger.debug(
            'Node %d: %s -> %s (|delta| %.3f)', state.node_ids[node],
            state.names[node], new_name, np.sqrt(norm_sq),
        )
        state = new_state

    logger.info(
        'Perturbed features of %d of %d adversary domains, L2 spent %.3f of %.3f',
        sum(edit.old_name != edit.new_name for edit in edits), state.num_domains,
        np.sqrt(spent_sq), budget.k_f,
    )
    return FeatureAttackResult(state, edits, float(np.sqrt(spent_sq)), attacked)
