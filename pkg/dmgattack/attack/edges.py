# -*- coding: utf-8 -*-
#
# edges.py
#

"""
Greedy edge perturbation among the adversary's domains.

The objective is the surrogate's logistic loss of the malicious label,
summed over the adversary's domains with weight alpha for the node itself
plus beta times the neighbor weights it receives from adjacent adversary
domains. Each step applies the best-scoring realizable edit.
"""

import logging

from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from ..dmg.dnslog import DnsLogRecord
from ..dmg.names import UnrealizableEditError
from .objectives import PerturbationWeights, neighbor_weight
from .realize import LogEdit, advance_state, realize_edge_edit
from .state import (
    EDITABLE_EDGE_KINDS,
    AttackState,
    EdgeEdit,
    InvalidEdgeKindError,
    check_edit,
    propagated_margins,
)


logger = logging.getLogger(__name__)

DEFAULT_EDGE_BUDGET = 20

# Candidates tried per step before giving up on realizing one.
MAX_ATTEMPTS_PER_STEP = 25


class EdgeAttackResult(NamedTuple):

    state: AttackState
    edits: List[EdgeEdit]
    scores: List[float]
    log_edits: List[LogEdit]
    records: Optional[List[DnsLogRecord]]


def node_costs(state: AttackState, A: np.ndarray,
               weights: PerturbationWeights,
               neighbor_weight_mode: str = 'inv_degree') -> np.ndarray:
    """alpha + beta * (neighbor weight received from adjacent domains)."""

    num_domains = state.num_domains
    degrees = A.sum(axis=1)[:num_domains]
    num_neighbors = A[:num_domains, :num_domains].sum(axis=1)

    costs = np.full(num_domains, weights.alpha)
    for node in np.flatnonzero(num_neighbors):
        costs[node] += weights.beta * num_neighbors[node] * neighbor_weight(
            int(degrees[node]), neighbor_weight_mode
        )
    return costs


def edge_objective(state: AttackState, A: np.ndarray, W: np.ndarray,
                   costs: np.ndarray) -> float:
    """Weighted softplus(-margin) over the adversary's domains."""

    margins = propagated_margins(A, state.X, W)[:state.num_domains]
    return float(costs @ np.logaddexp(0.0, -margins))


def flipped_adjacency(state: AttackState, A: np.ndarray, apex: np.ndarray,
                      edit: EdgeEdit) -> np.ndarray:
    """Adjacency after an edit, updating only the rows it touches."""

    num_domains = state.num_domains
    a, b = edit.a, edit.b
    A = A.copy()

    if edit.op == 'resolve_swap':
        A[[a, b], num_domains:] = A[[b, a], num_domains:]
        A[num_domains:, [a, b]] = A[num_domains:, [b, a]]
        return A

    if edit.op == 'similar_add':
        A[a, b] = A[b, a] = 1.0
        return A

    if edit.op == 'apex_share':
        row = apex[b].copy()
        row[b] = True
    else:
        # similar_drop leaves the domain alone under a fresh apex.
        row = np.zeros(num_domains, dtype=bool)

    similar = state.similar[a].copy()
    if edit.op == 'similar_drop':
        similar[b] = False
    row = row | similar
    row[a] = False
    A[a, :num_domains] = row
    A[:num_domains, a] = row
    return A


def edit_for_flip(state: AttackState, u: int, v: int, kind: str) -> EdgeEdit:
    """The edit that flips an edge of `kind` between domains u and v."""

    if kind not in EDITABLE_EDGE_KINDS:
        raise InvalidEdgeKindError(
            f'Edge kind {kind!r} is not editable, choose from {EDITABLE_EDGE_KINDS}'
        )
    if kind == 'resolve':
        return EdgeEdit('resolve_swap', u, v)
    if kind == 'apex':
        return EdgeEdit('apex_share', u, v)
    if u != v and state.similar[u, v]:
        return EdgeEdit('similar_drop', u, v)
    return EdgeEdit('similar_add', u, v)


def score_edge_flip(state: AttackState,
                    pair: Tuple[int, int],
                    kind: str,
                    W: np.ndarray,
                    weights: PerturbationWeights = PerturbationWeights(),
                    neighbor_weight_mode: str = 'inv_degree') -> float:
    """Objective gain of flipping an edge of `kind` between a pair.

    Raises:
        InvalidEdgeKindError: The kind is not editable.
        ValueError: Self pair or an edit without effect.

    """
    edit = edit_for_flip(state, pair[0], pair[1], kind)
    return score_edit(state, edit, W, weights, neighbor_weight_mode)


def score_edit(state: AttackState, edit: EdgeEdit, W: np.ndarray,
               weights: PerturbationWeights = PerturbationWeights(),
               neighbor_weight_mode: str = 'inv_degree',
               A: np.ndarray = None, costs: np.ndarray = None,
               apex: np.ndarray = None, base: float = None) -> float:
    """Objective after the edit minus the current objective."""

    check_edit(state, edit)
    if A is None:
        A = state.adjacency()
    if costs is None:
        costs = node_costs(state, A, weights, neighbor_weight_mode)
    if apex is None:
        apex = state.apex_matrix()
    if base is None:
        base = edge_objective(state, A, W, costs)

    flipped = flipped_adjacency(state, A, apex, edit)
    return edge_objective(state, flipped, W, costs) - base


def candidate_edits(state: AttackState, kinds: Sequence[str]) -> List[EdgeEdit]:
    """Edits with an effect on the adversary's graph.

    apex_share candidates are deduplicated per target apex group, represented
    by its lowest member.
    """
    for kind in kinds:
        if kind not in EDITABLE_EDGE_KINDS:
            raise InvalidEdgeKindError(f'Edge kind {kind!r} is not editable')

    num_domains = state.num_domains
    candidates = []

    if 'resolve' in kinds:
        sizes = state.resolves.sum(axis=1)
        for a in range(num_domains):
            for b in range(a + 1, num_domains):
                if sizes[a] == sizes[b] and not np.array_equal(
                        state.resolves[a], state.resolves[b]):
                    candidates.append(EdgeEdit('resolve_swap', a, b))

    if 'apex' in kinds:
        representatives = {}
        for node, label in enumerate(state.apexes):
            representatives.setdefault(label, node)
        for a in range(num_domains):
            for label, b in sorted(representatives.items(), key=lambda item: item[1]):
                if label != state.apexes[a]:
                    candidates.append(EdgeEdit('apex_share', a, b))

    if 'similar' in kinds:
        for a in range(num_domains):
            for b in range(num_domains):
                if a == b:
                    continue
                op = 'similar_drop' if state.similar[a, b] else 'similar_add'
                candidates.append(EdgeEdit(op, a, b))

    return candidates


def minta_edges(state: AttackState,
                W: np.ndarray,
                k_e: int = DEFAULT_EDGE_BUDGET,
                kinds: Sequence[str] = EDITABLE_EDGE_KINDS,
                weights: PerturbationWeights = PerturbationWeights(),
                records: Sequence[DnsLogRecord] = None,
                seed: int = 0,
                neighbor_weight_mode: str = 'inv_degree',
                exhaust_budget: bool = False) -> EdgeAttackResult:
    """Greedy edge edits within the edge budget.

    Args:
        state: The adversary's working graph.
        W: Surrogate weights.
        k_e: Maximum number of edits.
        kinds: Editable edge kinds.
        weights: Self and neighbor weights.
        records: The log to realize edits in. Without a log the plan is
            structural and every candidate counts as realizable.
        seed: Seed of the renames.
        neighbor_weight_mode: `inv_degree` or `degree`.
        exhaust_budget: Keep flipping when no edit improves the objective.

    Returns:
        The final state, the applied edits with their scores, their log
        edits and the mutated log.

    """
    if k_e < 0:
        raise ValueError(f'k_e must be >= 0, got {k_e}')

    edits, scores, log_edits = [], [], []
    if records is not None:
        records = list(records)

    for step in range(k_e):
        A = state.adjacency()
        apex = state.apex_matrix()
        costs = node_costs(state, A, weights, neighbor_weight_mode)
        base = edge_objective(state, A, W, costs)

        scored = [
            (score_edit(state, edit, W, A=A, costs=costs, apex=apex, base=base), edit)
            for edit in candidate_edits(state, kinds)
        ]
        scored.sort(key=lambda item: (-item[0], item[1].a, item[1].b, item[1].op))

        chosen = None
        for score, edit in scored[:MAX_ATTEMPTS_PER_STEP]:
            if score <= 0 and not exhaust_budget:
                break
            if records is None:
                chosen = (score, edit, LogEdit())
                break
            try:
                new_records, log_edit = realize_edge_edit(
                    edit, records, state, seed=seed + step
                )
            except UnrealizableEditError as error:
                logger.debug('Skipping unrealizable %s: %s', edit, error)
                continue
            records = new_records
            chosen = (score, edit, log_edit)
            break

        if chosen is None:
            logger.info('No improving realizable edge edit after %d edits', step)
            break

        score, edit, log_edit = chosen
        state = advance_state(state, log_edit, edit)
        edits.append(edit)
        scores.append(score)
        log_edits.append(log_edit)
        logger.debug('Edge edit %d: %s (gain %.4g)', step + 1, edit, score)

    logger.info('Applied %d of %d edge edits', len(edits), k_e)
    return EdgeAttackResult(state, edits, scores, log_edits, records)
