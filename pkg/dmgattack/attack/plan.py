# -*- coding: utf-8 -*-
#
# plan.py
#

"""
Crafting an attack end to end: feature and edge optimization on the
adversary's working graph, the log edits that realize them, and the
closed-loop check that a rebuild of the mutated log shows what was planned.
"""

import json
import logging

from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from ..dmg.dnslog import DnsLogRecord
from ..dmg.features import DEFAULT_CONFIG, EDITABLE_INDICES, FeatureConfig
from ..dmg.graph import DEFAULT_SIMILARITY_THRESHOLD, build_dmg
from ..synth.adversary import AdversarySubgraph, subgraph_from_names
from .edges import DEFAULT_EDGE_BUDGET, minta_edges
from .features import FeatureBudget, FeatureEdit, minta_features
from .objectives import PerturbationWeights
from .realize import LogEdit, apply_log_edit
from .state import EDITABLE_EDGE_KINDS, EdgeEdit, state_from_subgraph


logger = logging.getLogger(__name__)

ATTACK_MODES = ('features', 'edges', 'joint')

PLAN_VERSION = 1


@dataclass
class AttackPlan:
    """Everything an attack decided and how the log implements it.

    Attributes:
        node_ids: Global ids of the adversary's domains before the attack.
        original_names: Their names before the attack.
        ip_names: Owned addresses.
        mode: One of `features`, `edges` or `joint`.
        feature_edits: Per-node raw and realized perturbations.
        edge_edits: Applied edge edits in order, local domain indices.
        edge_scores: Objective gain of each edge edit when it was chosen.
        log_edits: Renames and address moves, applied in order.
        feature_spent: Realized L2 norm charged against k_f.
        planned_names: Domain names after the attack.
        planned_features: Feature rows of the renamed domains.
        planned_edges: Named edges among owned domains and addresses.

    """

    node_ids: Tuple[int, ...]
    original_names: Tuple[str, ...]
    ip_names: Tuple[str, ...]
    mode: str
    weights: PerturbationWeights
    budget: FeatureBudget
    k_e: int
    seed: int
    neighbor_weight_mode: str = 'inv_degree'
    similarity_threshold: float = DEFAULT_SIMILARITY_THRESHOLD
    ngram_n: int = 2
    feature_edits: List[FeatureEdit] = field(default_factory=list)
    edge_edits: List[EdgeEdit] = field(default_factory=list)
    edge_scores: List[float] = field(default_factory=list)
    log_edits: List[LogEdit] = field(default_factory=list)
    feature_spent: float = 0.0
    planned_names: Tuple[str, ...] = ()
    planned_features: np.ndarray = None
    planned_edges: List[Tuple[str, str, str]] = field(default_factory=list)

    @property
    def edges_used(self) -> int:
        return len(self.edge_edits)

    @property
    def attacked_mask(self) -> np.ndarray:
        """Per domain, whether it was renamed or had its addresses swapped."""

        mask = np.array([
            old != new for old, new in zip(self.original_names, self.planned_names)
        ], dtype=bool)
        for edit in self.edge_edits:
            if edit.op == 'resolve_swap':
                mask[[edit.a, edit.b]] = True
        return mask

    @property
    def attacked_nodes(self) -> List[int]:
        """Global ids of the attacked domains."""

        return [
            node for node, attacked in zip(self.node_ids, self.attacked_mask)
            if attacked
        ]

    def mutated_records(self, records: Sequence[DnsLogRecord]
                        ) -> List[DnsLogRecord]:

        mutated = list(records)
        for log_edit in self.log_edits:
            mutated = apply_log_edit(mutated, log_edit)
        return mutated

    def to_json(self) -> str:

        document = {
            'version': PLAN_VERSION,
            'node_ids': list(self.node_ids),
            'original_names': list(self.original_names),
            'ip_names': list(self.ip_names),
            'mode': self.mode,
            'alpha': self.weights.alpha,
            'beta': self.weights.beta,
            'k_f': self.budget.k_f,
            'per_node_eps': self.budget.per_node_eps,
            'k_e': self.k_e,
            'seed': self.seed,
            'neighbor_weight_mode': self.neighbor_weight_mode,
            'similarity_threshold': self.similarity_threshold,
            'ngram_n': self.ngram_n,
            'feature_edits': [edit._asdict() for edit in self.feature_edits],
            'edge_edits': [
                {'op': edit.op, 'a': edit.a, 'b': edit.b,
                 'original_names': [
                     self.original_names[edit.a], self.original_names[edit.b]
                 ],
                 'score': score}
                for edit, score in zip(self.edge_edits, self.edge_scores)
            ],
            'log_edits': [log_edit.to_dict() for log_edit in self.log_edits],
            'feature_spent': self.feature_spent,
            'edges_used': self.edges_used,
            'planned_names': list(self.planned_names),
            'planned_features': (
                [] if self.planned_features is None
                else self.planned_features.tolist()
            ),
            'planned_edges': [list(edge) for edge in self.planned_edges],
        }
        return json.dumps(document, sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text: str) -> 'AttackPlan':

        document = json.loads(text)
        if document.get('version') != PLAN_VERSION:
            raise ValueError(
                f'Unsupported plan version {document.get("version")!r}'
            )

        feature_edits = []
        for item in document['feature_edits']:
            for key in ('raw_delta', 'target', 'realized'):
                item[key] = tuple(item[key])
            feature_edits.append(FeatureEdit(**item))

        return cls(
            node_ids=tuple(document['node_ids']),
            original_names=tuple(document['original_names']),
            ip_names=tuple(document['ip_names']),
            mode=document['mode'],
            weights=PerturbationWeights(document['alpha'], document['beta']),
            budget=FeatureBudget(document['k_f'], document['per_node_eps']),
            k_e=document['k_e'],
            seed=document['seed'],
            neighbor_weight_mode=document['neighbor_weight_mode'],
            similarity_threshold=document['similarity_threshold'],
            ngram_n=document['ngram_n'],
            feature_edits=feature_edits,
            edge_edits=[
                EdgeEdit(item['op'], item['a'], item['b'])
                for item in document['edge_edits']
            ],
            edge_scores=[item['score'] for item in document['edge_edits']],
            log_edits=[LogEdit.from_dict(item) for item in document['log_edits']],
            feature_spent=document['feature_spent'],
            planned_names=tuple(document['planned_names']),
            planned_features=np.array(document['planned_features'], dtype=float),
            planned_edges=[tuple(edge) for edge in document['planned_edges']],
        )


def craft_attack(subgraph: AdversarySubgraph,
                 records: Sequence[DnsLogRecord],
                 W: np.ndarray,
                 mode: str = 'joint',
                 weights: PerturbationWeights = PerturbationWeights(),
                 budget: FeatureBudget = None,
                 k_e: int = DEFAULT_EDGE_BUDGET,
                 kinds: Sequence[str] = EDITABLE_EDGE_KINDS,
                 editable: Sequence[int] = EDITABLE_INDICES,
                 seed: int = 0,
                 neighbor_weight_mode: str = 'inv_degree',
                 max_nodes: int = None,
                 exhaust_budget: bool = False,
                 feature_config: FeatureConfig = DEFAULT_CONFIG,
                 similarity_threshold: float = DEFAULT_SIMILARITY_THRESHOLD,
                 ngram_n: int = 2) -> Tuple[AttackPlan, List[DnsLogRecord]]:
    """Plan and realize an attack on the adversary's subgraph.

    Feature perturbation runs first in joint mode, then the greedy edge
    search on the renamed domains.

    Args:
        subgraph: The adversary's subgraph.
        records: The log the defender will ingest.
        W: Surrogate weights.
        mode: `features`, `edges` or `joint`.
        weights: Self and neighbor weights.
        budget: Feature budget, 5.38 per node by default.
        k_e: Edge budget.
        kinds: Editable edge kinds.
        editable: Editable feature indices.
        seed: Seed of the whole attack.
        neighbor_weight_mode: `inv_degree` or `degree`.
        max_nodes: Truncate the feature attack after this many nodes.
        exhaust_budget: Run all k_e edge steps.

    Returns:
        The plan and the mutated log.

    """
    if mode not in ATTACK_MODES:
        raise ValueError(f'Attack mode must be one of {ATTACK_MODES}, got {mode!r}')
    if budget is None:
        budget = FeatureBudget.per_node(subgraph.size)

    state = state_from_subgraph(
        subgraph, feature_config, similarity_threshold, ngram_n
    )
    records = list(records)
    plan = AttackPlan(
        node_ids=state.node_ids,
        original_names=state.names,
        ip_names=state.ip_names,
        mode=mode,
        weights=weights,
        budget=budget,
        k_e=k_e if mode != 'features' else 0,
        seed=seed,
        neighbor_weight_mode=neighbor_weight_mode,
        similarity_threshold=similarity_threshold,
        ngram_n=ngram_n,
    )

    if mode in ('features', 'joint'):
        result = minta_features(
            state, W, budget, weights, editable=editable, seed=seed,
            neighbor_weight_mode=neighbor_weight_mode, max_nodes=max_nodes,
            taken=frozenset(record.qname for record in records),
        )
        renames = tuple(
            (edit.old_name, edit.new_name) for edit in result.edits
            if edit.old_name != edit.new_name
        )
        if renames:
            log_edit = LogEdit(renames=renames)
            plan.log_edits.append(log_edit)
            records = apply_log_edit(records, log_edit)
        plan.feature_edits = result.edits
        plan.feature_spent = result.spent
        state = result.state

    if mode in ('edges', 'joint') and k_e > 0:
        result = minta_edges(
            state, W, k_e=k_e, kinds=kinds, weights=weights, records=records,
            seed=seed, neighbor_weight_mode=neighbor_weight_mode,
            exhaust_budget=exhaust_budget,
        )
        plan.edge_edits = result.edits
        plan.edge_scores = result.scores
        plan.log_edits.extend(
            log_edit for log_edit in result.log_edits if not log_edit.is_empty
        )
        records = result.records
        state = result.state

    plan.planned_names = state.names
    plan.planned_features = state.domain_features()
    plan.planned_edges = state.named_edges()

    logger.info(
        'Crafted %s attack: %d renamed domains, %d edge edits, L2 spent %.3f',
        mode, len(plan.attacked_nodes), plan.edges_used, plan.feature_spent,
    )
    return plan, records


def verify_closed_loop(plan: AttackPlan,
                       mutated_records: Sequence[DnsLogRecord],
                       feature_config: FeatureConfig = DEFAULT_CONFIG
                       ) -> List[str]:
    """Differences between the plan and a rebuild of the mutated log.

    Returns:
        One message per mismatch, empty when the rebuild shows exactly the
        planned features and edges of the adversary's nodes.

    """
    dmg = build_dmg(
        mutated_records, similarity_threshold=plan.similarity_threshold,
        n=plan.ngram_n, feature_config=feature_config,
    )

    missing = [
        name for name in plan.planned_names if ('domain', name) not in dmg.index
    ]
    if missing:
        return [f'planned domain {name!r} is not in the mutated log' for name in missing]

    subgraph = subgraph_from_names(dmg, plan.planned_names)
    mismatches = []

    rebuilt_ips = set(subgraph.ip_names)
    if rebuilt_ips != set(plan.ip_names):
        mismatches.append(
            f'owned addresses {sorted(rebuilt_ips)} != planned {sorted(plan.ip_names)}'
        )

    rows = {name: row for name, row in zip(subgraph.names, subgraph.estimated_features)}
    for name, planned in zip(plan.planned_names, plan.planned_features):
        if not np.array_equal(rows[name], planned):
            mismatches.append(
                f'features of {name!r}: rebuilt {rows[name].tolist()} != '
                f'planned {planned.tolist()}'
            )

    rebuilt_edges = set()
    for u, v, kind in subgraph.known_edges:
        name_u, name_v = dmg.name_of(u), dmg.name_of(v)
        rebuilt_edges.add((min(name_u, name_v), max(name_u, name_v), kind))
    planned_edges = set(plan.planned_edges)
    for edge in sorted(rebuilt_edges - planned_edges):
        mismatches.append(f'unplanned edge {edge}')
    for edge in sorted(planned_edges - rebuilt_edges):
        mismatches.append(f'planned edge {edge} is missing')

    if mismatches:
        logger.warning('Closed-loop check found %d mismatches', len(mismatches))
    return mismatches
