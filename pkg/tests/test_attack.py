# -*- coding: utf-8 -*-
#
# test_attack.py
#

import numpy as np
import pytest

from dmgattack.attack.edges import (
    candidate_edits,
    edge_objective,
    minta_edges,
    node_costs,
    score_edge_flip,
    score_edit,
)
from dmgattack.attack.features import FeatureBudget, minta_features
from dmgattack.attack.objectives import PerturbationWeights
from dmgattack.attack.plan import AttackPlan, craft_attack, verify_closed_loop
from dmgattack.attack.realize import (
    LogEdit,
    advance_state,
    apply_log_edit,
    realize_edge_edit,
    realize_name_edit,
)
from dmgattack.attack.state import EdgeEdit, InvalidEdgeKindError, state_from_subgraph
from dmgattack.dmg.features import (
    EditableTarget,
    apex_of,
    editable_target,
    ngram_similarity,
)
from dmgattack.dmg.graph import build_dmg
from dmgattack.dmg.names import UnrealizableEditError
from dmgattack.synth.adversary import sample_adversary, subgraph_from_names

from conftest import I1, I2, V1, V2, V3, edge_set


@pytest.fixture(scope='module')
def W():
    return np.random.default_rng(11).standard_normal((15, 2))


@pytest.fixture(scope='module')
def adversary(small_dmg, small_log):

    _, labels = small_log
    return sample_adversary(small_dmg, labels, 10, seed=1)


@pytest.fixture
def state(adversary):
    return state_from_subgraph(adversary)


def test_rename_flips_the_bits():

    target = EditableTarget(2.5, 0, 0, 1, 1)
    name = realize_name_edit(V1, target, seed=3)
    assert apex_of(name) == 'rwth-aachen.de'
    assert editable_target(name) == target


def test_unchanged_target_keeps_the_name():
    assert realize_name_edit(V2, editable_target(V2)) == V2


@pytest.mark.parametrize('seed', range(10))
def test_random_realizable_targets(seed):

    rng = np.random.default_rng(seed)
    has_www, single, digits = (int(bit) for bit in rng.integers(2, size=3))
    if rng.random() < 0.5 and not (has_www and single):
        # Repeated labels need the open-ended length to fit their period.
        target = EditableTarget(5.0, has_www, single, 1, digits * (1 - has_www))
    else:
        target = EditableTarget(float(rng.integers(3, 5)), has_www, single, 0, digits)
    name = realize_name_edit('mail.example.com', target, seed=seed)
    assert editable_target(name) == target


def test_unreachable_target():

    with pytest.raises(UnrealizableEditError):
        realize_name_edit(V1, EditableTarget(2.0, 1, 0, 1, 0))


def test_worked_edits_rebuild_as_planned(worked_records, worked_dmg):

    state = state_from_subgraph(subgraph_from_names(worked_dmg, [V1, V2, V3]))
    assert state.names == (V3, V2, V1)

    records = list(worked_records)
    for step, edit in enumerate([
            EdgeEdit('resolve_swap', 1, 0),
            EdgeEdit('similar_drop', 2, 1),
            EdgeEdit('apex_share', 0, 1)]):
        records, log_edit = realize_edge_edit(edit, records, state, seed=step)
        state = advance_state(state, log_edit, edit)

    v3, v2, v1 = state.names
    assert v2 == V2
    assert apex_of(v3) == apex_of(V2)
    assert apex_of(v1) != apex_of(V1)

    expected = {
        (frozenset((v1, I1)), 'resolve'),
        (frozenset((v2, I1)), 'resolve'),
        (frozenset((v3, I2)), 'resolve'),
        (frozenset((v2, v3)), 'apex'),
    }
    assert edge_set(build_dmg(records).named_edges()) == expected
    assert edge_set(state.named_edges()) == expected

    # Renames keep the editable features.
    assert editable_target(v1) == editable_target(V1)
    assert editable_target(v3) == editable_target(V3)


def test_empty_log_edit_keeps_records(worked_records):
    assert apply_log_edit(worked_records, LogEdit()) == worked_records


def test_feature_attack_without_budget(state, W):

    result = minta_features(state, W, FeatureBudget(0.0))
    assert result.edits == [] and result.spent == 0.0
    assert result.state is state


def test_feature_attack_respects_budget(state, W):

    budget = FeatureBudget.per_node(state.num_domains)
    result = minta_features(state, W, budget, seed=2)

    assert result.spent <= budget.k_f + 1e-9
    spent = np.sqrt(sum(edit.delta_norm ** 2 for edit in result.edits))
    assert spent == pytest.approx(result.spent)
    for edit in result.edits:
        assert tuple(editable_target(edit.new_name)) == edit.realized[:5]
    assert len(set(result.state.names)) == state.num_domains


def test_tight_feature_budget(state, W):

    result = minta_features(state, W, FeatureBudget(1.0), seed=2)
    assert result.spent <= 1.0


def test_feature_attack_node_limit(state, W):

    result = minta_features(
        state, W, FeatureBudget.per_node(state.num_domains), max_nodes=2
    )
    assert result.attacked <= 2
    assert len(result.edits) <= 2


def test_feature_attack_touches_only_editable_subset(state, W):

    original = state.domain_features()
    result = minta_features(
        state, W, FeatureBudget.per_node(state.num_domains), editable=(1,), seed=2
    )

    assert result.attacked > 0
    for edit in result.edits:
        before = original[state.node_ids.index(edit.node_id)]
        for index in (0, 2, 3, 4):
            assert edit.realized[index] == before[index]
        assert tuple(editable_target(edit.new_name))[2:] == tuple(before[2:5])


def test_feature_attack_keeps_similar_relations(state, W):

    names = minta_features(
        state, W, FeatureBudget.per_node(state.num_domains)
    ).state.names
    for u in range(state.num_domains):
        for v in range(u + 1, state.num_domains):
            similar = ngram_similarity(names[u], names[v]) >= 0.5
            assert similar == state.similar[u, v]


def test_edit_scores_match_brute_force(state, W):

    weights = PerturbationWeights()
    A = state.adjacency()
    costs = node_costs(state, A, weights)
    base = edge_objective(state, A, W, costs)

    for edit in candidate_edits(state, ('apex', 'resolve', 'similar')):
        brute = edge_objective(state, state.apply(edit).adjacency(), W, costs) - base
        assert score_edit(state, edit, W, weights) == pytest.approx(brute, abs=1e-12)


def test_greedy_step_takes_the_best_edit(state, W):

    scores = [
        score_edit(state, edit, W) for edit in candidate_edits(state, ('similar',))
    ]
    result = minta_edges(state, W, k_e=1, kinds=('similar',), exhaust_budget=True)
    assert result.scores == [pytest.approx(max(scores))]


def test_resolve_swap_is_an_involution(state):

    edits = candidate_edits(state, ('resolve',))
    if not edits:
        pytest.skip('adversary domains share their addresses')
    swapped = state.apply(edits[0]).apply(edits[0])
    np.testing.assert_array_equal(swapped.adjacency(), state.adjacency())


def test_flip_scoring_errors(state, W):

    with pytest.raises(InvalidEdgeKindError):
        score_edge_flip(state, (0, 1), 'query', W)
    with pytest.raises(ValueError):
        score_edge_flip(state, (2, 2), 'similar', W)


def test_zero_edge_budget(state, W):

    result = minta_edges(state, W, k_e=0)
    assert result.edits == []
    with pytest.raises(ValueError):
        minta_edges(state, W, k_e=-1)


def test_crafted_attack_closes_the_loop(adversary, small_log, W):

    records, _ = small_log
    plan, mutated = craft_attack(adversary, records, W, mode='joint', k_e=3, seed=4)

    assert len(mutated) == len(records)
    assert plan.edges_used <= 3
    assert plan.feature_spent <= plan.budget.k_f + 1e-9
    assert verify_closed_loop(plan, mutated) == []
    assert plan.mutated_records(records) == mutated

    restored = AttackPlan.from_json(plan.to_json())
    assert restored.to_json() == plan.to_json()


def test_attack_without_budgets_leaves_the_log(adversary, small_log, W):

    records, _ = small_log
    plan, mutated = craft_attack(
        adversary, records, W, mode='joint', budget=FeatureBudget(0.0), k_e=0
    )
    assert mutated == records
    assert not plan.attacked_mask.any()


def test_unknown_attack_mode(adversary, small_log, W):

    with pytest.raises(ValueError):
        craft_attack(adversary, small_log[0], W, mode='labels')
