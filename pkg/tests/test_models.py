# -*- coding: utf-8 -*-
#
# test_models.py
#

import numpy as np
import pandas as pd
import pytest

from sklearn.base import clone

from dmgattack.models.checkpoints import (
    load_checkpoint,
    read_query_dataset,
    save_checkpoint,
    write_query_dataset,
)
from dmgattack.models.query import (
    NotADomainError,
    QueryBudgetError,
    QueryBudgetLedger,
    collect_query_dataset,
    detector_verdicts,
    query_target,
)
from dmgattack.models.surrogate import (
    LogRegSurrogate,
    SurrogateHyper,
    SurrogateTrainingError,
    message_at,
    surrogate_forward,
    train_surrogate,
)
from dmgattack.models.target import (
    UNLABELED,
    TrainingHyper,
    label_vector,
    train_target,
)


HYPER = TrainingHyper(epochs=100)


@pytest.fixture(scope='module')
def target(small_dmg, small_log, small_projection):

    _, labels = small_log
    return train_target(
        small_projection, label_vector(small_dmg, labels), HYPER, seed=7
    )


@pytest.fixture(scope='module')
def queries(target, small_projection):

    ledger = QueryBudgetLedger(120)
    return collect_query_dataset(target, small_projection, ledger, seed=1)


def test_label_vector(small_dmg, small_log):

    _, labels = small_log
    y = label_vector(small_dmg, labels)
    num_domains = len(small_dmg.domain_ids)
    assert np.all(y[num_domains:] == UNLABELED)
    assert set(np.unique(y[:num_domains])) == {0, 1}


def test_target_learns_synthetic_labels(target):

    assert target.train_accuracy > 0.7
    assert 0.0 <= target.test_accuracy <= 1.0


def test_target_training_is_seeded(small_dmg, small_log, small_projection, target):

    _, labels = small_log
    again = train_target(
        small_projection, label_vector(small_dmg, labels), HYPER, seed=7
    )
    np.testing.assert_array_equal(again.W1, target.W1)
    np.testing.assert_array_equal(again.b2, target.b2)


def test_target_rejects_bad_labels(small_projection):

    with pytest.raises(ValueError):
        train_target(small_projection, np.zeros(3, dtype=int), HYPER)
    with pytest.raises(ValueError):
        train_target(
            small_projection, np.full(small_projection.num_nodes, UNLABELED), HYPER
        )


def test_ledger_budget():

    ledger = QueryBudgetLedger(2)
    ledger.charge()
    ledger.charge()
    assert ledger.remaining == 0
    with pytest.raises(QueryBudgetError):
        ledger.charge()
    assert ledger.used == 2


def test_query_target_charges_one_query(target, small_projection):

    ledger = QueryBudgetLedger(5)
    label = query_target(target, small_projection, 0, ledger)
    assert label in ('benign', 'malicious')
    assert ledger.used == 1


def test_only_domains_are_classified(target, small_dmg, small_projection):

    ip_node = len(small_dmg.domain_ids)
    ledger = QueryBudgetLedger(5)
    with pytest.raises(NotADomainError):
        query_target(target, small_projection, ip_node, ledger)
    with pytest.raises(NotADomainError):
        detector_verdicts(target, small_projection, [0, ip_node])
    assert ledger.used == 0


def test_verdicts_agree_with_queries(target, small_projection):

    verdicts = detector_verdicts(target, small_projection, range(10))
    ledger = QueryBudgetLedger(10)
    answers = [query_target(target, small_projection, node, ledger) for node in range(10)]
    assert list(verdicts) == [answer == 'malicious' for answer in answers]


def test_query_dataset(queries, small_dmg):

    assert len(queries) == 120
    assert list(queries['node_id']) == sorted(queries['node_id'])
    assert queries['node_id'].max() < len(small_dmg.domain_ids)
    assert queries['node_id'].is_unique


def test_query_dataset_defaults_to_remaining_budget(target, small_projection):

    ledger = QueryBudgetLedger(10)
    assert len(collect_query_dataset(target, small_projection, ledger)) == 10
    assert ledger.remaining == 0

    with pytest.raises(QueryBudgetError):
        collect_query_dataset(
            target, small_projection, QueryBudgetLedger(10), num_queries=50
        )


def test_repeated_queries_cost_twice(target, small_projection):

    ledger = QueryBudgetLedger(2)
    query_target(target, small_projection, 3, ledger)
    query_target(target, small_projection, 3, ledger)
    assert ledger.remaining == 0


def test_surrogate_forward_is_two_hop_propagation(small_projection):

    rng = np.random.default_rng(0)
    X = rng.random((small_projection.num_nodes, small_projection.num_features))
    W = rng.normal(size=(small_projection.num_features, 2))

    B = small_projection.B.toarray()
    np.testing.assert_allclose(surrogate_forward(small_projection, X, W), B @ X @ W)
    np.testing.assert_allclose(message_at(small_projection, X, 4), (B @ X)[4])

    with pytest.raises(ValueError):
        surrogate_forward(small_projection, X[1:], W)
    with pytest.raises(ValueError):
        surrogate_forward(small_projection, X, W[1:])


def test_surrogate_weights(queries, small_projection):

    surrogate = train_surrogate(queries, small_projection, seed=0)
    assert surrogate.W.shape == (small_projection.num_features, 2)
    np.testing.assert_allclose(surrogate.W[:, 0], -surrogate.W[:, 1])
    assert surrogate.validation_accuracy > 0.5
    assert len(surrogate.fingerprint) == 64


@pytest.mark.parametrize('scale', [100.0, 0.01])
def test_surrogate_ignores_feature_units(scale):

    rng = np.random.default_rng(11)
    rows = rng.standard_normal((600, 15)) * rng.uniform(0.5, 3.0, size=15)
    y = (rows @ rng.standard_normal(15) + rng.standard_normal(600) > 0).astype(int)

    # Whole matrix, then one column alone.
    for factors in (np.full(15, scale), np.where(np.arange(15) == 4, scale, 1.0)):
        base = LogRegSurrogate(random_state=0).fit(rows, y)
        scaled = LogRegSurrogate(random_state=0).fit(rows * factors, y)

        np.testing.assert_array_equal(scaled.predict(rows * factors), base.predict(rows))
        np.testing.assert_allclose(
            scaled.weight_matrix() * factors[:, None], base.weight_matrix(),
            rtol=1e-4, atol=1e-6,
        )
        assert scaled.hyper == SurrogateHyper()


def test_surrogate_estimator_params():

    hyper = SurrogateHyper(C=0.5)
    estimator = LogRegSurrogate(hyper, random_state=3)
    assert estimator.get_params() == {'hyper': hyper, 'random_state': 3}

    copied = clone(estimator)
    assert copied.get_params() == estimator.get_params()
    assert copied.model.C == 0.5 and copied.model.random_state == 3


def test_surrogate_needs_two_classes(small_projection):

    data = pd.DataFrame({'node_id': [0, 1, 2, 3], 'label': ['benign'] * 4})
    with pytest.raises(SurrogateTrainingError):
        train_surrogate(data, small_projection)


def test_checkpoints(tmp_path, target, queries, small_projection):

    surrogate = train_surrogate(queries, small_projection, seed=0)

    save_checkpoint(str(tmp_path / 'target.json'), target)
    save_checkpoint(str(tmp_path / 'surrogate.json'), surrogate)
    write_query_dataset(str(tmp_path / 'queries.csv'), queries)

    loaded_target = load_checkpoint(str(tmp_path / 'target.json'))
    loaded_surrogate = load_checkpoint(str(tmp_path / 'surrogate.json'))
    np.testing.assert_allclose(
        loaded_target.logits(small_projection), target.logits(small_projection)
    )
    np.testing.assert_allclose(
        loaded_surrogate.margins(small_projection), surrogate.margins(small_projection)
    )
    pd.testing.assert_frame_equal(read_query_dataset(str(tmp_path / 'queries.csv')), queries)

    with pytest.raises(TypeError):
        save_checkpoint(str(tmp_path / 'other.json'), object())


def test_query_dataset_rejects_unknown_labels(tmp_path):

    path = tmp_path / 'queries.csv'
    path.write_text('node_id,label\n0,benign\n1,suspicious\n')
    with pytest.raises(ValueError):
        read_query_dataset(str(path))
