# -*- coding: utf-8 -*-
#
# test_metrics.py
#

import numpy as np
import pytest

from dmgattack.experiments import metrics


def _verdicts(num_detected, num_evaded, num_undetected, num_flipped):
    """Before and after verdicts of a detected group followed by an
    undetected one."""

    before = [True] * num_detected + [False] * num_undetected
    after = (
        [False] * num_evaded + [True] * (num_detected - num_evaded)
        + [True] * num_flipped + [False] * (num_undetected - num_flipped)
    )
    return before, after


def test_asr_of_detected_domains():

    before, after = _verdicts(30, 24, 70, 0)
    assert metrics.compute_asr(before, after) == pytest.approx(0.8)
    assert metrics.compute_asr(before, after, base='total') == pytest.approx(0.24)


def test_nfr_of_undetected_domains():

    before, after = _verdicts(30, 0, 70, 9)
    assert metrics.compute_nfr(before, after) == pytest.approx(9 / 70)
    assert metrics.compute_asr(before, after) == 0.0


def test_trivial_rates():

    assert metrics.compute_asr([True] * 5, [False] * 5) == 1.0
    assert metrics.compute_nfr([False] * 5, [True] * 5) == 1.0

    verdicts = [True, False, True, False]
    assert metrics.compute_asr(verdicts, verdicts) == 0.0
    assert metrics.compute_nfr(verdicts, verdicts) == 0.0

    # Empty denominators
    assert metrics.compute_asr([False, False], [True, True]) == 0.0
    assert metrics.compute_nfr([True, True], [False, False]) == 0.0
    assert metrics.compute_asr([], []) == 0.0


def test_rate_input_checks():

    with pytest.raises(ValueError):
        metrics.compute_asr([True, False], [True])
    with pytest.raises(ValueError):
        metrics.compute_nfr([True], [True, False])
    with pytest.raises(ValueError):
        metrics.compute_asr([True], [False], base='attacked')


def test_outlier_adjusted_asr():

    assert metrics.outlier_adjusted_asr(0.8, 10, 100) == pytest.approx(0.7)
    assert metrics.outlier_adjusted_asr(0.1, 50, 100) == 0.0
    assert metrics.outlier_adjusted_asr(0.4, 3, 0) == 0.4


def test_success_ratio():

    before, after = _verdicts(30, 24, 70, 0)
    assert metrics.success_ratio(before, after, 48) == pytest.approx(0.5)
    assert metrics.success_ratio(before, after, 0) == 0.0


def test_single_value_interval():

    mean, low, high = metrics.confidence_interval([0.4])
    assert mean == 0.4
    assert np.isnan(low) and np.isnan(high)

    with pytest.raises(ValueError):
        metrics.confidence_interval([])


def test_interval_contains_the_mean():

    values = np.random.default_rng(0).uniform(size=30)
    mean, low, high = metrics.confidence_interval(values)
    assert low < mean < high
    assert mean == pytest.approx(values.mean())

    _, narrow_low, narrow_high = metrics.confidence_interval(values, 0.5)
    assert low < narrow_low and narrow_high < high


def _report(asr, nfr, status='ok'):
    return {'status': status, 'asr': asr, 'nfr': nfr, 'asr_outlier_adjusted': None}


def test_aggregate_identical_reports():

    summary = metrics.aggregate([_report(0.5, 0.1)] * 30)
    assert list(summary.columns) == metrics.SUMMARY_COLUMNS
    assert list(summary['metric']) == ['asr', 'nfr']

    asr = summary.set_index('metric').loc['asr']
    assert asr['mean'] == pytest.approx(0.5)
    assert asr['ci_low'] == pytest.approx(0.5)
    assert asr['ci_high'] == pytest.approx(0.5)
    assert asr['n'] == 30


def test_aggregate_single_report():

    summary = metrics.aggregate([_report(0.5, 0.1)]).set_index('metric')
    assert summary.loc['asr', 'mean'] == 0.5
    assert np.isnan(summary.loc['asr', 'ci_low'])


def test_aggregate_leaves_out_failed_trials():

    reports = [
        _report(0.2, 0.0),
        _report(0.4, 0.0),
        {'status': 'failed', 'stage': 'attack', 'error': 'boom', 'trial_index': 2},
    ]
    summary = metrics.aggregate(reports).set_index('metric')
    assert summary.loc['asr', 'mean'] == pytest.approx(0.3)
    assert summary.loc['asr', 'n'] == 2

    with pytest.raises(ValueError):
        metrics.aggregate([])
    with pytest.raises(ValueError):
        metrics.aggregate(reports[2:])


def test_neighbor_nfr_table():

    table = metrics.neighbor_nfr_table([(0, 0), (2, 1), (2, 0), (4, 4)])
    rows = table.set_index('neighbors')

    assert list(table['neighbors']) == [2, 4, 'all']
    assert rows.loc[2, 'nodes'] == 2
    assert rows.loc[2, 'mean_nfr'] == pytest.approx(0.25)
    assert rows.loc[4, 'mean_nfr'] == 1.0
    assert rows.loc['all', 'nodes'] == 3
    assert rows.loc['all', 'mean_nfr'] == pytest.approx(0.5)

    assert metrics.neighbor_nfr_table([(0, 0)]).empty


def test_trend():

    assert metrics.trend([1, 2, 3, 4], [0.1, 0.2, 0.4, 0.8]) == pytest.approx(1.0)
    assert metrics.trend([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
    assert np.isnan(metrics.trend([1], [1]))


def test_roc_table():

    table = metrics.roc_table([(10, 0.1, 0.5), (0, 0.0, 0.0), (5, 0.05, 0.3)])
    assert list(table.columns) == ['attacked_count', 'nfr', 'asr']
    assert list(table['attacked_count']) == [0, 5, 10]
    assert table.iloc[0].tolist() == [0, 0.0, 0.0]
