# -*- coding: utf-8 -*-
#
# metrics.py
#

"""
Attack success and side-effect rates, and their aggregation over trials with
t-distribution confidence intervals.
"""

import logging

from typing import Iterable, List, Sequence, Tuple

import numpy as np
import pandas as pd
import scipy.stats


logger = logging.getLogger(__name__)

ASR_BASES = ('detected', 'total')

SUMMARY_COLUMNS = ['metric', 'mean', 'ci_low', 'ci_high', 'n']

# Report fields summarized by `aggregate`, when present.
SUMMARY_METRICS = (
    'asr',
    'asr_detected_base',
    'asr_total_base',
    'nfr',
    'asr_outlier_adjusted',
    'success_ratio',
    'detected_before_ratio',
    'outlier_flagged_ratio',
    'neighbor_nfr',
    'feature_spent',
    'edges_used',
    'queries_used',
    'surrogate_validation_accuracy',
    'target_test_accuracy',
    'prep_seconds',
    'optimization_seconds',
    'prep_rss_mb',
    'optimization_rss_mb',
)


def _check_verdicts(verdicts_before, verdicts_after) -> Tuple[np.ndarray, np.ndarray]:

    before = np.asarray(verdicts_before, dtype=bool)
    after = np.asarray(verdicts_after, dtype=bool)
    if before.shape != after.shape:
        raise ValueError(
            f'Verdict lists differ in length: {before.shape} vs {after.shape}'
        )
    return before, after


def compute_asr(verdicts_before: Sequence[bool], verdicts_after: Sequence[bool],
                base: str = 'detected') -> float:
    """Share of detected adversary domains that evade after the attack.

    Args:
        verdicts_before: Malicious verdict per adversary domain before.
        verdicts_after: The same after the attack.
        base: `detected` divides by the domains detected before, `total` by
            all adversary domains.

    """
    if base not in ASR_BASES:
        raise ValueError(f'base must be one of {ASR_BASES}, got {base!r}')

    before, after = _check_verdicts(verdicts_before, verdicts_after)
    evaded = np.count_nonzero(before & ~after)
    denominator = np.count_nonzero(before) if base == 'detected' else before.size
    if denominator == 0:
        return 0.0
    return evaded / denominator


def compute_nfr(verdicts_before: Sequence[bool], verdicts_after: Sequence[bool]
                ) -> float:
    """Share of undetected adversary domains that are detected after."""

    before, after = _check_verdicts(verdicts_before, verdicts_after)
    denominator = np.count_nonzero(~before)
    if denominator == 0:
        return 0.0
    return np.count_nonzero(~before & after) / denominator


def outlier_adjusted_asr(asr: float, flagged_count: int, adversary_size: int
                         ) -> float:
    """ASR minus the share of adversary domains flagged as outliers."""

    if adversary_size <= 0:
        return asr
    return max(0.0, asr - flagged_count / adversary_size)


def success_ratio(verdicts_before: Sequence[bool], verdicts_after: Sequence[bool],
                  attacked_count: int) -> float:
    """Evaded domains per attacked domain."""

    before, after = _check_verdicts(verdicts_before, verdicts_after)
    if attacked_count <= 0:
        return 0.0
    return np.count_nonzero(before & ~after) / attacked_count


def confidence_interval(values: Sequence[float], confidence: float = 0.95
                        ) -> Tuple[float, float, float]:
    """Mean and t-distribution interval; NaN bounds for a single value."""

    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError('No values to summarize')

    mean = float(np.mean(values))
    if values.size < 2:
        return mean, float('nan'), float('nan')

    half_width = scipy.stats.t.ppf((1 + confidence) / 2, values.size - 1) * (
        scipy.stats.sem(values)
    )
    return mean, mean - half_width, mean + half_width


def aggregate(reports: Iterable[dict], confidence: float = 0.95,
              metrics: Sequence[str] = SUMMARY_METRICS) -> pd.DataFrame:
    """Mean and confidence interval of each metric over successful trials.

    Args:
        reports: Trial reports as dictionaries.
        confidence: Interval level.
        metrics: Report fields to summarize.

    Returns:
        Columns metric, mean, ci_low, ci_high, n.

    """
    reports = list(reports)
    if not reports:
        raise ValueError('No trial reports to aggregate')

    completed = [report for report in reports if report.get('status', 'ok') == 'ok']
    if len(completed) < len(reports):
        logger.warning(
            '%d of %d trials failed and are left out of the summary',
            len(reports) - len(completed), len(reports),
        )
    if not completed:
        raise ValueError('Every trial failed')

    rows = []
    for metric in metrics:
        values = [
            report[metric] for report in completed
            if report.get(metric) is not None and np.isfinite(report[metric])
        ]
        if not values:
            continue
        mean, low, high = confidence_interval(values, confidence)
        rows.append((metric, mean, low, high, len(values)))
    return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)


def neighbor_nfr_table(neighbor_flips: Iterable[Tuple[int, int]]) -> pd.DataFrame:
    """Mean neighbor flip rate per benign-neighbor count, plus an overall row.

    Args:
        neighbor_flips: Per adversary domain, the number of benign-verdict
            neighbors and how many of them turned malicious.

    """
    data = pd.DataFrame(list(neighbor_flips), columns=['neighbors', 'flipped'])
    data = data[data['neighbors'] > 0]
    if data.empty:
        return pd.DataFrame(columns=['neighbors', 'nodes', 'mean_nfr'])

    data = data.assign(nfr=data['flipped'] / data['neighbors'])
    table = data.groupby('neighbors')['nfr'].agg(['size', 'mean']).reset_index()
    table.columns = ['neighbors', 'nodes', 'mean_nfr']
    overall = pd.DataFrame(
        [('all', len(data), data['nfr'].mean())], columns=table.columns
    )
    return pd.concat([table.astype({'neighbors': object}), overall],
                     ignore_index=True)


def trend(x: Sequence[float], y: Sequence[float]) -> float:
    """Spearman rank correlation; NaN for constant input."""

    if len(x) < 2:
        return float('nan')
    rho, _ = scipy.stats.spearmanr(x, y)
    return float(rho)


def roc_table(points: List[Tuple[int, float, float]]) -> pd.DataFrame:
    """roc.csv rows sorted by attacked count."""

    table = pd.DataFrame(points, columns=['attacked_count', 'nfr', 'asr'])
    return table.sort_values('attacked_count', kind='stable').reset_index(drop=True)
