# -*- coding: utf-8 -*-
#
# names.py
#

"""
Synthesis of domain names with prescribed editable features.
"""

import string

from typing import List, Optional, Sequence

import numpy as np

from .dnslog import validate_qname
from .features import (
    DEFAULT_CONFIG,
    MAX_LENGTH_LEVEL,
    EditableTarget,
    FeatureConfig,
    editable_target,
    length_level,
    subdomain_labels,
)


LETTERS = string.ascii_lowercase

MAX_LABEL_LENGTH = 63

MAX_NAME_LENGTH = 253


class UnrealizableEditError(ValueError):
    """No name satisfies the requested features and constraints."""

    def __init__(self, conflicts: Sequence[str]):

        self.conflicts = list(conflicts)

        super().__init__('; '.join(self.conflicts))


def _random_letters(rng: np.random.Generator, size: int) -> str:
    return ''.join(rng.choice(list(LETTERS), size=size)) if size > 0 else ''


def _random_digit(rng: np.random.Generator) -> str:
    return str(int(rng.integers(10)))


def _strip_digits(label: str, rng: np.random.Generator) -> str:
    return ''.join(
        _random_letters(rng, 1) if char.isdigit() else char for char in label
    )


def _has_digit(text: str) -> bool:
    return any(char.isdigit() for char in text)


def content_labels(qname: str, config: FeatureConfig = DEFAULT_CONFIG
                   ) -> List[str]:
    """Distinct multi-character labels left of the apex, except www."""

    labels = []
    for label in subdomain_labels(qname, config.two_part_suffixes):
        if label != 'www' and len(label) > 1 and label not in labels:
            labels.append(label)
    return labels


def single_char_label(qname: str, config: FeatureConfig = DEFAULT_CONFIG
                      ) -> Optional[str]:

    for label in subdomain_labels(qname, config.two_part_suffixes):
        if len(label) == 1:
            return label
    return None


def required_length(level: float, base_length: int):
    """Name length realizing a length level.

    Returns:
        (tuple): Exact (or minimal) number of characters and whether any
            longer name also realizes the level.

    """
    if level >= MAX_LENGTH_LEVEL:
        return MAX_LENGTH_LEVEL * base_length, True

    num_chars = int(round(level * base_length))
    if num_chars < 1 or length_level(num_chars, base_length) != level:
        raise UnrealizableEditError(
            [f'length level {level} is not reachable with base length '
             f'{base_length}']
        )
    return num_chars, False


def minimal_subdomain_length(target: EditableTarget, apex: str) -> int:
    """Fewest characters (dots included) left of the apex for the bits."""

    needs_digit = bool(target.contains_digits) and not _has_digit(apex)
    if target.prefix_repetition:
        if target.has_www:
            return 8
        if target.single_char_subdomain:
            return 4
        return 6

    length = 4 * target.has_www + 2 * target.single_char_subdomain
    if needs_digit and not target.single_char_subdomain:
        length += 3
    return length


def target_conflicts(target: EditableTarget, apex: str) -> List[str]:
    """Conflicts detectable without attempting a synthesis."""

    conflicts = []
    if target.prefix_repetition and target.has_www and (
            target.single_char_subdomain):
        conflicts.append(
            'prefix repetition of www cannot carry a single-character label'
        )
    if target.prefix_repetition and target.has_www and (
            target.contains_digits and not _has_digit(apex)):
        conflicts.append(
            'prefix repetition of www leaves no label to carry digits'
        )
    if not target.contains_digits and _has_digit(apex):
        conflicts.append(f'apex {apex!r} contains digits')
    for name, value in zip(('has_www', 'single_char_subdomain',
                            'prefix_repetition', 'contains_digits'),
                           target.bits):
        if value not in (0, 1):
            conflicts.append(f'{name} must be 0 or 1, got {value}')
    return conflicts


def _repeated_labels(target, apex, budget, content, rng) -> List[str]:

    needs_digit = bool(target.contains_digits) and not _has_digit(apex)
    if target.has_www:
        if budget % 4 != 0 or budget // 4 < 2:
            raise UnrealizableEditError(
                [f'{budget} characters cannot be split into repeated www labels']
            )
        return ['www'] * (budget // 4)

    if target.single_char_subdomain:
        if budget % 2 != 0 or budget // 2 < 2:
            raise UnrealizableEditError(
                [f'{budget} characters cannot be split into repeated '
                 'single-character labels']
            )
        if needs_digit:
            stem = _random_digit(rng)
        else:
            stem = content[0][0] if content else _random_letters(rng, 1)
            if stem.isdigit() and not target.contains_digits:
                stem = _random_letters(rng, 1)
        return [stem] * (budget // 2)

    for num_copies in range(2, budget // 3 + 1):
        if budget % num_copies != 0:
            continue
        stem_length = budget // num_copies - 1
        if not 2 <= stem_length <= MAX_LABEL_LENGTH:
            continue
        stem = ''.join(content)[:stem_length]
        stem += _random_letters(rng, stem_length - len(stem))
        if not target.contains_digits:
            stem = _strip_digits(stem, rng)
        elif needs_digit and not _has_digit(stem):
            stem = stem[:-1] + _random_digit(rng)
        if stem == 'www':
            stem = stem[:-1] + _random_letters(rng, 1).replace('w', 'x')
        return [stem] * num_copies

    raise UnrealizableEditError(
        [f'{budget} characters cannot be split into >= 2 repeated labels of '
         'length >= 2']
    )


def _fit_content(labels: List[str], budget: int, rng) -> List[str]:
    """Pad or trim content labels so they occupy exactly `budget` chars."""

    labels = [label[:MAX_LABEL_LENGTH] for label in labels] or ['']

    def used(items):
        return sum(len(item) + 1 for item in items)

    while used(labels) > budget and len(labels) > 1:
        labels.pop()

    excess = used(labels) - budget
    if excess > 0:
        labels[-1] = labels[-1][:len(labels[-1]) - excess]

    missing = budget - used(labels)
    while missing > 0:
        room = MAX_LABEL_LENGTH - len(labels[-1])
        if room > 0:
            grow = min(room, missing)
            labels[-1] += _random_letters(rng, grow)
            missing -= grow
        else:
            # A fresh label costs its dot plus at least two characters.
            size = min(MAX_LABEL_LENGTH, missing - 1)
            labels.append(_random_letters(rng, size))
            missing -= size + 1

    if any(len(label) < 2 for label in labels):
        raise UnrealizableEditError(
            [f'{budget} characters leave a content label shorter than 2']
        )
    return labels


def _plain_labels(target, apex, budget, content, single, rng) -> List[str]:

    needs_digit = bool(target.contains_digits) and not _has_digit(apex)

    labels = ['www'] if target.has_www else []
    if target.single_char_subdomain:
        if single is None or (single.isdigit() and not target.contains_digits):
            single = _random_letters(rng, 1)
        labels.append(single)

    fixed = sum(len(label) + 1 for label in labels)
    remaining = budget - fixed
    if remaining < 0:
        raise UnrealizableEditError(
            [f'{budget} characters cannot hold the www/single-character labels']
        )

    if remaining == 0:
        body = []
    elif remaining == 2 and target.single_char_subdomain:
        body = [_random_letters(rng, 1)]
    elif remaining < 3:
        raise UnrealizableEditError(
            [f'{remaining} spare characters cannot form a label of length >= 2']
        )
    else:
        body = _fit_content(
            [label for label in content if label != 'www'], remaining, rng
        )

    if not target.contains_digits:
        body = [_strip_digits(label, rng) for label in body]
        labels = [_strip_digits(label, rng) for label in labels]
    elif needs_digit and not _has_digit(''.join(labels + body)):
        multi = [pos for pos, label in enumerate(body) if len(label) > 1]
        if multi:
            pos = multi[0]
            body[pos] = body[pos][:-1] + _random_digit(rng)
        elif target.single_char_subdomain:
            index = labels.index(single)
            labels[index] = _random_digit(rng)
        else:
            raise UnrealizableEditError(
                ['no label left of the apex can carry digits']
            )

    labels = labels + body
    if labels and not target.has_www and labels[0] == 'www':
        labels[0] = 'wwx'
    if len(labels) >= 2 and len(set(labels)) == 1:
        last = labels[-1]
        swap = 'a' if last[-1] != 'a' else 'b'
        labels[-1] = last[:-1] + swap
    return labels


def synthesize_name(target: EditableTarget,
                    apex: str,
                    content: Sequence[str] = (),
                    single: Optional[str] = None,
                    rng: np.random.Generator = None,
                    config: FeatureConfig = DEFAULT_CONFIG,
                    extra_length: int = 0) -> str:
    """Build a name under `apex` whose editable features equal `target`.

    Args:
        target: Requested editable features.
        apex: Apex domain the name ends with.
        content: Preferred texts of the multi-character labels.
        single: Preferred single-character label.
        rng: Source of padding characters.
        config: Feature settings.
        extra_length: Additional characters when the length level is open
            ended.

    Raises:
        UnrealizableEditError: The target contradicts itself or the apex.

    """
    if rng is None:
        rng = np.random.default_rng(0)

    conflicts = target_conflicts(target, apex)
    if conflicts:
        raise UnrealizableEditError(conflicts)

    total, open_ended = required_length(target.length, config.base_length)
    budget = total - len(apex)
    minimal = minimal_subdomain_length(target, apex)
    if open_ended:
        budget = max(budget, minimal) + extra_length
        if target.prefix_repetition and target.has_www:
            budget += (-budget) % 4
        elif target.prefix_repetition:
            budget += budget % 2
    if budget < minimal:
        raise UnrealizableEditError(
            [f'length level {target.length} allows {max(budget, 0)} characters '
             f'left of {apex!r}, the other features need {minimal}']
        )

    content = [label for label in content if label]
    if budget == 0:
        labels = []
    elif target.prefix_repetition:
        labels = _repeated_labels(target, apex, budget, content, rng)
    else:
        labels = _plain_labels(target, apex, budget, content, single, rng)

    qname = '.'.join(labels + [apex])
    if len(qname) > MAX_NAME_LENGTH:
        raise UnrealizableEditError([f'name exceeds {MAX_NAME_LENGTH} chars'])
    validate_qname(qname)

    realized = editable_target(qname, config)
    if realized != target:
        raise UnrealizableEditError(
            [f'synthesized {qname!r} realizes {tuple(realized)}, '
             f'requested {tuple(target)}']
        )
    return qname
