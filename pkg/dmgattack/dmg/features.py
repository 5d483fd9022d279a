# -*- coding: utf-8 -*-
#
# features.py
#

"""
Character-level domain name features, apex extraction and n-gram similarity.

Feature layout (k = 12):

    0 length              editable, min(len, 5 * base) / base in [0, 5]
    1 has_www             editable
    2 single_char_sub     editable
    3 prefix_repetition   editable
    4 contains_digits     editable
    5 label_count
    6 mean_label_length
    7 digit_ratio
    8 hyphen_count
    9 vowel_ratio
    10 max_label_length
    11 tld_length_bucket
"""

from dataclasses import dataclass
from typing import FrozenSet, List, NamedTuple, Sequence, Tuple

import numpy as np

from .dnslog import InvalidNameError, validate_qname


FEATURE_NAMES = (
    'length',
    'has_www',
    'single_char_subdomain',
    'prefix_repetition',
    'contains_digits',
    'label_count',
    'mean_label_length',
    'digit_ratio',
    'hyphen_count',
    'vowel_ratio',
    'max_label_length',
    'tld_length_bucket',
)

NUM_FEATURES = len(FEATURE_NAMES)

EDITABLE_INDICES = (0, 1, 2, 3, 4)

# Maximum value of the length feature.
MAX_LENGTH_LEVEL = 5

TWO_PART_SUFFIXES = (
    'co.uk', 'org.uk', 'ac.uk', 'gov.uk', 'com.au', 'net.au', 'co.jp',
    'co.nz', 'com.br', 'com.cn', 'co.in', 'co.za',
)

VOWELS = frozenset('aeiou')


@dataclass(frozen=True)
class FeatureConfig:
    """Settings shared by feature extraction and name synthesis."""

    base_length: int = 8
    two_part_suffixes: Tuple[str, ...] = TWO_PART_SUFFIXES

    def __post_init__(self):

        if self.base_length < 1:
            raise ValueError(f'base_length must be >= 1, got {self.base_length}')


DEFAULT_CONFIG = FeatureConfig()


class EditableTarget(NamedTuple):
    """Values of the five editable features."""

    length: float
    has_www: int
    single_char_subdomain: int
    prefix_repetition: int
    contains_digits: int

    @property
    def bits(self) -> Tuple[int, int, int, int]:
        return (
            self.has_www, self.single_char_subdomain, self.prefix_repetition,
            self.contains_digits,
        )

    @classmethod
    def from_vector(cls, vector) -> 'EditableTarget':
        return cls(
            float(vector[0]), int(vector[1]), int(vector[2]), int(vector[3]),
            int(vector[4]),
        )


def apex_of(qname: str, two_part_suffixes: Sequence[str] = TWO_PART_SUFFIXES
            ) -> str:
    """Returns the registrable apex of a domain name.

    The last two labels, or the last three when the last two form a
    configured two-part public suffix.

    """
    labels = qname.split('.')
    if len(labels) < 2 or not all(labels):
        raise InvalidNameError(f'Cannot take the apex of {qname!r}')

    if len(labels) >= 3 and '.'.join(labels[-2:]) in two_part_suffixes:
        return '.'.join(labels[-3:])

    return '.'.join(labels[-2:])


def subdomain_labels(qname: str, two_part_suffixes: Sequence[str] =
                     TWO_PART_SUFFIXES) -> List[str]:
    """Labels to the left of the apex."""

    apex = apex_of(qname, two_part_suffixes)
    if qname == apex:
        return []
    return qname[:-(len(apex) + 1)].split('.')


def ngram_set(name: str, n: int = 2) -> FrozenSet[str]:

    if not name:
        raise ValueError('Cannot take n-grams of an empty name')
    if n < 1:
        raise ValueError(f'n must be >= 1, got {n}')
    if n > len(name):
        raise ValueError(f'n = {n} exceeds the length of {name!r}')

    return frozenset(name[pos:pos + n] for pos in range(len(name) - n + 1))


def ngram_similarity(name_a: str, name_b: str, n: int = 2) -> float:
    """Jaccard similarity of the character n-gram sets of two names."""

    grams_a = ngram_set(name_a, n)
    grams_b = ngram_set(name_b, n)

    num_shared = len(grams_a & grams_b)
    return num_shared / (len(grams_a) + len(grams_b) - num_shared)


def length_level(num_chars: int, base_length: int) -> float:
    """Affine map of the name length to [0, 5], clamped at 5 * base."""

    return min(num_chars, MAX_LENGTH_LEVEL * base_length) / base_length


def has_prefix_repetition(sub_labels: Sequence[str]) -> bool:
    """All labels left of the apex repeat one and the same prefix."""

    return len(sub_labels) >= 2 and len(set(sub_labels)) == 1


def tld_length_bucket(tld: str) -> int:

    return int(np.clip(len(tld) - 2, 0, 2))


def extract_features(qname: str, config: FeatureConfig = DEFAULT_CONFIG
                     ) -> np.ndarray:
    """Compute the feature vector of a domain name.

    Returns:
        (array-like): Vector of length NUM_FEATURES.

    """
    labels = validate_qname(qname)
    sub_labels = subdomain_labels(qname, config.two_part_suffixes)

    chars = qname.replace('.', '')
    num_digits = sum(char.isdigit() for char in chars)
    letters = [char for char in chars if char.isalpha()]
    num_vowels = sum(char in VOWELS for char in letters)

    vector = np.zeros(NUM_FEATURES, dtype=float)
    vector[0] = length_level(len(qname), config.base_length)
    vector[1] = float(bool(sub_labels) and sub_labels[0] == 'www')
    vector[2] = float(any(len(label) == 1 for label in sub_labels))
    vector[3] = float(has_prefix_repetition(sub_labels))
    vector[4] = float(num_digits > 0)
    vector[5] = len(labels)
    vector[6] = np.mean([len(label) for label in labels])
    vector[7] = num_digits / len(chars)
    vector[8] = qname.count('-')
    vector[9] = num_vowels / len(letters) if letters else 0.0
    vector[10] = max(len(label) for label in labels)
    vector[11] = tld_length_bucket(labels[-1])

    return vector


def editable_target(qname: str, config: FeatureConfig = DEFAULT_CONFIG
                    ) -> EditableTarget:
    """The editable slice of a name's features."""

    return EditableTarget.from_vector(
        extract_features(qname, config)[list(EDITABLE_INDICES)]
    )


def feature_matrix(qnames: Sequence[str], config: FeatureConfig =
                   DEFAULT_CONFIG) -> np.ndarray:

    if len(qnames) == 0:
        return np.zeros((0, NUM_FEATURES), dtype=float)
    return np.vstack([extract_features(qname, config) for qname in qnames])
