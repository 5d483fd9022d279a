# -*- coding: utf-8 -*-
#
# realize.py
#

"""
Realization of planned perturbations as DNS log edits: domain renames that
hit requested editable features under similarity constraints, and rewrites
of resolution records.
"""

import string
import logging

from dataclasses import dataclass, field
from typing import FrozenSet, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from ..dmg.dnslog import DnsLogRecord
from ..dmg.features import (
    DEFAULT_CONFIG,
    EditableTarget,
    FeatureConfig,
    apex_of,
    editable_target,
    ngram_similarity,
)
from ..dmg.graph import DEFAULT_SIMILARITY_THRESHOLD
from ..dmg.names import (
    UnrealizableEditError,
    content_labels,
    single_char_label,
    synthesize_name,
)
from .state import AttackState, EdgeEdit, check_edit


logger = logging.getLogger(__name__)

MAX_RETRIES = 50

LETTERS = string.ascii_lowercase


@dataclass(frozen=True)
class NameConstraints:
    """Similarity relations and collisions a new name must respect."""

    similar_to: Tuple[str, ...] = ()
    dissimilar_to: Tuple[str, ...] = ()
    taken: FrozenSet[str] = field(default_factory=frozenset)
    threshold: float = DEFAULT_SIMILARITY_THRESHOLD
    n: int = 2

    def conflicts(self, qname: str) -> List[str]:

        found = []
        if qname in self.taken:
            found.append(f'{qname!r} is already registered')
        for other in self.similar_to:
            if ngram_similarity(qname, other, self.n) < self.threshold:
                found.append(f'{qname!r} is not similar to {other!r}')
        for other in self.dissimilar_to:
            if ngram_similarity(qname, other, self.n) >= self.threshold:
                found.append(f'{qname!r} is similar to {other!r}')
        return found


class LogEdit(NamedTuple):
    """Renames (old, new) and resolution moves (qname, old_ip, new_ip)."""

    renames: Tuple[Tuple[str, str], ...] = ()
    ip_moves: Tuple[Tuple[str, str, str], ...] = ()

    @property
    def is_empty(self) -> bool:
        return not self.renames and not self.ip_moves

    def to_dict(self) -> dict:
        return {
            'renames': [list(item) for item in self.renames],
            'ip_moves': [list(item) for item in self.ip_moves],
        }

    @classmethod
    def from_dict(cls, document: dict) -> 'LogEdit':
        return cls(
            tuple(tuple(item) for item in document.get('renames', ())),
            tuple(tuple(item) for item in document.get('ip_moves', ())),
        )


def apply_log_edit(records: Iterable[DnsLogRecord], edit: LogEdit
                   ) -> List[DnsLogRecord]:
    """Rewrite records; moves match the qname before renaming."""

    moves = {(qname, old): new for qname, old, new in edit.ip_moves}
    renames = dict(edit.renames)

    mutated = []
    for record in records:
        address = moves.get((record.qname, record.resolved_ip), record.resolved_ip)
        qname = renames.get(record.qname, record.qname)
        mutated.append(record._replace(qname=qname, resolved_ip=address))
    return mutated


def realize_name_edit(current: str,
                      target: EditableTarget,
                      apex: Optional[str] = None,
                      seed: int = 0,
                      config: FeatureConfig = DEFAULT_CONFIG,
                      constraints: NameConstraints = None,
                      content: Sequence[str] = None,
                      max_retries: int = MAX_RETRIES) -> str:
    """Find a name with the requested editable features.

    Args:
        current: Current domain name.
        target: Requested editable features.
        apex: Apex of the new name, the current apex by default.
        seed: Seed of the padding characters.
        config: Feature settings.
        constraints: Similarity relations and taken names to respect.
        content: Preferred label texts, the current name's by default.
        max_retries: Number of synthesis attempts.

    Returns:
        The current name when it already satisfies the request, else a
        synthesized one.

    Raises:
        UnrealizableEditError: No attempt satisfied the target and the
            constraints.

    """
    if constraints is None:
        constraints = NameConstraints()

    current_apex = apex_of(current, config.two_part_suffixes)
    if apex is None:
        apex = current_apex

    if apex == current_apex and editable_target(current, config) == target:
        unchanged = NameConstraints(
            constraints.similar_to, constraints.dissimilar_to, frozenset(),
            constraints.threshold, constraints.n,
        )
        if not unchanged.conflicts(current):
            return current

    if content is None:
        content = content_labels(current, config)
    single = single_char_label(current, config)

    rng = np.random.default_rng(seed)
    conflicts: List[str] = []
    for attempt in range(max_retries):
        # Later attempts drop the preferred content and lengthen open-ended
        # names.
        preferred = content if attempt % 2 == 0 else ()
        try:
            qname = synthesize_name(
                target, apex, content=preferred, single=single, rng=rng,
                config=config, extra_length=attempt // 2,
            )
        except UnrealizableEditError as error:
            conflicts = error.conflicts
            continue

        conflicts = constraints.conflicts(qname)
        if not conflicts:
            return qname

    raise UnrealizableEditError(
        [f'no name for {tuple(target)} under {apex!r} after {max_retries} '
         'attempts'] + conflicts
    )


def reshape_label(label: str, rng: np.random.Generator) -> str:
    """Random label with digits, letters and hyphens at the same positions."""

    chars = []
    for char in label:
        if char.isdigit():
            chars.append(str(int(rng.integers(10))))
        elif char.isalpha():
            chars.append(LETTERS[int(rng.integers(len(LETTERS)))])
        else:
            chars.append(char)
    return ''.join(chars)


def fresh_apex_like(apex: str, taken_apexes: set, rng: np.random.Generator,
                    config: FeatureConfig = DEFAULT_CONFIG) -> str:
    """Unregistered apex with the same suffix and label shape."""

    labels = apex.split('.')
    for _ in range(MAX_RETRIES):
        candidate = '.'.join([reshape_label(labels[0], rng)] + labels[1:])
        if candidate not in taken_apexes and (
                apex_of(candidate, config.two_part_suffixes) == candidate):
            return candidate
    raise UnrealizableEditError([f'no fresh apex shaped like {apex!r}'])


def relation_constraints(state: AttackState, node: int, after: AttackState,
                         taken: FrozenSet[str]) -> NameConstraints:
    """Keep the similar relations `after` records for `node`."""

    similar_to, dissimilar_to = [], []
    for other in range(state.num_domains):
        if other == node:
            continue
        if after.similar[node, other]:
            similar_to.append(state.names[other])
        else:
            dissimilar_to.append(state.names[other])
    return NameConstraints(
        tuple(similar_to), tuple(dissimilar_to), taken,
        state.similarity_threshold, state.ngram_n,
    )


def _similar_contents(name: str, config: FeatureConfig) -> List[List[str]]:
    """Label texts that pull a new name towards `name`."""

    labels = name.split('.')
    sub_labels = content_labels(name, config)
    variants = [labels[:-1], sub_labels + labels[-2:-1], labels]
    unique = []
    for variant in variants:
        variant = [label for label in variant if len(label) > 1]
        if variant and variant not in unique:
            unique.append(variant)
    return unique


def realize_edge_edit(edit: EdgeEdit,
                      records: Sequence[DnsLogRecord],
                      state: AttackState,
                      seed: int = 0,
                      max_retries: int = MAX_RETRIES
                      ) -> Tuple[List[DnsLogRecord], LogEdit]:
    """Realize one edge edit in the log.

    resolve_swap exchanges the addresses of the two domains. apex_share
    renames the first domain into the apex of the second. similar_drop
    re-registers the first domain under a fresh apex shaped like its current
    one, which also drops its apex edges. similar_add renames the first
    domain under its own apex to resemble the second. Renames keep the
    editable features and every other similar relation of the domain.

    Raises:
        UnrealizableEditError: No rename satisfies the constraints, or the
            swapped domains resolve to different numbers of addresses.

    """
    check_edit(state, edit)
    config = state.feature_config
    name_a, name_b = state.names[edit.a], state.names[edit.b]

    if edit.op == 'resolve_swap':
        ips_a = [state.ip_names[ip] for ip in np.flatnonzero(state.resolves[edit.a])]
        ips_b = [state.ip_names[ip] for ip in np.flatnonzero(state.resolves[edit.b])]
        moves = tuple(
            [(name_a, old, new) for old, new in zip(ips_a, ips_b)]
            + [(name_b, old, new) for old, new in zip(ips_b, ips_a)]
        )
        log_edit = LogEdit(ip_moves=moves)
        return apply_log_edit(records, log_edit), log_edit

    after = state.apply(edit)
    taken = frozenset(record.qname for record in records)
    constraints = relation_constraints(state, edit.a, after, taken)
    target = editable_target(name_a, config)
    rng = np.random.default_rng(seed)

    if edit.op == 'apex_share':
        attempts = [(apex_of(name_b, config.two_part_suffixes), None)]
    elif edit.op == 'similar_drop':
        taken_apexes = {apex_of(qname, config.two_part_suffixes) for qname in taken}
        current_apex = apex_of(name_a, config.two_part_suffixes)
        attempts = []
        for _ in range(3):
            apex = fresh_apex_like(current_apex, taken_apexes, rng, config)
            content = [
                reshape_label(label, rng) for label in content_labels(name_a, config)
            ]
            attempts.append((apex, content))
    else:
        current_apex = apex_of(name_a, config.two_part_suffixes)
        attempts = [
            (current_apex, content) for content in _similar_contents(name_b, config)
        ]

    conflicts: List[str] = []
    for apex, content in attempts:
        try:
            qname = realize_name_edit(
                name_a, target, apex=apex, seed=int(rng.integers(2 ** 31)),
                config=config, constraints=constraints, content=content,
                max_retries=max_retries,
            )
        except UnrealizableEditError as error:
            conflicts = error.conflicts
            continue
        if qname == name_a:
            continue

        log_edit = LogEdit(renames=((name_a, qname),))
        logger.debug('%s(%s, %s): renamed to %s', edit.op, name_a, name_b, qname)
        return apply_log_edit(records, log_edit), log_edit

    raise UnrealizableEditError(
        [f'{edit.op}({name_a}, {name_b}) is not realizable'] + conflicts
    )


def advance_state(state: AttackState, log_edit: LogEdit,
                  edit: EdgeEdit = None) -> AttackState:
    """State after a realized edit."""

    if edit is not None:
        state = state.apply(edit)

    index = {name: node for node, name in enumerate(state.names)}
    for old, new in log_edit.renames:
        state = state.with_name(index[old], new)

    if log_edit.ip_moves:
        addresses = {}
        for qname, old, new in log_edit.ip_moves:
            addresses.setdefault(qname, []).append(new)
        for qname, new_addresses in addresses.items():
            state = state.with_resolves(index[qname], new_addresses)
    return state
