# -*- coding: utf-8 -*-
#
# test_isolation.py
#

"""
The attack sees the target only through the surrogate weights and the
query ledger.
"""

import os
import glob

import pytest


ATTACK_DIR = os.path.join(os.path.dirname(__file__), '..', 'dmgattack', 'attack')

FORBIDDEN = ('models.target', 'TargetModel', 'train_target', 'query_target')


@pytest.mark.parametrize(
    'path', sorted(glob.glob(os.path.join(ATTACK_DIR, '*.py'))), ids=os.path.basename
)
def test_attack_modules_do_not_touch_the_target(path):

    with open(path, 'r') as infile:
        source = infile.read()
    for name in FORBIDDEN:
        assert name not in source, f'{os.path.basename(path)} references {name}'
