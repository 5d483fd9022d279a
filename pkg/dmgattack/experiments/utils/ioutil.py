# -*- coding: utf-8 -*-
#
# ioutil.py
#

"""
Results handling for trial experiments: temporary per-trial reports that let
an aborted run re-enter, and the final report and table files.
"""

import os
import json
import shutil

import pandas as pd


def setup_tempdir(tempdir, root=None):
    """Path of a working directory under root, created when missing."""

    if root is None:
        root = os.getcwd()

    path_tempdir = os.path.join(root, tempdir)
    os.makedirs(path_tempdir, exist_ok=True)

    return path_tempdir


def teardown_tempdir(path_to_dir):
    """Delete a working directory and any trial reports left in it."""

    shutil.rmtree(path_to_dir, ignore_errors=True)


def prelim_report_path(path_tempdir, trial_index):
    return os.path.join(path_tempdir, f'trial_{trial_index:03d}.json')


def read_prelim_report(path_to_file):
    """Read a report stored by an earlier run, None if absent or unreadable."""

    if not os.path.isfile(path_to_file):
        return None
    try:
        with open(path_to_file, 'r') as infile:
            return json.load(infile)
    except (OSError, ValueError):
        return None


def write_prelim_report(path_to_file, report):
    """Store one trial report, moved into place once fully written."""

    path_partial = f'{path_to_file}.partial'
    with open(path_partial, 'w') as outfile:
        json.dump(report, outfile, sort_keys=True, indent=1)
    os.replace(path_partial, path_to_file)


def write_report(path_to_file, report):

    with open(path_to_file, 'w') as outfile:
        json.dump(report, outfile, sort_keys=True, indent=1)


def write_final_results(path_to_file, results):
    """Write a summary table, or a list of row dicts, as CSV."""

    if isinstance(results, pd.DataFrame):
        results.to_csv(path_to_file, index=False)
    else:
        data = pd.DataFrame([result for result in results])
        data.to_csv(path_to_file, index=False)
