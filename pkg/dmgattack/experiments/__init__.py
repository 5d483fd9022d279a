# -*- coding: utf-8 -*-
#
# __init__.py
#

"""
Seeded end-to-end trials, sweeps and the command-line interface.
"""
