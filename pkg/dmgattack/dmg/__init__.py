# -*- coding: utf-8 -*-
#
# __init__.py
#

"""
DNS log parsing, domain feature extraction and domain maliciousness graph
construction.
"""
