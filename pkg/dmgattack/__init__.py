# -*- coding: utf-8 -*-
#
# __init__.py
#

"""
Multi-instance evasion testbed for graph-based malicious domain detection.
"""

__version__ = '0.1.0'
