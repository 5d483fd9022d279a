# -*- coding: utf-8 -*-
#
# __init__.py
#

"""
Outlier detection and graph purification defenses.
"""
