# -*- coding: utf-8 -*-
#
# __init__.py
#

"""
Synthetic DNS logs and adversary subgraph modelling.
"""
