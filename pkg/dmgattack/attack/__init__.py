# -*- coding: utf-8 -*-
#
# __init__.py
#

"""
Coordinated feature and edge perturbations of an adversary's domains, and
their realization as name and resolution edits of the DNS log.

Nothing in this package may import the target model; it reaches the detector
only through the query interface and the surrogate.
"""
