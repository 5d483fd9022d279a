# -*- coding: utf-8 -*-
#
# __init__.py
#

"""
The black-box target detector, its query interface and the linearized
surrogate model.
"""
