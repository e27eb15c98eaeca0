#!/usr/bin/env python
# -*- coding: utf-8 -*-
# __init__.py
"""Package initialization for curvsup."""
# Copyright (c) 2024 curvsup developers
# This file is part of curvsup, released under a BSD license.
#    See the file license.txt included with this distribution.

__author__ = 'curvsup developers'
__email__ = 'curvsup@users.noreply.github.com'
__version__ = '0.1.0'
__version_info__ = (0, 1, 0)
