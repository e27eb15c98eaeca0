#!/usr/bin/env python
# -*- coding: utf-8 -*-
# config.py
"""Configuration for curvsup."""
# Copyright (c) 2024 curvsup developers
# This file is part of curvsup, released under a BSD license.
#    See the file license.txt included with this distribution.

mpl_available = True
skimage_available = True

import importlib.util

mpl_available = importlib.util.find_spec("matplotlib") is not None
skimage_available = importlib.util.find_spec("skimage") is not None


# Self-support angle in degrees
default_alpha = 45.0
# Trajectory turn per step, as a fraction of alpha
default_turn_fraction = 1.0 / 20.0
# Merge neighbourhood in face rings
default_n_ring = 3
# Nozzle width and layer thickness (mm)
default_width = 0.8
default_layer_thickness = 0.8
default_n_layers = 20
# Trunk radius (mm), kernel support over edge radius, branch radius rule
default_target_radius = 2.0
default_support_factor = 4.0
default_radius_mode = 'dynamic'
# Geometric tolerances (mm)
match_tolerance = 1e-6
degenerate_volume = 1e-12
compatibility_tolerance = 1e-9
# Relative residual accepted from the sparse least-squares solve
solver_tolerance = 1e-8
