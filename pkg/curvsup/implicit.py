#!/usr/bin/env python
# -*- coding: utf-8 -*-
# implicit.py
"""Convolution-surface implicit solid around a support skeleton."""
# Copyright (c) 2024 curvsup developers
# This file is part of curvsup, released under a BSD license.
#    See the file license.txt included with this distribution.

import collections
import numpy as np
from scipy.spatial import cKDTree
from curvsup.config import skimage_available
from curvsup.mesh import TriMesh
from curvsup.util import AABBTree
import logging
logger = logging.getLogger('curvsup.implicit')

FieldSample = collections.namedtuple('FieldSample', ['point', 'value'])

# Segments shorter than this carry no field
MIN_EDGE_LENGTH = 1e-9

# Up to this many points are evaluated through the edge index
INDEXED_QUERIES = 16


def _convolve(rel, axis, length, weight, R):
    """Kernel integral for query offsets `rel` from segment starts.

    All arguments broadcast: `rel` and `axis` over (..., 3), `length` and
    `weight` over the leading dimensions.
    """
    a = np.sum(rel * axis, axis=-1)
    h2 = np.maximum(np.sum(rel * rel, axis=-1) - a * a, 0.0)
    A = R * R - h2
    inside = A > 0
    w = np.sqrt(np.where(inside, A, 0.0))
    s1 = np.maximum(-a, -w)
    s2 = np.minimum(length - a, w)
    active = inside & (s2 > s1)

    def primitive(s):
        return A * A * s - (2.0 / 3.0) * A * s ** 3 + s ** 5 / 5.0

    value = (primitive(s2) - primitive(s1)) / R ** 4
    return np.where(active, weight * value, 0.0)


def _segment_field(points, p1, p2, weight, R):
    """Quartic-kernel convolution of one segment at many points.

    With arc length t along the segment, axial offset a and distance h
    of the query point from the segment line, the integrand is
    ``((A - s^2) / R^2)^2`` for s = t - a and A = R^2 - h^2, whose
    antiderivative is ``(A^2 s - 2/3 A s^3 + s^5 / 5) / R^4``. The limits
    clamp [0, l] to the interval where the kernel is nonzero.
    """
    q = np.asarray(points, dtype=float).reshape(-1, 3)
    d = p2 - p1
    length = np.linalg.norm(d)
    if length <= MIN_EDGE_LENGTH:
        raise ValueError("Degenerate edge of length %g" % length)
    return _convolve(q - p1, d / length, length, weight, R)


def edge_field(p, edge, weight, R):
    """Field contribution of one weighted skeleton edge at a point.

    Parameters
    ----------
    p : array_like
        Query point.
    edge : array_like
        (2, 3) segment end points.
    weight : float
        Edge weight r_j.
    R : float
        Kernel support size.

    Returns
    -------
    float
        ``weight`` times the arc-length integral of ``(1 - d^2/R^2)^2``
        over the part of the segment within distance R of `p`.

    Raises
    ------
    ValueError
        If the edge is shorter than 1e-9 mm.
    """
    edge = np.asarray(edge, dtype=float).reshape(2, 3)
    return float(_segment_field(p, edge[0], edge[1], weight, R)[0])


class ImplicitSolid(object):
    """Solid ``F(p) >= 0`` with ``F(p) = -C + sum_j F_j(p)``.

    Parameters
    ----------
    segments : array_like
        (e, 2, 3) skeleton edges.
    weights : array_like
        Positive weight per edge.
    R : float or array_like
        Kernel support size in mm, shared by all edges or one per edge.
    C : float
        Positive iso-value.

    Attributes
    ----------
    supports : numpy.ndarray
        Kernel support of every kept edge.
    R : float
        Largest kernel support; F equals -C farther than this from every
        edge.
    """

    def __init__(self, segments, weights, R, C):
        segments = np.asarray(segments, dtype=float).reshape(-1, 2, 3)
        weights = np.asarray(weights, dtype=float).reshape(-1)
        if len(segments) != len(weights):
            raise ValueError("%d weights given for %d edges" %
                             (len(weights), len(segments)))
        R = np.asarray(R, dtype=float)
        if np.any(R <= 0) or C <= 0:
            raise ValueError("Kernel support and iso-value must be positive")
        supports = np.full(len(segments), float(R)) if R.ndim == 0 \
            else R.reshape(-1)
        if len(supports) != len(segments):
            raise ValueError("%d kernel supports given for %d edges" %
                             (len(supports), len(segments)))
        if np.any(weights <= 0):
            raise ValueError("Edge weights must be positive")
        lengths = np.linalg.norm(segments[:, 1] - segments[:, 0], axis=1)
        keep = lengths > MIN_EDGE_LENGTH
        if not np.all(keep):
            logger.debug("Skipping %d zero-length edges",
                         int((~keep).sum()))
        self.segments = segments[keep]
        self.weights = weights[keep]
        self.supports = supports[keep]
        if len(self.supports):
            self.R = float(self.supports.max())
        else:
            self.R = float(R) if R.ndim == 0 else 0.0
        self.C = float(C)
        d = self.segments[:, 1] - self.segments[:, 0]
        self._lengths = np.linalg.norm(d, axis=1)
        self._axes = d / np.maximum(self._lengths, MIN_EDGE_LENGTH)[:, None]
        pad = self.supports[:, None]
        self.index = AABBTree(self.segments.min(axis=1) - pad,
                              self.segments.max(axis=1) + pad)

    def __repr__(self):
        return "ImplicitSolid(edges=%d, R=%g, C=%g)" % (
            len(self.segments), self.R, self.C)

    @classmethod
    def from_skeleton(cls, skeleton, r_leaf, R, C, radius_mode='dynamic'):
        """Solid with one kernel support and the radii as edge weights."""
        return cls(skeleton.segments(),
                   assign_radii(skeleton, r_leaf, radius_mode), R, C)

    @classmethod
    def from_skeleton_scaled(cls, skeleton, r_leaf, support_factor,
                             radius_mode='dynamic'):
        """Solid whose edge supports grow with the edge radii.

        Edge j gets the support ``support_factor * r_j`` and the weight that
        puts the surface of a long isolated strut exactly at r_j. Thin
        leaves then keep to their own radius instead of blending into a
        slab, while trunks reach the radius the branch-count rule gives
        them.

        Parameters
        ----------
        skeleton : SkeletonGraph
        r_leaf : float
            Leaf radius in mm.
        support_factor : float
            Support over radius; must exceed 1.
        radius_mode : str, optional
            ``dynamic`` or ``fixed``, see :func:`assign_radii`.
        """
        if support_factor <= 1:
            raise ValueError("Support factor must exceed 1, got %r" %
                             support_factor)
        radii = assign_radii(skeleton, r_leaf, radius_mode)
        supports = support_factor * radii
        C = calibrate_iso(1.0, support_factor * r_leaf, r_leaf)
        weights = strut_weight(radii, supports, C)
        return cls(skeleton.segments(), weights, supports, C)

    @property
    def is_empty(self):
        return not len(self.segments)

    @property
    def bounds(self):
        """(lower, upper) corners of the region where F can exceed -C."""
        if self.is_empty:
            return None
        pad = self.supports[:, None]
        return ((self.segments.min(axis=1) - pad).min(axis=0),
                (self.segments.max(axis=1) + pad).max(axis=0))

    def evaluate(self, points):
        """Field values at many points.

        A handful of points is looked up in the edge index; larger batches
        apply each edge to the points inside a ball enclosing its support
        region, in ascending edge order.
        """
        q = np.asarray(points, dtype=float).reshape(-1, 3)
        if self.is_empty or not len(q):
            return np.zeros(len(q)) - self.C
        if len(q) <= INDEXED_QUERIES:
            return np.array([field_value(self, p) for p in q])
        total = np.zeros(len(q))
        tree = cKDTree(q)
        for j in range(len(self.segments)):
            p1, p2 = self.segments[j]
            radius = 0.5 * self._lengths[j] + self.supports[j]
            idx = tree.query_ball_point(0.5 * (p1 + p2), radius)
            if not idx:
                continue
            idx = np.sort(np.asarray(idx, dtype=int))
            total[idx] += _convolve(q[idx] - p1, self._axes[j],
                                    self._lengths[j], self.weights[j],
                                    self.supports[j])
        return total - self.C

    def sample(self, point):
        return FieldSample(np.asarray(point, dtype=float),
                           field_value(self, point))


def field_value(solid, p):
    """F(p) summed over the edges whose inflated box holds `p`."""
    p = np.asarray(p, dtype=float).reshape(3)
    j = solid.index.query_point(p)
    if not len(j):
        return -solid.C
    values = _convolve(p - solid.segments[j, 0], solid._axes[j],
                       solid._lengths[j], solid.weights[j],
                       solid.supports[j])
    return float(np.sum(values)) - solid.C


RADIUS_MODES = ('dynamic', 'fixed')


def assign_radii(skeleton, r_leaf, mode='dynamic'):
    """Radius of every skeleton edge.

    In ``dynamic`` mode an edge gets ``r_leaf * sqrt(branch count of its
    start node)``, so trunk cross sections equal the sum of their
    branches' sections. In ``fixed`` mode every edge gets `r_leaf`.
    """
    if r_leaf <= 0:
        raise ValueError("Leaf radius must be positive")
    if mode not in RADIUS_MODES:
        raise ValueError("Unknown radius mode %r; choose from %s" %
                         (mode, ', '.join(RADIUS_MODES)))
    edges = skeleton.edges
    if not len(edges):
        return np.zeros(0)
    if mode == 'fixed':
        return np.full(len(edges), float(r_leaf))
    return r_leaf * np.sqrt(skeleton.counts[edges[:, 0]].astype(float))


def leaf_radius(trunk_radius, branch_count):
    """Leaf radius whose `branch_count` sections add up to the trunk's."""
    if trunk_radius <= 0 or branch_count < 1:
        raise ValueError("Need a positive trunk radius and at least one "
                         "branch, got %r and %r" %
                         (trunk_radius, branch_count))
    return float(trunk_radius) / np.sqrt(branch_count)


def strut_field(weight, R, rho):
    """Field (without -C) of an infinite straight strut at distance rho."""
    A = R * R - np.square(rho)
    return np.where(A > 0, weight * (16.0 / 15.0) *
                    np.power(np.maximum(A, 0.0), 2.5) / R ** 4, 0.0)


def strut_radius(weight, R, C):
    """Radius of the zero level set around an infinite strut.

    Returns 0 when the strut field never reaches `C`.
    """
    peak = weight * (16.0 / 15.0) * R
    if C >= peak:
        return 0.0
    A = (C * R ** 4 * 15.0 / (16.0 * weight)) ** 0.4
    return float(np.sqrt(R * R - A))


def strut_weight(radius, R, C):
    """Weight placing an infinite strut's surface at `radius`.

    Broadcasts over `radius` and `R`; every radius must lie in (0, R).
    """
    radius = np.asarray(radius, dtype=float)
    R = np.asarray(R, dtype=float)
    if np.any(radius <= 0) or np.any(radius >= R):
        raise ValueError("Strut radii must lie strictly between 0 and the "
                         "kernel support")
    return C / strut_field(1.0, R, radius)


def calibrate_iso(r_leaf, R, target_radius):
    """Iso-value C placing a leaf strut's surface at `target_radius`.

    Raises
    ------
    ValueError
        If the target is not in (0, R).
    """
    if r_leaf <= 0 or R <= 0:
        raise ValueError("Leaf weight and kernel support must be positive")
    if target_radius <= 0:
        raise ValueError("Target radius must be positive; a zero radius "
                         "puts C at the field maximum on the axis")
    if target_radius >= R:
        raise ValueError("Target radius %g is unreachable with kernel "
                         "support %g" % (target_radius, R))
    C = float(strut_field(r_leaf, R, target_radius))
    logger.debug("Calibrated C=%.6g for radius %g (R=%g, r_leaf=%g)", C,
                 target_radius, R, r_leaf)
    return C


def polygonize(solid, cell_size):
    """Triangulate the zero level set with marching cubes.

    Requires scikit-image.

    Returns
    -------
    TriMesh
        Outward oriented; empty for an empty solid.
    """
    if cell_size <= 0:
        raise ValueError("Cell size must be positive")
    if not skimage_available:
        raise ImportError("scikit-image is required to polygonize; install "
                          "curvsup[polygonize]")
    from skimage.measure import marching_cubes
    empty = TriMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=int))
    if solid.is_empty:
        return empty
    lo, hi = solid.bounds
    lo = lo - cell_size
    hi = hi + cell_size
    shape = np.ceil((hi - lo) / cell_size).astype(int) + 1
    axes = [lo[k] + cell_size * np.arange(shape[k]) for k in range(3)]
    grid = np.stack(np.meshgrid(*axes, indexing='ij'), axis=-1)
    values = solid.evaluate(grid.reshape(-1, 3)).reshape(shape)
    if values.max() <= 0:
        return empty
    verts, faces, _, _ = marching_cubes(values, level=0.0,
                                        spacing=(cell_size,) * 3)
    surface = TriMesh(verts + lo, faces)
    if surface.signed_volume < 0:
        surface = surface.flipped()
    logger.info("Polygonized solid: %r at cell %g", surface, cell_size)
    return surface
