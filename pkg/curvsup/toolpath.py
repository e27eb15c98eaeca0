#!/usr/bin/env python
# -*- coding: utf-8 -*-
# toolpath.py
"""Contour-parallel toolpaths on curved layers and the waypoint program."""
# Copyright (c) 2024 curvsup developers
# This file is part of curvsup, released under a BSD license.
#    See the file license.txt included with this distribution.

import os
import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import dijkstra
from curvsup.config import default_width, default_layer_thickness
from curvsup.util import normalize
import logging
logger = logging.getLogger('curvsup.toolpath')

RECORD_FORMAT = "%.4f %.4f %.4f %.6f %.6f %.6f %.6f %d"


class Contour(object):
    """Polyline on a layer with a printing orientation per point.

    Parameters
    ----------
    points : array_like
        (n, 3) polyline; a closed contour does not repeat its first point.
    orientations : array_like
        (n, 3) unit vectors.
    closed : bool
    """

    def __init__(self, points, orientations, closed=True, layer=0,
                 domain='support'):
        self.points = np.asarray(points, dtype=float).reshape(-1, 3)
        self.orientations = normalize(
            np.asarray(orientations, dtype=float).reshape(-1, 3))
        if len(self.points) != len(self.orientations):
            raise ValueError("Contour needs one orientation per point")
        self.closed = bool(closed)
        self.layer = int(layer)
        self.domain = domain

    def __repr__(self):
        return "Contour(points=%d, closed=%s, length=%.3f)" % (
            len(self.points), self.closed, self.length)

    def __len__(self):
        return len(self.points)

    def _path(self):
        if self.closed and len(self.points):
            return np.vstack([self.points, self.points[:1]])
        return self.points

    @property
    def segment_lengths(self):
        return np.linalg.norm(np.diff(self._path(), axis=0), axis=1)

    @property
    def length(self):
        return float(self.segment_lengths.sum())

    def reversed(self):
        return Contour(self.points[::-1], self.orientations[::-1],
                       self.closed, self.layer, self.domain)

    def resampled(self, max_segment):
        """Split segments longer than `max_segment` evenly."""
        if max_segment <= 0:
            raise ValueError("Maximum segment length must be positive")
        path = self._path()
        if len(path) < 2:
            return self
        points, orients = [], []
        count = len(path) - 1
        for k in range(count):
            a, b = path[k], path[k + 1]
            pieces = max(int(np.ceil(np.linalg.norm(b - a) / max_segment)),
                         1)
            t = np.arange(pieces)[:, None] / float(pieces)
            points.append(a + t * (b - a))
            orients.append(np.repeat(self.orientations[k][None, :], pieces,
                                     axis=0))
        if not self.closed:
            points.append(path[-1:])
            orients.append(self.orientations[-1:])
        return Contour(np.vstack(points), np.vstack(orients), self.closed,
                       self.layer, self.domain)


def boundary_contours(layer, max_segment=None):
    """Closed boundary loops of a layer, counter-clockwise about its normal.

    Parameters
    ----------
    layer : TrimmedLayer or Layer
    max_segment : float, optional
        Resample loops so no segment is longer.

    Returns
    -------
    list of Contour
    """
    surface = layer.surface
    contours = []
    for verts, faces in surface.boundary_loops():
        if len(verts) < 3:
            continue
        c = Contour(surface.vertices[verts], layer.face_directions[faces],
                    True, layer.index, layer.domain)
        contours.append(c.resampled(max_segment) if max_segment else c)
    return contours


def boundary_distance(surface):
    """Shortest edge-graph distance from every vertex to the boundary."""
    n = len(surface.vertices)
    boundary = np.unique(surface.boundary_edges)
    if not len(boundary):
        return np.full(n, np.inf)
    edges = surface.edges
    lengths = np.linalg.norm(surface.vertices[edges[:, 0]] -
                             surface.vertices[edges[:, 1]], axis=1)
    graph = sparse.coo_matrix((lengths, (edges[:, 0], edges[:, 1])),
                              shape=(n, n)).tocsr()
    return dijkstra(graph, directed=False, indices=boundary, min_only=True)


def _level_segments(surface, dist, level):
    """Directed iso-segments with the region ``dist >= level`` on the left.

    Returns
    -------
    list of tuple
        ``(start edge key, end edge key, face)``.
    """
    inside = dist[surface.faces] >= level
    count = inside.sum(axis=1)
    segments = []
    for f in np.flatnonzero((count == 1) | (count == 2)):
        tri = surface.faces[f]
        if count[f] == 1:
            k = int(np.argmax(inside[f]))
        else:
            k = int(np.argmin(inside[f]))
        a, b, c = np.roll(tri, -k).tolist()
        ab = (min(a, b), max(a, b))
        ca = (min(a, c), max(a, c))
        if count[f] == 1:
            segments.append((ab, ca, f))
        else:
            segments.append((ca, ab, f))
    return segments


def _chain(segments):
    """Link directed segments that share edge keys into polylines."""
    following = {}
    for s in segments:
        following.setdefault(s[0], s)
    ends = set(s[1] for s in segments)
    used = set()
    chains = []
    starts = [s for s in segments if s[0] not in ends] + list(segments)
    for s in starts:
        if s[0] in used:
            continue
        keys, faces = [], []
        current = s
        closed = False
        while True:
            used.add(current[0])
            keys.append(current[0])
            faces.append(current[2])
            nxt = following.get(current[1])
            if nxt is None:
                keys.append(current[1])
                faces.append(current[2])
                break
            if nxt[0] in used:
                closed = nxt[0] == keys[0]
                if not closed:
                    keys.append(current[1])
                    faces.append(current[2])
                break
            current = nxt
        chains.append((keys, faces, closed))
    return chains


def offset_contours(layer, spacing, max_segment=None):
    """Interior contours at distances spacing, 2 spacing, ... from the
    layer boundary.

    Distances are shortest paths over the layer's edge graph; each level
    set is cut out of the faces by linear interpolation.

    Returns
    -------
    list of Contour
        Innermost last. Patches thinner than `spacing` give none.
    """
    if spacing <= 0:
        raise ValueError("Contour spacing must be positive")
    surface = layer.surface
    if surface.is_empty:
        return []
    dist = boundary_distance(surface)
    finite = dist[np.isfinite(dist)]
    if not len(finite):
        return []
    contours = []
    level = spacing
    while level < finite.max():
        for keys, faces, closed in _chain(_level_segments(surface, dist,
                                                          level)):
            e = np.array(keys)
            da, db = dist[e[:, 0]], dist[e[:, 1]]
            t = (level - da) / (db - da)
            pa, pb = surface.vertices[e[:, 0]], surface.vertices[e[:, 1]]
            points = pa + t[:, None] * (pb - pa)
            if len(points) < 2:
                continue
            c = Contour(points, layer.face_directions[faces], closed,
                        layer.index, layer.domain)
            contours.append(c.resampled(max_segment) if max_segment else c)
        level += spacing
    return contours


def layer_contours(layer, spacing, max_segment=None):
    """Boundary loops followed by the interior offsets of one layer."""
    return (boundary_contours(layer, max_segment) +
            offset_contours(layer, spacing, max_segment))


class WaypointProgram(object):
    """Ordered waypoint records ``x y z nx ny nz e travel``.

    ``e`` is the extruded volume of the segment ending at the waypoint in
    mm^3, ``travel`` marks a non-extruding move to the waypoint.
    """

    def __init__(self, records=None, header=None):
        self.records = np.zeros((0, 8)) if records is None else \
            np.asarray(records, dtype=float).reshape(-1, 8)
        self.header = list(header or [])

    def __repr__(self):
        return "WaypointProgram(waypoints=%d, e=%.3f)" % (
            len(self), self.total_extrusion)

    def __len__(self):
        return len(self.records)

    def __eq__(self, other):
        if other.__class__ is not self.__class__:
            return NotImplemented
        return self.dumps() == other.dumps()

    @property
    def positions(self):
        return self.records[:, :3]

    @property
    def orientations(self):
        return self.records[:, 3:6]

    @property
    def extrusion(self):
        return self.records[:, 6]

    @property
    def travel(self):
        return self.records[:, 7].astype(int)

    @property
    def total_extrusion(self):
        return float(self.extrusion.sum())

    def dumps(self):
        lines = ['# ' + h if not h.startswith('#') else h
                 for h in self.header]
        for r in self.records:
            lines.append(RECORD_FORMAT % (r[0], r[1], r[2], r[3], r[4], r[5],
                                          r[6], int(r[7])))
        return ''.join(line + '\n' for line in lines)

    @classmethod
    def parse(cls, text, source='<string>'):
        header, records = [], []
        for number, line in enumerate(text.split('\n'), 1):
            if not line:
                continue
            if line.startswith('#'):
                header.append(line)
                continue
            parts = line.split(' ')
            if len(parts) != 8:
                raise ValueError("%s: line %d: expected 8 fields, got %d" %
                                 (source, number, len(parts)))
            try:
                values = [float(x) for x in parts[:7]] + [int(parts[7])]
            except ValueError:
                raise ValueError("%s: line %d: malformed waypoint %r" %
                                 (source, number, line))
            if values[7] not in (0, 1):
                raise ValueError("%s: line %d: travel flag must be 0 or 1" %
                                 (source, number))
            if values[6] < 0:
                raise ValueError("%s: line %d: negative extrusion" %
                                 (source, number))
            records.append(values)
        return cls(records, header)

    def save(self, path):
        with open(path, 'w', newline='\n') as f:
            f.write(self.dumps())

    @classmethod
    def load(cls, path):
        if not os.path.exists(path):
            raise FileNotFoundError("Waypoint file %s not found" % path)
        with open(path, newline='') as f:
            return cls.parse(f.read(), path)


def _order_greedy(contours, position):
    """Nearest-endpoint chaining; open contours may be reversed."""
    remaining = list(contours)
    ordered = []
    while remaining:
        if position is None:
            best, flip = 0, False
        else:
            best, flip, dist = 0, False, np.inf
            for k, c in enumerate(remaining):
                d0 = np.linalg.norm(c.points[0] - position)
                if d0 < dist:
                    best, flip, dist = k, False, d0
                if not c.closed:
                    d1 = np.linalg.norm(c.points[-1] - position)
                    if d1 < dist:
                        best, flip, dist = k, True, d1
        c = remaining.pop(best)
        c = c.reversed() if flip else c
        ordered.append(c)
        position = c.points[0] if c.closed else c.points[-1]
    return ordered, position


def emit_waypoints(layers_contours, width=default_width,
                   thickness=default_layer_thickness):
    """Serialize contours into a waypoint program.

    Parameters
    ----------
    layers_contours : list of list of Contour
        Contours per layer, bottom-up.
    width, thickness : float
        Bead size in mm; a segment of length L extrudes ``L * width *
        thickness``.

    Returns
    -------
    WaypointProgram
        The first waypoint of every contour is a travel move with zero
        extrusion; closed contours end by returning to their first point.
    """
    if width <= 0 or thickness <= 0:
        raise ValueError("Bead width and thickness must be positive")
    records = []
    position = None
    for contours in layers_contours:
        ordered, position = _order_greedy(
            [c for c in contours if len(c)], position)
        for c in ordered:
            pts, nrm = c.points, c.orientations
            if c.closed:
                pts = np.vstack([pts, pts[:1]])
                nrm = np.vstack([nrm, nrm[:1]])
            seg = np.r_[0.0, np.linalg.norm(np.diff(pts, axis=0), axis=1)]
            for k in range(len(pts)):
                records.append(list(pts[k]) + list(nrm[k]) +
                               [seg[k] * width * thickness,
                                1 if k == 0 else 0])
    header = ["curvsup waypoints: x y z nx ny nz e travel",
              "e = segment length x width x thickness [mm^3]",
              "width %.4f thickness %.4f" % (width, thickness)]
    program = WaypointProgram(records, header)
    logger.info("Emitted %r", program)
    return program
