#!/usr/bin/env python
# -*- coding: utf-8 -*-
# trim.py
"""Slim support layers by cutting them against the implicit solid."""
# Copyright (c) 2024 curvsup developers
# This file is part of curvsup, released under a BSD license.
#    See the file license.txt included with this distribution.

import os
import collections
import numpy as np
from scipy.optimize import brentq
from curvsup.mesh import TriMesh, save_obj
import logging
logger = logging.getLogger('curvsup.trim')

TrimStats = collections.namedtuple(
    'TrimStats', ['index', 'input_area', 'output_area', 'input_faces',
                  'output_faces', 'discarded_faces', 'cut_faces'])


def classify_face(values):
    """Number of strictly positive field values at the face corners.

    Examples
    --------
    >>> classify_face((1.0, -1.0, 0.0))
    1
    """
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        raise ValueError("Field values must be finite")
    return int(np.sum(values > 0))


def cut_edge(p_a, F_a, p_b, F_b, field=None, max_evals=50, xtol=1e-12):
    """Point where the field vanishes on the segment ``[p_a, p_b]``.

    Parameters
    ----------
    p_a, p_b : array_like
        Segment end points.
    F_a, F_b : float
        Field values of opposite sign at the end points.
    field : function, optional
        Maps an (n, 3) array of points to field values. Without it, or when
        root finding does not converge within `max_evals` iterations, the
        end point values are interpolated linearly.

    Returns
    -------
    numpy.ndarray
        Point strictly inside the segment.
    """
    if not F_a * F_b < 0:
        raise ValueError("Edge end values %g and %g do not change sign" %
                         (F_a, F_b))
    p_a = np.asarray(p_a, dtype=float)
    p_b = np.asarray(p_b, dtype=float)
    d = p_b - p_a
    t = F_a / (F_a - F_b)
    if field is not None:
        def along(s):
            return float(field((p_a + s * d)[None, :])[0])
        try:
            root, info = brentq(along, 0.0, 1.0, xtol=xtol,
                                maxiter=max_evals, full_output=True,
                                disp=False)
        except ValueError:
            # re-evaluated end points lost their sign change
            info = None
        if info is not None and info.converged:
            t = root
        else:
            logger.debug("Edge cut fell back to linear interpolation")
    t = min(max(t, np.nextafter(0.0, 1.0)), np.nextafter(1.0, 0.0))
    return p_a + t * d


class TrimmedLayer(object):
    """Part of a support layer inside the implicit solid.

    Attributes
    ----------
    surface : TriMesh
    index : int
    iso_value : float
    domain : str
    source_faces : numpy.ndarray
        Face of the input layer each output face came from.
    face_directions : numpy.ndarray
        Printing direction inherited from the source face.
    stats : TrimStats or None
    """

    def __init__(self, surface, index, iso_value, domain='support',
                 source_faces=None, face_directions=None, stats=None):
        self.surface = surface
        self.index = int(index)
        self.iso_value = float(iso_value)
        self.domain = domain
        f = len(surface.faces)
        self.source_faces = np.zeros(f, dtype=int) if source_faces is None \
            else np.asarray(source_faces, dtype=int).reshape(f)
        self.face_directions = np.zeros((f, 3)) if face_directions is None \
            else np.asarray(face_directions, dtype=float).reshape(f, 3)
        self.stats = stats

    def __repr__(self):
        return "TrimmedLayer(%s %d, faces=%d, area=%.3f)" % (
            self.domain, self.index, len(self.surface), self.surface.area)

    def __len__(self):
        return len(self.surface)

    @property
    def is_empty(self):
        return self.surface.is_empty

    @classmethod
    def from_layer(cls, layer):
        """Pass a layer through untouched."""
        n = len(layer.surface.faces)
        area = layer.surface.area
        stats = TrimStats(layer.index, area, area, n, n, 0, 0)
        return cls(layer.surface, layer.index, layer.iso_value, layer.domain,
                   np.arange(n), layer.face_directions, stats)


def trim_layer(layer, solid, max_evals=50):
    """Keep the part of a support layer where the implicit field is positive.

    Faces with three positive corners pass unchanged, faces with none are
    discarded, and the rest are cut at the field's zero crossing on their
    edges. A corner with F = 0 counts as non-positive and is its own cut
    point. Cut points are shared by the faces on both sides of an edge.

    Returns
    -------
    TrimmedLayer
    """
    surface = layer.surface
    n_in = len(surface.faces)
    area_in = surface.area
    empty = TrimmedLayer(TriMesh(np.zeros((0, 3)),
                                 np.zeros((0, 3), dtype=int)),
                         layer.index, layer.iso_value, layer.domain,
                         stats=TrimStats(layer.index, area_in, 0.0, n_in, 0,
                                         n_in, 0))
    if not n_in or solid.is_empty:
        return empty
    F = solid.evaluate(surface.vertices)
    positive = F > 0
    N = positive[surface.faces].sum(axis=1)
    vertices = list(surface.vertices)
    cuts = {}

    def cut(u, v):
        # u positive, v non-positive
        if F[v] == 0:
            return v
        key = (min(u, v), max(u, v))
        if key not in cuts:
            vertices.append(cut_edge(surface.vertices[u], F[u],
                                     surface.vertices[v], F[v],
                                     solid.evaluate, max_evals))
            cuts[key] = len(vertices) - 1
        return cuts[key]

    faces, source = [], []
    for f in np.flatnonzero(N > 0):
        tri = surface.faces[f]
        if N[f] == 3:
            faces.append(tuple(tri))
            source.append(f)
            continue
        # rotate cyclically: N=1 puts the positive corner first, N=2 the
        # non-positive corner last
        k = int(np.argmax(positive[tri])) if N[f] == 1 else \
            (int(np.argmin(positive[tri])) + 1) % 3
        a, b, c = np.roll(tri, -k).tolist()
        if N[f] == 1:
            new = [(a, cut(a, b), cut(a, c))]
        else:
            x_bc, x_ca = cut(b, c), cut(a, c)
            if a < b:
                new = [(a, b, x_bc), (a, x_bc, x_ca)]
            else:
                new = [(a, b, x_ca), (b, x_bc, x_ca)]
        for t in new:
            if len(set(t)) == 3:
                faces.append(t)
                source.append(f)
    if not faces:
        return empty
    faces = np.array(faces, dtype=int)
    used, inverse = np.unique(faces, return_inverse=True)
    out = TriMesh(np.array(vertices)[used], inverse.reshape(-1, 3))
    source = np.array(source, dtype=int)
    stats = TrimStats(layer.index, area_in, out.area, n_in, len(faces),
                      int(np.sum(N == 0)), int(np.sum((N > 0) & (N < 3))))
    logger.debug("Trimmed layer %d: %d -> %d faces, area %.3f -> %.3f",
                 layer.index, n_in, len(faces), area_in, out.area)
    return TrimmedLayer(out, layer.index, layer.iso_value, layer.domain,
                        source, layer.face_directions[source], stats)


def trim_stack(stack, solid, callback=None):
    """Trim every support layer of a stack against the implicit solid.

    Model layers are not touched; use :meth:`TrimmedLayer.from_layer` to
    carry them alongside.

    Returns
    -------
    list of TrimmedLayer
        One per support layer, in stack order.
    """
    out = []
    for i, layer in enumerate(stack.support_layers):
        out.append(trim_layer(layer, solid))
        if callback:
            callback(i + 1, len(stack.support_layers))
    area_in = sum(t.stats.input_area for t in out)
    area_out = sum(t.stats.output_area for t in out)
    logger.info("Trimmed %d support layers: area %.3f -> %.3f mm^2",
                len(out), area_in, area_out)
    return out


def export_trimmed_obj(layers, directory):
    """Write ``layer_trimmed_<index>.obj`` for non-empty trimmed layers."""
    paths = []
    for layer in layers:
        if layer.is_empty:
            continue
        path = os.path.join(directory, 'layer_trimmed_%d.obj' % layer.index)
        save_obj(layer.surface, path, comment='trimmed support layer %d iso '
                 '%.17g' % (layer.index, layer.iso_value))
        paths.append(path)
    return paths


def save_trimmed(layers, path):
    """Archive trimmed layers and their statistics in one ``.npz`` file."""
    data = {'count': np.array(len(layers))}
    for k, layer in enumerate(layers):
        key = 'layer_%d_' % k
        data[key + 'vertices'] = layer.surface.vertices
        data[key + 'faces'] = layer.surface.faces
        data[key + 'source_faces'] = layer.source_faces
        data[key + 'face_directions'] = layer.face_directions
        data[key + 'meta'] = np.array([layer.index, layer.iso_value])
        data[key + 'stats'] = np.array(layer.stats if layer.stats else
                                       [np.nan] * len(TrimStats._fields))
    np.savez_compressed(path, **data)


def load_trimmed(path):
    if not os.path.exists(path):
        raise FileNotFoundError("Trimmed layers %s not found" % path)
    layers = []
    with np.load(path) as data:
        for k in range(int(data['count'])):
            key = 'layer_%d_' % k
            index, iso = data[key + 'meta']
            raw = data[key + 'stats']
            stats = None if np.isnan(raw[0]) else TrimStats(
                int(raw[0]), float(raw[1]), float(raw[2]), int(raw[3]),
                int(raw[4]), int(raw[5]), int(raw[6]))
            layers.append(TrimmedLayer(
                TriMesh(data[key + 'vertices'], data[key + 'faces']),
                int(index), float(iso), 'support', data[key + 'source_faces'],
                data[key + 'face_directions'], stats))
    return layers
