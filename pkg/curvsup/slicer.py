#!/usr/bin/env python
# -*- coding: utf-8 -*-
# slicer.py
"""Compatible curved layers as iso-surfaces of a governing field."""
# Copyright (c) 2024 curvsup developers
# This file is part of curvsup, released under a BSD license.
#    See the file license.txt included with this distribution.

import os
import numpy as np
from curvsup.config import compatibility_tolerance
from curvsup.fields import element_gradients
from curvsup.mesh import TriMesh, save_obj
from curvsup.util import RayCaster, normalize
import logging
logger = logging.getLogger('curvsup.slicer')

DOMAINS = ('model', 'support')


def choose_iso_values(field_range, n_layers):
    """Uniformly spaced iso-values strictly inside a field range.

    Parameters
    ----------
    field_range : tuple
        (min, max) of the governing field.
    n_layers : int
        Number of layers, at least 1.

    Returns
    -------
    numpy.ndarray
        ``min + (k + 1/2) (max - min) / n`` for k = 0 .. n - 1.

    Examples
    --------
    >>> choose_iso_values((0.0, 10.0), 5)
    array([1., 3., 5., 7., 9.])
    """
    lo, hi = float(field_range[0]), float(field_range[1])
    if n_layers < 1:
        raise ValueError("At least one layer is required, got %r" % n_layers)
    if not hi > lo:
        raise ValueError("Empty field range [%g, %g]" % (lo, hi))
    h = (hi - lo) / n_layers
    return lo + (np.arange(n_layers) + 0.5) * h


def extended_iso_values(model_range, support_range, n_layers):
    """Model iso-values plus support-only values below the model minimum.

    The extra values continue the model spacing downwards while they stay
    above the support field minimum.
    """
    iso = choose_iso_values(model_range, n_layers)
    h = (model_range[1] - model_range[0]) / float(n_layers)
    below = []
    value = iso[0] - h
    while value > support_range[0]:
        below.append(value)
        value -= h
    return np.concatenate([np.array(below[::-1]), iso]), len(below)


class Layer(object):
    """One curved layer of a single domain.

    Attributes
    ----------
    surface : TriMesh
        Oriented so that face normals point towards increasing field.
    iso_value : float
    index : int
        Position in the layer stack, bottom-up.
    domain : str
        ``'model'`` or ``'support'``.
    vertex_edges : numpy.ndarray
        (n, 2) sorted node pair of the tet edge holding each vertex.
    vertex_tets : numpy.ndarray
        A source tet per vertex.
    vertex_bary : numpy.ndarray
        (n, 4) barycentric weights of each vertex in its source tet.
    vertex_normals : numpy.ndarray
        Normalized field gradient of the source tet.
    face_tets : numpy.ndarray
        Source tet per face.
    face_directions : numpy.ndarray
        Normalized field gradient of the source tet per face.
    """

    def __init__(self, surface, iso_value, index, domain, vertex_edges=None,
                 vertex_tets=None, vertex_bary=None, vertex_normals=None,
                 face_tets=None, face_directions=None):
        if domain not in DOMAINS:
            raise ValueError("Layer domain must be one of %s, got %r" %
                             (DOMAINS, domain))
        n, f = len(surface.vertices), len(surface.faces)
        self.surface = surface
        self.iso_value = float(iso_value)
        self.index = int(index)
        self.domain = domain
        self.vertex_edges = _array(vertex_edges, (n, 2), int)
        self.vertex_tets = _array(vertex_tets, (n,), int)
        self.vertex_bary = _array(vertex_bary, (n, 4), float)
        self.vertex_normals = _array(vertex_normals, (n, 3), float)
        self.face_tets = _array(face_tets, (f,), int)
        self.face_directions = _array(face_directions, (f, 3), float)
        self._caster = None

    def __repr__(self):
        return "Layer(%s %d, iso=%g, faces=%d)" % (
            self.domain, self.index, self.iso_value, len(self.surface))

    def __len__(self):
        return len(self.surface)

    @classmethod
    def empty(cls, iso_value, index, domain):
        return cls(TriMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=int)),
                   iso_value, index, domain)

    @property
    def is_empty(self):
        return self.surface.is_empty

    def first_hit(self, origin, direction, t_max=np.inf):
        """First intersection of a ray with this layer, or None."""
        if self._caster is None:
            self._caster = RayCaster(self.surface.vertices,
                                     self.surface.faces)
        return self._caster.first_hit(origin, direction, t_max)


def _array(value, shape, dtype):
    if value is None:
        return np.zeros(shape, dtype=dtype)
    return np.asarray(value, dtype=dtype).reshape(shape)


def _case_edges(mesh, above):
    """Tet edges cut by the surface, three or four per cut tet.

    Returns
    -------
    tuple
        (tet ids, (t, 3, 2) node pairs) for triangles. Quads are split into
        two triangles sharing the first corner.
    """
    count = above.sum(axis=1)
    tets_out, pairs_out = [], []
    # one node alone on its side: single triangle
    for lone_above in (True, False):
        sel = np.flatnonzero(count == (1 if lone_above else 3))
        if not len(sel):
            continue
        key = ~above[sel] if lone_above else above[sel]
        perm = np.argsort(key, axis=1, kind='stable')
        nodes = np.take_along_axis(mesh.tets[sel], perm, axis=1)
        lone = nodes[:, :1]
        tri = np.stack([np.repeat(lone, 3, axis=1), nodes[:, 1:]], axis=2)
        tets_out.append(sel)
        pairs_out.append(tri)
    sel = np.flatnonzero(count == 2)
    if len(sel):
        perm = np.argsort(~above[sel], axis=1, kind='stable')
        a, b, c, d = np.take_along_axis(mesh.tets[sel], perm, axis=1).T
        quad = np.stack([np.stack([a, c], axis=1), np.stack([a, d], axis=1),
                         np.stack([b, d], axis=1), np.stack([b, c], axis=1)],
                        axis=1)
        tets_out.extend([sel, sel])
        pairs_out.extend([quad[:, [0, 1, 2]], quad[:, [0, 2, 3]]])
    if not tets_out:
        return np.zeros(0, dtype=int), np.zeros((0, 3, 2), dtype=int)
    tets = np.concatenate(tets_out)
    pairs = np.concatenate(pairs_out)
    order = np.argsort(tets, kind='stable')
    return tets[order], pairs[order]


def _interpolate(nodes, values, edges, iso):
    """Crossing points on sorted node pairs, measured from the lower value.

    The result only depends on the coordinates and values of the two
    nodes, so meshes sharing an edge produce identical points.
    """
    ga, gb = values[edges[:, 0]], values[edges[:, 1]]
    swap = gb < ga
    lo = np.where(swap, edges[:, 1], edges[:, 0])
    hi = np.where(swap, edges[:, 0], edges[:, 1])
    t = (iso - values[lo]) / (values[hi] - values[lo])
    points = nodes[lo] + t[:, None] * (nodes[hi] - nodes[lo])
    return points, lo, hi, t


def _slice(mesh, field, iso, gradients=None):
    values = np.asarray(getattr(field, 'values', field), dtype=float)
    if len(values) != len(mesh.nodes):
        raise ValueError("Field has %d values for %d nodes" %
                         (len(values), len(mesh.nodes)))
    # equality counts as above
    above = values[mesh.tets] >= iso
    tets, pairs = _case_edges(mesh, above)
    if not len(tets):
        return None
    keys = np.sort(pairs.reshape(-1, 2), axis=1)
    edges, first, inverse = np.unique(keys, axis=0, return_index=True,
                                      return_inverse=True)
    faces = inverse.reshape(-1, 3)
    points, lo, hi, t = _interpolate(mesh.nodes, values, edges, iso)
    if gradients is None:
        gradients = element_gradients(mesh, values)
    face_grad = gradients[tets]
    normals = np.cross(points[faces[:, 1]] - points[faces[:, 0]],
                       points[faces[:, 2]] - points[faces[:, 0]])
    flip = np.einsum('ij,ij->i', normals, face_grad) < 0
    faces[flip] = faces[flip][:, ::-1]
    vertex_tets = np.repeat(tets, 3)[first]
    local = mesh.tets[vertex_tets]
    bary = (local == lo[:, None]) * (1.0 - t)[:, None] + \
        (local == hi[:, None]) * t[:, None]
    return dict(points=points, faces=faces, edges=edges, tets=tets,
                vertex_tets=vertex_tets, bary=bary,
                vertex_normals=normalize(gradients[vertex_tets]),
                face_directions=normalize(face_grad))


def extract_iso_surface(mesh, field, iso):
    """Marching-tetrahedra iso-surface of a linear field.

    Each tet contributes 0, 1 or 2 triangles. Vertices are shared between
    tets through their tet edge, so the surface is watertight inside the
    domain and open along its boundary. Nodes whose value equals `iso` are
    treated as above it.

    Returns
    -------
    TriMesh
        Empty when `iso` lies outside the field range.
    """
    out = _slice(mesh, field, iso)
    if out is None:
        return TriMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=int))
    return TriMesh(out['points'], out['faces'])


def extract_layer(mesh, field, iso, index=0, domain='model',
                  gradients=None):
    """Iso-surface with the per-vertex provenance used downstream."""
    out = _slice(mesh, field, iso, gradients)
    if out is None:
        return Layer.empty(iso, index, domain)
    return Layer(TriMesh(out['points'], out['faces']), iso, index, domain,
                 vertex_edges=out['edges'], vertex_tets=out['vertex_tets'],
                 vertex_bary=out['bary'],
                 vertex_normals=out['vertex_normals'],
                 face_tets=out['tets'],
                 face_directions=out['face_directions'])


class LayerStack(object):
    """Model and support layers sharing one increasing iso-value list."""

    def __init__(self, model_layers, support_layers, iso_values):
        self.model_layers = list(model_layers)
        self.support_layers = list(support_layers)
        self.iso_values = np.asarray(iso_values, dtype=float)
        if not (len(self.model_layers) == len(self.support_layers) ==
                len(self.iso_values)):
            raise ValueError("Layer stack needs one model and one support "
                             "layer per iso-value")
        if np.any(np.diff(self.iso_values) <= 0):
            raise ValueError("Iso-values must be strictly increasing")

    def __repr__(self):
        return "LayerStack(layers=%d, model=%d, support=%d)" % (
            len(self), self.model_count, self.support_count)

    def __len__(self):
        return len(self.iso_values)

    @property
    def model_count(self):
        """Number of non-empty model layers."""
        return sum(1 for layer in self.model_layers if not layer.is_empty)

    @property
    def support_count(self):
        """Number of non-empty support layers."""
        return sum(1 for layer in self.support_layers if not layer.is_empty)

    def export_obj(self, directory):
        """Write ``layer_<domain>_<index>.obj`` files for non-empty layers."""
        paths = []
        for layer in self.model_layers + self.support_layers:
            if layer.is_empty:
                continue
            path = os.path.join(directory, 'layer_%s_%d.obj' %
                                (layer.domain, layer.index))
            save_obj(layer.surface, path,
                     comment='%s layer %d iso %.17g' %
                     (layer.domain, layer.index, layer.iso_value))
            paths.append(path)
        return paths

    def save_npz(self, path):
        """Archive every layer with its provenance in one ``.npz`` file."""
        data = {'iso_values': self.iso_values}
        for layer in self.model_layers + self.support_layers:
            key = '%s_%d_' % (layer.domain, layer.index)
            data[key + 'vertices'] = layer.surface.vertices
            data[key + 'faces'] = layer.surface.faces
            for name in _FIELDS:
                data[key + name] = getattr(layer, name)
        np.savez_compressed(path, **data)

    @classmethod
    def load_npz(cls, path):
        if not os.path.exists(path):
            raise FileNotFoundError("Layer stack %s not found" % path)
        with np.load(path) as data:
            iso = data['iso_values']
            layers = {}
            for domain in DOMAINS:
                layers[domain] = []
                for i, value in enumerate(iso):
                    key = '%s_%d_' % (domain, i)
                    if key + 'vertices' not in data:
                        raise ValueError("%s: missing %s layer %d" %
                                         (path, domain, i))
                    surface = TriMesh(data[key + 'vertices'],
                                      data[key + 'faces'])
                    extra = dict((name, data[key + name])
                                 for name in _FIELDS)
                    layers[domain].append(
                        Layer(surface, value, i, domain, **extra))
        return cls(layers['model'], layers['support'], iso)


_FIELDS = ('vertex_edges', 'vertex_tets', 'vertex_bary', 'vertex_normals',
           'face_tets', 'face_directions')


def _check_interface_values(domain, model_field, support_field, tol):
    pairs = domain.support_interface
    if not len(pairs):
        return
    diff = np.abs(support_field.values[pairs[:, 0]] -
                  model_field.values[pairs[:, 1]])
    if np.any(diff > tol):
        k = int(np.argmax(diff))
        raise ValueError("Model and support fields disagree by %g at "
                         "interface node %d" % (diff[k], pairs[k, 1]))


def _edge_points(layer, to_envelope, interface):
    """Map interface-edge vertices of a layer to their envelope edge."""
    if layer.is_empty:
        return {}
    env = np.sort(to_envelope[layer.vertex_edges], axis=1)
    out = {}
    for k, key in enumerate(map(tuple, env.tolist())):
        if key in interface:
            out[key] = layer.surface.vertices[k]
    return out


def check_compatibility(stack, domain, tol=compatibility_tolerance):
    """Verify that model and support layers share their interface vertices.

    Raises
    ------
    ValueError
        Naming the layer and an envelope node of the first mismatch.
    """
    if domain.support_mesh is None:
        return
    interface = set(map(tuple, domain.interface_edges().tolist()))
    for i, (m, s) in enumerate(zip(stack.model_layers,
                                   stack.support_layers)):
        model_pts = _edge_points(m, domain.node_map, interface)
        support_pts = _edge_points(s, domain.support_node_ids, interface)
        if set(model_pts) != set(support_pts):
            missing = sorted(set(model_pts) ^ set(support_pts))[0]
            raise ValueError("Layer %d: interface vertex on edge of node %d "
                             "is missing from one domain" % (i, missing[0]))
        for key, p in model_pts.items():
            gap = np.linalg.norm(p - support_pts[key])
            if gap > tol:
                raise ValueError("Layer %d: interface vertex at node %d "
                                 "differs by %g mm" % (i, key[0], gap))


def slice_compatible(domain, model_field, support_field, n_layers,
                     iso_values=None, extend_below=True, callback=None):
    """Slice model and support domains at shared iso-values.

    Parameters
    ----------
    domain : SupportDomain
    model_field : ScalarField
        Field on the model nodes.
    support_field : ScalarField or None
        Field on the support mesh nodes; ignored when the support is empty.
    n_layers : int
        Number of model layers (uniform spacing over the model range).
    iso_values : array_like, optional
        Explicit strictly increasing values replacing the uniform spacing.
    extend_below : bool, optional
        Add support-only layers below the model field minimum.
    callback : function, optional
        Called as ``callback(i, total)`` after each layer.

    Returns
    -------
    LayerStack
    """
    has_support = domain.support_mesh is not None
    if has_support:
        if support_field is None:
            raise ValueError("A support field is required for a non-empty "
                             "support domain")
        _check_interface_values(domain, model_field, support_field,
                                compatibility_tolerance)
    if iso_values is not None:
        iso = np.asarray(iso_values, dtype=float).reshape(-1)
        if not len(iso) or np.any(np.diff(iso) <= 0):
            raise ValueError("Iso-values must be a non-empty strictly "
                             "increasing list")
        extra = 0
    elif extend_below and has_support:
        iso, extra = extended_iso_values(model_field.range,
                                         support_field.range, n_layers)
    else:
        iso, extra = choose_iso_values(model_field.range, n_layers), 0
    model_grad = element_gradients(domain.model, model_field)
    support_grad = element_gradients(domain.support_mesh, support_field) \
        if has_support else None
    model_layers, support_layers = [], []
    for i, value in enumerate(iso):
        model_layers.append(extract_layer(domain.model, model_field, value,
                                          i, 'model', model_grad))
        if has_support:
            support_layers.append(extract_layer(
                domain.support_mesh, support_field, value, i, 'support',
                support_grad))
        else:
            support_layers.append(Layer.empty(value, i, 'support'))
        logger.debug("Layer %d iso=%g: %d model faces, %d support faces",
                     i, value, len(model_layers[-1]), len(support_layers[-1]))
        if callback:
            callback(i + 1, len(iso))
    stack = LayerStack(model_layers, support_layers, iso)
    check_compatibility(stack, domain)
    logger.info("Sliced %d layers (%d support-only below the model)",
                len(iso), extra)
    return stack
