#!/usr/bin/env python
# -*- coding: utf-8 -*-
# fields.py
"""Governing scalar fields and printing-direction vector fields."""
# Copyright (c) 2024 curvsup developers
# This file is part of curvsup, released under a BSD license.
#    See the file license.txt included with this distribution.

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import spsolve
from scipy.spatial import cKDTree
from warnings import warn
from curvsup.config import (
    degenerate_volume,
    match_tolerance,
    solver_tolerance,
)
from curvsup.mesh import TET_FACES
from curvsup.util import normalize
import logging
logger = logging.getLogger('curvsup.fields')

UP = np.array([0.0, 0.0, 1.0])


class ScalarField(object):
    """One governing-field value per tet mesh node."""

    def __init__(self, values):
        self.values = np.array(values, dtype=float).reshape(-1)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("Scalar field contains non-finite values")

    def __repr__(self):
        if not len(self.values):
            return "ScalarField(empty)"
        return "ScalarField(n=%d, range=[%g, %g])" % (
            len(self.values), self.values.min(), self.values.max())

    def __len__(self):
        return len(self.values)

    def __eq__(self, other):
        if other.__class__ is not self.__class__:
            return NotImplemented
        return np.array_equal(self.values, other.values)

    @property
    def range(self):
        """(min, max) of the field."""
        return float(self.values.min()), float(self.values.max())

    def save(self, path):
        """Write one value per line, in node order (``.field``)."""
        np.savetxt(path, self.values, fmt='%.17g')

    @classmethod
    def load(cls, path, count=None):
        """Read a ``.field`` file; `count` checks the node count."""
        values = _read_rows(path, 1).reshape(-1)
        if count is not None and len(values) != count:
            raise ValueError("%s: %d values for %d nodes" %
                             (path, len(values), count))
        return cls(values)


class VectorField(object):
    """One unit printing direction per tet element.

    Zero vectors are replaced by (0, 0, 1) with a warning.
    """

    def __init__(self, vectors):
        v = np.array(vectors, dtype=float).reshape(-1, 3)
        zero = np.linalg.norm(v, axis=1) <= 1e-12
        if np.any(zero):
            warn("%d zero-norm target vectors replaced by (0, 0, 1)" %
                 int(zero.sum()))
        self.vectors = normalize(v, fallback=UP)

    def __repr__(self):
        return "VectorField(n=%d)" % len(self.vectors)

    def __len__(self):
        return len(self.vectors)

    def save(self, path):
        """Write one ``x y z`` row per element (``.vec``)."""
        np.savetxt(path, self.vectors, fmt='%.17g')

    @classmethod
    def load(cls, path, count=None):
        vectors = _read_rows(path, 3)
        if count is not None and len(vectors) != count:
            raise ValueError("%s: %d vectors for %d elements" %
                             (path, len(vectors), count))
        return cls(vectors)


def _read_rows(path, width):
    rows = []
    with open(path) as f:
        for number, line in enumerate(f, 1):
            line = line.split('#', 1)[0].strip()
            if not line:
                continue
            try:
                values = [float(t) for t in line.split()]
            except ValueError:
                raise ValueError("%s: line %d: malformed value" %
                                 (path, number))
            if len(values) != width:
                raise ValueError("%s: line %d: expected %d values" %
                                 (path, number, width))
            rows.append(values)
    return np.array(rows, dtype=float).reshape(-1, width)


####################################################
# Gradient operator
####################################################

def gradient_coefficients(mesh):
    """Per-tet gradients of the four linear shape functions.

    The gradient of node i's shape function is
    ``-(q1 - q0) x (q2 - q0) / (6 v_e)`` where (q0, q1, q2) is the outward
    face opposite node i.

    Returns
    -------
    numpy.ndarray
        (m, 4, 3) array; the field gradient of tet e is
        ``coeffs[e].T @ g[tets[e]]``.

    Raises
    ------
    ValueError
        If a tet volume is below 1e-12 mm^3.
    """
    if np.any(mesh.volumes < degenerate_volume):
        bad = int(np.argmin(mesh.volumes))
        raise ValueError("Degenerate element %d (volume %g mm^3)" %
                         (bad, mesh.volumes[bad]))
    p = mesh.nodes[mesh.tets]
    q = p[:, TET_FACES]
    cross = np.cross(q[:, :, 1] - q[:, :, 0], q[:, :, 2] - q[:, :, 0])
    return -cross / (6.0 * mesh.volumes[:, None, None])


def gradient_operator(mesh):
    """Sparse (3m, n) matrix mapping node values to stacked gradients."""
    coeffs = gradient_coefficients(mesh)
    m = len(mesh.tets)
    rows = (3 * np.arange(m)[:, None, None] +
            np.arange(3)[None, None, :]).repeat(4, axis=1)
    cols = np.broadcast_to(mesh.tets[:, :, None], (m, 4, 3))
    return sparse.csr_matrix(
        (coeffs.reshape(-1), (rows.reshape(-1), cols.reshape(-1))),
        shape=(3 * m, len(mesh.nodes)))


def element_gradient(mesh, field, tet_index):
    """Constant gradient of the linear interpolant over one tet.

    Parameters
    ----------
    mesh : TetMesh
    field : ScalarField or array_like
        Node values.
    tet_index : int

    Returns
    -------
    numpy.ndarray
        3-vector.
    """
    values = getattr(field, 'values', field)
    if not 0 <= tet_index < len(mesh.tets):
        raise IndexError("Tet index %d out of range" % tet_index)
    vol = mesh.volumes[tet_index]
    if vol < degenerate_volume:
        raise ValueError("Degenerate element %d (volume %g mm^3)" %
                         (tet_index, vol))
    p = mesh.nodes[mesh.tets[tet_index]]
    g = np.asarray(values, dtype=float)[mesh.tets[tet_index]]
    grad = np.zeros(3)
    for i, (a, b, c) in enumerate(TET_FACES):
        grad -= g[i] * np.cross(p[b] - p[a], p[c] - p[a])
    return grad / (6.0 * vol)


def element_gradients(mesh, field):
    """Gradients of all tets as an (m, 3) array."""
    values = np.asarray(getattr(field, 'values', field), dtype=float)
    coeffs = gradient_coefficients(mesh)
    return np.einsum('eik,ei->ek', coeffs, values[mesh.tets])


####################################################
# Least-squares fit
####################################################

def _weights(mesh, weighting):
    if weighting in (None, 'uniform'):
        return np.ones(len(mesh.tets))
    if weighting == 'volume':
        return mesh.volumes / mesh.volumes.mean()
    raise ValueError("Unknown weighting %r (uniform or volume)" % weighting)


def objective(mesh, field, target, weighting=None):
    """Sum over elements of w_e * |grad G(x_e) - v_e|^2."""
    residual = element_gradients(mesh, field) - target.vectors
    w = _weights(mesh, weighting)
    return float(np.sum(w * np.sum(residual ** 2, axis=1)))


def objective_gradient(mesh, field, target, weighting=None):
    """Derivative of :func:`objective` with respect to the node values."""
    values = np.asarray(getattr(field, 'values', field), dtype=float)
    B = gradient_operator(mesh)
    w = np.repeat(_weights(mesh, weighting), 3)
    residual = B @ values - target.vectors.reshape(-1)
    return 2.0 * (B.T @ (w * residual))


def _components(mesh):
    """Connected components of the node graph of a tet mesh."""
    edges = mesh.edges()
    n = len(mesh.nodes)
    graph = sparse.coo_matrix(
        (np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(n, n))
    return connected_components(graph, directed=False)


def check_connected(mesh):
    """Raise ValueError unless the tets form one connected component."""
    count, labels = _components(mesh)
    if count > 1:
        raise ValueError("Mesh is disconnected: %d components" % count)
    return labels


def _solve(mesh, target, fixed_nodes, fixed_values, weighting):
    """Minimize the fit objective with some node values held fixed."""
    B = gradient_operator(mesh).tocsc()
    w = sparse.diags(np.repeat(_weights(mesh, weighting), 3))
    A = (B.T @ w @ B).tocsr()
    b = B.T @ (w @ target.vectors.reshape(-1))
    n = len(mesh.nodes)
    values = np.zeros(n)
    values[fixed_nodes] = fixed_values
    free = np.ones(n, dtype=bool)
    free[fixed_nodes] = False
    if not np.any(free):
        return values
    A_ff = A[free][:, free].tocsc()
    rhs = b[free] - A[free][:, ~free] @ values[~free]
    x = spsolve(A_ff, rhs)
    scale = max(np.linalg.norm(rhs), 1e-300)
    residual = np.linalg.norm(A_ff @ x - rhs) / scale
    for step in range(3):
        if residual < solver_tolerance:
            break
        # iterative refinement
        x = x + spsolve(A_ff, rhs - A_ff @ x)
        residual = np.linalg.norm(A_ff @ x - rhs) / scale
    if residual >= solver_tolerance:
        raise RuntimeError(
            "Least-squares solve did not reach relative residual %g "
            "(got %g)" % (solver_tolerance, residual))
    logger.debug("Field solve: %d free nodes, relative residual %.3g",
                 int(free.sum()), residual)
    values[free] = x
    return values


def fit_field(mesh, target, anchor=None, weighting=None):
    """Fit a governing field whose gradients follow a target vector field.

    Minimizes the sum over elements of ``|grad G(x_e) - v_e|^2``.

    Parameters
    ----------
    mesh : TetMesh
        Connected tet mesh.
    target : VectorField
        One unit vector per element.
    anchor : tuple, optional
        ``(node, value)`` pinning the free additive constant. Defaults to
        the lowest node holding its own z coordinate.
    weighting : str, optional
        ``'uniform'`` (default) or ``'volume'`` element weights.

    Returns
    -------
    ScalarField

    Raises
    ------
    ValueError
        If the mesh is disconnected or the target size mismatches.
    """
    if len(target) != len(mesh.tets):
        raise ValueError("Target has %d vectors for %d elements" %
                         (len(target), len(mesh.tets)))
    check_connected(mesh)
    if anchor is None:
        node = int(np.argmin(mesh.nodes[:, 2]))
        anchor = (node, float(mesh.nodes[node, 2]))
    node, value = int(anchor[0]), float(anchor[1])
    if not 0 <= node < len(mesh.nodes):
        raise IndexError("Anchor node %d out of range" % node)
    values = _solve(mesh, target, np.array([node]), np.array([value]),
                    weighting)
    return ScalarField(values)


def field_from_height(mesh):
    """Height field G = z with its (vertical) gradient directions."""
    field = ScalarField(mesh.nodes[:, 2])
    return field, VectorField(element_gradients(mesh, field))


def uniform_direction_field(mesh, direction):
    """Constant printing direction on every element."""
    d = np.broadcast_to(np.asarray(direction, dtype=float),
                        (len(mesh.tets), 3))
    return VectorField(d)


def direction_field(mesh, field):
    """Normalized element gradients of a governing field."""
    return VectorField(element_gradients(mesh, field))


def extrapolate_field(model, model_field, support, interface_map,
                      weighting=None):
    """Extend a model field into the support domain.

    Each support element targets the direction of the nearest model
    boundary element (by centroid distance); the field is then fitted with
    the interface node values held at the model's values.

    Parameters
    ----------
    model : TetMesh
    model_field : ScalarField
    support : TetMesh
    interface_map : array_like
        (k, 2) pairs ``(support_node, model_node)``.
    weighting : str, optional
        Element weighting passed to the fit.

    Returns
    -------
    ScalarField
        Values on the support mesh nodes.

    Raises
    ------
    ValueError
        For an empty interface map, mismatched interface coordinates or a
        support component without interface nodes.
    """
    pairs = np.asarray(interface_map, dtype=int).reshape(-1, 2)
    if not len(pairs):
        raise ValueError("Interface map is empty")
    gap = np.linalg.norm(support.nodes[pairs[:, 0]] -
                         model.nodes[pairs[:, 1]], axis=1)
    if np.any(gap > match_tolerance):
        k = int(np.argmax(gap))
        raise ValueError(
            "Interface node %d (model node %d) differs by %g mm" %
            (pairs[k, 0], pairs[k, 1], gap[k]))

    boundary_tets = np.unique(model.boundary_tets)
    dirs = normalize(element_gradients(model, model_field)[boundary_tets],
                     fallback=UP)
    tree = cKDTree(model.centroids[boundary_tets])
    _, nearest = tree.query(support.centroids)
    target = VectorField(dirs[nearest])

    labels = _components(support)[1]
    pinned = np.unique(labels[pairs[:, 0]])
    if len(pinned) < labels.max() + 1:
        raise ValueError(
            "%d support components have no interface nodes" %
            (labels.max() + 1 - len(pinned)))
    values = _solve(support, target, pairs[:, 0],
                    model_field.values[pairs[:, 1]], weighting)
    return ScalarField(values)
