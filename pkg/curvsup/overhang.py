#!/usr/bin/env python
# -*- coding: utf-8 -*-
# overhang.py
"""Overhang detection, conservative hull and support-domain assembly."""
# Copyright (c) 2024 curvsup developers
# This file is part of curvsup, released under a BSD license.
#    See the file license.txt included with this distribution.

import os
import shlex
import subprocess
import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from scipy.spatial import ConvexHull, HalfspaceIntersection, cKDTree
try:
    from scipy.spatial import QhullError
except ImportError:
    from scipy.spatial.qhull import QhullError
from curvsup.config import (
    default_turn_fraction,
    degenerate_volume,
    match_tolerance,
)
from curvsup.mesh import (
    TetMesh,
    TriMesh,
    load_tet_mesh,
    save_poly,
    signed_volumes,
)
from curvsup.util import DOWN, angle_between, normalize, rotate_towards
import logging
logger = logging.getLogger('curvsup.overhang')


def _check_alpha(alpha):
    if not 0.0 <= alpha < 90.0:
        raise ValueError("Self-support angle must lie in [0, 90) degrees, "
                         "got %r" % alpha)


class OverhangSet(object):
    """Boundary faces violating the self-support cone.

    Attributes
    ----------
    faces : numpy.ndarray
        Indices into the mesh's ``boundary_faces``.
    vertices : numpy.ndarray
        Sorted node indices touched by those faces.
    face_directions : numpy.ndarray
        Printing direction of the element owning each face.
    vertex_directions : numpy.ndarray
        Normalized mean direction of the faces incident to each vertex.
    """

    def __init__(self, faces, vertices, face_directions, vertex_directions):
        self.faces = np.asarray(faces, dtype=int)
        self.vertices = np.asarray(vertices, dtype=int)
        self.face_directions = np.asarray(face_directions, dtype=float)
        self.vertex_directions = np.asarray(vertex_directions, dtype=float)

    def __repr__(self):
        return "OverhangSet(faces=%d, vertices=%d)" % (len(self.faces),
                                                      len(self.vertices))

    def __len__(self):
        return len(self.faces)


def detect_overhangs(mesh, dirs, alpha=45.0, platform_z=0.0, tol=1e-9):
    """Find boundary faces with ``n_f . d_p + sin(alpha) <= 0``.

    Parameters
    ----------
    mesh : TetMesh
        Model domain.
    dirs : VectorField
        Printing direction per element.
    alpha : float, optional
        Self-support angle in degrees, in [0, 90). At 0 every face
        whose normal is at a right angle or more from the printing
        direction is an overhang, vertical walls included.
    platform_z : float or None, optional
        Faces lying on this plane (within `tol`) rest on the platform and are
        never overhangs. None disables the exclusion.
    tol : float, optional
        Height tolerance for the platform test.

    Returns
    -------
    OverhangSet
    """
    _check_alpha(alpha)
    faces = mesh.boundary_faces
    if len(dirs) != len(mesh.tets):
        raise ValueError("Direction field has %d vectors for %d elements" %
                         (len(dirs), len(mesh.tets)))
    p = mesh.nodes[faces]
    normals = normalize(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]))
    d = dirs.vectors[mesh.boundary_tets]
    crit = np.einsum('ij,ij->i', normals, d) + np.sin(np.radians(alpha))
    mask = crit <= 0.0
    if platform_z is not None:
        mask &= ~np.all(p[:, :, 2] <= platform_z + tol, axis=1)
    ids = np.flatnonzero(mask)
    vertices = np.unique(faces[ids])
    # mean direction of incident overhang faces per vertex
    lookup = np.searchsorted(vertices, faces[ids])
    acc = np.zeros((len(vertices), 3))
    np.add.at(acc, lookup.reshape(-1), np.repeat(d[ids], 3, axis=0))
    logger.info("Detected %d overhang faces (%d vertices) at alpha=%g",
                len(ids), len(vertices), alpha)
    return OverhangSet(ids, vertices, d[ids],
                       normalize(acc, fallback=-DOWN))


def overhang_patches(mesh, overhangs):
    """Group overhang vertices into patches of faces sharing vertices.

    Returns
    -------
    numpy.ndarray
        Patch label of each entry of ``overhangs.vertices``.
    """
    n = len(overhangs.vertices)
    if not n:
        return np.zeros(0, dtype=int)
    tri = np.searchsorted(overhangs.vertices,
                          mesh.boundary_faces[overhangs.faces])
    rows = tri.ravel()
    cols = tri[:, [1, 2, 0]].ravel()
    graph = sparse.coo_matrix((np.ones(len(rows)), (rows, cols)),
                              shape=(n, n))
    count, labels = connected_components(graph, directed=False)
    logger.debug("%d overhang vertices in %d patches", n, count)
    return labels


class Trajectory(object):
    """Descent polyline from an overhang vertex to the platform."""

    def __init__(self, points, step):
        self.points = np.asarray(points, dtype=float).reshape(-1, 3)
        self.step = float(step)

    def __repr__(self):
        return "Trajectory(points=%d, step=%g)" % (len(self.points),
                                                   self.step)

    def __len__(self):
        return len(self.points)

    @property
    def directions(self):
        return normalize(np.diff(self.points, axis=0))

    @property
    def length(self):
        return float(np.linalg.norm(np.diff(self.points, axis=0),
                                    axis=1).sum())


def trace_trajectory(start, d_p, alpha=45.0, step=1.0, platform_z=0.0,
                     turn=None, max_steps=100000):
    """Move a particle from `start` down to the platform.

    The particle starts along ``-d_p`` and after each step of length `step`
    turns towards (0, 0, -1) by ``turn`` degrees (default ``alpha / 20``),
    holding the vertical direction once reached. It stops when it is less
    than one step above the platform.

    With ``alpha = 0`` the default turn is zero, so the particle keeps its
    initial direction and must already be descending.

    Raises
    ------
    ValueError
        If the start is below the platform, `step` is not positive or the
        particle can never descend.
    """
    _check_alpha(alpha)
    start = np.asarray(start, dtype=float)
    if step <= 0:
        raise ValueError("Trajectory step must be positive, got %r" % step)
    if start[2] < platform_z:
        raise ValueError("Trajectory start z=%g lies below the platform "
                         "z=%g" % (start[2], platform_z))
    if turn is None:
        turn = alpha * default_turn_fraction
    max_turn = np.radians(turn)
    u = normalize(-np.asarray(d_p, dtype=float))
    if max_turn <= 0 and u[2] >= 0 and start[2] >= platform_z + step:
        raise ValueError("Trajectory from %s never descends: direction %s "
                         "and no turning" % (start.tolist(), u.tolist()))
    points = [start]
    p = start
    while p[2] >= platform_z + step:
        if len(points) > max_steps:
            raise ValueError("Trajectory from %s did not reach the platform "
                             "in %d steps" % (start.tolist(), max_steps))
        p = p + step * u
        points.append(p)
        if angle_between(u, DOWN) <= max_turn:
            u = DOWN.copy()
        else:
            u = rotate_towards(u, DOWN, max_turn)
    return Trajectory(points, step)


def trace_trajectories(mesh, overhangs, alpha=45.0, step=1.0, platform_z=0.0,
                       turn=None):
    """One trajectory per overhang vertex."""
    return [trace_trajectory(mesh.nodes[v], d, alpha, step, platform_z, turn)
            for v, d in zip(overhangs.vertices, overhangs.vertex_directions)]


def _oriented_hull(points):
    try:
        hull = ConvexHull(points)
    except (QhullError, ValueError) as e:
        raise ValueError("Degenerate hull input (coplanar or too few "
                         "points): %s" % str(e).splitlines()[0])
    faces = hull.simplices.copy()
    p = points[faces]
    normals = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    flip = np.einsum('ij,ij->i', normals, hull.equations[:, :3]) < 0
    faces[flip] = faces[flip][:, ::-1]
    return hull, faces


def build_conservative_hull(mesh, overhangs, trajectories, inflate=0.0):
    """Convex hull of the model nodes and all trajectory points.

    Parameters
    ----------
    mesh : TetMesh
    overhangs : OverhangSet
        Kept for provenance; the trajectories already start at its
        vertices.
    trajectories : list of Trajectory
    inflate : float, optional
        Outward offset in mm. Each hull facet plane is pushed out by this
        distance and the planes are intersected again, so every input
        point ends up at least `inflate` inside the result.

    Returns
    -------
    TriMesh
        Closed, outward oriented, convex surface.
    """
    if inflate < 0:
        raise ValueError("Inflate distance must be non-negative")
    parts = [mesh.nodes] + [t.points for t in trajectories]
    points = np.vstack(parts)
    if len(points) < 4:
        raise ValueError("Hull needs at least 4 points, got %d" % len(points))
    hull, faces = _oriented_hull(points)
    if inflate > 0:
        planes = np.unique(np.round(hull.equations, 12), axis=0)
        planes[:, 3] -= inflate
        interior = points[hull.vertices].mean(axis=0)
        try:
            corners = HalfspaceIntersection(planes, interior).intersections
        except (QhullError, ValueError) as e:
            raise ValueError("Hull inflation failed: %s" %
                             str(e).splitlines()[0])
        hull, faces = _oriented_hull(corners)
        points = corners
    ids, inverse = np.unique(faces, return_inverse=True)
    surface = TriMesh(points[ids], inverse.reshape(-1, 3))
    logger.info("Conservative hull: %d vertices, %d faces, volume %.3f mm^3 "
                "(%d overhang faces, %d trajectories)", len(ids), len(faces),
                surface.signed_volume, len(overhangs), len(trajectories))
    return surface


def hull_planes(hull):
    """(k, 4) outward unit normals and offsets, ``n . x + b <= 0`` inside."""
    try:
        planes = ConvexHull(hull.vertices).equations
    except (QhullError, ValueError) as e:
        raise ValueError("Hull surface is not a solid: %s" %
                         str(e).splitlines()[0])
    return np.unique(np.round(planes, 12), axis=0)


def clip_to_hull(envelope, hull, tol=match_tolerance, max_rounds=100):
    """Pull the envelope nodes lying outside a convex hull onto it.

    Each node more than `tol` outside is moved onto its most violated hull
    plane, round after round, until all nodes are within `tol`. Nodes
    inside keep their coordinates, so model nodes still match. Tets left
    flat or inverted are dropped together with unused nodes.

    Parameters
    ----------
    envelope : TetMesh
    hull : TriMesh
        Closed convex surface, e.g. from :func:`build_conservative_hull`.

    Returns
    -------
    TetMesh
    """
    planes = hull_planes(hull)
    nodes = envelope.nodes.copy()
    moved = np.zeros(len(nodes), dtype=bool)
    for _ in range(max_rounds):
        excess = nodes @ planes[:, :3].T + planes[:, 3]
        worst = np.argmax(excess, axis=1)
        depth = excess[np.arange(len(nodes)), worst]
        out = depth > tol
        if not np.any(out):
            break
        nodes[out] -= depth[out, None] * planes[worst[out], :3]
        moved |= out
    else:
        raise ValueError("Envelope nodes still %g mm outside the hull after "
                         "%d rounds" % (depth.max(), max_rounds))
    keep = signed_volumes(nodes, envelope.tets) > degenerate_volume
    ids, inverse = np.unique(envelope.tets[keep], return_inverse=True)
    clipped = TetMesh(nodes[ids], inverse.reshape(-1, 4))
    logger.info("Clipped envelope to the hull: %d nodes moved, %d of %d "
                "tets dropped", int(moved.sum()), int((~keep).sum()),
                len(keep))
    return clipped


class SupportDomain(object):
    """Partition of an envelope mesh into model and support tets.

    Attributes
    ----------
    envelope : TetMesh
    model : TetMesh
    model_tet_ids, support_tet_ids : numpy.ndarray
        Envelope tets matched to model tets, and the rest.
    node_map : numpy.ndarray
        Envelope node of each model node.
    interface_map : numpy.ndarray
        (k, 2) pairs ``(model_node, envelope_node)`` for the model boundary.
    support_mesh : TetMesh or None
        Compact mesh of the support tets.
    support_node_ids : numpy.ndarray
        Envelope node of each support mesh node.
    """

    def __init__(self, envelope, model, model_tet_ids, node_map):
        self.envelope = envelope
        self.model = model
        self.model_tet_ids = np.asarray(model_tet_ids, dtype=int)
        self.node_map = np.asarray(node_map, dtype=int)
        mask = np.ones(len(envelope.tets), dtype=bool)
        mask[self.model_tet_ids] = False
        self.support_tet_ids = np.flatnonzero(mask)
        bnodes = model.boundary_nodes
        self.interface_map = np.stack([bnodes, self.node_map[bnodes]], axis=1)
        if len(self.support_tet_ids):
            self.support_mesh, self.support_node_ids = \
                envelope.submesh(self.support_tet_ids)
        else:
            self.support_mesh = None
            self.support_node_ids = np.zeros(0, dtype=int)

    def __repr__(self):
        return "SupportDomain(envelope=%d tets, model=%d, support=%d)" % (
            len(self.envelope.tets), len(self.model_tet_ids),
            len(self.support_tet_ids))

    @property
    def support_interface(self):
        """(k, 2) pairs ``(support_node, model_node)`` on the interface."""
        if self.support_mesh is None:
            return np.zeros((0, 2), dtype=int)
        inverse = -np.ones(len(self.envelope.nodes), dtype=int)
        inverse[self.support_node_ids] = np.arange(len(self.support_node_ids))
        support_nodes = inverse[self.interface_map[:, 1]]
        keep = support_nodes >= 0
        return np.stack([support_nodes[keep],
                         self.interface_map[keep, 0]], axis=1)

    def interface_edges(self):
        """Envelope node pairs on model boundary faces inside the envelope.

        Faces of the model boundary that also lie on the envelope boundary
        (e.g. on the platform) are left out.
        """
        model_faces = np.sort(self.node_map[self.model.boundary_faces], axis=1)
        env_faces = np.sort(self.envelope.boundary_faces, axis=1)
        env_keys = set(map(tuple, env_faces.tolist()))
        inner = np.array([f for f in model_faces.tolist()
                          if tuple(f) not in env_keys],
                         dtype=int).reshape(-1, 3)
        edges = np.sort(np.vstack([inner[:, [0, 1]], inner[:, [1, 2]],
                                   inner[:, [0, 2]]]), axis=1)
        return np.unique(edges, axis=0)


def assemble_support_domain(model, envelope, tol=match_tolerance):
    """Identify the model tets inside an envelope mesh geometrically.

    Raises
    ------
    ValueError
        Naming the first model tet or node without an envelope
        counterpart.
    """
    node_tree = cKDTree(envelope.nodes)
    dist, node_map = node_tree.query(model.nodes)
    if np.any(dist > tol):
        k = int(np.argmax(dist))
        raise ValueError("Containment violation: model node %d at %s has no "
                         "envelope node within %g mm" %
                         (k, model.nodes[k].tolist(), tol))
    tet_tree = cKDTree(envelope.centroids)
    dist, tet_map = tet_tree.query(model.centroids)
    if np.any(dist > tol):
        k = int(np.argmax(dist))
        raise ValueError("Containment violation: model tet %d has no "
                         "envelope counterpart" % k)
    same = np.all(np.sort(node_map[model.tets], axis=1) ==
                  np.sort(envelope.tets[tet_map], axis=1), axis=1)
    if not np.all(same):
        k = int(np.argmin(same))
        raise ValueError("Containment violation: model tet %d matches "
                         "envelope tet %d by centroid but not by nodes" %
                         (k, tet_map[k]))
    if len(np.unique(tet_map)) != len(tet_map):
        raise ValueError("Containment violation: several model tets match "
                         "the same envelope tet")
    domain = SupportDomain(envelope, model, tet_map, node_map)
    logger.info("%r", domain)
    return domain


def run_tetrahedralizer(command, poly_path, timeout=None):
    """Run an external conforming tetrahedralizer on a ``.poly`` file.

    Parameters
    ----------
    command : str
        Command template; ``{poly}`` is replaced by the file path, e.g.
        ``"tetgen -pqY {poly}"``.
    poly_path : str
        Input piecewise linear complex.

    Returns
    -------
    TetMesh
        Mesh read back from ``<stem>.1.node``/``<stem>.1.ele``.
    """
    args = [a.format(poly=poly_path) for a in shlex.split(command)]
    logger.info("Running tetrahedralizer: %s", ' '.join(args))
    result = subprocess.run(args, capture_output=True, text=True,
                            timeout=timeout)
    if result.returncode != 0:
        raise RuntimeError("Tetrahedralizer failed (exit %d): %s" %
                           (result.returncode, result.stderr.strip()))
    stem = os.path.splitext(poly_path)[0] + '.1'
    return load_tet_mesh(stem)


def write_hull_poly(hull, model_boundary, path):
    """Emit the hull with the model surface as an internal constraint."""
    save_poly(hull, path, constraints=[model_boundary])
