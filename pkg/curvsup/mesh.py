#!/usr/bin/env python
# -*- coding: utf-8 -*-
# mesh.py
"""Tetrahedral and triangle meshes, boundary extraction and file I/O."""
# Copyright (c) 2024 curvsup developers
# This file is part of curvsup, released under a BSD license.
#    See the file license.txt included with this distribution.

import os
from collections import deque
import numpy as np
from warnings import warn
from curvsup.config import degenerate_volume
from curvsup.util import normalize, triangle_normals
import logging
logger = logging.getLogger('curvsup.mesh')

# Outward faces of a positively oriented tet (0, 1, 2, 3)
TET_FACES = np.array([[1, 2, 3], [0, 3, 2], [0, 1, 3], [0, 2, 1]])
TET_EDGES = np.array([[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]])


def signed_volumes(nodes, tets):
    """Signed volumes of tetrahedra via the 3x3 edge determinant / 6."""
    p = np.asarray(nodes, dtype=float)[np.asarray(tets, dtype=int)]
    edges = p[:, 1:] - p[:, :1]
    return np.linalg.det(edges) / 6.0


class TetMesh(object):
    """A volumetric domain made of linear tetrahedra.

    Parameters
    ----------
    nodes : array_like
        (n, 3) node coordinates in mm.
    tets : array_like
        (m, 4) node indices per tetrahedron.

    Notes
    -----
    Negatively oriented tets are flipped by swapping their last two nodes.
    Degenerate tets (volume below 1e-12 mm^3) are kept with a warning.
    """

    def __init__(self, nodes, tets):
        self.nodes = np.array(nodes, dtype=float).reshape(-1, 3)
        self.tets = np.array(tets, dtype=int).reshape(-1, 4)
        n = len(self.nodes)
        if len(self.tets) and (self.tets.min() < 0 or self.tets.max() >= n):
            bad = int(np.argmax((self.tets < 0).any(axis=1) |
                                (self.tets >= n).any(axis=1)))
            raise ValueError(
                "Tet %d references a node outside 0..%d: %s" %
                (bad, n - 1, self.tets[bad].tolist()))
        vol = signed_volumes(self.nodes, self.tets)
        flip = vol < 0
        if np.any(flip):
            logger.debug("Reorienting %d negatively oriented tets",
                         int(flip.sum()))
            self.tets[flip] = self.tets[flip][:, [0, 1, 3, 2]]
            vol[flip] = -vol[flip]
        degenerate = vol < degenerate_volume
        if np.any(degenerate):
            warn("%d degenerate tets (volume < %g mm^3) in mesh" %
                 (int(degenerate.sum()), degenerate_volume))
        self.volumes = vol
        self._boundary = None

    def __repr__(self):
        return "TetMesh(nodes=%d, tets=%d)" % (len(self.nodes), len(self.tets))

    def __eq__(self, other):
        if other.__class__ is not self.__class__:
            return NotImplemented
        return (self.nodes.shape == other.nodes.shape and
                np.array_equal(self.tets, other.tets) and
                np.allclose(self.nodes, other.nodes, rtol=0, atol=1e-9))

    @property
    def node_count(self):
        return len(self.nodes)

    @property
    def tet_count(self):
        return len(self.tets)

    @property
    def centroids(self):
        """Centroid of each tet."""
        return self.nodes[self.tets].mean(axis=1)

    @property
    def bounds(self):
        """(min corner, max corner) of the node coordinates."""
        return self.nodes.min(axis=0), self.nodes.max(axis=0)

    @property
    def volume(self):
        return float(self.volumes.sum())

    def _faces(self):
        if self._boundary is None:
            all_faces = self.tets[:, TET_FACES].reshape(-1, 3)
            owner = np.repeat(np.arange(len(self.tets)), 4)
            if not len(all_faces):
                self._boundary = (np.zeros((0, 3), dtype=int),
                                  np.zeros(0, dtype=int))
                return self._boundary
            keys = np.sort(all_faces, axis=1)
            _, inverse, counts = np.unique(keys, axis=0, return_inverse=True,
                                           return_counts=True)
            inverse = inverse.reshape(-1)
            if np.any(counts > 2):
                bad = keys[np.flatnonzero(counts[inverse] > 2)[0]]
                raise ValueError(
                    "Non-manifold tet connectivity: face %s is shared by "
                    "more than two tets" % bad.tolist())
            single = counts[inverse] == 1
            self._boundary = (all_faces[single], owner[single])
        return self._boundary

    @property
    def boundary_faces(self):
        """Outward oriented boundary triangles (node index triples)."""
        return self._faces()[0]

    @property
    def boundary_tets(self):
        """Owning tet of each boundary face."""
        return self._faces()[1]

    @property
    def boundary_nodes(self):
        return np.unique(self.boundary_faces)

    def edges(self):
        """Unique undirected node pairs of all tet edges."""
        e = np.sort(self.tets[:, TET_EDGES].reshape(-1, 2), axis=1)
        return np.unique(e, axis=0)

    def translated(self, offset):
        """Return a copy moved by `offset`."""
        return TetMesh(self.nodes + np.asarray(offset, dtype=float),
                       self.tets)

    def platform_offset(self, platform_z=0.0):
        """Translation that puts the lowest node on the platform plane."""
        if not len(self.nodes):
            return np.zeros(3)
        return np.array([0.0, 0.0, platform_z - self.nodes[:, 2].min()])

    def submesh(self, tet_ids):
        """Extract the given tets as a compact mesh.

        Returns
        -------
        tuple
            (TetMesh, node_ids) where ``node_ids[k]`` is the node of this
            mesh that became node k of the submesh.
        """
        tets = self.tets[np.asarray(tet_ids, dtype=int)]
        node_ids, inverse = np.unique(tets, return_inverse=True)
        return (TetMesh(self.nodes[node_ids], inverse.reshape(-1, 4)),
                node_ids)


def tet_volume(mesh, tet_index):
    """Signed volume of one tetrahedron of `mesh` in mm^3.

    Raises
    ------
    IndexError
        If `tet_index` is not a valid tet.
    """
    if not 0 <= tet_index < len(mesh.tets):
        raise IndexError("Tet index %d out of range (0..%d)" %
                         (tet_index, len(mesh.tets) - 1))
    return float(signed_volumes(mesh.nodes, mesh.tets[[tet_index]])[0])


def extract_boundary(mesh):
    """Closed, outward oriented boundary surface of a tet mesh.

    The returned surface only contains the boundary nodes; its
    ``vertex_ids`` attribute maps them back to the tet mesh.

    Raises
    ------
    ValueError
        If a face is shared by more than two tets.
    """
    faces = mesh.boundary_faces
    ids, inverse = np.unique(faces, return_inverse=True)
    return TriMesh(mesh.nodes[ids], inverse.reshape(-1, 3), vertex_ids=ids)


class TriMesh(object):
    """Triangle surface with shared-edge adjacency.

    Parameters
    ----------
    vertices : array_like
        (n, 3) vertex coordinates.
    faces : array_like
        (f, 3) vertex indices.
    vertex_ids : array_like, optional
        Provenance of each vertex in a parent mesh.
    """

    def __init__(self, vertices, faces, vertex_ids=None):
        self.vertices = np.array(vertices, dtype=float).reshape(-1, 3)
        self.faces = np.array(faces, dtype=int).reshape(-1, 3)
        if len(self.faces) and (self.faces.min() < 0 or
                                self.faces.max() >= len(self.vertices)):
            raise ValueError("Face index out of range (%d vertices)" %
                             len(self.vertices))
        self.vertex_ids = None if vertex_ids is None else \
            np.asarray(vertex_ids, dtype=int)
        self._neighbors = None
        self._manifold = True

    def __repr__(self):
        return "TriMesh(vertices=%d, faces=%d)" % (len(self.vertices),
                                                   len(self.faces))

    def __len__(self):
        return len(self.faces)

    @property
    def is_empty(self):
        return len(self.faces) == 0

    @property
    def face_normals(self):
        """Unit face normals (right-hand rule)."""
        return normalize(triangle_normals(self.vertices, self.faces))

    @property
    def face_areas(self):
        return 0.5 * np.linalg.norm(
            triangle_normals(self.vertices, self.faces), axis=1)

    @property
    def area(self):
        return float(self.face_areas.sum())

    @property
    def face_centroids(self):
        return self.vertices[self.faces].mean(axis=1)

    @property
    def signed_volume(self):
        """Enclosed volume by the divergence theorem (closed surfaces)."""
        p = self.vertices[self.faces]
        return float(np.einsum('ij,ij->i', p[:, 0],
                               np.cross(p[:, 1], p[:, 2])).sum() / 6.0)

    def _directed_edges(self):
        f = self.faces
        return np.stack([f, np.roll(f, -1, axis=1)], axis=2).reshape(-1, 2)

    @property
    def edges(self):
        """Unique undirected edges."""
        if not len(self.faces):
            return np.zeros((0, 2), dtype=int)
        return np.unique(np.sort(self._directed_edges(), axis=1), axis=0)

    @property
    def neighbors(self):
        """(f, 3) face across edge k = (f[k], f[k+1]); -1 on boundary."""
        if self._neighbors is None:
            self._build_adjacency()
        return self._neighbors

    @property
    def is_manifold(self):
        if self._neighbors is None:
            self._build_adjacency()
        return self._manifold

    def _build_adjacency(self):
        nf = len(self.faces)
        nbr = -np.ones((nf, 3), dtype=int)
        if nf:
            directed = self._directed_edges()
            keys = np.sort(directed, axis=1)
            _, inverse, counts = np.unique(keys, axis=0, return_inverse=True,
                                           return_counts=True)
            inverse = inverse.reshape(-1)
            self._manifold = not np.any(counts > 2)
            order = np.argsort(inverse, kind='stable')
            grouped = inverse[order]
            starts = np.flatnonzero(np.r_[True, grouped[1:] != grouped[:-1]])
            # pair up slots sharing an edge seen exactly twice
            starts = starts[counts[grouped[starts]] == 2]
            a, b = order[starts], order[starts + 1]
            nbr[a // 3, a % 3] = b // 3
            nbr[b // 3, b % 3] = a // 3
        self._neighbors = nbr

    @property
    def boundary_edges(self):
        """Directed edges (in face order) that belong to a single face."""
        if not len(self.faces):
            return np.zeros((0, 2), dtype=int)
        directed = self._directed_edges()
        mask = (self.neighbors.reshape(-1) < 0)
        if not self.is_manifold:
            keys = np.sort(directed, axis=1)
            _, inverse, counts = np.unique(keys, axis=0, return_inverse=True,
                                           return_counts=True)
            mask = counts[inverse.reshape(-1)] == 1
        return directed[mask]

    @property
    def is_closed(self):
        return self.is_manifold and not len(self.boundary_edges)

    @property
    def euler_characteristic(self):
        """V - E + F over the referenced vertices."""
        used = len(np.unique(self.faces))
        return used - len(self.edges) + len(self.faces)

    def boundary_loops(self):
        """Chain boundary edges into loops.

        Returns
        -------
        list of tuple
            ``(vertices, faces)`` per loop: the loop's vertex indices in
            traversal order and, for each outgoing edge, the face owning it.
            Traversal follows the face orientation, so the surface lies to
            the left of the loop seen from the normal side.
        """
        if not len(self.faces):
            return []
        directed = self._directed_edges()
        owner = np.repeat(np.arange(len(self.faces)), 3)
        nbr = self.neighbors.reshape(-1)
        slots = np.flatnonzero(nbr < 0)
        outgoing = {}
        for s in slots:
            outgoing.setdefault(int(directed[s, 0]), []).append(int(s))
        used = set()
        loops = []
        for s in slots:
            s = int(s)
            if s in used:
                continue
            verts, faces = [], []
            current = s
            while current not in used:
                used.add(current)
                verts.append(int(directed[current, 0]))
                faces.append(int(owner[current]))
                nxt = [c for c in outgoing.get(int(directed[current, 1]), [])
                       if c not in used]
                if not nxt:
                    break
                current = nxt[0]
            loops.append((np.array(verts), np.array(faces)))
        return loops

    def ring(self, face, n):
        """Faces within `n` edge-adjacency hops of `face` (sorted)."""
        seen = {int(face)}
        frontier = deque([(int(face), 0)])
        nbr = self.neighbors
        while frontier:
            f, depth = frontier.popleft()
            if depth >= n:
                continue
            for g in nbr[f]:
                if g >= 0 and g not in seen:
                    seen.add(int(g))
                    frontier.append((int(g), depth + 1))
        return np.array(sorted(seen))

    def compacted(self):
        """Copy without unreferenced vertices."""
        ids, inverse = np.unique(self.faces, return_inverse=True)
        return TriMesh(self.vertices[ids], inverse.reshape(-1, 3),
                       vertex_ids=ids)

    def flipped(self):
        return TriMesh(self.vertices, self.faces[:, ::-1],
                       vertex_ids=self.vertex_ids)


####################################################
# File I/O
####################################################

def _stem(path):
    root, ext = os.path.splitext(str(path))
    if ext in ('.node', '.ele'):
        return root
    return str(path)


def _records(path):
    """Yield (line number, tokens) for non-blank, non-comment lines."""
    with open(path) as f:
        for number, line in enumerate(f, 1):
            line = line.split('#', 1)[0].strip()
            if line:
                yield number, line.split()


def _parse_header(records, path, minimum):
    try:
        number, tokens = next(records)
    except StopIteration:
        raise ValueError("%s: file is empty" % path)
    try:
        values = [int(t) for t in tokens]
    except ValueError:
        raise ValueError("%s: line %d: malformed header" % (path, number))
    if len(values) < minimum:
        raise ValueError("%s: line %d: header needs %d fields" %
                         (path, number, minimum))
    return number, values


def load_tet_mesh(path):
    """Load a TetGen style ``.node``/``.ele`` pair.

    Parameters
    ----------
    path : str
        Either file of the pair, or their common stem.

    Returns
    -------
    TetMesh
        Node numbering is auto-detected (0 or 1 based) from the first node
        index.

    Raises
    ------
    ValueError
        On malformed lines, inconsistent counts or out of range indices;
        the message names the file and line number.
    """
    stem = _stem(path)
    node_path, ele_path = stem + '.node', stem + '.ele'
    for p in (node_path, ele_path):
        if not os.path.exists(p):
            raise FileNotFoundError("Tet mesh file not found: %s" % p)

    records = _records(node_path)
    number, header = _parse_header(records, node_path, 2)
    count, dim = header[0], header[1]
    if dim != 3:
        raise ValueError("%s: line %d: expected dimension 3, got %d" %
                         (node_path, number, dim))
    index = {}
    nodes = np.zeros((count, 3))
    base = None
    for k in range(count):
        try:
            number, tokens = next(records)
        except StopIteration:
            raise ValueError("%s: expected %d nodes, found %d" %
                             (node_path, count, k))
        try:
            label = int(tokens[0])
            nodes[k] = [float(t) for t in tokens[1:4]]
        except (ValueError, IndexError):
            raise ValueError("%s: line %d: malformed node record" %
                             (node_path, number))
        if len(tokens) < 4:
            raise ValueError("%s: line %d: malformed node record" %
                             (node_path, number))
        if base is None:
            base = label
        if label in index:
            raise ValueError("%s: line %d: duplicate node %d" %
                             (node_path, number, label))
        index[label] = k

    records = _records(ele_path)
    number, header = _parse_header(records, ele_path, 2)
    count, per_tet = header[0], header[1]
    if per_tet < 4:
        raise ValueError("%s: line %d: expected 4 nodes per tet" %
                         (ele_path, number))
    tets = np.zeros((count, 4), dtype=int)
    for k in range(count):
        try:
            number, tokens = next(records)
        except StopIteration:
            raise ValueError("%s: expected %d tets, found %d" %
                             (ele_path, count, k))
        try:
            labels = [int(t) for t in tokens[1:5]]
        except ValueError:
            raise ValueError("%s: line %d: malformed tet record" %
                             (ele_path, number))
        if len(labels) != 4:
            raise ValueError("%s: line %d: malformed tet record" %
                             (ele_path, number))
        for label in labels:
            if label not in index:
                raise ValueError(
                    "%s: line %d: node %d index out of range (%d nodes)" %
                    (ele_path, number, label, len(nodes)))
        tets[k] = [index[label] for label in labels]
    logger.debug("Loaded %s: %d nodes, %d tets (%d-based)", stem, len(nodes),
                 len(tets), base if base is not None else 0)
    return TetMesh(nodes, tets)


def save_tet_mesh(mesh, path):
    """Write `mesh` as a 1-based ``.node``/``.ele`` pair."""
    stem = _stem(path)
    with open(stem + '.node', 'w') as f:
        f.write("%d 3 0 0\n" % len(mesh.nodes))
        for i, p in enumerate(mesh.nodes):
            f.write("%d %.17g %.17g %.17g\n" % (i + 1, p[0], p[1], p[2]))
    with open(stem + '.ele', 'w') as f:
        f.write("%d 4 0\n" % len(mesh.tets))
        for i, t in enumerate(mesh.tets + 1):
            f.write("%d %d %d %d %d\n" % (i + 1, t[0], t[1], t[2], t[3]))


def load_obj(path):
    """Read ``v`` and ``f`` records of a Wavefront OBJ file."""
    vertices, faces = [], []
    for number, tokens in _records(path):
        try:
            if tokens[0] == 'v':
                vertices.append([float(t) for t in tokens[1:4]])
            elif tokens[0] == 'f':
                idx = [int(t.split('/')[0]) for t in tokens[1:]]
                idx = [i - 1 if i > 0 else len(vertices) + i for i in idx]
                # fan triangulation of polygons
                for k in range(1, len(idx) - 1):
                    faces.append([idx[0], idx[k], idx[k + 1]])
        except (ValueError, IndexError):
            raise ValueError("%s: line %d: malformed record" % (path, number))
    return TriMesh(np.array(vertices).reshape(-1, 3),
                   np.array(faces, dtype=int).reshape(-1, 3))


def save_obj(mesh, path, comment=None):
    """Write a TriMesh as OBJ (1-based ``v``/``f`` records)."""
    with open(path, 'w') as f:
        if comment:
            f.write("# %s\n" % comment)
        for v in mesh.vertices:
            f.write("v %.17g %.17g %.17g\n" % (v[0], v[1], v[2]))
        for t in mesh.faces + 1:
            f.write("f %d %d %d\n" % (t[0], t[1], t[2]))


def save_poly(mesh, path, constraints=()):
    """Write a TetGen ``.poly`` piecewise linear complex.

    Parameters
    ----------
    mesh : TriMesh
        Outer boundary (e.g. the conservative hull).
    path : str
        Output file.
    constraints : sequence of TriMesh, optional
        Internal surfaces that the tetrahedralizer must conform to, such as
        the model boundary.
    """
    surfaces = [mesh] + list(constraints)
    points = np.vstack([s.vertices for s in surfaces])
    offsets = np.cumsum([0] + [len(s.vertices) for s in surfaces])
    facets = np.vstack([s.faces + o for s, o in zip(surfaces, offsets)])
    with open(path, 'w') as f:
        f.write("# part 1: nodes\n")
        f.write("%d 3 0 0\n" % len(points))
        for i, p in enumerate(points):
            f.write("%d %1.16g %1.16g %1.16g\n" % (i + 1, p[0], p[1], p[2]))
        f.write("# part 2: facets\n")
        f.write("%d 0\n" % len(facets))
        for t in facets + 1:
            f.write("1\n3 %d %d %d\n" % (t[0], t[1], t[2]))
        f.write("# part 3: holes\n0\n")
        f.write("# part 4: regions\n0\n")
