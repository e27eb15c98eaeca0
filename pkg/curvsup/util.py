#!/usr/bin/env python
# -*- coding: utf-8 -*-
# util.py
"""Geometric utility functions that don't really belong anywhere."""
# Copyright (c) 2024 curvsup developers
# This file is part of curvsup, released under a BSD license.
#    See the file license.txt included with this distribution.

import numpy as np
import logging
logger = logging.getLogger('curvsup.util')

DOWN = np.array([0.0, 0.0, -1.0])


def normalize(vectors, fallback=None):
    """Return unit vectors along the last axis.

    Parameters
    ----------
    vectors : array_like
        A single 3-vector or an (n, 3) array.
    fallback : array_like, optional
        Vector used where the norm vanishes. If not given, zero vectors are
        returned unchanged.

    Returns
    -------
    numpy.ndarray
        Normalized copy of `vectors`.
    """
    v = np.array(vectors, dtype=float)
    norms = np.linalg.norm(v, axis=-1, keepdims=True)
    zero = norms[..., 0] <= 1e-300
    out = np.divide(v, norms, out=np.zeros_like(v), where=~zero[..., None])
    if fallback is not None and np.any(zero):
        out[zero] = fallback
    return out


def angle_between(u, v):
    """Angle in radians between two vectors (or rows of two arrays)."""
    u = normalize(u)
    v = normalize(v)
    cos = np.clip(np.sum(u * v, axis=-1), -1.0, 1.0)
    sin = np.linalg.norm(np.cross(u, v), axis=-1)
    return np.arctan2(sin, cos)


def rotate_towards(u, target, max_angle):
    """Rotate `u` towards `target` by at most `max_angle` radians.

    The rotation takes place in the plane spanned by the two vectors. When
    they are antiparallel the plane is undefined and the x axis (or y axis
    for vectors along x) is used to pick one.

    Parameters
    ----------
    u : array_like
        Unit start direction.
    target : array_like
        Unit goal direction.
    max_angle : float
        Largest rotation in radians.

    Returns
    -------
    numpy.ndarray
        Unit vector. Equals `target` when the angle between the inputs does
        not exceed `max_angle`.
    """
    u = normalize(u)
    target = normalize(target)
    theta = float(angle_between(u, target))
    if theta <= max_angle:
        return target.copy()
    axis = np.cross(u, target)
    if np.linalg.norm(axis) < 1e-12:
        helper = np.array([1.0, 0.0, 0.0])
        if abs(u[0]) > 0.9:
            helper = np.array([0.0, 1.0, 0.0])
        axis = np.cross(u, helper)
    axis = normalize(axis)
    # Rodrigues with axis perpendicular to u
    rotated = u * np.cos(max_angle) + np.cross(axis, u) * np.sin(max_angle)
    return normalize(rotated)


def triangle_normals(vertices, faces):
    """Unnormalized normals (twice the area vectors) of triangles."""
    v = np.asarray(vertices, dtype=float)
    f = np.asarray(faces, dtype=int).reshape(-1, 3)
    return np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])


def ray_triangle_intersect(origin, direction, v0, v1, v2, eps=1e-9,
                           t_min=1e-9):
    """Intersect one ray with many triangles (Moller-Trumbore).

    Parameters
    ----------
    origin, direction : array_like
        Ray origin and direction (need not be unit length).
    v0, v1, v2 : numpy.ndarray
        (n, 3) triangle corners.
    eps : float, optional
        Barycentric slack so that hits on shared edges are not lost.
    t_min : float, optional
        Smallest accepted ray parameter. Hits closer than this are ignored
        so that a ray leaving a surface does not hit it again.

    Returns
    -------
    numpy.ndarray
        Ray parameter per triangle, NaN where the ray misses.
    """
    o = np.asarray(origin, dtype=float)
    d = np.asarray(direction, dtype=float)
    e1 = v1 - v0
    e2 = v2 - v0
    pvec = np.cross(d, e2)
    det = np.einsum('ij,ij->i', e1, pvec)
    ok = np.abs(det) > 1e-14
    inv = np.divide(1.0, det, out=np.zeros_like(det), where=ok)
    tvec = o - v0
    u = np.einsum('ij,ij->i', tvec, pvec) * inv
    qvec = np.cross(tvec, e1)
    v = np.dot(qvec, d) * inv
    t = np.einsum('ij,ij->i', e2, qvec) * inv
    hit = ok & (u >= -eps) & (v >= -eps) & (u + v <= 1.0 + eps) & (t > t_min)
    return np.where(hit, t, np.nan)


class AABBTree(object):
    """Bounding volume hierarchy over axis-aligned boxes.

    Boxes are split at the median of their centers along the widest axis
    until at most `leaf_size` boxes remain in a node.
    """

    def __init__(self, lower, upper, leaf_size=8, pad=1e-9):
        self.lower = np.asarray(lower, dtype=float).reshape(-1, 3) - pad
        self.upper = np.asarray(upper, dtype=float).reshape(-1, 3) + pad
        self.leaf_size = max(int(leaf_size), 1)
        self._lo = []
        self._hi = []
        self._children = []
        self._items = []
        if len(self.lower):
            self._build(np.arange(len(self.lower)))
        logger.debug("Built AABB tree: %d boxes, %d nodes",
                     len(self.lower), len(self._lo))

    def __len__(self):
        return len(self.lower)

    def _build(self, ids):
        node = len(self._lo)
        self._lo.append(self.lower[ids].min(axis=0))
        self._hi.append(self.upper[ids].max(axis=0))
        self._children.append(None)
        self._items.append(None)
        if len(ids) <= self.leaf_size:
            self._items[node] = ids
            return node
        centers = 0.5 * (self.lower[ids] + self.upper[ids])
        axis = int(np.argmax(centers.max(axis=0) - centers.min(axis=0)))
        order = ids[np.argsort(centers[:, axis], kind='stable')]
        half = len(order) // 2
        left = self._build(order[:half])
        right = self._build(order[half:])
        self._children[node] = (left, right)
        return node

    def query_point(self, point):
        """Indices (ascending) of boxes containing `point`."""
        if not len(self.lower):
            return np.zeros(0, dtype=int)
        p = np.asarray(point, dtype=float)
        found = []
        stack = [0]
        while stack:
            node = stack.pop()
            if np.any(p < self._lo[node]) or np.any(p > self._hi[node]):
                continue
            if self._children[node] is None:
                ids = self._items[node]
                inside = np.all((self.lower[ids] <= p) &
                                (self.upper[ids] >= p), axis=1)
                found.append(ids[inside])
            else:
                stack.extend(self._children[node])
        if not found:
            return np.zeros(0, dtype=int)
        return np.sort(np.concatenate(found))

    def query_ray(self, origin, direction, t_max=np.inf):
        """Indices (ascending) of boxes a ray may touch before `t_max`."""
        if not len(self.lower):
            return np.zeros(0, dtype=int)
        o = np.asarray(origin, dtype=float)
        d = np.asarray(direction, dtype=float)
        parallel = np.abs(d) < 1e-300
        with np.errstate(divide='ignore'):
            inv = np.where(parallel, 0.0, 1.0 / np.where(parallel, 1.0, d))
        found = []
        stack = [0]
        while stack:
            node = stack.pop()
            if not _ray_box(o, inv, parallel, self._lo[node], self._hi[node],
                            t_max):
                continue
            if self._children[node] is None:
                found.append(self._items[node])
            else:
                stack.extend(self._children[node])
        if not found:
            return np.zeros(0, dtype=int)
        return np.sort(np.concatenate(found))


def _ray_box(origin, inv, parallel, lo, hi, t_max):
    """Slab test of a ray against one box."""
    if np.any(parallel & ((origin < lo) | (origin > hi))):
        return False
    t1 = (lo - origin) * inv
    t2 = (hi - origin) * inv
    near = np.where(parallel, -np.inf, np.minimum(t1, t2))
    far = np.where(parallel, np.inf, np.maximum(t1, t2))
    enter = max(near.max(), 0.0)
    leave = min(far.min(), t_max)
    return enter <= leave


class RayCaster(object):
    """First-hit ray queries against a triangle surface."""

    def __init__(self, vertices, faces):
        self.vertices = np.asarray(vertices, dtype=float).reshape(-1, 3)
        self.faces = np.asarray(faces, dtype=int).reshape(-1, 3)
        tri = self.vertices[self.faces]
        self.tree = AABBTree(tri.min(axis=1), tri.max(axis=1))

    def first_hit(self, origin, direction, t_max=np.inf):
        """Nearest intersection of a ray with the surface.

        Returns
        -------
        tuple or None
            ``(t, face, point)`` of the closest hit, or None on a miss.
            Ties are resolved towards the lowest face index.
        """
        if not len(self.faces):
            return None
        candidates = self.tree.query_ray(origin, direction, t_max)
        if not len(candidates):
            return None
        tri = self.vertices[self.faces[candidates]]
        t = ray_triangle_intersect(origin, direction,
                                   tri[:, 0], tri[:, 1], tri[:, 2])
        if np.all(np.isnan(t)):
            return None
        k = int(np.nanargmin(t))
        if t[k] > t_max:
            return None
        t_hit = float(t[k])
        point = np.asarray(origin, dtype=float) + \
            t_hit * np.asarray(direction, dtype=float)
        return t_hit, int(candidates[k]), point
