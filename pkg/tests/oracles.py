#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""Brute-force and analytic reference computations for the test cases."""
# oracles.py
# Copyright (c) 2024 curvsup developers
#
# Nothing in here imports curvsup: every value is recomputed from raw
# arrays with loops, quadrature or dense linear algebra.

import collections
import itertools
import numpy
from numpy.polynomial.legendre import leggauss

OracleResult = collections.namedtuple(
    'OracleResult', ['value', 'method', 'tolerance'])


def quadrature_edge_field(p, edge, weight, R, n_nodes=64):
    """Gauss-Legendre integral of ``weight * (1 - d^2/R^2)^2`` over an edge.

    The edge is split where the distance to `p` crosses R so that every
    piece carries a polynomial integrand (or zero).
    """
    p = numpy.asarray(p, dtype=float)
    p1, p2 = numpy.asarray(edge, dtype=float).reshape(2, 3)
    length = numpy.sqrt(numpy.sum((p2 - p1) ** 2))
    axis = (p2 - p1) / length
    # |p1 + t axis - p|^2 = t^2 - 2 t b + c
    b = numpy.dot(p - p1, axis)
    c = numpy.dot(p - p1, p - p1)
    breaks = [0.0, length]
    for root in numpy.roots([1.0, -2.0 * b, c - R * R]):
        if abs(root.imag) < 1e-14 and 0.0 < root.real < length:
            breaks.append(float(root.real))
    breaks = sorted(breaks)
    x, w = leggauss(n_nodes)
    total = 0.0
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        if hi - lo <= 0:
            continue
        t = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
        d2 = t * t - 2.0 * t * b + c
        f = numpy.where(d2 <= R * R, (1.0 - d2 / (R * R)) ** 2, 0.0)
        total += 0.5 * (hi - lo) * numpy.sum(w * f)
    return OracleResult(weight * total, 'gauss-legendre-%d' % n_nodes,
                        1e-12)


def _segment_distance(p, seg):
    a, b = numpy.asarray(seg, dtype=float).reshape(2, 3)
    d = b - a
    t = min(max(numpy.dot(p - a, d) / numpy.dot(d, d), 0.0), 1.0)
    q = a + t * d - p
    return numpy.sqrt(numpy.dot(q, q))


def quadrature_field(points, segments, weights, R, C, n_nodes=16):
    """Convolution field minus C at many points, edge by edge.

    Edges at distance R or more contribute nothing and are skipped.
    """
    values = []
    for p in numpy.asarray(points, dtype=float).reshape(-1, 3):
        total = 0.0
        for seg, w in zip(segments, weights):
            if _segment_distance(p, seg) >= R:
                continue
            total += quadrature_edge_field(p, seg, w, R, n_nodes).value
        values.append(total - C)
    return numpy.array(values)


def brute_ray_layers(origin, direction, vertices, faces, eps=1e-9):
    """Nearest ray hit over every triangle, solving a 3x3 system each.

    Returns
    -------
    OracleResult
        value is ``(t, face, point)`` or None.
    """
    o = numpy.asarray(origin, dtype=float)
    d = numpy.asarray(direction, dtype=float)
    best = None
    for k, (a, b, c) in enumerate(numpy.asarray(faces)):
        v0, v1, v2 = vertices[a], vertices[b], vertices[c]
        M = numpy.column_stack([v1 - v0, v2 - v0, -d])
        if abs(numpy.linalg.det(M)) < 1e-14:
            continue
        u, v, t = numpy.linalg.solve(M, o - v0)
        if u < -eps or v < -eps or u + v > 1.0 + eps or t <= eps:
            continue
        if best is None or t < best[0]:
            best = (t, k, o + t * d)
    return OracleResult(best, 'exhaustive-solve', eps)


def brute_trim(vertices, faces, segments, weights, R, C):
    """Positive-corner count of every face from quadrature field values."""
    values = quadrature_field(vertices, segments, weights, R, C)
    counts = [int(sum(values[i] > 0 for i in f)) for f in faces]
    return OracleResult(numpy.array(counts), 'per-face-quadrature', 0.0)


def brute_hull_containment(vertices, faces, points):
    """Largest signed distance of each point to the planes of a closed,
    outward oriented triangle surface (positive means outside)."""
    vertices = numpy.asarray(vertices, dtype=float)
    out = []
    for q in numpy.asarray(points, dtype=float):
        worst = -numpy.inf
        for a, b, c in faces:
            n = numpy.cross(vertices[b] - vertices[a],
                            vertices[c] - vertices[a])
            n = n / numpy.sqrt(numpy.dot(n, n))
            worst = max(worst, numpy.dot(q - vertices[a], n))
        out.append(worst)
    return OracleResult(numpy.array(out), 'plane-scan', 1e-9)


def dfs_recount(node_count, edges):
    """Number of leaf descendants of every node of a forest.

    `edges` point from a node towards the platform; nodes without
    incoming edges count as one leaf.
    """
    incoming = collections.defaultdict(list)
    for start, end in edges:
        incoming[int(end)].append(int(start))
    counts = {}

    def visit(node):
        stack = [(node, False)]
        while stack:
            current, expanded = stack.pop()
            if current in counts:
                continue
            children = incoming.get(current, [])
            if not children:
                counts[current] = 1
            elif expanded:
                counts[current] = sum(counts[c] for c in children)
            else:
                stack.append((current, True))
                stack.extend((c, False) for c in children)
        return counts[node]

    result = numpy.array([visit(n) for n in range(node_count)])
    return OracleResult(result, 'dfs', 0)


def _boundary(nodes, tets):
    """Outward boundary triangles by counting sorted face keys."""
    seen = {}
    for tet in tets:
        for opposite in range(4):
            tri = [int(tet[k]) for k in range(4) if k != opposite]
            key = tuple(sorted(tri))
            if key in seen:
                seen[key] = None
                continue
            a, b, c = (nodes[i] for i in tri)
            n = numpy.cross(b - a, c - a)
            if numpy.dot(n, nodes[tet[opposite]] - a) > 0:
                tri = [tri[0], tri[2], tri[1]]
            seen[key] = (tri, tet)
    return [v for v in seen.values() if v is not None]


def brute_overhangs(nodes, tets, vectors, alpha, platform_z=0.0):
    """Sorted node triples of boundary faces violating the support cone.

    `vectors` holds the printing direction of each tet, indexed like
    `tets`.
    """
    nodes = numpy.asarray(nodes, dtype=float)
    index = dict((tuple(t), k) for k, t in enumerate(
        numpy.asarray(tets).tolist()))
    found = set()
    s = numpy.sin(numpy.radians(alpha))
    for tri, tet in _boundary(nodes, numpy.asarray(tets)):
        p = nodes[tri]
        if numpy.all(p[:, 2] <= platform_z + 1e-9):
            continue
        n = numpy.cross(p[1] - p[0], p[2] - p[0])
        n = n / numpy.sqrt(numpy.dot(n, n))
        d = vectors[index[tuple(tet.tolist())]]
        if numpy.dot(n, d) + s <= 0.0:
            found.add(tuple(sorted(tri)))
    return OracleResult(found, 'boundary-scan', 0.0)


def _crossings(nodes, tet, values, iso):
    points = []
    for a, b in itertools.combinations(tet, 2):
        if (values[a] >= iso) != (values[b] >= iso):
            lo, hi = (a, b) if values[a] < values[b] else (b, a)
            t = (iso - values[lo]) / (values[hi] - values[lo])
            points.append(nodes[lo] + t * (nodes[hi] - nodes[lo]))
    return numpy.array(points)


def brute_iso_area(nodes, tets, values, iso):
    """Iso-surface area as the sum of per-tet cross sections.

    Each cross section is a triangle or a planar convex quad, measured by
    sorting its corners by angle around their centroid.
    """
    nodes = numpy.asarray(nodes, dtype=float)
    values = numpy.asarray(values, dtype=float)
    total = 0.0
    for tet in tets:
        pts = _crossings(nodes, tet, values, iso)
        if len(pts) < 3:
            continue
        center = pts.mean(axis=0)
        n = numpy.cross(pts[1] - pts[0], pts[2] - pts[0])
        if len(pts) == 4 and numpy.dot(n, n) < 1e-24:
            n = numpy.cross(pts[1] - pts[0], pts[3] - pts[0])
        norm = numpy.sqrt(numpy.dot(n, n))
        if norm < 1e-300:
            continue
        n = n / norm
        u = pts[0] - center
        if numpy.dot(u, u) < 1e-300:
            u = pts[1] - center
        u = u / numpy.sqrt(numpy.dot(u, u))
        v = numpy.cross(n, u)
        angles = numpy.arctan2((pts - center) @ v, (pts - center) @ u)
        ring = pts[numpy.argsort(angles)]
        area = numpy.zeros(3)
        for k in range(len(ring)):
            area += numpy.cross(ring[k] - center,
                                ring[(k + 1) % len(ring)] - center)
        total += 0.5 * numpy.sqrt(numpy.dot(area, area))
    return OracleResult(total, 'per-tet-polygon', 1e-9)


def monte_carlo_iso_area(nodes, tets, values, iso, n_samples=10 ** 6,
                         band=0.02, seed=0):
    """Iso-surface area from random samples in a thin field band.

    Area equals the integral of ``|grad G|`` over ``|G - iso| < eps``
    divided by ``2 eps``; points are drawn volume-uniformly from the tets
    whose value range reaches the band. `band` sets eps as a fraction of
    the median value span of those tets. The tolerance is three standard
    errors.
    """
    nodes = numpy.asarray(nodes, dtype=float)
    tets = numpy.asarray(tets, dtype=int)
    values = numpy.asarray(values, dtype=float)
    v = values[tets]
    span = v.max(axis=1) - v.min(axis=1)
    crossing = (v.min(axis=1) < iso) & (v.max(axis=1) > iso)
    if not numpy.any(crossing):
        return OracleResult(0.0, 'monte-carlo-band', 0.0)
    eps = band * numpy.median(span[crossing])
    near = (v.min(axis=1) < iso + eps) & (v.max(axis=1) > iso - eps)
    p = nodes[tets[near]]
    edges = p[:, 1:] - p[:, :1]
    vol = numpy.abs(numpy.linalg.det(edges)) / 6.0
    keep = vol > 1e-15
    edges, vol, v = edges[keep], vol[keep], v[near][keep]
    grad = numpy.linalg.solve(edges, (v[:, 1:] - v[:, :1])[..., None])
    grad_norm = numpy.sqrt(numpy.sum(grad[..., 0] ** 2, axis=1))

    rng = numpy.random.default_rng(seed)
    pick = rng.choice(len(vol), size=n_samples, p=vol / vol.sum())
    bary = rng.dirichlet(numpy.ones(4), size=n_samples)
    g = numpy.sum(bary * v[pick], axis=1)
    hits = numpy.where(numpy.abs(g - iso) < eps, grad_norm[pick], 0.0)
    scale = vol.sum() / (2.0 * eps)
    area = scale * hits.mean()
    error = scale * hits.std() / numpy.sqrt(n_samples)
    return OracleResult(float(area), 'monte-carlo-band', float(3 * error))


def brute_case_count(tets, values, iso):
    """Triangles produced by marching tetrahedra, tet by tet."""
    values = numpy.asarray(values, dtype=float)
    total = 0
    for tet in tets:
        above = sum(values[i] >= iso for i in tet)
        total += {0: 0, 1: 1, 2: 2, 3: 1, 4: 0}[int(above)]
    return OracleResult(total, 'case-table', 0)
