#!/usr/bin/env python
# -*- coding: utf-8 -*-
# skeleton.py
"""Tree-like support skeleton traced and merged across curved layers."""
# Copyright (c) 2024 curvsup developers
# This file is part of curvsup, released under a BSD license.
#    See the file license.txt included with this distribution.

import os
import collections
import numpy as np
from curvsup.config import default_alpha, default_n_ring
from curvsup.util import angle_between, normalize, rotate_towards
import logging
logger = logging.getLogger('curvsup.skeleton')

SkeletonNode = collections.namedtuple(
    'SkeletonNode', ['position', 'layer_index', 'branch_count', 'kind'])

# A branch tip waiting on a support layer
ActivePoint = collections.namedtuple(
    'ActivePoint', ['node', 'point', 'face', 'layer'])

PLATFORM = -1


class SkeletonGraph(object):
    """Forest of skeleton nodes with edges pointing towards the platform."""

    def __init__(self):
        self._positions = []
        self._layers = []
        self._counts = []
        self._edges = []
        self.diagnostics = collections.Counter()

    def __repr__(self):
        return "SkeletonGraph(nodes=%d, edges=%d)" % (len(self._positions),
                                                      len(self._edges))

    def __len__(self):
        return len(self._positions)

    def __eq__(self, other):
        if other.__class__ is not self.__class__:
            return NotImplemented
        return (np.array_equal(self.positions, other.positions) and
                np.array_equal(self.layers, other.layers) and
                np.array_equal(self.counts, other.counts) and
                np.array_equal(self.edges, other.edges))

    def add_node(self, position, layer_index, branch_count=1):
        self._positions.append(np.asarray(position, dtype=float).copy())
        self._layers.append(int(layer_index))
        self._counts.append(int(branch_count))
        return len(self._positions) - 1

    def add_edge(self, start, end):
        """Add a branch from `start` down to `end`."""
        if self._layers[start] != self._layers[end] + 1:
            raise ValueError("Edge %d -> %d skips layers (%d -> %d)" %
                             (start, end, self._layers[start],
                              self._layers[end]))
        self._edges.append((int(start), int(end)))

    def absorb(self, node, count):
        self._counts[node] += int(count)

    @property
    def positions(self):
        return np.array(self._positions, dtype=float).reshape(-1, 3)

    @property
    def layers(self):
        return np.array(self._layers, dtype=int)

    @property
    def counts(self):
        return np.array(self._counts, dtype=int)

    @property
    def edges(self):
        return np.array(self._edges, dtype=int).reshape(-1, 2)

    @property
    def kinds(self):
        """``leaf``, ``internal`` or ``root`` per node, from the edges."""
        n = len(self)
        has_in = np.zeros(n, dtype=bool)
        has_out = np.zeros(n, dtype=bool)
        e = self.edges
        has_in[e[:, 1]] = True
        has_out[e[:, 0]] = True
        kinds = np.where(has_out, 'internal', 'root').astype(object)
        kinds[~has_in & has_out] = 'leaf'
        return kinds.tolist()

    @property
    def nodes(self):
        return [SkeletonNode(p, l, c, k) for p, l, c, k in
                zip(self._positions, self._layers, self._counts, self.kinds)]

    @property
    def leaves(self):
        return [i for i, k in enumerate(self.kinds) if k == 'leaf']

    @property
    def roots(self):
        return [i for i, k in enumerate(self.kinds) if k == 'root']

    def segments(self):
        """(e, 2, 3) start and end points of every edge."""
        return self.positions[self.edges] if len(self._edges) else \
            np.zeros((0, 2, 3))

    def describe(self):
        """Describe a summary of the skeleton in a text based format."""
        counts = self.counts
        roots = self.roots
        print("Skeleton")
        print("-----")
        print("Nodes:     {}".format(len(self)))
        print("Edges:     {}".format(len(self._edges)))
        print("Leaves:    {}".format(len(self.leaves)))
        print("Roots:     {}".format(len(roots)))
        print("On platform: {}".format(
            sum(1 for r in roots if self._layers[r] == PLATFORM)))
        if len(roots):
            print("Max count: {}".format(int(counts[roots].max())))
        if len(self._edges):
            length = np.linalg.norm(np.diff(self.segments(), axis=1),
                                    axis=2).sum()
            print("Length:    {:0.2f} mm".format(length))
        for key in sorted(self.diagnostics):
            print("{}: {}".format(key, self.diagnostics[key]))

    def save(self, path):
        """Write ``v x y z layer count`` then ``e i j`` lines (``.skel``)."""
        with open(path, 'w') as f:
            f.write("# curvsup skeleton: %d nodes, %d edges\n" %
                    (len(self), len(self._edges)))
            for p, l, c in zip(self._positions, self._layers, self._counts):
                f.write("v %.17g %.17g %.17g %d %d\n" % (p[0], p[1], p[2],
                                                         l, c))
            for i, j in self._edges:
                f.write("e %d %d\n" % (i, j))

    @classmethod
    def load(cls, path):
        if not os.path.exists(path):
            raise FileNotFoundError("Skeleton file %s not found" % path)
        graph = cls()
        with open(path) as f:
            for number, line in enumerate(f, 1):
                parts = line.split()
                if not parts or parts[0].startswith('#'):
                    continue
                try:
                    if parts[0] == 'v' and len(parts) == 6:
                        graph.add_node([float(x) for x in parts[1:4]],
                                       int(parts[4]), int(parts[5]))
                        continue
                    if parts[0] == 'e' and len(parts) == 3:
                        i, j = int(parts[1]), int(parts[2])
                        if not (0 <= i < len(graph) and 0 <= j < len(graph)):
                            raise ValueError("edge references unknown node")
                        graph.add_edge(i, j)
                        continue
                except ValueError as e:
                    raise ValueError("%s: line %d: %s" % (path, number, e))
                raise ValueError("%s: line %d: malformed record %r" %
                                 (path, number, line.strip()))
        return graph

    def plot(self, ax=None):
        """Plot the skeleton using Matplotlib if present."""
        try:
            import matplotlib.pyplot as plt
        except (ImportError, RuntimeError):
            print('Matplotlib could not be loaded. Install and try again.')
            return ax
        if ax is None:
            ax = plt.figure().add_subplot(projection='3d')
        for (a, b) in self.segments():
            ax.plot([a[0], b[0]], [a[1], b[1]], [a[2], b[2]], color='C0')
        leaves = self.positions[self.leaves]
        if len(leaves):
            ax.scatter(leaves[:, 0], leaves[:, 1], leaves[:, 2], color='C1',
                       s=4)
        ax.set_xlabel('x [mm]')
        ax.set_ylabel('y [mm]')
        ax.set_zlabel('z [mm]')
        return ax


class TraceConfig(object):
    """Parameters of the skeleton tracer.

    Parameters
    ----------
    alpha : float
        Self-support angle in degrees.
    n_ring : int
        Follower neighbourhood in face rings around the host face.
    rng_seed : int
        Seed of the host tie-break.
    merge : bool
        When False no followers are gathered, so branches never merge.
    """

    def __init__(self, alpha=default_alpha, n_ring=default_n_ring,
                 rng_seed=0, merge=True):
        if not 0.0 <= alpha < 90.0:
            raise ValueError("Self-support angle must lie in [0, 90)")
        if n_ring < 1:
            raise ValueError("n_ring must be at least 1, got %r" % n_ring)
        self.alpha = float(alpha)
        self.n_ring = int(n_ring)
        self.rng_seed = int(rng_seed)
        self.merge = bool(merge)

    def __repr__(self):
        return "TraceConfig(alpha=%g, n_ring=%d, rng_seed=%d, merge=%s)" % (
            self.alpha, self.n_ring, self.rng_seed, self.merge)


def seed_leaves(model, model_field, overhangs, stack, graph=None):
    """Copy overhang vertices as leaves and drop them onto support layers.

    Each leaf shoots a ray along the inverse printing direction and lands
    on the highest support layer whose iso-value lies below the leaf's
    field value; lower layers are tried when that one is missed.

    Returns
    -------
    tuple
        (SkeletonGraph holding leaves and their first edges, list of
        ActivePoint on the support layers)
    """
    graph = SkeletonGraph() if graph is None else graph
    active = []
    dropped = 0
    iso = stack.iso_values
    for v, d in zip(overhangs.vertices, overhangs.vertex_directions):
        p = model.nodes[v]
        g = model_field.values[v]
        below = int(np.searchsorted(iso, g, side='left')) - 1
        hit = None
        for j in range(below, -1, -1):
            hit = stack.support_layers[j].first_hit(p, -d)
            if hit is not None:
                break
        if hit is None:
            dropped += 1
            continue
        leaf = graph.add_node(p, j + 1)
        node = graph.add_node(hit[2], j)
        graph.add_edge(leaf, node)
        active.append(ActivePoint(node, hit[2], hit[1], j))
    if dropped:
        logger.warning("%d leaf rays missed every support layer", dropped)
    graph.diagnostics['dropped_leaves'] += dropped
    logger.info("Seeded %d leaves from %d overhang vertices",
                len(active), len(overhangs.vertices))
    return graph, active


def _cast(point, direction, next_layer, model_layer, platform_z):
    """Nearest landing of a ray: next support layer, model layer or
    platform (only when `next_layer` is the platform).

    Returns
    -------
    tuple or None
        ``(target, point, face)`` with target ``'support'``, ``'model'``
        or ``'platform'``.
    """
    best = None
    if next_layer is not None:
        hit = next_layer.first_hit(point, direction)
        if hit is not None:
            best = (hit[0], 'support', hit[2], hit[1])
    elif direction[2] < 0:
        t = (platform_z - point[2]) / direction[2]
        if t > 0:
            best = (t, 'platform', point + t * direction, -1)
    if model_layer is not None:
        hit = model_layer.first_hit(point, direction)
        if hit is not None and (best is None or hit[0] < best[0]):
            best = (hit[0], 'model', hit[2], hit[1])
    if best is None:
        return None
    return best[1:]


def trace_layer(active, layer, next_layer, model_layer, cfg, graph, rng,
                platform_z=0.0):
    """Advance all branch tips on one support layer to the layer below.

    Parameters
    ----------
    active : list of ActivePoint
        Tips lying on `layer`.
    layer : Layer
        Current support layer.
    next_layer : Layer or None
        Support layer below; None when the platform comes next.
    model_layer : Layer or None
        Model layer below, where branches terminate.
    cfg : TraceConfig
    graph : SkeletonGraph
        Receives the new nodes and edges.
    rng : numpy.random.Generator
        Host tie-break.

    Returns
    -------
    list of ActivePoint
        Tips on `next_layer`.
    """
    alpha = np.radians(cfg.alpha)
    below = layer.index - 1 if next_layer is not None else PLATFORM
    by_face = collections.defaultdict(list)
    for a in active:
        by_face[a.face].append(a)
    counts = graph._counts
    order = sorted(by_face, key=lambda f: (-max(counts[a.node]
                                                for a in by_face[f]), f))
    consumed = set()
    result = []

    def land(tip, target, point, face):
        node = graph.add_node(point, below if target != 'platform'
                              else PLATFORM, counts[tip.node])
        graph.add_edge(tip.node, node)
        if target == 'support':
            result.append(ActivePoint(node, point, face, below))
        else:
            graph.diagnostics['%s_roots' % target] += 1
        return node

    for face in order:
        while True:
            waiting = [a for a in by_face[face] if a.node not in consumed]
            if not waiting:
                break
            best = max(counts[a.node] for a in waiting)
            ties = sorted((a for a in waiting if counts[a.node] == best),
                          key=lambda a: a.node)
            host = ties[int(rng.integers(len(ties)))] if len(ties) > 1 \
                else ties[0]
            consumed.add(host.node)
            u = -layer.face_directions[host.face]
            hit = _cast(host.point, u, next_layer, model_layer, platform_z)
            if hit is None:
                # stranded tip stays a root where it is
                graph.diagnostics['stranded_hosts'] += 1
                logger.debug("Host %d on layer %d missed every target",
                             host.node, layer.index)
                continue
            target, q, q_face = hit
            landing = land(host, target, q, q_face)
            if not cfg.merge:
                continue
            ring = set(layer.surface.ring(face, cfg.n_ring).tolist())
            followers = sorted(
                (a for f in ring if f in by_face for a in by_face[f]
                 if a.node not in consumed), key=lambda a: a.node)
            for tip in followers:
                consumed.add(tip.node)
                own = -layer.face_directions[tip.face]
                towards = normalize(q - tip.point)
                theta = float(angle_between(own, towards))
                if theta <= alpha:
                    graph.add_edge(tip.node, landing)
                    graph.absorb(landing, counts[tip.node])
                    graph.diagnostics['merged'] += 1
                    continue
                clamped = rotate_towards(own, towards, alpha)
                hit = _cast(tip.point, clamped, next_layer, model_layer,
                            platform_z)
                if hit is None:
                    graph.diagnostics['fallbacks'] += 1
                    hit = _cast(tip.point, own, next_layer, model_layer,
                                platform_z)
                if hit is None:
                    graph.diagnostics['stranded_followers'] += 1
                    logger.warning("Follower %d on layer %d dropped: no "
                                   "landing", tip.node, layer.index)
                    continue
                land(tip, *hit)
    return result


def trace_tree(seeds, stack, cfg=None, platform_z=0.0, callback=None):
    """Trace and merge branches from the seeded tips down to the platform.

    Parameters
    ----------
    seeds : tuple
        Output of :func:`seed_leaves`.
    stack : LayerStack
    cfg : TraceConfig, optional
    platform_z : float, optional
    callback : function, optional
        Called as ``callback(done, total)`` once per layer.

    Returns
    -------
    SkeletonGraph
    """
    cfg = TraceConfig() if cfg is None else cfg
    graph, active = seeds
    rng = np.random.default_rng(cfg.rng_seed)
    pending = collections.defaultdict(list)
    for a in active:
        pending[a.layer].append(a)
    total = len(stack)
    for i in range(total - 1, -1, -1):
        tips = pending.pop(i, [])
        if tips:
            next_layer = stack.support_layers[i - 1] if i > 0 else None
            model_layer = stack.model_layers[i - 1] if i > 0 else None
            if model_layer is not None and model_layer.is_empty:
                model_layer = None
            new = trace_layer(tips, stack.support_layers[i], next_layer,
                              model_layer, cfg, graph, rng, platform_z)
            pending[i - 1].extend(new)
            logger.debug("Layer %d: %d tips in, %d out", i, len(tips),
                         len(new))
        if callback:
            callback(total - i, total)
    logger.info("Traced skeleton: %r, %d roots", graph, len(graph.roots))
    return graph
