#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""unittest cases for overhang."""
# test_overhang.py
# Copyright (c) 2024 curvsup developers


import unittest
import numpy
from numpy.testing import assert_allclose, assert_array_equal
from curvsup import overhang
from curvsup.fields import VectorField, field_from_height
from curvsup.fixtures import FIXTURES, make_envelope, make_fixture
from curvsup.mesh import TetMesh
from curvsup.util import angle_between
from .oracles import brute_hull_containment, brute_overhangs


def floating_tet():
    """A single tet hovering above the platform, flat face down."""
    nodes = [[0, 0, 1], [1, 0, 1], [0, 1, 1], [0, 0, 2]]
    return TetMesh(nodes, [[0, 1, 2, 3]])


class TestOverhangDetection(unittest.TestCase):
    """Unit tests for the self-support criterion."""

    def test_hand_case(self):
        """Test a downward face under an upward printing direction."""
        m = floating_tet()
        up = VectorField([[0, 0, 1]])
        found = overhang.detect_overhangs(m, up, 45.0)
        self.assertEqual(len(found), 1)
        face = m.boundary_faces[found.faces[0]]
        assert_array_equal(numpy.sort(face), [0, 1, 2])
        assert_allclose(found.vertex_directions,
                        numpy.tile([0, 0, 1.0], (3, 1)))

    def test_cone_boundary(self):
        """Test if the inclusive inequality flags a face at the limit."""
        m = floating_tet()
        alpha = 30.0
        # n.d = -sin(alpha) exactly for the bottom face
        d = [numpy.cos(numpy.radians(alpha)), 0.0,
             numpy.sin(numpy.radians(alpha))]
        found = overhang.detect_overhangs(m, VectorField([d]), alpha)
        faces = numpy.sort(m.boundary_faces[found.faces]).tolist()
        self.assertIn([0, 1, 2], faces)
        found = overhang.detect_overhangs(m, VectorField([[0, 0, -1]]), 45.0)
        self.assertEqual(len(found), 0)

    def test_platform_faces_excluded(self):
        """Test if faces resting on the platform are not overhangs."""
        m = floating_tet()
        up = VectorField([[0, 0, 1]])
        self.assertEqual(len(overhang.detect_overhangs(m, up, 45.0,
                                                       platform_z=1.0)), 0)

    def test_t_shape_cantilever(self):
        """Test if exactly the bar underside of the T-shape is found."""
        m = make_fixture('t_shape')
        _, dirs = field_from_height(m)
        found = overhang.detect_overhangs(m, dirs, 45.0)
        self.assertEqual(len(found.vertices), 40)
        p = m.nodes[m.boundary_faces[found.faces]]
        assert_allclose(p[:, :, 2], 12.0)
        n = numpy.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        self.assertAlmostEqual(0.5 * numpy.linalg.norm(n, axis=1).sum(),
                               96.0)

    def test_box_has_none(self):
        """Test if a box on the platform needs no support."""
        m = make_fixture('box')
        _, dirs = field_from_height(m)
        self.assertEqual(len(overhang.detect_overhangs(m, dirs)), 0)

    def test_exhaustive_scan(self):
        """Test detection against a face-by-face scan for several angles."""
        for name in FIXTURES:
            m = make_fixture(name)
            _, dirs = field_from_height(m)
            for alpha in (0.0, 30.0, 45.0, 60.0):
                found = overhang.detect_overhangs(m, dirs, alpha)
                got = set(tuple(sorted(f)) for f in
                          m.boundary_faces[found.faces].tolist())
                want = brute_overhangs(m.nodes, m.tets, dirs.vectors, alpha)
                self.assertEqual(got, want.value, "%s at %g" % (name, alpha))

    def test_zero_angle(self):
        """Test if alpha = 0 flags every face at a right angle or more
        from the printing direction, walls included."""
        m = floating_tet()
        found = overhang.detect_overhangs(m, VectorField([[0, 0, 1]]), 0.0)
        faces = sorted(numpy.sort(m.boundary_faces[found.faces]).tolist())
        self.assertEqual(faces, [[0, 1, 2], [0, 1, 3], [0, 2, 3]])

    def test_patches(self):
        """Test if the two T-shape wings form two patches of 20 vertices."""
        m = make_fixture('t_shape')
        _, dirs = field_from_height(m)
        found = overhang.detect_overhangs(m, dirs, 45.0)
        labels = overhang.overhang_patches(m, found)
        self.assertEqual(len(labels), len(found.vertices))
        assert_array_equal(numpy.bincount(labels), [20, 20])
        x = m.nodes[found.vertices, 0]
        for label in (0, 1):
            self.assertEqual(len(numpy.unique(numpy.sign(
                x[labels == label]))), 1)
        box = make_fixture('box')
        none = overhang.detect_overhangs(box, field_from_height(box)[1])
        self.assertEqual(len(overhang.overhang_patches(box, none)), 0)

    def test_alpha_range(self):
        """Test if angles outside [0, 90) are rejected."""
        m = floating_tet()
        with self.assertRaises(ValueError):
            overhang.detect_overhangs(m, VectorField([[0, 0, 1]]), 90.0)


class TestTrajectories(unittest.TestCase):
    """Unit tests for the descent trajectories."""

    def test_vertical_drop(self):
        """Test if an upward printing direction drops straight down."""
        t = overhang.trace_trajectory([1, 2, 5.5], [0, 0, 1], step=1.0)
        assert_allclose(t.points[:, :2], numpy.tile([1, 2], (len(t), 1)))
        self.assertLess(t.points[-1, 2], 1.0)
        self.assertGreaterEqual(t.points[-1, 2], 0.0)
        self.assertEqual(len(t), 6)

    def test_turning_rate(self):
        """Test if the direction turns towards -z by at most alpha/20."""
        alpha = 45.0
        t = overhang.trace_trajectory([0, 0, 30], [1, 0, 0], alpha, 0.5)
        d = t.directions
        assert_allclose(d[0], [-1, 0, 0], atol=1e-12)
        turns = numpy.degrees(angle_between(d[:-1], d[1:]))
        self.assertTrue(numpy.all(turns <= alpha / 20.0 + 1e-9))
        self.assertTrue(numpy.all(numpy.diff(d[:, 2]) <= 1e-12))
        assert_allclose(d[-1], [0, 0, -1], atol=1e-12)
        self.assertLess(t.points[-1, 2], 0.5)

    def test_invalid_start(self):
        """Test if starts below the platform or bad steps are rejected."""
        with self.assertRaises(ValueError):
            overhang.trace_trajectory([0, 0, -1], [0, 0, 1])
        with self.assertRaises(ValueError):
            overhang.trace_trajectory([0, 0, 1], [0, 0, 1], step=0)

    def test_zero_angle(self):
        """Test if alpha = 0 keeps a descending particle straight and
        rejects one that can never turn down."""
        t = overhang.trace_trajectory([0, 0, 5.0], [0.6, 0, 0.8], 0.0, 1.0)
        assert_allclose(t.directions, numpy.tile([-0.6, 0, -0.8],
                                                 (len(t) - 1, 1)),
                        atol=1e-12)
        self.assertLess(t.points[-1, 2], 1.0)
        with self.assertRaisesRegex(ValueError, 'never descends'):
            overhang.trace_trajectory([0, 0, 5.0], [1, 0, 0], 0.0, 1.0)
        with self.assertRaisesRegex(ValueError, 'never descends'):
            overhang.trace_trajectory([0, 0, 5.0], [0, 0, -1], 0.0, 1.0)


class TestConservativeHull(unittest.TestCase):
    """Unit tests for the conservative hull."""

    @classmethod
    def setUpClass(cls):
        cls.mesh = make_fixture('t_shape')
        _, dirs = field_from_height(cls.mesh)
        cls.found = overhang.detect_overhangs(cls.mesh, dirs)
        cls.trajectories = overhang.trace_trajectories(
            cls.mesh, cls.found, step=0.8)
        cls.points = numpy.vstack([cls.mesh.nodes] +
                                  [t.points for t in cls.trajectories])

    def test_contains_inputs(self):
        """Test if every input point lies inside the hull."""
        hull = overhang.build_conservative_hull(self.mesh, self.found,
                                                self.trajectories)
        self.assertTrue(hull.is_closed)
        self.assertGreater(hull.signed_volume, 0)
        check = brute_hull_containment(hull.vertices, hull.faces,
                                       self.points)
        self.assertLessEqual(check.value.max(), check.tolerance)

    def test_inflation_margin(self):
        """Test if inflation keeps every input 1 mm inside the surface."""
        hull = overhang.build_conservative_hull(self.mesh, self.found,
                                                self.trajectories, 1.0)
        check = brute_hull_containment(hull.vertices, hull.faces,
                                       self.points)
        self.assertLessEqual(check.value.max(), -1.0 + 1e-6)

    def test_clipped_envelope(self):
        """Test if clipping pulls every envelope node inside the hull and
        leaves the model tets matched."""
        hull = overhang.build_conservative_hull(self.mesh, self.found,
                                                self.trajectories, 1.6)
        envelope = make_envelope('t_shape')
        before = brute_hull_containment(hull.vertices, hull.faces,
                                        envelope.nodes)
        self.assertGreater(before.value.max(), 0.1)
        clipped = overhang.clip_to_hull(envelope, hull)
        after = brute_hull_containment(hull.vertices, hull.faces,
                                       clipped.nodes)
        self.assertLessEqual(after.value.max(), 1e-6)
        self.assertTrue(numpy.all(clipped.volumes > 0))
        self.assertLess(clipped.volume, envelope.volume)
        self.assertLessEqual(clipped.volume, hull.signed_volume + 1e-6)
        domain = overhang.assemble_support_domain(self.mesh, clipped)
        self.assertAlmostEqual(domain.support_mesh.volume,
                               clipped.volume - self.mesh.volume)

    def test_clip_inside_unchanged(self):
        """Test if an envelope already inside the hull is kept as is."""
        hull = overhang.build_conservative_hull(self.mesh, self.found,
                                                self.trajectories, 1.6)
        clipped = overhang.clip_to_hull(self.mesh, hull)
        assert_allclose(clipped.nodes, self.mesh.nodes)
        assert_array_equal(clipped.tets, self.mesh.tets)

    def test_degenerate_input(self):
        """Test if coplanar points are reported as ValueError."""
        flat = TetMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]],
                       numpy.zeros((0, 4), dtype=int))
        empty = overhang.OverhangSet([], [], numpy.zeros((0, 3)),
                                     numpy.zeros((0, 3)))
        with self.assertRaises(ValueError):
            overhang.build_conservative_hull(flat, empty, [])


class TestSupportDomain(unittest.TestCase):
    """Unit tests for support domain assembly."""

    def test_partition(self):
        """Test if envelope tets split into model and support tets."""
        model = make_fixture('bridge_slab')
        envelope = make_envelope('bridge_slab')
        domain = overhang.assemble_support_domain(model, envelope)
        self.assertEqual(len(domain.model_tet_ids) +
                         len(domain.support_tet_ids), len(envelope.tets))
        assert_allclose(envelope.nodes[domain.node_map], model.nodes)
        self.assertAlmostEqual(domain.support_mesh.volume,
                               envelope.volume - model.volume)
        pairs = domain.support_interface
        assert_allclose(domain.support_mesh.nodes[pairs[:, 0]],
                        model.nodes[pairs[:, 1]])

    def test_interface_edges_exclude_platform(self):
        """Test if model faces on the envelope boundary are left out."""
        model = make_fixture('box')
        domain = overhang.assemble_support_domain(model,
                                                  make_envelope('box'))
        p = domain.envelope.nodes[domain.interface_edges()]
        low = p[:, :, 2].max(axis=1) == 0
        self.assertTrue(numpy.any(low))
        # only the rim of the bottom face remains
        rim = numpy.abs(p[low][:, :, :2]).max(axis=2)
        assert_allclose(rim, 5.0)

    def test_containment_violation(self):
        """Test if a shifted model is rejected."""
        model = make_fixture('box').translated([0.5, 0, 0])
        with self.assertRaisesRegex(ValueError, 'Containment violation'):
            overhang.assemble_support_domain(model, make_envelope('box'))


if __name__ == '__main__':
    import sys
    sys.exit(unittest.main())
