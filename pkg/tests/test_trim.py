#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""unittest cases for trim."""
# test_trim.py
# Copyright (c) 2024 curvsup developers


import os
import shutil
import tempfile
import unittest
import numpy
from numpy.testing import assert_allclose, assert_array_equal
from curvsup import trim
from curvsup.implicit import ImplicitSolid, calibrate_iso
from curvsup.slicer import Layer, LayerStack
from .oracles import brute_trim
from .util import disc_mesh, planar_layer, surface_layer, traced_stack


def strut(target=2.0, R=4.0):
    """Vertical strut through the origin with a surface at `target`."""
    C = calibrate_iso(1.0, R, target)
    return ImplicitSolid([[[0, 0, -20], [0, 0, 20]]], [1.0], R, C)


class TestCutPrimitives(unittest.TestCase):
    """Unit tests for face classification and edge cuts."""

    def test_classify(self):
        """Test positive corner counts with zero counted as outside."""
        self.assertEqual(trim.classify_face((1.0, -1.0, 0.0)), 1)
        self.assertEqual(trim.classify_face((1.0, 2.0, 3.0)), 3)
        self.assertEqual(trim.classify_face((0.0, 0.0, -1.0)), 0)
        with self.assertRaises(ValueError):
            trim.classify_face((1.0, numpy.nan, 0.0))

    def test_linear_cut(self):
        """Test linear interpolation without a field."""
        p = trim.cut_edge([0, 0, 0], 1.0, [1, 0, 0], -1.0)
        assert_allclose(p, [0.5, 0, 0])

    def test_root_finding_cut(self):
        """Test if the cut lands on the field's zero crossing."""
        def field(points):
            return 0.25 - points[:, 0] ** 2
        p = trim.cut_edge([0, 0, 0], 0.25, [1, 0, 0], -0.75, field)
        assert_allclose(p, [0.5, 0, 0], atol=1e-10)

    def test_fallback_on_lost_sign_change(self):
        """Test if a field without a root falls back to interpolation."""
        def field(points):
            return numpy.ones(len(points))
        p = trim.cut_edge([0, 0, 0], 1.0, [4, 0, 0], -3.0, field)
        assert_allclose(p, [1.0, 0, 0])

    def test_no_sign_change(self):
        """Test if end values of one sign are rejected."""
        with self.assertRaises(ValueError):
            trim.cut_edge([0, 0, 0], 1.0, [1, 0, 0], 2.0)
        with self.assertRaises(ValueError):
            trim.cut_edge([0, 0, 0], 0.0, [1, 0, 0], -2.0)

    def test_cut_strictly_inside(self):
        """Test if a cut next to an end point stays inside the edge."""
        p = trim.cut_edge([0, 0, 0], 1e-300, [1, 0, 0], -1.0)
        self.assertGreater(p[0], 0.0)
        self.assertLess(p[0], 1.0)


class TestTrimLayer(unittest.TestCase):
    """Unit tests for trimming single layers."""

    def test_disc_area(self):
        """Test if a strut cuts a disc of its radius out of a layer."""
        layer = surface_layer(disc_mesh(5.0, 24, 96))
        out = trim.trim_layer(layer, strut(2.0))
        self.assertAlmostEqual(out.surface.area, numpy.pi * 4.0,
                               delta=0.03 * numpy.pi * 4.0)
        self.assertTrue(out.surface.is_manifold)
        self.assertEqual(len(out.surface.boundary_loops()), 1)
        r = numpy.linalg.norm(out.surface.vertices[:, :2], axis=1)
        self.assertLessEqual(r.max(), 2.0 + 1e-9)
        s = out.stats
        self.assertEqual(s.input_faces, len(layer.surface.faces))
        self.assertGreater(s.cut_faces, 0)
        self.assertEqual(s.output_faces, len(out.surface.faces))

    def test_face_classes_match_quadrature(self):
        """Test discarded and cut face counts against quadrature values."""
        solid = ImplicitSolid([[[1, 0, 3], [0, 0, 1]], [[-1, 0, 3],
                                                         [0, 0, 1]],
                               [[0, 0, 1], [0, 0, -1]]],
                              [0.5, 0.5, 0.7], 2.5, 0.8)
        for z in (0.0, 1.5, 2.5):
            layer = planar_layer(z)
            out = trim.trim_layer(layer, solid)
            counts = brute_trim(layer.surface.vertices, layer.surface.faces,
                                solid.segments, solid.weights, solid.R,
                                solid.C).value
            self.assertEqual(out.stats.discarded_faces,
                             int(numpy.sum(counts == 0)))
            self.assertEqual(out.stats.cut_faces,
                             int(numpy.sum((counts > 0) & (counts < 3))))

    def test_fixture_faces_match_quadrature(self):
        """Test per-face corner counts on traced fixture layers against
        quadrature values."""
        for name, picks in (('t_shape', (2, 9, 14)), ('dome', (1, 5))):
            stack, graph = traced_stack(name)
            solid = ImplicitSolid.from_skeleton(
                graph, 0.5, 2.5, calibrate_iso(0.5, 2.5, 0.6))
            for i in picks:
                layer = stack.support_layers[i]
                if layer.is_empty:
                    continue
                out = trim.trim_layer(layer, solid)
                counts = brute_trim(layer.surface.vertices,
                                    layer.surface.faces, solid.segments,
                                    solid.weights, solid.R, solid.C).value
                F = solid.evaluate(layer.surface.vertices)
                got = (F[layer.surface.faces] > 0).sum(axis=1)
                assert_array_equal(got, counts, '%s layer %d' % (name, i))
                self.assertEqual(out.stats.discarded_faces,
                                 int(numpy.sum(counts == 0)))
                self.assertEqual(out.stats.cut_faces,
                                 int(numpy.sum((counts > 0) &
                                               (counts < 3))))
                kept = numpy.unique(out.source_faces)
                assert_array_equal(kept, numpy.flatnonzero(counts > 0))

    def test_inside_faces_kept(self):
        """Test if faces fully inside pass through unchanged."""
        layer = surface_layer(disc_mesh(1.0, 2, 12))
        out = trim.trim_layer(layer, strut(2.0))
        self.assertEqual(out.stats.cut_faces, 0)
        assert_array_equal(out.source_faces,
                           numpy.arange(len(layer.surface.faces)))
        assert_allclose(out.surface.area, layer.surface.area)
        assert_allclose(out.face_directions, layer.face_directions)

    def test_empty_solid(self):
        """Test if an empty solid discards the whole layer."""
        solid = ImplicitSolid(numpy.zeros((0, 2, 3)), [], 2.0, 0.1)
        layer = planar_layer(1.0)
        out = trim.trim_layer(layer, solid)
        self.assertTrue(out.is_empty)
        self.assertEqual(out.stats.discarded_faces, len(layer.surface.faces))
        self.assertEqual(out.stats.output_area, 0.0)

    def test_pass_through(self):
        """Test if an untrimmed layer keeps its statistics."""
        layer = planar_layer(2.0, index=4)
        kept = trim.TrimmedLayer.from_layer(layer)
        self.assertEqual(kept.index, 4)
        self.assertEqual(kept.stats.output_area, kept.stats.input_area)
        self.assertEqual(kept.stats.discarded_faces, 0)


class TestTrimStack(unittest.TestCase):
    """Unit tests for trimming a layer stack and its files."""

    def setUp(self):
        self.tmp = tempfile.mkdtemp()
        support = [planar_layer(z, index=i)
                   for i, z in enumerate((1.0, 2.0, 3.0))]
        model = [Layer.empty(z, i, 'model')
                 for i, z in enumerate((1.0, 2.0, 3.0))]
        self.stack = LayerStack(model, support, [1.0, 2.0, 3.0])

    def tearDown(self):
        shutil.rmtree(self.tmp)

    def test_area_reduction(self):
        """Test if every trimmed layer is smaller than its input."""
        calls = []
        out = trim.trim_stack(self.stack, strut(1.5),
                              lambda i, n: calls.append((i, n)))
        self.assertEqual(calls, [(1, 3), (2, 3), (3, 3)])
        for layer in out:
            self.assertLess(layer.stats.output_area, layer.stats.input_area)
            self.assertAlmostEqual(layer.stats.output_area,
                                   numpy.pi * 1.5 ** 2,
                                   delta=0.1 * numpy.pi * 1.5 ** 2)
        self.assertEqual([t.index for t in out], [0, 1, 2])

    def test_archive_round_trip(self):
        """Test if trimmed layers load back with their statistics."""
        out = trim.trim_stack(self.stack, strut(1.5))
        path = os.path.join(self.tmp, 'trimmed.npz')
        trim.save_trimmed(out, path)
        loaded = trim.load_trimmed(path)
        self.assertEqual(len(loaded), 3)
        for a, b in zip(loaded, out):
            assert_array_equal(a.surface.faces, b.surface.faces)
            assert_array_equal(a.surface.vertices, b.surface.vertices)
            self.assertEqual(a.stats, b.stats)
            self.assertEqual(a.iso_value, b.iso_value)
        paths = trim.export_trimmed_obj(out, self.tmp)
        self.assertEqual(len(paths), 3)
        with self.assertRaises(FileNotFoundError):
            trim.load_trimmed(os.path.join(self.tmp, 'none.npz'))


if __name__ == '__main__':
    import sys
    sys.exit(unittest.main())
