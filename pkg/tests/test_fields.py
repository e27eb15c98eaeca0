#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""unittest cases for fields."""
# test_fields.py
# Copyright (c) 2024 curvsup developers


import os
import shutil
import tempfile
import unittest
import numpy
from numpy.testing import assert_allclose
from scipy.spatial import cKDTree
from curvsup import fields
from curvsup.fixtures import make_fixture
from curvsup.mesh import TetMesh
from .util import containing_tets, fixture_domain


class TestGradients(unittest.TestCase):
    """Unit tests for the element gradient operator."""

    def setUp(self):
        self.rng = numpy.random.default_rng(11)

    def test_linear_field_exact(self):
        """Test if a linear field has its exact gradient on random tets."""
        for _ in range(20):
            p = self.rng.uniform(-3, 3, (4, 3))
            m = TetMesh(p, [[0, 1, 2, 3]])
            a = self.rng.normal(size=3)
            g = m.nodes @ a + self.rng.normal()
            assert_allclose(fields.element_gradient(m, g, 0), a, rtol=0,
                            atol=1e-10 * max(1.0, numpy.abs(a).max()))

    def test_operator_matches_elements(self):
        """Test if the sparse operator agrees with per-element gradients."""
        m = make_fixture('bridge_slab', split=5)
        g = self.rng.normal(size=len(m.nodes))
        B = fields.gradient_operator(m)
        assert_allclose((B @ g).reshape(-1, 3),
                        fields.element_gradients(m, g), atol=1e-12)
        assert_allclose(fields.element_gradient(m, g, 7),
                        fields.element_gradients(m, g)[7], atol=1e-12)

    def test_height_field(self):
        """Test if G = z has vertical directions everywhere."""
        m = make_fixture('t_shape')
        field, dirs = fields.field_from_height(m)
        assert_allclose(field.values, m.nodes[:, 2])
        assert_allclose(dirs.vectors,
                        numpy.tile([0.0, 0.0, 1.0], (len(m.tets), 1)),
                        atol=1e-12)

    def test_bad_tet_index(self):
        """Test if an invalid tet index raises IndexError."""
        m = make_fixture('box')
        with self.assertRaises(IndexError):
            fields.element_gradient(m, m.nodes[:, 2], len(m.tets))


class TestFieldFit(unittest.TestCase):
    """Unit tests for the least-squares field fit."""

    @classmethod
    def setUpClass(cls):
        cls.mesh = make_fixture('t_shape', split=5)

    def test_recover_planted_field(self):
        """Test if the fit recovers a planted linear field."""
        a = numpy.array([0.3, -0.2, 0.9])
        a /= numpy.linalg.norm(a)
        planted = self.mesh.nodes @ a + 2.0
        target = fields.uniform_direction_field(self.mesh, a)
        fitted = fields.fit_field(self.mesh, target, anchor=(0, planted[0]))
        assert_allclose(fitted.values, planted, rtol=0, atol=1e-6)

    def test_default_anchor(self):
        """Test if the default anchor pins the lowest node at its height."""
        target = fields.uniform_direction_field(self.mesh, [0, 0, 1])
        fitted = fields.fit_field(self.mesh, target, weighting='volume')
        assert_allclose(fitted.values, self.mesh.nodes[:, 2], atol=1e-6)

    def test_objective_gradient(self):
        """Test the objective derivative against central differences."""
        rng = numpy.random.default_rng(5)
        m = make_fixture('box', {'size': 4.0})
        target = fields.VectorField(rng.normal(size=(len(m.tets), 3)))
        g = rng.normal(size=len(m.nodes))
        grad = fields.objective_gradient(m, g, target)
        h = 1e-4
        for _ in range(20):
            v = rng.normal(size=len(m.nodes))
            fd = (fields.objective(m, g + h * v, target) -
                  fields.objective(m, g - h * v, target)) / (2 * h)
            self.assertAlmostEqual(fd, grad @ v,
                                   delta=1e-5 * max(1.0, abs(fd)))

    def test_curl_target(self):
        """Test if a swirling target that no field can follow is still
        fitted better than a flat or height field does."""
        c = self.mesh.centroids
        target = fields.VectorField(numpy.stack(
            [-c[:, 1], c[:, 0], numpy.ones(len(c))], axis=1))
        fitted = fields.fit_field(self.mesh, target)
        best = fields.objective(self.mesh, fitted, target)
        zero = fields.objective(self.mesh, numpy.zeros(len(self.mesh.nodes)),
                                target)
        height = fields.objective(self.mesh, self.mesh.nodes[:, 2], target)
        self.assertGreater(best, 1e-3)
        self.assertLessEqual(best, zero)
        self.assertLessEqual(best, height)
        grad = fields.objective_gradient(self.mesh, fitted, target)
        self.assertLess(numpy.abs(grad).max(), 1e-6 * max(1.0, best))

    def test_refinement(self):
        """Test if halving the cells of a box never raises the volume
        weighted objective of a fixed target."""
        def swirl(points):
            return numpy.stack([-points[:, 1], points[:, 0],
                                numpy.full(len(points), 3.0)], axis=1)

        coarse = make_fixture('box', {'size': 4.0, 'cell': 2.0})
        fine = make_fixture('box', {'size': 4.0, 'cell': 1.0})
        owner = containing_tets(coarse, fine.centroids)
        coarse_target = fields.VectorField(swirl(coarse.centroids))
        fine_target = fields.VectorField(coarse_target.vectors[owner])
        per_volume = []
        for m, target in ((coarse, coarse_target), (fine, fine_target)):
            g = fields.fit_field(m, target, weighting='volume')
            per_volume.append(fields.objective(m, g, target, 'volume') /
                              len(m.tets))
        self.assertLessEqual(per_volume[1], per_volume[0] * (1 + 1e-9))

    def test_disconnected_mesh(self):
        """Test if a mesh with two components is rejected."""
        nodes = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1],
                 [5, 0, 0], [6, 0, 0], [5, 1, 0], [5, 0, 1]]
        m = TetMesh(nodes, [[0, 1, 2, 3], [4, 5, 6, 7]])
        target = fields.uniform_direction_field(m, [0, 0, 1])
        with self.assertRaisesRegex(ValueError, 'disconnected'):
            fields.fit_field(m, target)

    def test_target_size_mismatch(self):
        """Test if a target of the wrong length is rejected."""
        target = fields.VectorField([[0, 0, 1]])
        with self.assertRaises(ValueError):
            fields.fit_field(self.mesh, target)


class TestExtrapolation(unittest.TestCase):
    """Unit tests for extending a model field into the support."""

    def test_height_field_extends_exactly(self):
        """Test if G = z continues as z through the support domain."""
        fd = fixture_domain('box')
        support = fd.domain.support_mesh
        assert_allclose(fd.support_field.values, support.nodes[:, 2],
                        atol=1e-6)
        pairs = fd.domain.support_interface
        assert_allclose(fd.support_field.values[pairs[:, 0]],
                        fd.field.values[pairs[:, 1]], atol=1e-12)

    def test_shift_equivariance(self):
        """Test if shifting the model field shifts the extension alike."""
        fd = fixture_domain('dome')
        x, y, z = fd.model.nodes.T
        curved = fields.ScalarField(z + 0.02 * (x * x + y * y))
        support = fd.domain.support_mesh
        pairs = fd.domain.support_interface
        base = fields.extrapolate_field(fd.model, curved, support, pairs)
        shifted = fields.extrapolate_field(
            fd.model, fields.ScalarField(curved.values + 3.5), support,
            pairs)
        assert_allclose(shifted.values, base.values + 3.5, rtol=0,
                        atol=1e-8)

    def test_fixed_point(self):
        """Test if the extension satisfies its own normal equations and
        comes back unchanged when extended again."""
        fd = fixture_domain('dome')
        x, y, z = fd.model.nodes.T
        curved = fields.ScalarField(z + 0.02 * (x * x + y * y))
        support = fd.domain.support_mesh
        pairs = fd.domain.support_interface
        once = fields.extrapolate_field(fd.model, curved, support, pairs)
        again = fields.extrapolate_field(fd.model, curved, support, pairs)
        assert_allclose(again.values, once.values, rtol=0, atol=1e-12)
        # nearest model boundary element direction per support element
        tets = numpy.unique(fd.model.boundary_tets)
        dirs = fields.element_gradients(fd.model, curved)[tets]
        _, nearest = cKDTree(fd.model.centroids[tets]).query(
            support.centroids)
        target = fields.VectorField(dirs[nearest])
        grad = fields.objective_gradient(support, once, target)
        free = numpy.ones(len(support.nodes), dtype=bool)
        free[pairs[:, 0]] = False
        self.assertLess(numpy.abs(grad[free]).max(), 1e-6)

    def test_empty_interface(self):
        """Test if an empty interface map is rejected."""
        fd = fixture_domain('box')
        with self.assertRaisesRegex(ValueError, 'empty'):
            fields.extrapolate_field(fd.model, fd.field,
                                     fd.domain.support_mesh,
                                     numpy.zeros((0, 2), dtype=int))

    def test_mismatched_interface(self):
        """Test if interface nodes at different positions are rejected."""
        fd = fixture_domain('box')
        pairs = fd.domain.support_interface.copy()
        pairs[0, 1] = pairs[1, 1]
        with self.assertRaisesRegex(ValueError, 'differs'):
            fields.extrapolate_field(fd.model, fd.field,
                                     fd.domain.support_mesh, pairs)


class TestFieldFiles(unittest.TestCase):
    """Unit tests for field containers and their files."""

    def setUp(self):
        self.tmp = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tmp)

    def test_scalar_field_file(self):
        """Test if a .field file loads back and checks its length."""
        field = fields.ScalarField(numpy.linspace(0, 1, 7))
        path = os.path.join(self.tmp, 'g.field')
        field.save(path)
        self.assertEqual(fields.ScalarField.load(path, 7), field)
        with self.assertRaises(ValueError):
            fields.ScalarField.load(path, 8)

    def test_non_finite_rejected(self):
        """Test if NaN field values are rejected."""
        with self.assertRaises(ValueError):
            fields.ScalarField([0.0, numpy.nan])

    def test_zero_vector_replaced(self):
        """Test if zero target vectors become (0, 0, 1) with a warning."""
        with self.assertWarns(UserWarning):
            v = fields.VectorField([[0, 0, 0], [2, 0, 0]])
        assert_allclose(v.vectors, [[0, 0, 1], [1, 0, 0]])

    def test_vector_field_file(self):
        """Test if a .vec file loads back."""
        v = fields.VectorField([[0, 0, 1], [0, 1, 0]])
        path = os.path.join(self.tmp, 'd.vec')
        v.save(path)
        assert_allclose(fields.VectorField.load(path, 2).vectors, v.vectors)


if __name__ == '__main__':
    import sys
    sys.exit(unittest.main())
