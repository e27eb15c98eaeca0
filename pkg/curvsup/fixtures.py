#!/usr/bin/env python
# -*- coding: utf-8 -*-
# fixtures.py
"""Procedural desk-scale test models built from hexahedral grids."""
# Copyright (c) 2024 curvsup developers
# This file is part of curvsup, released under a BSD license.
#    See the file license.txt included with this distribution.

import collections
import numpy as np
from curvsup.mesh import TetMesh
import logging
logger = logging.getLogger('curvsup.fixtures')

Fixture = collections.namedtuple('Fixture', ['name', 'parameters'])

# Default shape parameters in mm
FIXTURES = {
    'box': {'size': (10.0, 10.0, 10.0), 'cell': 2.0},
    't_shape': {'bar_length': 24.0, 'bar_thickness': 4.0,
                'stem_width': 8.0, 'stem_height': 12.0, 'depth': 6.0,
                'cell': 2.0},
    'bridge_slab': {'span': 24.0, 'pier_width': 4.0, 'height': 10.0,
                    'slab_thickness': 4.0, 'depth': 8.0, 'cell': 2.0},
    'dome': {'radius': 20.0, 'thickness': 4.0, 'cell': 4.0},
}

# Hexahedron corner k sits at offset (k & 1, k >> 1 & 1, k >> 2 & 1)
CORNERS = np.array([[k & 1, (k >> 1) & 1, (k >> 2) & 1] for k in range(8)])
# Six tets around the 0-7 diagonal; conforming across all cells
KUHN = np.array([[0, 1, 3, 7], [0, 1, 5, 7], [0, 2, 3, 7],
                 [0, 2, 6, 7], [0, 4, 5, 7], [0, 4, 6, 7]])
# Five tet splits; cells alternate between the two by parity
FIVE_EVEN = np.array([[0, 1, 2, 4], [3, 1, 2, 7], [5, 1, 4, 7],
                      [6, 2, 4, 7], [1, 2, 4, 7]])
FIVE_ODD = np.array([[1, 0, 3, 5], [2, 0, 3, 6], [4, 0, 5, 6],
                     [7, 3, 5, 6], [0, 3, 5, 6]])


class Lattice(object):
    """Structured grid of hexahedral cells with a per-cell occupancy mask.

    Parameters
    ----------
    origin : array_like
        Coordinates of grid node (0, 0, 0).
    spacing : array_like
        Cell size per axis.
    mask : numpy.ndarray
        Boolean (nx, ny, nz) array of occupied cells.
    """

    def __init__(self, origin, spacing, mask):
        self.origin = np.asarray(origin, dtype=float)
        self.spacing = np.broadcast_to(
            np.asarray(spacing, dtype=float), (3,)).copy()
        self.mask = np.asarray(mask, dtype=bool)

    @property
    def shape(self):
        return self.mask.shape

    def cell_centers(self):
        idx = np.indices(self.shape).reshape(3, -1).T
        return self.origin + (idx + 0.5) * self.spacing, idx

    def tetrahedralize(self, mask=None, split=6):
        """Split the occupied cells into tets.

        Parameters
        ----------
        mask : numpy.ndarray, optional
            Cells to mesh; defaults to the lattice mask.
        split : int, optional
            5 or 6 tets per cell.
        """
        mask = self.mask if mask is None else np.asarray(mask, dtype=bool)
        if split not in (5, 6):
            raise ValueError("Cells split into 5 or 6 tets, not %r" % split)
        cells = np.argwhere(mask)
        nx, ny, nz = np.array(self.shape) + 1

        def node_id(ijk):
            return (ijk[..., 0] * ny + ijk[..., 1]) * nz + ijk[..., 2]

        corners = node_id(cells[:, None, :] + CORNERS[None, :, :])
        if split == 6:
            tets = corners[:, KUHN].reshape(-1, 4)
        else:
            odd = cells.sum(axis=1) % 2 == 1
            tets = np.where(odd[:, None, None], corners[:, FIVE_ODD],
                            corners[:, FIVE_EVEN]).reshape(-1, 4)
        used, inverse = np.unique(tets, return_inverse=True)
        ijk = np.stack([used // (ny * nz), (used // nz) % ny, used % nz],
                       axis=1)
        nodes = self.origin + ijk * self.spacing
        return TetMesh(nodes, inverse.reshape(-1, 4))


def _cells(length, cell, name):
    if length <= 0:
        raise ValueError("Fixture dimension %s must be positive, got %r" %
                         (name, length))
    count = length / cell
    if abs(count - round(count)) > 1e-9 or round(count) < 1:
        raise ValueError(
            "Fixture dimension %s=%g is not a multiple of the cell size %g" %
            (name, length, cell))
    return int(round(count))


def _params(name, params):
    if name not in FIXTURES:
        raise ValueError("Unknown fixture %r; choose from %s" %
                         (name, ', '.join(sorted(FIXTURES))))
    merged = dict(FIXTURES[name])
    merged.update(params or {})
    if merged['cell'] <= 0:
        raise ValueError("Fixture cell size must be positive")
    return merged


def fixture_lattice(name, params=None, margin=0):
    """Lattice holding a fixture, padded by `margin` cells around it.

    The padding is horizontal and upward only; the fixture always rests on
    the plane z = 0.

    Returns
    -------
    tuple
        (Lattice of the padded box, model cell mask)
    """
    p = _params(name, params)
    h = float(p['cell'])
    if name == 'box':
        size = np.broadcast_to(np.asarray(p['size'], dtype=float), (3,))
        n = [_cells(s, h, 'size') for s in size]
        model = np.ones(n, dtype=bool)
    elif name == 't_shape':
        nx = _cells(p['bar_length'], h, 'bar_length')
        ny = _cells(p['depth'], h, 'depth')
        ns = _cells(p['stem_height'], h, 'stem_height')
        nb = _cells(p['bar_thickness'], h, 'bar_thickness')
        nw = _cells(p['stem_width'], h, 'stem_width')
        if nw > nx or (nx - nw) % 2:
            raise ValueError("Stem width must be centred under the bar on "
                             "the cell grid")
        model = np.zeros((nx, ny, ns + nb), dtype=bool)
        lo = (nx - nw) // 2
        model[lo:lo + nw, :, :ns] = True
        model[:, :, ns:] = True
    elif name == 'bridge_slab':
        nx = _cells(p['span'], h, 'span')
        ny = _cells(p['depth'], h, 'depth')
        nh = _cells(p['height'], h, 'height')
        nt = _cells(p['slab_thickness'], h, 'slab_thickness')
        npier = _cells(p['pier_width'], h, 'pier_width')
        if 2 * npier >= nx:
            raise ValueError("Piers leave no span under the slab")
        model = np.zeros((nx, ny, nh + nt), dtype=bool)
        model[:npier, :, :nh] = True
        model[nx - npier:, :, :nh] = True
        model[:, :, nh:] = True
    else:
        # stepped vault: square shell whose cavity narrows one cell per level
        nr = _cells(p['radius'], h, 'radius')
        nt = _cells(p['thickness'], h, 'thickness')
        if nt >= nr:
            raise ValueError("Dome thickness must be below its radius")
        levels = nr - nt
        model = np.ones((2 * nr, 2 * nr, levels + nt), dtype=bool)
        for k in range(levels):
            half = nr - nt - k
            model[nr - half:nr + half, nr - half:nr + half, k] = False
    shape = np.array(model.shape)
    padded = np.zeros(shape + [2 * margin, 2 * margin, margin], dtype=bool)
    padded[margin:margin + shape[0], margin:margin + shape[1],
           :shape[2]] = model
    origin = np.array([-(shape[0] / 2.0 + margin) * h,
                       -(shape[1] / 2.0 + margin) * h, 0.0])
    return Lattice(origin, h, np.ones(padded.shape, dtype=bool)), padded


def make_fixture(name, params=None, split=6):
    """Generate the tet mesh of a named fixture.

    Parameters
    ----------
    name : str
        One of ``box``, ``dome``, ``bridge_slab`` or ``t_shape``.
    params : dict, optional
        Overrides of the defaults in `FIXTURES`. Lengths in mm must be
        positive multiples of ``cell``.
    split : int, optional
        Tets per hexahedral cell, 5 or 6.

    Returns
    -------
    TetMesh
        The model, centred on the z axis and resting on z = 0.

    Examples
    --------
    >>> mesh = make_fixture('box', {'size': 10.0, 'cell': 10.0}, split=5)
    >>> mesh.tets.shape
    (5, 4)
    """
    lattice, model = fixture_lattice(name, params)
    mesh = lattice.tetrahedralize(model, split=split)
    logger.debug("Fixture %s: %r", name, mesh)
    return mesh


def make_envelope(name, params=None, margin=1, split=6):
    """Generate the conforming envelope of a fixture.

    The envelope fills the fixture's bounding box padded by `margin` cells
    on the sides and the top. Its tets include every model tet of
    :func:`make_fixture` with identical node coordinates.
    """
    if margin < 0:
        raise ValueError("Envelope margin must be non-negative")
    lattice, _ = fixture_lattice(name, params, margin=margin)
    return lattice.tetrahedralize(split=split)


def fixture(name, params=None):
    """Describe a fixture with its effective parameters."""
    return Fixture(name, _params(name, params))
