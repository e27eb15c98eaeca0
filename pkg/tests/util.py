"""Helper functions for test modules."""
import collections
import numpy
from curvsup.fields import direction_field, extrapolate_field, \
    field_from_height
from curvsup.fixtures import make_envelope, make_fixture
from curvsup.mesh import TriMesh
from curvsup.overhang import assemble_support_domain, detect_overhangs
from curvsup.skeleton import seed_leaves, trace_tree
from curvsup.slicer import Layer, slice_compatible

FixtureDomain = collections.namedtuple(
    'FixtureDomain', ['model', 'envelope', 'domain', 'field',
                      'support_field'])


def grid_surface(z, half, n):
    """Square n x n cell grid over [-half, half]^2 at height z, normals +z."""
    ticks = numpy.linspace(-half, half, n + 1)
    x, y = numpy.meshgrid(ticks, ticks, indexing='ij')
    vertices = numpy.stack([x.ravel(), y.ravel(),
                            numpy.full(x.size, float(z))], axis=1)
    faces = []
    for i in range(n):
        for j in range(n):
            a = i * (n + 1) + j
            b = (i + 1) * (n + 1) + j
            faces.append([a, b, b + 1])
            faces.append([a, b + 1, a + 1])
    return TriMesh(vertices, faces)


def planar_layer(z, half=5.0, n=10, index=0, domain='support'):
    """Flat layer with an upward printing direction on every face."""
    surface = grid_surface(z, half, n)
    dirs = numpy.tile([0.0, 0.0, 1.0], (len(surface.faces), 1))
    return Layer(surface, z, index, domain, face_directions=dirs)


def disc_mesh(radius, rings, segments, z=0.0):
    """Polar triangulation of a disc, counter-clockwise seen from +z."""
    vertices = [[0.0, 0.0, z]]
    angles = 2 * numpy.pi * numpy.arange(segments) / segments
    for k in range(1, rings + 1):
        r = radius * k / float(rings)
        for a in angles:
            vertices.append([r * numpy.cos(a), r * numpy.sin(a), z])

    def vid(ring, s):
        return 1 + (ring - 1) * segments + (s % segments)

    faces = [[0, vid(1, s), vid(1, s + 1)] for s in range(segments)]
    for k in range(1, rings):
        for s in range(segments):
            a, b = vid(k, s), vid(k, s + 1)
            c, d = vid(k + 1, s), vid(k + 1, s + 1)
            faces.append([a, c, d])
            faces.append([a, d, b])
    return TriMesh(vertices, faces)


def surface_layer(surface, z=0.0, index=0, domain='support'):
    dirs = numpy.tile([0.0, 0.0, 1.0], (len(surface.faces), 1))
    return Layer(surface, z, index, domain, face_directions=dirs)


def signed_area_xy(points):
    """Shoelace area of a closed polyline projected on the xy plane."""
    x, y = points[:, 0], points[:, 1]
    return 0.5 * numpy.sum(x * numpy.roll(y, -1) - numpy.roll(x, -1) * y)


def fixture_domain(name, margin=1, params=None):
    """Model, envelope, support domain and height fields of a fixture."""
    model = make_fixture(name, params)
    envelope = make_envelope(name, params, margin)
    domain = assemble_support_domain(model, envelope)
    field = field_from_height(model)[0]
    support_field = None
    if domain.support_mesh is not None:
        support_field = extrapolate_field(model, field, domain.support_mesh,
                                          domain.support_interface)
    return FixtureDomain(model, envelope, domain, field, support_field)


def traced_stack(name, n_layers=20):
    """Support layer stack and merged skeleton of a fixture."""
    fd = fixture_domain(name)
    found = detect_overhangs(fd.model, direction_field(fd.model, fd.field))
    stack = slice_compatible(fd.domain, fd.field, fd.support_field,
                             n_layers)
    graph = trace_tree(seed_leaves(fd.model, fd.field, found, stack), stack)
    return stack, graph


def containing_tets(mesh, points, eps=1e-9):
    """Tet of `mesh` holding each point, by barycentric coordinates."""
    p = mesh.nodes[mesh.tets]
    T = numpy.transpose(p[:, 1:] - p[:, :1], (0, 2, 1))
    inv = numpy.linalg.inv(T)
    owner = []
    for q in numpy.asarray(points, dtype=float):
        b = numpy.einsum('kij,kj->ki', inv, q - p[:, 0])
        inside = (b.min(axis=1) >= -eps) & (b.sum(axis=1) <= 1 + eps)
        owner.append(int(numpy.flatnonzero(inside)[0]))
    return numpy.array(owner)
