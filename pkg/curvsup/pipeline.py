#!/usr/bin/env python
# -*- coding: utf-8 -*-
# pipeline.py
"""Stage orchestration, run configuration and the run report."""
# Copyright (c) 2024 curvsup developers
# This file is part of curvsup, released under a BSD license.
#    See the file license.txt included with this distribution.

import os
import json
import time
import numpy as np
from curvsup import config as defaults
from curvsup.config import skimage_available
from curvsup.fields import (
    ScalarField,
    direction_field,
    extrapolate_field,
    field_from_height,
    fit_field,
    uniform_direction_field,
)
from curvsup.fixtures import make_envelope, make_fixture
from curvsup.implicit import (
    RADIUS_MODES,
    ImplicitSolid,
    calibrate_iso,
    leaf_radius,
    polygonize,
)
from curvsup.mesh import (
    extract_boundary,
    load_obj,
    load_tet_mesh,
    save_obj,
    save_tet_mesh,
)
from curvsup.overhang import (
    assemble_support_domain,
    build_conservative_hull,
    clip_to_hull,
    detect_overhangs,
    overhang_patches,
    run_tetrahedralizer,
    trace_trajectories,
    write_hull_poly,
)
from curvsup.skeleton import SkeletonGraph, TraceConfig, seed_leaves, \
    trace_tree
from curvsup.slicer import LayerStack, slice_compatible
from curvsup.toolpath import emit_waypoints, layer_contours
from curvsup.trim import (
    TrimmedLayer,
    export_trimmed_obj,
    load_trimmed,
    save_trimmed,
    trim_stack,
)
import logging
logger = logging.getLogger('curvsup.pipeline')

STAGES = ('slice', 'skeleton', 'implicit', 'trim', 'toolpath')

# Intermediate files inside the output directory
FILES = {
    'model': 'model',
    'envelope': 'envelope',
    'model_field': 'model.field',
    'support_field': 'support.field',
    'hull': 'hull.obj',
    'poly': 'hull.poly',
    'stack': 'stack.npz',
    'skeleton': 'skeleton.skel',
    'implicit': 'implicit.json',
    'solid': 'solid.obj',
    'trimmed': 'trimmed.npz',
    'waypoints': 'toolpath.waypoints',
    'report': 'report.txt',
    'report_json': 'report.json',
    'timings': 'timings.json',
}


class PipelineError(RuntimeError):
    """A stage failed; ``stage`` names it and ``__cause__`` holds why."""

    def __init__(self, stage, error):
        RuntimeError.__init__(self, "Stage %s failed: %s" % (stage, error))
        self.stage = stage


class PipelineConfig(object):
    """Parameters of a pipeline run.

    Lengths are in mm and angles in degrees. ``target_radius`` is the
    radius of a trunk that has merged every leaf of the largest overhang
    patch; ``None`` for ``r_leaf`` derives the leaf radius from it by the
    branch radius rule. ``None`` for ``kernel_support`` scales each edge's
    kernel support with its radius (4x); a value gives all edges that
    support. ``None`` for ``thickness``, ``inflate`` and ``turn_angle``
    derives them from the layer thickness, 2x the layer thickness and
    alpha / 20.
    """

    DEFAULTS = {
        'model': None,
        'field': None,
        'envelope': None,
        'fixture': 't_shape',
        'fixture_params': {},
        'split': 6,
        'margin': 1,
        'direction': None,
        'weighting': 'uniform',
        'platform_z': 0.0,
        'alpha': defaults.default_alpha,
        'n_layers': defaults.default_n_layers,
        'iso_values': None,
        'layer_thickness': defaults.default_layer_thickness,
        'turn_angle': None,
        'inflate': None,
        'tetrahedralizer': None,
        'n_ring': defaults.default_n_ring,
        'merge': True,
        'rng_seed': 0,
        'r_leaf': None,
        'target_radius': defaults.default_target_radius,
        'radius_mode': defaults.default_radius_mode,
        'kernel_support': None,
        'polygonize_cell': None,
        'spacing': defaults.default_width,
        'width': defaults.default_width,
        'thickness': None,
        'max_segment': 2.0,
        'output': 'curvsup_out',
    }

    def __init__(self, **kwargs):
        unknown = set(kwargs) - set(self.DEFAULTS)
        if unknown:
            raise ValueError("Unknown configuration keys: %s" %
                             ', '.join(sorted(unknown)))
        for key, value in self.DEFAULTS.items():
            setattr(self, key, kwargs.get(key, value))

    def __repr__(self):
        return "PipelineConfig(%s)" % ', '.join(
            "%s=%r" % (k, getattr(self, k)) for k in sorted(self.DEFAULTS))

    def __eq__(self, other):
        if other.__class__ is not self.__class__:
            return NotImplemented
        return self.to_dict() == other.to_dict()

    @classmethod
    def from_dict(cls, data):
        return cls(**data)

    def to_dict(self):
        return dict((k, getattr(self, k)) for k in sorted(self.DEFAULTS))

    @classmethod
    def load(cls, path):
        """Read a JSON configuration file."""
        if not os.path.exists(path):
            raise FileNotFoundError("Configuration file %s not found" % path)
        with open(path) as f:
            try:
                data = json.load(f)
            except ValueError as e:
                raise ValueError("%s: %s" % (path, e))
        if not isinstance(data, dict):
            raise ValueError("%s: expected a JSON object" % path)
        return cls.from_dict(data)

    def save(self, path):
        with open(path, 'w') as f:
            f.write(self.dumps())

    def dumps(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + '\n'

    def update(self, **overrides):
        """Copy with the given keys replaced; None values are ignored."""
        data = self.to_dict()
        data.update((k, v) for k, v in overrides.items() if v is not None)
        return PipelineConfig(**data)

    def validate(self):
        """Raise ValueError for out of range values."""
        # trajectories from a zero angle never turn towards the platform
        if not 0.0 < self.alpha < 90.0:
            raise ValueError("alpha must lie in (0, 90), got %r" %
                             self.alpha)
        if int(self.n_layers) < 1:
            raise ValueError("n_layers must be at least 1")
        if int(self.n_ring) < 1:
            raise ValueError("n_ring must be at least 1")
        for key in ('layer_thickness', 'r_leaf', 'target_radius', 'spacing',
                    'width', 'max_segment', 'kernel_support', 'thickness',
                    'turn_angle', 'polygonize_cell'):
            value = getattr(self, key)
            if value is not None and not value > 0:
                raise ValueError("%s must be positive, got %r" % (key, value))
        if self.inflate is not None and self.inflate < 0:
            raise ValueError("inflate must be non-negative")
        if self.support_radius <= self.target_radius:
            raise ValueError("kernel_support must exceed target_radius")
        if self.radius_mode not in RADIUS_MODES:
            raise ValueError("radius_mode must be one of %s, got %r" %
                             (', '.join(RADIUS_MODES), self.radius_mode))
        if self.split not in (5, 6):
            raise ValueError("split must be 5 or 6")
        if self.model is None and self.fixture is None:
            raise ValueError("Either a model mesh or a fixture is required")
        return self

    @property
    def support_radius(self):
        if self.kernel_support is None:
            return defaults.default_support_factor * self.target_radius
        return self.kernel_support

    @property
    def bead_thickness(self):
        return self.layer_thickness if self.thickness is None \
            else self.thickness

    @property
    def inflate_distance(self):
        return 2.0 * self.layer_thickness if self.inflate is None \
            else self.inflate

    def path(self, key, *parts):
        return os.path.join(self.output, FILES.get(key, key), *parts)


class RunReport(object):
    """Support volume accounting and skeleton statistics of a run.

    Volumes are layer areas summed and multiplied by the layer thickness.
    """

    FIELDS = ('envelope_volume', 'trimmed_volume', 'reduction',
              'model_layers', 'support_layers', 'overhang_faces', 'leaves',
              'roots', 'edges', 'waypoints', 'extrusion')

    def __init__(self, timings=None, **values):
        for key in self.FIELDS:
            setattr(self, key, values.get(key, 0))
        self.timings = dict(timings or {})

    def __repr__(self):
        return "RunReport(reduction=%.1f%%, leaves=%d, roots=%d)" % (
            100.0 * self.reduction, self.leaves, self.roots)

    @classmethod
    def from_stats(cls, stats, timings=None):
        thickness = stats['slice']['layer_thickness']
        env = stats['trim']['input_area'] * thickness
        trimmed = stats['trim']['output_area'] * thickness
        return cls(timings,
                   envelope_volume=env,
                   trimmed_volume=trimmed,
                   reduction=1.0 - trimmed / env if env > 0 else 0.0,
                   model_layers=stats['slice']['model_layers'],
                   support_layers=stats['slice']['support_layers'],
                   overhang_faces=stats['skeleton']['overhang_faces'],
                   leaves=stats['skeleton']['leaves'],
                   roots=stats['skeleton']['roots'],
                   edges=stats['skeleton']['edges'],
                   waypoints=stats['toolpath']['waypoints'],
                   extrusion=stats['toolpath']['extrusion'])

    def to_dict(self):
        return dict((k, getattr(self, k)) for k in self.FIELDS)

    def describe_lines(self):
        rows = [
            ("Support envelope volume", "%.3f mm^3" % self.envelope_volume),
            ("Trimmed support volume", "%.3f mm^3" % self.trimmed_volume),
            ("Reduction", "%.2f %%" % (100.0 * self.reduction)),
            ("Model layers", "%d" % self.model_layers),
            ("Support layers", "%d" % self.support_layers),
            ("Overhang faces", "%d" % self.overhang_faces),
            ("Skeleton leaves", "%d" % self.leaves),
            ("Skeleton roots", "%d" % self.roots),
            ("Skeleton edges", "%d" % self.edges),
            ("Waypoints", "%d" % self.waypoints),
            ("Extrusion", "%.3f mm^3" % self.extrusion),
        ]
        width = max(len(r[0]) for r in rows) + 2
        lines = ["# volumes = sum of layer areas x layer thickness",
                 "-----"]
        lines += ["%s%s" % ((name + ':').ljust(width), value)
                  for name, value in rows]
        return lines

    def describe(self):
        """Describe the report in a text based format."""
        for line in self.describe_lines():
            print(line)
        for stage in STAGES:
            if stage in self.timings:
                print("%s%.3f s" % (("Time " + stage + ':').ljust(16),
                                    self.timings[stage]))

    def save(self, directory):
        """Write report.txt, report.json and timings.json."""
        with open(os.path.join(directory, FILES['report']), 'w') as f:
            f.write('\n'.join(self.describe_lines()) + '\n')
        with open(os.path.join(directory, FILES['report_json']), 'w') as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write('\n')
        with open(os.path.join(directory, FILES['timings']), 'w') as f:
            json.dump(self.timings, f, indent=2, sort_keys=True)
            f.write('\n')


def _require(path, stage):
    if not os.path.exists(path):
        raise FileNotFoundError("Missing intermediate %s; run the %s stage "
                                "first" % (path, stage))
    return path


def _write_stats(cfg, stage, stats):
    directory = cfg.path('stats')
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, stage + '.json'), 'w') as f:
        json.dump(stats, f, indent=2, sort_keys=True)
        f.write('\n')
    return stats


def read_stats(cfg, stage):
    path = _require(os.path.join(cfg.path('stats'), stage + '.json'), stage)
    with open(path) as f:
        return json.load(f)


def load_model(cfg):
    """Model mesh resting on the platform."""
    if cfg.model is not None:
        mesh = load_tet_mesh(cfg.model)
    else:
        mesh = make_fixture(cfg.fixture, cfg.fixture_params, cfg.split)
    return mesh.translated(mesh.platform_offset(cfg.platform_z))


def model_field(cfg, mesh):
    """Governing field: from file, fitted to a fixed direction, or z."""
    if cfg.field is not None:
        return ScalarField.load(cfg.field, len(mesh.nodes))
    if cfg.direction is not None:
        target = uniform_direction_field(mesh, cfg.direction)
        return fit_field(mesh, target, weighting=cfg.weighting)
    return field_from_height(mesh)[0]


def _envelope(cfg, hull):
    """Envelope mesh bounded by the conservative hull."""
    if cfg.envelope is not None:
        envelope = load_tet_mesh(cfg.envelope)
    elif cfg.tetrahedralizer:
        return run_tetrahedralizer(cfg.tetrahedralizer, cfg.path('poly'))
    elif cfg.model is None:
        envelope = make_envelope(cfg.fixture, cfg.fixture_params,
                                 cfg.margin, cfg.split)
        envelope = envelope.translated([0.0, 0.0, cfg.platform_z])
    else:
        raise ValueError("A model mesh needs an envelope mesh or a "
                         "tetrahedralizer command")
    if hull is not None:
        envelope = clip_to_hull(envelope, hull)
    return envelope


def stage_slice(cfg, callback=None):
    """Fields, overhangs, hull, support domain and compatible layers."""
    os.makedirs(cfg.output, exist_ok=True)
    model = load_model(cfg)
    field = model_field(cfg, model)
    dirs = direction_field(model, field)
    overhangs = detect_overhangs(model, dirs, cfg.alpha, cfg.platform_z)
    trajectories = trace_trajectories(model, overhangs, cfg.alpha,
                                      cfg.layer_thickness, cfg.platform_z,
                                      cfg.turn_angle)
    hull = None
    if len(model.nodes) + sum(len(t) for t in trajectories) >= 4:
        hull = build_conservative_hull(model, overhangs, trajectories,
                                       cfg.inflate_distance)
        save_obj(hull, cfg.path('hull'), comment='conservative hull')
        write_hull_poly(hull, extract_boundary(model), cfg.path('poly'))
    envelope = _envelope(cfg, hull)
    domain = assemble_support_domain(model, envelope)
    support_field = None
    if domain.support_mesh is not None:
        support_field = extrapolate_field(
            model, field, domain.support_mesh, domain.support_interface,
            cfg.weighting)
        support_field.save(cfg.path('support_field'))
    save_tet_mesh(model, cfg.path('model'))
    save_tet_mesh(envelope, cfg.path('envelope'))
    field.save(cfg.path('model_field'))
    stack = slice_compatible(domain, field, support_field, cfg.n_layers,
                             cfg.iso_values, callback=callback)
    stack.save_npz(cfg.path('stack'))
    layers_dir = cfg.path('layers')
    os.makedirs(layers_dir, exist_ok=True)
    stack.export_obj(layers_dir)
    return _write_stats(cfg, 'slice', {
        'layers': len(stack),
        'model_layers': stack.model_count,
        'support_layers': stack.support_count,
        'layer_thickness': cfg.layer_thickness,
        'hull_volume': hull.signed_volume if hull is not None else 0.0,
        'support_tets': int(len(domain.support_tet_ids)),
    })


def stage_skeleton(cfg, callback=None):
    """Seed leaves on the overhangs and trace the tree."""
    model = load_tet_mesh(_require(cfg.path('model') + '.node', 'slice'))
    field = ScalarField.load(_require(cfg.path('model_field'), 'slice'),
                             len(model.nodes))
    stack = LayerStack.load_npz(_require(cfg.path('stack'), 'slice'))
    overhangs = detect_overhangs(model, direction_field(model, field),
                                 cfg.alpha, cfg.platform_z)
    trace = TraceConfig(cfg.alpha, cfg.n_ring, cfg.rng_seed, cfg.merge)
    seeds = seed_leaves(model, field, overhangs, stack)
    graph = trace_tree(seeds, stack, trace, cfg.platform_z, callback)
    graph.save(cfg.path('skeleton'))
    patches = overhang_patches(model, overhangs)
    largest = int(np.bincount(patches).max()) if len(patches) else 0
    return _write_stats(cfg, 'skeleton', {
        'overhang_faces': len(overhangs),
        'largest_patch': largest,
        'leaves': len(graph.leaves),
        'roots': len(graph.roots),
        'edges': int(len(graph.edges)),
        'diagnostics': dict(graph.diagnostics),
    })


def _solid_parameters(cfg):
    """Leaf radius, radius mode and kernel of the implicit solid."""
    r_leaf = cfg.r_leaf
    if r_leaf is None:
        patch = read_stats(cfg, 'skeleton').get('largest_patch', 0)
        r_leaf = leaf_radius(cfg.target_radius, max(patch, 1))
    params = {'r_leaf': r_leaf, 'radius_mode': cfg.radius_mode}
    if cfg.kernel_support is None:
        params['support_factor'] = defaults.default_support_factor
    else:
        # a weight equal to the trunk radius gives a strut of that radius
        params['R'] = cfg.kernel_support
        params['C'] = calibrate_iso(cfg.target_radius, cfg.kernel_support,
                                    cfg.target_radius)
    return params


def build_solid(graph, params):
    """Implicit solid of a skeleton from :func:`_solid_parameters` output."""
    if 'support_factor' in params:
        return ImplicitSolid.from_skeleton_scaled(
            graph, params['r_leaf'], params['support_factor'],
            params['radius_mode'])
    return ImplicitSolid.from_skeleton(graph, params['r_leaf'], params['R'],
                                       params['C'], params['radius_mode'])


def load_solid(cfg):
    graph = SkeletonGraph.load(_require(cfg.path('skeleton'), 'skeleton'))
    with open(_require(cfg.path('implicit'), 'implicit')) as f:
        return build_solid(graph, json.load(f))


def stage_implicit(cfg, callback=None):
    """Calibrate the convolution solid and optionally polygonize it."""
    graph = SkeletonGraph.load(_require(cfg.path('skeleton'), 'skeleton'))
    params = _solid_parameters(cfg)
    with open(cfg.path('implicit'), 'w') as f:
        json.dump(params, f, indent=2, sort_keys=True)
        f.write('\n')
    solid = build_solid(graph, params)
    faces = 0
    if cfg.polygonize_cell:
        if skimage_available:
            surface = polygonize(solid, cfg.polygonize_cell)
            save_obj(surface, cfg.path('solid'), comment='implicit solid')
            faces = len(surface)
        else:
            logger.warning("scikit-image not installed; skipping "
                           "polygonization")
    if callback:
        callback(1, 1)
    return _write_stats(cfg, 'implicit', dict(params, edges=len(
        solid.segments), solid_faces=faces))


def stage_trim(cfg, callback=None):
    """Cut the support layers against the implicit solid."""
    stack = LayerStack.load_npz(_require(cfg.path('stack'), 'slice'))
    solid = load_solid(cfg)
    trimmed = trim_stack(stack, solid, callback)
    save_trimmed(trimmed, cfg.path('trimmed'))
    layers_dir = cfg.path('layers')
    os.makedirs(layers_dir, exist_ok=True)
    export_trimmed_obj(trimmed, layers_dir)
    return _write_stats(cfg, 'trim', {
        'input_area': float(sum(t.stats.input_area for t in trimmed)),
        'output_area': float(sum(t.stats.output_area for t in trimmed)),
        'cut_faces': int(sum(t.stats.cut_faces for t in trimmed)),
        'layers': [list(t.stats) for t in trimmed],
    })


def stage_toolpath(cfg, callback=None):
    """Contours on model and trimmed support layers, bottom-up."""
    stack = LayerStack.load_npz(_require(cfg.path('stack'), 'slice'))
    trimmed = load_trimmed(_require(cfg.path('trimmed'), 'trim'))
    per_layer = []
    for i, model_layer in enumerate(stack.model_layers):
        layers = [TrimmedLayer.from_layer(model_layer)] + \
            [t for t in trimmed if t.index == i]
        contours = []
        for layer in layers:
            contours.extend(layer_contours(layer, cfg.spacing,
                                           cfg.max_segment))
        per_layer.append(contours)
        if callback:
            callback(i + 1, len(stack))
    program = emit_waypoints(per_layer, cfg.width, cfg.bead_thickness)
    program.save(cfg.path('waypoints'))
    return _write_stats(cfg, 'toolpath', {
        'contours': int(sum(len(c) for c in per_layer)),
        'waypoints': len(program),
        'extrusion': program.total_extrusion,
    })


STAGE_FUNCTIONS = {
    'slice': stage_slice,
    'skeleton': stage_skeleton,
    'implicit': stage_implicit,
    'trim': stage_trim,
    'toolpath': stage_toolpath,
}


def run_stage(cfg, stage, callback=None):
    """Run one stage on the intermediates of the output directory.

    Raises
    ------
    PipelineError
        Wrapping whatever the stage raised; files written before the
        failure are kept.
    """
    if stage not in STAGE_FUNCTIONS:
        raise ValueError("Unknown stage %r; choose from %s" %
                         (stage, ', '.join(STAGES)))
    logger.info("Running stage %s", stage)
    try:
        return STAGE_FUNCTIONS[stage](cfg, callback)
    except Exception as e:
        raise PipelineError(stage, e) from e


def build_report(cfg, timings=None):
    stats = dict((s, read_stats(cfg, s)) for s in STAGES)
    report = RunReport.from_stats(stats, timings)
    report.save(cfg.output)
    return report


def run_pipeline(cfg, callback=None):
    """Run every stage and write the report.

    Parameters
    ----------
    cfg : PipelineConfig
    callback : function, optional
        Called as ``callback(stage, done, total)`` during each stage.

    Returns
    -------
    RunReport
    """
    cfg.validate()
    os.makedirs(cfg.output, exist_ok=True)
    cfg.save(os.path.join(cfg.output, 'config.json'))
    timings = {}
    for stage in STAGES:
        start = time.perf_counter()
        hook = None
        if callback:
            def hook(done, total, stage=stage):
                callback(stage, done, total)
        run_stage(cfg, stage, hook)
        timings[stage] = time.perf_counter() - start
    report = build_report(cfg, timings)
    logger.info("%r", report)
    return report


def volume_from_layers(directory, thickness):
    """Sum of trimmed layer areas times thickness, read back from OBJ."""
    total = 0.0
    for name in sorted(os.listdir(directory)):
        if name.startswith('layer_trimmed_') and name.endswith('.obj'):
            total += load_obj(os.path.join(directory, name)).area
    return total * thickness
