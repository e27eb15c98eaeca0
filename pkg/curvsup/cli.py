#!/usr/bin/env python
# -*- coding: utf-8 -*-
# cli.py
"""Command line entry point ``curvsup``."""
# Copyright (c) 2024 curvsup developers
# This file is part of curvsup, released under a BSD license.
#    See the file license.txt included with this distribution.

import sys
import argparse
from curvsup import __version__
from curvsup.config import mpl_available
from curvsup.fixtures import FIXTURES, make_envelope, make_fixture
from curvsup.mesh import save_tet_mesh
from curvsup.pipeline import (
    STAGES,
    PipelineConfig,
    PipelineError,
    build_report,
    load_solid,
    run_pipeline,
    run_stage,
)
from curvsup.skeleton import SkeletonGraph
from curvsup.trim import load_trimmed
import logging
logger = logging.getLogger('curvsup.cli')

# (flag, config key, type, help)
OVERRIDES = [
    ('--model', 'model', str, 'Model tet mesh (.node/.ele stem).'),
    ('--field', 'field', str, 'Governing field file (.field).'),
    ('--envelope', 'envelope', str, 'Envelope tet mesh (.node/.ele stem).'),
    ('--fixture', 'fixture', str, 'Built-in fixture when no model is given.'),
    ('--alpha', 'alpha', float, 'Self-support angle in degrees.'),
    ('--n-layers', 'n_layers', int, 'Number of model layers.'),
    ('--layer-thickness', 'layer_thickness', float, 'Layer thickness in mm.'),
    ('--n-ring', 'n_ring', int, 'Follower neighbourhood in face rings.'),
    ('--rng-seed', 'rng_seed', int, 'Seed of the host tie-break.'),
    ('--r-leaf', 'r_leaf', float,
     'Leaf radius in mm (derived from the trunk radius when unset).'),
    ('--target-radius', 'target_radius', float, 'Trunk radius in mm.'),
    ('--radius-mode', 'radius_mode', str, 'Branch radii: dynamic or fixed.'),
    ('--kernel-support', 'kernel_support', float, 'Kernel support R in mm.'),
    ('--spacing', 'spacing', float, 'Contour spacing in mm.'),
    ('--width', 'width', float, 'Bead width in mm.'),
    ('--thickness', 'thickness', float, 'Bead thickness in mm.'),
    ('--tetrahedralizer', 'tetrahedralizer', str,
     'Command template for the envelope, e.g. "tetgen -pqY {poly}".'),
    ('--polygonize-cell', 'polygonize_cell', float,
     'Marching cubes cell size for the solid preview in mm.'),
]


def _add_config_args(parser):
    parser.add_argument('-c', '--config', help='JSON configuration file.')
    parser.add_argument('-o', '--output', help='Output directory.')
    for flag, key, kind, text in OVERRIDES:
        parser.add_argument(flag, dest=key, type=kind, help=text)
    parser.add_argument('--no-merge', dest='merge', action='store_false',
                        default=None, help='Never merge branches.')


def build_parser():
    parser = argparse.ArgumentParser(
        prog='curvsup',
        description='Curved-layer tree support generation.',
        formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    parser.add_argument('--version', action='version', version=__version__)
    parser.add_argument('-v', '--verbose', action='store_true',
                        help='Enable debug logging output.')
    sub = parser.add_subparsers(dest='command')
    sub.required = True
    p = sub.add_parser('run', help='Run every stage and write the report.')
    _add_config_args(p)
    for stage in STAGES:
        p = sub.add_parser(stage, help='Run the %s stage on saved '
                           'intermediates.' % stage)
        _add_config_args(p)
    p = sub.add_parser('report', help='Rebuild the report from stage stats.')
    _add_config_args(p)
    p = sub.add_parser('dump-config', help='Print the effective config.')
    _add_config_args(p)
    p = sub.add_parser('fixture', help='Write a fixture as .node/.ele.')
    p.add_argument('name', choices=sorted(FIXTURES))
    p.add_argument('stem', help='Output path without extension.')
    p.add_argument('--split', type=int, default=6, choices=(5, 6),
                   help='Tets per hexahedral cell.')
    p.add_argument('--envelope-margin', type=int, default=None,
                   help='Write the envelope with this margin (cells) too.')
    p = sub.add_parser('plot', help='Plot skeleton and trimmed layers.')
    _add_config_args(p)
    p.add_argument('--save', help='Write the figure to this image file.')
    return parser


def load_config(args):
    cfg = PipelineConfig.load(args.config) if args.config else \
        PipelineConfig()
    overrides = dict((key, getattr(args, key, None))
                     for _, key, _, _ in OVERRIDES)
    overrides['output'] = args.output
    overrides['merge'] = args.merge
    if overrides.get('model'):
        cfg.fixture = None
    return cfg.update(**overrides).validate()


def _plot(cfg, target):
    import matplotlib.pyplot as plt
    ax = plt.figure().add_subplot(projection='3d')
    solid = load_solid(cfg)
    graph = SkeletonGraph.load(cfg.path('skeleton'))
    graph.plot(ax)
    for layer in load_trimmed(cfg.path('trimmed')):
        if layer.is_empty:
            continue
        s = layer.surface
        ax.plot_trisurf(s.vertices[:, 0], s.vertices[:, 1], s.vertices[:, 2],
                        triangles=s.faces, alpha=0.3, color='C2')
    ax.set_title('%d edges, R=%g mm' % (len(solid.segments), solid.R))
    if target:
        plt.savefig(target)
    else:
        plt.show()


def _progress(stage, done, total):
    logger.debug("%s: %d/%d", stage, done, total)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format='%(levelname)s %(name)s: %(message)s')
    try:
        if args.command == 'fixture':
            save_tet_mesh(make_fixture(args.name, split=args.split),
                          args.stem)
            if args.envelope_margin is not None:
                save_tet_mesh(make_envelope(args.name, None,
                                            args.envelope_margin, args.split),
                              args.stem + '_envelope')
            return 0
        cfg = load_config(args)
        if args.command == 'dump-config':
            sys.stdout.write(cfg.dumps())
        elif args.command == 'run':
            run_pipeline(cfg, _progress).describe()
        elif args.command == 'report':
            build_report(cfg).describe()
        elif args.command == 'plot':
            if not mpl_available:
                print('Matplotlib could not be loaded. Install and try '
                      'again.')
                return 1
            _plot(cfg, args.save)
        else:
            run_stage(cfg, args.command,
                      lambda done, total: _progress(args.command, done,
                                                    total))
    except PipelineError as e:
        logger.error("%s", e)
        return 1
    except (ValueError, FileNotFoundError) as e:
        logger.error("%s", e)
        return 1
    return 0


if __name__ == '__main__':
    sys.exit(main())
