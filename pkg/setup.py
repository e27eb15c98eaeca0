#!/usr/bin/env python
# -*- coding: utf-8 -*-
# setup.py
"""setup.py for curvsup."""
# Copyright (c) 2024 curvsup developers
# This file is part of curvsup, released under a BSD license.
#    See the file license.txt included with this distribution.

from setuptools import setup

with open('README.rst') as readme_file:
    readme = readme_file.read()

test_requirements = [
    "scikit-image",
]

setup(
    name='curvsup',
    version='0.1.0',
    description="Tree-like support on curved layers for multi-axis " +
                "additive manufacturing",
    long_description=readme,
    author="curvsup developers",
    author_email='curvsup@users.noreply.github.com',
    packages=[
        'curvsup',
    ],
    package_dir={'curvsup':
                 'curvsup'},
    include_package_data=True,
    install_requires=[
        "numpy>=1.17",
        "scipy>=1.4",
        "matplotlib>=3.0"
    ],
    extras_require={
        'polygonize': ["scikit-image"],
    },
    entry_points={
        'console_scripts': [
            'curvsup=curvsup.cli:main',
        ],
    },
    license="BSD License",
    zip_safe=False,
    keywords=[
        'curvsup',
        'additive manufacturing',
        'curved layers',
        'support structures'
    ],
    classifiers=[
        'Development Status :: 3 - Alpha',
        'Intended Audience :: Developers',
        'Intended Audience :: Manufacturing',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: BSD License',
        'Natural Language :: English',
        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Topic :: Scientific/Engineering',
    ],
    test_suite='tests',
    tests_require=test_requirements
)
