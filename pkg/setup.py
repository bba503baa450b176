#!/usr/bin/env python3
"""A setuptools-based script for installing kerninv.

For more information, see:

* https://packaging.python.org/en/latest/index.html
* https://docs.python.org/distutils/sourcedist.html

"""
from setuptools import find_packages, setup

with open('README.rst') as handle:
    LONG_DESCRIPTION = handle.read()


with open('VERSION') as handle:
    VERSION = handle.read().strip()


REQUIREMENTS = [
    'fauxfactory',
    'inflection',
    'numpy>=1.26',
    'packaging',
    'pandas>=2.0',
    'pyxdg',
    'scipy>=1.11',
]

setup(
    name='kerninv',
    version=VERSION,
    description='Utility versus invariance trade-offs of kernel representations',
    long_description=LONG_DESCRIPTION,
    license='GPLv3',
    # See https://pypi.python.org/pypi?%3Aaction=list_classifiers
    classifiers=[
        'Development Status :: 4 - Beta',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: GNU General Public License v3 or later (GPLv3+)',
        'Programming Language :: Python :: 3.12',
        'Programming Language :: Python :: 3.13',
        'Programming Language :: Python :: 3.14',
        'Topic :: Scientific/Engineering :: Artificial Intelligence',
    ],
    packages=find_packages(exclude=['docs', 'tests']),
    install_requires=REQUIREMENTS,
    entry_points={'console_scripts': ['kerninv = kerninv.cli:main']},
    python_requires='>=3.10',
)
