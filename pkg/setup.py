#!/usr/bin/env python3

from setuptools import setup
from os import environ, path


def get_version():
    root = path.dirname(path.realpath(__file__))
    version_file = path.join(root, 'bmposterior', '__about__.py')
    version = {}
    with open(version_file) as fp:
        exec(fp.read(), version)
    return version['__version__']


def get_name():
    postfix = environ.get('NAME_POSTFIX', '')
    base = 'bmposterior'
    return base + postfix


VERSION = get_version()
NAME = get_name()

print('NAME: %s' % NAME)
print('VERSION: %s' % VERSION)

# Core dependencies
dependencies = [
    'numpy>=1.22',
    'scipy>=1.8',
    'matplotlib>=3.5',
    'tqdm',
]

extras_require = {}

# binary chain files
extras_require["avro"] = sorted(
    {
      "fastavro>=1.7.3"
    }
)

# all dependencies
extras_require["all"] = sorted(set(sum(extras_require.values(), [])))

setup(
    name=NAME,
    version=VERSION,
    packages=['bmposterior', 'bmposterior.schema', 'bmposterior.experiments'],
    python_requires='>=3.8',
    entry_points={
        'console_scripts': ['bmposterior=bmposterior.experiments.cli:main'],
    },

    description="Approximate Bayesian MCMC over Boltzmann machine parameters",
    license="Apache License v2.0",
    install_requires=dependencies,
    extras_require=extras_require,
)
