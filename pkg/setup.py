"""
Packaging for the metric-learning diagnostics bench.

Usage:
    pip install -e .
    dml-bench suite --preset fine --losses contrastive triplet --out-dir runs/suite
"""
from setuptools import setup

setup(
    name='dml-bench',
    version='0.1.0',
    description='Loss, variance and greediness diagnostics for deep metric learning heads',
    python_requires='>=3.9',
    packages=['core', 'data', 'losses', 'model', 'analytics', 'retrieval'],
    py_modules=['builder', 'engine', 'experiment', 'cli'],
    install_requires=[
        'numpy>=1.24',
        'pandas>=2.0.0',
        'matplotlib>=3.7.0',
    ],
    extras_require={'test': ['pytest>=7.0']},
    entry_points={'console_scripts': ['dml-bench=cli:main']},
)
