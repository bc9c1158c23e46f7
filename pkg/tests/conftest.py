"""Shared fixtures.

The expensive synthetic clouds and pipeline runs are session-scoped; most
tests only read them. Anything that mutates arrays must copy first.
"""

import time

import numpy as np
import pytest

from woodleaf.params import PipelineParams, ScanConfig
from woodleaf.pipeline import classify
from woodleaf.synth import SyntheticTreeSpec, default_acceptance_tree, generate_tree


@pytest.fixture(scope="session")
def small_spec():
    # Coarse but quick: a few thousand points, generated in well under a second.
    return SyntheticTreeSpec(leaf_disk_count=300, branch_count=12,
                             angular_step=9.0e-4, rng_seed=3)


@pytest.fixture(scope="session")
def small_cloud(small_spec):
    return generate_tree(small_spec)


@pytest.fixture(scope="session")
def acceptance_spec():
    return default_acceptance_tree()


@pytest.fixture(scope="session")
def acceptance_cloud(acceptance_spec):
    return generate_tree(acceptance_spec)


@pytest.fixture(scope="session")
def acceptance_run(acceptance_cloud, acceptance_spec):
    """One timed pipeline run on the acceptance tree: (labels, trace, seconds)."""
    scan = ScanConfig(angular_step=acceptance_spec.angular_step)
    params = PipelineParams()
    start = time.perf_counter()
    labels, trace = classify(acceptance_cloud, scan, params)
    elapsed = time.perf_counter() - start
    return labels, trace, elapsed
