"""Acceptance gate: one test per release criterion.

Each test is a single pass/fail line under ``pytest -v``. Together they pin
the metric formulas to golden fixtures, the geometry to equation-level hand
values, and the full pipeline to accuracy, throughput, determinism, and
structural-invariant requirements on synthetic trees.
"""

import math
import time
from dataclasses import replace

import numpy as np
import pytest

from golden_fixtures import (COEFF_TOL, GOLDEN_MEANS, GOLDEN_ROWS,
                             GOLDEN_STAGE_COUNTS)
from woodleaf.cloud import LabeledCloud
from woodleaf.cloudio import write_labels
from woodleaf.intensity import fit_intensity_threshold, quarter_thresholds
from woodleaf.metrics import ConfusionCounts, evaluate, kappa, mcc, overall_accuracy
from woodleaf.params import PipelineParams, ScanConfig
from woodleaf.pipeline import classify
from woodleaf.refine import expected_voxel_count, knn_refine, mean_neighbor_distance, spacing_at
from woodleaf.spatial import NeighborIndex, build_voxel_grid
from woodleaf.synth import SyntheticTreeSpec, generate_tree
from woodleaf.verify import verify_wood


def test_criterion_1_metrics_golden_rows():
    for row, (tp, tn, fp, fn, oa_want, kappa_want, mcc_want) in enumerate(
            GOLDEN_ROWS, start=1):
        counts = ConfusionCounts(tp=tp, tn=tn, fp=fp, fn=fn)
        assert overall_accuracy(counts) == pytest.approx(
            oa_want, abs=COEFF_TOL), f"overall accuracy, row {row}"
        assert kappa(counts) == pytest.approx(
            kappa_want, abs=COEFF_TOL), f"kappa, row {row}"
        assert mcc(counts) == pytest.approx(
            mcc_want, abs=COEFF_TOL), f"mcc, row {row}"
    means = np.mean([[overall_accuracy(c), kappa(c), mcc(c)]
                     for row in GOLDEN_ROWS
                     for c in [ConfusionCounts(*row[:4])]], axis=0)
    for got, want in zip(means, GOLDEN_MEANS):
        assert got == pytest.approx(want, abs=COEFF_TOL)


def test_criterion_2_equation_level_oracles():
    # Flat grid facing the scanner: the mean distance to the 8 neighbors is
    # exactly (1 + sqrt(2))/2 expected spacings.
    step = 0.01
    center = np.array([10.0, 0.0, 0.0])
    s = spacing_at(center, step)
    flat = [center + i * s * np.array([0.0, 1.0, 0.0])
            + j * s * np.array([0.0, 0.0, 1.0])
            for i, j in [(0, 0), (-1, -1), (-1, 0), (-1, 1), (0, -1),
                         (0, 1), (1, -1), (1, 0), (1, 1)]]
    index = NeighborIndex(np.array(flat), np.arange(9))
    got = mean_neighbor_distance(index, 0, k=8)
    assert got == pytest.approx((1 + math.sqrt(2)) / 2 * s, rel=1e-9)

    # The same grid tilted 45 degrees stays inside the 1.71-spacing bound.
    u = np.array([0.0, 1.0, 0.0])
    v = np.array([1.0, 0.0, 1.0])  # sqrt(2) longer, 45 degrees to the ray
    tilted = [center + i * s * u + j * s * v
              for j in range(-2, 3) for i in range(-2, 3)]
    tilted_index = NeighborIndex(np.array(tilted), np.arange(25))
    center_row = 12  # (i, j) == (0, 0)
    tilted_mean = mean_neighbor_distance(tilted_index, center_row, k=8)
    assert tilted_mean <= 1.71 * s

    # Quartering a density range [0, 8] puts the class cuts at 2 and 6.
    assert quarter_thresholds(np.array([0.0, 8.0])) == pytest.approx((2.0, 6.0))

    # Hand value for the expected count of a 0.1 m voxel at 10 m range
    # scanned at 1 mrad.
    got = expected_voxel_count(np.array([0.1, 0.1, 0.1]), 10.0, 0.001)
    assert got == pytest.approx(141.4213562, rel=1e-6)


def test_criterion_3_end_to_end_accuracy(acceptance_run, acceptance_cloud):
    labels, _, elapsed = acceptance_run
    report = evaluate(labels, acceptance_cloud.labels, max(elapsed, 1e-9))
    assert report.oa >= 0.90
    assert report.kappa >= 0.70
    assert report.mcc >= 0.70
    assert elapsed < 60.0


def test_criterion_4_throughput_and_scaling(acceptance_spec):
    # A denser scan of the acceptance geometry passes the million mark.
    spec = replace(acceptance_spec, angular_step=2.7e-4)
    cloud = generate_tree(spec)
    assert cloud.n_points >= 1_000_000
    scan = ScanConfig(angular_step=spec.angular_step)
    start = time.perf_counter()
    classify(cloud, scan, PipelineParams())
    elapsed = time.perf_counter() - start
    assert elapsed <= 30.0, f"1M-point classification took {elapsed:.1f} s"

    # The neighbor-spacing stage must scale clearly below quadratic:
    # doubling the points may cost at most 3x the time.
    def spacing_seconds(n):
        xyz = cloud.xyz[:n]
        best = math.inf
        for _ in range(2):
            t0 = time.perf_counter()
            knn_refine(xyz, np.arange(n), spec.angular_step, 8, 1.71)
            best = min(best, time.perf_counter() - t0)
        return best

    t_100k = spacing_seconds(100_000)
    t_200k = spacing_seconds(200_000)
    assert t_200k < 3.0 * t_100k, f"{t_100k:.3f} s -> {t_200k:.3f} s"


def test_criterion_5_determinism(acceptance_run, acceptance_cloud,
                                 acceptance_spec, tmp_path):
    labels, _, _ = acceptance_run
    scan = ScanConfig(angular_step=acceptance_spec.angular_step)

    # Same seed: the generator reproduces the cloud and the pipeline the
    # labels, down to the written bytes.
    regenerated = generate_tree(acceptance_spec)
    np.testing.assert_array_equal(regenerated.xyz, acceptance_cloud.xyz)
    np.testing.assert_array_equal(regenerated.intensity,
                                  acceptance_cloud.intensity)
    relabeled, _ = classify(regenerated, scan, PipelineParams())
    write_labels(labels, tmp_path / "first.labels")
    write_labels(relabeled, tmp_path / "second.labels")
    assert ((tmp_path / "first.labels").read_bytes()
            == (tmp_path / "second.labels").read_bytes())

    # Input order must not matter: a shuffled cloud gets the same label for
    # every physical point.
    perm = np.random.default_rng(5).permutation(acceptance_cloud.n_points)
    shuffled = LabeledCloud(xyz=acceptance_cloud.xyz[perm],
                            intensity=acceptance_cloud.intensity[perm])
    shuffled_labels, _ = classify(shuffled, scan, PipelineParams())
    np.testing.assert_array_equal(shuffled_labels, labels[perm])


def test_criterion_6_structural_invariants(acceptance_run, acceptance_cloud,
                                           acceptance_spec):
    # The recorded stage counts of a large run satisfy the bookkeeping
    # identities exactly.
    g = GOLDEN_STAGE_COUNTS
    assert g["wood_a"] == g["wood_b"] + g["leaf_b"]
    assert g["wood_b"] == g["wood_c"] + g["leaf_c"]
    assert g["combined_leaf"] == g["leaf_a"] + g["leaf_b"] + g["leaf_c"]
    assert g["wood_c"] + g["combined_leaf"] == g["wood_a"] + g["leaf_a"]
    assert g["final_wood"] + g["final_leaf"] == g["wood_a"] + g["leaf_a"]
    assert g["final_wood"] - g["wood_c"] == g["promoted"]
    assert g["combined_leaf"] - g["final_leaf"] == g["promoted"]

    # The live trace satisfies the same identities.
    labels, trace, _ = acceptance_run
    n = acceptance_cloud.n_points
    everything = np.arange(n)
    np.testing.assert_array_equal(
        np.union1d(trace.intensity_wood, trace.intensity_leaf), everything)
    np.testing.assert_array_equal(
        np.union1d(trace.spacing_wood, trace.spacing_leaf),
        trace.intensity_wood)
    np.testing.assert_array_equal(
        np.union1d(trace.density_wood, trace.density_leaf),
        trace.spacing_wood)
    np.testing.assert_array_equal(
        np.sort(np.concatenate([trace.intensity_leaf, trace.spacing_leaf,
                                trace.density_leaf])),
        trace.combined_leaf)
    np.testing.assert_array_equal(
        np.union1d(trace.final_wood, trace.final_leaf), everything)
    assert trace.n_promoted == trace.final_wood.size - trace.density_wood.size
    assert trace.n_promoted == trace.combined_leaf.size - trace.final_leaf.size

    # Verification is monotone (wood only grows) and idempotent (a second
    # pass changes nothing).
    assert np.setdiff1d(trace.density_wood, trace.final_wood).size == 0
    grid = build_voxel_grid(acceptance_cloud.xyz, everything,
                            PipelineParams().voxel_divisions)
    scan = ScanConfig(angular_step=acceptance_spec.angular_step)
    wood2, leaf2 = verify_wood(acceptance_cloud, trace.final_wood,
                               trace.final_leaf, grid, scan, PipelineParams(),
                               trace.threshold.value)
    np.testing.assert_array_equal(wood2, trace.final_wood)
    np.testing.assert_array_equal(leaf2, trace.final_leaf)

    # Labels mirror the final index sets.
    assert np.all(labels[trace.final_leaf] == 1)
    assert np.all(labels[trace.final_wood] == 0)


def test_criterion_7_brute_force_oracles():
    rng = np.random.default_rng(77)

    # Nearest neighbors against an exhaustive pairwise scan.
    xyz = rng.uniform(-1.0, 1.0, size=(700, 3)) + [10.0, 0.0, 0.0]
    index = NeighborIndex(xyz, np.arange(700))
    k = 8
    means = index.mean_neighbor_distances(k)
    for i in rng.choice(700, size=60, replace=False):
        d = np.linalg.norm(xyz - xyz[i], axis=1)
        d[i] = np.inf
        brute = np.sort(d)[:k].mean()
        assert means[i] == pytest.approx(brute, rel=1e-12), f"point {i}"

    # Voxel ids against plain floor division.
    grid = build_voxel_grid(xyz, np.arange(700), divisions=7)
    sizes = grid.sizes
    ids = grid.voxel_ids_of(xyz)
    cells = np.minimum(((xyz - grid.box_min) / sizes).astype(np.int64), 6)
    want = cells[:, 0] * 49 + cells[:, 1] * 7 + cells[:, 2]
    np.testing.assert_array_equal(ids, want)

    # Fitted intensity threshold against the exhaustive cut that minimizes
    # misclassification over both training sets.
    wood = rng.normal(60.0, 8.0, size=4000)
    leaf = rng.normal(35.0, 8.0, size=9000)
    fitted = fit_intensity_threshold(wood, leaf).value
    candidates = np.unique(np.concatenate([wood, leaf]))
    errors = [(wood < t).sum() + (leaf >= t).sum() for t in candidates]
    best = candidates[int(np.argmin(errors))]
    assert abs(fitted - best) <= 5.0
