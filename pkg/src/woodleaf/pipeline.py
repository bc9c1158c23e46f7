"""End-to-end classification flow with per-stage bookkeeping.

Stages run in a fixed order: intensity gate, neighbor spacing refinement,
voxel density refinement, then wood verification over the union of the
rejected sets. Each stage consumes the previous stage's wood set, so the
wood sets shrink monotonically until verification grows the final one. A
stage failure aborts the run; no partial labeling is ever returned.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .cloud import ClassLabel, LabeledCloud
from .errors import EmptyClassError, ParameterError
from .intensity import (
    IntensityThreshold,
    classify_by_intensity,
    evaluate_densities,
    fit_intensity_threshold,
    is_usable,
    quarter_thresholds,
    sample_spheres,
    select_seed_classes,
)
from .params import PipelineParams, ScanConfig, validate_params
from .refine import knn_refine, voxel_refine
from .spatial import build_voxel_grid
from .verify import verify_wood


@dataclass(frozen=True)
class StageTrace:
    """Index sets and timings left behind by one classification run.

    Wood sets shrink stage over stage (each refinement re-tests the
    previous wood set); the three leaf sets are pairwise disjoint and their
    union is ``combined_leaf``, the verification input. ``final_wood``
    contains ``density_wood`` plus every promoted point. At every stage the
    wood and leaf sets together cover the whole cloud exactly once.
    """

    threshold: IntensityThreshold
    intensity_wood: np.ndarray
    intensity_leaf: np.ndarray
    spacing_wood: np.ndarray
    spacing_leaf: np.ndarray
    density_wood: np.ndarray
    density_leaf: np.ndarray
    combined_leaf: np.ndarray
    final_wood: np.ndarray
    final_leaf: np.ndarray
    stage_seconds: dict[str, float]

    @property
    def n_points(self) -> int:
        return int(self.intensity_wood.size + self.intensity_leaf.size)

    @property
    def n_promoted(self) -> int:
        """Points verification moved from leaf back to wood."""
        return int(self.final_wood.size - self.density_wood.size)

    @property
    def total_seconds(self) -> float:
        return float(sum(self.stage_seconds.values()))

    def counts_table(self) -> str:
        """Stage-by-stage wood and leaf counts as a plain-text table."""
        rows = [
            ("intensity threshold", str(self.intensity_wood.size),
             str(self.intensity_leaf.size)),
            ("neighbor spacing", str(self.spacing_wood.size),
             str(self.spacing_leaf.size)),
            ("voxel density", str(self.density_wood.size),
             str(self.density_leaf.size)),
            ("combined leaf", "-", str(self.combined_leaf.size)),
            ("wood verification", str(self.final_wood.size),
             str(self.final_leaf.size)),
        ]
        head = ("stage", "wood points", "leaf points")
        widths = [max(len(r[i]) for r in rows + [head]) for i in range(3)]
        lines = [
            f"{head[0]:<{widths[0]}}  {head[1]:>{widths[1]}}  {head[2]:>{widths[2]}}"
        ]
        for name, wood, leaf in rows:
            lines.append(
                f"{name:<{widths[0]}}  {wood:>{widths[1]}}  {leaf:>{widths[2]}}")
        return "\n".join(lines)


def classify(cloud: LabeledCloud, scan_config: ScanConfig,
             params: PipelineParams) -> tuple[np.ndarray, StageTrace]:
    """Classify every point of a cloud as wood (0) or leaf (1).

    Returns the label array and the full stage trace. Deterministic for a
    given cloud, scan configuration, and parameter set, and independent of
    input point order up to point identity.
    """
    validate_params(params)
    if cloud.n_points < 2:
        raise ParameterError("classification needs at least 2 points")
    seconds: dict[str, float] = {}

    started = time.perf_counter()
    tree = cKDTree(cloud.xyz)
    samples = evaluate_densities(
        sample_spheres(cloud, params.n_seeds, params.sphere_radius,
                       params.rng_seed, tree),
        cloud.xyz)
    usable_densities = np.array(
        [s.projection_density for s in samples if is_usable(s)])
    if usable_densities.size == 0:
        raise EmptyClassError(
            "no sampling sphere had enough members; the cloud is too sparse "
            "for density-based training selection")
    lower_q, upper_q = quarter_thresholds(usable_densities)
    wood_train, leaf_train = select_seed_classes(samples, lower_q, upper_q)
    threshold = fit_intensity_threshold(cloud.intensity[wood_train],
                                        cloud.intensity[leaf_train])
    wood_a, leaf_a = classify_by_intensity(cloud.intensity, threshold.value)
    seconds["intensity"] = time.perf_counter() - started

    started = time.perf_counter()
    wood_b, leaf_b = knn_refine(cloud.xyz, wood_a, scan_config.angular_step,
                                params.k_neighbors,
                                params.neighbor_ratio_threshold)
    if wood_b.size == 0:
        raise EmptyClassError(
            "the spacing refinement rejected every wood candidate; the "
            "angular step or the ratio threshold does not match this cloud")
    seconds["spacing"] = time.perf_counter() - started

    started = time.perf_counter()
    wood_grid = build_voxel_grid(cloud.xyz, wood_b, params.voxel_divisions)
    wood_c, leaf_c = voxel_refine(wood_grid, scan_config.angular_step,
                                  params.voxel_ratio_threshold)
    seconds["density"] = time.perf_counter() - started

    combined_leaf = np.sort(np.concatenate([leaf_a, leaf_b, leaf_c]))

    started = time.perf_counter()
    full_grid = build_voxel_grid(cloud.xyz, np.arange(cloud.n_points),
                                 params.voxel_divisions)
    final_wood, final_leaf = verify_wood(cloud, wood_c, combined_leaf,
                                         full_grid, scan_config, params,
                                         threshold.value)
    seconds["verification"] = time.perf_counter() - started

    labels = np.full(cloud.n_points, ClassLabel.WOOD, dtype=np.int8)
    labels[final_leaf] = ClassLabel.LEAF
    trace = StageTrace(threshold=threshold,
                       intensity_wood=wood_a, intensity_leaf=leaf_a,
                       spacing_wood=wood_b, spacing_leaf=leaf_b,
                       density_wood=wood_c, density_leaf=leaf_c,
                       combined_leaf=combined_leaf,
                       final_wood=final_wood, final_leaf=final_leaf,
                       stage_seconds=seconds)
    return labels, trace


def estimate_angular_step(cloud: LabeledCloud, params: PipelineParams) -> float:
    """Estimate the scanner's angular step from the cloud itself.

    Members of the densest sampling spheres are assumed to lie on wood
    surfaces, where the nearest-neighbor distance tracks range times
    angular step; the median of that per-point ratio is returned. This is
    an estimate of last resort; prefer the instrument's recorded step.
    """
    validate_params(params)
    if cloud.n_points < 2:
        raise ParameterError("angular step estimation needs at least 2 points")
    tree = cKDTree(cloud.xyz)
    samples = evaluate_densities(
        sample_spheres(cloud, params.n_seeds, params.sphere_radius,
                       params.rng_seed, tree),
        cloud.xyz)
    usable = [s for s in samples if is_usable(s)]
    if not usable:
        raise EmptyClassError(
            "no sampling sphere had enough members to estimate from")
    densities = np.array([s.projection_density for s in usable])
    _, upper_q = quarter_thresholds(densities)
    dense = [s for s in usable if s.projection_density > upper_q]
    if not dense:
        raise EmptyClassError(
            "no sampling sphere was dense enough to pass for a wood surface")
    points = np.unique(np.concatenate([s.member_indices for s in dense]))
    distances, _ = tree.query(cloud.xyz[points], k=2, workers=-1)
    ranges = np.linalg.norm(cloud.xyz[points], axis=1)
    usable_range = ranges > 0
    if not usable_range.any():
        raise ParameterError("wood-candidate points coincide with the scanner")
    return float(np.median(distances[usable_range, 1] / ranges[usable_range]))
