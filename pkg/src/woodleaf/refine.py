"""Second and third classification stages: spacing and voxel-density tests.

Wood surfaces scanned at a fixed angular step have a predictable local
point spacing proportional to range. Points whose mean neighbor distance
exceeds that expectation by more than a fixed ratio are re-labeled leaf.
The survivors are then voxelized; voxels holding far fewer points than the
scan geometry predicts, and voxels with no occupied neighbor at all, are
re-labeled leaf wholesale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .spatial import NeighborIndex, NeighborMode, VoxelGrid


def spacing_at(point: np.ndarray, angular_step: float) -> float:
    """Expected local point spacing at one scanner-centered position.

    The spacing is the point's range times the angular step. A point at the
    scanner itself has no defined spacing.
    """
    if angular_step <= 0:
        raise ParameterError(f"angular_step must be > 0, got {angular_step}")
    d = float(np.linalg.norm(np.asarray(point, dtype=np.float64)))
    if d == 0.0:
        raise ParameterError("point coincides with the scanner; spacing is undefined")
    return d * angular_step


def expected_spacing(ranges: np.ndarray, angular_step: float) -> np.ndarray:
    """Vectorized expected spacing for an array of ranges."""
    ranges = np.asarray(ranges, dtype=np.float64)
    if angular_step <= 0:
        raise ParameterError(f"angular_step must be > 0, got {angular_step}")
    if (ranges <= 0.0).any():
        raise ParameterError("every point must lie at positive range from the scanner")
    return ranges * angular_step


def mean_neighbor_distance(index: NeighborIndex, point_index: int, k: int = 8) -> float:
    """Mean Euclidean distance from one point to its ``k`` nearest indexed peers.

    With fewer than ``k`` peers available the mean runs over those present.
    """
    if index.size < 2:
        raise ParameterError("mean neighbor distance needs at least 2 indexed points")
    neighbors = index.k_nearest(point_index, k)
    return float(np.mean([d for _, d in neighbors]))


def knn_refine(xyz: np.ndarray, wood_indices: np.ndarray, angular_step: float,
               k: int, ratio_threshold: float) -> tuple[np.ndarray, np.ndarray]:
    """Re-test intensity-classified wood points by local spacing.

    For each candidate, the mean distance to its ``k`` nearest candidates is
    compared against the expected spacing at its range; points exceeding
    ``ratio_threshold`` times the expectation are handed back to the leaf
    side. Returns (kept wood, re-labeled leaf), ascending, partitioning the
    input set.
    """
    wood_indices = np.sort(np.asarray(wood_indices, dtype=np.intp))
    if wood_indices.size == 0:
        raise ParameterError("knn_refine needs a non-empty wood candidate set")
    index = NeighborIndex(xyz, wood_indices)
    mean_dist = index.mean_neighbor_distances(k)
    ranges = np.linalg.norm(np.asarray(xyz, dtype=np.float64)[index.subset], axis=1)
    spacing = expected_spacing(ranges, angular_step)
    keep = mean_dist <= ratio_threshold * spacing
    return index.subset[keep], index.subset[~keep]


def expected_voxel_count(sizes: np.ndarray, center_distance: float,
                         angular_step: float) -> float:
    """Points the scan pattern would deposit in a fully wood-filled voxel.

    Computed from the voxel's edge sizes, the distance of its center to the
    scanner, and the angular step: vertical extent over point spacing times
    horizontal diagonal over point spacing.
    """
    if angular_step <= 0:
        raise ParameterError(f"angular_step must be > 0, got {angular_step}")
    if center_distance <= 0:
        raise ParameterError("voxel center coincides with the scanner")
    sx, sy, sz = (float(s) for s in np.asarray(sizes, dtype=np.float64))
    spacing = center_distance * angular_step
    return (sz / spacing) * (float(np.hypot(sx, sy)) / spacing)


@dataclass(frozen=True)
class VoxelDensity:
    """Occupancy statistics for every occupied voxel of a grid.

    Arrays are aligned: ``ids[i]`` holds ``actual[i]`` points against an
    expectation of ``expected[i]``, giving ``ratio[i]``.
    """

    ids: np.ndarray
    actual: np.ndarray
    expected: np.ndarray
    ratio: np.ndarray


def voxel_density_records(grid: VoxelGrid, angular_step: float) -> VoxelDensity:
    """Actual versus expected point count for each occupied voxel."""
    centers = grid.centers_of(grid.occupied_ids)
    center_dist = np.linalg.norm(centers, axis=1)
    if (center_dist <= 0.0).any():
        raise ParameterError("a voxel center coincides with the scanner")
    spacing = center_dist * angular_step
    sx, sy, sz = (float(s) for s in grid.sizes)
    expected = (sz / spacing) * (np.hypot(sx, sy) / spacing)
    actual = grid.occupied_counts.astype(np.float64)
    return VoxelDensity(ids=grid.occupied_ids, actual=actual,
                        expected=expected, ratio=actual / expected)


def isolated_voxels(grid: VoxelGrid) -> np.ndarray:
    """Boolean mask over occupied voxels with no occupied 26-neighbor."""
    occupied = grid.occupied_ids
    nbr = grid.neighbor_ids(occupied, NeighborMode.CUBE)
    valid = nbr >= 0
    pos = np.searchsorted(occupied, np.where(valid, nbr, 0))
    pos = np.minimum(pos, occupied.size - 1)
    hit = valid & (occupied[pos] == np.where(valid, nbr, -2))
    return ~hit.any(axis=1)


def voxel_refine(grid: VoxelGrid, angular_step: float,
                 ratio_threshold: float) -> tuple[np.ndarray, np.ndarray]:
    """Re-label whole voxels whose occupancy is too low for wood.

    ``grid`` must be bucketed with the current wood candidate set. A voxel
    whose actual/expected ratio falls below ``ratio_threshold`` is a leaf
    voxel; so is any occupied voxel with zero occupied neighbors in the
    surrounding 26-cell cube, whatever its ratio. All points of leaf voxels
    are re-labeled leaf. Returns (kept wood, re-labeled leaf), ascending.
    """
    if ratio_threshold <= 0:
        raise ParameterError(f"ratio_threshold must be > 0, got {ratio_threshold}")
    density = voxel_density_records(grid, angular_step)
    leaf_voxel = (density.ratio < ratio_threshold) | isolated_voxels(grid)
    leaf_ids = density.ids[leaf_voxel]

    point_vox = grid.point_voxel_ids
    pos = np.searchsorted(leaf_ids, point_vox)
    pos = np.minimum(pos, max(leaf_ids.size - 1, 0))
    in_leaf = leaf_ids.size > 0
    to_leaf = (leaf_ids[pos] == point_vox) if in_leaf else np.zeros(point_vox.size, dtype=bool)
    return grid.subset[~to_leaf], grid.subset[to_leaf]
