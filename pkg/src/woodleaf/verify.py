"""Wood verification: recover wood points mis-labeled leaf by earlier stages.

Below a height split the trunk dominates, so whole voxels are promoted by
region growth over same-layer neighbors. Above it, individual leaf-labeled
points are re-tested against nearby wood points with distance and intensity
rules. Verification only moves points from leaf to wood, never the reverse.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cloud import LabeledCloud
from .errors import ParameterError
from .params import PipelineParams, ScanConfig
from .spatial import NeighborMode, VoxelGrid, reindex_points

# Pair tests evaluated per vectorized batch; bounds peak memory, not results.
_PAIR_CHUNK = 1_000_000


def tree_height_split(xyz: np.ndarray, height_fraction: float) -> float:
    """Height below which whole-voxel region growth applies.

    Returns ``z_min + height_fraction * (z_max - z_min)`` over the cloud.
    """
    xyz = np.asarray(xyz, dtype=np.float64)
    if xyz.size == 0:
        raise ParameterError("height split needs a non-empty cloud")
    z = xyz[:, 2]
    z_min = float(z.min())
    return z_min + height_fraction * (float(z.max()) - z_min)


def _member_mask(sorted_values: np.ndarray, queries: np.ndarray) -> np.ndarray:
    """Membership of ``queries`` in an ascending unique array, any shape."""
    if sorted_values.size == 0:
        return np.zeros(queries.shape, dtype=bool)
    pos = np.minimum(np.searchsorted(sorted_values, queries), sorted_values.size - 1)
    return sorted_values[pos] == queries


def _voxels_of(grid: VoxelGrid, point_indices: np.ndarray) -> np.ndarray:
    """Voxel linear ids of bucketed points, via the grid's stored mapping."""
    pos = np.searchsorted(grid.subset, point_indices)
    return grid.point_voxel_ids[pos]


def _below_split(grid: VoxelGrid, linear_ids: np.ndarray, z_split: float) -> np.ndarray:
    return grid.centers_of(linear_ids)[:, 2] < z_split


@dataclass
class VerificationState:
    """Mutable bookkeeping for one verification run.

    ``wood`` and ``leaf`` are ascending point-index arrays partitioning the
    cloud. ``grid`` buckets every point. ``frontier`` holds the wood voxels
    whose neighborhoods still await checks; the growth loops maintain it.
    """

    wood: np.ndarray
    leaf: np.ndarray
    grid: VoxelGrid
    frontier: np.ndarray
    intensity_threshold: float
    sd1: float
    sd2: float
    z_split: float


def init_verification(xyz: np.ndarray, wood_indices: np.ndarray,
                      leaf_indices: np.ndarray, grid: VoxelGrid,
                      intensity_threshold: float, sd1: float, sd2: float,
                      height_fraction: float) -> VerificationState:
    """Validate the partition and assemble the working state."""
    wood = np.sort(np.asarray(wood_indices, dtype=np.intp))
    leaf = np.sort(np.asarray(leaf_indices, dtype=np.intp))
    if wood.size + leaf.size != grid.subset.size or not np.array_equal(
            np.union1d(wood, leaf), grid.subset):
        raise ParameterError("wood and leaf sets must partition the bucketed cloud")
    z_split = tree_height_split(xyz, height_fraction)
    if wood.size:
        seeds = np.unique(_voxels_of(grid, wood))
        frontier = seeds[_below_split(grid, seeds, z_split)]
    else:
        frontier = np.empty(0, dtype=np.int64)
    return VerificationState(wood=wood, leaf=leaf, grid=grid, frontier=frontier,
                             intensity_threshold=intensity_threshold,
                             sd1=sd1, sd2=sd2, z_split=z_split)


def grow_lower_region(state: VerificationState) -> int:
    """Voxel-level promotion below the height split.

    Starting from voxels holding at least one wood point, any occupied
    neighbor in the same horizontal layer joins the wood region, and every
    leaf point inside a voxel reached this way is promoted. Growth repeats
    until no voxel joins. A starting voxel with no occupied same-layer
    neighbor is never reached back, so its own leaf points stay leaf.
    Returns the number of promoted points.
    """
    grid = state.grid
    occupied = grid.occupied_ids
    lower = occupied[_below_split(grid, occupied, state.z_split)]
    if lower.size == 0 or state.wood.size == 0:
        state.frontier = np.empty(0, dtype=np.int64)
        return 0

    seeds = np.unique(_voxels_of(grid, state.wood))
    seeds = seeds[_member_mask(lower, seeds)]
    member = np.zeros(lower.size, dtype=bool)
    member[np.searchsorted(lower, seeds)] = True
    frontier = seeds
    while frontier.size:
        state.frontier = frontier
        nbr = grid.neighbor_ids(frontier, NeighborMode.SAME_LAYER).ravel()
        nbr = nbr[nbr >= 0]
        reached = np.searchsorted(lower, nbr[_member_mask(lower, nbr)])
        fresh = np.unique(reached[~member[reached]])
        member[fresh] = True
        frontier = lower[fresh]
    state.frontier = np.empty(0, dtype=np.int64)

    region = lower[member]
    if region.size == 0:
        return 0
    nbr = grid.neighbor_ids(region, NeighborMode.SAME_LAYER)
    reached_back = _member_mask(lower, nbr).any(axis=1)
    promoted_vox = region[reached_back]
    if promoted_vox.size == 0 or state.leaf.size == 0:
        return 0

    take = _member_mask(promoted_vox, _voxels_of(grid, state.leaf))
    promoted = state.leaf[take]
    if promoted.size:
        state.wood = np.union1d(state.wood, promoted)
        state.leaf = state.leaf[~take]
    return int(promoted.size)


def _sweep(state: VerificationState, xyz: np.ndarray, intensity: np.ndarray,
           angular_step: float, frontier: np.ndarray,
           frontier_vox: np.ndarray) -> np.ndarray:
    """One synchronous pass of pair tests for the given wood points.

    Pairs each frontier wood point with the current leaf points in the
    3x3x3 voxel block around its voxel and returns the unique leaf indices
    that satisfy either promotion rule. Nothing is committed here.
    """
    grid = state.grid
    order = np.argsort(frontier_vox, kind="stable")
    wood_pts = frontier[order]
    by_vox = frontier_vox[order]
    uvox, wood_start = np.unique(by_vox, return_index=True)
    wood_end = np.append(wood_start[1:], by_vox.size)
    state.frontier = uvox

    leaf_csr = reindex_points(grid, state.leaf)
    if leaf_csr.points.size == 0:
        return np.empty(0, dtype=np.intp)

    block = np.concatenate(
        [uvox[:, None], grid.neighbor_ids(uvox, NeighborMode.CUBE)], axis=1)
    valid = block >= 0
    ids = leaf_csr.ids
    pos = np.minimum(np.searchsorted(ids, np.where(valid, block, 0)), ids.size - 1)
    hit = valid & (ids[pos] == block)
    seg_start = np.where(hit, leaf_csr.offsets[pos], 0)
    seg_len = np.where(hit, leaf_csr.offsets[pos + 1] - leaf_csr.offsets[pos], 0)

    leaf_counts = seg_len.sum(axis=1)
    flat_len = seg_len.ravel()
    nz = flat_len > 0
    if not nz.any():
        return np.empty(0, dtype=np.intp)
    fs, fl = seg_start.ravel()[nz], flat_len[nz]
    out_end = np.cumsum(fl)
    gathered = leaf_csr.points[np.repeat(fs - (out_end - fl), fl)
                               + np.arange(out_end[-1])]
    leaf_off = np.concatenate([[0], np.cumsum(leaf_counts)])

    pairs = (wood_end - wood_start) * leaf_counts
    pair_off = np.concatenate([[0], np.cumsum(pairs)])
    total_pairs = int(pair_off[-1])
    promoted = []
    for chunk_start in range(0, total_pairs, _PAIR_CHUNK):
        p = np.arange(chunk_start, min(chunk_start + _PAIR_CHUNK, total_pairs))
        vox = np.searchsorted(pair_off, p, side="right") - 1
        local = p - pair_off[vox]
        lcount = leaf_counts[vox]
        w_idx = wood_pts[wood_start[vox] + local // lcount]
        l_idx = gathered[leaf_off[vox] + local % lcount]
        delta = xyz[w_idx] - xyz[l_idx]
        d = np.sqrt(np.einsum("ij,ij->i", delta, delta))
        spacing = np.linalg.norm(xyz[w_idx], axis=1) * angular_step
        ok = (d <= state.sd1 * spacing) | (
            (d <= state.sd2 * spacing)
            & (intensity[l_idx] >= state.intensity_threshold))
        if ok.any():
            promoted.append(l_idx[ok])
    if not promoted:
        return np.empty(0, dtype=np.intp)
    return np.unique(np.concatenate(promoted))


def verify_upper_region(state: VerificationState, xyz: np.ndarray,
                        intensity: np.ndarray, angular_step: float,
                        sources: np.ndarray | None = None) -> int:
    """Point-level promotion at and above the height split.

    Each wood point whose voxel center sits at or above the split is paired
    with the leaf points of the surrounding 3x3x3 voxel block. A leaf point
    is promoted when it lies within sd1 expected spacings of the wood point,
    or within sd2 spacings while its intensity reaches the wood threshold.
    Promotions commit between sweeps, so results do not depend on iteration
    order; freshly promoted points drive later sweeps until none are added.
    Returns the number of promoted points.

    ``sources`` restricts the first sweep to the given wood points (later
    sweeps always run from fresh promotions only). Default: all wood points.
    """
    if angular_step <= 0:
        raise ParameterError(f"angular_step must be > 0, got {angular_step}")
    xyz = np.asarray(xyz, dtype=np.float64)
    intensity = np.asarray(intensity, dtype=np.float64)
    frontier = state.wood if sources is None else np.asarray(sources, dtype=np.intp)
    total = 0
    while frontier.size and state.leaf.size:
        fvox = _voxels_of(state.grid, frontier)
        upper = ~_below_split(state.grid, fvox, state.z_split)
        frontier, fvox = frontier[upper], fvox[upper]
        if frontier.size == 0:
            break
        promoted = _sweep(state, xyz, intensity, angular_step, frontier, fvox)
        if promoted.size == 0:
            break
        state.wood = np.union1d(state.wood, promoted)
        state.leaf = np.setdiff1d(state.leaf, promoted, assume_unique=True)
        total += int(promoted.size)
        frontier = promoted
    state.frontier = np.empty(0, dtype=np.int64)
    return total


def verify_wood(cloud: LabeledCloud, wood_indices: np.ndarray,
                leaf_indices: np.ndarray, grid: VoxelGrid,
                scan_config: ScanConfig, params: PipelineParams,
                intensity_threshold: float) -> tuple[np.ndarray, np.ndarray]:
    """Full verification pass over a classified cloud.

    Splits the tree at ``height_fraction`` of its height, grows the wood
    region voxel-wise below the split, then sweeps the point-level checks
    above it. The two phases alternate until neither promotes a point, so a
    second run is a no-op. Returns the final (wood, leaf) index arrays.
    """
    state = init_verification(cloud.xyz, wood_indices, leaf_indices, grid,
                              intensity_threshold, params.sd1, params.sd2,
                              params.height_fraction)
    sources: np.ndarray | None = state.wood
    while True:
        grew = grow_lower_region(state)
        swept = verify_upper_region(state, cloud.xyz, cloud.intensity,
                                    scan_config.angular_step, sources=sources)
        # Upper promotions can land below the split and seed more growth
        # there, but lower-voxel wood never drives upper checks, so only
        # fresh growth needs another look.
        sources = np.empty(0, dtype=np.intp)
        if grew == 0 and swept == 0:
            break
    return state.wood, state.leaf
