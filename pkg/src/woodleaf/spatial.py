"""Spatial substrates: k-nearest-neighbor index and voxel partition."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.spatial import cKDTree

from .errors import ParameterError


class NeighborMode(Enum):
    """Voxel adjacency: 8 neighbors in one z-layer, or the full 26-cell cube."""

    SAME_LAYER = "same_layer"
    CUBE = "cube"


_SAME_LAYER_OFFSETS = np.array(
    [(dx, dy, 0) for dx in (-1, 0, 1) for dy in (-1, 0, 1) if (dx, dy) != (0, 0)],
    dtype=np.int64,
)
_CUBE_OFFSETS = np.array(
    [(dx, dy, dz)
     for dx in (-1, 0, 1) for dy in (-1, 0, 1) for dz in (-1, 0, 1)
     if (dx, dy, dz) != (0, 0, 0)],
    dtype=np.int64,
)


def _offsets_for(mode: NeighborMode) -> np.ndarray:
    return _SAME_LAYER_OFFSETS if mode is NeighborMode.SAME_LAYER else _CUBE_OFFSETS


class NeighborIndex:
    """Nearest-neighbor queries over a subset of cloud points.

    The index is built over ``xyz[subset]`` only; queries answer in terms of
    original point indices. Results are deterministic: exact ties are broken
    toward the lower point index.
    """

    def __init__(self, xyz: np.ndarray, subset: np.ndarray) -> None:
        xyz = np.asarray(xyz, dtype=np.float64)
        subset = np.asarray(subset, dtype=np.intp)
        if subset.size == 0:
            raise ParameterError("neighbor index needs a non-empty point subset")
        self.subset = np.sort(subset)
        self._xyz = xyz
        self._pts = xyz[self.subset]
        self._tree = cKDTree(self._pts)

    @property
    def size(self) -> int:
        return int(self.subset.size)

    def _require_member(self, query_index: int) -> None:
        pos = np.searchsorted(self.subset, query_index)
        if pos >= self.subset.size or self.subset[pos] != query_index:
            raise ParameterError(f"query point {query_index} is not in the indexed subset")

    def k_nearest(self, query_index: int, k: int) -> list[tuple[int, float]]:
        """The ``k`` nearest indexed points to ``query_index``, ascending.

        The query point itself is excluded. Returns ``min(k, size - 1)``
        pairs of (point index, Euclidean distance), sorted by distance and
        then by index so that equidistant neighbors resolve identically on
        every run.
        """
        if k < 1:
            raise ParameterError(f"k must be >= 1, got {k}")
        self._require_member(query_index)
        if self.subset.size == 1:
            return []
        q = self._xyz[query_index]
        kq = min(k + 1, self.subset.size)
        dist, _ = self._tree.query(q, k=kq)
        radius = float(np.atleast_1d(dist)[-1])
        # Re-query at the k-th radius so ties just beyond the cutoff are seen.
        local = self._tree.query_ball_point(q, radius * (1.0 + 1e-12))
        cand = self.subset[np.asarray(local, dtype=np.intp)]
        cand = cand[cand != query_index]
        d = np.linalg.norm(self._xyz[cand] - q, axis=1)
        order = np.lexsort((cand, d))[:k]
        return [(int(cand[i]), float(d[i])) for i in order]

    def mean_neighbor_distances(self, k: int) -> np.ndarray:
        """Mean distance from every indexed point to its ``k`` nearest others.

        When the subset holds fewer than ``k + 1`` points the mean runs over
        the neighbors that exist. Requires at least 2 indexed points.
        """
        if k < 1:
            raise ParameterError(f"k must be >= 1, got {k}")
        if self.subset.size < 2:
            raise ParameterError("mean neighbor distance needs at least 2 indexed points")
        kq = min(k + 1, self.subset.size)
        dist, _ = self._tree.query(self._pts, k=kq, workers=-1)
        # Column 0 is a zero-distance hit (the point itself or a coincident
        # duplicate); dropping one zero leaves exactly the k nearest others.
        return dist[:, 1:].mean(axis=1)


def build_neighbor_index(xyz: np.ndarray, subset: np.ndarray) -> NeighborIndex:
    """Build a ``NeighborIndex`` over ``xyz[subset]``."""
    return NeighborIndex(xyz, subset)


@dataclass
class VoxelBuckets:
    """Points grouped by voxel, in CSR layout.

    ``ids`` are the sorted linear voxel ids that hold at least one point;
    ``points[offsets[i]:offsets[i + 1]]`` are the point indices in voxel
    ``ids[i]``, ascending.
    """

    ids: np.ndarray
    offsets: np.ndarray
    points: np.ndarray

    def bucket(self, linear_id: int) -> np.ndarray:
        """Point indices in one voxel (empty when the voxel holds none)."""
        pos = np.searchsorted(self.ids, linear_id)
        if pos >= self.ids.size or self.ids[pos] != linear_id:
            return np.empty(0, dtype=self.points.dtype)
        return self.points[self.offsets[pos]:self.offsets[pos + 1]]

    def to_dict(self, grid: "VoxelGrid") -> dict[tuple[int, int, int], np.ndarray]:
        """Materialize as {(ix, iy, iz): point indices}; test-sized use only."""
        out: dict[tuple[int, int, int], np.ndarray] = {}
        for pos, lin in enumerate(self.ids):
            key = tuple(int(c) for c in grid.decompose(np.array([lin]))[0])
            out[key] = self.points[self.offsets[pos]:self.offsets[pos + 1]]
        return out


def _group_by_voxel(voxel_ids: np.ndarray, point_indices: np.ndarray) -> VoxelBuckets:
    order = np.argsort(voxel_ids, kind="stable")
    sorted_ids = voxel_ids[order]
    ids, counts = np.unique(sorted_ids, return_counts=True)
    offsets = np.concatenate(([0], np.cumsum(counts)))
    return VoxelBuckets(ids=ids, offsets=offsets, points=point_indices[order])


class VoxelGrid:
    """Axis-aligned voxel partition of the full cloud's bounding box.

    The box always spans every point of the cloud, not just the indexed
    subset, so any point can be located in the same grid later. Each axis is
    divided into ``divisions`` equal parts; degenerate (zero-extent) axes are
    padded by 1e-6 m so cell sizes stay positive. Points on a max face clamp
    into the last cell.
    """

    def __init__(self, xyz: np.ndarray, subset: np.ndarray, divisions: int) -> None:
        if divisions < 1:
            raise ParameterError(f"divisions must be >= 1, got {divisions}")
        xyz = np.asarray(xyz, dtype=np.float64)
        subset = np.asarray(subset, dtype=np.intp)
        if xyz.shape[0] == 0:
            raise ParameterError("voxel grid needs a non-empty cloud")
        if subset.size == 0:
            raise ParameterError("voxel grid needs a non-empty point subset")
        self._xyz = xyz
        self.divisions = int(divisions)
        self.box_min = xyz.min(axis=0)
        box_max = xyz.max(axis=0)
        degenerate = box_max - self.box_min <= 0.0
        box_max = np.where(degenerate, self.box_min + 1e-6, box_max)
        self.box_max = box_max
        self.sizes = (self.box_max - self.box_min) / self.divisions

        self.subset = np.sort(subset)
        self.point_voxel_ids = self.voxel_ids_of(xyz[self.subset])
        buckets = _group_by_voxel(self.point_voxel_ids, self.subset)
        self.occupied_ids = buckets.ids
        self.occupied_counts = np.diff(buckets.offsets)
        self._buckets = buckets

    # ---- coordinate arithmetic -------------------------------------------

    def voxel_ids_of(self, points: np.ndarray) -> np.ndarray:
        """Linear voxel id for each row of ``points`` (clamped into the box)."""
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        idx = np.floor((points - self.box_min) / self.sizes).astype(np.int64)
        np.clip(idx, 0, self.divisions - 1, out=idx)
        return self.compose(idx[:, 0], idx[:, 1], idx[:, 2])

    def compose(self, ix: np.ndarray, iy: np.ndarray, iz: np.ndarray) -> np.ndarray:
        d = np.int64(self.divisions)
        return (np.asarray(ix, dtype=np.int64) * d + np.asarray(iy, dtype=np.int64)) * d \
            + np.asarray(iz, dtype=np.int64)

    def decompose(self, linear_ids: np.ndarray) -> np.ndarray:
        lin = np.asarray(linear_ids, dtype=np.int64)
        d = np.int64(self.divisions)
        iz = lin % d
        iy = (lin // d) % d
        ix = lin // (d * d)
        return np.stack([ix, iy, iz], axis=-1)

    def centers_of(self, linear_ids: np.ndarray) -> np.ndarray:
        """Geometric center of each voxel, in cloud coordinates."""
        idx = self.decompose(linear_ids)
        return self.box_min + (idx + 0.5) * self.sizes

    # ---- occupancy --------------------------------------------------------

    def points_in(self, linear_id: int) -> np.ndarray:
        """Indexed points inside one voxel."""
        return self._buckets.bucket(linear_id)

    def buckets(self) -> VoxelBuckets:
        """CSR buckets of the build-time subset."""
        return self._buckets

    def neighbor_ids(self, linear_ids: np.ndarray, mode: NeighborMode) -> np.ndarray:
        """Neighbor linear ids for each input voxel; -1 marks out-of-grid slots.

        Output shape is (n, 8) for same-layer adjacency and (n, 26) for the
        full cube. The center voxel is never included.
        """
        idx = self.decompose(np.asarray(linear_ids, dtype=np.int64))
        offs = _offsets_for(mode)
        nbr = idx[:, None, :] + offs[None, :, :]
        valid = ((nbr >= 0) & (nbr < self.divisions)).all(axis=2)
        out = np.where(valid, self.compose(nbr[..., 0], nbr[..., 1], nbr[..., 2]), -1)
        return out


def build_voxel_grid(xyz: np.ndarray, subset: np.ndarray, divisions: int) -> VoxelGrid:
    """Build a ``VoxelGrid`` over the full cloud box, bucketing only ``subset``."""
    return VoxelGrid(xyz, subset, divisions)


def voxel_neighbors(grid: VoxelGrid, voxel: tuple[int, int, int],
                    mode: NeighborMode) -> list[tuple[int, int, int]]:
    """Adjacent voxel indices of ``voxel``, clipped at the grid edges.

    Same-layer adjacency yields up to 8 neighbors at the same iz; cube
    adjacency yields up to 26. The center voxel itself is excluded.
    """
    ix, iy, iz = (int(c) for c in voxel)
    d = grid.divisions
    if not (0 <= ix < d and 0 <= iy < d and 0 <= iz < d):
        raise ParameterError(f"voxel {voxel} outside a {d}^3 grid")
    out = []
    for dx, dy, dz in _offsets_for(mode):
        jx, jy, jz = ix + int(dx), iy + int(dy), iz + int(dz)
        if 0 <= jx < d and 0 <= jy < d and 0 <= jz < d:
            out.append((jx, jy, jz))
    return sorted(out)


def reindex_points(grid: VoxelGrid, subset: np.ndarray) -> VoxelBuckets:
    """Bucket an arbitrary point subset into an existing grid.

    Uses the same clamped floor-division rule as grid construction, so a
    reindex of the build subset reproduces the grid's own buckets.
    """
    subset = np.sort(np.asarray(subset, dtype=np.intp))
    if subset.size == 0:
        return VoxelBuckets(ids=np.empty(0, dtype=np.int64),
                            offsets=np.zeros(1, dtype=np.int64),
                            points=np.empty(0, dtype=np.intp))
    ids = grid.voxel_ids_of(grid._xyz[subset])
    return _group_by_voxel(ids, subset)
