"""Synthetic labeled tree clouds for end-to-end testing.

A tree of cylinders (trunk, branches) and small disks (leaves) is sampled
by casting rays on a regular angular grid from a scanner at the origin,
so surface point spacing tracks range times angular step the way a real
scan's does. Occlusion is deliberately not modeled; every front surface
hit is kept. Leaf points get positional jitter, every point gets a small
ranging error along its ray, and intensities are drawn per class from
overlapping distributions. Output is deterministic under the seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cloud import ClassLabel, LabeledCloud
from .errors import ParameterError

# Ray-grid enumeration is chunked to bound peak memory.
_MAX_BLOCK_RAYS = 500_000
_PLACEMENT_ROUNDS = 200


@dataclass(frozen=True)
class SyntheticTreeSpec:
    """Geometry, scan pattern, and noise model of one synthetic tree.

    The trunk stands at ``scanner_distance`` along +x, vertically centered
    on the scanner height so elevation angles stay moderate. Branches
    attach above ``canopy_base_fraction`` of the trunk and lean upward by
    at most the given inclination above the horizontal. Leaf disks float
    in the canopy, at least ``min_leaf_clearance`` away from every wood
    axis so classes stay geometrically distinct. Intensity tuples are
    (mean, spread); the class distributions overlap by construction.
    """

    trunk_height: float = 12.0
    trunk_radius: float = 0.10
    branch_count: int = 30
    branch_inclination: tuple[float, float] = (0.0, 45.0)
    branch_radius: float = 0.03
    branch_length: float = 2.5
    leaf_disk_count: int = 2250
    leaf_disk_radius: float = 0.06
    canopy_base_fraction: float = 0.40
    min_leaf_clearance: float = 0.20
    scanner_distance: float = 15.0
    angular_step: float = 3.49e-4
    wood_intensity: tuple[float, float] = (60.0, 8.0)
    leaf_intensity: tuple[float, float] = (35.0, 8.0)
    leaf_jitter: float = 0.01
    range_noise: float = 0.002
    rng_seed: int = 0

    def __post_init__(self) -> None:
        problems = []
        for name in ("trunk_height", "trunk_radius", "branch_radius",
                     "branch_length", "leaf_disk_radius", "scanner_distance",
                     "angular_step"):
            if not getattr(self, name) > 0:
                problems.append(f"{name}={getattr(self, name)}: must be > 0")
        for name in ("branch_count", "leaf_disk_count"):
            if getattr(self, name) < 0:
                problems.append(f"{name}={getattr(self, name)}: must be >= 0")
        for name in ("min_leaf_clearance", "leaf_jitter", "range_noise"):
            if getattr(self, name) < 0:
                problems.append(f"{name}={getattr(self, name)}: must be >= 0")
        if not 0.0 < self.canopy_base_fraction < 1.0:
            problems.append(
                f"canopy_base_fraction={self.canopy_base_fraction}: "
                "must be in (0, 1)")
        lo, hi = self.branch_inclination
        if not (0.0 <= lo <= hi <= 89.0):
            problems.append(
                f"branch_inclination={self.branch_inclination}: "
                "must satisfy 0 <= low <= high <= 89 degrees")
        for name in ("wood_intensity", "leaf_intensity"):
            if not getattr(self, name)[1] > 0:
                problems.append(f"{name}={getattr(self, name)}: spread must be > 0")
        if not self.wood_intensity[0] > self.leaf_intensity[0]:
            problems.append(
                f"wood intensity mean {self.wood_intensity[0]} must exceed "
                f"leaf intensity mean {self.leaf_intensity[0]}")
        if self.scanner_distance <= (self.trunk_radius + self.branch_length
                                     + self.leaf_disk_radius + 0.5):
            problems.append(
                f"scanner_distance={self.scanner_distance}: scanner must "
                "stand clear of the canopy")
        if problems:
            raise ParameterError(
                "invalid synthetic tree spec:\n  " + "\n  ".join(problems))


def default_acceptance_tree() -> SyntheticTreeSpec:
    """The fixed tree used by the end-to-end acceptance run.

    A 12 m tree with a 0.10 m trunk and 30 branches, scanned from 15 m;
    sized to roughly 200k points with leaves outnumbering wood points.
    """
    return SyntheticTreeSpec(
        trunk_height=12.0,
        trunk_radius=0.10,
        branch_count=30,
        leaf_disk_count=2050,
        angular_step=6.0e-4,
        scanner_distance=15.0,
        rng_seed=42,
    )


def _ray_rows(angular_step: float, center: np.ndarray,
              bound_radius: float) -> tuple[np.ndarray, int, int]:
    """Elevation row indices and azimuth index span covering a sphere.

    The sphere (center, bound_radius) is bounded by a cone around the
    direction to its center; the returned grid block covers that cone with
    a small margin.
    """
    cx, cy, cz = (float(v) for v in center)
    dist = math.hypot(cx, cy, cz)
    if bound_radius >= dist:
        raise ParameterError("scanner lies inside a primitive's bounding sphere")
    phi_c = math.atan2(cy, cx)
    psi_c = math.atan2(cz, math.hypot(cx, cy))
    delta = math.asin(bound_radius / dist) + 2.0 * angular_step
    a_lo = math.ceil((phi_c - delta) / angular_step)
    a_hi = math.floor((phi_c + delta) / angular_step)
    e_lo = math.ceil((psi_c - delta) / angular_step)
    e_hi = math.floor((psi_c + delta) / angular_step)
    e_cap = math.floor((math.pi / 2) / angular_step) - 1
    rows = np.arange(max(e_lo, -e_cap), min(e_hi, e_cap) + 1)
    return rows, a_lo, a_hi


def _block_directions(angular_step: float, rows: np.ndarray,
                      a_lo: int, a_hi: int) -> np.ndarray:
    """Unit ray directions of one grid block, row-major, shape (n, 3)."""
    phi = np.arange(a_lo, a_hi + 1) * angular_step
    psi = rows * angular_step
    cos_psi, sin_psi = np.cos(psi), np.sin(psi)
    out = np.empty((psi.size, phi.size, 3))
    out[:, :, 0] = cos_psi[:, None] * np.cos(phi)[None, :]
    out[:, :, 1] = cos_psi[:, None] * np.sin(phi)[None, :]
    out[:, :, 2] = sin_psi[:, None]
    return out.reshape(-1, 3)


def _iter_blocks(angular_step: float, center: np.ndarray, bound_radius: float):
    """Yield direction blocks, each at most _MAX_BLOCK_RAYS rays."""
    rows, a_lo, a_hi = _ray_rows(angular_step, center, bound_radius)
    width = a_hi - a_lo + 1
    if rows.size == 0 or width <= 0:
        return
    per_chunk = max(1, _MAX_BLOCK_RAYS // width)
    for start in range(0, rows.size, per_chunk):
        yield _block_directions(angular_step, rows[start:start + per_chunk],
                                a_lo, a_hi)


def _cylinder_hits(angular_step: float, axis_start: np.ndarray,
                   axis_dir: np.ndarray, radius: float,
                   length: float) -> np.ndarray:
    """Front-surface ray hits on a finite cylinder, as (n, 3) positions."""
    a0 = np.asarray(axis_start, dtype=np.float64)
    v = np.asarray(axis_dir, dtype=np.float64)
    v = v / np.linalg.norm(v)
    center = a0 + v * (length / 2.0)
    bound = length / 2.0 + radius
    hits = []
    for u in _iter_blocks(angular_step, center, bound):
        uv = u @ v
        w = u - uv[:, None] * v
        ocv = float(-a0 @ v)
        q = -a0 - ocv * v
        qa = np.einsum("ij,ij->i", w, w)
        qb = 2.0 * (w @ q)
        qc = float(q @ q) - radius * radius
        disc = qb * qb - 4.0 * qa * qc
        ok = (disc >= 0.0) & (qa > 1e-300)
        root = np.sqrt(np.where(ok, disc, 0.0))
        t = np.where(ok, (-qb - root) / np.where(ok, 2.0 * qa, 1.0), -1.0)
        s = t * uv + ocv
        keep = ok & (t > 1e-9) & (s >= 0.0) & (s <= length)
        if keep.any():
            hits.append(t[keep, None] * u[keep])
    if not hits:
        return np.empty((0, 3))
    return np.concatenate(hits, axis=0)


def _disk_hits(angular_step: float, center: np.ndarray, normal: np.ndarray,
               radius: float) -> np.ndarray:
    """Ray hits on a flat disk, as (n, 3) positions."""
    c = np.asarray(center, dtype=np.float64)
    n = np.asarray(normal, dtype=np.float64)
    n = n / np.linalg.norm(n)
    plane = float(c @ n)
    hits = []
    for u in _iter_blocks(angular_step, c, radius):
        denom = u @ n
        ok = np.abs(denom) > 1e-12
        t = np.where(ok, plane / np.where(ok, denom, 1.0), -1.0)
        p = t[:, None] * u
        keep = ok & (t > 1e-9) & (
            np.einsum("ij,ij->i", p - c, p - c) <= radius * radius)
        if keep.any():
            hits.append(p[keep])
    if not hits:
        return np.empty((0, 3))
    return np.concatenate(hits, axis=0)


def _branch_layout(spec: SyntheticTreeSpec,
                   rng: np.random.Generator) -> list[tuple[np.ndarray, np.ndarray, float]]:
    """Branch segments as (start, unit direction, length) triples."""
    if spec.branch_count == 0:
        return []
    base_z = -spec.trunk_height / 2.0
    attach_hi = max(0.92, spec.canopy_base_fraction)
    attach = rng.uniform(spec.canopy_base_fraction, attach_hi, spec.branch_count)
    azimuth = rng.uniform(0.0, 2.0 * math.pi, spec.branch_count)
    lo, hi = np.radians(spec.branch_inclination)
    incline = rng.uniform(lo, hi, spec.branch_count)
    length = spec.branch_length * rng.uniform(0.7, 1.0, spec.branch_count)
    out = []
    for i in range(spec.branch_count):
        start = np.array([spec.scanner_distance, 0.0,
                          base_z + attach[i] * spec.trunk_height])
        direction = np.array([
            math.cos(incline[i]) * math.cos(azimuth[i]),
            math.cos(incline[i]) * math.sin(azimuth[i]),
            math.sin(incline[i]),
        ])
        out.append((start, direction, float(length[i])))
    return out


def _disk_layout(spec: SyntheticTreeSpec, rng: np.random.Generator,
                 branches: list[tuple[np.ndarray, np.ndarray, float]],
                 ) -> tuple[np.ndarray, np.ndarray]:
    """Disk centers and unit normals, all clear of every wood axis."""
    count = spec.leaf_disk_count
    if count == 0:
        return np.empty((0, 3)), np.empty((0, 3))
    base_z = -spec.trunk_height / 2.0
    z_lo = base_z + spec.canopy_base_fraction * spec.trunk_height
    z_hi = base_z + spec.trunk_height
    rho_lo = spec.trunk_radius + spec.min_leaf_clearance
    rho_hi = max(spec.branch_length, rho_lo + 4.0 * spec.leaf_disk_radius)
    keep_out = spec.min_leaf_clearance + spec.branch_radius

    if branches:
        starts = np.stack([b[0] for b in branches])
        dirs = np.stack([b[1] for b in branches])
        lens = np.array([b[2] for b in branches])

    centers = np.empty((0, 3))
    for _ in range(_PLACEMENT_ROUNDS):
        need = count - centers.shape[0]
        batch = 2 * need
        rho = np.sqrt(rng.uniform(rho_lo ** 2, rho_hi ** 2, batch))
        ang = rng.uniform(0.0, 2.0 * math.pi, batch)
        z = rng.uniform(z_lo, z_hi, batch)
        cand = np.column_stack([
            spec.scanner_distance + rho * np.cos(ang),
            rho * np.sin(ang),
            z,
        ])
        if branches:
            diff = cand[:, None, :] - starts[None, :, :]
            along = np.clip(np.einsum("ibk,bk->ib", diff, dirs), 0.0, lens)
            nearest = starts[None, :, :] + along[:, :, None] * dirs[None, :, :]
            gap = np.linalg.norm(cand[:, None, :] - nearest, axis=2)
            cand = cand[(gap >= keep_out).all(axis=1)]
        centers = np.vstack([centers, cand[:need]])
        if centers.shape[0] == count:
            break
    else:
        raise ParameterError(
            "could not place leaf disks clear of the wood; loosen the "
            "clearance or shrink the branch set")

    normals = rng.normal(size=(count, 3))
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    return centers, normals


def generate_tree(spec: SyntheticTreeSpec) -> LabeledCloud:
    """Scan the synthetic tree and return the labeled, scanner-centered cloud.

    Points arrive trunk first, then branches, then leaf disks, each block
    labeled by its generating primitive. Same spec, same cloud, bit for bit.
    """
    streams = np.random.SeedSequence(spec.rng_seed).spawn(6)
    branch_rng, disk_rng, jitter_rng, noise_rng, wood_rng, leaf_rng = (
        np.random.default_rng(s) for s in streams)

    base_z = -spec.trunk_height / 2.0
    trunk_start = np.array([spec.scanner_distance, 0.0, base_z])
    up = np.array([0.0, 0.0, 1.0])
    branches = _branch_layout(spec, branch_rng)
    wood_parts = [_cylinder_hits(spec.angular_step, trunk_start, up,
                                 spec.trunk_radius, spec.trunk_height)]
    for start, direction, length in branches:
        wood_parts.append(_cylinder_hits(spec.angular_step, start, direction,
                                         spec.branch_radius, length))

    centers, normals = _disk_layout(spec, disk_rng, branches)
    leaf_parts = [np.empty((0, 3))]
    for c, n in zip(centers, normals):
        leaf_parts.append(_disk_hits(spec.angular_step, c, n,
                                     spec.leaf_disk_radius))

    wood_xyz = np.concatenate(wood_parts, axis=0)
    leaf_xyz = np.concatenate(leaf_parts, axis=0)
    if spec.leaf_jitter > 0 and leaf_xyz.shape[0]:
        leaf_xyz = leaf_xyz + jitter_rng.uniform(
            -spec.leaf_jitter, spec.leaf_jitter, leaf_xyz.shape)

    xyz = np.concatenate([wood_xyz, leaf_xyz], axis=0)
    if spec.range_noise > 0 and xyz.shape[0]:
        ranges = np.linalg.norm(xyz, axis=1)
        shift = noise_rng.normal(0.0, spec.range_noise, xyz.shape[0])
        xyz = xyz * (1.0 + shift / ranges)[:, None]

    intensity = np.concatenate([
        wood_rng.normal(*spec.wood_intensity, wood_xyz.shape[0]),
        leaf_rng.normal(*spec.leaf_intensity, leaf_xyz.shape[0]),
    ])
    labels = np.concatenate([
        np.full(wood_xyz.shape[0], ClassLabel.WOOD, dtype=np.int8),
        np.full(leaf_xyz.shape[0], ClassLabel.LEAF, dtype=np.int8),
    ])
    return LabeledCloud(xyz=xyz, intensity=intensity, labels=labels,
                        scanner_position=np.zeros(3))
