"""First classification stage: density-guided intensity thresholding.

Random spheres are sampled across the cloud; each sphere's members are
projected to the horizontal plane and a projection density (points per
square meter of convex-hull area) is computed. Spheres in the top quarter
of the density interval supply wood training intensities, the bottom
quarter supplies leaf training intensities, and the crossing of the two
smoothed intensity histograms becomes the split threshold.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
from scipy.spatial import ConvexHull, QhullError, cKDTree

from .cloud import LabeledCloud
from .errors import EmptyClassError, ParameterError

# Spheres with fewer members carry no usable density information: the
# convex hull of so few projections is degenerate or meaningless.
MIN_SPHERE_MEMBERS = 5

# Floor for the projected hull area; collinear or coincident projections
# would otherwise divide by zero.
HULL_AREA_FLOOR = 1e-6

HISTOGRAM_BINS = 100
SMOOTHING_WINDOW = 5


@dataclass(frozen=True)
class SphereSample:
    """One density sampling sphere.

    ``member_indices`` lists every cloud point within the sampling radius of
    the seed, the seed itself included, ascending. ``projection_density`` is
    NaN until evaluated.
    """

    seed_index: int
    member_indices: np.ndarray
    projection_density: float = float("nan")


class ThresholdProvenance(Enum):
    """How the intensity threshold was obtained."""

    CURVE_INTERSECTION = "curve_intersection"
    MIDPOINT_FALLBACK = "midpoint_fallback"


@dataclass(frozen=True)
class IntensityThreshold:
    """The intensity split value and how it was derived."""

    value: float
    provenance: ThresholdProvenance


def sample_spheres(cloud: LabeledCloud, n_seeds: int, sphere_radius: float,
                   rng_seed: int, tree: cKDTree | None = None) -> list[SphereSample]:
    """Draw ``n_seeds`` random sampling spheres over the cloud.

    Seeds are drawn uniformly without replacement (with replacement once
    ``n_seeds`` exceeds the point count). The draw is made against a
    canonical coordinate ordering of the points, so the sampled locations
    depend only on the geometry and the seed, not on point storage order.
    """
    if cloud.n_points < 1:
        raise ParameterError("cannot sample an empty cloud")
    if n_seeds < 1:
        raise ParameterError(f"n_seeds must be >= 1, got {n_seeds}")
    if sphere_radius <= 0:
        raise ParameterError(f"sphere_radius must be > 0, got {sphere_radius}")

    xyz = cloud.xyz
    canonical = np.lexsort((cloud.intensity, xyz[:, 2], xyz[:, 1], xyz[:, 0]))
    rng = np.random.default_rng(rng_seed)
    n = cloud.n_points
    if n_seeds <= n:
        draw = rng.choice(n, size=n_seeds, replace=False)
    else:
        draw = rng.choice(n, size=n_seeds, replace=True)
    seeds = canonical[draw]

    if tree is None:
        tree = cKDTree(xyz)
    member_lists = tree.query_ball_point(xyz[seeds], sphere_radius, workers=-1)
    return [
        SphereSample(seed_index=int(seed), member_indices=np.sort(np.asarray(members, dtype=np.intp)))
        for seed, members in zip(seeds, member_lists)
    ]


def projection_density(sample: SphereSample, xyz: np.ndarray) -> float:
    """Points per square meter of the members' horizontal footprint.

    Members are projected to (x, y); the density is the member count over
    the area of their 2D convex hull, floored at ``HULL_AREA_FLOOR`` so that
    degenerate (collinear or coincident) projections stay finite.
    """
    members = sample.member_indices
    if members.size < 1:
        raise ParameterError("sphere sample has no members")
    flat = np.asarray(xyz, dtype=np.float64)[members, :2]
    area = 0.0
    if flat.shape[0] >= 3:
        # Canonical vertex order keeps the hull arithmetic independent of
        # point storage order.
        flat = flat[np.lexsort((flat[:, 1], flat[:, 0]))]
        try:
            area = float(ConvexHull(flat).volume)  # 2D hull: volume is the area
        except QhullError:
            area = 0.0
    return members.size / max(area, HULL_AREA_FLOOR)


def evaluate_densities(samples: list[SphereSample], xyz: np.ndarray) -> list[SphereSample]:
    """Return the samples with ``projection_density`` filled in."""
    return [replace(s, projection_density=projection_density(s, xyz)) for s in samples]


def is_usable(sample: SphereSample) -> bool:
    """Whether a sphere carries enough members to contribute a density."""
    return sample.member_indices.size >= MIN_SPHERE_MEMBERS


def quarter_thresholds(densities: np.ndarray) -> tuple[float, float]:
    """Quarter the observed density interval.

    Returns (lower quarter, upper quarter): the values one quarter above the
    minimum and one quarter below the maximum of the input range.
    """
    densities = np.asarray(densities, dtype=np.float64)
    if densities.size == 0:
        raise ParameterError("no densities to quarter")
    lo = float(densities.min())
    hi = float(densities.max())
    span = hi - lo
    return lo + span / 4.0, hi - span / 4.0


def select_seed_classes(samples: list[SphereSample], lower_quarter: float,
                        upper_quarter: float) -> tuple[np.ndarray, np.ndarray]:
    """Split sphere members into wood and leaf training point sets.

    Spheres denser than ``upper_quarter`` contribute their members as wood
    training points; spheres sparser than ``lower_quarter`` contribute leaf
    training points. Mid-band spheres are discarded. A point caught on both
    sides (overlapping spheres) is contradictory supervision and is dropped
    from both sets.
    """
    usable = [s for s in samples if is_usable(s)]
    wood_spheres = [s for s in usable if s.projection_density > upper_quarter]
    leaf_spheres = [s for s in usable if s.projection_density < lower_quarter]
    if not wood_spheres or not leaf_spheres:
        side = "dense (wood)" if not wood_spheres else "sparse (leaf)"
        raise EmptyClassError(
            f"density sampling found no {side} spheres; "
            "the cloud may lack one material or sampling is too sparse")

    wood = np.unique(np.concatenate([s.member_indices for s in wood_spheres]))
    leaf = np.unique(np.concatenate([s.member_indices for s in leaf_spheres]))
    overlap = np.intersect1d(wood, leaf, assume_unique=True)
    if overlap.size:
        wood = np.setdiff1d(wood, overlap, assume_unique=True)
        leaf = np.setdiff1d(leaf, overlap, assume_unique=True)
    if wood.size == 0 or leaf.size == 0:
        side = "wood" if wood.size == 0 else "leaf"
        raise EmptyClassError(f"{side} training set is empty after dropping overlap points")
    return wood, leaf


def _smooth(counts: np.ndarray) -> np.ndarray:
    kernel = np.full(SMOOTHING_WINDOW, 1.0 / SMOOTHING_WINDOW)
    return np.convolve(counts, kernel, mode="same")


def fit_intensity_threshold(wood_intensities: np.ndarray,
                            leaf_intensities: np.ndarray) -> IntensityThreshold:
    """Find the intensity value separating the two training distributions.

    Both sets are binned into a shared 100-bin histogram spanning their
    combined range, normalized, and smoothed with a 5-bin centered moving
    average. The threshold is the curve crossing between the leaf peak and
    the wood peak (linear interpolation between bin centers). When the
    histograms never cross there, the midpoint of the two sample means is
    returned instead, flagged as a fallback.
    """
    wood = np.asarray(wood_intensities, dtype=np.float64).ravel()
    leaf = np.asarray(leaf_intensities, dtype=np.float64).ravel()
    if wood.size == 0 or leaf.size == 0:
        raise ParameterError("both training intensity sets must be non-empty")

    # Sorting before the mean keeps the fallback value independent of input
    # order (float addition is not associative).
    wood_mean = float(np.sort(wood).mean())
    leaf_mean = float(np.sort(leaf).mean())
    fallback = IntensityThreshold(value=(wood_mean + leaf_mean) / 2.0,
                                  provenance=ThresholdProvenance.MIDPOINT_FALLBACK)

    lo = float(min(wood.min(), leaf.min()))
    hi = float(max(wood.max(), leaf.max()))
    if hi <= lo:
        return fallback

    edges = np.linspace(lo, hi, HISTOGRAM_BINS + 1)
    centers = 0.5 * (edges[:-1] + edges[1:])
    wood_curve = _smooth(np.histogram(wood, bins=edges)[0] / wood.size)
    leaf_curve = _smooth(np.histogram(leaf, bins=edges)[0] / leaf.size)

    peak_wood = int(np.argmax(wood_curve))
    peak_leaf = int(np.argmax(leaf_curve))
    if peak_wood < peak_leaf:
        warnings.warn(
            "wood intensity peak lies below the leaf peak; "
            "proceeding with the interval between them", stacklevel=2)
    a, b = min(peak_leaf, peak_wood), max(peak_leaf, peak_wood)

    diff = wood_curve - leaf_curve
    for j in range(a, b):
        d0, d1 = diff[j], diff[j + 1]
        if d0 == 0.0 and d1 == 0.0:
            continue
        if d0 == 0.0:
            return IntensityThreshold(float(centers[j]), ThresholdProvenance.CURVE_INTERSECTION)
        if d0 * d1 < 0.0 or d1 == 0.0:
            t = centers[j] + (centers[j + 1] - centers[j]) * (-d0) / (d1 - d0)
            return IntensityThreshold(float(t), ThresholdProvenance.CURVE_INTERSECTION)
    return fallback


def classify_by_intensity(intensity: np.ndarray,
                          threshold: float) -> tuple[np.ndarray, np.ndarray]:
    """Split all points by intensity: at or above the threshold is wood.

    Returns (wood indices, leaf indices), each ascending; together they
    partition the cloud.
    """
    if not np.isfinite(threshold):
        raise ParameterError(f"threshold must be finite, got {threshold!r}")
    intensity = np.asarray(intensity, dtype=np.float64)
    wood_mask = intensity >= threshold
    return np.flatnonzero(wood_mask), np.flatnonzero(~wood_mask)
