"""Scikit-learn style front end for the classification pipeline.

The classifier is transductive, like a clustering estimator: fit consumes
one cloud and leaves per-point labels on ``labels_``. There is no separate
predict on unseen points; the pipeline's stages are defined only over a
complete scan.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_array

from .cloud import LabeledCloud
from .params import PipelineParams, ScanConfig
from .pipeline import classify


class WoodLeafClassifier(ClusterMixin, BaseEstimator):
    """Separate a terrestrial laser scan of a tree into wood and leaf points.

    Parameters
    ----------
    angular_step : float
        Scanner angular resolution in radians. Required; every geometric
        stage scales its expectations by range times this step.
    scanner_position : tuple of 3 floats, default (0, 0, 0)
        World position of the scanner; input rows are world coordinates.
    n_seeds : int, default 1000
        Sampling spheres drawn to pick intensity training points.
    sphere_radius : float, default 0.03
        Radius in meters of each sampling sphere.
    k_neighbors : int, default 8
        Neighbors in the mean-spacing test.
    neighbor_ratio_threshold : float, default 1.71
        Largest allowed mean-spacing over expected-spacing ratio for wood.
    voxel_divisions : int, default 100
        Divisions per axis of the density grid.
    voxel_ratio_threshold : float, default 0.1
        Smallest actual/expected voxel occupancy ratio kept as wood.
    sd1, sd2 : float, defaults 2 and 6
        Distance multipliers of the two verification promotion rules.
    height_fraction : float, default 1/3
        Fraction of tree height below which voxel region growth applies.
    random_state : int, default 0
        Seed for the sphere sampling draw.

    Attributes
    ----------
    labels_ : ndarray of shape (n_points,)
        0 for wood, 1 for leaf.
    intensity_threshold_ : float
        The fitted intensity split point.
    trace_ : StageTrace
        Per-stage index sets and timings.
    """

    def __init__(self, angular_step: float | None = None,
                 scanner_position: tuple[float, float, float] = (0.0, 0.0, 0.0),
                 n_seeds: int = 1000, sphere_radius: float = 0.03,
                 k_neighbors: int = 8, neighbor_ratio_threshold: float = 1.71,
                 voxel_divisions: int = 100, voxel_ratio_threshold: float = 0.1,
                 sd1: float = 2.0, sd2: float = 6.0,
                 height_fraction: float = 1.0 / 3.0, random_state: int = 0):
        self.angular_step = angular_step
        self.scanner_position = scanner_position
        self.n_seeds = n_seeds
        self.sphere_radius = sphere_radius
        self.k_neighbors = k_neighbors
        self.neighbor_ratio_threshold = neighbor_ratio_threshold
        self.voxel_divisions = voxel_divisions
        self.voxel_ratio_threshold = voxel_ratio_threshold
        self.sd1 = sd1
        self.sd2 = sd2
        self.height_fraction = height_fraction
        self.random_state = random_state

    def fit(self, X, y=None):
        """Classify the cloud in ``X``; rows are (x, y, z, intensity)."""
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != 4:
            raise ValueError(
                f"X must have exactly 4 columns (x, y, z, intensity), "
                f"got {X.shape[1]}")
        if self.angular_step is None:
            raise ValueError("angular_step is required to fit")
        scan = ScanConfig(angular_step=self.angular_step,
                          scanner_position=self.scanner_position)
        params = PipelineParams(
            n_seeds=self.n_seeds,
            sphere_radius=self.sphere_radius,
            k_neighbors=self.k_neighbors,
            neighbor_ratio_threshold=self.neighbor_ratio_threshold,
            voxel_divisions=self.voxel_divisions,
            voxel_ratio_threshold=self.voxel_ratio_threshold,
            sd1=self.sd1,
            sd2=self.sd2,
            height_fraction=self.height_fraction,
            rng_seed=self.random_state,
        )
        cloud = LabeledCloud.from_world(X[:, :3], X[:, 3], scan)
        labels, trace = classify(cloud, scan, params)
        self.labels_ = np.asarray(labels, dtype=np.intp)
        self.trace_ = trace
        self.intensity_threshold_ = trace.threshold.value
        self.threshold_provenance_ = trace.threshold.provenance
        self.n_features_in_ = 4
        return self
