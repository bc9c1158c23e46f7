"""Wood/leaf classification of terrestrial laser scans of trees.

The pipeline separates a single-tree point cloud into wood and leaf
points in three steps (an adaptive intensity threshold, a neighbor
spacing test, and a voxel density test) followed by a wood verification
pass that recovers wood points the earlier steps misplaced. A synthetic
scanner is included so the whole chain can be exercised without field
data.
"""

from .cloud import ClassLabel, LabeledCloud, validate_cloud_arrays
from .cloudio import (CloudFileFormat, detect_format, read_cloud, read_labels,
                      write_cloud, write_cloud_colored, write_labels)
from .errors import (CloudFormatError, EmptyClassError, ParameterError,
                     WoodLeafError)
from .estimator import WoodLeafClassifier
from .intensity import (IntensityThreshold, ThresholdProvenance,
                        fit_intensity_threshold)
from .metrics import (AccuracyReport, ConfusionCounts,
                      DegenerateMetricWarning, confusion, evaluate, kappa,
                      mcc, overall_accuracy, throughput)
from .params import PipelineParams, ScanConfig, validate_params
from .pipeline import StageTrace, classify, estimate_angular_step
from .refine import knn_refine, voxel_refine
from .synth import SyntheticTreeSpec, default_acceptance_tree, generate_tree
from .verify import verify_wood

__version__ = "0.1.0"

__all__ = [
    "AccuracyReport",
    "ClassLabel",
    "CloudFileFormat",
    "CloudFormatError",
    "ConfusionCounts",
    "DegenerateMetricWarning",
    "EmptyClassError",
    "IntensityThreshold",
    "LabeledCloud",
    "ParameterError",
    "PipelineParams",
    "ScanConfig",
    "StageTrace",
    "SyntheticTreeSpec",
    "ThresholdProvenance",
    "WoodLeafClassifier",
    "WoodLeafError",
    "classify",
    "confusion",
    "default_acceptance_tree",
    "detect_format",
    "estimate_angular_step",
    "evaluate",
    "fit_intensity_threshold",
    "generate_tree",
    "kappa",
    "knn_refine",
    "mcc",
    "overall_accuracy",
    "read_cloud",
    "read_labels",
    "throughput",
    "validate_cloud_arrays",
    "validate_params",
    "verify_wood",
    "voxel_refine",
    "write_cloud",
    "write_cloud_colored",
    "write_labels",
]
