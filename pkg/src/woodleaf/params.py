"""Scanner geometry and pipeline parameter records."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

from .errors import ParameterError


@dataclass(frozen=True)
class ScanConfig:
    """Scanner geometry shared by every pipeline stage.

    Parameters
    ----------
    angular_step : float
        Angular spacing between successive scan rays, in radians. Together
        with a point's range it sets the expected local point spacing.
    scanner_position : tuple of 3 floats
        Scanner origin in the coordinate frame of the input files, in
        meters. Clouds are re-centered on this position at load time so
        that ranges are plain vector norms.
    """

    angular_step: float
    scanner_position: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        step = float(self.angular_step)
        if not math.isfinite(step) or step <= 0.0:
            raise ParameterError(f"angular_step must be finite and > 0, got {self.angular_step!r}")
        pos = tuple(float(c) for c in self.scanner_position)
        if len(pos) != 3 or not all(math.isfinite(c) for c in pos):
            raise ParameterError(f"scanner_position must be 3 finite coordinates, got {self.scanner_position!r}")
        object.__setattr__(self, "angular_step", step)
        object.__setattr__(self, "scanner_position", pos)


@dataclass(frozen=True)
class PipelineParams:
    """Tunable constants of the classification pipeline.

    The defaults are the recommended operating point; every field can be
    overridden per run. ``validate_params`` checks the documented ranges.

    Attributes
    ----------
    n_seeds : int
        Number of random seed points for density sphere sampling.
    sphere_radius : float
        Sampling sphere radius in meters.
    k_neighbors : int
        Neighbor count for the mean-spacing test.
    neighbor_ratio_threshold : float
        Upper bound on (mean neighbor distance / expected spacing) for a
        point to stay wood.
    voxel_divisions : int
        Grid divisions per axis for the voxel density stage.
    voxel_ratio_threshold : float
        Occupancy ratio below which a voxel is re-labeled leaf.
    sd1 : float
        Spacing multiple for unconditional promotion during verification.
    sd2 : float
        Spacing multiple for intensity-gated promotion during verification.
    height_fraction : float
        Fraction of total tree height below which verification grows wood
        voxel-wise instead of point-wise.
    rng_seed : int
        Seed for all randomized sampling; fixes the run end to end.
    """

    n_seeds: int = 1000
    sphere_radius: float = 0.03
    k_neighbors: int = 8
    neighbor_ratio_threshold: float = 1.71
    voxel_divisions: int = 100
    voxel_ratio_threshold: float = 0.1
    sd1: float = 2.0
    sd2: float = 6.0
    height_fraction: float = 1.0 / 3.0
    rng_seed: int = 0


def validate_params(params: PipelineParams) -> PipelineParams:
    """Return ``params`` unchanged if valid, else raise listing every violation.

    All violated constraints are collected before raising so a caller sees
    the complete list, not just the first offender.
    """
    problems: list[str] = []

    def _check(name: str, ok: bool, constraint: str) -> None:
        if not ok:
            problems.append(f"{name}={getattr(params, name)!r}: must be {constraint}")

    def _finite(name: str) -> bool:
        value = getattr(params, name)
        return isinstance(value, (int, float)) and math.isfinite(value)

    _check("n_seeds", isinstance(params.n_seeds, int) and params.n_seeds >= 1, "an integer >= 1")
    _check("k_neighbors", isinstance(params.k_neighbors, int) and params.k_neighbors >= 1, "an integer >= 1")
    _check("voxel_divisions", isinstance(params.voxel_divisions, int) and params.voxel_divisions >= 1,
           "an integer >= 1")
    for name in ("sphere_radius", "neighbor_ratio_threshold", "voxel_ratio_threshold", "sd1", "sd2"):
        _check(name, _finite(name) and getattr(params, name) > 0.0, "finite and > 0")
    _check("height_fraction", _finite("height_fraction") and 0.0 < params.height_fraction < 1.0,
           "strictly between 0 and 1")
    _check("rng_seed", isinstance(params.rng_seed, int), "an integer")

    if problems:
        raise ParameterError("invalid pipeline parameters:\n  " + "\n  ".join(problems))
    return params


def params_from_mapping(mapping: dict) -> PipelineParams:
    """Build ``PipelineParams`` from a mapping, ignoring ``None`` values."""
    known = {f.name for f in fields(PipelineParams)}
    unknown = set(mapping) - known
    if unknown:
        raise ParameterError(f"unknown parameter names: {sorted(unknown)}")
    kwargs = {k: v for k, v in mapping.items() if v is not None}
    return PipelineParams(**kwargs)
