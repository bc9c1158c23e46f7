"""Point-cloud container and label conventions."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .errors import ParameterError
from .params import ScanConfig


class ClassLabel(IntEnum):
    """Per-point class codes. The on-disk label encoding uses the same values."""

    WOOD = 0
    LEAF = 1
    UNASSIGNED = -1


def validate_cloud_arrays(xyz: np.ndarray, intensity: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Coerce and check raw position/intensity arrays.

    Returns float64 copies with shapes (n, 3) and (n,). Raises
    ``ParameterError`` on shape mismatch or non-finite values.
    """
    xyz = np.asarray(xyz, dtype=np.float64)
    intensity = np.asarray(intensity, dtype=np.float64)
    if xyz.ndim != 2 or xyz.shape[1] != 3:
        raise ParameterError(f"positions must have shape (n, 3), got {xyz.shape}")
    if intensity.shape != (xyz.shape[0],):
        raise ParameterError(
            f"intensity must have shape ({xyz.shape[0]},), got {intensity.shape}")
    if not np.isfinite(xyz).all():
        bad = int(np.flatnonzero(~np.isfinite(xyz).all(axis=1))[0])
        raise ParameterError(f"non-finite coordinate at point {bad}")
    if not np.isfinite(intensity).all():
        bad = int(np.flatnonzero(~np.isfinite(intensity))[0])
        raise ParameterError(f"non-finite intensity at point {bad}")
    return xyz, intensity


@dataclass
class LabeledCloud:
    """A scanned tree with per-point labels, stored scanner-centered.

    ``xyz`` holds positions relative to the scanner, so a point's range is
    simply its vector norm. ``scanner_position`` remembers the original
    offset for writing files back in world coordinates.

    Attributes
    ----------
    xyz : ndarray of shape (n, 3), float64
        Scanner-centered positions in meters.
    intensity : ndarray of shape (n,), float64
        Raw device intensity per point (opaque scalar, no calibration).
    labels : ndarray of shape (n,), int8
        ``ClassLabel`` values; ``UNASSIGNED`` until classified.
    scanner_position : ndarray of shape (3,), float64
        World position of the scanner in meters.
    """

    xyz: np.ndarray
    intensity: np.ndarray
    labels: np.ndarray = field(default=None)  # type: ignore[assignment]
    scanner_position: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        self.xyz, self.intensity = validate_cloud_arrays(self.xyz, self.intensity)
        n = self.xyz.shape[0]
        if self.labels is None:
            self.labels = np.full(n, ClassLabel.UNASSIGNED, dtype=np.int8)
        else:
            self.labels = np.asarray(self.labels, dtype=np.int8)
            if self.labels.shape != (n,):
                raise ParameterError(f"labels must have shape ({n},), got {self.labels.shape}")
        if self.scanner_position is None:
            self.scanner_position = np.zeros(3, dtype=np.float64)
        else:
            self.scanner_position = np.asarray(self.scanner_position, dtype=np.float64).reshape(3)

    @classmethod
    def from_world(cls, xyz_world: np.ndarray, intensity: np.ndarray,
                   scan_config: ScanConfig) -> "LabeledCloud":
        """Build a cloud from world-frame positions, centering on the scanner."""
        xyz_world, intensity = validate_cloud_arrays(xyz_world, intensity)
        offset = np.asarray(scan_config.scanner_position, dtype=np.float64)
        return cls(xyz=xyz_world - offset, intensity=intensity, scanner_position=offset)

    @property
    def n_points(self) -> int:
        return self.xyz.shape[0]

    def ranges(self) -> np.ndarray:
        """Distance of every point to the scanner, in meters."""
        return np.linalg.norm(self.xyz, axis=1)

    def world_xyz(self) -> np.ndarray:
        """Positions translated back to the original world frame."""
        return self.xyz + self.scanner_position
