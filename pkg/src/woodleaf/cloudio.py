"""Point cloud and label file readers and writers.

Three cloud formats: whitespace-separated XYZI text, ascii PLY, and
little-endian binary PLY. Text coordinates are written with 6 decimal
places (round-trips within 1e-6 m); binary PLY stores doubles and
round-trips exactly. Readers never reorder points: record i in the file is
point i in memory, which all downstream index bookkeeping relies on.
Files carry world coordinates; clouds in memory are scanner-centered.
"""

from __future__ import annotations

import io
import warnings
from enum import Enum
from pathlib import Path

import numpy as np

from .cloud import ClassLabel, LabeledCloud
from .errors import CloudFormatError, ParameterError
from .params import ScanConfig

WOOD_RGB = (139, 69, 19)
LEAF_RGB = (34, 139, 34)

# PLY scalar type names and their little-endian numpy codes.
_PLY_TYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "<i2", "int16": "<i2",
    "ushort": "<u2", "uint16": "<u2",
    "int": "<i4", "int32": "<i4",
    "uint": "<u4", "uint32": "<u4",
    "float": "<f4", "float32": "<f4",
    "double": "<f8", "float64": "<f8",
}
_INTENSITY_NAMES = {"intensity", "scalar_intensity"}


class CloudFileFormat(Enum):
    XYZI_TEXT = "xyzi"
    PLY_ASCII = "ply"
    PLY_BINARY = "ply-binary"


def detect_format(path: str | Path) -> CloudFileFormat:
    """Infer a cloud file's format from its extension and, for PLY, header."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix in {".xyz", ".xyzi", ".txt", ".asc"}:
        return CloudFileFormat.XYZI_TEXT
    if suffix == ".ply":
        with open(path, "rb") as fh:
            head = fh.read(512)
        if b"binary_little_endian" in head:
            return CloudFileFormat.PLY_BINARY
        return CloudFileFormat.PLY_ASCII
    raise CloudFormatError(
        f"{path}: cannot infer cloud format from extension {suffix!r}; "
        "pass the format explicitly")


def _diagnose_xyzi(path: Path) -> None:
    """Re-scan a text cloud to pin the first bad line, then raise."""
    with open(path, "r", encoding="ascii", errors="replace") as fh:
        for lineno, raw in enumerate(fh, start=1):
            stripped = raw.strip()
            if not stripped or stripped.startswith("#"):
                continue
            fields = stripped.split()
            if len(fields) != 4:
                raise CloudFormatError(
                    f"{path}:{lineno}: expected 4 fields, found {len(fields)}")
            try:
                values = [float(f) for f in fields]
            except ValueError:
                raise CloudFormatError(
                    f"{path}:{lineno}: non-numeric field in {stripped!r}") from None
            if not all(np.isfinite(values)):
                raise CloudFormatError(f"{path}:{lineno}: non-finite value")


def _read_xyzi(path: Path) -> tuple[np.ndarray, np.ndarray]:
    try:
        with warnings.catch_warnings():
            # Empty files are legal; loadtxt warns about them before
            # returning the empty array we want.
            warnings.simplefilter("ignore", UserWarning)
            data = np.loadtxt(path, comments="#", dtype=np.float64, ndmin=2)
    except OSError:
        raise
    except ValueError:
        _diagnose_xyzi(path)
        raise CloudFormatError(f"{path}: malformed XYZI data") from None
    if data.size == 0:
        return np.empty((0, 3)), np.empty(0)
    if data.shape[1] != 4:
        raise CloudFormatError(
            f"{path}: expected 4 columns (x y z intensity), found {data.shape[1]}")
    if not np.isfinite(data).all():
        _diagnose_xyzi(path)
        raise CloudFormatError(f"{path}: non-finite value")
    return data[:, :3], data[:, 3]


def _parse_ply_header(fh, path: Path) -> tuple[str, int, list[tuple[str, str]]]:
    """Read the header, returning (storage, vertex count, vertex properties)."""

    def next_line() -> str:
        raw = fh.readline()
        if not raw:
            raise CloudFormatError(f"{path}: truncated PLY header")
        return raw.decode("ascii", errors="replace").strip()

    if next_line() != "ply":
        raise CloudFormatError(f"{path}: not a PLY file (missing 'ply' magic)")
    storage = ""
    vertex_count = -1
    properties: list[tuple[str, str]] = []
    in_vertex = False
    while True:
        line = next_line()
        if line == "end_header":
            break
        fields = line.split()
        if not fields or fields[0] in {"comment", "obj_info"}:
            continue
        if fields[0] == "format":
            if len(fields) < 2 or fields[1] not in {"ascii", "binary_little_endian"}:
                raise CloudFormatError(
                    f"{path}: unsupported PLY storage {line!r}")
            storage = fields[1]
        elif fields[0] == "element":
            if fields[1] == "vertex":
                in_vertex = True
                vertex_count = int(fields[2])
            else:
                if vertex_count < 0:
                    raise CloudFormatError(
                        f"{path}: element {fields[1]!r} precedes the vertex data")
                in_vertex = False
        elif fields[0] == "property" and in_vertex:
            if fields[1] == "list":
                raise CloudFormatError(
                    f"{path}: list properties are not supported on vertices")
            if fields[1] not in _PLY_TYPES:
                raise CloudFormatError(
                    f"{path}: unknown property type {fields[1]!r}")
            properties.append((fields[2], _PLY_TYPES[fields[1]]))
    if not storage:
        raise CloudFormatError(f"{path}: PLY header lacks a format line")
    if vertex_count < 0:
        raise CloudFormatError(f"{path}: PLY header lacks a vertex element")
    return storage, vertex_count, properties


def _pick_ply_columns(properties: list[tuple[str, str]], path: Path) -> tuple[int, int, int, int]:
    index = {name.lower(): i for i, (name, _) in enumerate(properties)}
    for axis in ("x", "y", "z"):
        if axis not in index:
            raise CloudFormatError(f"{path}: PLY vertex lacks property {axis!r}")
    hit = [n for n in index if n in _INTENSITY_NAMES]
    if not hit:
        raise CloudFormatError(
            f"{path}: PLY vertex lacks an intensity property "
            "(accepted names: intensity, scalar_intensity)")
    return index["x"], index["y"], index["z"], index[hit[0]]


def _read_ply(path: Path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, "rb") as fh:
        storage, count, properties = _parse_ply_header(fh, path)
        xi, yi, zi, ii = _pick_ply_columns(properties, path)
        names = [f"c{i}" for i in range(len(properties))]
        dtype = np.dtype([(n, t) for n, (_, t) in zip(names, properties)])
        if storage == "binary_little_endian":
            records = np.fromfile(fh, dtype=dtype, count=count)
            if records.size != count:
                raise CloudFormatError(
                    f"{path}: binary data ends early "
                    f"({records.size} of {count} vertices)")
        else:
            if count == 0:
                table = np.empty((0, len(properties)))
            else:
                text = fh.read().decode("ascii", errors="replace")
                try:
                    table = np.loadtxt(io.StringIO(text), dtype=np.float64,
                                       max_rows=count, ndmin=2)
                except ValueError as exc:
                    raise CloudFormatError(
                        f"{path}: bad PLY vertex data: {exc}") from None
            if table.shape[0] != count:
                raise CloudFormatError(
                    f"{path}: ascii data ends early "
                    f"({table.shape[0]} of {count} vertices)")
            if count and table.shape[1] != len(properties):
                raise CloudFormatError(
                    f"{path}: expected {len(properties)} columns, "
                    f"found {table.shape[1]}")
            records = np.zeros(count, dtype=dtype)
            for i, n in enumerate(names):
                records[n] = table[:, i]
    xyz = np.column_stack([
        records[names[xi]].astype(np.float64),
        records[names[yi]].astype(np.float64),
        records[names[zi]].astype(np.float64),
    ]) if count else np.empty((0, 3))
    intensity = records[names[ii]].astype(np.float64) if count else np.empty(0)
    if not (np.isfinite(xyz).all() and np.isfinite(intensity).all()):
        raise CloudFormatError(f"{path}: non-finite vertex value")
    return xyz, intensity


def read_cloud(path: str | Path, fmt: CloudFileFormat | None = None,
               scan_config: ScanConfig | None = None) -> LabeledCloud:
    """Read a cloud file; all labels come back unassigned.

    Coordinates in the file are world-frame; the returned cloud is centered
    on the scan configuration's scanner position (origin by default).
    """
    path = Path(path)
    if fmt is None:
        fmt = detect_format(path)
    if scan_config is None:
        scan_config = ScanConfig(angular_step=1.0)
    if fmt is CloudFileFormat.XYZI_TEXT:
        xyz, intensity = _read_xyzi(path)
    else:
        xyz, intensity = _read_ply(path)
    return LabeledCloud.from_world(xyz, intensity, scan_config)


def _ply_header(storage: str, count: int, colored: bool) -> bytes:
    lines = [
        "ply",
        f"format {storage} 1.0",
        f"element vertex {count}",
        "property double x",
        "property double y",
        "property double z",
        "property double intensity",
    ]
    if colored:
        lines += ["property uchar red", "property uchar green", "property uchar blue"]
    lines.append("end_header")
    return ("\n".join(lines) + "\n").encode("ascii")


def _colored_rows(cloud: LabeledCloud) -> np.ndarray:
    labels = np.asarray(cloud.labels)
    if (labels == ClassLabel.UNASSIGNED).any():
        raise ParameterError("cannot color a cloud with unassigned labels")
    rgb = np.where(labels[:, None] == ClassLabel.LEAF,
                   np.array(LEAF_RGB, dtype=np.uint8),
                   np.array(WOOD_RGB, dtype=np.uint8))
    return rgb


def write_cloud(cloud: LabeledCloud, path: str | Path,
                fmt: CloudFileFormat) -> None:
    """Write positions (world frame) and intensities in the given format."""
    path = Path(path)
    world = cloud.world_xyz()
    if fmt is CloudFileFormat.XYZI_TEXT:
        with open(path, "w", encoding="ascii") as fh:
            for (x, y, z), v in zip(world, cloud.intensity):
                fh.write(f"{x:.6f} {y:.6f} {z:.6f} {v:.17g}\n")
        return
    storage = "ascii" if fmt is CloudFileFormat.PLY_ASCII else "binary_little_endian"
    with open(path, "wb") as fh:
        fh.write(_ply_header(storage, cloud.n_points, colored=False))
        if fmt is CloudFileFormat.PLY_BINARY:
            rec = np.empty(cloud.n_points,
                           dtype=[("x", "<f8"), ("y", "<f8"), ("z", "<f8"),
                                  ("intensity", "<f8")])
            rec["x"], rec["y"], rec["z"] = world[:, 0], world[:, 1], world[:, 2]
            rec["intensity"] = cloud.intensity
            rec.tofile(fh)
        else:
            body = "\n".join(
                f"{x:.17g} {y:.17g} {z:.17g} {v:.17g}"
                for (x, y, z), v in zip(world, cloud.intensity))
            if body:
                fh.write((body + "\n").encode("ascii"))


def write_cloud_colored(cloud: LabeledCloud, path: str | Path,
                        fmt: CloudFileFormat = CloudFileFormat.PLY_ASCII) -> None:
    """Write a PLY with per-point color: brown wood, green leaves.

    Geometry goes out in world coordinates. Every label must be assigned.
    """
    if fmt is CloudFileFormat.XYZI_TEXT:
        raise ParameterError("XYZI text carries no color; use a PLY format")
    path = Path(path)
    rgb = _colored_rows(cloud)
    world = cloud.world_xyz()
    storage = "ascii" if fmt is CloudFileFormat.PLY_ASCII else "binary_little_endian"
    with open(path, "wb") as fh:
        fh.write(_ply_header(storage, cloud.n_points, colored=True))
        if fmt is CloudFileFormat.PLY_BINARY:
            rec = np.empty(cloud.n_points,
                           dtype=[("x", "<f8"), ("y", "<f8"), ("z", "<f8"),
                                  ("intensity", "<f8"), ("red", "u1"),
                                  ("green", "u1"), ("blue", "u1")])
            rec["x"], rec["y"], rec["z"] = world[:, 0], world[:, 1], world[:, 2]
            rec["intensity"] = cloud.intensity
            rec["red"], rec["green"], rec["blue"] = rgb[:, 0], rgb[:, 1], rgb[:, 2]
            rec.tofile(fh)
        else:
            body = "\n".join(
                f"{x:.17g} {y:.17g} {z:.17g} {v:.17g} {r:d} {g:d} {b:d}"
                for (x, y, z), v, (r, g, b) in zip(world, cloud.intensity, rgb))
            if body:
                fh.write((body + "\n").encode("ascii"))


def read_labels(path: str | Path) -> np.ndarray:
    """Read a label file: one 0 (wood) or 1 (leaf) per line."""
    path = Path(path)
    with open(path, "r", encoding="ascii", errors="replace") as fh:
        tokens = fh.read().split()
    if not tokens:
        return np.empty(0, dtype=np.int8)
    arr = np.array(tokens)
    bad = ~np.isin(arr, ("0", "1"))
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise CloudFormatError(
            f"{path}: label {i + 1} is {str(arr[i])!r}, expected 0 or 1")
    return (arr == "1").astype(np.int8)


def write_labels(labels: np.ndarray, path: str | Path) -> None:
    """Write one 0/1 label per line; every label must be assigned."""
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise ParameterError("labels must be one-dimensional")
    ok = (labels == ClassLabel.WOOD) | (labels == ClassLabel.LEAF)
    if not ok.all():
        i = int(np.flatnonzero(~ok)[0])
        raise ParameterError(
            f"label {i} is {labels[i]}, expected 0 (wood) or 1 (leaf)")
    path = Path(path)
    with open(path, "w", encoding="ascii") as fh:
        if labels.size:
            fh.write("\n".join("1" if v == ClassLabel.LEAF else "0"
                               for v in labels) + "\n")
