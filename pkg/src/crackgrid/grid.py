"""Cell-valued functions on uniform grids with explicit crack faces.

Conventions used throughout the package:

* A grid in dimension d (1 or 2) has ``shape[k]`` cells along axis k, cell
  width ``spacing`` (isotropic), and physical low corner ``origin``.  Cell
  values are stored row-major (C order), one finite float per cell.
* A face is identified by the cell on its lower side: ``FaceId(axis, cell)``
  sits between ``cell`` and ``cell + e_axis``.  Interior faces have both
  cells in the grid; box-boundary faces have exactly one.
* Cracks are a set of interior faces.  The jump set ``J_u`` consists of the
  crack faces whose two adjacent values differ; a crack face with equal
  traces is "healed" and carries no jump measure.
* Measures are the anisotropic face-count ones: a cell has volume
  ``spacing**dim`` and a face has area ``spacing**(dim-1)``.  The perimeter
  of a cell set counts all faces separating inside from outside, including
  faces on the grid box (the ambient-space reduced boundary); the relative
  boundary drops the box faces.
* Traces across an interior face are the two adjacent cell values; across a
  boundary face, the single interior value.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

FORMAT_VERSION = 1


class GeometryMismatchError(ValueError):
    """Two objects that must share a grid geometry do not."""


@dataclass(frozen=True)
class GridGeometry:
    """Uniform axis-aligned grid: low corner, isotropic spacing, cells per axis."""

    origin: tuple[float, ...]
    spacing: float
    shape: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "origin", tuple(float(x) for x in self.origin))
        object.__setattr__(self, "shape", tuple(int(n) for n in self.shape))
        if len(self.shape) not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got shape {self.shape}")
        if len(self.origin) != len(self.shape):
            raise ValueError("origin and shape must have equal length")
        if not (self.spacing > 0) or not math.isfinite(self.spacing):
            raise ValueError(f"spacing must be a positive finite real, got {self.spacing}")
        if any(n < 1 for n in self.shape):
            raise ValueError(f"every axis needs at least one cell, got {self.shape}")

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    @property
    def face_area(self) -> float:
        return self.spacing ** (self.dim - 1)

    @property
    def num_cells(self) -> int:
        return int(np.prod(self.shape))

    def interior_face_count(self, axis: int) -> int:
        n = (self.shape[axis] - 1) * (self.num_cells // self.shape[axis])
        return n

    def face_coordinate(self, face: FaceId) -> tuple[float, ...]:
        """Physical center of a face (used for slice jump locations)."""
        coords = []
        for k in range(self.dim):
            if k == face.axis:
                coords.append(self.origin[k] + (face.cell[k] + 1) * self.spacing)
            else:
                coords.append(self.origin[k] + (face.cell[k] + 0.5) * self.spacing)
        return tuple(coords)


@dataclass(frozen=True)
class FaceId:
    """Face between ``cell`` and ``cell + e_axis``; ``cell`` is the lower side."""

    axis: int
    cell: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "cell", tuple(int(i) for i in self.cell))

    def upper_cell(self) -> tuple[int, ...]:
        return tuple(c + (1 if k == self.axis else 0) for k, c in enumerate(self.cell))


def _validate_interior_face(geom: GridGeometry, face: FaceId) -> None:
    if not (0 <= face.axis < geom.dim):
        raise ValueError(f"face axis {face.axis} out of range for dim {geom.dim}")
    if len(face.cell) != geom.dim:
        raise ValueError(f"face cell index {face.cell} has wrong length")
    for k, i in enumerate(face.cell):
        hi = geom.shape[k] - 2 if k == face.axis else geom.shape[k] - 1
        if not (0 <= i <= hi):
            raise ValueError(f"face {face} is not an interior face of shape {geom.shape}")


class GridFunction:
    """Scalar function on a grid plus an explicit set of interior crack faces."""

    def __init__(self, geom: GridGeometry, values, cracks: Iterable[FaceId] = ()):
        self.geom = geom
        arr = np.asarray(values, dtype=float)
        if arr.size != geom.num_cells:
            raise ValueError(f"expected {geom.num_cells} values, got {arr.size}")
        arr = arr.reshape(geom.shape).copy()
        if not np.all(np.isfinite(arr)):
            raise ValueError("all values must be finite")
        arr.flags.writeable = False
        self.values = arr
        crack_list = list(cracks)
        crack_set = frozenset(crack_list)
        if len(crack_set) != len(crack_list):
            raise ValueError("duplicate crack faces")
        for f in crack_set:
            _validate_interior_face(geom, f)
        self.cracks = crack_set
        self._crack_masks: dict[int, np.ndarray] | None = None

    def crack_mask(self, axis: int) -> np.ndarray:
        """Boolean array over interior faces of ``axis`` (True where cracked)."""
        if self._crack_masks is None:
            masks = {}
            for k in range(self.geom.dim):
                shp = list(self.geom.shape)
                shp[k] -= 1
                masks[k] = np.zeros(shp, dtype=bool)
            for f in self.cracks:
                masks[f.axis][f.cell] = True
            self._crack_masks = masks
        return self._crack_masks[axis]

    def face_delta(self, axis: int) -> np.ndarray:
        """Value difference (upper minus lower) across interior faces of ``axis``."""
        return np.diff(self.values, axis=axis)

    def jump_faces(self) -> frozenset[FaceId]:
        """Crack faces with differing traces: the discrete jump set J_u."""
        out = []
        for f in self.cracks:
            if self.values[f.cell] != self.values[f.upper_cell()]:
                out.append(f)
        return frozenset(out)

    def jump_measure(self) -> float:
        count = 0
        for k in range(self.geom.dim):
            d = self.face_delta(k)
            count += int(np.count_nonzero(self.crack_mask(k) & (d != 0)))
        return count * self.geom.face_area

    def with_values(self, values) -> GridFunction:
        return GridFunction(self.geom, values, self.cracks)

    def subtract(self, other: GridFunction) -> GridFunction:
        """Pointwise u - other; cracks are the union of both crack sets."""
        require_same_geometry(self.geom, other.geom)
        return GridFunction(self.geom, self.values - other.values, self.cracks | other.cracks)

    def add_on(self, mask: np.ndarray, c: float) -> GridFunction:
        """Add the constant c on the masked cells (a piecewise-constant translation)."""
        vals = self.values.copy()
        vals[np.asarray(mask, dtype=bool)] += c
        return self.with_values(vals)


class CellSet:
    """Subset of grid cells (a discrete set of finite perimeter)."""

    def __init__(self, geom: GridGeometry, mask):
        self.geom = geom
        arr = np.asarray(mask)
        if arr.size != geom.num_cells:
            raise ValueError(f"expected {geom.num_cells} mask entries, got {arr.size}")
        arr = arr.reshape(geom.shape).astype(bool)
        arr.flags.writeable = False
        self.mask = arr

    def volume(self) -> float:
        return int(np.count_nonzero(self.mask)) * self.geom.cell_volume

    def perimeter(self) -> float:
        """Ambient perimeter: faces separating inside from outside or from beyond the box."""
        return self._boundary_face_count(include_box=True) * self.geom.face_area

    def relative_perimeter(self) -> float:
        """Perimeter relative to the box: interior separating faces only."""
        return self._boundary_face_count(include_box=False) * self.geom.face_area

    def _boundary_face_count(self, include_box: bool) -> int:
        m = self.mask
        count = 0
        for k in range(self.geom.dim):
            lower = np.take(m, range(0, self.geom.shape[k] - 1), axis=k)
            upper = np.take(m, range(1, self.geom.shape[k]), axis=k)
            count += int(np.count_nonzero(lower ^ upper))
            if include_box:
                count += int(np.count_nonzero(np.take(m, [0], axis=k)))
                count += int(np.count_nonzero(np.take(m, [self.geom.shape[k] - 1], axis=k)))
        return count

    def boundary_interior_faces(self) -> frozenset[FaceId]:
        """Interior faces of the grid lying on the reduced boundary of the set."""
        out = []
        m = self.mask
        for k in range(self.geom.dim):
            lower = np.take(m, range(0, self.geom.shape[k] - 1), axis=k)
            upper = np.take(m, range(1, self.geom.shape[k]), axis=k)
            for idx in np.argwhere(lower ^ upper):
                out.append(FaceId(k, tuple(int(i) for i in idx)))
        return frozenset(out)

    def complement(self) -> CellSet:
        return CellSet(self.geom, ~self.mask)


def require_same_geometry(a: GridGeometry, b: GridGeometry) -> None:
    if a != b:
        raise GeometryMismatchError(f"geometry mismatch: {a} vs {b}")


@dataclass(frozen=True)
class EnergyReport:
    """Bulk p-gradient energy plus jump-set measure."""

    bulk: float
    jump: float
    p: float

    @property
    def total(self) -> float:
        return self.bulk + self.jump

    def as_dict(self) -> dict:
        return {"bulk": self.bulk, "jump": self.jump, "p": self.p, "total": self.total}


def energy(u: GridFunction, p: float = 2.0) -> EnergyReport:
    """Fracture-type energy of u.

    Bulk: every non-crack interior face contributes ``|dv/h|**p * h**dim``
    (the per-axis difference quotient sampled on the face).  Jump: crack
    faces with differing traces count ``h**(dim-1)`` each; healed cracks and
    crack faces never contribute bulk.
    """
    if not p > 1:
        raise ValueError(f"p must exceed 1, got {p}")
    h = u.geom.spacing
    bulk = 0.0
    jump_count = 0
    for k in range(u.geom.dim):
        d = u.face_delta(k)
        cracked = u.crack_mask(k)
        grad = d[~cracked] / h
        if grad.size:
            bulk += float(np.sum(np.abs(grad) ** p)) * u.geom.cell_volume
        jump_count += int(np.count_nonzero(cracked & (d != 0)))
    return EnergyReport(bulk=bulk, jump=jump_count * u.geom.face_area, p=float(p))


def level_set(u: GridFunction, t: float) -> CellSet:
    """Strict superlevel set {u > t} as a cell set."""
    if not math.isfinite(t):
        raise ValueError("level must be finite")
    return CellSet(u.geom, u.values > t)


def boundary_outside_jump(S: CellSet, u: GridFunction) -> float:
    """Measure of the relative reduced boundary of S not lying on the jump set.

    Box-boundary faces are excluded (boundary relative to the grid box), and
    so are crack faces with differing traces.
    """
    require_same_geometry(S.geom, u.geom)
    count = 0
    m = S.mask
    for k in range(u.geom.dim):
        lower = np.take(m, range(0, u.geom.shape[k] - 1), axis=k)
        upper = np.take(m, range(1, u.geom.shape[k]), axis=k)
        sep = lower ^ upper
        jump = u.crack_mask(k) & (u.face_delta(k) != 0)
        count += int(np.count_nonzero(sep & ~jump))
    return count * u.geom.face_area


def kyfan_distance(u: GridFunction, v: GridFunction) -> float:
    """Ky Fan metric inf{d > 0 : vol(|u - v| > d) <= d} for convergence in measure.

    Computed exactly by scanning the sorted distinct values of |u - v|
    against the cumulative cell volume.
    """
    require_same_geometry(u.geom, v.geom)
    diff = np.abs(u.values - v.values).ravel()
    cell_vol = u.geom.cell_volume
    levels = np.unique(diff)  # ascending
    # Volume strictly above each candidate threshold.
    counts = np.searchsorted(np.sort(diff), levels, side="right")
    above = (diff.size - counts) * cell_vol
    # Segment [0, levels[0]): vol above is everything >= levels[0] unless level 0.
    prev = 0.0
    vol_above_prev = diff.size * cell_vol if levels[0] > 0 else above[0]
    for lev, vol in zip(levels, above):
        # On [prev, lev) the exceedance volume is vol_above_prev.
        if vol_above_prev <= prev:
            return prev
        if vol_above_prev < lev:
            return vol_above_prev
        prev = float(lev)
        vol_above_prev = float(vol)
    # Beyond the largest value the exceedance volume is 0.
    return prev


# --- file format -----------------------------------------------------------


def grid_function_to_dict(u: GridFunction) -> dict:
    cracks = sorted([f.axis, *f.cell] for f in u.cracks)
    return {
        "version": FORMAT_VERSION,
        "dim": u.geom.dim,
        "origin": list(u.geom.origin),
        "spacing": u.geom.spacing,
        "shape": list(u.geom.shape),
        "values": [float(x) for x in u.values.ravel()],
        "cracks": cracks,
    }


def _geometry_from_header(doc: dict) -> GridGeometry:
    if doc.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported format version {doc.get('version')!r}")
    geom = GridGeometry(tuple(doc["origin"]), float(doc["spacing"]), tuple(doc["shape"]))
    if doc["dim"] != geom.dim:
        raise ValueError(f"dim field {doc['dim']} disagrees with shape {geom.shape}")
    return geom


def grid_function_from_dict(doc: dict) -> GridFunction:
    geom = _geometry_from_header(doc)
    raw = doc.get("cracks", [])
    cracks = [FaceId(int(entry[0]), tuple(int(i) for i in entry[1:])) for entry in raw]
    if len(set(cracks)) != len(cracks):
        raise ValueError("duplicate crack entries")
    return GridFunction(geom, doc["values"], cracks)


def cell_set_to_dict(S: CellSet) -> dict:
    return {
        "version": FORMAT_VERSION,
        "dim": S.geom.dim,
        "origin": list(S.geom.origin),
        "spacing": S.geom.spacing,
        "shape": list(S.geom.shape),
        "mask": [int(x) for x in S.mask.ravel()],
    }


def cell_set_from_dict(doc: dict) -> CellSet:
    geom = _geometry_from_header(doc)
    mask = [int(x) for x in doc["mask"]]
    if any(x not in (0, 1) for x in mask):
        raise ValueError("mask entries must be 0 or 1")
    return CellSet(geom, mask)


def write_json(obj: dict, path) -> None:
    text = json.dumps(obj, sort_keys=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text + "\n")


def read_json(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
