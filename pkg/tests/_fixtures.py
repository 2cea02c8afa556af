"""Shared random-fixture builders for the test suite (seeded, deterministic)."""

from __future__ import annotations

import numpy as np

from crackgrid.grid import CellSet, FaceId, GridFunction, GridGeometry


def all_interior_faces(geom: GridGeometry) -> list[FaceId]:
    faces = []
    for axis in range(geom.dim):
        shp = list(geom.shape)
        shp[axis] -= 1
        for idx in np.ndindex(*shp):
            faces.append(FaceId(axis, tuple(int(i) for i in idx)))
    return faces


def random_fixture(rng: np.random.Generator, dim: int | None = None,
                   max_1d: int = 1024, max_2d: int = 64) -> GridFunction:
    """Random grid function with a mix of smooth variation and random cracks."""
    if dim is None:
        dim = int(rng.integers(1, 3))
    if dim == 1:
        shape = (int(rng.integers(4, max_1d + 1)),)
    else:
        shape = (int(rng.integers(3, max_2d + 1)), int(rng.integers(3, max_2d + 1)))
    spacing = float(rng.choice([0.125, 0.25, 0.5, 1.0]))
    origin = tuple(float(rng.integers(-4, 5)) for _ in range(dim))
    geom = GridGeometry(origin, spacing, shape)
    kind = rng.integers(0, 3)
    if kind == 0:
        values = rng.normal(0.0, 2.0, size=shape)
    elif kind == 1:
        values = rng.integers(-5, 12, size=shape).astype(float)
    else:
        values = np.round(rng.normal(0.0, 3.0, size=shape) * 4) / 4
    faces = all_interior_faces(geom)
    n_cracks = int(rng.integers(0, max(1, len(faces) // 6) + 1))
    idx = rng.choice(len(faces), size=min(n_cracks, len(faces)), replace=False)
    cracks = [faces[i] for i in idx]
    return GridFunction(geom, values, cracks)


def random_mask(rng: np.random.Generator, geom: GridGeometry, p: float = 0.5) -> CellSet:
    return CellSet(geom, rng.random(geom.shape) < p)


def jumpy_fixture(rng: np.random.Generator, shape=(16, 16), spacing: float = 0.25,
                  levels: int = 5) -> GridFunction:
    """2D function piecewise constant on random blobs, with every level change cracked.

    All value changes sit on crack faces, so the jump set carries the whole
    variation (no gradient term).
    """
    geom = GridGeometry((0.0, 0.0), spacing, shape)
    labels = rng.integers(0, levels, size=shape)
    values = labels.astype(float) * float(rng.integers(1, 4))
    cracks = []
    for axis in range(2):
        d = np.diff(values, axis=axis)
        for idx in np.argwhere(d != 0):
            cracks.append(FaceId(axis, tuple(int(i) for i in idx)))
    return GridFunction(geom, values, cracks)
