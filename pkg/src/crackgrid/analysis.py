"""Sequence-level verification: vanishing certificates, slicing, LSC, reports.

The vanishing certificate quantifies "thin in the range implies small in the
domain": if every window of the region-restricted profile carries at most
eps mass, subdividing the range into quantile slabs and chaining the grid
isoperimetric inequality through the slab boundaries bounds the region
volume by an explicit expression in measured quantities.  The certificate
stores every measured ingredient so the final comparison is reproducible.

Slicing reduces directional jump counting to one-dimensional sections; on a
grid the direction optimization is exact because every face normal is a
coordinate vector, so the total jump measure splits into per-axis counts
and each axis resums exactly over its 1D slices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .bubbles import extract_bubbles, track_sequence
from .grid import (
    CellSet,
    FaceId,
    GridFunction,
    GridGeometry,
    energy,
    kyfan_distance,
    require_same_geometry,
)
from .partition import (
    build_partition,
    renormalize,
    select_radii,
    vanishing_region,
)
from .profile import concentration_profile, levy_concentration


# -- grid isoperimetric constant ---------------------------------------------


@lru_cache(maxsize=None)
def grid_iso_constant(side: int = 4) -> float:
    """Largest volume/perimeter^2 over all masks in a side x side box (h = 1).

    The maximum is attained by the full square and the value is scale-free,
    so it bounds volume <= c * perimeter^2 for arbitrary 2D cell sets (any
    component satisfies the classical count <= boundary^2/16 bound, and the
    bound is superadditive over components).
    """
    n = side * side
    bits = np.arange(1, 1 << n, dtype=np.uint32)
    masks = ((bits[:, None] >> np.arange(n, dtype=np.uint32)) & 1).astype(bool)
    masks = masks.reshape(-1, side, side)
    vol = masks.sum(axis=(1, 2))
    perim = (masks[:, :-1, :] ^ masks[:, 1:, :]).sum(axis=(1, 2))
    perim += (masks[:, :, :-1] ^ masks[:, :, 1:]).sum(axis=(1, 2))
    perim += masks[:, 0, :].sum(axis=1) + masks[:, -1, :].sum(axis=1)
    perim += masks[:, :, 0].sum(axis=1) + masks[:, :, -1].sum(axis=1)
    return float(np.max(vol / perim.astype(float) ** 2))


def _boundary_face_keys(S: CellSet) -> set[tuple]:
    """Hashable keys for the ambient boundary faces of a cell set."""
    keys: set[tuple] = set()
    for f in S.boundary_interior_faces():
        keys.add(("i", f.axis, f.cell))
    m = S.mask
    for axis in range(S.geom.dim):
        for idx in np.argwhere(np.take(m, [0], axis=axis)):
            cell = list(idx)
            cell[axis] = 0
            keys.add(("b", axis, 0, tuple(int(x) for x in cell)))
        for idx in np.argwhere(np.take(m, [-1], axis=axis)):
            cell = list(idx)
            cell[axis] = S.geom.shape[axis] - 1
            keys.add(("b", axis, 1, tuple(int(x) for x in cell)))
    return keys


def _jump_face_keys(u: GridFunction) -> set[tuple]:
    return {("i", f.axis, f.cell) for f in u.jump_faces()}


# -- vanishing certificate ----------------------------------------------------


@dataclass(frozen=True)
class VanishingCertificate:
    """Measured volume bound for a weakly vanishing region (2D only)."""

    alpha: int
    cut_points: tuple[float, ...]
    slab_volumes: tuple[float, ...]  # volumes of the inbetween sets
    gap_volumes: tuple[float, ...]
    gap_perimeters: tuple[float, ...]
    measured_volume: float
    bound: float
    eps: float
    radius: float
    boundary_measure: float  # jump set united with the region boundary
    region_perimeter: float
    iso_constant: float
    slab_correction: float
    chain_lhs: float  # boundary measure, left side of the halving inequality
    chain_rhs: float  # half the summed slab boundaries outside the gaps
    trivial: bool = False

    @property
    def certified(self) -> bool:
        return self.measured_volume <= self.bound + 1e-12

    @property
    def chain_ok(self) -> bool:
        return self.chain_lhs >= self.chain_rhs - 1e-12

    def as_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "cut_points": list(self.cut_points),
            "slab_volumes": list(self.slab_volumes),
            "gap_volumes": list(self.gap_volumes),
            "gap_perimeters": list(self.gap_perimeters),
            "measured_volume": self.measured_volume,
            "bound": self.bound,
            "eps": self.eps,
            "radius": self.radius,
            "boundary_measure": self.boundary_measure,
            "region_perimeter": self.region_perimeter,
            "iso_constant": self.iso_constant,
            "slab_correction": self.slab_correction,
            "chain_lhs": self.chain_lhs,
            "chain_rhs": self.chain_rhs,
            "certified": self.certified,
            "chain_ok": self.chain_ok,
            "trivial": self.trivial,
        }


def vanishing_certificate(u: GridFunction, region: CellSet, eps: float,
                          radius: float = 1.0, window: float = 1.0) -> VanishingCertificate:
    """Certify that a weakly vanishing region has small volume (2D).

    Requires the region-restricted profile to satisfy the weak vanishing
    hypothesis (no window of the given radius holds more than eps mass);
    violating inputs raise with the offending window center.  The range is
    cut at alpha = ceil(1/eps) volume quantiles (capped at the number of
    distinct values, left-continuous), gap bands of half-width `radius`
    shield the cuts, and the volume bound chains the grid isoperimetric
    inequality through the inbetween slabs:

        volume <= 4 c (D + G)^2 / alpha + alpha * slab_correction

    with D the measured jump-plus-boundary measure, G the summed gap-set
    perimeters and c the measured grid isoperimetric constant.
    """
    require_same_geometry(u.geom, region.geom)
    if u.geom.dim != 2:
        raise ValueError("vanishing certificates need a 2D grid (the volume "
                         "exponent degenerates in 1D)")
    if not eps > 0:
        raise ValueError("eps must be positive")
    m = region.volume()
    prof = concentration_profile(u, domain=region, window=window)
    if m == 0.0:
        return VanishingCertificate(
            alpha=1, cut_points=(), slab_volumes=(0.0,), gap_volumes=(),
            gap_perimeters=(), measured_volume=0.0, bound=0.0, eps=eps,
            radius=radius, boundary_measure=0.0, region_perimeter=0.0,
            iso_constant=grid_iso_constant(), slab_correction=0.0,
            chain_lhs=0.0, chain_rhs=0.0, trivial=True)
    score, center = levy_concentration(prof, radius)
    if score > eps + 1e-12:
        raise ValueError(
            f"region profile is not weakly vanishing at eps={eps}: the window "
            f"of radius {radius} centered at {center} holds mass {score}")

    values = u.values[region.mask]
    cell_vol = u.geom.cell_volume
    order = np.sort(values)
    distinct = np.unique(order)
    alpha = max(1, min(math.ceil(1.0 / eps), distinct.size))
    cuts: list[float] = []
    if alpha > 1:
        cum = np.arange(1, order.size + 1) * cell_vol
        for i in range(1, alpha):
            target = i * m / alpha
            k = int(np.searchsorted(cum, target, side="left"))
            k = min(k, order.size - 1)
            # smallest value with at least the target volume strictly below it
            j = int(np.searchsorted(order, order[k], side="right"))
            cuts.append(float(order[min(j, order.size - 1)]) if j < order.size
                        else float(order[-1]))
        cuts = sorted(set(cuts))
    alpha_eff = len(cuts) + 1

    edges = [-math.inf] + cuts + [math.inf]
    slab_sets, gap_sets = [], []
    for i in range(alpha_eff):
        lo = edges[i] + radius if math.isfinite(edges[i]) else -math.inf
        hi = edges[i + 1] - radius if math.isfinite(edges[i + 1]) else math.inf
        slab_sets.append(CellSet(u.geom, region.mask & (u.values >= lo) & (u.values < hi)))
    for t in cuts:
        gap_sets.append(CellSet(
            u.geom, region.mask & (u.values > t - radius) & (u.values < t + radius)))

    slab_vols = tuple(S.volume() for S in slab_sets)
    gap_vols = tuple(G.volume() for G in gap_sets)
    gap_perims = tuple(G.perimeter() for G in gap_sets)
    gamma = float(sum(gap_perims))

    jump_keys = _jump_face_keys(u)
    region_keys = _boundary_face_keys(region)
    area = u.geom.face_area
    D = len(jump_keys | region_keys) * area
    region_perim = region.perimeter()

    gap_keys = [_boundary_face_keys(G) for G in gap_sets]
    chain_rhs = 0.0
    for i, S in enumerate(slab_sets):
        keys = _boundary_face_keys(S)
        if i - 1 >= 0 and i - 1 < len(gap_keys):
            keys -= gap_keys[i - 1]
        if i < len(gap_keys):
            keys -= gap_keys[i]
        chain_rhs += 0.5 * len(keys) * area
    c_iso = grid_iso_constant()
    slab_correction = max(0.0, max(m / alpha_eff - v for v in slab_vols))
    bound = 4.0 * c_iso * (D + gamma) ** 2 / alpha_eff + alpha_eff * slab_correction
    return VanishingCertificate(
        alpha=alpha_eff, cut_points=tuple(cuts), slab_volumes=slab_vols,
        gap_volumes=gap_vols, gap_perimeters=gap_perims, measured_volume=m,
        bound=bound, eps=eps, radius=radius, boundary_measure=D,
        region_perimeter=region_perim, iso_constant=c_iso,
        slab_correction=slab_correction, chain_lhs=D, chain_rhs=chain_rhs)


# -- slicing ------------------------------------------------------------------


def slice_line(u: GridFunction, axis: int, index: int) -> GridFunction:
    """One-dimensional section of a 2D function along ``axis`` at the given
    transverse row; its cracks are the axis-normal crack faces met on the line."""
    if u.geom.dim != 2:
        raise ValueError("slicing applies to 2D functions")
    if axis not in (0, 1):
        raise ValueError(f"axis must be 0 or 1, got {axis}")
    other = 1 - axis
    if not (0 <= index < u.geom.shape[other]):
        raise ValueError(f"slice index {index} out of range")
    geom = GridGeometry((u.geom.origin[axis],), u.geom.spacing, (u.geom.shape[axis],))
    values = u.values.take(index, axis=other)
    cracks = []
    for f in u.cracks:
        if f.axis == axis and f.cell[other] == index:
            cracks.append(FaceId(0, (f.cell[axis],)))
    return GridFunction(geom, values, cracks)


def jump_count_1d(u: GridFunction) -> int:
    """Number of genuine jumps (crack faces with differing traces) in 1D."""
    if u.geom.dim != 1:
        raise ValueError("expected a 1D function")
    return len(u.jump_faces())


def directional_jump_measure(u: GridFunction, axis: int,
                             box: CellSet | None = None) -> float:
    """Measure of jump faces with normal along ``axis`` (optionally within a box)."""
    d = u.face_delta(axis)
    sel = u.crack_mask(axis) & (d != 0)
    if box is not None:
        require_same_geometry(u.geom, box.geom)
        n = u.geom.shape[axis]
        inside = box.mask.take(range(0, n - 1), axis=axis) \
            & box.mask.take(range(1, n), axis=axis)
        sel = sel & inside
    return int(np.count_nonzero(sel)) * u.geom.face_area


@dataclass(frozen=True)
class SliceLscReport:
    """Directional jump comparison between a sequence and its limit."""

    axes: tuple[int, ...]
    limit_directional: tuple[float, ...]
    seq_directional: tuple[tuple[float, ...], ...]  # [axis][n]
    margins: tuple[float, ...]  # min_n seq - limit, per axis
    total_margin: float
    limit_slice_counts: tuple[tuple[int, ...], ...]  # [axis][row]
    seq_slice_counts: tuple[tuple[tuple[int, ...], ...], ...]  # [axis][n][row]
    eta: tuple[float | None, ...]  # smallest working dyadic locality radius
    eta_resolution_limited: tuple[bool, ...]
    eta_ok: tuple[bool, ...]

    @property
    def lsc_holds(self) -> bool:
        return all(mg >= -1e-12 for mg in self.margins) and self.total_margin >= -1e-12

    def as_dict(self) -> dict:
        return {
            "axes": list(self.axes),
            "limit_directional": list(self.limit_directional),
            "seq_directional": [list(s) for s in self.seq_directional],
            "margins": list(self.margins),
            "total_margin": self.total_margin,
            "limit_slice_counts": [list(c) for c in self.limit_slice_counts],
            "seq_slice_counts": [[list(c) for c in per_n] for per_n in self.seq_slice_counts],
            "eta": list(self.eta),
            "eta_resolution_limited": list(self.eta_resolution_limited),
            "eta_ok": list(self.eta_ok),
            "lsc_holds": self.lsc_holds,
        }


def _slice_jump_positions(u: GridFunction, axis: int, index: int) -> list[float]:
    line = slice_line(u, axis, index) if u.geom.dim == 2 else u
    return [line.geom.face_coordinate(f)[0] for f in line.jump_faces()]


def lsc_report(seq: Sequence[GridFunction], limit: GridFunction,
               box: CellSet | None = None) -> SliceLscReport:
    """Check lower semicontinuity of the jump measure via directional slicing.

    Per axis the directional jump measures are exact face counts; the margin
    is min_n seq - limit and must be nonnegative for LSC.  The 1D locality
    check searches the smallest dyadic multiple of 2h such that every limit
    jump on every slice has a sequence jump within that distance for all n.
    """
    if not seq:
        raise ValueError("need a nonempty sequence")
    for g in seq:
        require_same_geometry(g.geom, limit.geom)
    geom = limit.geom
    axes = tuple(range(geom.dim))
    lim_dir = tuple(directional_jump_measure(limit, k, box) for k in axes)
    seq_dir = tuple(tuple(directional_jump_measure(g, k, box) for g in seq) for k in axes)
    margins = tuple(min(s) - l for s, l in zip(seq_dir, lim_dir))
    total_margin = min(sum(col) for col in zip(*seq_dir)) - sum(lim_dir) \
        if geom.dim > 0 else 0.0

    etas: list[float | None] = []
    limited: list[bool] = []
    ok: list[bool] = []
    lim_counts: list[tuple[int, ...]] = []
    seq_counts: list[tuple[tuple[int, ...], ...]] = []
    h = geom.spacing
    for axis in axes:
        rows = range(geom.shape[1 - axis]) if geom.dim == 2 else [0]
        lim_counts.append(tuple(
            len(_slice_jump_positions(limit, axis, row)) for row in rows))
        seq_counts.append(tuple(
            tuple(len(_slice_jump_positions(g, axis, row)) for row in rows)
            for g in seq))
        required = 0.0
        missing = False
        for row in rows:
            lim_pos = _slice_jump_positions(limit, axis, row)
            if not lim_pos:
                continue
            for g in seq:
                seq_pos = _slice_jump_positions(g, axis, row)
                if not seq_pos:
                    missing = True
                    continue
                for x in lim_pos:
                    required = max(required, min(abs(x - y) for y in seq_pos))
        if missing:
            etas.append(None)
            limited.append(False)
            ok.append(False)
            continue
        eta = 2 * h
        while eta < required:
            eta *= 2
        etas.append(eta)
        limited.append(required <= 2 * h)
        ok.append(True)
    return SliceLscReport(
        axes=axes, limit_directional=lim_dir, seq_directional=seq_dir,
        margins=margins, total_margin=total_margin,
        limit_slice_counts=tuple(lim_counts), seq_slice_counts=tuple(seq_counts),
        eta=tuple(etas), eta_resolution_limited=tuple(limited), eta_ok=tuple(ok))


# -- gradient pairings (weak-convergence proxy) -------------------------------


def _test_fields(geom: GridGeometry) -> dict[str, np.ndarray]:
    fields = {"full": np.ones(geom.shape, dtype=bool)}
    for axis in range(geom.dim):
        half = np.zeros(geom.shape, dtype=bool)
        sel = [slice(None)] * geom.dim
        sel[axis] = slice(0, geom.shape[axis] // 2)
        half[tuple(sel)] = True
        fields[f"low_half_axis{axis}"] = half
    return fields


def gradient_pairings(u: GridFunction) -> dict[str, float]:
    """Pairings of the face-sampled gradient with a fixed indicator dictionary."""
    h = u.geom.spacing
    out = {}
    fields = _test_fields(u.geom)
    for axis in range(u.geom.dim):
        d = u.face_delta(axis)
        keep = ~u.crack_mask(axis)
        for name, mask in fields.items():
            n = u.geom.shape[axis]
            lower = mask.take(range(0, n - 1), axis=axis)
            val = float(np.sum((d[keep & lower] / h)) * u.geom.cell_volume)
            out[f"axis{axis}:{name}"] = val
    return out


# -- the full pipeline report -------------------------------------------------


@dataclass
class SequenceReport:
    settings: dict
    per_eps: dict
    nesting: dict
    violations: list

    @property
    def ok(self) -> bool:
        return not self.violations

    def as_dict(self) -> dict:
        return {
            "settings": self.settings,
            "per_eps": self.per_eps,
            "nesting": self.nesting,
            "violations": self.violations,
            "ok": self.ok,
        }


def _pipeline_one(v: GridFunction, u: GridFunction, datum, omega, eps, window,
                  ref_radius, gap_delta, violations, tag):
    prof = concentration_profile(v, domain=omega, window=window)
    dec = extract_bubbles(prof, eps=eps, gap_delta=gap_delta, ref_radius=ref_radius)
    for msg in dec.validate():
        violations.append(f"{tag}: decomposition: {msg}")
    radii = select_radii(prof, dec, base_radius=ref_radius, width=window, window=window) \
        if dec.bubbles else []
    part = build_partition(v, dec, radii, window=window, omega=omega)
    w = renormalize(u, part, datum=datum)
    region = vanishing_region(v, dec, radius=ref_radius, omega=omega)
    cert = None
    if v.geom.dim == 2:
        region_prof = concentration_profile(v, domain=region, window=window)
        score = levy_concentration(region_prof, ref_radius)[0]
        cert = vanishing_certificate(v, region, eps=max(score, 1e-12),
                                     radius=ref_radius, window=window)
        if not cert.certified:
            violations.append(f"{tag}: vanishing certificate failed")
    sup_norm = float(np.max(np.abs(w.values)))
    max_radius = max((max(c.r_minus, c.r_plus) for c in radii), default=0.0)
    jump_v = v.jump_measure()
    jump_w = w.jump_measure()
    outside = part.outside_jump
    if sup_norm > max_radius + window + 1e-12:
        violations.append(f"{tag}: renormalized sup-norm bound fails")
    if jump_w > jump_v + outside + 1e-12:
        violations.append(f"{tag}: renormalized jump bound fails")
    entry = {
        "total_mass": prof.total_mass(),
        "bubbles": [b.as_dict() for b in dec.bubbles],
        "vanishing_score": dec.vanishing_score,
        "remainder_mass": dec.remainder.total_mass(),
        "outside_jump": outside,
        "gap_boundary": part.gap_boundary,
        "rest_volume": float(np.count_nonzero(part.rest_mask())) * v.geom.cell_volume,
        "vanishing_region_volume": region.volume(),
        "certificate": cert.as_dict() if cert is not None else None,
        "sup_norm": sup_norm,
        "max_radius": max_radius,
        "jump_original": jump_v,
        "jump_renormalized": jump_w,
        "bulk_original": energy(v, 2.0).bulk,
        "pairings": gradient_pairings(w),
    }
    return entry, dec, part, w


def compactness_report(functions: Sequence[GridFunction],
                       datum: GridFunction | None = None,
                       omega: CellSet | None = None,
                       p: float = 2.0,
                       eps_ladder: Sequence[float] = (0.2, 0.1),
                       window: float = 1.0,
                       ref_radius: float = 1.0,
                       gap_delta: float = 2.0,
                       limit: GridFunction | None = None) -> SequenceReport:
    """Run the whole decomposition pipeline on a sequence and report every
    conclusion-level diagnostic.

    Per eps and per function: profile, bubble extraction, radius selection,
    partition, renormalization, vanishing region and certificate, contract
    checks.  Across the sequence: Ky Fan distances (convergence in measure),
    gradient pairings against a fixed indicator dictionary with uniform
    p-norm bounds (weak-convergence proxy), directional jump LSC via slicing,
    boundary-outside-jump and vanishing-volume trends, and bubble tracks.
    The eps ladder must be strictly decreasing; rest-region nesting across
    consecutive ladder entries is reported cell-wise per function.
    """
    if not functions:
        raise ValueError("need at least one function")
    if not p > 1:
        raise ValueError("p must exceed 1")
    eps_ladder = list(eps_ladder)
    if any(b >= a for a, b in zip(eps_ladder, eps_ladder[1:])):
        raise ValueError("eps ladder must be strictly decreasing")
    geom = functions[0].geom
    for g in functions[1:]:
        require_same_geometry(g.geom, geom)
    if datum is not None:
        require_same_geometry(datum.geom, geom)
    if omega is not None:
        require_same_geometry(omega.geom, geom)
    if limit is not None:
        require_same_geometry(limit.geom, geom)

    violations: list[str] = []
    reduced = [u.subtract(datum) if datum is not None else u for u in functions]
    per_eps: dict[str, dict] = {}
    rest_masks: dict[float, list[np.ndarray]] = {}
    for eps in eps_ladder:
        entries, decs, parts, renorms = [], [], [], []
        for i, (u, v) in enumerate(zip(functions, reduced)):
            tag = f"eps={eps} n_index={i}"
            entry, dec, part, w = _pipeline_one(
                v, u, datum, omega, eps, window, ref_radius, gap_delta, violations, tag)
            entries.append(entry)
            decs.append(dec)
            parts.append(part)
            renorms.append(w)
        rest_masks[eps] = [part.rest_mask() for part in parts]
        lim = limit if limit is not None else renorms[-1]
        consecutive = [kyfan_distance(a, b) for a, b in zip(renorms, renorms[1:])]
        to_limit = [kyfan_distance(w, lim) for w in renorms]
        bulk_norms = [energy(v, p).bulk for v in reduced]
        lim_pairings = gradient_pairings(lim)
        pairing_report = {}
        for key in lim_pairings:
            series = [e["pairings"][key] for e in entries]
            pairing_report[key] = {
                "series": series,
                "limit": lim_pairings[key],
                "max_gap": max(abs(s - lim_pairings[key]) for s in series),
            }
        lsc = lsc_report(reduced, lim)
        if not lsc.lsc_holds:
            violations.append(f"eps={eps}: jump LSC margin negative")
        tracks = track_sequence(decs) if all(d.bubbles for d in decs) else None
        per_eps[repr(eps)] = {
            "per_n": entries,
            "conclusion1_measure_convergence": {
                "consecutive_kyfan": consecutive,
                "kyfan_to_limit": to_limit,
            },
            "conclusion2_weak_gradient": {
                "bulk_pnorm": bulk_norms,
                "uniform_bulk_bound": max(bulk_norms) if bulk_norms else 0.0,
                "pairings": pairing_report,
            },
            "conclusion3_jump_lsc": lsc.as_dict(),
            "conclusion4_partition_trends": {
                "outside_jump_series": [e["outside_jump"] for e in entries],
                "rest_volume_series": [e["rest_volume"] for e in entries],
                "vanishing_volume_series": [e["vanishing_region_volume"] for e in entries],
            },
            "conclusion5_bubble_tracks": tracks.as_dict() if tracks else None,
        }
    nesting = {}
    for eps_hi, eps_lo in zip(eps_ladder, eps_ladder[1:]):
        flags = [bool(np.all(lo_mask <= hi_mask)) for hi_mask, lo_mask in
                 zip(rest_masks[eps_hi], rest_masks[eps_lo])]
        nesting[f"{eps_hi!r}->{eps_lo!r}"] = flags
    settings = {
        "p": p,
        "eps_ladder": eps_ladder,
        "window": window,
        "ref_radius": ref_radius,
        "gap_delta": gap_delta,
        "n_functions": len(functions),
        "datum": datum is not None,
        "omega": omega is not None,
        "limit_supplied": limit is not None,
    }
    return SequenceReport(settings=settings, per_eps=per_eps,
                          nesting=nesting, violations=violations)
