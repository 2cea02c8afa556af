"""Domain partition induced by range bubbles, and piecewise renormalization.

Every bubble owns a main value band around its center, buffered by two gap
bands of width ``window``; whatever value range is left between widened
bands is the vanishing range.  Pulling the bands back through u labels
every cell as main/gap/vanishing, giving a discrete Caccioppoli partition
whose inter-piece faces are either jump faces or get charged to the
``outside_jump`` statistic.

Renormalization subtracts each bubble center on its main piece and assigns
the datum value (zero after reduction) on gap and vanishing cells; the
perturbed variant additionally offsets each piece by a distinct constant in
[0,1] so that every partition boundary face genuinely jumps.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bubbles import Bubble, BubbleDecomposition
from .grid import CellSet, FaceId, GridFunction, require_same_geometry
from .profile import ConcentrationProfile

KIND_MAIN = 0
KIND_GAP_PLUS = 1
KIND_GAP_MINUS = 2
KIND_VANISHING = 3

_KIND_NAMES = {
    KIND_MAIN: "main",
    KIND_GAP_PLUS: "gap+",
    KIND_GAP_MINUS: "gap-",
    KIND_VANISHING: "vanishing",
}


def _bubble_list(bubbles) -> list[Bubble]:
    if isinstance(bubbles, BubbleDecomposition):
        return list(bubbles.bubbles)
    return list(bubbles)


@dataclass(frozen=True)
class RadiusChoice:
    center: float
    r_minus: float
    r_plus: float
    achieved: float  # objective value at the chosen radii
    interval_average: float  # mean of the objective over the search interval

    def as_dict(self) -> dict:
        return {
            "center": self.center,
            "r_minus": self.r_minus,
            "r_plus": self.r_plus,
            "achieved": self.achieved,
            "interval_average": self.interval_average,
        }


def _objective_pieces(f: ConcentrationProfile, offsets: Sequence[tuple[float, float]],
                      lo: float, hi: float) -> list[tuple[float, float, float]]:
    """Piecewise-constant objective r -> sum_k sign_k-shifted profile values.

    ``offsets`` holds (scale, shift) pairs meaning the term f(scale*r + shift)
    with scale in {+1,-1}.  Returns (left, right, value) pieces on [lo, hi).
    """
    cuts = {lo, hi}
    for scale, shift in offsets:
        for b in f.breakpoints:
            r = (b - shift) / scale
            if lo < r < hi:
                cuts.add(float(r))
    points = sorted(cuts)
    pieces = []
    for a, b in zip(points, points[1:]):
        mid = 0.5 * (a + b)
        val = sum(f.value_at(scale * mid + shift) for scale, shift in offsets)
        pieces.append((a, b, val))
    return pieces


def _interval_average(f: ConcentrationProfile, offsets, lo: float, hi: float) -> float:
    total = 0.0
    for scale, shift in offsets:
        a, b = scale * lo + shift, scale * hi + shift
        total += f.integrate(min(a, b), max(a, b))
    return total / (hi - lo)


def select_radii(f: ConcentrationProfile, bubbles, base_radius: float,
                 width: float, window: float | None = None,
                 per_side: bool = False, equal_radii: bool = False) -> list[RadiusChoice]:
    """Choose per-bubble radii in [base_radius, base_radius + width) where the
    profile is thin on both edges of the prospective gap bands.

    The objective at radius r adds the profile heights at the four band-edge
    levels center +- r and center +- (r + window); being piecewise constant
    it is minimized exactly over its plateaus, and the midpoint of the best
    plateau is returned so chosen thresholds avoid profile breakpoints.  The
    achieved minimum never exceeds the interval average (reported alongside).
    With ``per_side`` the two sides are optimized independently; with
    ``equal_radii`` one shared radius minimizes the summed objective.
    """
    if not width > 0:
        raise ValueError("width must be positive")
    if not base_radius > 0:
        raise ValueError("base_radius must be positive")
    w = f.window if window is None else float(window)
    blist = _bubble_list(bubbles)
    lo, hi = base_radius, base_radius + width

    def best(offsets) -> tuple[float, float]:
        pieces = _objective_pieces(f, offsets, lo, hi)
        vmin = min(v for _, _, v in pieces)
        for a, b, v in pieces:  # leftmost minimizing plateau, for determinism
            if v == vmin:
                return 0.5 * (a + b), vmin
        raise AssertionError("unreachable")

    out = []
    if equal_radii and blist:
        offsets = []
        for b in blist:
            offsets += [(1.0, b.center), (1.0, b.center + w),
                        (-1.0, b.center), (-1.0, b.center - w)]
        r, val = best(offsets)
        avg = _interval_average(f, offsets, lo, hi)
        return [RadiusChoice(b.center, r, r, val, avg) for b in blist]
    for b in blist:
        plus = [(1.0, b.center), (1.0, b.center + w)]
        minus = [(-1.0, b.center), (-1.0, b.center - w)]
        if per_side:
            rp, vp = best(plus)
            rm, vm = best(minus)
            avg = _interval_average(f, plus + minus, lo, hi)
            out.append(RadiusChoice(b.center, rm, rp, vp + vm, avg))
        else:
            r, val = best(plus + minus)
            avg = _interval_average(f, plus + minus, lo, hi)
            out.append(RadiusChoice(b.center, r, r, val, avg))
    return out


@dataclass(frozen=True)
class PartitionPiece:
    center: float
    r_minus: float
    r_plus: float

    @property
    def band(self) -> tuple[float, float]:
        return self.center - self.r_minus, self.center + self.r_plus


@dataclass(frozen=True)
class SetStats:
    volume: float
    perimeter: float
    outside_jump: float

    def as_dict(self) -> dict:
        return {"volume": self.volume, "perimeter": self.perimeter,
                "outside_jump": self.outside_jump}


class DomainPartition:
    """Cell labeling into main pieces, gap bands and vanishing slots."""

    def __init__(self, u: GridFunction, pieces: Sequence[PartitionPiece],
                 window: float, omega: CellSet | None = None):
        self.geom = u.geom
        self.window = float(window)
        self.pieces = tuple(sorted(pieces, key=lambda p: p.center))
        w = self.window
        edges = []
        for p in self.pieces:
            blo, bhi = p.band
            edges += [blo - w, blo, bhi, bhi + w]
        # widened bands may touch (shared edge) but must not overlap
        if any(b < a for a, b in zip(edges, edges[1:])):
            raise ValueError("bubble bands overlap; partition rejected")
        self._edges = np.asarray(edges)
        k = np.searchsorted(self._edges, u.values.ravel(), side="right")
        kind = np.empty(k.size, dtype=np.uint8)
        index = (k // 4).astype(np.int32)
        rem = k % 4
        kind[rem == 0] = KIND_VANISHING
        kind[rem == 1] = KIND_GAP_MINUS
        kind[rem == 2] = KIND_MAIN
        kind[rem == 3] = KIND_GAP_PLUS
        self.label_kind = kind.reshape(u.geom.shape)
        self.label_index = index.reshape(u.geom.shape)
        self.datum_piece: int | None = None
        if omega is not None and not omega.mask.all():
            require_same_geometry(u.geom, omega.geom)
            for j, p in enumerate(self.pieces):
                blo, bhi = p.band
                if blo <= 0.0 < bhi:
                    self.datum_piece = j
                    break
        self.stats = self._compute_stats(u)
        self.outside_jump = self._partition_outside_jump(u)
        self.gap_boundary = self._gap_boundary(u)

    # -- labeling helpers -------------------------------------------------

    def mask(self, kind: int, index: int) -> np.ndarray:
        return (self.label_kind == kind) & (self.label_index == index)

    def labels_present(self) -> list[tuple[int, int]]:
        pairs = np.unique(
            np.stack([self.label_kind.ravel(), self.label_index.ravel()], axis=1), axis=0)
        return [(int(k), int(i)) for k, i in pairs]

    def cell_set(self, kind: int, index: int) -> CellSet:
        return CellSet(self.geom, self.mask(kind, index))

    def rest_mask(self) -> np.ndarray:
        """Gap and vanishing cells together (the non-main aggregate)."""
        return self.label_kind != KIND_MAIN

    def _compute_stats(self, u: GridFunction) -> dict[str, SetStats]:
        from .grid import boundary_outside_jump

        out = {}
        for kind, index in self.labels_present():
            S = self.cell_set(kind, index)
            out[f"{_KIND_NAMES[kind]}:{index}"] = SetStats(
                volume=S.volume(),
                perimeter=S.perimeter(),
                outside_jump=boundary_outside_jump(S, u),
            )
        return out

    def _iter_label_faces(self, u: GridFunction):
        """Interior faces with distinct labels on the two sides, as masks."""
        for axis in range(self.geom.dim):
            n = self.geom.shape[axis]
            k_lo = self.label_kind.take(range(0, n - 1), axis=axis)
            k_hi = self.label_kind.take(range(1, n), axis=axis)
            i_lo = self.label_index.take(range(0, n - 1), axis=axis)
            i_hi = self.label_index.take(range(1, n), axis=axis)
            differ = (k_lo != k_hi) | (i_lo != i_hi)
            jump = u.crack_mask(axis) & (u.face_delta(axis) != 0)
            yield axis, differ, jump, k_lo, k_hi

    def _partition_outside_jump(self, u: GridFunction) -> float:
        """Measure of main/vanishing piece boundaries not on the jump set."""
        count = 0
        involved = (KIND_MAIN, KIND_VANISHING)
        for _, differ, jump, k_lo, k_hi in self._iter_label_faces(u):
            touches = np.isin(k_lo, involved) | np.isin(k_hi, involved)
            count += int(np.count_nonzero(differ & touches & ~jump))
        return count * self.geom.face_area

    def _gap_boundary(self, u: GridFunction) -> float:
        """Ambient measure of the union of all gap-set boundaries."""
        gaps = (KIND_GAP_PLUS, KIND_GAP_MINUS)
        is_gap = np.isin(self.label_kind, gaps)
        count = 0
        for axis, differ, _, k_lo, k_hi in self._iter_label_faces(u):
            touches = np.isin(k_lo, gaps) | np.isin(k_hi, gaps)
            count += int(np.count_nonzero(differ & touches))
        for axis in range(self.geom.dim):
            count += int(np.count_nonzero(is_gap.take([0], axis=axis)))
            count += int(np.count_nonzero(is_gap.take([-1], axis=axis)))
        return count * self.geom.face_area

    def volume_by_kind(self, kind: int) -> float:
        return int(np.count_nonzero(self.label_kind == kind)) * self.geom.cell_volume

    def label_names(self) -> np.ndarray:
        names = np.empty(self.geom.shape, dtype=object)
        for kind, index in self.labels_present():
            names[self.mask(kind, index)] = f"{_KIND_NAMES[kind]}:{index}"
        return names

    def to_csv(self) -> str:
        """Label raster, one row per leading index, cells comma-separated."""
        names = self.label_names()
        if self.geom.dim == 1:
            return ",".join(names.tolist()) + "\n"
        return "\n".join(",".join(row) for row in names.tolist()) + "\n"

    def as_dict(self) -> dict:
        return {
            "pieces": [{"center": p.center, "r_minus": p.r_minus, "r_plus": p.r_plus}
                       for p in self.pieces],
            "window": self.window,
            "datum_piece": self.datum_piece,
            "label_kind": [int(x) for x in self.label_kind.ravel()],
            "label_index": [int(x) for x in self.label_index.ravel()],
            "stats": {k: s.as_dict() for k, s in self.stats.items()},
            "outside_jump": self.outside_jump,
            "gap_boundary": self.gap_boundary,
            "volumes": {
                "main": self.volume_by_kind(KIND_MAIN),
                "gap": self.volume_by_kind(KIND_GAP_PLUS) + self.volume_by_kind(KIND_GAP_MINUS),
                "vanishing": self.volume_by_kind(KIND_VANISHING),
            },
        }


def build_partition(u: GridFunction, bubbles, radii: Sequence[RadiusChoice],
                    window: float, omega: CellSet | None = None) -> DomainPartition:
    """Label every cell by the bubble value bands; rejects overlapping bands."""
    blist = _bubble_list(bubbles)
    by_center = {rc.center: rc for rc in radii}
    pieces = []
    for b in blist:
        rc = by_center.get(b.center)
        if rc is None:
            raise ValueError(f"no radius choice for bubble centered at {b.center}")
        pieces.append(PartitionPiece(b.center, rc.r_minus, rc.r_plus))
    return DomainPartition(u, pieces, window, omega)


def _new_cracks(u: GridFunction, part: DomainPartition) -> frozenset[FaceId]:
    cracks = set(u.cracks)
    for axis in range(u.geom.dim):
        n = u.geom.shape[axis]
        k_lo = part.label_kind.take(range(0, n - 1), axis=axis)
        k_hi = part.label_kind.take(range(1, n), axis=axis)
        i_lo = part.label_index.take(range(0, n - 1), axis=axis)
        i_hi = part.label_index.take(range(1, n), axis=axis)
        differ = (k_lo != k_hi) | (i_lo != i_hi)
        for idx in np.argwhere(differ):
            cracks.add(FaceId(axis, tuple(int(x) for x in idx)))
    return frozenset(cracks)


def _piece_id_arrays(part: DomainPartition) -> np.ndarray:
    """Main pieces keep their index; all gap/vanishing cells share id -1."""
    ids = np.where(part.label_kind == KIND_MAIN, part.label_index.astype(np.int64), -1)
    return ids


def renormalize(u: GridFunction, part: DomainPartition,
                datum: GridFunction | None = None) -> GridFunction:
    """Subtract each piece's center on its main piece; datum value elsewhere.

    With a datum h the input is first reduced to v = u - h (so the result
    vanishes on gap and vanishing cells and, when a datum piece exists, on
    the whole complement of the working domain: that piece's translation
    constant is pinned to zero).  Faces between different partition labels
    are added to the crack set, which keeps the jump measure within
    ``jump(v) + outside_jump`` of the original.
    """
    v = u.subtract(datum) if datum is not None else u
    require_same_geometry(v.geom, part.geom)
    values = np.zeros(v.geom.shape)
    for j, p in enumerate(part.pieces):
        m = part.mask(KIND_MAIN, j)
        a = 0.0 if part.datum_piece == j else p.center
        values[m] = v.values[m] - a
    return GridFunction(v.geom, values, _new_cracks(v, part))


_DYADIC_CANDIDATES: list[float] = [0.0, 1.0]
for _depth in range(1, 14):
    _den = 2**_depth
    _DYADIC_CANDIDATES.extend(k / _den for k in range(1, _den, 2))


def perturbed_translation(u: GridFunction, part: DomainPartition,
                          datum: GridFunction | None = None) -> GridFunction:
    """Renormalize with per-piece offsets in [0,1] making every partition
    boundary face a genuine jump.

    Pieces are the main pieces plus the gap/vanishing aggregate; each gets a
    distinct dyadic offset chosen greedily so that across every inter-piece
    face the two sides differ.  The jump set of the result is exactly the
    partition boundary united with the jump faces interior to the main
    pieces (jumps interior to the aggregate are overwritten by the constant
    datum value, so they heal).
    """
    v = u.subtract(datum) if datum is not None else u
    require_same_geometry(v.geom, part.geom)
    base = np.zeros(v.geom.shape)
    for j, p in enumerate(part.pieces):
        m = part.mask(KIND_MAIN, j)
        a = 0.0 if part.datum_piece == j else p.center
        base[m] = v.values[m] - a
    ids = _piece_id_arrays(part)
    piece_order = [-1] + list(range(len(part.pieces)))  # aggregate first, then by band
    # collect cross-piece faces once: (id_lo, id_hi, base_lo, base_hi)
    cross: list[tuple[int, int, float, float]] = []
    for axis in range(v.geom.dim):
        n = v.geom.shape[axis]
        id_lo = ids.take(range(0, n - 1), axis=axis)
        id_hi = ids.take(range(1, n), axis=axis)
        b_lo = base.take(range(0, n - 1), axis=axis)
        b_hi = base.take(range(1, n), axis=axis)
        sel = id_lo != id_hi
        for a_, b_, x, y in zip(id_lo[sel].ravel(), id_hi[sel].ravel(),
                                b_lo[sel].ravel(), b_hi[sel].ravel()):
            cross.append((int(a_), int(b_), float(x), float(y)))
    alphas: dict[int, float] = {}
    for pid in piece_order:
        forbidden = set(alphas.values())
        for id_a, id_b, x, y in cross:
            if id_a == pid and id_b in alphas:
                forbidden.add(alphas[id_b] + y - x)
            elif id_b == pid and id_a in alphas:
                forbidden.add(alphas[id_a] + x - y)
        for cand in _DYADIC_CANDIDATES:
            if cand not in forbidden:
                alphas[pid] = cand
                break
        else:
            raise RuntimeError("exhausted dyadic offsets; too many conflicting faces")
    # ids == -1 (the aggregate) indexes the last lookup slot
    lookup = np.array([alphas[j] for j in range(len(part.pieces))] + [alphas[-1]])
    values = base + lookup[ids]
    return GridFunction(v.geom, values, _new_cracks(v, part))


def vanishing_region(u: GridFunction, bubbles, radius: float,
                     omega: CellSet | None = None) -> CellSet:
    """Cells whose value escapes every open bubble window (center-r, center+r).

    This is the domain region responsible for the weakly vanishing part of
    the profile once the bubbles are excised.
    """
    if not radius > 0:
        raise ValueError("radius must be positive")
    blist = _bubble_list(bubbles)
    inside_any = np.zeros(u.geom.shape, dtype=bool)
    for b in blist:
        inside_any |= (u.values > b.center - radius) & (u.values < b.center + radius)
    mask = ~inside_any
    if omega is not None:
        require_same_geometry(u.geom, omega.geom)
        mask &= omega.mask
    return CellSet(u.geom, mask)
