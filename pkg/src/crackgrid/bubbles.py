"""Concentration-compactness in the range: trichotomy and bubble extraction.

A profile with positive mass either concentrates in one window
(compactness), spreads so thin that every window is negligible (vanishing),
or splits (dichotomy).  Iterating the split yields a decomposition into
finitely many bubbles plus a weakly vanishing remainder.

All tolerances are relative: a threshold ``eps`` acts as the fraction
``eps * mass_scale`` of the decomposed profile's total mass (``mass_scale``
defaults to that total).  This keeps the classification invariant under
rescaling the profile and matches the trichotomy contract, where both the
compactness and vanishing tests compare against ``eps * total``.

Extraction enforces the bubble separation guarantee
``|center_i - center_j| >= inner_i + inner_j + gap_delta`` by restricting
the center search and capping window growth; no mass is ever stranded by
the restriction because an allowed window always reaches the edge of the
previously removed zones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .profile import ConcentrationProfile, levy_concentration, window_mass


@dataclass(frozen=True)
class ExtractionParams:
    eps: float
    gap_delta: float
    ref_radius: float

    def __post_init__(self):
        if not 0 < self.eps < 1:
            raise ValueError(f"eps must lie in (0,1), got {self.eps}")
        if not self.gap_delta > 0:
            raise ValueError(f"gap_delta must be positive, got {self.gap_delta}")
        if not self.ref_radius > 0:
            raise ValueError(f"ref_radius must be positive, got {self.ref_radius}")


@dataclass(frozen=True)
class Bubble:
    """One cluster of range concentration: center, window radii, captured mass."""

    center: float
    inner_radius: float
    outer_radius: float
    mass: float

    def __post_init__(self):
        if not (0 < self.inner_radius <= self.outer_radius):
            raise ValueError("need 0 < inner_radius <= outer_radius")
        if not self.mass > 0:
            raise ValueError("bubble mass must be positive")

    def as_dict(self) -> dict:
        return {
            "center": self.center,
            "inner_radius": self.inner_radius,
            "outer_radius": self.outer_radius,
            "mass": self.mass,
        }


@dataclass(frozen=True)
class BubbleDecomposition:
    """Bubbles in descending mass order plus the zeroed-out remainder."""

    bubbles: tuple[Bubble, ...]
    remainder: ConcentrationProfile
    vanishing_score: float
    params: ExtractionParams
    mass_scale: float
    total_mass: float
    leakages: tuple[float, ...]
    capped: tuple[bool, ...] = ()
    incomplete: bool = False

    def bubble_mass(self) -> float:
        return sum(b.mass for b in self.bubbles)

    def leakage_total(self) -> float:
        return sum(self.leakages)

    def validate(self, tol: float = 1e-12) -> list[str]:
        """Check the structural invariants; returns human-readable violations."""
        out = []
        scale = max(1.0, abs(self.total_mass))
        if self.bubble_mass() > self.total_mass + tol * scale:
            out.append("bubble masses exceed the total mass")
        masses = [b.mass for b in self.bubbles]
        if any(m2 > m1 + tol * scale for m1, m2 in zip(masses, masses[1:])):
            out.append("bubble masses are not nonincreasing")
        gap = self.params.gap_delta
        for i, a in enumerate(self.bubbles):
            for b in self.bubbles[i + 1 :]:
                need = a.inner_radius + b.inner_radius + gap
                if abs(a.center - b.center) < need - 1e-9:
                    out.append(f"bubbles at {a.center} and {b.center} violate separation")
        if not self.incomplete:
            if self.vanishing_score > self.params.eps * self.mass_scale + tol * scale:
                out.append("remainder is not weakly vanishing at eps")
        threshold = self.params.eps * self.mass_scale
        for leak, was_capped in zip(self.leakages, self.capped):
            if not was_capped and leak > threshold + tol * scale:
                out.append("uncapped bubble leaks more than eps * mass_scale")
        book = self.bubble_mass() + self.leakage_total() + self.remainder.total_mass()
        if abs(book - self.total_mass) > tol * scale:
            out.append("mass bookkeeping identity fails")
        return out

    def as_dict(self) -> dict:
        return {
            "bubbles": [b.as_dict() for b in self.bubbles],
            "remainder_mass": self.remainder.total_mass(),
            "vanishing_score": self.vanishing_score,
            "leakage": list(self.leakages),
            "capped": list(self.capped),
            "incomplete": self.incomplete,
            "params": {
                "eps": self.params.eps,
                "gap_delta": self.params.gap_delta,
                "ref_radius": self.params.ref_radius,
                "mass_scale": self.mass_scale,
            },
        }


@dataclass(frozen=True)
class TrichotomyVerdict:
    kind: str  # "compactness" | "vanishing" | "dichotomy"
    witness: Bubble | None
    split_masses: tuple[float, float] | None
    total: float
    eps: float
    ref_radius: float

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "witness": self.witness.as_dict() if self.witness else None,
            "split_masses": list(self.split_masses) if self.split_masses else None,
            "total": self.total,
            "eps": self.eps,
            "ref_radius": self.ref_radius,
        }


def _heavy_adjacent_strip(f: ConcentrationProfile, lo: float, hi: float,
                          ref_radius: float, threshold: float,
                          zones: Sequence[tuple[float, float]]) -> bool:
    """Is a heavy narrow strip trapped between (lo, hi) and an existing zone?

    Strips at least one window diameter wide still admit an allowed center,
    so only narrower ones can be stranded by the separation constraint.
    """
    for side in (0, 1):
        if side == 0:
            edges = [z_hi for z_lo, z_hi in zones if z_hi <= lo]
            if not edges:
                continue
            a, b = max(edges), lo
        else:
            edges = [z_lo for z_lo, z_hi in zones if z_lo >= hi]
            if not edges:
                continue
            a, b = hi, min(edges)
        if 0 < b - a < 2 * ref_radius and f.integrate(a, b) > threshold:
            return True
    return False


def _grow_window(f: ConcentrationProfile, center: float, ref_radius: float,
                 gap_delta: float, leak_threshold: float,
                 radius_cap: float = math.inf,
                 zones: Sequence[tuple[float, float]] = ()) -> tuple[float, float, bool]:
    """Grow the window from ref_radius in gap_delta steps until the annulus
    (R, R+gap_delta] carries at most leak_threshold mass and no heavy narrow
    strip is trapped against a previously removed zone (or the cap binds).

    Returns (inner, outer, capped).  A cap exit lands the window flush
    against the capping zone, so the strip on that side is gone, but mass
    the growth would have captured can then land in the leakage annulus;
    ``capped`` records that the leak guarantee was forfeited this way.
    """
    r = ref_radius
    while r + gap_delta <= radius_cap:
        lo, hi = center - r - gap_delta, center + r + gap_delta
        annulus = f.integrate(lo, hi) - f.integrate(center - r, center + r)
        if annulus <= leak_threshold and not _heavy_adjacent_strip(
                f, lo, hi, ref_radius, leak_threshold, zones):
            return r, r + gap_delta, False
        r += gap_delta
    return r, r + gap_delta, True


def _constrained_levy(f: ConcentrationProfile, radius: float,
                      keep_out: Sequence[tuple[float, float]]) -> tuple[float, float]:
    """Levy maximization over centers outside the keep-out intervals.

    Window mass is piecewise linear in the center, so the maximum over the
    allowed closed set sits at a breakpoint +- radius or on a keep-out edge.
    """
    if f.breakpoints.size == 0:
        return 0.0, 0.0
    cand = [f.breakpoints - radius, f.breakpoints + radius]
    for lo, hi in keep_out:
        cand.append(np.array([lo, hi]))
    centers = np.unique(np.concatenate(cand))
    if keep_out:
        ok = np.ones(centers.size, dtype=bool)
        for lo, hi in keep_out:
            ok &= ~((centers > lo) & (centers < hi))
        centers = centers[ok]
    if centers.size == 0:
        return 0.0, 0.0
    masses = f.mass_below(centers + radius) - f.mass_below(centers - radius)
    k = int(np.argmax(masses))
    return float(masses[k]), float(centers[k])


def classify(f: ConcentrationProfile, eps: float, ref_radius: float,
             gap_delta: float = 2.0) -> TrichotomyVerdict:
    """Trichotomy at scale (eps, ref_radius): compactness, vanishing or dichotomy.

    The empty profile is vanishing by convention.  In the dichotomy case the
    first mass is the maximal window grown until its annulus leaks less than
    eps * total.
    """
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0,1), got {eps}")
    total = f.total_mass()
    if total == 0.0:
        return TrichotomyVerdict("vanishing", None, None, 0.0, eps, ref_radius)
    m_star, center = levy_concentration(f, ref_radius)
    if m_star <= eps * total:
        return TrichotomyVerdict("vanishing", None, None, total, eps, ref_radius)
    inner, outer, _ = _grow_window(f, center, ref_radius, gap_delta, eps * total)
    witness = Bubble(center, inner, outer, window_mass(f, center, inner))
    if m_star >= (1 - eps) * total:
        return TrichotomyVerdict("compactness", witness, None, total, eps, ref_radius)
    lam1 = witness.mass
    return TrichotomyVerdict("dichotomy", witness, (lam1, total - lam1), total, eps, ref_radius)


def extract_bubbles(f: ConcentrationProfile, eps: float, gap_delta: float,
                    ref_radius: float, max_bubbles: int = 64,
                    mass_scale: float | None = None) -> BubbleDecomposition:
    """Greedy multi-bubble decomposition of a profile.

    Repeatedly take the largest admissible window at ref_radius, grow it
    until the surrounding annulus leaks at most eps * mass_scale, record the
    bubble, zero the enlarged window, and stop once no window exceeds
    eps * mass_scale (weak vanishing).  Deterministic given the parameters;
    ties in the center search break toward the smallest center.  Bubbles are
    reported in descending mass order.

    Every uncapped bubble leaks at most eps * mass_scale.  When the
    separation cap stops growth early (a cluster squeezed between two
    windows too tightly for a third), the squeezed mass is zeroed as that
    bubble's leakage and the bubble is flagged in ``capped``.
    """
    params = ExtractionParams(eps, gap_delta, ref_radius)
    total = f.total_mass()
    scale = total if mass_scale is None else float(mass_scale)
    current = f
    found: list[tuple[Bubble, float, bool]] = []  # (bubble, leakage, capped)
    incomplete = False
    if scale > 0:
        threshold = eps * scale
        while True:
            keep_out = [
                (b.center - (b.inner_radius + ref_radius + gap_delta),
                 b.center + (b.inner_radius + ref_radius + gap_delta))
                for b, _, _ in found
            ]
            mass, center = _constrained_levy(current, ref_radius, keep_out)
            if mass <= threshold:
                break
            if len(found) >= max_bubbles:
                incomplete = True
                break
            cap = math.inf
            zones = []
            for b, _, _ in found:
                cap = min(cap, abs(center - b.center) - b.inner_radius - gap_delta)
                zones.append((b.center - b.outer_radius, b.center + b.outer_radius))
            inner, outer, was_capped = _grow_window(
                current, center, ref_radius, gap_delta, threshold,
                radius_cap=cap, zones=zones)
            captured = window_mass(current, center, inner)
            removed = window_mass(current, center, outer)
            found.append((Bubble(center, inner, outer, captured),
                          removed - captured, was_capped))
            current = current.zero_on(center - outer, center + outer)
    order = sorted(range(len(found)), key=lambda i: (-found[i][0].mass, found[i][0].center))
    score = levy_concentration(current, ref_radius)[0]
    return BubbleDecomposition(
        bubbles=tuple(found[i][0] for i in order),
        remainder=current,
        vanishing_score=score,
        params=params,
        mass_scale=scale,
        total_mass=total,
        leakages=tuple(found[i][1] for i in order),
        capped=tuple(found[i][2] for i in order),
        incomplete=incomplete,
    )


@dataclass(frozen=True)
class BubbleTracks:
    """Cross-sequence bubble matching by mass rank."""

    counts: tuple[int, ...]
    centers: tuple[tuple[float, ...], ...]  # [rank][n]
    mass_series: tuple[tuple[float, ...], ...]  # [rank][n]
    separations: dict[tuple[int, int], tuple[float, ...]]
    trends: dict[tuple[int, int], str]

    def as_dict(self) -> dict:
        return {
            "counts": list(self.counts),
            "centers": [list(c) for c in self.centers],
            "mass_series": [list(m) for m in self.mass_series],
            "separations": {f"{i}-{j}": list(s) for (i, j), s in self.separations.items()},
            "trends": {f"{i}-{j}": t for (i, j), t in self.trends.items()},
        }


def separation_trend(series: Sequence[float]) -> str:
    if all(b > a for a, b in zip(series, series[1:])):
        return "increasing"
    return "bounded"


def track_sequence(decomps: Sequence[BubbleDecomposition]) -> BubbleTracks:
    """Match bubbles across a sequence by mass rank and report separations.

    All decompositions must share (eps, gap_delta, ref_radius).  Pair
    separation series get an "increasing" trend only when strictly monotone.
    """
    if not decomps:
        raise ValueError("need at least one decomposition")
    p0 = decomps[0].params
    for d in decomps[1:]:
        if d.params != p0:
            raise ValueError("decompositions were produced with different parameters")
    counts = tuple(len(d.bubbles) for d in decomps)
    j = min(counts)
    centers = tuple(tuple(d.bubbles[r].center for d in decomps) for r in range(j))
    masses = tuple(tuple(d.bubbles[r].mass for d in decomps) for r in range(j))
    seps: dict[tuple[int, int], tuple[float, ...]] = {}
    trends: dict[tuple[int, int], str] = {}
    for a in range(j):
        for b in range(a + 1, j):
            series = tuple(abs(x - y) for x, y in zip(centers[a], centers[b]))
            seps[(a, b)] = series
            trends[(a, b)] = separation_trend(series)
    return BubbleTracks(counts, centers, masses, seps, trends)
