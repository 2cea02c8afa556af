"""Command-line surface: fixtures, pipelines, reports, plots.

Exit codes: 0 on success with all asserted invariants passing, 1 on I/O or
parse errors, 2 on invariant violations (a machine-readable violation
report is still emitted).  JSON output uses sorted keys and Python's
shortest round-trip float formatting, so identical inputs and flags produce
byte-identical reports.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .analysis import compactness_report, lsc_report, vanishing_certificate
from .bubbles import extract_bubbles
from .fixtures import fixture_runaway, fixture_staircase
from .grid import (
    CellSet,
    GridFunction,
    cell_set_from_dict,
    energy,
    grid_function_from_dict,
    grid_function_to_dict,
)
from .partition import (
    KIND_GAP_MINUS,
    KIND_GAP_PLUS,
    KIND_MAIN,
    build_partition,
    perturbed_translation,
    renormalize,
    select_radii,
)
from .profile import (
    concentration_profile,
    profile_to_csv,
    profile_to_svg,
)

EXIT_OK = 0
EXIT_IO = 1
EXIT_VIOLATION = 2


class InputError(Exception):
    """I/O or parse failure (exit code 1)."""


def _load_doc(path: str) -> dict:
    try:
        if path == "-":
            return json.load(sys.stdin)
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


def _load_function(path: str) -> GridFunction:
    try:
        return grid_function_from_dict(_load_doc(path))
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"bad grid function {path}: {exc}") from exc


def _load_cell_set(path: str) -> CellSet:
    try:
        return cell_set_from_dict(_load_doc(path))
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"bad cell set {path}: {exc}") from exc


def _emit(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _emit_json(obj, out: str | None) -> None:
    _emit(json.dumps(obj, sort_keys=True) + "\n", out)


def _trend_svg(series_map: dict[str, list[float]], width=640, height=240) -> str:
    pad = 34
    all_vals = [v for s in series_map.values() for v in s] or [0.0]
    top = max(max(all_vals), 1e-30) * 1.1
    length = max(len(s) for s in series_map.values())
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             '<rect width="100%" height="100%" fill="white"/>']
    colors = ["black", "crimson", "steelblue", "seagreen", "darkorange"]
    for k, (name, series) in enumerate(sorted(series_map.items())):
        pts = []
        for i, v in enumerate(series):
            x = pad + (i / max(1, length - 1)) * (width - 2 * pad)
            y = height - pad - (v / top) * (height - 2 * pad)
            pts.append(f"{x:.2f},{y:.2f}")
        color = colors[k % len(colors)]
        parts.append(f'<polyline points="{" ".join(pts)}" fill="none" '
                     f'stroke="{color}" stroke-width="1.5"/>')
        parts.append(f'<text x="{pad}" y="{14 + 14 * k}" font-size="11" '
                     f'fill="{color}">{name}</text>')
    parts.append(f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" '
                 f'y2="{height - pad}" stroke="gray"/></svg>\n')
    return "".join(parts)


def _labels_svg(part, cell: int = 8) -> str:
    shape = part.label_kind.shape
    if len(shape) == 1:
        shape = (shape[0], 1)
    palette = {KIND_MAIN: ["#4477aa", "#66ccee", "#228833", "#ccbb44"],
               KIND_GAP_PLUS: ["#ee6677"], KIND_GAP_MINUS: ["#aa3377"]}
    w, h = shape[0] * cell, shape[1] * cell
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}">']
    kinds = np.atleast_2d(part.label_kind.reshape(shape))
    indices = np.atleast_2d(part.label_index.reshape(shape))
    for ix in range(shape[0]):
        for iy in range(shape[1]):
            kind, idx = int(kinds[ix, iy]), int(indices[ix, iy])
            if kind in palette:
                color = palette[kind][idx % len(palette[kind])]
            else:
                color = "#dddddd"  # vanishing
            y = (shape[1] - 1 - iy) * cell
            parts.append(f'<rect x="{ix * cell}" y="{y}" width="{cell}" '
                         f'height="{cell}" fill="{color}"/>')
    parts.append("</svg>\n")
    return "".join(parts)


def _add_common(p: argparse.ArgumentParser, *names: str) -> None:
    if "window" in names:
        p.add_argument("--window", type=float, default=1.0,
                       help="trace window half-width (default 1.0)")
    if "eps" in names:
        p.add_argument("--eps", type=float, default=0.1,
                       help="relative concentration tolerance in (0,1) (default 0.1)")
    if "p" in names:
        p.add_argument("--p", type=float, default=2.0,
                       help="bulk integrability exponent, > 1 (default 2.0)")
    if "ref" in names:
        p.add_argument("--ref-radius", type=float, default=1.0,
                       help="window radius for concentration search (default 1.0)")
    if "gap" in names:
        p.add_argument("--gap-delta", type=float, default=2.0,
                       help="annulus growth step (default 2.0)")
    if "out" in names:
        p.add_argument("--out", default=None, help="output path (default stdout)")
    if "svg" in names:
        p.add_argument("--svg", default=None, help="also write an SVG view here")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="crackgrid",
        description="Crack-aware grid functions: energies, concentration "
                    "profiles, bubble decompositions, partitions and "
                    "compactness reports.")
    sub = ap.add_subparsers(dest="command", required=True)

    fx = sub.add_parser("fixture", help="generate a built-in fixture")
    fx.add_argument("name", choices=["staircase", "runaway"])
    fx.add_argument("--n", type=float, default=4.0,
                    help="stair count / runaway height (default 4)")
    fx.add_argument("--cells-per-step", type=int, default=1,
                    help="staircase grid refinement (default 1)")
    fx.add_argument("--resolution", type=int, default=16,
                    help="runaway cells along the long axis (default 16)")
    _add_common(fx, "out")

    en = sub.add_parser("energy", help="bulk and jump energy of a function")
    en.add_argument("input", nargs="?", default="-")
    _add_common(en, "p", "out")

    pr = sub.add_parser("profile", help="range concentration profile")
    pr.add_argument("input", nargs="?", default="-")
    pr.add_argument("--domain", default=None, help="cell-set mask file")
    pr.add_argument("--format", choices=["json", "csv"], default="json")
    _add_common(pr, "window", "out", "svg")

    de = sub.add_parser("decompose", help="bubble decomposition of the profile")
    de.add_argument("input", nargs="?", default="-")
    de.add_argument("--domain", default=None, help="cell-set mask file")
    de.add_argument("--max-bubbles", type=int, default=64)
    _add_common(de, "window", "eps", "ref", "gap", "out")

    pa = sub.add_parser("partition", help="main/gap/vanishing domain partition")
    pa.add_argument("input", nargs="?", default="-")
    pa.add_argument("--omega", default=None, help="working-domain mask file")
    pa.add_argument("--format", choices=["json", "csv"], default="json",
                    help="csv emits the label raster")
    _add_common(pa, "window", "eps", "ref", "gap", "out", "svg")

    re = sub.add_parser("renormalize", help="piecewise-constant renormalization")
    re.add_argument("input", nargs="?", default="-")
    re.add_argument("--datum", default=None, help="datum function file")
    re.add_argument("--omega", default=None, help="working-domain mask file")
    re.add_argument("--perturb", action="store_true",
                    help="offset pieces so every partition boundary jumps")
    _add_common(re, "window", "eps", "ref", "gap", "out")

    va = sub.add_parser("vanishing", help="volume certificate for a weakly "
                                          "vanishing region")
    va.add_argument("input", nargs="?", default="-")
    va.add_argument("--region", required=True, help="cell-set mask file")
    va.add_argument("--radius", type=float, default=1.0,
                    help="window radius in the hypothesis (default 1.0)")
    _add_common(va, "window", "eps", "out")

    sl = sub.add_parser("slice-lsc", help="directional jump LSC report for a "
                                          "manifest of functions")
    sl.add_argument("manifest")
    _add_common(sl, "out")

    ve = sub.add_parser("verify", help="full compactness report for a manifest")
    ve.add_argument("manifest")
    ve.add_argument("--format", choices=["json", "csv"], default="json",
                    help="csv emits the per-n trend series")
    _add_common(ve, "out", "svg")
    return ap


def _load_manifest(path: str):
    doc = _load_doc(path)
    base = Path(path).parent if path != "-" else Path(".")

    def resolve(p):
        q = Path(p)
        return str(q if q.is_absolute() else base / q)

    try:
        functions = [_load_function(resolve(p)) for p in doc["functions"]]
    except KeyError as exc:
        raise InputError(f"manifest missing key: {exc}") from exc
    if not functions:
        raise InputError("manifest lists no functions")
    datum = _load_function(resolve(doc["datum"])) if doc.get("datum") else None
    omega = _load_cell_set(resolve(doc["omega"])) if doc.get("omega") else None
    limit = _load_function(resolve(doc["limit"])) if doc.get("limit") else None
    settings = {
        "p": float(doc.get("p", 2.0)),
        "eps_ladder": [float(e) for e in doc.get("eps_ladder", [0.2, 0.1])],
        "window": float(doc.get("window", 1.0)),
        "ref_radius": float(doc.get("ref_radius", 1.0)),
        "gap_delta": float(doc.get("gap_delta", 2.0)),
    }
    ladder = settings["eps_ladder"]
    if not ladder or any(b >= a for a, b in zip(ladder, ladder[1:])):
        raise InputError(f"eps ladder must be strictly decreasing, got {ladder}")
    geom = functions[0].geom
    for obj in [*functions[1:], datum, omega, limit]:
        if obj is not None and obj.geom != geom:
            raise InputError("manifest inputs have mismatched geometries")
    return functions, datum, omega, limit, settings


def _pipeline(args, u: GridFunction, omega: CellSet | None):
    f = concentration_profile(u, domain=omega, window=args.window)
    dec = extract_bubbles(f, eps=args.eps, gap_delta=args.gap_delta,
                          ref_radius=args.ref_radius)
    radii = select_radii(f, dec, base_radius=args.ref_radius,
                         width=args.window, window=args.window) if dec.bubbles else []
    part = build_partition(u, dec, radii, window=args.window, omega=omega)
    return f, dec, radii, part


def _cmd_fixture(args) -> int:
    if args.name == "staircase":
        u = fixture_staircase(int(args.n), cells_per_step=args.cells_per_step)
    else:
        u = fixture_runaway(args.n, resolution=args.resolution)
    _emit_json(grid_function_to_dict(u), args.out)
    return EXIT_OK


def _cmd_energy(args) -> int:
    rep = energy(_load_function(args.input), p=args.p)
    _emit_json(rep.as_dict(), args.out)
    return EXIT_OK


def _cmd_profile(args) -> int:
    u = _load_function(args.input)
    domain = _load_cell_set(args.domain) if args.domain else None
    f = concentration_profile(u, domain=domain, window=args.window)
    if args.svg:
        Path(args.svg).write_text(profile_to_svg(f), encoding="utf-8")
    if args.format == "csv":
        _emit(profile_to_csv(f), args.out)
    else:
        _emit_json({
            "breakpoints": [float(x) for x in f.breakpoints],
            "plateau_values": [float(x) for x in f.plateau_values],
            "window": f.window,
            "total_mass": f.total_mass(),
        }, args.out)
    return EXIT_OK


def _cmd_decompose(args) -> int:
    u = _load_function(args.input)
    domain = _load_cell_set(args.domain) if args.domain else None
    f = concentration_profile(u, domain=domain, window=args.window)
    dec = extract_bubbles(f, eps=args.eps, gap_delta=args.gap_delta,
                          ref_radius=args.ref_radius, max_bubbles=args.max_bubbles)
    doc = dec.as_dict()
    violations = dec.validate()
    doc["violations"] = violations
    _emit_json(doc, args.out)
    return EXIT_VIOLATION if violations else EXIT_OK


def _cmd_partition(args) -> int:
    u = _load_function(args.input)
    omega = _load_cell_set(args.omega) if args.omega else None
    _, dec, radii, part = _pipeline(args, u, omega)
    if args.svg:
        Path(args.svg).write_text(_labels_svg(part), encoding="utf-8")
    if args.format == "csv":
        _emit(part.to_csv(), args.out)
        return EXIT_OK
    doc = part.as_dict()
    doc["radii"] = [c.as_dict() for c in radii]
    doc["bubbles"] = [b.as_dict() for b in dec.bubbles]
    _emit_json(doc, args.out)
    return EXIT_OK


def _cmd_renormalize(args) -> int:
    u = _load_function(args.input)
    datum = _load_function(args.datum) if args.datum else None
    omega = _load_cell_set(args.omega) if args.omega else None
    v = u.subtract(datum) if datum is not None else u
    _, dec, radii, part = _pipeline(args, v, omega)
    w = perturbed_translation(u, part, datum=datum) if args.perturb \
        else renormalize(u, part, datum=datum)
    _emit_json(grid_function_to_dict(w), args.out)
    return EXIT_OK


def _cmd_vanishing(args) -> int:
    u = _load_function(args.input)
    region = _load_cell_set(args.region)
    try:
        cert = vanishing_certificate(u, region, eps=args.eps, radius=args.radius,
                                     window=args.window)
    except ValueError as exc:
        _emit_json({"violations": [str(exc)]}, args.out)
        return EXIT_VIOLATION
    doc = cert.as_dict()
    doc["violations"] = [] if cert.certified else ["measured volume exceeds bound"]
    _emit_json(doc, args.out)
    return EXIT_OK if cert.certified else EXIT_VIOLATION


def _cmd_slice_lsc(args) -> int:
    functions, datum, _, limit, settings = _load_manifest(args.manifest)
    reduced = [f.subtract(datum) if datum else f for f in functions]
    lim = limit if limit is not None else reduced[-1]
    rep = lsc_report(reduced, lim)
    _emit_json(rep.as_dict(), args.out)
    return EXIT_OK if rep.lsc_holds else EXIT_VIOLATION


def _cmd_verify(args) -> int:
    functions, datum, omega, limit, settings = _load_manifest(args.manifest)
    rep = compactness_report(functions, datum=datum, omega=omega, limit=limit,
                             **settings)
    first = rep.per_eps[repr(settings["eps_ladder"][0])]
    trends = first["conclusion4_partition_trends"]
    if args.svg:
        Path(args.svg).write_text(_trend_svg({
            "outside_jump": trends["outside_jump_series"],
            "vanishing_volume": trends["vanishing_volume_series"],
            "rest_volume": trends["rest_volume_series"],
        }), encoding="utf-8")
    if args.format == "csv":
        lines = ["n_index,outside_jump,vanishing_volume,rest_volume,kyfan_to_limit"]
        kyfan = first["conclusion1_measure_convergence"]["kyfan_to_limit"]
        for i in range(len(kyfan)):
            lines.append(",".join(repr(x) for x in (
                i, trends["outside_jump_series"][i],
                trends["vanishing_volume_series"][i],
                trends["rest_volume_series"][i], kyfan[i])))
        _emit("\n".join(lines) + "\n", args.out)
    else:
        _emit_json(rep.as_dict(), args.out)
    return EXIT_OK if rep.ok else EXIT_VIOLATION


_COMMANDS = {
    "fixture": _cmd_fixture,
    "energy": _cmd_energy,
    "profile": _cmd_profile,
    "decompose": _cmd_decompose,
    "partition": _cmd_partition,
    "renormalize": _cmd_renormalize,
    "vanishing": _cmd_vanishing,
    "slice-lsc": _cmd_slice_lsc,
    "verify": _cmd_verify,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_VIOLATION


if __name__ == "__main__":
    sys.exit(main())
