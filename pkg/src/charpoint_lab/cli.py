"""Command-line front end: ``charpoint-lab analyze|integrate|curve``."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .charlocus import (
    DEFAULT_TOL,
    MILDLY_DEGENERATE,
    NON_ISOLATED,
    NONDEGENERATE,
    UNRESOLVED,
    classify,
    find_characteristic_points,
    is_degenerate,
    rotate_to_normal_form,
    trace_critical_curve,
)
from .errors import CharpointError, ConfigError, NoDegeneratePoint, NotCharacteristic
from .expr import parse_surface
from .geometry import FrameModel
from .quadrature import IntegrandSpec, integrability_scan
from .report import build_report, curve_csv, curve_rows, dumps, scans_csv

EXIT_OK, EXIT_ERROR, EXIT_UNRESOLVED = 0, 1, 2


def _floats(text: str, n: int, what: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"{what}: expected {n} comma-separated numbers") from None
    if len(vals) != n:
        raise argparse.ArgumentTypeError(f"{what}: expected {n} comma-separated numbers")
    return vals


def _window(text):
    return _floats(text, 4, "window")


def _point(text):
    return _floats(text, 2, "center")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group(required=True)
    src.add_argument("--surface", help="graph z = g(x, y), e.g. 'x*y/2 + x^2*y'")
    src.add_argument("--surface-file", help="file holding the expression for g")
    common.add_argument("--window", type=_window, default=(-1.0, 1.0, -1.0, 1.0), metavar="x0,x1,y0,y1")
    common.add_argument("--grid", type=int, default=64, help="seed grid resolution (>= 16)")
    common.add_argument("--frame", choices=("heisenberg", "contact"), default="heisenberg")
    common.add_argument("--beta", help="beta(x, y, z) of the contact normal form")
    common.add_argument("--gamma", help="gamma(x, y, z) of the contact normal form")
    common.add_argument("--tol-char", type=float, default=DEFAULT_TOL.tol_char, help="characteristic residual tolerance")
    common.add_argument("--json", help="write the JSON report here")
    common.add_argument("--csv", help="write CSV output here")

    p = argparse.ArgumentParser(prog="charpoint-lab", description="Characteristic points and integrability checks for graphs z = g(x, y) in the Heisenberg group.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("analyze", parents=[common], help="locate and classify characteristic points")

    q = sub.add_parser("integrate", parents=[common], help="integrability scans around characteristic points")
    q.add_argument("--eps-max", type=float, default=0.25)
    q.add_argument("--eps-min", type=float, default=1e-6)
    q.add_argument("--ratio", type=float, default=0.5, help="geometric ratio of the eps ladder")
    q.add_argument("--outer-radius", type=float, help="outer radius of the base region (default: window inradius)")
    q.add_argument("--quantity", choices=("inv_w", "abs_mean", "signed_mean"), default="inv_w")
    q.add_argument("--measure", choices=("riemannian", "sub_riemannian"), default="riemannian")
    q.add_argument("--strategy", choices=("cartesian", "rectified", "polar", "all"), default="cartesian")
    q.add_argument("--geometry", choices=("disk", "xstrip"), default="disk")
    q.add_argument("--height", type=float, help="half height of the strip for --geometry xstrip")
    q.add_argument("--center", type=_point, metavar="x,y", help="skip the search and scan around this point")
    q.add_argument("--tol", type=float, default=1e-7, help="relative quadrature tolerance per annulus")
    q.add_argument("--tol-verdict", type=float, default=1e-4)

    sub.add_parser("curve", parents=[common], help="critical-curve samples through a degenerate point")
    return p


def _load(args):
    if args.surface_file:
        with open(args.surface_file, encoding="utf-8") as fh:
            text = fh.read().strip()
    else:
        text = args.surface
    surf = parse_surface(text, args.window)
    if args.frame == "contact":
        if args.beta is None or args.gamma is None:
            raise ConfigError("--frame contact needs --beta and --gamma")
        frame = FrameModel.contact(args.beta, args.gamma)
    else:
        frame = FrameModel()
    if args.grid < 16:
        raise ConfigError("--grid must be at least 16")
    tol = replace(DEFAULT_TOL, tol_char=args.tol_char)
    return text, surf, frame, tol


def _config(args, text: str) -> dict:
    cfg = {"command": args.command, "surface": text, "window": list(args.window), "grid": args.grid,
           "frame": args.frame, "beta": args.beta, "gamma": args.gamma, "tol_char": args.tol_char}
    if args.command == "integrate":
        cfg.update(eps_max=args.eps_max, eps_min=args.eps_min, ratio=args.ratio, outer_radius=args.outer_radius,
                   quantity=args.quantity, measure=args.measure, strategy=args.strategy, geometry=args.geometry,
                   height=args.height, center=None if args.center is None else list(args.center),
                   tol=args.tol, tol_verdict=args.tol_verdict)
    return cfg


def _records(surf, frame, tol, grid):
    search = find_characteristic_points(frame, surf, surf.window, grid, tol)
    records = []
    for rep in search.representatives():
        rec = classify(frame, surf, (rep.x, rep.y), tol)
        if not rep.isolated:
            rec.isolated = False
            rec.notes.append("other points meet the characteristic tolerance within the isolation radius")
        records.append(rec)
    return records


def _print_records(records, out):
    if not records:
        print("no characteristic points in the window", file=out)
        return
    print(f"{'x':>12} {'y':>12} {'det':>12}  {'class':<22} {'k':>3} {'alpha':>10}  isolated", file=out)
    for r in records:
        k = "" if r.order_k is None else str(r.order_k)
        a = "" if r.alpha is None else f"{r.alpha:.4g}"
        print(f"{r.x:12.6g} {r.y:12.6g} {r.det:12.4g}  {r.classification:<22} {k:>3} {a:>10}  {r.isolated}", file=out)


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def cmd_analyze(args, out=sys.stdout) -> int:
    text, surf, frame, tol = _load(args)
    records = _records(surf, frame, tol, args.grid)
    _print_records(records, out)
    report = build_report(_config(args, text), records)
    if args.json:
        _write(args.json, dumps(report))
    bad = any(r.classification in (UNRESOLVED, NON_ISOLATED) for r in records)
    return EXIT_UNRESOLVED if bad else EXIT_OK


def _inradius(window, c) -> float:
    x0, x1, y0, y1 = window
    return min(c[0] - x0, x1 - c[0], c[1] - y0, y1 - c[1])


def cmd_integrate(args, out=sys.stdout) -> int:
    text, surf, frame, tol = _load(args)
    if not 0 < args.eps_min < args.eps_max:
        raise ConfigError("need 0 < --eps-min < --eps-max")
    if args.center is not None:
        centers = [(tuple(args.center), None)]
        try:
            centers = [(tuple(args.center), classify(frame, surf, args.center, tol))]
        except NotCharacteristic:
            pass
        records = [r for _, r in centers if r is not None]
    else:
        records = _records(surf, frame, tol, args.grid)
        centers = [((r.x, r.y), r) for r in records]
        if not centers:
            raise ConfigError("no characteristic point found; pass --center")
    strategies = ["cartesian", "rectified", "weighted_polar"] if args.strategy == "all" else [
        "weighted_polar" if args.strategy == "polar" else args.strategy]
    spec = IntegrandSpec(args.quantity, args.measure)
    scans = []
    for c, rec in centers:
        room = _inradius(surf.window, c)
        outer = room if args.outer_radius is None else args.outer_radius
        if args.geometry == "disk" and not (args.eps_max <= outer <= room):
            raise ConfigError(f"need eps_max <= outer radius <= window inradius {room:.6g} around {c}")
        if args.geometry == "xstrip":
            height = args.height if args.height is not None else args.eps_max
            if max(args.eps_max, height) > room:
                raise ConfigError(f"strip leaves the window around {c}")
        for strategy in strategies:
            if strategy != "cartesian":
                if rec is None or not is_degenerate(rec, tol):
                    print(f"skipping {strategy} at {c}: needs a degenerate characteristic point", file=sys.stderr)
                    continue
                if strategy == "weighted_polar" and rec.classification != MILDLY_DEGENERATE:
                    print(f"skipping weighted_polar at {c}: point is {rec.classification}", file=sys.stderr)
                    continue
            outer_r = outer if args.geometry == "disk" else max(args.eps_max, args.outer_radius or 0.0)
            rep = integrability_scan(frame, surf, spec, c, args.eps_min, args.eps_max, outer_r, strategy,
                                     args.geometry, args.ratio, args.tol, args.tol_verdict,
                                     height=args.height if args.geometry == "xstrip" else None, record=rec)
            scans.append(rep)
            lim = "" if rep.limit is None else f" limit={rep.limit:.10g} tail<={rep.tail_bound:.3g}"
            grow = "" if rep.growth_exponent is None else f" growth={rep.growth_exponent:.3g}"
            print(f"({c[0]:.6g}, {c[1]:.6g}) {strategy:<15} {args.quantity}/{args.measure}: "
                  f"{rep.verdict}{lim}{grow}", file=out)
    report = build_report(_config(args, text), records, scans)
    if args.json:
        _write(args.json, dumps(report))
    if args.csv:
        _write(args.csv, scans_csv(scans))
    return EXIT_UNRESOLVED if any(s.verdict == "inconclusive" for s in scans) else EXIT_OK


def cmd_curve(args, out=sys.stdout) -> int:
    text, surf, frame, tol = _load(args)
    for rec in _records(surf, frame, tol, args.grid):
        if rec.classification == NONDEGENERATE or rec.N is None or not frame.is_standard_heisenberg:
            continue
        nf, _ = rotate_to_normal_form(surf, rec, tol)
        curve = trace_critical_curve(frame, nf, rec, tol=tol)
        data = curve_csv(curve_rows(curve, surf, nf))
        if args.csv:
            _write(args.csv, data)
        else:
            out.write(data)
        return EXIT_OK
    raise NoDegeneratePoint("no degenerate characteristic point in the window")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = {"analyze": cmd_analyze, "integrate": cmd_integrate, "curve": cmd_curve}[args.command]
    try:
        return handler(args, sys.stdout)
    except (CharpointError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
