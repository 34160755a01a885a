"""Command-line entry point.

Exit codes: 0 success, 1 warnings under --strict, 2 config or argument
error, 3 invariant violation, 4 runtime failure, 64 unknown subcommand.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
import warnings
from dataclasses import asdict

import numpy as np

from . import __version__
from .analysis import (decay_scan, gradient_scan, polarization_sweep, ratio_experiment,
                       subbeam_width)
from .config import (ConfigError, RunConfig, dump_config, load_config, machine_pair, preset,
                     validate_run)
from .kinematics import Orbit, cusp_cone_angle, envelope_section
from .kirchhoff import AnalyticProvider, dominance_scan, two_sphere_composite
from .model import CompactElement, InvariantError, SourceConfig, SpacetimePoint
from .solver import QuadratureSpec, field_batch

EXIT_OK, EXIT_WARN, EXIT_PARSE, EXIT_INVARIANT, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2, 3, 4, 64

SUBCOMMANDS = ("validate", "envelope", "field", "boundary-check", "two-sphere", "scan-decay",
               "scan-ratio", "scan-width", "scan-gradient", "polarization-map", "dump-config")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _number(tok: str) -> float:
    """Float or a multiple/fraction of pi such as 'pi/12' or '2*pi'."""
    tok = tok.strip().lower()
    if "pi" not in tok:
        return float(tok)
    num, _, den = tok.partition("/")
    coef = num.replace("pi", "").replace("*", "").strip()
    val = (float(coef) if coef not in ("", "+", "-") else float(coef + "1")) * math.pi
    return val / float(den) if den else val


def _floats(text: str) -> list[float]:
    try:
        return [_number(t) for t in text.split(",")]
    except ValueError:
        raise ConfigError(f"cannot parse number list {text!r}") from None


def _build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sfl", description="Rotating superluminal source laboratory")
    p.add_argument("--version", action="version", version=f"sfl {__version__}")
    sub = p.add_subparsers(dest="cmd", parser_class=_Parser)

    def common(sp, out=True):
        sp.add_argument("-c", "--config", help="config file ([source], [machine], [run])")
        sp.add_argument("--preset", help="built-in config name")
        sp.add_argument("--grid", help="n_r,n_phi,n_z")
        sp.add_argument("--refine", type=int, help="maximum refinement levels")
        sp.add_argument("--jobs", type=int, help="worker threads")
        sp.add_argument("--strict", action="store_true", help="exit 1 on numerical warnings")
        if out:
            sp.add_argument("--out", help="output directory (default $SFL_OUT_DIR or .)")

    common(sub.add_parser("validate"), out=False)
    common(sub.add_parser("dump-config"), out=False)
    sp = sub.add_parser("envelope")
    common(sp)
    sp.add_argument("--t-p", type=float, default=20.0)
    sp.add_argument("--plane", choices=("xy", "meridian"), default="xy")
    sp.add_argument("--rays", type=int, default=36)
    sp.add_argument("--orbit-radius", type=float)
    sp = sub.add_parser("field")
    common(sp)
    sp.add_argument("--at", required=True, help="R,theta,phi,t")
    for name, default in (("boundary-check", "25,50,100"), ("scan-decay", "25,50,100,200"),
                          ("scan-width", "50,100,200"), ("scan-gradient", "25,50,100"),
                          ("scan-ratio", "25,50,100,150,200")):
        sp = sub.add_parser(name)
        common(sp)
        sp.add_argument("--radii", default=default)
        sp.add_argument("--dir", default="cusp", help="cusp, off, or theta,phi")
    sub.choices["boundary-check"].add_argument("--sigma-factor", type=float, default=2.0)
    sub.choices["scan-ratio"].add_argument("--v-num", type=float, default=1.064)
    sub.choices["scan-ratio"].add_argument("--v-den", type=float, default=0.875)
    sub.choices["scan-width"].add_argument("--window", type=float, default=math.pi / 2 - 0.05)
    sub.choices["scan-width"].add_argument("--n-theta", type=int, default=41)
    sp = sub.add_parser("two-sphere")
    common(sp)
    sp.add_argument("--inner", type=float, default=20.0)
    sp.add_argument("--outer", type=float, default=40.0)
    sp.add_argument("--at", default="60,1.0,0.3", help="R,theta,phi of the observer")
    sp = sub.add_parser("polarization-map")
    common(sp)
    sp.add_argument("--theta", type=float, default=math.pi / 12)
    sp.add_argument("--radius", type=float, default=20.0)
    sp.add_argument("--n-phi", type=int, default=181)
    sp.add_argument("--t-p", type=float)
    return p


def _resolve(args) -> RunConfig:
    if args.config and args.preset:
        raise ConfigError("give either --config or --preset, not both")
    if args.config:
        rc = load_config(args.config)
    else:
        rc = preset(args.preset or "superluminal")
        validate_run(rc)
    q = rc.q
    if args.grid:
        try:
            n_r, n_phi, n_z = (int(v) for v in args.grid.split(","))
        except ValueError:
            raise ConfigError("--grid must be n_r,n_phi,n_z") from None
        q = QuadratureSpec(n_r, n_phi, n_z, q.levels, q.eps_ref, q.filament_boost, q.filament_width)
    if args.refine is not None:
        q = QuadratureSpec(q.n_r, q.n_phi, q.n_z, args.refine, q.eps_ref, q.filament_boost,
                           q.filament_width)
    rc.q = q
    if args.jobs is not None:
        rc.jobs = max(1, args.jobs)
    return rc


def _direction(rc: RunConfig, which: str) -> tuple[float, float]:
    src = rc.source
    if which in ("cusp", "off"):
        if isinstance(src, SourceConfig):
            r0, omega, phi_f = src.radial.center, src.omega, 0.0
        else:
            xy = src.positions[:, :2]
            r0 = float(np.mean(np.hypot(xy[:, 0], xy[:, 1])))
            omega = src.v_over_c / r0
            phi_f = float(np.mean(np.arctan2(xy[:, 1], xy[:, 0])))
        # the observer whose filament sits at phi_f looks from phi_f - 3 pi/2
        phi_P = (phi_f - 1.5 * math.pi) % (2 * math.pi)
        if which == "off":
            # the orbital plane lies outside the polar beam interval of a thin ring
            return math.pi / 2, phi_P
        return cusp_cone_angle(Orbit(r0, omega)), phi_P
    vals = _floats(which)
    if len(vals) != 2:
        raise ConfigError("--dir must be 'cusp', 'off' or theta,phi")
    return vals[0], vals[1]


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def _write(out_dir: str, name: str, header, rows, manifest: dict) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    base = os.path.splitext(name)[0]
    with open(os.path.join(out_dir, f"{base}.manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return path


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    return str(o)


def _manifest(rc: RunConfig, cmd: str, argv, started: float, **extra) -> dict:
    return {"tool": "sfl", "version": __version__, "subcommand": cmd, "argv": list(argv),
            "config": dump_config(rc), "quadrature": asdict(rc.q),
            "tolerances": {"err_warn": 1e-2, "fd_warn": 0.05, "fit_err_max": 0.10},
            "wall_clock_s": time.time() - started, **extra}


def _run(args, argv) -> int:
    started = time.time()
    cmd = args.cmd
    rc = _resolve(args)
    if cmd == "validate":
        return EXIT_OK
    if cmd == "dump-config":
        sys.stdout.write(dump_config(rc))
        return EXIT_OK
    out = args.out or os.environ.get("SFL_OUT_DIR") or "."
    src, q, jobs = rc.source, rc.q, rc.jobs

    if cmd == "envelope":
        r0 = args.orbit_radius or (src.radial.center if isinstance(src, SourceConfig) else 2.0)
        omega = src.omega if isinstance(src, SourceConfig) else 1.0
        pts = envelope_section(Orbit(r0, omega), args.t_p, args.plane, args.rays)
        rows = [(p["x"], p["y"], p["z"], p["t_P"], "envelope", max(p["n_before"], p["n_after"]))
                for p in pts]
        _write(out, "envelope.csv", ("x", "y", "z", "t_P", "region", "n_roots"), rows,
               _manifest(rc, cmd, argv, started, orbit_radius=r0))
        return EXIT_OK

    if cmd == "field":
        R, th, ph, t = _floats(args.at)
        P = SpacetimePoint.spherical(R, th, ph, t)
        fb = field_batch(src, [[P.x, P.y, P.z, P.t]], q, jobs=jobs)
        row = (R, th, ph, t, fb.A0[0], *fb.A[0], *fb.E[0], *fb.B[0], fb.err_est[0])
        _write(out, "field.csv", ("R_P", "theta_P", "phi_P", "t_P", "A0", "Ax", "Ay", "Az", "Ex",
                                  "Ey", "Ez", "Bx", "By", "Bz", "err_est"), [row],
               _manifest(rc, cmd, argv, started, err_est=[fb.err_est[0]]))
        return EXIT_OK

    if cmd == "boundary-check":
        th, ph = _direction(rc, args.dir)
        res = dominance_scan(src, _floats(args.radii), th, ph, q, args.sigma_factor, jobs=jobs)
        rows = [(R, Rs, *d.source_term, *d.boundary_term, *d.direct_field, d.residual, d.ratio)
                for R, Rs, d in res]
        hdr = ("R_P", "R_sigma", "source_x", "source_y", "source_z", "boundary_x", "boundary_y",
               "boundary_z", "direct_x", "direct_y", "direct_z", "residual", "ratio")
        _write(out, "boundary.csv", hdr, rows,
               _manifest(rc, cmd, argv, started, direction=(th, ph),
                         err_est=[d.err_est for _, _, d in res]))
        return EXIT_OK

    if cmd == "two-sphere":
        R, th, ph = _floats(args.at)
        x = SpacetimePoint.spherical(R, th, ph)
        xp = np.array([x.x, x.y, x.z])
        t_P = R + args.outer + src.r_max + args.outer + 2
        comp, inner, outer = two_sphere_composite(AnalyticProvider(src, q, jobs), args.inner,
                                                  args.outer, xp, t_P)
        rows = [(args.inner, args.outer, R, t_P, *comp, *inner, *outer,
                 np.linalg.norm(comp) / max(np.linalg.norm(inner), np.linalg.norm(outer)))]
        hdr = ("R_inner", "R_outer", "R_P", "t_P", "composite_x", "composite_y", "composite_z",
               "inner_x", "inner_y", "inner_z", "outer_x", "outer_y", "outer_z", "relative_composite")
        _write(out, "two_sphere.csv", hdr, rows, _manifest(rc, cmd, argv, started))
        return EXIT_OK

    if cmd == "scan-decay":
        d = _direction(rc, args.dir)
        r = decay_scan(src, d, _floats(args.radii), q, rc.n_samples, jobs)
        _write(out, "decay.csv", r.columns, r.rows,
               _manifest(rc, cmd, argv, started, direction=d, fit=asdict(r.fit) if r.fit else None,
                         fit_window=r.fit_window, flags=r.flags, extra=r.extra,
                         err_est=[row[2] for row in r.rows]))
        return EXIT_WARN if args.strict and r.flags else EXIT_OK

    if cmd == "scan-ratio":
        num, den, L = machine_pair(args.v_num, args.v_den)
        xy = num.positions[:, :2]
        phi_P = (float(np.mean(np.arctan2(xy[:, 1], xy[:, 0]))) + 0.5 * math.pi) % (2 * math.pi)
        th = math.asin(min(1.0, 1.0 / args.v_num))
        path = [(R, th, phi_P) for R in _floats(args.radii)]
        r = ratio_experiment(num, den, path, q, rc.n_samples, jobs)
        _write(out, "ratio.csv", r.columns, r.rows,
               _manifest(rc, cmd, argv, started, length_unit_m=L, fit=asdict(r.fit),
                         flags=r.flags, err_est=[row[2] for row in r.rows]))
        return EXIT_WARN if args.strict and r.flags else EXIT_OK

    if cmd == "scan-width":
        _, ph = _direction(rc, args.dir)
        rows = []
        for R in _floats(args.radii):
            w, _, _ = subbeam_width(src, R, ph, q, math.pi / 2, args.window, args.n_theta,
                                    rc.n_samples, jobs)
            rows.append((R, w, R * w))
        _write(out, "width.csv", ("R_P", "delta_theta", "R_delta_theta"), rows,
               _manifest(rc, cmd, argv, started))
        return EXIT_OK

    if cmd == "scan-gradient":
        th, ph = _direction(rc, args.dir)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            r = gradient_scan(src, _floats(args.radii), q, ph, th, jobs=jobs)
        _write(out, "gradient.csv", r.columns, r.rows,
               _manifest(rc, cmd, argv, started, fit=asdict(r.fit), extra=r.extra, flags=r.flags))
        return EXIT_WARN if args.strict and (r.flags or caught) else EXIT_OK

    if cmd == "polarization-map":
        el = CompactElement()
        phis = np.linspace(0, 2 * math.pi, args.n_phi)
        phis, ang, bmag, flags = polarization_sweep(el, args.theta, phis, args.t_p, args.radius)
        rows = [(p, a, b, int(f)) for p, a, b, f in zip(phis, ang, bmag, flags)]
        _write(out, "polarization.csv", ("phi_P", "position_angle", "B_mag", "below_noise"), rows,
               _manifest(rc, cmd, argv, started, element=asdict(el)))
        return EXIT_OK
    raise ConfigError(f"unhandled subcommand {cmd}")


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    first = next((a for a in argv if not a.startswith("-")), None)
    if first is None or first not in SUBCOMMANDS:
        if "--version" in argv or "-h" in argv or "--help" in argv:
            try:
                parser.parse_args(argv)
            except SystemExit as exc:
                return int(exc.code or 0)
        sys.stderr.write(parser.format_usage())
        sys.stderr.write(f"sfl: unknown subcommand {first!r}; choose from {', '.join(SUBCOMMANDS)}\n")
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except ConfigError as exc:
        sys.stderr.write(f"sfl: {exc}\n")
        return EXIT_PARSE
    except SystemExit as exc:
        return int(exc.code or 0)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            code = _run(args, argv)
        except ConfigError as exc:
            sys.stderr.write(f"sfl: config error: {exc}\n")
            return EXIT_PARSE
        except InvariantError as exc:
            sys.stderr.write(f"sfl: invariant violated: {exc}\n")
            return EXIT_INVARIANT
        except Exception as exc:  # noqa: BLE001
            sys.stderr.write(f"sfl: runtime failure: {type(exc).__name__}: {exc}\n")
            return EXIT_RUNTIME
    numeric = [w for w in caught if issubclass(w.category, RuntimeWarning)]
    for w in numeric:
        sys.stderr.write(f"sfl: warning: {w.message}\n")
    if getattr(args, "strict", False) and numeric and code == EXIT_OK:
        return EXIT_WARN
    return code


if __name__ == "__main__":
    sys.exit(main())
