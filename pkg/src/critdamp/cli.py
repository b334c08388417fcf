"""Command-line interface: ``critdamp <subcommand> [options]``.

Exit status: 0 on success, 2 on configuration errors, 3 when no curve could
be traced from any seed.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import reference
from .charfun import assemble
from .continuation import TraceConfig, trace_all
from .model import PRESETS, DesignPlane, ModelError, builtin_model
from .modelfile import load_model
from .roots import classify_spectrum, find_initial_points, find_singular_points

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

# parameter ranges used when a plane override names a parameter the preset's
# default plane does not cover
PRESET_RANGES = {
    "sdof1k": {"nu": (0.0, 0.25), "zeta": (0.0, 4.0)},
    "sdof2k": {"nu1": (0.0, 2.5), "nu2": (0.0, 2.5), "zeta": (0.0, 10.0)},
    "chain4dof": {"zeta": (0.0, 3.0), "nu": (0.0, 0.25)},
}


class ConfigError(Exception):
    pass


def fmt(v) -> str:
    return format(float(v), ".17g")


def _assignments(text, flag):
    """'a=1,b=2' -> {'a': 1.0, 'b': 2.0}."""
    out = {}
    for part in filter(None, (s.strip() for s in text.split(","))):
        name, sep, val = part.partition("=")
        if not sep or not name:
            raise ConfigError(f"{flag}: expected name=value, got {part!r}")
        try:
            out[name.strip()] = float(val)
        except ValueError:
            raise ConfigError(f"{flag}: {val!r} is not a number") from None
    return out


def _pair(text, flag):
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError:
        raise ConfigError(f"{flag}: expected min,max, got {text!r}") from None
    return lo, hi


def load_job(args):
    """Model and plane from --preset/--model plus plane overrides."""
    try:
        if args.preset:
            model, plane = builtin_model(args.preset)
            ranges = dict(PRESET_RANGES.get(args.preset, {}))
        else:
            model, plane = load_model(args.model)
            ranges = {}
    except KeyError as exc:
        raise ConfigError(str(exc.args[0])) from None
    except OSError as exc:
        raise ConfigError(f"cannot read model file: {exc}") from None
    ranges.setdefault(plane.p_name, plane.p_range)
    ranges.setdefault(plane.q_name, plane.q_range)
    values = dict(plane.fixed)
    for fx in args.fix or []:
        values.update(_assignments(fx, "--fix"))
    p_name, q_name = plane.p_name, plane.q_name
    if args.plane:
        names = {}
        for part in args.plane.split(","):
            key, sep, val = part.partition("=")
            if not sep or key.strip() not in ("p", "q"):
                raise ConfigError(f"--plane: expected p=<name>,q=<name>, got {args.plane!r}")
            names[key.strip()] = val.strip()
        p_name, q_name = names.get("p", p_name), names.get("q", q_name)
    p_range = _pair(args.p_range, "--p-range") if args.p_range else ranges.get(p_name)
    q_range = _pair(args.q_range, "--q-range") if args.q_range else ranges.get(q_name)
    problems = []
    if p_range is None:
        problems.append(f"no default range for {p_name!r}; pass --p-range")
    if q_range is None:
        problems.append(f"no default range for {q_name!r}; pass --q-range")
    if problems:
        raise ModelError(problems)
    fixed = {k: v for k, v in values.items() if k not in (p_name, q_name)}
    new_plane = DesignPlane(p_name, q_name, fixed, p_range, q_range)
    new_plane.check(model)
    return model, new_plane


def _coord(plane, text, flag):
    a = _assignments(text, flag)
    for k in a:
        if k not in (plane.p_name, plane.q_name, "p", "q"):
            raise ConfigError(f"{flag}: {k!r} is not a design coordinate ({plane.p_name}, {plane.q_name})")
    return a


def _at(plane, text):
    a = _coord(plane, text, "--at")
    p = a.get(plane.p_name, a.get("p"))
    q = a.get(plane.q_name, a.get("q"))
    if p is None or q is None:
        raise ConfigError(f"--at needs both {plane.p_name} and {plane.q_name}")
    return p, q


def _emit(args, name, payload):
    text = json.dumps(payload, indent=2)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text + "\n")
    print(text)


def _point_json(plane, c):
    return {plane.p_name: c.p, plane.q_name: c.q, "lam": c.lam, "res_D": c.res_D, "res_Dx": c.res_Dx}


# subcommands ----------------------------------------------------------------

def cmd_init_points(args, model, plane):
    cf = assemble(model, plane)
    pts = find_initial_points(cf, _coord(plane, args.prescribe, "--prescribe"), grid=args.grid)
    _emit(args, "init_points.json", [_point_json(plane, c) for c in pts])
    return EXIT_OK


def cmd_singular(args, model, plane):
    cf = assemble(model, plane)
    pts = find_singular_points(cf, args.kind, p_grid=args.p_grid, q_grid=args.q_grid)
    _emit(args, f"singular_{args.kind}.json", [
        {"kind": s.kind, "x": s.x, plane.p_name: s.p, plane.q_name: s.q, "residuals": list(s.residuals)}
        for s in pts
    ])
    return EXIT_OK


def cmd_classify(args, model, plane):
    cf = assemble(model, plane)
    p, q = _at(plane, args.at)
    sc = classify_spectrum(cf, p, q, args.tol_im)
    _emit(args, "classify.json", {
        "complex_pairs": sc.complex_pairs, "real_roots": sc.real_roots, "label": sc.label,
        "near_critical": sc.near_critical,
        "roots": [[float(r.real), float(r.imag)] for r in sorted(sc.roots, key=lambda r: (r.real, r.imag))],
    })
    return EXIT_OK


def cmd_coeffs(args, model, plane):
    cf = assemble(model, plane)
    p, q = _at(plane, args.at)
    c = cf.coeffs(p, q)
    _emit(args, "coeffs.json", {"degree": cf.degree, "effective_degree": cf.degree_check(p, q),
                                "coeffs": [float(v) for v in c]})
    return EXIT_OK


def cmd_reference(args):
    nus = np.linspace(args.nu_min, args.nu_max, args.count)
    lines = ["nu,zeta_L,zeta_U,zeta_L_approx,zeta_U_approx,x_L_approx,x_U_approx"]
    for nu in nus:
        row = [nu]
        for br in ("L", "U"):
            try:
                row.append(reference.zeta_exact(nu, br))
            except reference.DomainError:
                row.append(float("nan"))
        row.append(reference.zeta_approx(nu, "L"))
        row.append(reference.zeta_approx(nu, "U") if nu > 0 else float("inf"))
        row.append(reference.x_approx(nu, "L"))
        row.append(reference.x_approx(nu, "U") if nu > 0 else float("-inf"))
        lines.append(",".join(fmt(v) for v in row))
    text = "\n".join(lines) + "\n"
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "reference.csv").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_trace(args, model, plane):
    if not args.seed:
        raise ConfigError("trace needs at least one --seed name=value")
    seeds = [_coord(plane, s, "--seed") for s in args.seed]
    for s in seeds:
        if len(s) != 1:
            raise ConfigError("each --seed prescribes exactly one coordinate")
    cfg = TraceConfig(h0=args.h0, h_min=args.h_min, h_max=args.h_max, tol_res=args.tol_res,
                      sing_tol=args.sing_tol, max_steps=args.max_steps)
    try:
        cfg.resolved(plane)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    cf = assemble(model, plane)
    curves = trace_all(cf, seeds, cfg, grid=args.grid)
    out = Path(args.out or "critdamp_out")
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"p": plane.p_name, "q": plane.q_name, "fixed": dict(plane.fixed),
                "seeds": seeds, "curves": []}
    for k, c in enumerate(curves):
        name = f"curve_{k:03d}.csv"
        rows = ["p,q,lam,res_D,res_Dx"]
        rows += [",".join(fmt(v) for v in (pt.p, pt.q, pt.lam, pt.res_D, pt.res_Dx)) for pt in c.points]
        (out / name).write_text("\n".join(rows) + "\n")
        start = c.points[0]
        manifest["curves"].append({"file": name, "start": [start.p, start.q, start.lam], **c.metadata()})
        low = c.start_termination.value if c.start_termination else "start"
        print(f"{name}: {len(c)} points, {plane.p_name} in [{fmt(c.p_span[0])}, {fmt(c.p_span[1])}], "
              f"ends {low} / {c.termination.value}")
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    if not any(len(c) > 1 for c in curves):
        print("no curve could be traced from the given seeds", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


# argument parsing ------------------------------------------------------------

def build_parser():
    ap = argparse.ArgumentParser(prog="critdamp", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp):
        src = sp.add_mutually_exclusive_group(required=True)
        src.add_argument("--preset", choices=PRESETS)
        src.add_argument("--model", help="JSON model file")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--plane", help="design pair override, e.g. p=nu1,q=nu2")
        sp.add_argument("--fix", action="append", help="fixed parameter value name=value (repeatable)")
        sp.add_argument("--p-range", help="min,max of p")
        sp.add_argument("--q-range", help="min,max of q")

    sp = sub.add_parser("trace", help="trace critical curves from seeds")
    common(sp)
    sp.add_argument("--seed", action="append", help="prescribed coordinate name=value (repeatable)")
    sp.add_argument("--grid", type=int, default=400)
    sp.add_argument("--h0", type=float)
    sp.add_argument("--h-min", type=float)
    sp.add_argument("--h-max", type=float)
    sp.add_argument("--tol-res", type=float, default=1e-10)
    sp.add_argument("--sing-tol", type=float, default=1e-8)
    sp.add_argument("--max-steps", type=int, default=100_000)

    sp = sub.add_parser("init-points", help="critical points with one coordinate prescribed")
    common(sp)
    sp.add_argument("--prescribe", required=True, help="name=value")
    sp.add_argument("--grid", type=int, default=400)

    sp = sub.add_parser("singular", help="triple roots (S2) or folds (S1)")
    common(sp)
    sp.add_argument("--kind", choices=("S1", "S2"), default="S2")
    sp.add_argument("--p-grid", type=int, default=200)
    sp.add_argument("--q-grid", type=int, default=200)

    sp = sub.add_parser("classify", help="count complex pairs and real roots at a point")
    common(sp)
    sp.add_argument("--at", required=True, help="p_name=value,q_name=value")
    sp.add_argument("--tol-im", type=float, default=1e-7)

    sp = sub.add_parser("coeffs", help="characteristic polynomial coefficients at a point")
    common(sp)
    sp.add_argument("--at", required=True, help="p_name=value,q_name=value")

    sp = sub.add_parser("reference", help="closed-form one-dof critical curves as CSV")
    sp.add_argument("--nu-min", type=float, default=0.0)
    sp.add_argument("--nu-max", type=float, default=0.19)
    sp.add_argument("--count", type=int, default=20)
    sp.add_argument("--out", help="output directory")
    return ap


COMMANDS = {
    "trace": cmd_trace, "init-points": cmd_init_points, "singular": cmd_singular,
    "classify": cmd_classify, "coeffs": cmd_coeffs,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "reference":
            if args.count < 1 or args.nu_min < 0 or args.nu_max < args.nu_min:
                raise ConfigError("reference: need count >= 1 and 0 <= nu-min <= nu-max")
            return cmd_reference(args)
        model, plane = load_job(args)
        return COMMANDS[args.command](args, model, plane)
    except ModelError as exc:
        for p in exc.problems:
            print(f"error: {p}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
