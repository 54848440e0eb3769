"""``hopfkit`` command line.

Exit codes: 0 success, 1 an audit or golden check failed, 2 bad input or
configuration. The worker count comes from ``--workers`` or the
``HOPFKIT_WORKERS`` environment variable (default 1).
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .characteristics import CurveType, classify, persistence_check, through_point
from .config import DEFAULT_SEED, RunConfig, build_problem, load_config, options_from
from .conjugate import biconjugate, constant_duality_check, view_for
from .errors import ConfigurationError, HopfError, PreconditionError
from .hopf import evaluate, field, worker_count
from .output import Records, Table, render
from .regularity import (all_type_one_check, crossing_check, estimate_theta, injectivity_check,
                         plane_singleton_check, strip_bound, viscosity_audit)
from .repro import CASES, run_case
from .singularity import trace

EXIT_OK, EXIT_AUDIT, EXIT_CONFIG = 0, 1, 2

_TOL_FLAGS = {
    "grid_nodes": ("--grid-nodes", int, "search grid nodes per axis"),
    "value_rel_tol": ("--value-tol", float, "relative band defining the maximizer set"),
    "band_rel": ("--band", float, "relative near-max band for refinement starts"),
    "cluster_tol": ("--cluster-tol", float, "distance merging refined maximizers"),
    "singleton_tol": ("--singleton-tol", float, "diameter above which a point is singular"),
}


def _common(p: argparse.ArgumentParser, fmt_default="kv"):
    g = p.add_argument_group("common")
    g.add_argument("--problem", help="catalog name (see `hopfkit list`)")
    g.add_argument("--config", help="YAML config file; explicit flags override it")
    g.add_argument("--dim", type=int, default=None, help="dimension for catalog problems")
    g.add_argument("--format", choices=("csv", "kv", "text"), default=fmt_default)
    g.add_argument("--out", help="write output here instead of stdout")
    g.add_argument("--seed", type=int, default=None,
                   help=f"seed for sampled audits (default {DEFAULT_SEED})")
    g.add_argument("--workers", type=int, default=None)
    g.add_argument("--conjugate", choices=("analytic", "numeric"), default=None,
                   help="force the conjugate representation")
    for dest, (flag, typ, text) in _TOL_FLAGS.items():
        g.add_argument(flag, dest=dest, type=typ, default=None, help=text)


def _pos(p, name, **kw):
    p.add_argument(name, type=float, nargs="+", **kw)


def _point_flags(p):
    p.add_argument("--t", "--t0", dest="t", type=float, required=True)
    p.add_argument("--x", "--x0", dest="x", type=float, nargs="+", required=True)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hopfkit", description="Max-formula solutions of "
                                 "u_t + H(Du) = 0 with convex initial data.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", metavar="COMMAND")

    sub.add_parser("list", help="list catalog problems")

    p = sub.add_parser("eval", help="u(t,x) and the maximizer set")
    _common(p)
    p.add_argument("--t", type=float, required=True)
    _pos(p, "--x", required=True)

    p = sub.add_parser("field", help="tabulate u over times x a window")
    _common(p, "csv")
    _pos(p, "--t", required=True, help="one or more times")
    _pos(p, "--window", required=True, help="LO HI per axis")
    p.add_argument("--nodes", type=int, default=21)

    p = sub.add_parser("conjugate", help="sigma* at points; --check audits the transform")
    _common(p, "csv")
    _pos(p, "--q", help="points (1-D: several values)")
    p.add_argument("--check", action="store_true", help="involution and duality audit")
    p.add_argument("--nodes", type=int, default=4001)

    for name, text in (("char", "characteristics through (t, x)"),
                       ("classify", "type I/II of each characteristic through (t, x)")):
        p = sub.add_parser(name, help=text)
        _common(p, "csv")
        _point_flags(p)

    p = sub.add_parser("persist", help="persistence audit below t along type I curves")
    _common(p)
    _point_flags(p)
    p.add_argument("--steps", type=int, default=16)

    p = sub.add_parser("strip", help="estimate the differentiability strip")
    _common(p, "text")
    _pos(p, "--window", required=True)
    p.add_argument("--nodes", type=int, default=201)
    p.add_argument("--levels", type=int, default=12)
    p.add_argument("--conditions", action="store_true", help="also run the sufficient conditions")

    p = sub.add_parser("check", help="sufficient strip conditions at t*")
    _common(p)
    p.add_argument("--t-star", type=float, default=None, help="default: the guaranteed bound")
    _pos(p, "--window", required=True)
    p.add_argument("--nodes", type=int, default=201)
    p.add_argument("--samples", type=int, default=11, help="crossing samples per axis")

    p = sub.add_parser("verify", help="numerical viscosity audit")
    _common(p)
    p.add_argument("--samples", type=int, default=50)
    p.add_argument("--h", type=float, default=1e-4)
    _pos(p, "--window", default=[-2.0, 2.0])
    p.add_argument("--C", type=float, default=10.0, help="residual slope constant")
    p.add_argument("--singular", type=float, nargs="+", action="append", default=[],
                   metavar="T_X", help="extra singular point `t x1..xn` (repeatable)")

    p = sub.add_parser("trace", help="forward singular path")
    _common(p, "csv")
    p.add_argument("--t0", type=float, required=True)
    _pos(p, "--x0", required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--t-end", type=float, required=True)
    p.add_argument("--scan-nodes", type=int, default=21)

    p = sub.add_parser("repro", help="golden values of the worked examples")
    p.add_argument("--case", choices=CASES, required=True)
    p.add_argument("--format", choices=("csv", "kv", "text"), default="kv")
    p.add_argument("--out")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--config", help=argparse.SUPPRESS)
    return ap


class _Context:
    def __init__(self, args, cfg: RunConfig):
        self.args = args
        self.cfg = cfg
        self.seed = args.seed if args.seed is not None else cfg.seed
        self.workers = args.workers if args.workers is not None else cfg.workers
        worker_count(self.workers)  # validate the env override early
        overrides = dict(cfg.options)
        for dest in _TOL_FLAGS:
            v = getattr(args, dest, None)
            if v is not None:
                overrides[dest] = v
        self.opts = options_from(overrides)
        entry = getattr(args, "problem", None) or cfg.problem
        dim = getattr(args, "dim", None) or 1
        self.spec = build_problem(entry, dim)
        self.view = view_for(self.spec, getattr(args, "conjugate", None))

    def point(self, values, what="x"):
        if len(values) != self.spec.dim:
            raise ConfigurationError(f"--{what} needs {self.spec.dim} value(s)")
        return np.asarray(values, dtype=float)

    def window(self, values):
        if len(values) != 2 * self.spec.dim:
            raise ConfigurationError(f"--window needs LO HI for each of {self.spec.dim} axes")
        return np.asarray(values, dtype=float).reshape(-1, 2)


def _xcols(n, letter="x"):
    return [f"{letter}{i + 1}" for i in range(n)]


def cmd_list(ctx_args):
    from .problem import CATALOG, catalog_lookup
    rows = [(name, catalog_lookup(name).description) for name in sorted(CATALOG)]
    return Table(["name", "description"], rows), True


def cmd_eval(ctx):
    a = ctx.args
    ell = evaluate(ctx.spec, ctx.view, a.t, ctx.point(a.x), ctx.opts)
    rec = Records([("problem", ctx.spec.name), ("t", ell.t), ("x", ell.x), ("u", ell.value),
                   ("diameter", ell.diameter), ("singleton", ell.singleton),
                   ("count", len(ell.representatives))])
    for k, q in enumerate(ell.representatives):
        rec.add(f"q{k + 1}", q if ctx.spec.dim > 1 else q[0])
    return rec, True


def cmd_field(ctx):
    a = ctx.args
    tab = field(ctx.spec, ctx.view, a.t, ctx.window(a.window), a.nodes, ctx.opts, ctx.workers)
    return tab, True


def cmd_conjugate(ctx):
    a = ctx.args
    n = ctx.spec.dim
    if a.check:
        rng = np.random.default_rng(ctx.seed)
        L = ctx.spec.lipschitz_bound
        xs = rng.uniform(-L, L, size=(64, n))
        err = float(np.max(np.abs(biconjugate(ctx.view, xs, a.nodes) - ctx.spec.sigma(xs))))
        dual = None
        if ctx.spec.semiconcavity is not None:
            dual = constant_duality_check(ctx.spec, ctx.view, seed=ctx.seed).passed
        ok = err <= 1e-4 and dual is not False
        return Records([("problem", ctx.spec.name), ("mode", ctx.view.mode),
                        ("involution_max_error", err), ("involution_pass", err <= 1e-4),
                        ("duality_pass", "not applicable" if dual is None else dual),
                        ("pass", ok)]), ok
    if not a.q:
        raise ConfigurationError("conjugate needs --q points or --check")
    q = np.asarray(a.q, dtype=float).reshape(-1, n)
    vals = ctx.view.value(q)
    return Table([*_xcols(n, "q"), "value"], [[*row, v] for row, v in zip(q, vals)]), True


def _curves(ctx):
    a = ctx.args
    x = ctx.point(a.x)
    return x, through_point(ctx.spec, a.t, x)


def cmd_char(ctx):
    n = ctx.spec.dim
    _, curves = _curves(ctx)
    rows = [[*c.anchor_y, *c.momentum, *c.velocity] for c in curves]
    return Table([*_xcols(n, "y"), *_xcols(n, "p"), *_xcols(n, "v")], rows), True


def cmd_classify(ctx):
    n = ctx.spec.dim
    x, curves = _curves(ctx)
    ell = evaluate(ctx.spec, ctx.view, ctx.args.t, x, ctx.opts)
    rows = []
    for c in curves:
        tag = classify(ctx.spec, ctx.view, c, ctx.args.t, x, ctx.opts, ell=ell)
        rows.append([*c.anchor_y, *c.momentum, tag.tag.value, tag.distance])
    return Table([*_xcols(n, "y"), *_xcols(n, "p"), "type", "distance"], rows), True


def cmd_persist(ctx):
    a = ctx.args
    x, curves = _curves(ctx)
    ell = evaluate(ctx.spec, ctx.view, a.t, x, ctx.opts)
    rec = Records([("problem", ctx.spec.name), ("t", a.t), ("x", x)])
    ok, count = True, 0
    for c in curves:
        if classify(ctx.spec, ctx.view, c, a.t, x, ctx.opts, ell=ell).tag is not CurveType.TYPE_I:
            continue
        rep = persistence_check(ctx.spec, ctx.view, c, a.t, a.steps, ctx.opts)
        bad = rep.first_violation
        rec.extend([(f"curve{count + 1}.y", c.anchor_y), (f"curve{count + 1}.pass", rep.passed),
                    (f"curve{count + 1}.first_violation_t", None if bad is None else bad.t)])
        ok &= rep.passed
        count += 1
    rec.add("type_one_curves", count)
    rec.add("pass", ok)
    return rec, ok


def cmd_strip(ctx):
    a = ctx.args
    rep = estimate_theta(ctx.spec, ctx.view, ctx.window(a.window), a.nodes, a.levels, ctx.opts,
                         a.conditions, ctx.workers)
    rec = Records([("problem", ctx.spec.name)])
    rec.extend(rep.records())
    ok = all(r.passed for r in rep.condition_results.values())
    return rec, ok


def cmd_check(ctx):
    a = ctx.args
    spec, win = ctx.spec, ctx.window(a.window)
    t_star = a.t_star if a.t_star is not None else strip_bound(spec)
    if t_star >= spec.horizon:
        t_star = spec.horizon * (1 - 1e-9)
    inj = injectivity_check(spec, t_star)
    plane = plane_singleton_check(spec, ctx.view, t_star, win, a.nodes, ctx.opts, ctx.workers)
    one = all_type_one_check(spec, ctx.view, t_star, win, a.nodes, ctx.opts, ctx.workers)
    cross = crossing_check(spec, ctx.view, (0.0, t_star), win, a.samples, ctx.opts, ctx.workers)
    rec = Records([("problem", spec.name), ("t_star", t_star)])
    for r in (inj, plane, one):
        rec.extend([(f"{r.name}.pass", r.passed), (f"{r.name}.witness", r.witness)])
    rec.extend([("crossing.pass", cross.passed), ("crossing.count", len(cross.crossings)),
                ("crossing.first", cross.crossings[0][:2] if cross.crossings else None)])
    # the crossing audit only binds where the strip conditions certify C^1
    certified = inj.passed or plane.passed or one.passed
    ok = certified and cross.passed
    rec.add("pass", ok)
    return rec, ok


def cmd_verify(ctx):
    a = ctx.args
    rep = viscosity_audit(ctx.spec, ctx.view, a.samples, a.h, ctx.window(a.window), ctx.seed,
                          singular_points=a.singular, C=a.C, opts=ctx.opts)
    res = rep.residuals
    rec = Records([("problem", ctx.spec.name), ("h", a.h), ("C", a.C), ("seed", ctx.seed),
                   ("regular_points", len(rep.regular)),
                   ("max_residual", float(res.max()) if len(res) else None),
                   ("median_residual", float(np.median(res)) if len(res) else None),
                   ("residual_bound", a.C * a.h + 1e-8),
                   ("skipped", len(rep.skipped)), ("singular_points", len(rep.singular))])
    for k, s in enumerate(rep.singular):
        rec.extend([(f"singular{k + 1}.t", s.t), (f"singular{k + 1}.x", s.x),
                    (f"singular{k + 1}.min_margin", s.min_margin),
                    (f"singular{k + 1}.alpha", s.alpha), (f"singular{k + 1}.note", s.note)])
    rec.add("pass", rep.passed)
    return rec, rep.passed


def cmd_trace(ctx):
    a = ctx.args
    path = trace(ctx.spec, ctx.view, a.t0, ctx.point(a.x0, "x0"), a.eps, a.t_end, ctx.opts,
                 a.scan_nodes, workers=ctx.workers)
    if path.lost:
        print(f"hopfkit: propagation lost at t = {path.nodes[-1, 0]:.12g}; "
              "refine --eps or --scan-nodes", file=sys.stderr)
    return path, path.complete


def cmd_repro(args, cfg):
    seed = args.seed if args.seed is not None else cfg.seed
    workers = args.workers if args.workers is not None else cfg.workers
    rec, ok = run_case(args.case, workers=workers, seed=seed)
    rec.add("pass", ok)
    return rec, ok


COMMANDS = {
    "eval": cmd_eval, "field": cmd_field, "conjugate": cmd_conjugate, "char": cmd_char,
    "classify": cmd_classify, "persist": cmd_persist, "strip": cmd_strip, "check": cmd_check,
    "verify": cmd_verify, "trace": cmd_trace,
}


def _preload_config(parser, argv):
    """Read ``--config`` first so its ``defaults`` can seed the subcommand flags."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return RunConfig()
    cfg = load_config(known.config)
    if cfg.defaults:
        for action in parser._subparsers._group_actions:
            for sp in action.choices.values():
                seeded = {k.replace("-", "_"): v for k, v in cfg.defaults.items()}
                for act in sp._actions:
                    if act.dest in seeded:
                        act.default = seeded[act.dest]
                        act.required = False  # the config supplies it
    return cfg


def emit(report, fmt: str, out: Optional[str]) -> int:
    text = render(report, fmt)
    data = text.encode("utf-8")
    if out is None:
        sys.stdout.buffer.write(data) if hasattr(sys.stdout, "buffer") else sys.stdout.write(text)
        sys.stdout.flush()
    else:
        try:
            with open(out, "wb") as fh:
                fh.write(data)
        except OSError as exc:
            raise ConfigurationError(f"cannot write {out!r}: {exc.strerror}") from None
    return len(data)


def run(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        cfg = _preload_config(parser, argv)
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    except ConfigurationError as exc:
        print(f"hopfkit: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "list":
            report, ok = cmd_list(args)
            fmt, out = "csv", None
        elif args.command == "repro":
            report, ok = cmd_repro(args, cfg)
            fmt, out = args.format, args.out
        else:
            ctx = _Context(args, cfg)
            report, ok = COMMANDS[args.command](ctx)
            fmt, out = args.format, args.out
        emit(report, fmt, out)
    except PreconditionError as exc:
        print(f"hopfkit: precondition failed: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (HopfError, ValueError) as exc:
        print(f"hopfkit: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK if ok else EXIT_AUDIT


def main() -> None:
    sys.exit(run())
