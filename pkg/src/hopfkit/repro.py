"""Golden-value reproductions of the two worked examples.

``sect5``: the log-example (critical points, singular maximizers, strip,
singular trace, characteristic types, reachable gradients).
``remark44``: the sqrt-example crossing of the characteristics from y = 1
and y = 2 inside a region where u stays differentiable.

Each case returns :class:`~hopfkit.output.Records` plus a pass flag.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import bisect

from .characteristics import (CurveType, characteristic_from, classify, persistence_check,
                              reachable_gradients, through_point)
from .conjugate import view_for
from .hopf import evaluate, stationary_points
from .output import Records
from .problem import catalog_lookup
from .regularity import estimate_theta, plane_singleton_check, strip_bound
from .singularity import arc_direction_hint, trace

CASES = ("sect5", "remark44")


class _Checks:
    def __init__(self):
        self.out = Records()
        self.ok = True

    def value(self, key, v):
        self.out.add(key, v)

    def check(self, key, passed, **values):
        for k, v in values.items():
            self.out.add(f"{key}.{k}", v)
        self.out.add(f"{key}.pass", bool(passed))
        self.ok &= bool(passed)


def _types_at(spec, view, t, x):
    ell = evaluate(spec, view, t, x)
    tags = []
    for c in through_point(spec, t, x):
        tags.append((float(c.anchor_y[0]), classify(spec, view, c, t, x, ell=ell).tag))
    return tags


def sect5(workers=None, seed: int = 0):
    spec = catalog_lookup("log-example")
    view = view_for(spec)
    ck = _Checks()
    ck.value("problem", spec.name)

    crit = stationary_points(spec, view, 2.0, 0.4)
    want = np.sort([2.0, (-4 + math.sqrt(11)) / 5, (-4 - math.sqrt(11)) / 5])
    err = float(np.max(np.abs(crit - want))) if len(crit) == 3 else math.inf
    ck.check("critical_points", err <= 1e-6, found=crit, expected=want, max_error=err)
    ell = evaluate(spec, view, 2.0, 0.4)
    ck.check("maximizer_2_0.4", ell.singleton and abs(ell.representatives[0, 0] - 2) <= 1e-6,
             representatives=ell.representatives.ravel(), u=ell.value)

    for t in (0.75, 1.0, 1.5):
        ell = evaluate(spec, view, t, 0.0)
        r = np.sort(ell.representatives.ravel())
        s = math.sqrt(2 * t - 1)
        err = float(np.max(np.abs(r - [-s, s]))) if len(r) == 2 else math.inf
        ck.check(f"ell_{t:g}_0", err <= 1e-4, representatives=r, max_error=err)

    rep = estimate_theta(spec, view, (-3.0, 3.0), 201, 12, workers=workers)
    bound = strip_bound(spec)
    plane = plane_singleton_check(spec, view, 0.5, (-3.0, 3.0), 201, workers=workers)
    ck.check("theta", abs(rep.theta_estimate - 0.5) <= 0.01 and plane.passed
             and bound <= rep.theta_estimate,
             estimate=rep.theta_estimate, strip_bound=bound, plane_singleton_0_5=plane.passed)

    path = trace(spec, view, 0.6, 0.0, 0.05, 2.0, workers=workers)
    xmax = float(np.max(np.abs(path.nodes[:, 1])))
    derr = float(np.max(np.abs(path.diameters - 2 * np.sqrt(2 * path.nodes[:, 0] - 1))))
    ck.check("trace", path.complete and xmax <= 0.02 and derr <= 1e-2,
             steps=len(path.nodes) - 1, delta=path.step_delta, max_abs_x=xmax,
             max_diameter_error=derr, end_t=path.nodes[-1, 0])

    type_i = []
    for t, x, expected in ((2.0, 0.4, {2.0: CurveType.TYPE_I}),
                           (1.0, 0.0, {-1.0: CurveType.TYPE_I, 0.0: CurveType.TYPE_II,
                                       1.0: CurveType.TYPE_I})):
        tags = _types_at(spec, view, t, x)
        ok = len(tags) == 3
        for y, tag in tags:
            near = [k for k in expected if abs(k - y) < 1e-6]
            want = expected[near[0]] if near else CurveType.TYPE_II
            ok &= tag is want
            if tag is CurveType.TYPE_I:
                type_i.append((t, y))
        ck.check(f"types_{t:g}_{x:g}", ok, anchors=[y for y, _ in tags],
                 tags=[tag.value for _, tag in tags])

    persisted = all(persistence_check(spec, view, characteristic_from(spec, y), t, 16).passed
                    for t, y in type_i)
    ck.check("persistence", persisted, curves=len(type_i))

    rg = reachable_gradients(spec, view, 1.0, 0.0)
    pairs = rg.pairs[np.argsort(rg.pairs[:, 1])]
    want = np.array([[math.log(2), -1.0], [math.log(2), 1.0]])
    err = float(np.max(np.abs(pairs - want))) if pairs.shape == want.shape else math.inf
    ck.check("reachable_1_0", err <= 1e-4, pairs=pairs, max_error=err)
    hint = arc_direction_hint(spec, view, 1.0, 0.0, seed=seed)
    ck.check("arc_1_0", abs(hint.alpha - math.log(2)) <= 1e-6, alpha=hint.alpha,
             verdict=hint.verdict)
    return ck.out, ck.ok


def crossing_time(spec, y1=1.0, y2=2.0, lo=1e-9, hi=None):
    """Bisection root of ``x(t, y1) = x(t, y2)`` for two straight characteristics."""
    c1, c2 = characteristic_from(spec, y1), characteristic_from(spec, y2)
    gap = lambda t: float((c1.position(t) - c2.position(t))[0])
    hi = spec.horizon * (1 - 1e-9) if hi is None else hi
    t = bisect(gap, lo, hi, xtol=1e-13, rtol=4 * np.finfo(float).eps, maxiter=200)
    return t, float(c1.position(t)[0])


def remark44(workers=None, seed: int = 0):
    spec = catalog_lookup("sqrt-example")
    view = view_for(spec)
    ck = _Checks()
    ck.value("problem", spec.name)

    t, x = crossing_time(spec)
    d = 2 * math.sqrt(2) - math.sqrt(5)
    t_ref, x_ref = math.sqrt(10) / d, 2 * (math.sqrt(2) - math.sqrt(5)) / d
    ck.check("crossing", abs(t - t_ref) <= 1e-6 and abs(x - x_ref) <= 1e-6,
             t=t, x=x, t_expected=t_ref, x_expected=x_ref)

    ell = evaluate(spec, view, t, x)
    ring = [(t + 0.05 * math.cos(a), x + 0.05 * math.sin(a))
            for a in np.arange(8) * (math.pi / 4)]
    around = [evaluate(spec, view, tt, xx).singleton for tt, xx in ring]
    ck.check("differentiable", ell.singleton and all(around), maximizer=ell.representatives.ravel(),
             ring_singletons=sum(around), ring_radius=0.05)
    curves = through_point(spec, t, x)
    anchors = sorted(float(c.anchor_y[0]) for c in curves)
    has = lambda y: any(abs(a - y) < 1e-6 for a in anchors)
    ck.check("curves_through_point", has(1.0) and has(2.0), anchors=anchors)
    return ck.out, ck.ok


def run_case(name: str, workers=None, seed: int = 0):
    return {"sect5": sect5, "remark44": remark44}[name](workers=workers, seed=seed)
