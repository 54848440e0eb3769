"""Strips of C^1 regularity, sufficient strip conditions, and a numerical viscosity audit.

Every "for all x" statement is sampled on a finite window; reports carry the
window and resolution they were computed on.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .characteristics import (CurveType, classify, fd_gradient, hull_margins,
                              is_regular_stencil, max_speed, reachable_gradients,
                              through_point)
from .conjugate import ConjugateView
from .errors import ConfigurationError, DomainError
from .hopf import (DEFAULT_OPTIONS, SolveOptions, evaluate, parallel_map, window_points,
                   worker_count)
from .problem import ProblemSpec


@dataclass
class ConditionResult:
    """Outcome of a sampled strip condition; truthy when it holds."""

    name: str
    t_star: float
    passed: bool
    witness: Optional[tuple] = None
    checked: int = 0

    def __bool__(self) -> bool:
        return self.passed


def strip_bound(spec: ProblemSpec) -> float:
    """Guaranteed regularity time ``min(T, mu / (2 gamma))``; ``T`` when gamma is 0."""
    if spec.semiconvexity is None or spec.semiconcavity is None:
        raise ConfigurationError(
            f"problem {spec.name!r} must declare both the semiconvexity of H and the "
            "semiconcavity of sigma"
        )
    gamma, mu = spec.semiconvexity, spec.mu
    if gamma == 0:
        return float(spec.horizon)
    return float(min(spec.horizon, mu / (2.0 * gamma)))


def _time_in_range(spec, t):
    t = float(t)
    if not (0.0 < t < spec.horizon):
        raise DomainError(f"t = {t!r} outside (0, {spec.horizon!r})")
    return t


def injectivity_check(spec: ProblemSpec, t_star: float, y_window=None, nodes: int = 20001,
                      tol: float = 0.0) -> ConditionResult:
    """Is ``y -> y + t* H_p(sigma_y(y))`` injective on the sampled window?

    1-D: strictly increasing images. n-D: no two distinct nodes map within
    ``tol`` (or a tenth of the spacing) of each other; necessary evidence only.
    """
    t_star = _time_in_range(spec, t_star)
    n = spec.dim
    if y_window is None:
        w = spec.lipschitz_bound + (t_star + 1.0) * max_speed(spec)
        y_window = (-w, w)
    if n == 1:
        y = np.linspace(*np.asarray(y_window, dtype=float).ravel()[:2], nodes).reshape(-1, 1)
        img = (y + t_star * spec.H_p(spec.sigma_y(y)))[:, 0]
        d = np.diff(img)
        bad = np.nonzero(d <= -tol if tol > 0 else d <= 0)[0]
        witness = None if not len(bad) else (float(y[bad[0], 0]), float(y[bad[0] + 1, 0]))
        return ConditionResult("injectivity", t_star, not len(bad), witness, nodes)
    per_axis = max(3, int(round(nodes ** (1.0 / n))))
    y = window_points(y_window, n, per_axis)
    img = y + t_star * spec.H_p(spec.sigma_y(y))
    spacing = (np.ptp(y[:, 0]) / (per_axis - 1))
    r = tol if tol > 0 else 0.1 * spacing
    pairs = cKDTree(img).query_pairs(r)
    witness = None
    if pairs:
        i, j = min(pairs)
        witness = (y[i].tolist(), y[j].tolist())
    return ConditionResult("injectivity", t_star, not pairs, witness, len(y))


def plane_singleton_check(spec: ProblemSpec, view: ConjugateView, t_star: float, x_window,
                          nodes=201, opts: SolveOptions = DEFAULT_OPTIONS,
                          workers: Optional[int] = None) -> ConditionResult:
    """Is the maximizer set a singleton at every sampled ``(t*, x)``?"""
    t_star = _time_in_range(spec, t_star)
    xs = window_points(x_window, spec.dim, nodes)
    witness = _first_singular(spec, view, t_star, xs, opts, workers)
    return ConditionResult("plane-singleton", t_star, witness is None,
                           None if witness is None else (t_star, witness.tolist()), len(xs))


def all_type_one_check(spec: ProblemSpec, view: ConjugateView, t_star: float, x_window,
                       nodes=201, opts: SolveOptions = DEFAULT_OPTIONS,
                       workers: Optional[int] = None) -> ConditionResult:
    """Are all characteristics through every sampled ``(t*, x)`` of type I?"""
    t_star = _time_in_range(spec, t_star)
    xs = window_points(x_window, spec.dim, nodes)

    def first_type_two(x):
        ell = evaluate(spec, view, t_star, x, opts)
        for c in through_point(spec, t_star, x):
            if classify(spec, view, c, t_star, x, opts, ell=ell).tag is CurveType.TYPE_II:
                return c.anchor_y
        return None

    found = parallel_map(first_type_two, xs, workers)
    for x, y in zip(xs, found):
        if y is not None:
            return ConditionResult("all-type-one", t_star, False,
                                   (t_star, x.tolist(), y.tolist()), len(xs))
    return ConditionResult("all-type-one", t_star, True, None, len(xs))


def _first_singular(spec, view, t, xs, opts, workers):
    if worker_count(workers) == 1:
        # sequential so a failing level stops at its first witness
        for x in xs:
            if not evaluate(spec, view, t, x, opts).singleton:
                return x
        return None
    flags = parallel_map(lambda x: evaluate(spec, view, t, x, opts).singleton, xs, workers)
    for x, ok in zip(xs, flags):
        if not ok:
            return x
    return None


@dataclass
class StripReport:
    theta_estimate: float
    theoretical_bound: Optional[float]
    witness: Optional[tuple]
    x_window: list
    resolution: int
    levels: int
    level_spacing: float
    condition_results: dict = field(default_factory=dict)

    @property
    def no_witness(self) -> bool:
        return self.witness is None

    def records(self) -> list[tuple[str, object]]:
        out = [
            ("theta_estimate", self.theta_estimate),
            ("theoretical_bound", self.theoretical_bound),
            ("level_spacing", self.level_spacing),
            ("levels", self.levels),
            ("window", self.x_window),
            ("resolution", self.resolution),
            ("witness_t", None if self.witness is None else self.witness[0]),
            ("witness_x", None if self.witness is None else self.witness[1]),
        ]
        if self.witness is None:
            out.append(("note", "no witness found in window"))
        for name, res in self.condition_results.items():
            out.append((f"condition.{name}", res.passed))
            out.append((f"condition.{name}.t", res.t_star))
        return out


def estimate_theta(spec: ProblemSpec, view: ConjugateView, x_window, nodes=201, levels: int = 12,
                   opts: SolveOptions = DEFAULT_OPTIONS, conditions: bool = False,
                   workers: Optional[int] = None) -> StripReport:
    """Window-relative estimate of the largest regularity strip by bisection in t.

    A level passes when every sampled x has a singleton maximizer set.
    ``conditions=True`` also evaluates the three sufficient strip conditions
    at the highest passing level.
    """
    if levels < 4:
        raise ConfigurationError("estimate_theta needs at least 4 bisection levels")
    T = float(spec.horizon)
    xs = window_points(x_window, spec.dim, nodes)
    bound = None
    if spec.semiconvexity is not None and spec.semiconcavity is not None:
        bound = strip_bound(spec)
    spacing = T / 2**levels
    top = T - spacing
    hit = _first_singular(spec, view, top, xs, opts, workers)
    win = np.asarray(x_window, dtype=float).tolist()
    if hit is None:
        report = StripReport(T, bound, None, win, nodes, levels, spacing)
        lo = top
    else:
        witness = (top, hit.tolist())
        lo, hi = 0.0, top
        for _ in range(levels):
            mid = 0.5 * (lo + hi)
            hit = _first_singular(spec, view, mid, xs, opts, workers)
            if hit is None:
                lo = mid
            else:
                hi = mid
                witness = (mid, hit.tolist())
        report = StripReport(0.5 * (lo + hi), bound, witness, win, nodes, levels, hi - lo)
    if conditions and lo > 0:
        report.condition_results = {
            "injectivity": injectivity_check(spec, lo),
            "plane-singleton": plane_singleton_check(spec, view, lo, x_window, nodes, opts, workers),
            "all-type-one": all_type_one_check(spec, view, lo, x_window, nodes, opts, workers),
        }
    return report


@dataclass
class CrossingReport:
    region: tuple
    samples: int
    crossings: list = field(default_factory=list)  # (t, x, anchors)
    singular: list = field(default_factory=list)  # (t, x) where the region is not C^1

    @property
    def certified(self) -> bool:
        """Every sample had a singleton maximizer set."""
        return not self.singular

    @property
    def passed(self) -> bool:
        return not self.crossings


def crossing_check(spec: ProblemSpec, view: ConjugateView, t_range, x_window, samples=11,
                   opts: SolveOptions = DEFAULT_OPTIONS,
                   workers: Optional[int] = None) -> CrossingReport:
    """Look for points of a (t, x) box where more than one characteristic arrives.

    Inside a strip certified C^1 no crossing may occur; a crossing in a region
    that is only pointwise C^1 is legitimate and is reported, not raised.
    """
    t_lo, t_hi = map(float, t_range)
    ts = np.linspace(t_lo, t_hi, samples)
    ts = ts[(ts > 0) & (ts < spec.horizon)]
    xs = window_points(x_window, spec.dim, samples)
    nodes = [(t, x) for t in ts for x in xs]

    def probe(node):
        t, x = node
        curves = through_point(spec, t, x)
        return len(curves), [c.anchor_y.tolist() for c in curves], evaluate(spec, view, t, x, opts).singleton

    results = parallel_map(probe, nodes, workers)
    rep = CrossingReport(((t_lo, t_hi), np.asarray(x_window, dtype=float).tolist()), len(nodes))
    for (t, x), (count, anchors, single) in zip(nodes, results):
        if count > 1:
            rep.crossings.append((float(t), x.tolist(), anchors))
        if not single:
            rep.singular.append((float(t), x.tolist()))
    return rep


# --------------------------------------------------------------------------
# viscosity audit


@dataclass
class RegularAudit:
    t: float
    x: list
    residual: float
    bound: float

    @property
    def ok(self) -> bool:
        return self.residual <= self.bound


@dataclass
class SingularAudit:
    t: float
    x: list
    pairs: np.ndarray
    min_margin: float
    alpha: float
    tol: float

    @property
    def ok(self) -> bool:
        return self.min_margin >= -self.tol

    @property
    def note(self) -> str:
        if not self.ok:
            return "supersolution inequality violated on the gradient-pair hull"
        if self.alpha > self.tol:
            return "strict: singular arc emanates"
        return "degenerate: alpha ~ 0"


@dataclass
class ViscosityReport:
    h: float
    C: float
    regular: list = field(default_factory=list)
    singular: list = field(default_factory=list)
    skipped: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(a.ok for a in self.regular) and all(a.ok for a in self.singular)

    @property
    def residuals(self) -> np.ndarray:
        return np.array([a.residual for a in self.regular])

    @property
    def points(self) -> np.ndarray:
        return np.array([[a.t, *a.x] for a in self.regular])


def sample_points(spec: ProblemSpec, count: int, x_window, h: float, seed: int = 0) -> np.ndarray:
    """Seeded uniform draws in ``(2h, T - 2h) x window``."""
    rng = np.random.default_rng(seed)
    win = np.asarray(x_window, dtype=float).reshape(-1, 2)
    if len(win) == 1:
        win = np.repeat(win, spec.dim, axis=0)
    t = rng.uniform(2 * h, spec.horizon - 2 * h, size=count)
    x = rng.uniform(win[:, 0], win[:, 1], size=(count, spec.dim))
    return np.column_stack([t, x])


def viscosity_audit(spec: ProblemSpec, view: ConjugateView, samples: int = 50, h: float = 1e-4,
                    x_window=(-2.0, 2.0), seed: int = 0, points=None, singular_points=(),
                    C: float = 10.0, tol: float = 1e-8, hull_samples: int = 10,
                    opts: SolveOptions = DEFAULT_OPTIONS) -> ViscosityReport:
    """Numerical viscosity-solution audit.

    Regular points (singleton maximizer set with a kink-free stencil): the
    central-difference residual ``|u_t + H(u_x)|`` must stay below ``C h + tol``.
    Singular points: ``p + H(q) >= -tol`` on sampled convex combinations of the
    reachable gradient pairs (the subdifferential there); the subsolution side
    is vacuous because a convex u has an empty superdifferential at a kink.
    Randomly drawn points are used until ``samples`` regular ones are found,
    unless ``points`` is given.
    """
    rep = ViscosityReport(h, C)
    jump = max(opts.singleton_for(view.domain_radius), 1e3 * h)
    explicit = points is not None
    pool = np.asarray(points, dtype=float).reshape(-1, 1 + spec.dim) if explicit else \
        sample_points(spec, 20 * samples, x_window, h, seed)
    for row in pool:
        if not explicit and len(rep.regular) >= samples:
            break
        t, x = float(row[0]), row[1:]
        center = evaluate(spec, view, t, x, opts)
        if not center.singleton:
            rep.singular.append(_hull_audit(spec, view, t, x, opts, tol, hull_samples, seed))
            continue
        g, stencil = fd_gradient(spec, view, t, x, h, opts)
        if not is_regular_stencil(center, stencil, jump):
            rep.skipped.append((t, x.tolist()))
            continue
        res = abs(g[0] + float(spec.H(g[1:])))
        rep.regular.append(RegularAudit(t, x.tolist(), res, C * h + tol))
    for row in singular_points:
        row = np.asarray(row, dtype=float).ravel()
        rep.singular.append(_hull_audit(spec, view, float(row[0]), row[1:], opts, tol,
                                        hull_samples, seed))
    return rep


def _hull_audit(spec, view, t, x, opts, tol, hull_samples, seed):
    pairs = reachable_gradients(spec, view, t, x, opts).pairs
    _, margins = hull_margins(spec, pairs, hull_samples, seed)
    return SingularAudit(t, list(np.atleast_1d(x).tolist()), pairs, float(margins.min()),
                         float(margins.max()), tol)
