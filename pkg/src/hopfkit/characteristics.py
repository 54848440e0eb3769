"""Straight-line characteristics ``x(t) = y + t H_p(sigma_y(y))`` and their type at a point.

A characteristic through ``(t0, x0)`` is of type I there when its momentum
``sigma_y(y)`` belongs to the maximizer set at ``(t0, x0)``, and of type II
otherwise.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.ndimage import minimum_filter
from scipy.optimize import least_squares

from ._roots import scan_roots
from .conjugate import ConjugateView
from .errors import DomainError, PreconditionError, SearchWindowError
from .hopf import DEFAULT_OPTIONS, MaximizerSet, SolveOptions, evaluate
from .problem import ProblemSpec, as_point


@dataclass(frozen=True)
class Characteristic:
    anchor_y: np.ndarray
    momentum: np.ndarray
    velocity: np.ndarray
    v0: float

    def position(self, t) -> np.ndarray:
        return self.anchor_y + float(t) * self.velocity

    def reanchored(self, t0, t) -> np.ndarray:
        """Same line written through ``(t0, position(t0))``, evaluated at ``t``."""
        return self.position(t0) + (float(t) - float(t0)) * self.velocity


def characteristic_from(spec: ProblemSpec, y) -> Characteristic:
    y = as_point(y, spec.dim)
    p = spec.sigma_y(y)
    return Characteristic(y, p, spec.H_p(p), float(spec.sigma(y)))


def max_speed(spec: ProblemSpec, radius: Optional[float] = None, nodes: int = 4097) -> float:
    """``sup |H_p|`` over the momentum ball, by dense sampling (box grid in n-D)."""
    r = spec.lipschitz_bound if radius is None else float(radius)
    axis = np.linspace(-r, r, nodes if spec.dim == 1 else max(65, int(nodes ** (1 / spec.dim))))
    if spec.dim == 1:
        p = axis.reshape(-1, 1)
    else:
        p = np.stack(np.meshgrid(*([axis] * spec.dim), indexing="ij"), -1).reshape(-1, spec.dim)
        p = p[np.linalg.norm(p, axis=1) <= r]
    return float(np.max(np.linalg.norm(spec.H_p(p), axis=-1)))


def through_point(spec: ProblemSpec, t0: float, x0, nodes: Optional[int] = None,
                  window: Optional[float] = None) -> list[Characteristic]:
    """Every characteristic reaching ``(t0, x0)``, found by root search on
    ``r(y) = y + t0 H_p(sigma_y(y)) - x0`` over ``x0 +/- window``.

    The default half-width ``(t0 + 1) * sup|H_p|`` contains every admissible
    anchor. Raises :class:`SearchWindowError` when nothing is found.
    """
    t0 = float(t0)
    if not (0.0 < t0 < spec.horizon):
        raise DomainError(f"t0 = {t0!r} outside (0, {spec.horizon!r})")
    x0 = as_point(x0, spec.dim)
    if window is None:
        s = max_speed(spec)
        window = (t0 + 1.0) * s if s > 0 else 1.0
    n = spec.dim

    if n == 1:
        def residual(y):
            y = np.asarray(y, dtype=float).reshape(-1, 1)
            return (y + t0 * spec.H_p(spec.sigma_y(y)))[:, 0] - x0[0]

        roots = scan_roots(residual, x0[0] - window, x0[0] + window, nodes or 20001)
        anchors = [np.array([r]) for r in roots]
    else:
        anchors = _roots_nd(spec, t0, x0, window, nodes or 81)

    if not anchors:
        raise SearchWindowError(
            f"no characteristic reaches ({t0}, {x0.tolist()}) from the window of half-width {window}"
        )
    return [characteristic_from(spec, y) for y in anchors]


def _roots_nd(spec, t0, x0, window, nodes):
    n = spec.dim
    axis = np.linspace(-window, window, nodes)
    grid = np.stack(np.meshgrid(*([axis] * n), indexing="ij"), -1).reshape(-1, n) + x0
    res = grid + t0 * spec.H_p(spec.sigma_y(grid)) - x0
    norm = np.linalg.norm(res, axis=1).reshape((nodes,) * n)
    low = norm <= minimum_filter(norm, size=3, mode="nearest")
    starts = grid[low.ravel()]
    fun = lambda y: y + t0 * spec.H_p(spec.sigma_y(y.reshape(1, -1)))[0] - x0
    found: list[np.ndarray] = []
    for s in starts:
        sol = least_squares(fun, s, xtol=1e-15, ftol=1e-15, gtol=1e-15)
        if np.linalg.norm(sol.fun) <= 1e-9 and all(np.linalg.norm(sol.x - f) > 1e-6 for f in found):
            found.append(sol.x)
    found.sort(key=lambda v: tuple(v))
    return found


class CurveType(enum.Enum):
    TYPE_I = "I"
    TYPE_II = "II"


@dataclass(frozen=True)
class TypeTag:
    tag: CurveType
    at: tuple
    witness_q: np.ndarray
    distance: float


def _check_passes(c: Characteristic, t0, x0, tol):
    miss = float(np.linalg.norm(c.position(t0) - x0))
    if miss > tol * (1.0 + float(np.linalg.norm(x0))):
        raise PreconditionError(f"characteristic misses ({t0}, {x0.tolist()}) by {miss:.3g}")


def classify(spec: ProblemSpec, view: ConjugateView, c: Characteristic, t0: float, x0,
             opts: SolveOptions = DEFAULT_OPTIONS, ell: Optional[MaximizerSet] = None,
             tol: float = 1e-6) -> TypeTag:
    """Type I iff the curve's momentum is within ``cluster_tol`` of a maximizer at ``(t0, x0)``."""
    x0 = as_point(x0, spec.dim)
    _check_passes(c, t0, x0, tol)
    ell = ell if ell is not None else evaluate(spec, view, t0, x0, opts)
    d = ell.distance_to(c.momentum)
    tag = CurveType.TYPE_I if d <= ell.cluster_tol else CurveType.TYPE_II
    return TypeTag(tag, (float(t0), x0.copy()), c.momentum.copy(), d)


@dataclass
class PersistenceSample:
    t: float
    x: np.ndarray
    momentum_in: bool
    singleton: bool
    included: bool

    @property
    def ok(self) -> bool:
        return self.momentum_in and self.singleton and self.included


@dataclass
class PersistenceReport:
    t0: float
    x0: np.ndarray
    samples: list[PersistenceSample] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(s.ok for s in self.samples)

    @property
    def first_violation(self) -> Optional[PersistenceSample]:
        return next((s for s in self.samples if not s.ok), None)


def persistence_check(spec: ProblemSpec, view: ConjugateView, c: Characteristic, t0: float,
                      steps: int = 16, opts: SolveOptions = DEFAULT_OPTIONS,
                      tol: Optional[float] = None) -> PersistenceReport:
    """Audit a type I curve below ``t0``: at ``t_k = k t0/(steps+1)`` the momentum is a
    maximizer, the maximizer set is a singleton, and it is contained in the set at ``t0``.
    """
    x0 = c.position(t0)
    ell0 = evaluate(spec, view, t0, x0, opts)
    if not ell0.contains(c.momentum):
        raise PreconditionError("persistence_check needs a type I curve at t0")
    tol = ell0.cluster_tol if tol is None else tol
    report = PersistenceReport(float(t0), x0)
    for k in range(1, steps + 1):
        t = t0 * k / (steps + 1)
        x = c.position(t)
        ell = evaluate(spec, view, t, x, opts)
        included = all(ell0.distance_to(q) <= tol for q in ell.representatives)
        report.samples.append(
            PersistenceSample(t, x, ell.contains(c.momentum, tol), ell.singleton, included)
        )
    return report


# --------------------------------------------------------------------------
# reachable gradients


@dataclass
class GradientCheck:
    sample_points: np.ndarray
    sample_gradients: np.ndarray
    sample_errors: np.ndarray
    pair_errors: np.ndarray
    tol: float

    @property
    def passed(self) -> bool:
        return (len(self.sample_errors) > 0 and bool(np.all(self.sample_errors <= self.tol))
                and bool(np.all(self.pair_errors <= self.tol)))


@dataclass
class ReachableGradients:
    t0: float
    x0: np.ndarray
    pairs: np.ndarray  # rows (p, q1..qn) with p = -H(q)
    check: Optional[GradientCheck] = None


def fd_gradient(spec, view, t, x, h, opts=DEFAULT_OPTIONS):
    """Central-difference ``(u_t, u_x)`` plus the stencil's maximizer sets."""
    n = spec.dim
    stencil = []
    grad = np.empty(1 + n)
    for i in range(1 + n):
        e = np.zeros(1 + n)
        e[i] = h
        plus = evaluate(spec, view, t + e[0], x + e[1:], opts)
        minus = evaluate(spec, view, t - e[0], x - e[1:], opts)
        grad[i] = (plus.value - minus.value) / (2 * h)
        stencil += [plus, minus]
    return grad, stencil


def is_regular_stencil(center: MaximizerSet, stencil, jump: float) -> bool:
    """Center and stencil are singletons sharing one maximizer branch (no kink crossed)."""
    if not center.singleton:
        return False
    q = center.representatives[0]
    return all(s.singleton and s.distance_to(q) <= jump for s in stencil)


def reachable_gradients(spec: ProblemSpec, view: ConjugateView, t0: float, x0,
                        opts: SolveOptions = DEFAULT_OPTIONS, cross_check: bool = False,
                        samples: int = 20, radius: float = 1e-3, h: float = 1e-6,
                        tol: float = 1e-2, seed: int = 0) -> ReachableGradients:
    """``{(-H(q), q) : q maximizer at (t0, x0)}``; optionally matched against
    finite-difference gradients at nearby regular points on a small sphere.
    """
    t0 = float(t0)
    if not (0.0 < t0 < spec.horizon):
        raise DomainError(f"t0 = {t0!r} outside (0, {spec.horizon!r})")
    x0 = as_point(x0, spec.dim)
    ell = evaluate(spec, view, t0, x0, opts)
    qs = ell.representatives
    pairs = np.column_stack([-spec.H(qs), qs])
    out = ReachableGradients(t0, x0, pairs)
    if cross_check:
        out.check = _cross_check(spec, view, t0, x0, pairs, opts, samples, radius, h, tol, seed)
    return out


def _sphere_directions(k, dim, rng):
    if dim == 2:
        ang = 2 * np.pi * (np.arange(k) + 0.5) / k
        return np.column_stack([np.sin(ang), np.cos(ang)])
    d = rng.normal(size=(k, dim))
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def _cross_check(spec, view, t0, x0, pairs, opts, samples, radius, h, tol, seed):
    rng = np.random.default_rng(seed)
    n = spec.dim
    jump = max(opts.singleton_for(view.domain_radius), 1e3 * h)
    pts, grads = [], []
    attempt = 0
    while len(pts) < samples and attempt < 4:
        scale = radius * (1.0, 0.5, 0.75, 0.25)[attempt]
        dirs = _sphere_directions(samples, 1 + n, rng)
        if attempt:
            # rotate the ring so retries probe new directions
            dirs = _sphere_directions(samples * 2, 1 + n, rng)[1::2] if n == 1 else dirs
        for d in dirs:
            if len(pts) >= samples:
                break
            t, x = t0 + scale * d[0], x0 + scale * d[1:]
            if not (h < t < spec.horizon - h):
                continue
            center = evaluate(spec, view, t, x, opts)
            g, stencil = fd_gradient(spec, view, t, x, h, opts)
            if is_regular_stencil(center, stencil, jump):
                pts.append(np.concatenate([[t], x]))
                grads.append(g)
        attempt += 1
    pts_a = np.asarray(pts).reshape(-1, 1 + n)
    g_a = np.asarray(grads).reshape(-1, 1 + n)
    if len(g_a):
        dist = np.linalg.norm(g_a[:, None, :] - pairs[None, :, :], axis=-1)
        sample_err, pair_err = dist.min(axis=1), dist.min(axis=0)
    else:
        sample_err, pair_err = np.empty(0), np.full(len(pairs), np.inf)
    return GradientCheck(pts_a, g_a, sample_err, pair_err, tol)


def hull_points(pairs: np.ndarray, samples: int = 10, seed: int = 0) -> np.ndarray:
    """Convex combinations of gradient pairs: a uniform segment for two pairs,
    vertices plus seeded Dirichlet draws otherwise."""
    pairs = np.asarray(pairs, dtype=float)
    k = len(pairs)
    if k == 1:
        return pairs.copy()
    if k == 2:
        lam = np.linspace(0.0, 1.0, samples)[:, None]
        return lam * pairs[0] + (1.0 - lam) * pairs[1]
    rng = np.random.default_rng(seed)
    w = rng.dirichlet(np.ones(k), size=samples)
    return np.vstack([pairs, w @ pairs])


def hull_margins(spec: ProblemSpec, pairs, samples: int = 10, seed: int = 0):
    """``p + H(q)`` on sampled convex combinations of ``(p, q)`` pairs."""
    pts = hull_points(pairs, samples, seed)
    return pts, pts[:, 0] + spec.H(pts[:, 1:])
