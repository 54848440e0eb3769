"""Singular points of the max-formula solution and their forward propagation.

A point is singular when its maximizer set has diameter above
``singleton_tol``. From a singular ``(t0, x0)`` another singular point exists
within ``eps`` at every later time up to ``delta = eps / sup|H_p|``; chaining
those balls gives a polyline approximation of the singular arc.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .characteristics import hull_margins, max_speed, reachable_gradients
from .conjugate import ConjugateView
from .errors import ConfigurationError, DomainError, PreconditionError
from .hopf import DEFAULT_OPTIONS, SolveOptions, check_time, evaluate, parallel_map
from .problem import ProblemSpec, as_point

DELTA_SAFETY = 0.9  # delta is shrunk by 10% against under-sampling sup|H_p|


def delta_for(spec: ProblemSpec, eps: float, nodes: int = 4097,
              radius: Optional[float] = None) -> float:
    """Time step ``eps / sup|H_p|`` over the momentum ball; ``inf`` when H_p vanishes."""
    if not eps > 0:
        raise ConfigurationError("eps must be positive")
    s = max_speed(spec, radius, nodes)
    return math.inf if s == 0 else float(eps) / s


def _ball_grid(center, eps, nodes, dim):
    # odd node count so the center is always sampled
    k = nodes if nodes % 2 else nodes + 1
    axis = np.linspace(-eps, eps, k)
    if dim == 1:
        return center + axis.reshape(-1, 1), k
    mesh = np.stack(np.meshgrid(*([axis] * dim), indexing="ij"), -1).reshape(-1, dim)
    return center + mesh, k


def _tie_bisect(spec, view, t, a, b, qa, qb, opts, iters=60):
    """Bisect the segment [a, b] whose ends select maximizers qa != qb."""
    for _ in range(iters):
        mid = 0.5 * (a + b)
        ell = evaluate(spec, view, t, mid, opts)
        if not ell.singleton:
            return mid, ell
        q = ell.representatives[0]
        if np.linalg.norm(q - qa) <= np.linalg.norm(q - qb):
            a, qa = mid, q
        else:
            b, qb = mid, q
        if np.linalg.norm(b - a) < 1e-13:
            break
    mid = 0.5 * (a + b)
    ell = evaluate(spec, view, t, mid, opts)
    return (mid, ell) if not ell.singleton else (None, None)


def _jump_search(spec, view, t, pts, sets, k, opts):
    """Tie point between grid neighbours whose maximizers jump apart, if any."""
    n = spec.dim
    tol = opts.singleton_for(view.domain_radius)
    shape = (k,) * n
    q = np.stack([s.representatives[0] for s in sets]).reshape(*shape, n)
    best, best_gap = None, tol
    for axis in range(n):
        gap = np.linalg.norm(np.diff(q, axis=axis), axis=-1)
        i = np.unravel_index(int(np.argmax(gap)), gap.shape)
        if gap[i] > best_gap:
            j = list(i)
            j[axis] += 1
            best, best_gap = (np.ravel_multi_index(i, shape), np.ravel_multi_index(tuple(j), shape)), gap[i]
    if best is None:
        return None, None
    ia, ib = best
    return _tie_bisect(spec, view, t, pts[ia], pts[ib], sets[ia].representatives[0],
                       sets[ib].representatives[0], opts)


def find_singular_near(spec: ProblemSpec, view: ConjugateView, t1: float, center, eps: float,
                       opts: SolveOptions = DEFAULT_OPTIONS, nodes: int = 21,
                       workers: Optional[int] = None) -> Optional[np.ndarray]:
    """Singular point in the box of half-width ``eps`` around ``center`` at time ``t1``.

    Returns the scanned point of largest maximizer-set diameter (after one
    local refinement), or the tie point between two neighbours whose
    maximizers jump apart when no grid node is singular. ``None`` if neither.
    The box is clipped to the ball of radius ``eps``. The jump search runs
    along grid lines, so in n-D an isolated singular point is found only when
    a grid line passes through it.
    """
    t1 = check_time(spec, t1)
    if not eps > 0:
        raise ConfigurationError("eps must be positive")
    n = spec.dim
    center = as_point(center, n)
    pts, k = _ball_grid(center, eps, nodes, n)
    sets = parallel_map(lambda x: evaluate(spec, view, t1, x, opts), pts, workers)
    inside = np.linalg.norm(pts - center, axis=1) <= eps * (1 + 1e-12)
    diam = np.array([s.diameter for s in sets])
    diam[~inside] = -1.0
    i = int(np.argmax(diam))
    if not sets[i].singleton and inside[i]:
        step = 2 * eps / (k - 1)
        fine, _ = _ball_grid(pts[i], step, 11, n)
        fine = fine[np.linalg.norm(fine - center, axis=1) <= eps * (1 + 1e-12)]
        fd = np.array([evaluate(spec, view, t1, x, opts).diameter for x in fine])
        j = int(np.argmax(fd))
        return fine[j] if fd[j] > diam[i] else pts[i]
    x, ell = _jump_search(spec, view, t1, pts, sets, k, opts)
    if x is None or np.linalg.norm(x - center) > eps * (1 + 1e-12):
        return None
    return x


@dataclass
class SingularPath:
    nodes: np.ndarray  # rows (t, x1..xn)
    diameters: np.ndarray
    step_eps: float
    step_delta: float
    complete: bool
    retries: list = field(default_factory=list)

    @property
    def lost(self) -> bool:
        """Propagation was lost before ``t_end`` (a resolution issue, not a proof)."""
        return not self.complete

    @property
    def header(self) -> list[str]:
        return ["k", "t", *[f"x{i + 1}" for i in range(self.nodes.shape[1] - 1)], "diameter"]

    def rows(self):
        for k, (row, d) in enumerate(zip(self.nodes, self.diameters)):
            yield [k, *row, d]

    def max_jump(self) -> float:
        if len(self.nodes) < 2:
            return 0.0
        return float(np.max(np.linalg.norm(np.diff(self.nodes[:, 1:], axis=0), axis=1)))

    def drift(self) -> float:
        return float(np.linalg.norm(self.nodes[-1, 1:] - self.nodes[0, 1:]))


def _march(spec, view, t0, x0, d0, t_end, eps, delta, opts, scan_nodes, workers):
    ts, xs, ds = [t0], [x0], [d0]
    t, x = t0, x0
    while t < t_end:
        t_next = t_end if (math.isinf(delta) or t + delta >= t_end - 1e-12) else t + delta
        nxt = find_singular_near(spec, view, t_next, x, eps, opts, scan_nodes, workers)
        if nxt is None:
            return ts, xs, ds, False
        t, x = t_next, nxt
        ts.append(t)
        xs.append(x)
        ds.append(evaluate(spec, view, t, x, opts).diameter)
    return ts, xs, ds, True


def trace(spec: ProblemSpec, view: ConjugateView, t0: float, x0, eps: float, t_end: float,
          opts: SolveOptions = DEFAULT_OPTIONS, scan_nodes: int = 21, retry: bool = True,
          workers: Optional[int] = None) -> SingularPath:
    """Forward polyline of singular points from a singular ``(t0, x0)`` up to ``t_end``.

    Steps of ``0.9 * delta_for(eps)`` in time; the last step lands on ``t_end``.
    A miss triggers one retry from the last node with ``2 eps`` and a 4x finer
    scan; a second miss returns the partial path with ``complete=False``.
    """
    t0 = check_time(spec, t0)
    t_end = float(t_end)
    if t_end < t0:
        raise ConfigurationError("t_end must not precede t0")
    if t_end >= spec.horizon:
        raise DomainError(f"t_end = {t_end!r} must be below the horizon {spec.horizon!r}")
    x0 = as_point(x0, spec.dim)
    start = evaluate(spec, view, t0, x0, opts)
    if start.singleton:
        raise PreconditionError(f"({t0!r}, {x0.tolist()!r}) is not a singular point")
    delta = DELTA_SAFETY * delta_for(spec, eps)
    ts, xs, ds, ok = _march(spec, view, t0, x0, start.diameter, t_end, eps, delta, opts,
                            scan_nodes, workers)
    retries = []
    if not ok and retry:
        retries.append({"from_t": ts[-1], "eps": 2 * eps, "scan_nodes": 4 * scan_nodes})
        more = _march(spec, view, ts[-1], xs[-1], ds[-1], t_end, 2 * eps,
                      DELTA_SAFETY * delta_for(spec, 2 * eps), opts, 4 * scan_nodes, workers)
        ts += more[0][1:]
        xs += more[1][1:]
        ds += more[2][1:]
        ok = more[3]
    nodes = np.column_stack([ts, np.vstack(xs)])
    return SingularPath(nodes, np.asarray(ds), float(eps), float(delta), ok, retries)


@dataclass
class ArcHint:
    alpha: float
    argmax: Optional[np.ndarray]
    endpoint_values: np.ndarray
    pairs: np.ndarray
    verdict: str

    @property
    def applicable(self) -> bool:
        return self.argmax is not None


def arc_direction_hint(spec: ProblemSpec, view: Optional[ConjugateView], t0: float = None, x0=None,
                       opts: SolveOptions = DEFAULT_OPTIONS, hull_samples: int = 101,
                       pairs=None, tol: float = 1e-8, seed: int = 0) -> ArcHint:
    """``alpha = max p + H(q)`` over convex combinations of reachable gradient pairs.

    ``pairs`` may be given directly (rows ``(p, q)``); otherwise they are the
    reachable gradients at ``(t0, x0)``. A regular point is reported as not
    applicable. ``alpha > tol`` means a Lipschitz singular arc leaves the point.
    """
    if pairs is None:
        pairs = reachable_gradients(spec, view, t0, x0, opts).pairs
    pairs = np.asarray(pairs, dtype=float).reshape(-1, 1 + spec.dim)
    ends = pairs[:, 0] + spec.H(pairs[:, 1:])
    if len(pairs) < 2:
        return ArcHint(float("nan"), None, ends, pairs, "not applicable: regular point")
    pts, margins = hull_margins(spec, pairs, hull_samples, seed)
    i = int(np.argmax(margins))
    alpha = float(margins[i])
    if alpha > tol:
        verdict = "strict: Lipschitz singular arc leaves the point"
    elif alpha >= -tol:
        verdict = "degenerate: alpha ~ 0, excluded when the conjugate is strictly convex"
    else:
        verdict = "negative: the pairwise hull is not the subdifferential here"
    return ArcHint(alpha, pts[i], ends, pairs, verdict)
