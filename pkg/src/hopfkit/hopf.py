"""The max-formula ``u(t,x) = max_q <x,q> - sigma*(q) - t H(q)`` and its maximizer sets.

The maximization runs over the closed ball of radius ``domain_radius`` (the
Lipschitz bound of sigma contains ``dom sigma*``): a coarse grid search, local
refinement from every grid local maximum inside a near-max band, then
clustering of the refined points. Distinct maximizers are never arbitrated;
their multiplicity is what marks a singular point.
"""

from __future__ import annotations

import functools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from typing import Optional, Sequence

import numpy as np
from scipy.ndimage import maximum_filter
from scipy.optimize import minimize

from ._roots import scan_roots
from .conjugate import ConjugateView
from .errors import (ConfigurationError, DomainError, EvaluationError, HopfError,
                     InfeasibleError)
from .problem import ProblemSpec, as_point, central_gradient

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0
WORKERS_ENV = "HOPFKIT_WORKERS"


@dataclass(frozen=True)
class SolveOptions:
    """Tolerances for :func:`evaluate`.

    ``None`` entries resolve against the conjugate's domain radius M:
    2001 grid nodes per axis in 1-D (161 otherwise), ``cluster_tol = 1e-4 M``,
    ``singleton_tol = 1e-3 M``. The near-max band keeps grid points within
    ``band_rel * (value range on grid)`` of the incumbent; the final maximizer
    band is ``value_rel_tol * (1 + |u|)``.
    """

    grid_nodes: Optional[int] = None
    value_rel_tol: float = 1e-9
    band_rel: float = 1e-4
    cluster_tol: Optional[float] = None
    singleton_tol: Optional[float] = None
    xtol: float = 1e-12
    max_starts: int = 256

    def nodes_for(self, dim: int) -> int:
        if self.grid_nodes is not None:
            return int(self.grid_nodes)
        return 2001 if dim == 1 else 161

    def cluster_for(self, radius: float) -> float:
        return self.cluster_tol if self.cluster_tol is not None else 1e-4 * radius

    def singleton_for(self, radius: float) -> float:
        return self.singleton_tol if self.singleton_tol is not None else 1e-3 * radius


DEFAULT_OPTIONS = SolveOptions()


@dataclass(frozen=True)
class MaximizerSet:
    t: float
    x: np.ndarray
    value: float
    representatives: np.ndarray
    diameter: float
    value_tol: float
    cluster_tol: float
    singleton_tol: float

    @property
    def singleton(self) -> bool:
        return self.diameter <= self.singleton_tol

    def distance_to(self, q) -> float:
        """Distance from ``q`` to the nearest representative."""
        q = np.asarray(q, dtype=float).reshape(1, -1)
        return float(np.min(np.linalg.norm(self.representatives - q, axis=1)))

    def contains(self, q, tol: Optional[float] = None) -> bool:
        return self.distance_to(q) <= (self.cluster_tol if tol is None else tol)


def check_time(spec: ProblemSpec, t: float) -> float:
    t = float(t)
    if not (0.0 <= t < spec.horizon):
        raise DomainError(f"t = {t!r} outside [0, {spec.horizon!r})")
    return t


def _phi_raw(spec, view, t, x, q):
    s = view.value(q)
    finite = np.isfinite(s)
    out = np.full(s.shape, -np.inf)
    if finite.any():
        qf = q[finite]
        h = spec.H(qf)
        if not np.all(np.isfinite(h)):
            bad = qf[np.argmax(~np.isfinite(h))]
            raise EvaluationError("hamiltonian", bad.tolist())
        out[finite] = qf @ x - s[finite] - t * h
    return out


def phi(spec: ProblemSpec, view: ConjugateView, t: float, x, q) -> np.ndarray:
    """``<x,q> - sigma*(q) - t H(q)``; ``-inf`` wherever ``sigma*(q) = +inf``."""
    t = check_time(spec, t)
    x = as_point(x, spec.dim)
    q = np.asarray(q, dtype=float)
    # 1-D accepts bare scalars/vectors of momenta; n-D expects a trailing axis of size n
    shape = q.shape if spec.dim == 1 else q.shape[:-1]
    out = _phi_raw(spec, view, t, x, q.reshape(-1, spec.dim))
    return out.reshape(shape) if shape else out[0]


@functools.lru_cache(maxsize=32)
def _box_grid(radius: float, dim: int, nodes: int):
    axis = np.linspace(-radius, radius, nodes)
    if dim == 1:
        return axis.reshape(-1, 1), axis[1] - axis[0]
    mesh = np.meshgrid(*([axis] * dim), indexing="ij")
    return np.stack(mesh, axis=-1).reshape(-1, dim), axis[1] - axis[0]


def _golden_refine(f, lo, hi, xtol):
    a, b = lo.copy(), hi.copy()
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while np.max(b - a) > xtol:
        left = fc >= fd
        a = np.where(left, a, c)
        b = np.where(left, d, b)
        c_new = np.where(left, b - _GOLDEN * (b - a), d)
        d_new = np.where(left, c, a + _GOLDEN * (b - a))
        probe = np.where(left, c_new, d_new)
        fp = f(probe)
        fc, fd = np.where(left, fp, fd), np.where(left, fc, fp)
        c, d = c_new, d_new
    return 0.5 * (a + b)


def _cluster(points, values, tol):
    order = np.argsort(-values, kind="stable")
    reps: list[np.ndarray] = []
    for i in order:
        p = points[i]
        if all(np.linalg.norm(p - r) > tol for r in reps):
            reps.append(p)
    reps_a = np.array(reps)
    return reps_a[np.lexsort(reps_a.T[::-1])]


def _diameter(reps):
    if len(reps) < 2:
        return 0.0
    diff = reps[:, None, :] - reps[None, :, :]
    return float(np.max(np.linalg.norm(diff, axis=-1)))


def evaluate(spec: ProblemSpec, view: ConjugateView, t: float, x,
             opts: SolveOptions = DEFAULT_OPTIONS) -> MaximizerSet:
    """Value ``u(t,x)`` and the maximizer set of the max-formula."""
    t = check_time(spec, t)
    n = spec.dim
    x = as_point(x, n)
    M = view.domain_radius
    nodes = opts.nodes_for(n)
    grid, h = _box_grid(M, n, nodes)
    vals = _phi_raw(spec, view, t, x, grid)
    atoms = view.atom_array()
    atom_vals = _phi_raw(spec, view, t, x, atoms) if len(atoms) else np.empty(0)

    finite = np.isfinite(vals)
    if not finite.any() and not np.isfinite(atom_vals).any():
        raise InfeasibleError("phi is -inf on the whole search grid; dom sigma* misses it")

    all_finite = np.concatenate([vals[finite], atom_vals[np.isfinite(atom_vals)]])
    best, worst = float(all_finite.max()), float(all_finite.min())
    band = best - opts.band_rel * (best - worst)

    shaped = vals.reshape((nodes,) * n)
    peak = maximum_filter(shaped, size=3, mode="constant", cval=-np.inf).ravel()
    starts = np.nonzero(finite & (vals >= band) & (vals >= peak))[0]
    if len(starts) > opts.max_starts:
        starts = starts[np.argsort(-vals[starts], kind="stable")[: opts.max_starts]]

    cand, cand_vals = [], []
    if len(starts):
        refined = _refine(spec, view, t, x, grid[starts], h, M, opts)
        rv = _phi_raw(spec, view, t, x, refined)
        better = rv >= vals[starts]
        cand.append(np.where(better[:, None], refined, grid[starts]))
        cand_vals.append(np.where(better, rv, vals[starts]))
    if len(atoms):
        cand.append(atoms)
        cand_vals.append(atom_vals)
    points = np.concatenate(cand)
    pvals = np.concatenate(cand_vals)

    value = float(np.max(pvals))
    value_tol = opts.value_rel_tol * (1.0 + abs(value))
    keep = pvals >= value - value_tol
    ctol = opts.cluster_for(M)
    reps = _cluster(points[keep], pvals[keep], ctol)
    return MaximizerSet(t, x, value, reps, _diameter(reps), value_tol, ctol, opts.singleton_for(M))


def _refine(spec, view, t, x, starts, h, M, opts):
    n = spec.dim
    if n == 1:
        s = starts[:, 0]
        lo = np.maximum(s - h, -M)
        hi = np.minimum(s + h, M)
        f = lambda q: _phi_raw(spec, view, t, x, q.reshape(-1, 1))
        return _golden_refine(f, lo, hi, opts.xtol * max(1.0, M)).reshape(-1, 1)

    out = np.empty_like(starts)
    big = 1e300
    for i, s in enumerate(starts):
        def neg(q):
            if np.linalg.norm(q) > M:
                return big
            v = _phi_raw(spec, view, t, x, q.reshape(1, -1))[0]
            return -v if np.isfinite(v) else big
        simplex = np.vstack([s] + [s + 0.5 * h * e for e in np.eye(n)])
        res = minimize(neg, s, method="Nelder-Mead",
                       options={"initial_simplex": simplex, "xatol": 1e-11, "fatol": 1e-15,
                                "maxiter": 4000})
        out[i] = res.x if res.fun <= neg(s) else s
    return out


def value(spec, view, t, x, opts: SolveOptions = DEFAULT_OPTIONS) -> float:
    return evaluate(spec, view, t, x, opts).value


def hopf_bruteforce(spec: ProblemSpec, view: ConjugateView, t: float, x, nodes: int = 20001) -> float:
    """Plain grid maximum of the max-formula objective; an oracle for :func:`evaluate`."""
    t = check_time(spec, t)
    x = as_point(x, spec.dim)
    grid, _ = _box_grid(view.domain_radius, spec.dim, nodes)
    vals = _phi_raw(spec, view, t, x, grid)
    if len(view.atoms):
        vals = np.concatenate([vals, _phi_raw(spec, view, t, x, view.atom_array())])
    return float(np.max(vals))


def hopf_lax(spec: ProblemSpec, t: float, x, window: float = 10.0, nodes: int = 200001) -> float:
    """Brute-force min-formula ``min_y sigma(y) + t L((x - y)/t)`` for convex H.

    Only a cross-check oracle; ``spec.lagrangian`` must hold the Legendre
    transform of H.
    """
    if spec.lagrangian is None:
        raise ConfigurationError(f"problem {spec.name!r} has no Lagrangian; min-formula unavailable")
    t = float(t)
    if t <= 0:
        raise DomainError("min-formula needs t > 0")
    x = as_point(x, spec.dim)
    grid, _ = _box_grid(float(window), spec.dim, nodes)
    y = grid + x
    vals = spec.sigma(y) + t * np.asarray(spec.lagrangian((x - y) / t))
    return float(np.min(vals))


def stationary_points(spec: ProblemSpec, view: ConjugateView, t: float, x,
                      nodes: int = 20001, window: Optional[float] = None) -> np.ndarray:
    """Roots of ``q -> d/dq phi(t, x, q)`` on ``[-window, window]`` (1-D only).

    Uses the view's analytic gradient when present, else central differences
    of the conjugate. ``window`` defaults to the domain radius.
    """
    if spec.dim != 1:
        raise ConfigurationError("stationary_points is one-dimensional")
    t = check_time(spec, t)
    x0 = float(as_point(x, 1)[0])
    w = view.domain_radius if window is None else float(window)

    def dphi(q):
        q = np.asarray(q, dtype=float).reshape(-1, 1)
        if view.grad_fn is not None:
            ds = view.grad(q)[:, 0]
        else:
            ds = central_gradient(view.value, q)[:, 0]
        d = x0 - ds - t * spec.H_p(q)[:, 0]
        return np.where(np.isfinite(view.value(q)), d, np.nan)

    return scan_roots(dphi, -w, w, nodes)


# --------------------------------------------------------------------------
# tabulation


@dataclass
class FieldTable:
    dim: int
    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    diam: np.ndarray
    singleton: np.ndarray
    meta: dict = dc_field(default_factory=dict)

    @property
    def header(self) -> list[str]:
        return ["t", *[f"x{i + 1}" for i in range(self.dim)], "u", "diam", "singleton"]

    def rows(self):
        for i in range(len(self.t)):
            yield [self.t[i], *self.x[i], self.u[i], self.diam[i], int(self.singleton[i])]


class NodeError(HopfError):
    """An evaluation failed at a specific node of a tabulation."""

    def __init__(self, t, x, cause):
        self.t, self.x, self.cause = t, x, cause
        super().__init__(f"at (t={t!r}, x={list(x)!r}): {cause}")


def worker_count(workers: Optional[int] = None) -> int:
    if workers is not None:
        return max(1, int(workers))
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        raise ConfigurationError(f"{WORKERS_ENV} must be an integer") from None


def window_axes(window: Sequence, dim: int, resolution) -> list[np.ndarray]:
    """Per-axis node arrays for a box given as ``[(lo, hi), ...]`` or ``(lo, hi)`` in 1-D."""
    win = np.asarray(window, dtype=float).reshape(-1, 2)
    if len(win) == 1 and dim > 1:
        win = np.repeat(win, dim, axis=0)
    res = np.broadcast_to(np.asarray(resolution, dtype=int), (dim,))
    if len(win) != dim:
        raise ConfigurationError("window dimension mismatch")
    if np.any(res < 1):
        raise ConfigurationError("resolution must be positive")
    return [np.linspace(lo, hi, r) if r > 1 else np.array([lo]) for (lo, hi), r in zip(win, res)]


def window_points(window, dim, resolution) -> np.ndarray:
    axes = window_axes(window, dim, resolution)
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack(mesh, axis=-1).reshape(-1, dim)


def parallel_map(fn, items, workers: Optional[int] = None):
    """Ordered map over a thread pool (order independent of scheduling)."""
    items = list(items)
    w = worker_count(workers)
    if w == 1 or len(items) < 2:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=w) as pool:
        return list(pool.map(fn, items))


def field(spec: ProblemSpec, view: ConjugateView, t_values: Sequence[float], x_window,
          resolution, opts: SolveOptions = DEFAULT_OPTIONS,
          workers: Optional[int] = None) -> FieldTable:
    """Tabulate ``(t, x, u, diam, singleton)`` over ``t_values`` x a box grid, sorted by (t, x)."""
    xs = window_points(x_window, spec.dim, resolution)
    ts = np.sort(np.asarray(t_values, dtype=float))
    nodes = [(t, x) for t in ts for x in xs]

    def one(node):
        t, x = node
        try:
            return evaluate(spec, view, t, x, opts)
        except HopfError as exc:
            raise NodeError(t, x, exc) from exc

    results = parallel_map(one, nodes, workers)
    return FieldTable(
        spec.dim,
        np.array([n[0] for n in nodes]),
        np.array([n[1] for n in nodes]).reshape(-1, spec.dim),
        np.array([r.value for r in results]),
        np.array([r.diameter for r in results]),
        np.array([r.singleton for r in results], dtype=bool),
        {"problem": spec.name},
    )
