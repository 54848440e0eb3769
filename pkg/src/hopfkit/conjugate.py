"""Fenchel conjugate of the initial datum: analytic views, numeric transforms, subgradients."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError, DomainError, EvaluationError, PreconditionError
from .problem import ProblemSpec, as_point

INF = np.inf
DEFAULT_WINDOW = 10.0


@dataclass(frozen=True)
class ConjugateView:
    """Queryable representation of ``sigma*``.

    ``value`` returns ``+inf`` off ``dom sigma*`` and always outside the closed
    ball of radius ``domain_radius``. ``atoms`` are isolated points of the
    domain that a grid may miss (e.g. the single point of an indicator's
    domain); maximizers include them explicitly.
    """

    value_fn: Callable[[np.ndarray], np.ndarray]
    domain_radius: float
    dim: int
    mode: str
    grad_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    atoms: tuple = ()
    grid_nodes: Optional[np.ndarray] = field(default=None, repr=False)
    grid_values: Optional[np.ndarray] = field(default=None, repr=False)
    input_spacing: Optional[float] = None  # primal grid step of a numeric transform

    def value(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        v = np.asarray(self.value_fn(q), dtype=float)
        outside = np.sqrt(np.sum(q**2, axis=-1)) > self.domain_radius * (1 + 1e-12)
        return np.where(outside, INF, v)

    __call__ = value

    def grad(self, q) -> np.ndarray:
        if self.grad_fn is None:
            raise ConfigurationError("this conjugate view has no analytic gradient")
        return np.asarray(self.grad_fn(np.asarray(q, dtype=float)), dtype=float)

    def atom_array(self) -> np.ndarray:
        return np.asarray(self.atoms, dtype=float).reshape(-1, self.dim)

    @classmethod
    def from_callable(cls, value, radius, dim=1, grad=None, atoms=()):
        return cls(value, float(radius), dim, "analytic", grad_fn=grad, atoms=tuple(atoms))


def analytic_view(spec: ProblemSpec) -> ConjugateView:
    if spec.conjugate is None:
        raise ConfigurationError(f"problem {spec.name!r} has no analytic conjugate")
    return ConjugateView(
        spec.conjugate,
        float(spec.lipschitz_bound),
        spec.dim,
        "analytic",
        grad_fn=spec.conjugate_grad,
        atoms=tuple(tuple(np.atleast_1d(a)) for a in spec.conjugate_atoms),
    )


def view_for(spec: ProblemSpec, mode: Optional[str] = None, nodes: int = 4001,
             radius_in: Optional[float] = None) -> ConjugateView:
    """Analytic view when the problem carries one (and ``mode`` allows), else numeric."""
    if mode not in (None, "analytic", "numeric"):
        raise ConfigurationError(f"unknown conjugate mode {mode!r}")
    if mode != "numeric" and spec.conjugate is not None:
        return analytic_view(spec)
    if mode == "analytic":
        raise ConfigurationError(f"problem {spec.name!r} has no analytic conjugate")
    L = float(spec.lipschitz_bound)
    if radius_in is None:
        radius_in = max(2.0 * L, L + 2.0)
    if spec.dim == 1 or nodes ** spec.dim <= 4_000_000:
        return conjugate_numeric(spec.initial, radius_in, L, nodes, dim=spec.dim)
    raise ConfigurationError("numeric conjugate grid too large; lower the node count")


# --------------------------------------------------------------------------
# 1-D sorted-slope transform


def lower_hull(x: np.ndarray, f: np.ndarray):
    """Vertices of the lower convex hull of sorted points (monotone chain, O(N))."""
    hx: list[float] = []
    hf: list[float] = []
    for xi, fi in zip(x.tolist(), f.tolist()):
        while len(hx) >= 2:
            # drop the middle vertex unless it lies strictly below the chord
            x1, f1, x2, f2 = hx[-2], hf[-2], hx[-1], hf[-1]
            if (f2 - f1) * (xi - x1) >= (fi - f1) * (x2 - x1):
                hx.pop()
                hf.pop()
            else:
                break
        hx.append(xi)
        hf.append(fi)
    hx_a = np.asarray(hx)
    hf_a = np.asarray(hf)
    slopes = np.diff(hf_a) / np.diff(hx_a) if hx_a.size > 1 else np.empty(0)
    return hx_a, hf_a, slopes


def llt_sorted(hx, hf, slopes, q_sorted):
    """Conjugate on sorted queries by one merge pass over hull slopes."""
    out = np.empty(len(q_sorted))
    k = 0
    m = len(slopes)
    for i, q in enumerate(q_sorted.tolist()):
        while k < m and slopes[k] < q:
            k += 1
        out[i] = q * hx[k] - hf[k]
    return out


def _hull_query(hx, hf, slopes, q):
    k = np.searchsorted(slopes, q, side="left")
    return q * hx[k] - hf[k]


def _flag_unbounded(slopes, q):
    if slopes.size == 0:
        return np.zeros(np.shape(q), dtype=bool)
    tol = 1e-9 * (1.0 + np.abs(q))
    return (q < slopes[0] - tol) | (q > slopes[-1] + tol)


def conjugate_numeric(f, radius_in: float, radius_out: float, nodes: int,
                      dim: int = 1) -> ConjugateView:
    """Discrete conjugate ``g(q) = max_x <x, q> - f(x)`` over a uniform grid.

    1-D uses the lower hull of the samples (linear time in the node count).
    A query slope steeper than the extreme hull slopes would push the sup off
    the sampled window and is reported as ``+inf``. In 2-D a separable ``f`` is
    transformed per axis; otherwise the sup is taken by brute force.
    """
    if nodes < 3:
        raise ConfigurationError("conjugate grid needs at least 3 nodes per axis")
    if not (radius_in > 0 and radius_out > 0):
        raise ConfigurationError("radii must be positive")
    axis = np.linspace(-radius_in, radius_in, nodes)
    qaxis = np.linspace(-radius_out, radius_out, nodes)

    if dim == 1:
        fx = np.asarray(f(axis.reshape(-1, 1)), dtype=float)
        _check_finite(fx, axis)
        hx, hf, slopes = lower_hull(axis, fx)

        def value(q):
            q = np.asarray(q, dtype=float)
            qs = q[..., 0]
            v = _hull_query(hx, hf, slopes, qs)
            return np.where(_flag_unbounded(slopes, qs), INF, v)

        gvals = llt_sorted(hx, hf, slopes, qaxis)
        gvals = np.where(_flag_unbounded(slopes, qaxis), INF, gvals)
        return ConjugateView(value, float(radius_out), 1, "numeric",
                             grid_nodes=qaxis.reshape(-1, 1), grid_values=gvals,
                             input_spacing=float(axis[1] - axis[0]))

    if dim != 2:
        raise ConfigurationError("numeric conjugates are supported for dim 1 and 2 only")
    X1, X2 = np.meshgrid(axis, axis, indexing="ij")
    pts = np.stack([X1, X2], axis=-1)
    F = np.asarray(f(pts), dtype=float)
    _check_finite(F.ravel(), pts.reshape(-1, 2))
    c = nodes // 2
    cross = F - F[:, [c]] - F[[c], :] + F[c, c]
    if np.max(np.abs(cross)) <= 1e-10 * (1.0 + np.max(np.abs(F))):
        parts = [lower_hull(axis, F[:, c]), lower_hull(axis, F[c, :] - F[c, c])]

        def value(q):
            q = np.asarray(q, dtype=float)
            total = np.zeros(q.shape[:-1])
            for i, (hx, hf, slopes) in enumerate(parts):
                qi = q[..., i]
                total = total + np.where(_flag_unbounded(slopes, qi), INF,
                                         _hull_query(hx, hf, slopes, qi))
            return total
    else:
        xs = pts.reshape(-1, 2)
        fs = F.ravel()

        def value(q):
            q = np.asarray(q, dtype=float)
            flat = q.reshape(-1, 2)
            out = np.empty(len(flat))
            for s in range(0, len(flat), 256):
                out[s:s + 256] = np.max(flat[s:s + 256] @ xs.T - fs, axis=1)
            return out.reshape(q.shape[:-1])

    Q1, Q2 = np.meshgrid(qaxis, qaxis, indexing="ij")
    qpts = np.stack([Q1, Q2], axis=-1).reshape(-1, 2)
    inside = np.sqrt(np.sum(qpts**2, axis=-1)) <= radius_out
    qpts = qpts[inside]
    return ConjugateView(value, float(radius_out), 2, "numeric",
                         grid_nodes=qpts, grid_values=value(qpts),
                         input_spacing=float(axis[1] - axis[0]))


def _check_finite(values, points):
    bad = ~np.isfinite(values)
    if bad.any():
        i = int(np.argmax(bad))
        raise EvaluationError("conjugate input function", np.asarray(points)[i].tolist())


def biconjugate(view: ConjugateView, x, nodes: int = 4001) -> np.ndarray:
    """``(sigma*)*(x)`` by a discrete transform of ``sigma*`` over its domain ball."""
    M = view.domain_radius
    x = np.asarray(x, dtype=float)
    if view.dim == 1:
        q = np.linspace(-M, M, nodes)
        extra = view.atom_array()[:, 0]
        q = np.unique(np.concatenate([q, extra]))
        v = view.value(q.reshape(-1, 1))
        keep = np.isfinite(v)
        if not keep.any():
            raise DomainError("conjugate is +inf on the whole sampling grid")
        hx, hf, slopes = lower_hull(q[keep], v[keep])
        return _hull_query(hx, hf, slopes, x[..., 0])
    axis = np.linspace(-M, M, nodes)
    grids = np.meshgrid(*([axis] * view.dim), indexing="ij")
    q = np.stack(grids, axis=-1).reshape(-1, view.dim)
    q = np.concatenate([q, view.atom_array()])
    v = view.value(q)
    keep = np.isfinite(v)
    q, v = q[keep], v[keep]
    flat = x.reshape(-1, view.dim)
    out = np.max(flat @ q.T - v, axis=1)
    return out.reshape(x.shape[:-1])


# --------------------------------------------------------------------------
# subgradients


@dataclass(frozen=True)
class Subdifferential:
    """Box approximation of ``d sigma*(p0)`` with per-axis unbounded flags.

    Rays cannot be materialized, so an unbounded side is clipped to the query
    window and flagged.
    """

    lower: np.ndarray
    upper: np.ndarray
    unbounded_lower: np.ndarray
    unbounded_upper: np.ndarray

    @property
    def unbounded(self) -> bool:
        return bool(self.unbounded_lower.any() or self.unbounded_upper.any())

    @property
    def is_singleton(self) -> bool:
        return not self.unbounded and bool(np.all(self.upper - self.lower <= 1e-6))

    @property
    def points(self) -> np.ndarray:
        if self.is_singleton:
            return (0.5 * (self.lower + self.upper)).reshape(1, -1)
        corners = np.array(np.meshgrid(*zip(self.lower, self.upper), indexing="ij"))
        return np.unique(corners.reshape(len(self.lower), -1).T, axis=0)

    def contains(self, y, tol: float = 1e-6) -> bool:
        y = np.asarray(y, dtype=float)
        return bool(np.all(y >= self.lower - tol) and np.all(y <= self.upper + tol))


def subdifferential(view: ConjugateView, p0, tol: float = 1e-6,
                    window: float = DEFAULT_WINDOW) -> Subdifferential:
    """One-sided difference quotients at resolution ``tol``, per axis.

    Where the view has an analytic gradient and the conjugate is finite on
    both sides, the gradient is returned as a singleton; at the boundary of the
    domain the finite side uses the gradient and the other side is a ray.
    """
    p0 = as_point(p0, view.dim)
    if np.linalg.norm(p0) > view.domain_radius * (1 + 1e-12):
        raise DomainError(f"{p0.tolist()} lies outside the domain ball of radius {view.domain_radius}")
    v0 = float(view.value(p0))
    if not np.isfinite(v0):
        raise DomainError(f"conjugate is +inf at {p0.tolist()}")
    g = view.grad(p0) if view.grad_fn is not None else None
    n = view.dim
    lo, hi = np.empty(n), np.empty(n)
    ulo, uhi = np.zeros(n, dtype=bool), np.zeros(n, dtype=bool)
    for i in range(n):
        e = np.zeros(n)
        e[i] = tol
        vl = float(view.value(p0 - e))
        vr = float(view.value(p0 + e))
        left_ok, right_ok = np.isfinite(vl), np.isfinite(vr)
        if g is not None and left_ok and right_ok:
            lo[i] = hi[i] = g[i]
            continue
        if left_ok:
            lo[i] = g[i] if g is not None else (v0 - vl) / tol
        else:
            lo[i], ulo[i] = -window, True
        if right_ok:
            hi[i] = g[i] if g is not None else (vr - v0) / tol
        else:
            hi[i], uhi[i] = window, True
    return Subdifferential(lo, hi, ulo, uhi)


@dataclass(frozen=True)
class AffineProbe:
    affine: bool
    inconsistent: bool
    gap: float
    max_deviation: float = 0.0

    def __bool__(self) -> bool:
        return self.affine


def affine_segment_probe(view: ConjugateView, p, p0, y, tol: float = 1e-8) -> AffineProbe:
    """Test ``<y, p - p0> = sigma*(p) - sigma*(p0)`` for a subgradient ``y`` at ``p0``.

    When the identity holds, ``sigma*`` must be affine on ``[p, p0]`` with slope
    ``y``; eight interior points are checked and a violation is flagged as an
    inconsistency.
    """
    n = view.dim
    p, p0, y = as_point(p, n), as_point(p0, n), as_point(y, n)
    v, v0 = float(view.value(p)), float(view.value(p0))
    if not (np.isfinite(v) and np.isfinite(v0)):
        raise DomainError("both segment endpoints must lie in the conjugate's domain")
    if not subdifferential(view, p0).contains(y, tol=max(tol, 1e-6)):
        raise PreconditionError(f"{y.tolist()} is not a subgradient at {p0.tolist()}")
    if np.allclose(p, p0, rtol=0, atol=0):
        return AffineProbe(True, False, 0.0)
    gap = float(y @ (p - p0) - (v - v0))
    scale = 1.0 + abs(v) + abs(v0)
    if abs(gap) > tol * scale:
        return AffineProbe(False, False, gap)
    lam = np.linspace(0.0, 1.0, 10)[1:-1]
    z = p0 + lam[:, None] * (p - p0)
    expected = z @ y - y @ p0 + v0
    dev = float(np.max(np.abs(view.value(z) - expected)))
    return AffineProbe(True, dev > tol * scale, gap, dev)


@dataclass
class DualityReport:
    mu: float
    worst_margin: float
    worst_pair: tuple
    pairs: int
    passed: bool


def constant_duality_check(spec: ProblemSpec, view: Optional[ConjugateView] = None,
                           tol: Optional[float] = None, pairs: int = 256,
                           seed: int = 0) -> DualityReport:
    """Sample the uniform-convexity inequality of ``sigma*`` implied by the declared
    semiconcavity constant ``1/mu`` of sigma::

        sigma*(a) + sigma*(b) - 2 sigma*((a+b)/2) >= (mu/4)|a - b|^2

    The default ``tol`` is 1e-9, widened for a numeric view by its discretization
    error: each value is off by at most ``h^2 / (8 mu)`` on a primal step ``h``.
    """
    if spec.semiconcavity is None:
        raise ConfigurationError(f"problem {spec.name!r} declares no semiconcavity constant")
    view = view or view_for(spec)
    mu = spec.mu
    if tol is None:
        h = view.input_spacing or 0.0
        tol = 1e-9 + 0.5 * spec.semiconcavity * h * h
    rng = np.random.default_rng(seed)
    n, M = spec.dim, view.domain_radius
    a = _ball_samples(rng, pairs, n, M)
    b = _ball_samples(rng, pairs, n, M)
    b[0] = a[0]  # coincident pair: margin exactly 0
    va, vb, vm = view.value(a), view.value(b), view.value(0.5 * (a + b))
    ok = np.isfinite(va) & np.isfinite(vb) & np.isfinite(vm)
    margin = va + vb - 2.0 * vm - 0.25 * mu * np.sum((a - b) ** 2, axis=-1)
    margin = np.where(ok, margin, np.inf)
    i = int(np.argmin(margin))
    worst = float(margin[i])
    return DualityReport(mu, worst, (a[i].tolist(), b[i].tolist()), int(ok.sum()), worst >= -tol)


def _ball_samples(rng, m, n, radius):
    if n == 1:
        return rng.uniform(-radius, radius, size=(m, 1))
    d = rng.normal(size=(m, n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    r = radius * rng.uniform(size=(m, 1)) ** (1.0 / n)
    return d * r
