"""Cauchy problems ``u_t + H(Du) = 0``, ``u(0, .) = sigma`` and the built-in catalog.

Callbacks act on the last axis: ``hamiltonian(p)`` takes an array of shape
``(..., n)`` and returns shape ``(...)``; gradient callbacks return ``(..., n)``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import CatalogError, ConfigurationError, EvaluationError

Array = np.ndarray
ScalarField = Callable[[Array], Array]
VectorField = Callable[[Array], Array]

FD_STEP = 1e-6


def as_point(x, dim: int) -> Array:
    """Coerce a scalar or sequence into a float vector of length ``dim``."""
    a = np.atleast_1d(np.asarray(x, dtype=float))
    if a.shape != (dim,):
        raise ConfigurationError(f"expected a point of dimension {dim}, got shape {a.shape}")
    return a


def as_points(x, dim: int) -> Array:
    """Coerce input into an ``(m, dim)`` array; 1-D inputs of length m become m points."""
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(-1, 1) if dim == 1 else a.reshape(1, dim)
    if a.shape[-1] != dim:
        raise ConfigurationError(f"points must have trailing dimension {dim}, got {a.shape}")
    return a


def central_gradient(f: ScalarField, x: Array, h: float = FD_STEP) -> Array:
    """Central-difference gradient of ``f`` on points of shape ``(..., n)``."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    out = np.empty(x.shape, dtype=float)
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        out[..., i] = (np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2.0 * h)
    return out


@dataclass(frozen=True)
class ProblemSpec:
    """Immutable description of a Cauchy problem ``(H, sigma)``.

    ``semiconvexity`` is the constant gamma of H and ``semiconcavity`` the
    constant ``1/mu`` of sigma; both are declared by the user, never estimated.
    ``conjugate`` (with ``conjugate_grad`` and ``conjugate_atoms``) may carry an
    analytic Fenchel conjugate of sigma; it returns ``+inf`` off its domain.
    ``lagrangian`` is the Legendre transform of a convex H, used only by the
    min-formula cross-check.
    """

    dim: int
    horizon: float
    hamiltonian: ScalarField
    initial: ScalarField
    lipschitz_bound: float
    hamiltonian_grad: Optional[VectorField] = None
    initial_grad: Optional[VectorField] = None
    semiconvexity: Optional[float] = None
    semiconcavity: Optional[float] = None
    conjugate: Optional[ScalarField] = None
    conjugate_grad: Optional[VectorField] = None
    conjugate_atoms: tuple = ()
    lagrangian: Optional[ScalarField] = None
    name: str = "custom"
    description: str = ""

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ConfigurationError(f"dim must be a positive integer, got {self.dim!r}")
        if not self.horizon > 0:
            raise ConfigurationError(f"horizon must be positive, got {self.horizon!r}")
        if not self.lipschitz_bound > 0:
            raise ConfigurationError(f"lipschitz_bound must be positive, got {self.lipschitz_bound!r}")
        if self.semiconvexity is not None and self.semiconvexity < 0:
            raise ConfigurationError("semiconvexity constant must be >= 0")
        if self.semiconcavity is not None and not self.semiconcavity > 0:
            raise ConfigurationError("semiconcavity constant must be > 0")

    @property
    def mu(self) -> Optional[float]:
        return None if self.semiconcavity is None else 1.0 / self.semiconcavity

    def H(self, p) -> Array:
        return np.asarray(self.hamiltonian(np.asarray(p, dtype=float)), dtype=float)

    def H_p(self, p) -> Array:
        p = np.asarray(p, dtype=float)
        if self.hamiltonian_grad is not None:
            return np.asarray(self.hamiltonian_grad(p), dtype=float).reshape(p.shape)
        return central_gradient(self.hamiltonian, p)

    def sigma(self, x) -> Array:
        return np.asarray(self.initial(np.asarray(x, dtype=float)), dtype=float)

    def sigma_y(self, x) -> Array:
        x = np.asarray(x, dtype=float)
        if self.initial_grad is not None:
            return np.asarray(self.initial_grad(x), dtype=float).reshape(x.shape)
        return central_gradient(self.initial, x)

    def replace(self, **changes) -> "ProblemSpec":
        return dataclasses.replace(self, **changes)


# --------------------------------------------------------------------------
# building blocks for the catalog


def _sqnorm(a: Array) -> Array:
    return np.sum(np.asarray(a, dtype=float) ** 2, axis=-1)


def truncated_quadratic(slope: float, curvature: float = 1.0):
    """Callbacks for ``sigma(x) = c|x|^2/2`` inside ``|x| <= L/c``, ``L|x| - L^2/(2c)`` outside.

    Returns ``(sigma, sigma_grad, conjugate, conjugate_grad)``. sigma is C^1,
    convex and L-Lipschitz; its conjugate is ``|q|^2/(2c)`` on the closed ball of
    radius L and ``+inf`` outside.
    """
    knee = slope / curvature

    def sigma(x):
        r = np.sqrt(_sqnorm(x))
        return np.where(r <= knee, 0.5 * curvature * r**2, slope * r - 0.5 * slope * knee)

    def sigma_grad(x):
        x = np.asarray(x, dtype=float)
        r = np.sqrt(_sqnorm(x))[..., None]
        with np.errstate(invalid="ignore", divide="ignore"):
            outer = slope * x / np.where(r > 0, r, 1.0)
        return np.where(r <= knee, curvature * x, outer)

    def conj(q):
        s = _sqnorm(q)
        return np.where(s <= slope**2 * (1 + 1e-14), 0.5 * s / curvature, np.inf)

    def conj_grad(q):
        return np.asarray(q, dtype=float) / curvature

    return sigma, sigma_grad, conj, conj_grad


def _log_h(p):
    return -np.log1p(_sqnorm(p))


def _log_h_grad(p):
    p = np.asarray(p, dtype=float)
    return -2.0 * p / (1.0 + _sqnorm(p))[..., None]


def _sqrt_h(p):
    return -np.sqrt(1.0 + _sqnorm(p))


def _sqrt_h_grad(p):
    p = np.asarray(p, dtype=float)
    return -p / np.sqrt(1.0 + _sqnorm(p))[..., None]


def log_example(dim: int = 1, radius: float = 4.0, horizon: float = 3.0) -> ProblemSpec:
    """``u_t - ln(1 + |u_x|^2) = 0`` with the piecewise quadratic/linear initial datum.

    ``radius`` is where sigma switches from ``|x|^2/2`` to ``radius|x| - radius^2/2``.
    The printed datum uses 1; the default 4 keeps every maximizer the worked
    example relies on (up to ``sqrt(2t - 1)`` with ``t = 2``, and ``y = 2``) inside
    the quadratic core.
    """
    sigma, sigma_grad, conj, conj_grad = truncated_quadratic(radius)
    return ProblemSpec(
        dim=dim,
        horizon=horizon,
        hamiltonian=_log_h,
        hamiltonian_grad=_log_h_grad,
        initial=sigma,
        initial_grad=sigma_grad,
        lipschitz_bound=radius,
        # H''(p) = 2(p^2 - 1)/(1 + p^2)^2 >= -2
        semiconvexity=2.0,
        semiconcavity=1.0,
        conjugate=conj,
        conjugate_grad=conj_grad,
        name="log-example" if radius != 1.0 else "log-example-unit",
        description=f"H(p) = -ln(1+|p|^2), sigma = |x|^2/2 for |x|<={radius:g}, linear beyond",
    )


def sqrt_example(dim: int = 1, radius: float = 4.0, horizon: float = 6.0) -> ProblemSpec:
    """``u_t - (1 + |u_x|^2)^(1/2) = 0`` with ``|x|^2/2`` truncated to slope ``radius``."""
    sigma, sigma_grad, conj, conj_grad = truncated_quadratic(radius)
    return ProblemSpec(
        dim=dim,
        horizon=horizon,
        hamiltonian=_sqrt_h,
        hamiltonian_grad=_sqrt_h_grad,
        initial=sigma,
        initial_grad=sigma_grad,
        lipschitz_bound=radius,
        # H'' = -(1 + p^2)^(-3/2) >= -1
        semiconvexity=1.0,
        semiconcavity=1.0,
        conjugate=conj,
        conjugate_grad=conj_grad,
        name="sqrt-example",
        description=f"H(p) = -sqrt(1+|p|^2), sigma = |x|^2/2 truncated at slope {radius:g}",
    )


def zero_h(dim: int = 1, radius: float = 2.0, horizon: float = 2.0) -> ProblemSpec:
    sigma, sigma_grad, conj, conj_grad = truncated_quadratic(radius)
    return ProblemSpec(
        dim=dim,
        horizon=horizon,
        hamiltonian=lambda p: np.zeros(np.shape(p)[:-1]),
        hamiltonian_grad=lambda p: np.zeros(np.shape(p)),
        initial=sigma,
        initial_grad=sigma_grad,
        lipschitz_bound=radius,
        semiconvexity=0.0,
        semiconcavity=1.0,
        conjugate=conj,
        conjugate_grad=conj_grad,
        name="zero-h",
        description="H = 0, sigma = truncated |x|^2/2",
    )


def linear_sigma(dim: int = 1, a: Sequence[float] | float = 2.0, horizon: float = 2.0) -> ProblemSpec:
    """``sigma(x) = <a, x>`` whose conjugate is the indicator of ``{a}``."""
    a = np.broadcast_to(np.asarray(a, dtype=float), (dim,)).copy()
    norm = float(np.linalg.norm(a))
    if norm == 0:
        raise ConfigurationError("linear-sigma needs a nonzero slope vector")

    def conj(q):
        q = np.asarray(q, dtype=float)
        d = np.sqrt(_sqnorm(q - a))
        return np.where(d <= 1e-12 * (1 + norm), 0.0, np.inf)

    return ProblemSpec(
        dim=dim,
        horizon=horizon,
        hamiltonian=_log_h,
        hamiltonian_grad=_log_h_grad,
        initial=lambda x: np.asarray(x, dtype=float) @ a,
        initial_grad=lambda x: np.broadcast_to(a, np.shape(x)).copy(),
        lipschitz_bound=norm,
        semiconvexity=2.0,
        conjugate=conj,
        conjugate_atoms=(tuple(a),),
        name="linear-sigma",
        description=f"sigma(x) = <a, x> with a = {a.tolist()}, H(p) = -ln(1+|p|^2)",
    )


def quad_quad(dim: int = 1, radius: float = 4.0, horizon: float = 2.0) -> ProblemSpec:
    """Doubly convex problem ``H = |p|^2/2``, truncated ``|x|^2/2``; both formulas apply."""
    sigma, sigma_grad, conj, conj_grad = truncated_quadratic(radius)
    return ProblemSpec(
        dim=dim,
        horizon=horizon,
        hamiltonian=lambda p: 0.5 * _sqnorm(p),
        hamiltonian_grad=lambda p: np.asarray(p, dtype=float).copy(),
        initial=sigma,
        initial_grad=sigma_grad,
        lipschitz_bound=radius,
        semiconvexity=0.0,
        semiconcavity=1.0,
        conjugate=conj,
        conjugate_grad=conj_grad,
        lagrangian=lambda v: 0.5 * _sqnorm(v),
        name="quad-quad",
        description="H = |p|^2/2, sigma = |x|^2/2 truncated at slope 4",
    )


CATALOG: dict[str, Callable[..., ProblemSpec]] = {
    "log-example": log_example,
    "log-example-unit": lambda dim=1, **kw: log_example(dim=dim, radius=1.0, **kw),
    "sqrt-example": sqrt_example,
    "zero-h": zero_h,
    "linear-sigma": linear_sigma,
    "quad-quad": quad_quad,
}


def catalog_names() -> list[str]:
    return sorted(CATALOG)


def catalog_lookup(name: str, dim: int = 1, **params) -> ProblemSpec:
    """Return the catalog problem ``name``; ``params`` forward to its factory."""
    try:
        factory = CATALOG[name]
    except KeyError:
        raise CatalogError(name, catalog_names()) from None
    return factory(dim=dim, **params)


# --------------------------------------------------------------------------
# validation


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst: float
    detail: str = ""
    skipped: bool = False


@dataclass
class ValidationReport:
    problem: str
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def _finite(values, what, points):
    values = np.asarray(values, dtype=float)
    bad = ~np.isfinite(values)
    if bad.any():
        idx = np.argwhere(bad)[0]
        row = idx[0] if values.ndim else 0
        raise EvaluationError(what, np.asarray(points)[row].tolist())
    return values


def _sample_points(dim, samples, lo, hi, rng):
    if dim == 1:
        return np.linspace(lo, hi, samples).reshape(-1, 1)
    return rng.uniform(lo, hi, size=(samples, dim))


def _gradient_check(name, f, grad, pts, tol, h=FD_STEP):
    if grad is None:
        return CheckResult(name, True, 0.0, "no analytic gradient supplied", skipped=True)
    g = _finite(grad(pts), f"{name} callback", pts).reshape(pts.shape)
    fd = central_gradient(f, pts, h)
    _finite(fd, f"{name} central difference", pts)
    err = np.abs(fd - g) / np.maximum(1.0, np.abs(g))
    worst = float(err.max())
    i = int(np.argmax(err.max(axis=-1)))
    return CheckResult(name, worst <= tol, worst, f"worst at {pts[i].tolist()}")


def validate(
    spec: ProblemSpec,
    samples: int = 64,
    tol: float = 1e-6,
    window: float = 3.0,
    seed: int = 0,
) -> ValidationReport:
    """Sample-based sanity checks of a problem definition.

    Failed checks are recorded, never raised. Non-finite callback output raises
    :class:`EvaluationError` naming the offending point.
    """
    if samples < 8:
        raise ConfigurationError("validate needs at least 8 samples")
    rng = np.random.default_rng(seed)
    report = ValidationReport(spec.name)
    n = spec.dim

    xs = _sample_points(n, samples, -window, window, rng)
    _finite(spec.sigma(xs), "initial", xs)
    a = rng.uniform(-window, window, size=(samples, n))
    b = rng.uniform(-window, window, size=(samples, n))
    sa = _finite(spec.sigma(a), "initial", a)
    sb = _finite(spec.sigma(b), "initial", b)
    mid = 0.5 * (a + b)
    sm = _finite(spec.sigma(mid), "initial", mid)

    gap = sm - 0.5 * (sa + sb)
    report.checks.append(CheckResult("convexity", bool(gap.max() <= tol), float(gap.max())))

    excess = np.abs(sa - sb) - spec.lipschitz_bound * np.linalg.norm(a - b, axis=-1)
    report.checks.append(CheckResult(
        "lipschitz", bool(excess.max() <= tol), float(excess.max()),
        f"L = {spec.lipschitz_bound:.12g}",
    ))

    report.checks.append(_gradient_check("initial_grad", spec.initial, spec.initial_grad, xs, tol))
    ps = _sample_points(n, samples, -spec.lipschitz_bound, spec.lipschitz_bound, rng)
    _finite(spec.H(ps), "hamiltonian", ps)
    report.checks.append(
        _gradient_check("hamiltonian_grad", spec.hamiltonian, spec.hamiltonian_grad, ps, tol)
    )
    return report
