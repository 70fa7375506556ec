"""Test objectives with known minimizers and certified constants.

Every objective carries the same duck-typed surface: `d`, `value(x)`,
`grad(x)`, `f_star`, `x_star`, `L` (smoothness constant, an upper bound on
the gradient Lipschitz constant), `mu` (quasi-convexity modulus, 0 when only
the weak inequality holds), and `convexity_class`. `value` and `grad` accept
arrays of shape (..., d) and broadcast over leading axes, which keeps
multi-worker and Monte-Carlo code vectorized.

Certified constants are analytic over-estimates, derived where they are
declared; all schedule guards treat L as an upper bound, so conservative
values are safe.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .errors import DegenerateDesignError, InvalidParameterError

__all__ = [
    "CONVEXITY_CLASSES",
    "Quadratic",
    "StarConvex1d",
    "LeastSquares",
    "NonconvexRadial",
    "make_quadratic",
    "make_star_convex_1d",
    "make_least_squares",
    "make_nonconvex_radial",
]

CONVEXITY_CLASSES = ("strongly-quasi-convex", "weakly-quasi-convex", "non-convex")


def _scalarize(out: np.ndarray, x: np.ndarray):
    # single point in -> python float out; batch in -> array out
    return float(out) if x.ndim == 1 else out


@dataclass(frozen=True, eq=False)
class Quadratic:
    """f(x) = 0.5 (x - x*)^T diag(lam) (x - x*) with log-spaced spectrum.

    f* = 0 by construction. The spectrum endpoints are exact, so L and mu
    are tight, not estimates.
    """

    eigenvalues: np.ndarray
    x_star: np.ndarray

    f_star = 0.0
    convexity_class = "strongly-quasi-convex"

    @property
    def d(self) -> int:
        return self.eigenvalues.size

    @property
    def L(self) -> float:
        return float(self.eigenvalues.max())

    @property
    def mu(self) -> float:
        return float(self.eigenvalues.min())

    def value(self, x):
        x = np.asarray(x, dtype=np.float64)
        diff = x - self.x_star
        return _scalarize(0.5 * np.sum(self.eigenvalues * diff * diff, axis=-1), x)

    def grad(self, x):
        x = np.asarray(x, dtype=np.float64)
        return self.eigenvalues * (x - self.x_star)


@dataclass(frozen=True, eq=False)
class StarConvex1d:
    """f(x) = |x| (1 - e^{-|x|}) on the line: star-convex around 0, not convex.

    x* = 0, f* = 0, mu = 0. The weak quasi-convexity inequality holds with
    exact slack <grad f(x), x> - f(x) = x^2 e^{-|x|} >= 0.

    Certified L = 2: for x > 0, f''(x) = (2 - x) e^{-x}, so |f''| <= 2 with
    the maximum attained at 0; the left branch is symmetric and f' is
    continuous through 0.
    """

    d = 1
    f_star = 0.0
    mu = 0.0
    L = 2.0
    convexity_class = "weakly-quasi-convex"

    @property
    def x_star(self) -> np.ndarray:
        return np.zeros(1)

    def value(self, x):
        x = np.asarray(x, dtype=np.float64)
        a = np.abs(x[..., 0])
        return _scalarize(a * -np.expm1(-a), x)

    def grad(self, x):
        x = np.asarray(x, dtype=np.float64)
        a = np.abs(x[..., 0])
        # d/da [a(1 - e^{-a})] = 1 - e^{-a} + a e^{-a}, odd extension through 0
        slope = -np.expm1(-a) + a * np.exp(-a)
        return (np.sign(x[..., 0]) * slope)[..., None]


@dataclass(frozen=True, eq=False)
class LeastSquares:
    """Finite sum of n least-squares components f_i(x) = 0.5 (<a_i, x> - b_i)^2.

    The aggregate f = (1/n) sum_i f_i is a convex quadratic; x* comes from
    the normal equations and f* = f(x*) is the irreducible residual.
    `L`/`mu` are the extreme eigenvalues of (1/n) A^T A. Component-level
    smoothness is max_i ||a_i||^2, which is what sampled-gradient noise
    bounds are stated against; it can be much larger than the aggregate L.
    """

    design: np.ndarray  # (n, d)
    targets: np.ndarray  # (n,)
    x_star: np.ndarray
    f_star: float
    L: float
    mu: float

    convexity_class = "strongly-quasi-convex"

    @property
    def d(self) -> int:
        return self.design.shape[1]

    @property
    def n(self) -> int:
        return self.design.shape[0]

    @property
    def component_L(self) -> float:
        return float(np.max(np.sum(self.design * self.design, axis=1)))

    def value(self, x):
        x = np.asarray(x, dtype=np.float64)
        resid = x @ self.design.T - self.targets
        return _scalarize(0.5 * np.mean(resid * resid, axis=-1), x)

    def grad(self, x):
        x = np.asarray(x, dtype=np.float64)
        resid = x @ self.design.T - self.targets
        return resid @ self.design / self.n

    def component_value(self, i: int, x):
        x = np.asarray(x, dtype=np.float64)
        resid = x @ self.design[i] - self.targets[i]
        return _scalarize(0.5 * resid * resid, x)

    def component_grad(self, i: int, x):
        x = np.asarray(x, dtype=np.float64)
        resid = x @ self.design[i] - self.targets[i]
        if x.ndim == 1:
            return resid * self.design[i]
        return resid[..., None] * self.design[i]

    def component_grads(self, x: np.ndarray) -> np.ndarray:
        """All n component gradients at a single point, shape (n, d)."""
        resid = self.design @ np.asarray(x, dtype=np.float64) - self.targets
        return resid[:, None] * self.design

    @property
    def mean_component_grad_sq_at_opt(self) -> float:
        g = self.component_grads(self.x_star)
        return float(np.mean(np.sum(g * g, axis=1)))


@dataclass(frozen=True, eq=False)
class NonconvexRadial:
    """Radial star-convex extension of a function on the sphere, plus a ridge.

    f(x) = h(r) g(x/r) + (mu/2) r^2 with r = ||x||, h(r) = r (1 - e^{-r}),
    and g(u) = c0 + c1 u_1 u_2 (a degree-2 spherical harmonic, so g is a
    smooth trigonometric polynomial in angles, positive since c0 > c1/2).
    f(0) = 0 is the global minimum; the extension through 0 is smooth with
    grad f(0) = 0. The angular variation and the concave stretch of h
    (h''(r) < 0 for r > 2) make f non-convex, yet
    <grad f(x), x> - f(x) - (mu/2) r^2 = r^2 e^{-r} g(u) >= 0, so the
    quasi-convexity inequality holds at modulus mu around x* = 0.

    Certified L = 2 c0 + 4.5 c1 + mu. Split f - ridge = c0 h(r) + c1 phi(r) q(x)
    with q(x) = x_1 x_2 and phi(r) = (1 - e^{-r})/r. Radial part:
    ||hess|| <= c0 max(sup|h''|, sup h'/r) = 2 c0, since h'' = (2 - r) e^{-r}
    and h'(r) <= 2r. Angular part: with |q| <= r^2/2, ||grad q|| <= r,
    ||hess q|| = 1, the Hessian is bounded by
    c1 [ sup(r^2 |phi''|)/2 + (5/2) sup(r |phi'|) + sup|phi| ]
    <= c1 [ (e^{-1} + 1)/2 + 5/2 + 1 ] <= 4.5 c1, using
    r |phi'| <= min(r/2, 1/r) <= 1 and r^2 |phi''| <= r e^{-r} + 2 min(r/2, 1)
    <= e^{-1} + 1. The ridge adds mu.
    """

    dim: int
    mu: float
    c0: float = 1.0
    c1: float = 0.5

    f_star = 0.0

    @property
    def d(self) -> int:
        return self.dim

    @property
    def x_star(self) -> np.ndarray:
        return np.zeros(self.dim)

    @property
    def L(self) -> float:
        return 2.0 * self.c0 + 4.5 * self.c1 + self.mu

    @property
    def convexity_class(self) -> str:
        return "strongly-quasi-convex" if self.mu > 0 else "weakly-quasi-convex"

    def value(self, x):
        x = np.asarray(x, dtype=np.float64)
        r = np.linalg.norm(x, axis=-1)
        safe = np.where(r > 0, r, 1.0)
        u = x / safe[..., None]
        g = self.c0 + self.c1 * u[..., 0] * u[..., 1]
        h = r * -np.expm1(-r)
        out = np.where(r > 0, h * g, 0.0) + 0.5 * self.mu * r * r
        return _scalarize(out, x)

    def grad(self, x):
        x = np.asarray(x, dtype=np.float64)
        r = np.linalg.norm(x, axis=-1)
        safe = np.where(r > 0, r, 1.0)
        u = x / safe[..., None]
        q = u[..., 0] * u[..., 1]
        g = self.c0 + self.c1 * q
        # h'(r) u g  +  (h(r)/r) c1 (p - 2 q u)  +  mu x, all in unit coords
        hp = -np.expm1(-r) + r * np.exp(-r)
        h_over_r = -np.expm1(-r)
        p = np.zeros_like(x)
        p[..., 0] = u[..., 1]
        p[..., 1] = u[..., 0]
        radial = (hp * g)[..., None] * u
        angular = h_over_r[..., None] * self.c1 * (p - 2.0 * q[..., None] * u)
        out = np.where(r[..., None] > 0, radial + angular, 0.0) + self.mu * x
        return out


def make_quadratic(d: int, mu: float, L: float, x_star=None) -> Quadratic:
    """Strongly convex quadratic with spectrum log-spaced on [mu, L].

    The diagonal form keeps the construction deterministic; log spacing
    spreads curvature across scales instead of clustering it at the ends.
    """
    if d < 1 or int(d) != d:
        raise InvalidParameterError(f"d must be a positive integer, got {d}")
    if not (0 < mu <= L):
        raise InvalidParameterError(f"need 0 < mu <= L, got mu={mu}, L={L}")
    eigenvalues = np.geomspace(mu, L, int(d)) if d > 1 else np.array([float(L)])
    if x_star is None:
        x_star = np.zeros(int(d))
    else:
        x_star = np.array(x_star, dtype=np.float64)
        if x_star.shape != (int(d),):
            raise InvalidParameterError(f"x_star must have shape ({d},), got {x_star.shape}")
        if not np.all(np.isfinite(x_star)):
            raise InvalidParameterError("x_star entries must be finite")
    return Quadratic(eigenvalues=eigenvalues, x_star=x_star)


def make_star_convex_1d() -> StarConvex1d:
    """The 1-d star-convex, non-convex benchmark |x|(1 - e^{-|x|})."""
    return StarConvex1d()


def make_least_squares(n: int, d: int, rng: np.random.Generator, noise_level: float) -> LeastSquares:
    """Random-design least squares with targets b = A x_true + noise.

    Rows of A are standard Gaussian; x_true is Gaussian; the label noise is
    noise_level * N(0, 1) per row, so noise_level = 0 makes the system
    interpolable and f* = 0. Rejects designs whose (1/n) A^T A has a
    smallest eigenvalue within 1e-10 of zero.
    """
    if n < 1 or d < 1 or n < d:
        raise InvalidParameterError(f"need n >= d >= 1, got n={n}, d={d}")
    if noise_level < 0:
        raise InvalidParameterError(f"noise_level must be nonnegative, got {noise_level}")
    design = rng.normal(size=(int(n), int(d)))
    x_true = rng.normal(size=int(d))
    targets = design @ x_true + noise_level * rng.normal(size=int(n))

    gram = design.T @ design / n
    eigs = np.linalg.eigvalsh(gram)
    if eigs[0] <= 1e-10:
        raise DegenerateDesignError(
            f"design is singular to working precision (lambda_min = {eigs[0]:.3e})"
        )
    x_star = np.linalg.solve(gram, design.T @ targets / n)
    resid = design @ x_star - targets
    f_star = float(0.5 * np.mean(resid * resid))
    return LeastSquares(
        design=design,
        targets=targets,
        x_star=x_star,
        f_star=f_star,
        L=float(eigs[-1]),
        mu=float(eigs[0]),
    )


def make_nonconvex_radial(d: int, mu: float) -> NonconvexRadial:
    """Non-convex radial objective; see NonconvexRadial for the construction."""
    if d < 2 or int(d) != d:
        raise InvalidParameterError(f"d must be an integer >= 2, got {d}")
    if mu < 0:
        raise InvalidParameterError(f"mu must be nonnegative, got {mu}")
    return NonconvexRadial(dim=int(d), mu=float(mu))
