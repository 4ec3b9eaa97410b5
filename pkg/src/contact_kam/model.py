"""Contact Hamiltonians H(x, u, p) on the circle and their Legendre duals.

Two families are supported:

* separable quadratic, H = alpha*p^2 + V(x) + lambda(x)*u, with closed-form
  gradients and Legendre transform;
* general, H given by an expression in (x, u, p); gradients come from
  symbolic differentiation and the Legendre transform solves dH/dp = v with
  a bisection-safeguarded Newton iteration.

The u-Lipschitz bound (max |dH/du| over a sampling lattice) drives the
time-step restriction of the variational schemes.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from .geometry import ScalarField


class LegendreError(ArithmeticError):
    """Newton iteration for the velocity-momentum inversion failed."""


@dataclass(frozen=True)
class SubsolutionReport:
    max_residual: float
    violating_nodes: np.ndarray
    passed: bool


@dataclass(frozen=True)
class ContactModel:
    """A contact Hamiltonian with cached callables and validity data."""

    kind: str                     # "separable_quadratic" | "general"
    alpha: float = 1.0
    potential: ex.Expression | None = None       # V(x)
    rate: ex.Expression | None = None            # lambda(x)
    hamiltonian_expr: ex.Expression | None = None  # H(x,u,p) for kind="general"
    v_max: float = 8.0
    u_bound: float = 4.0          # lattice half-width in u for validation
    p_bound: float = 4.0          # lattice half-width in p for validation
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    # -- constructors ------------------------------------------------------

    @classmethod
    def separable_quadratic(cls, alpha: float, potential: str | ex.Expression,
                            rate: str | ex.Expression, v_max: float = 8.0) -> "ContactModel":
        if alpha <= 0:
            raise ValueError("stiffness alpha must be positive")
        V = ex.parse_expression(potential) if isinstance(potential, str) else potential
        lam = ex.parse_expression(rate) if isinstance(rate, str) else rate
        if not ex.free_variables(V) <= {"x"}:
            raise ValueError("potential may depend on x only")
        if not ex.free_variables(lam) <= {"x"}:
            raise ValueError("rate may depend on x only")
        return cls(kind="separable_quadratic", alpha=float(alpha),
                   potential=V, rate=lam, v_max=float(v_max))

    @classmethod
    def general(cls, hamiltonian: str | ex.Expression, v_max: float = 8.0) -> "ContactModel":
        H = ex.parse_expression(hamiltonian) if isinstance(hamiltonian, str) else hamiltonian
        model = cls(kind="general", hamiltonian_expr=H, v_max=float(v_max))
        model.validate_convexity()
        return model

    @classmethod
    def example_63(cls, v_max: float = 8.0) -> "ContactModel":
        """H = p^2 + sin(x)*u - 1/4."""
        return cls.separable_quadratic(1.0, "-0.25", "sin(x)", v_max=v_max)

    @classmethod
    def constant_rate(cls, rate: float = 1.0, v_max: float = 8.0) -> "ContactModel":
        """H = p^2 - 1/4 + rate*u; unique stationary solution u = 1/(4*rate)."""
        return cls.separable_quadratic(1.0, "-0.25", repr(float(rate)), v_max=v_max)

    @classmethod
    def classical(cls, alpha: float = 1.0, potential: str = "0", v_max: float = 8.0) -> "ContactModel":
        """u-independent Hamiltonian (lambda = 0)."""
        return cls.separable_quadratic(alpha, potential, "0", v_max=v_max)

    # -- cached symbolic derivatives ---------------------------------------

    def _d(self, name: str) -> ex.Expression:
        cache = self._cache
        if name not in cache:
            base: dict[str, ex.Expression] = {}
            if self.kind == "general":
                base["H"] = self.hamiltonian_expr
            else:
                base["V"] = self.potential
                base["lam"] = self.rate
            tree, *vars_ = name.split("_")
            node = cache.get(tree) or base[tree]
            for v in vars_:
                node = ex.differentiate(node, v)
            cache[name] = node
        return cache[name]

    # -- evaluation --------------------------------------------------------

    def potential_at(self, x):
        return ex.evaluate(self.potential, x=x) * np.ones_like(np.asarray(x, dtype=float))

    def rate_at(self, x):
        return ex.evaluate(self.rate, x=x) * np.ones_like(np.asarray(x, dtype=float))

    def hamiltonian(self, x, u, p):
        """H(x, u, p)."""
        if self.kind == "separable_quadratic":
            return self.alpha * np.asarray(p) ** 2 + self.potential_at(x) + self.rate_at(x) * u
        return ex.evaluate(self.hamiltonian_expr, x=x, u=u, p=p)

    def gradient(self, x, u, p):
        """(dH/dx, dH/du, dH/dp)."""
        if self.kind == "separable_quadratic":
            dV = ex.evaluate(self._d("V_x"), x=x)
            dlam = ex.evaluate(self._d("lam_x"), x=x)
            ones = np.ones_like(np.asarray(x, dtype=float))
            return (dV * ones + dlam * u * ones,
                    self.rate_at(x),
                    2.0 * self.alpha * np.asarray(p) * ones)
        return (ex.evaluate(self._d("H_x"), x=x, u=u, p=p),
                ex.evaluate(self._d("H_u"), x=x, u=u, p=p),
                ex.evaluate(self._d("H_p"), x=x, u=u, p=p))

    def gradient_fd(self, x, u, p, h: float = 1e-6):
        """Central-difference gradient, for cross-checking the symbolic one."""
        H = self.hamiltonian
        return ((H(x + h, u, p) - H(x - h, u, p)) / (2 * h),
                (H(x, u + h, p) - H(x, u - h, p)) / (2 * h),
                (H(x, u, p + h) - H(x, u, p - h)) / (2 * h))

    def second_partials(self, x, u, p):
        """Dict of the six second partials of H."""
        if self.kind == "separable_quadratic":
            ones = np.ones_like(np.asarray(x, dtype=float))
            return {
                "xx": ex.evaluate(self._d("V_x_x"), x=x) * ones
                + ex.evaluate(self._d("lam_x_x"), x=x) * u * ones,
                "xu": ex.evaluate(self._d("lam_x"), x=x) * ones,
                "xp": 0.0 * ones,
                "uu": 0.0 * ones,
                "up": 0.0 * ones,
                "pp": 2.0 * self.alpha * ones,
            }
        env = dict(x=x, u=u, p=p)
        return {
            "xx": ex.evaluate(self._d("H_x_x"), **env),
            "xu": ex.evaluate(self._d("H_x_u"), **env),
            "xp": ex.evaluate(self._d("H_x_p"), **env),
            "uu": ex.evaluate(self._d("H_u_u"), **env),
            "up": ex.evaluate(self._d("H_u_p"), **env),
            "pp": ex.evaluate(self._d("H_p_p"), **env),
        }

    def flow_rhs(self):
        """Compiled scalar callable rhs(x, u, p) -> (dx/dt, du/dt, dp/dt).

        Agrees with the interpreted gradient path to round-off; used by the
        orbit integrator where call overhead dominates.
        """
        if "rhs" in self._cache:
            return self._cache["rhs"]
        if self.kind == "separable_quadratic":
            V = ex.compile_fn(self.potential)
            dV = ex.compile_fn(self._d("V_x"))
            lam = ex.compile_fn(self.rate)
            dlam = ex.compile_fn(self._d("lam_x"))
            alpha = self.alpha

            def rhs(x, u, p):
                lam_x = lam(x, u, p)
                h = alpha * p * p + V(x, u, p) + lam_x * u
                hp = 2.0 * alpha * p
                return (hp, p * hp - h, -(dV(x, u, p) + dlam(x, u, p) * u) - lam_x * p)
        else:
            H = ex.compile_fn(self.hamiltonian_expr)
            Hx = ex.compile_fn(self._d("H_x"))
            Hu = ex.compile_fn(self._d("H_u"))
            Hp = ex.compile_fn(self._d("H_p"))

            def rhs(x, u, p):
                hp = Hp(x, u, p)
                return (hp, p * hp - H(x, u, p), -Hx(x, u, p) - Hu(x, u, p) * p)

        self._cache["rhs"] = rhs
        return rhs

    # -- Legendre transform --------------------------------------------------

    def lagrangian(self, x, u, v):
        """L(x, u, v) = sup_p (p*v - H) and the maximizing momentum.

        Returns a pair (L, p_star); accepts scalars or broadcastable arrays.
        """
        if self.kind == "separable_quadratic":
            x = np.asarray(x, dtype=float)
            v = np.asarray(v, dtype=float)
            p_star = v / (2.0 * self.alpha)
            L = v**2 / (4.0 * self.alpha) - self.potential_at(x) - self.rate_at(x) * u
            if L.ndim == 0:
                return float(L), float(p_star)
            return L, p_star
        return self._legendre_newton(x, u, v)

    def _legendre_newton(self, x, u, v, tol: float = 1e-12, max_iter: int = 60):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        u = np.atleast_1d(np.asarray(u, dtype=float)) * np.ones_like(x)
        v = np.atleast_1d(np.asarray(v, dtype=float)) * np.ones_like(x)
        scalar = x.size == 1 and np.isscalar(v) is False

        # bracket [lo, hi] with dH/dp(lo) <= v <= dH/dp(hi); expand by doubling
        hi = np.maximum(self.p_bound, 1.0) * np.ones_like(x)
        lo = -hi
        for _ in range(60):
            too_low = ex.evaluate(self._d("H_p"), x=x, u=u, p=hi) < v
            too_high = ex.evaluate(self._d("H_p"), x=x, u=u, p=lo) > v
            if not (np.any(too_low) or np.any(too_high)):
                break
            hi = np.where(too_low, 2.0 * hi, hi)
            lo = np.where(too_high, 2.0 * lo, lo)
        else:
            raise LegendreError("could not bracket dH/dp = v; superlinearity suspect")

        p = np.zeros_like(x)
        for _ in range(max_iter):
            g = ex.evaluate(self._d("H_p"), x=x, u=u, p=p) - v
            lo = np.where(g < 0, p, lo)
            hi = np.where(g > 0, p, hi)
            gp = ex.evaluate(self._d("H_p_p"), x=x, u=u, p=p)
            with np.errstate(divide="ignore", invalid="ignore"):
                step = np.where(gp > 0, g / np.where(gp > 0, gp, 1.0), 0.0)
            p_new = p - step
            bad = (p_new <= lo) | (p_new >= hi) | ~np.isfinite(p_new) | (gp <= 0)
            p_new = np.where(bad, 0.5 * (lo + hi), p_new)
            if np.max(np.abs(p_new - p)) < tol:
                p = p_new
                break
            p = p_new
        else:
            g = ex.evaluate(self._d("H_p"), x=x, u=u, p=p) - v
            if np.max(np.abs(g)) > 1e-8:
                raise LegendreError("Newton did not converge for dH/dp = v")
        L = p * v - self.hamiltonian(x, u, p)
        if L.size == 1:
            return float(L[0]), float(p[0])
        return L, p

    # -- validity ------------------------------------------------------------

    def u_lipschitz_bound(self, lattice: int = 1024) -> float:
        """Max of |dH/du| over a sampling lattice (the (H3) constant)."""
        if "Lambda" in self._cache:
            return self._cache["Lambda"]
        if self.kind == "separable_quadratic":
            xs = np.linspace(-np.pi, np.pi, lattice, endpoint=False)
            lam = np.abs(self.rate_at(xs))
            bound = float(np.max(lam))
        else:
            m = max(2, round(lattice ** (1.0 / 3.0)))
            xs = np.linspace(-np.pi, np.pi, m, endpoint=False)
            us = np.linspace(-self.u_bound, self.u_bound, m)
            ps = np.linspace(-self.p_bound, self.p_bound, m)
            X, U, P = np.meshgrid(xs, us, ps, indexing="ij")
            bound = float(np.max(np.abs(
                ex.evaluate(self._d("H_u"), x=X, u=U, p=P))))
        self._cache["Lambda"] = bound
        return bound

    def validate_convexity(self, lattice: int = 512) -> bool:
        """Sample d2H/dp2 > 0 (condition of fiberwise convexity); warn if violated."""
        if self.kind == "separable_quadratic":
            return self.alpha > 0
        m = max(2, round(lattice ** (1.0 / 3.0)))
        xs = np.linspace(-np.pi, np.pi, m, endpoint=False)
        us = np.linspace(-self.u_bound, self.u_bound, m)
        ps = np.linspace(-self.p_bound, self.p_bound, m)
        X, U, P = np.meshgrid(xs, us, ps, indexing="ij")
        hpp = np.asarray(ex.evaluate(self._d("H_p_p"), x=X, u=U, p=P))
        ok = bool(np.all(hpp > 0))
        if not ok:
            warnings.warn("sampled d2H/dp2 is not positive definite; "
                          "convexity assumption violated on the lattice",
                          stacklevel=2)
        return ok


def subsolution_check(model: ContactModel, fld: ScalarField,
                      tol: float | None = None, strict: bool = False) -> SubsolutionReport:
    """Check H(x_i, phi_i, g) <= tol at the better of the two one-sided slopes.

    A node passes when min over its backward/forward difference quotient g of
    H(x_i, phi_i, g) stays below tol (strictly below zero when strict).
    """
    grid = fld.grid
    if tol is None:
        tol = grid.dx
    v = fld.values
    xs = grid.nodes
    fwd = (np.roll(v, -1) - v) / grid.dx
    bwd = (v - np.roll(v, 1)) / grid.dx
    h_f = np.asarray(model.hamiltonian(xs, v, fwd), dtype=float)
    h_b = np.asarray(model.hamiltonian(xs, v, bwd), dtype=float)
    h = np.minimum(h_f, h_b)
    if strict:
        bad = h >= 0.0
    else:
        bad = h > tol
    return SubsolutionReport(max_residual=float(np.max(h)),
                             violating_nodes=np.flatnonzero(bad),
                             passed=not bool(np.any(bad)))


def strict_subsolution_ex63(grid, beta: float = 0.2) -> ScalarField:
    """The field beta*sin(x) with beta in (0, 1/4): a strict subsolution of
    the bundled model equation, H(x, beta sin x, beta cos x) <= beta - 1/4."""
    return ScalarField(grid, beta * np.sin(grid.nodes))


def halfsine_subsolution_ex63(grid) -> ScalarField:
    """Piecewise field: sin(x)/2 + 1/4 on [-pi, 0], constant 1/4 on [0, pi]."""
    xs = grid.nodes
    vals = np.where(xs <= 0.0, 0.5 * np.sin(xs) + 0.25, 0.25)
    return ScalarField(grid, vals)
