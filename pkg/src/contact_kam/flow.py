"""Contact ODE flow: integration, fixed points, linearization, manifolds.

The state is z = (x, u, p) with

    dx/dt = dH/dp,
    du/dt = p * dH/dp - H,
    dp/dt = -dH/dx - dH/du * p.

x is wrapped to [-pi, pi) after every step; u and p are not wrapped.
Integration is fixed-step classical RK4 and aborts with BlowUpError once
|u| or |p| exceeds a configurable bound, which is the expected outcome for
divergent action minimizers.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import periodic_difference, wrap_angle
from .model import ContactModel

U_MAX_DEFAULT = 1e4


class BlowUpError(RuntimeError):
    """Orbit left the admissible box; carries the partial orbit."""

    def __init__(self, t: float, state: np.ndarray, orbit: "Orbit | None" = None):
        super().__init__(f"orbit blow-up at t={t:.6g}, state={state}")
        self.t = t
        self.state = state
        self.orbit = orbit


def vector_field(model: ContactModel, z) -> np.ndarray:
    """(dx/dt, du/dt, dp/dt) at z = (x, u, p)."""
    x, u, p = z
    hx, hu, hp = model.gradient(x, u, p)
    h = model.hamiltonian(x, u, p)
    return np.array([hp, p * hp - h, -hx - hu * p], dtype=float)


@dataclass(frozen=True)
class Orbit:
    """Uniform-step trajectory samples; x stored wrapped."""

    ts: np.ndarray = field(repr=False)
    states: np.ndarray = field(repr=False)      # shape (k, 3)
    h: float
    model: ContactModel = field(repr=False)

    @property
    def t_span(self) -> tuple[float, float]:
        return float(self.ts[0]), float(self.ts[-1])

    def energies(self) -> np.ndarray:
        x, u, p = self.states.T
        return np.asarray(self.model.hamiltonian(x, u, p), dtype=float)

    def tail(self, fraction: float = 0.2) -> np.ndarray:
        """Last `fraction` of the samples (the omega-limit proxy window)."""
        k = max(1, int(len(self.ts) * fraction))
        return self.states[-k:]

    def state_at(self, t: float) -> np.ndarray:
        """Linear interpolation in time (periodic in x)."""
        ts = self.ts
        if ts[-1] >= ts[0]:
            j = int(np.clip(np.searchsorted(ts, t) - 1, 0, len(ts) - 2))
        else:
            j = int(np.clip(np.searchsorted(-ts, -t) - 1, 0, len(ts) - 2))
        t0, t1 = ts[j], ts[j + 1]
        lam = 0.0 if t1 == t0 else (t - t0) / (t1 - t0)
        z0, z1 = self.states[j], self.states[j + 1]
        dx = periodic_difference(z1[0], z0[0])
        out = z0 + lam * (z1 - z0)
        out[0] = wrap_angle(z0[0] + lam * dx)
        return out


_TWO_PI = 2.0 * math.pi


def integrate_orbit(model: ContactModel, z0, t_span: tuple[float, float],
                    h: float = 1e-3, u_max: float = U_MAX_DEFAULT,
                    store_every: int = 1) -> Orbit:
    """Fixed-step RK4 from z0 over t_span; negative spans integrate backward."""
    t0, t1 = float(t_span[0]), float(t_span[1])
    if h <= 0:
        raise ValueError("step size must be positive")
    if t1 == t0:
        raise ValueError("empty time span")
    sgn = 1.0 if t1 > t0 else -1.0
    n_steps = int(round(abs(t1 - t0) / h))
    rhs = model.flow_rhs()
    x = (float(z0[0]) + math.pi) % _TWO_PI - math.pi
    u = float(z0[1])
    p = float(z0[2])
    hs = sgn * h
    ts = [t0]
    states = [(x, u, p)]
    t = t0
    for k in range(n_steps):
        ax, au, ap = rhs(x, u, p)
        bx, bu, bp = rhs(x + 0.5 * hs * ax, u + 0.5 * hs * au, p + 0.5 * hs * ap)
        cx, cu, cp = rhs(x + 0.5 * hs * bx, u + 0.5 * hs * bu, p + 0.5 * hs * bp)
        dx, du, dp = rhs(x + hs * cx, u + hs * cu, p + hs * cp)
        x = x + (hs / 6.0) * (ax + 2.0 * bx + 2.0 * cx + dx)
        u = u + (hs / 6.0) * (au + 2.0 * bu + 2.0 * cu + du)
        p = p + (hs / 6.0) * (ap + 2.0 * bp + 2.0 * cp + dp)
        x = (x + math.pi) % _TWO_PI - math.pi
        t = t0 + sgn * (k + 1) * h
        if not (abs(u) <= u_max and abs(p) <= u_max and math.isfinite(x)):
            partial = Orbit(np.asarray(ts), np.asarray(states), h, model)
            raise BlowUpError(t, np.array([x, u, p]), partial)
        if (k + 1) % store_every == 0 or k == n_steps - 1:
            ts.append(t)
            states.append((x, u, p))
    return Orbit(np.asarray(ts), np.asarray(states), h, model)


def energy_transport_residual(orbit: Orbit) -> float:
    """Max defect of H(z(t)) = H(z0) * exp(-int dH/du ds) along the orbit.

    The integral uses the trapezoid rule on the stored samples.
    """
    x, u, p = orbit.states.T
    hu = np.asarray(orbit.model.gradient(x, u, p)[1], dtype=float)
    H = orbit.energies()
    ts = orbit.ts
    integral = np.concatenate([[0.0], np.cumsum(0.5 * (hu[1:] + hu[:-1]) * np.diff(ts))])
    predicted = H[0] * np.exp(-integral)
    return float(np.max(np.abs(H - predicted)))


# -- fixed points -----------------------------------------------------------


@dataclass(frozen=True)
class FixedPointInfo:
    """A polished fixed point with its linearization data.

    `jacobian` lists the rate equations in the order (dx/dt, dp/dt, du/dt)
    against state columns (x, u, p); `eigenvalues` are the roots of its
    characteristic cubic solved in closed form.  `shell_eigenvalues` are the
    two eigenvalues of the dynamics restricted to the tangent plane of the
    energy shell H = 0 (H is zero at any fixed point), computed from the
    state-ordered Jacobian.
    """

    point: np.ndarray
    jacobian: np.ndarray
    eigenvalues: tuple[complex, complex, complex]
    stable_dim: int
    unstable_dim: int
    residual: float
    hyperbolic: bool
    isolated: bool
    shell_eigenvalues: tuple[complex, complex]
    shell_basis: np.ndarray = field(repr=False)   # 3x2, columns span ker dH

    @property
    def x(self) -> float:
        return float(self.point[0])

    @property
    def u(self) -> float:
        return float(self.point[1])


def cubic_roots(a2: float, a1: float, a0: float) -> tuple[complex, complex, complex]:
    """Roots of s^3 + a2 s^2 + a1 s + a0 via Cardano (trigonometric branch).

    Deterministic ordering: ascending real part, then ascending imaginary.
    """
    p = a1 - a2 * a2 / 3.0
    q = 2.0 * a2**3 / 27.0 - a2 * a1 / 3.0 + a0
    shift = -a2 / 3.0
    disc = (q / 2.0) ** 2 + (p / 3.0) ** 3
    if abs(p) < 1e-300 and abs(q) < 1e-300:
        roots = [complex(shift)] * 3
    elif disc > 0:
        sq = math.sqrt(disc)
        alpha = np.cbrt(-q / 2.0 + sq)
        beta = np.cbrt(-q / 2.0 - sq)
        r1 = alpha + beta
        re = -r1 / 2.0
        im = (alpha - beta) * math.sqrt(3.0) / 2.0
        roots = [complex(r1 + shift), complex(re + shift, im), complex(re + shift, -im)]
    else:
        # three real roots: trigonometric form
        r = math.sqrt(-p**3 / 27.0)
        phi = math.acos(max(-1.0, min(1.0, -q / (2.0 * r))))
        m = 2.0 * math.sqrt(-p / 3.0)
        roots = [complex(m * math.cos((phi + 2.0 * math.pi * k) / 3.0) + shift)
                 for k in range(3)]
    roots.sort(key=lambda s: (s.real, s.imag))
    return tuple(roots)


def _jacobian_blocks(model: ContactModel, z: np.ndarray) -> dict[str, np.ndarray]:
    x, u, p = z
    hx, hu, hp = model.gradient(x, u, p)
    s = model.second_partials(x, u, p)
    row_x = np.array([s["xp"], s["up"], s["pp"]], dtype=float)
    row_p = np.array([-s["xx"] - s["xu"] * p,
                      -s["xu"] - s["uu"] * p,
                      -s["xp"] - hu - s["up"] * p], dtype=float)
    row_u = np.array([p * s["xp"] - hx,
                      p * s["up"] - hu,
                      p * s["pp"]], dtype=float)
    return {"x": row_x, "p": row_p, "u": row_u, "grad": np.array([hx, hu, hp])}


def jacobian_rate_ordered(model: ContactModel, z) -> np.ndarray:
    """Rows (dx/dt, dp/dt, du/dt), columns (x, u, p)."""
    b = _jacobian_blocks(model, np.asarray(z, dtype=float))
    return np.vstack([b["x"], b["p"], b["u"]])


def jacobian_state_ordered(model: ContactModel, z) -> np.ndarray:
    """Rows (dx/dt, du/dt, dp/dt), columns (x, u, p): the state Jacobian."""
    b = _jacobian_blocks(model, np.asarray(z, dtype=float))
    return np.vstack([b["x"], b["u"], b["p"]])


def jacobian_fd(model: ContactModel, z, h: float = 1e-6) -> np.ndarray:
    """Finite-difference Jacobian in the rate order (dx/dt, dp/dt, du/dt)."""
    z = np.asarray(z, dtype=float)
    cols = []
    for j in range(3):
        dz = np.zeros(3)
        dz[j] = h
        fp = vector_field(model, z + dz)
        fm = vector_field(model, z - dz)
        cols.append((fp - fm) / (2.0 * h))
    state = np.array(cols).T          # rows (x., u., p.)
    return state[[0, 2, 1], :]        # reorder rows to (x., p., u.)


def linearize_fixed_point(model: ContactModel, z_star,
                          isolated: bool = True) -> FixedPointInfo:
    """Linearization data at a (near-)fixed point."""
    z = np.asarray(z_star, dtype=float)
    f = vector_field(model, z)
    residual = float(np.max(np.abs(f)))
    J = jacobian_rate_ordered(model, z)
    a2 = -np.trace(J)
    a1 = (J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
          + J[0, 0] * J[2, 2] - J[0, 2] * J[2, 0]
          + J[1, 1] * J[2, 2] - J[1, 2] * J[2, 1])
    a0 = -float(np.linalg.det(J))
    eigs = cubic_roots(float(a2), float(a1), float(a0))
    stable = sum(1 for s in eigs if s.real < -1e-8)
    unstable = sum(1 for s in eigs if s.real > 1e-8)
    hyperbolic = stable + unstable == 3

    # shell-restricted spectrum from the state-ordered Jacobian
    grad = _jacobian_blocks(model, z)["grad"]
    gn = np.linalg.norm(grad)
    if gn < 1e-12:
        basis = np.eye(3)[:, :2]
    else:
        nrm = grad / gn
        idx = int(np.argmax(np.abs(nrm)))
        cand = [e for j, e in enumerate(np.eye(3)) if j != idx]
        b1 = cand[0] - np.dot(cand[0], nrm) * nrm
        b1 /= np.linalg.norm(b1)
        b2 = cand[1] - np.dot(cand[1], nrm) * nrm - np.dot(cand[1], b1) * b1
        b2 /= np.linalg.norm(b2)
        basis = np.column_stack([b1, b2])
    Js = jacobian_state_ordered(model, z)
    A = basis.T @ Js @ basis
    tr, det = np.trace(A), np.linalg.det(A)
    disc = cmath.sqrt(tr * tr - 4.0 * det)
    shell = (0.5 * (tr - disc), 0.5 * (tr + disc))

    return FixedPointInfo(point=z, jacobian=J, eigenvalues=eigs,
                          stable_dim=stable, unstable_dim=unstable,
                          residual=residual, hyperbolic=hyperbolic,
                          isolated=isolated, shell_eigenvalues=shell,
                          shell_basis=basis)


def _newton_polish(model: ContactModel, z0: np.ndarray, tol: float = 1e-13,
                   max_iter: int = 60) -> np.ndarray | None:
    z = np.asarray(z0, dtype=float)
    for _ in range(max_iter):
        f = vector_field(model, z)
        if np.max(np.abs(f)) < tol:
            return z
        J = jacobian_state_ordered(model, z)
        try:
            step, *_ = np.linalg.lstsq(J, -f, rcond=None)
        except np.linalg.LinAlgError:
            return None
        scale = 1.0
        base = np.max(np.abs(f))
        for _ in range(30):
            trial = z + scale * step
            trial[0] = wrap_angle(trial[0])
            if np.max(np.abs(vector_field(model, trial))) < base:
                z = trial
                break
            scale *= 0.5
        else:
            return None
    f = vector_field(model, z)
    return z if np.max(np.abs(f)) < 1e-8 else None


def find_fixed_points(model: ContactModel, coarse_n: int = 64,
                      u_range: tuple[float, float] = (-4.0, 4.0),
                      dedup_tol: float = 1e-6) -> list[FixedPointInfo]:
    """Scan a coarse (x, u) lattice at p = 0 and polish seeds by Newton.

    Seeds are lattice cells where both H and dH/dx change sign at p = 0.
    If the polished points form a near-continuum along x, the family is
    flagged non-isolated on every member.
    """
    xs = np.linspace(-np.pi, np.pi, coarse_n, endpoint=False)
    us = np.linspace(u_range[0], u_range[1], coarse_n)
    X, U = np.meshgrid(xs, us, indexing="ij")
    H = np.asarray(model.hamiltonian(X, U, 0.0), dtype=float)
    Hx = np.asarray(model.gradient(X, U, 0.0)[0], dtype=float) * np.ones_like(H)

    degenerate_hx = bool(np.max(np.abs(Hx)) < 1e-12)
    seeds = []
    for i in range(coarse_n):
        i2 = (i + 1) % coarse_n
        for j in range(coarse_n - 1):
            hs = np.array([H[i, j], H[i2, j], H[i, j + 1], H[i2, j + 1]])
            gs = np.array([Hx[i, j], Hx[i2, j], Hx[i, j + 1], Hx[i2, j + 1]])
            h_change = hs.min() <= 0.0 <= hs.max()
            g_change = degenerate_hx or (gs.min() <= 0.0 <= gs.max())
            if h_change and g_change:
                xm = wrap_angle(xs[i] + 0.5 * (2 * np.pi / coarse_n))
                um = 0.5 * (us[j] + us[j + 1])
                seeds.append(np.array([xm, um, 0.0]))

    found: list[np.ndarray] = []
    for seed in seeds:
        z = _newton_polish(model, seed)
        if z is None:
            continue
        if any(periodic_difference(z[0], f[0]) ** 2 + (z[1] - f[1]) ** 2
               + (z[2] - f[2]) ** 2 < dedup_tol**2 for f in found):
            continue
        found.append(z)
    found.sort(key=lambda z: (z[0], z[1]))

    # non-isolation heuristic: many points spaced like the scan lattice
    isolated = True
    if len(found) >= coarse_n // 2:
        gaps = np.diff(sorted(wrap_angle(z[0]) for z in found))
        if len(gaps) and np.median(gaps) < 4.0 * np.pi / coarse_n:
            isolated = False

    return [linearize_fixed_point(model, z, isolated=isolated) for z in found]


# -- invariant manifolds ------------------------------------------------------


def _real_eigenvector(J: np.ndarray, s: float) -> np.ndarray:
    A = J - s * np.eye(3)
    _, _, vh = np.linalg.svd(A)
    v = vh[-1]
    k = int(np.argmax(np.abs(v)))
    if v[k] < 0:
        v = -v
    return v / np.linalg.norm(v)


def trace_invariant_manifold(model: ContactModel, info: FixedPointInfo,
                             direction: str, branch: int = +1,
                             offset: float = 1e-4, t_max: float = 20.0,
                             h: float = 1e-3, h_project: bool = True,
                             u_max: float = U_MAX_DEFAULT) -> Orbit:
    """Trace a 1-D invariant manifold branch from a hyperbolic fixed point.

    Seeds at z* +/- offset * v where v is the unit real eigenvector of the
    requested sign; unstable directions integrate forward, stable backward.
    With h_project the eigenvector is first projected onto the tangent plane
    of the energy shell and the seed's u-coordinate corrected so H = 0 holds
    exactly (the shell is flow invariant, so the trace then stays on it).
    """
    if direction not in ("stable", "unstable"):
        raise ValueError("direction must be 'stable' or 'unstable'")
    want_positive = direction == "unstable"
    real_eigs = [s.real for s in info.eigenvalues
                 if abs(s.imag) < 1e-10 and (s.real > 1e-8 if want_positive
                                             else s.real < -1e-8)]
    if not real_eigs:
        raise ValueError(f"no real {direction} eigenvalue at this fixed point")
    s = max(real_eigs, key=abs)
    # eigenvector of the state-ordered Jacobian so vector components align
    # with (x, u, p)
    v = _real_eigenvector(jacobian_state_ordered(model, info.point), s)

    if h_project:
        grad = np.asarray(model.gradient(*info.point), dtype=float)
        gn = np.linalg.norm(grad)
        if gn > 1e-12:
            nrm = grad / gn
            v = v - np.dot(v, nrm) * nrm
            if np.linalg.norm(v) < 1e-12:
                raise ValueError("eigenvector is normal to the energy shell")
            v /= np.linalg.norm(v)

    seed = info.point + branch * offset * v
    if h_project:
        # Newton-correct u so that H(seed) = 0 exactly
        for _ in range(40):
            hval = float(model.hamiltonian(*seed))
            hu = float(model.gradient(*seed)[1])
            if abs(hval) < 1e-14 or abs(hu) < 1e-12:
                break
            seed[1] -= hval / hu
    span = (0.0, t_max) if want_positive else (0.0, -t_max)
    return integrate_orbit(model, seed, span, h=h, u_max=u_max)


def phase_distance(a, b) -> float:
    """max(|dx|_periodic, |du|, |dp|) between two phase points."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(max(abs(periodic_difference(a[0], b[0])),
                     abs(a[1] - b[1]), abs(a[2] - b[2])))
