"""Bundled randomized property suite for the discrete semigroups.

Each property is checked on small grids with seeded random fields so the
suite is fast and deterministic.  The same checks back the acceptance
tests; the CLI `verify` command prints one line per property.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .geometry import PeriodicGrid
from .model import ContactModel
from .variational import LaxParams, action_table, lax_step_with_info


@dataclass(frozen=True)
class PropertyResult:
    name: str
    passed: bool
    detail: str


def _random_field(grid: PeriodicGrid, rng: np.random.Generator) -> np.ndarray:
    """Smooth-ish random field from a few Fourier modes."""
    xs = grid.nodes
    out = np.zeros(grid.n)
    for k in range(1, 4):
        out += rng.normal(0, 1.0 / k) * np.sin(k * xs + rng.uniform(0, 2 * np.pi))
    return out + rng.normal(0, 0.3)


def _evolve(model, vals, params, steps, direction):
    for _ in range(steps):
        vals, _ = lax_step_with_info(model, vals, params, direction)
    return vals


def brute_force_layers(model: ContactModel, x0: float, u0: float,
                       params: LaxParams, steps: int,
                       direction: str = "backward") -> np.ndarray:
    """Independent oracle: exhaustive enumeration over candidate-offset paths.

    Walks every sequence of offsets in [-m, m]^steps, accumulating the
    explicit-in-u action along each path, and takes the nodewise optimum.
    Exponential in steps; only usable on tiny grids.
    """
    grid = params.grid
    n = grid.n
    xs = grid.nodes
    tau = params.tau
    i0 = grid.index_of(x0)
    sentinel = np.inf if direction == "backward" else -np.inf
    best = np.full((steps + 1, n), sentinel)
    best[0, i0] = u0
    offsets = range(-params.m, params.m + 1)
    for path in itertools.product(offsets, repeat=steps):
        idx = i0
        val = u0
        ok = True
        for j in path:
            arr = (idx + j) % n if direction == "backward" else (idx - j) % n
            v = j * grid.dx / tau
            L, _ = model.lagrangian(xs[arr], val, v)
            val = val + tau * L if direction == "backward" else val - tau * L
            idx = arr
            if abs(val) > params.u_clip:
                ok = False
                break
        if not ok:
            continue
        if direction == "backward":
            best[steps, idx] = min(best[steps, idx], val)
        else:
            best[steps, idx] = max(best[steps, idx], val)
    return best[steps]


def run_property_suite(trials: int = 25, seed: int = 0,
                       n: int = 64) -> list[PropertyResult]:
    rng = np.random.default_rng(seed)
    grid = PeriodicGrid(n)
    model = ContactModel.example_63(v_max=4.0)
    params = LaxParams(grid=grid, tau=1.0 / 16.0, v_max=4.0)
    params.validate(model)
    lam = model.u_lipschitz_bound()
    dx = grid.dx
    results = []

    def record(name, worst, bound):
        results.append(PropertyResult(
            name, worst <= bound, f"worst {worst:.3g} vs bound {bound:.3g}"))

    # u0-monotonicity of action layers
    worst = -np.inf
    for _ in range(trials):
        x0 = rng.uniform(-np.pi, np.pi)
        u0 = rng.uniform(-1, 1)
        delta = rng.uniform(0.05, 0.5)
        t1 = action_table(model, x0, u0, params, 4)
        t2 = action_table(model, x0, u0 + delta, params, 4)
        for k in range(1, 5):
            a, b = t1.layers[k], t2.layers[k]
            both = np.isfinite(a) & np.isfinite(b)
            if both.any():
                worst = max(worst, float(np.max(a[both] - b[both])))
    record("u0_monotonicity", worst, -1e-12)

    # Markov recomposition
    worst = 0.0
    for _ in range(trials):
        x0 = rng.uniform(-np.pi, np.pi)
        u0 = rng.uniform(-1, 1)
        k1, k2 = 2, 2
        table = action_table(model, x0, u0, params, k1 + k2)
        mid = table.layers[k1]
        recomposed = np.full(grid.n, np.inf)
        for i in np.flatnonzero(np.isfinite(mid)):
            sub = action_table(model, grid.nodes[i], float(mid[i]), params, k2)
            recomposed = np.minimum(recomposed, sub.layers[k2])
        direct = table.layers[k1 + k2]
        both = np.isfinite(direct) & np.isfinite(recomposed)
        if both.any():
            worst = max(worst, float(np.max(np.abs(direct[both] - recomposed[both]))))
    record("markov_recomposition", worst, 1e-9)

    # reversibility
    worst = 0.0
    for _ in range(trials):
        x0 = rng.uniform(-np.pi, np.pi)
        u0 = rng.uniform(-1, 1)
        steps = 16
        fwd_table = action_table(model, x0, u0, params, steps, "backward")
        final = fwd_table.layers[steps]
        finite = np.flatnonzero(np.isfinite(final))
        i = finite[rng.integers(len(finite))]
        back = action_table(model, grid.nodes[i], float(final[i]), params,
                            steps, "forward")
        val = back.layers[steps][grid.index_of(x0)]
        if np.isfinite(val):
            worst = max(worst, abs(val - u0))
    record("reversibility", worst, 5.0 * dx)

    # semigroup duality
    worst_lo, worst_hi = 0.0, 0.0
    steps = int(round(0.5 / params.tau))
    for _ in range(trials):
        phi = _random_field(grid, rng)
        up = _evolve(model, phi.copy(), params, steps, "forward")
        dn = _evolve(model, up, params, steps, "backward")
        worst_lo = max(worst_lo, float(np.max(phi - dn)))
        dn2 = _evolve(model, phi.copy(), params, steps, "backward")
        up2 = _evolve(model, dn2, params, steps, "forward")
        worst_hi = max(worst_hi, float(np.max(up2 - phi)))
    record("duality_minus_plus", worst_lo, 5.0 * dx)
    record("duality_plus_minus", worst_hi, 5.0 * dx)

    # expansiveness
    worst = 0.0
    t = 1.0
    steps = int(round(t / params.tau))
    for _ in range(trials):
        phi = _random_field(grid, rng)
        psi = _random_field(grid, rng)
        a = _evolve(model, phi.copy(), params, steps, "backward")
        b = _evolve(model, psi.copy(), params, steps, "backward")
        lhs = float(np.max(np.abs(a - b)))
        rhs = np.exp(lam * t) * float(np.max(np.abs(phi - psi))) + 10.0 * dx
        worst = max(worst, lhs - rhs)
    record("expansiveness", worst, 0.0)

    # brute-force path enumeration equivalence (tiny grid)
    small = PeriodicGrid(32)
    sp = LaxParams(grid=small, tau=0.3, v_max=2.0)
    sm = ContactModel.example_63(v_max=2.0)
    worst = 0.0
    for _ in range(max(3, trials // 5)):
        x0 = rng.uniform(-np.pi, np.pi)
        u0 = rng.uniform(-1, 1)
        steps = int(rng.integers(1, 5))
        table = action_table(sm, x0, u0, sp, steps)
        oracle = brute_force_layers(sm, x0, u0, sp, steps)
        a, b = table.layers[steps], oracle
        both = np.isfinite(a) & np.isfinite(b)
        agree_support = bool(np.all(np.isfinite(a) == np.isfinite(b)))
        worst = max(worst, float(np.max(np.abs(a[both] - b[both]))) if both.any() else 0.0)
        if not agree_support:
            worst = np.inf
    record("brute_force_equivalence", worst, 1e-12)

    return results
