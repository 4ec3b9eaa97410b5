"""Discrete Lax-Oleinik semigroups, weak KAM limits and action tables.

One backward step of length tau maps a field phi to

    out_i = min_j { phi_{i-j} + tau * L(x_i, phi_{i-j}, j*dx/tau) },

with integer offsets j in [-m, m], m = ceil(v_max*tau/dx); the forward step
mirrors with a max and a sign flip.  Departure values are nodal (no
interpolation), L is evaluated at the arrival node and at the departure
value of the field (explicit in u), and ties break on the smallest |j|,
then the smaller j.  Minimization over the fixed candidate list makes the
scheme a monotone discrete dynamic program: compositions satisfy the exact
Markov identity and equal brute-force path enumeration bit for bit.

Consistency requires the hop-velocity spacing dx/tau to be small, so tau is
chosen well above dx; the step stays a sup-norm contraction in u as long as
tau times the u-Lipschitz bound stays below one half.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import PeriodicGrid, ScalarField
from .model import ContactModel

U_CLIP_DEFAULT = 1e4


@dataclass(frozen=True)
class LaxParams:
    """Discretization data for one semigroup step on a given grid."""

    grid: PeriodicGrid
    tau: float
    v_max: float = 8.0
    u_clip: float = U_CLIP_DEFAULT

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.m < 1:
            raise ValueError("velocity window too small: no candidate offsets")

    @property
    def m(self) -> int:
        return int(np.ceil(self.v_max * self.tau / self.grid.dx))

    @property
    def offsets(self) -> np.ndarray:
        """Candidate offsets in tie-break order: 0, -1, +1, -2, +2, ..."""
        out = [0]
        for k in range(1, self.m + 1):
            out += [-k, k]
        return np.array(out, dtype=int)

    def velocity(self, j) -> np.ndarray:
        return np.asarray(j) * self.grid.dx / self.tau

    def validate(self, model: ContactModel) -> None:
        lam = model.u_lipschitz_bound()
        if self.tau * lam > 0.5 + 1e-12:
            raise ValueError(
                f"tau*Lambda = {self.tau * lam:.3g} exceeds 1/2; shrink tau")

    @classmethod
    def for_model(cls, model: ContactModel, grid: PeriodicGrid, tau: float,
                  u_clip: float = U_CLIP_DEFAULT) -> "LaxParams":
        params = cls(grid=grid, tau=tau, v_max=model.v_max, u_clip=u_clip)
        params.validate(model)
        return params


@dataclass(frozen=True)
class StepInfo:
    """Diagnostics for one semigroup step."""

    clipped: int            # nodes clamped at +-u_clip
    edge_hits: int          # nodes whose argmin sat on the window edge
    sup_change: float


def _candidate_values(model: ContactModel, values: np.ndarray,
                      params: LaxParams, direction: str) -> np.ndarray:
    """Stacked candidate values, shape (len(offsets), n), in tie-break order."""
    xs = params.grid.nodes
    tau = params.tau
    cands = []
    for j in params.offsets:
        v = float(params.velocity(j))
        dep = np.roll(values, j) if direction == "backward" else np.roll(values, -j)
        finite = np.isfinite(dep)
        dep_safe = np.where(finite, dep, 0.0)
        L, _ = model.lagrangian(xs, dep_safe, v)
        if direction == "backward":
            cand = dep_safe + tau * np.asarray(L)
            cand = np.where(finite, cand, np.inf)
        else:
            cand = dep_safe - tau * np.asarray(L)
            cand = np.where(finite, cand, -np.inf)
        cands.append(cand)
    return np.vstack(cands)


def lax_step_with_info(model: ContactModel, values: np.ndarray,
                       params: LaxParams, direction: str = "backward",
                       with_argmin: bool = False):
    """One semigroup step on raw nodal values (which may hold +-inf sentinels).

    Returns (new_values, StepInfo) and, with with_argmin, the chosen offset
    per node (np.argmin/argmax return the first optimum, which matches the
    tie-break order of `offsets`).
    """
    if direction not in ("backward", "forward"):
        raise ValueError("direction must be 'backward' or 'forward'")
    cands = _candidate_values(model, values, params, direction)
    if direction == "backward":
        sel = np.argmin(cands, axis=0)
    else:
        sel = np.argmax(cands, axis=0)
    out = np.take_along_axis(cands, sel[None, :], axis=0)[0]
    offsets = params.offsets
    chosen = offsets[sel]
    edge_hits = int(np.sum((np.abs(chosen) == params.m) & np.isfinite(out)))
    finite = np.isfinite(out)
    clipped = int(np.sum(np.abs(out[finite]) > params.u_clip))
    clipped_vals = np.where(finite, np.clip(out, -params.u_clip, params.u_clip), out)
    prev_finite = np.isfinite(values)
    both = finite & prev_finite
    sup = float(np.max(np.abs(clipped_vals[both] - values[both]))) if both.any() else np.inf
    info = StepInfo(clipped=clipped, edge_hits=edge_hits, sup_change=sup)
    if with_argmin:
        return clipped_vals, info, chosen
    return clipped_vals, info


def lax_step(model: ContactModel, phi: ScalarField, params: LaxParams,
             direction: str = "backward") -> ScalarField:
    """One discrete Lax-Oleinik step applied to a scalar field."""
    out, _ = lax_step_with_info(model, phi.values, params, direction)
    return ScalarField(phi.grid, out)


def semigroup_evolve(model: ContactModel, phi: ScalarField, params: LaxParams,
                     t_final: float, direction: str = "backward",
                     snapshot_every: float | None = None
                     ) -> list[tuple[float, ScalarField]]:
    """Iterate steps until t_final, collecting (t, field) snapshots.

    The t = 0 snapshot and the final one are always present; intermediate
    snapshots land on multiples of snapshot_every.  The final time is within
    one step of t_final.
    """
    if t_final <= 0:
        raise ValueError("t_final must be positive")
    n_steps = max(1, int(round(t_final / params.tau)))
    stride = (max(1, int(round(snapshot_every / params.tau)))
              if snapshot_every else n_steps)
    snaps = [(0.0, phi)]
    vals = phi.values
    for k in range(1, n_steps + 1):
        vals, _ = lax_step_with_info(model, vals, params, direction)
        if k % stride == 0 or k == n_steps:
            snaps.append((k * params.tau, ScalarField(phi.grid, vals)))
    return snaps


@dataclass(frozen=True)
class WeakKamResult:
    """Long-time limit of the semigroup from a given initial field."""

    field: ScalarField
    direction: str
    status: str                  # Converged | DivergedMinus | DivergedPlus | MaxTime
    residual: float              # sup-norm one-step defect at the final state
    elapsed: float               # model time

    @property
    def converged(self) -> bool:
        return self.status == "Converged"


def weak_kam_limit(model: ContactModel, phi: ScalarField, params: LaxParams,
                   direction: str = "backward", tol: float = 1e-6,
                   t_max: float = 80.0, window: float = 2.0) -> WeakKamResult:
    """Evolve until the one-step defect stays below tol across a time window.

    Divergence is reported when the field crosses -u_clip (DivergedMinus) or
    +u_clip (DivergedPlus); hitting t_max without either verdict yields
    MaxTime.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    win_steps = max(1, int(round(window / params.tau)))
    recent: list[float] = []
    vals = phi.values
    t = 0.0
    residual = np.inf
    while t < t_max:
        vals, info = lax_step_with_info(model, vals, params, direction)
        t += params.tau
        residual = info.sup_change
        if np.min(vals) <= -params.u_clip:
            return WeakKamResult(ScalarField(phi.grid, vals), direction,
                                 "DivergedMinus", residual, t)
        if np.max(vals) >= params.u_clip:
            return WeakKamResult(ScalarField(phi.grid, vals), direction,
                                 "DivergedPlus", residual, t)
        recent.append(residual)
        if len(recent) > win_steps:
            recent.pop(0)
        if len(recent) == win_steps and max(recent) <= tol:
            return WeakKamResult(ScalarField(phi.grid, vals), direction,
                                 "Converged", residual, t)
    return WeakKamResult(ScalarField(phi.grid, vals), direction,
                         "MaxTime", residual, t)


# -- action tables -------------------------------------------------------------


@dataclass(frozen=True)
class ActionTable:
    """Layered values of an implicit action function with argmin backpointers.

    layers[k][i] approximates h_{x0,u0}(x_i, k*tau) (backward) or
    h^{x0,u0}(x_i, k*tau) (forward); +-inf marks nodes unreachable within the
    velocity window.  backpointers[k-1][i] stores the offset chosen when
    building layer k from layer k-1.
    """

    x0: float
    u0: float
    direction: str
    params: LaxParams
    layers: np.ndarray = field(repr=False)        # (K+1, n)
    backpointers: np.ndarray = field(repr=False)  # (K, n) int
    clip_events: int = 0

    @property
    def steps(self) -> int:
        return self.layers.shape[0] - 1

    @property
    def grid(self) -> PeriodicGrid:
        return self.params.grid

    def value(self, x: float, k: int | None = None) -> float:
        """Table value at the node nearest x, layer k (default: last)."""
        if k is None:
            k = self.steps
        return float(self.layers[k][self.grid.index_of(x)])

    def final_field(self) -> np.ndarray:
        return self.layers[-1]


def action_table(model: ContactModel, x0: float, u0: float, params: LaxParams,
                 steps: int, direction: str = "backward") -> ActionTable:
    """Build h_{x0,u0}(., k*tau) for k = 1..steps by repeated Lax steps.

    Layer zero is the point seed (u0 at the node nearest x0, +-inf
    elsewhere); layer one therefore equals u0 + tau*L(x_i, u0, d/tau) on the
    nodes within one hop, exactly the one-step discretization.
    """
    if steps < 1:
        raise ValueError("need at least one step")
    grid = params.grid
    sentinel = np.inf if direction == "backward" else -np.inf
    vals = np.full(grid.n, sentinel)
    vals[grid.index_of(x0)] = u0
    layers = [vals.copy()]
    bps = []
    clip_events = 0
    for _ in range(steps):
        vals, info, chosen = lax_step_with_info(model, vals, params, direction,
                                                with_argmin=True)
        clip_events += info.clipped
        layers.append(vals.copy())
        bps.append(chosen.copy())
    return ActionTable(x0=float(grid.nodes[grid.index_of(x0)]), u0=float(u0),
                       direction=direction, params=params,
                       layers=np.asarray(layers), backpointers=np.asarray(bps),
                       clip_events=clip_events)


@dataclass(frozen=True)
class FieldEvolution:
    """Semigroup evolution of a whole field with backpointers per step."""

    phi: ScalarField
    direction: str
    params: LaxParams
    layers: np.ndarray = field(repr=False)
    backpointers: np.ndarray = field(repr=False)

    @property
    def steps(self) -> int:
        return self.layers.shape[0] - 1

    def field_at(self, k: int) -> ScalarField:
        return ScalarField(self.phi.grid, self.layers[k])


def evolve_with_backpointers(model: ContactModel, phi: ScalarField,
                             params: LaxParams, steps: int,
                             direction: str = "backward") -> FieldEvolution:
    vals = phi.values.copy()
    layers = [vals.copy()]
    bps = []
    for _ in range(steps):
        vals, _, chosen = lax_step_with_info(model, vals, params, direction,
                                             with_argmin=True)
        layers.append(vals.copy())
        bps.append(chosen.copy())
    return FieldEvolution(phi=phi, direction=direction, params=params,
                          layers=np.asarray(layers), backpointers=np.asarray(bps))


@dataclass(frozen=True)
class DiscreteCurve:
    """Backtracked minimizer: times, node positions and values along it."""

    ts: np.ndarray
    xs: np.ndarray
    us: np.ndarray
    indices: np.ndarray

    def __len__(self) -> int:
        return len(self.ts)


def _backtrack(layers: np.ndarray, backpointers: np.ndarray, params: LaxParams,
               direction: str, index: int, k_final: int) -> DiscreteCurve:
    n = params.grid.n
    idx = index
    chain = [idx]
    for k in range(k_final, 0, -1):
        j = int(backpointers[k - 1][idx])
        idx = (idx - j) % n if direction == "backward" else (idx + j) % n
        chain.append(idx)
    chain.reverse()
    nodes = params.grid.nodes
    ts = params.tau * np.arange(k_final + 1)
    if direction == "backward":
        us = np.array([layers[k][chain[k]] for k in range(k_final + 1)])
        xs = nodes[chain]
    else:
        # forward table: position l along the physical curve carries the
        # value at remaining time (k_final - l)
        us = np.array([layers[k_final - k][chain[::-1][k]] for k in range(k_final + 1)])
        xs = nodes[chain[::-1]]
        chain = chain[::-1]
    return DiscreteCurve(ts=ts, xs=xs, us=us, indices=np.asarray(chain))


def backtrack_minimizer(table: ActionTable, x: float,
                        k: int | None = None) -> DiscreteCurve:
    """Follow backpointers from (x, k) down to the seed (x0, 0).

    For the backward table the returned curve runs from (x0, u0) at t = 0 to
    x at t = k*tau with us the accumulated action values; for the forward
    table it runs from x at t = 0 to x0 at t = k*tau.
    """
    if k is None:
        k = table.steps
    idx = table.grid.index_of(x)
    if not np.isfinite(table.layers[k][idx]):
        raise ValueError("target is unreachable within the velocity window")
    return _backtrack(table.layers, table.backpointers, table.params,
                      table.direction, idx, k)


def backtrack_field_minimizer(ev: FieldEvolution, x: float,
                              k: int | None = None) -> DiscreteCurve:
    """Backtrack a field evolution from (x, k) to its optimal seed node."""
    if k is None:
        k = ev.steps
    idx = ev.phi.grid.index_of(x)
    return _backtrack(ev.layers, ev.backpointers, ev.params, ev.direction,
                      idx, k)
