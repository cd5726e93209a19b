"""Coupled Hamilton-Jacobi-Bellman system on a (time, space, regime) lattice.

Backward induction from the horizon with, per node, an exhaustive scan over
a discretized control set.  The spatial stencil is the monotone upwind one:
forward difference for positive drift, backward for negative, central second
difference for the diffusion, exact regime coupling through the generator
rows.  All discrete transition weights are then non-negative and sum to one
with the self-weight whenever the step size obeys

    dt * ( |b|/dx + sigma^2/dx^2 + |q_aa| ) <= 1,

which is checked up front and re-asserted at every marched step.

Two time-stepping modes:

* ``uniform`` - fixed dt = T/n_t, the classical scheme.  First-order upwind
  smears a value-function discontinuity riding a characteristic by an
  amount set by the Courant ratio history; with coefficients whose size
  varies strongly in time the ratio is forced far below one for most steps
  and the smearing is irreducible at fixed dt.
* ``adaptive`` - every step takes the largest dt allowed by the stability
  bound evaluated at that time level (capped by ``dt_cap``).  Each step is
  individually CFL-compliant, the scheme stays monotone, and the Courant
  ratio stays near one, which keeps discontinuities sharp.

The x = 0 row is pinned to the boundary cost.  At the artificial upper
truncation the stencil is one-sided with constant extrapolation beyond the
grid (outward drift drops, the diffusion folds onto the interior neighbor);
no Dirichlet data is invented.  A genuine second absorbing boundary, when
the model declares one, must coincide with x_max and is pinned instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import solve_banded

from .dynamics import ModelSpec, check_assumption_a1
from .simulate import McEstimate, monte_carlo_value

__all__ = [
    "GridSpec",
    "ValueGrid",
    "PolicyGrid",
    "CflViolationError",
    "NonMonotoneSchemeError",
    "GridMismatchError",
    "discrete_operator",
    "solve_hjb",
    "bellman_residual",
    "extract_policy",
    "feedback_policy",
    "verify_candidate",
    "VerificationReport",
    "check_monotone_weights",
    "WeightReport",
]


class CflViolationError(ValueError):
    def __init__(self, required_dt: float, dt: float):
        self.required_dt = required_dt
        self.dt = dt
        super().__init__(
            f"explicit step dt = {dt} violates the stability bound; "
            f"need dt <= {required_dt}")


class NonMonotoneSchemeError(RuntimeError):
    def __init__(self, t: float, dt: float, rate: float):
        super().__init__(
            f"negative transition weight at t = {t}: dt * rate = {dt * rate}")


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    """Lattice layout and scheme options for the solver.

    ``n_t`` may be left None: uniform mode then derives it from the
    stability bound, adaptive mode ignores it.  ``dt_cap`` bounds adaptive
    steps from above (default horizon/100).
    """

    x_max: float
    n_x: int
    n_u: int = 1
    n_t: int | None = None
    scheme: str = "explicit"            # "explicit" | "implicit-diffusion"
    time_stepping: str = "uniform"      # "uniform" | "adaptive"
    cfl_safety: float = 0.95
    dt_cap: float | None = None

    def __post_init__(self):
        if not self.x_max > 0:
            raise ValueError("x_max must be positive")
        if self.n_x < 3:
            raise ValueError("need at least 3 space nodes")
        if self.n_u < 1:
            raise ValueError("n_u must be >= 1")
        if self.scheme not in ("explicit", "implicit-diffusion"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.time_stepping not in ("uniform", "adaptive"):
            raise ValueError(f"unknown time stepping {self.time_stepping!r}")
        if not 0 < self.cfl_safety <= 1:
            raise ValueError("cfl_safety must lie in (0, 1]")
        if self.time_stepping == "adaptive" and self.scheme != "explicit":
            raise ValueError("adaptive stepping is only supported explicitly")

    @property
    def dx(self) -> float:
        return self.x_max / self.n_x


@dataclass(frozen=True)
class ValueGrid:
    """Value function on the lattice: values[n, i, a] at (times[n], x[i], a)."""

    values: NDArray[np.float64]          # (n_t+1, n_x+1, m)
    times: NDArray[np.float64]           # ascending, times[-1] = horizon
    x: NDArray[np.float64]
    grid: GridSpec
    model_hash: str
    info: dict = field(default_factory=dict)

    @property
    def n_t(self) -> int:
        return len(self.times) - 1

    def value_at(self, t: float, xq: float, alpha: int) -> float:
        """Bilinear interpolation in (t, x) at one regime."""
        tt = np.clip(t, self.times[0], self.times[-1])
        xx = np.clip(xq, self.x[0], self.x[-1])
        n = int(np.clip(np.searchsorted(self.times, tt, side="right") - 1,
                        0, len(self.times) - 2))
        i = int(np.clip(np.searchsorted(self.x, xx, side="right") - 1,
                        0, len(self.x) - 2))
        wt = (tt - self.times[n]) / (self.times[n + 1] - self.times[n])
        wx = (xx - self.x[i]) / (self.x[i + 1] - self.x[i])
        v = self.values
        return float(
            (1 - wt) * ((1 - wx) * v[n, i, alpha] + wx * v[n, i + 1, alpha])
            + wt * ((1 - wx) * v[n + 1, i, alpha] + wx * v[n + 1, i + 1, alpha]))


@dataclass(frozen=True)
class PolicyGrid:
    """Feedback control per (time slice, space node, regime).

    ``controls[n]`` applies on [times[n], times[n+1])."""

    controls: NDArray[np.float64]        # (n_t, n_x+1, m)
    times: NDArray[np.float64]
    x: NDArray[np.float64]
    grid: GridSpec
    model_hash: str


def _coeff_row(f, t, x, alpha, u):
    out = np.asarray(f(t, x, alpha, u), dtype=float)
    if out.shape != x.shape:
        out = np.broadcast_to(out, x.shape).astype(float)
    return out


def _g_rows(model, t, x):
    return np.stack(
        [np.broadcast_to(np.asarray(model.g(t, x, a), dtype=float), x.shape)
         for a in range(model.m)], axis=1)


def _explicit_candidates(model, x, dx, t, vs, u_vals, pinned_upper):
    """Per-node minimum of the discrete Hamiltonian over the control scan.

    Returns (min values, argmin controls, max stability rate).  Strict
    improvement with an ascending control scan makes ties resolve to the
    smallest control, deterministically.
    """
    m = model.m
    q = model.gen.q
    coup = vs @ q.T
    best = None
    best_u = None
    max_rate = 0.0
    inv_dx = 1.0 / dx
    inv_dx2 = inv_dx * inv_dx
    for u in u_vals:
        cand = np.empty_like(vs)
        for a in range(m):
            bvec = _coeff_row(model.b, t, x, a, u)
            svec = _coeff_row(model.sigma, t, x, a, u)
            lvec = _coeff_row(model.l, t, x, a, u)
            s2 = svec * svec
            v = vs[:, a]
            bp = np.maximum(bvec, 0.0)
            bm = np.maximum(-bvec, 0.0)
            adv = (bp[1:-1] * (v[2:] - v[1:-1])
                   - bm[1:-1] * (v[1:-1] - v[:-2])) * inv_dx
            diff = 0.5 * s2[1:-1] * (v[2:] - 2.0 * v[1:-1] + v[:-2]) * inv_dx2
            cand[1:-1, a] = adv + diff + coup[1:-1, a] + lvec[1:-1]
            cand[0, a] = lvec[0] + coup[0, a]          # overwritten by Dirichlet
            if pinned_upper:
                cand[-1, a] = lvec[-1] + coup[-1, a]   # overwritten by Dirichlet
            else:
                cand[-1, a] = (min(float(bvec[-1]), 0.0) * (v[-1] - v[-2]) * inv_dx
                               + 0.5 * s2[-1] * (v[-2] - v[-1]) * inv_dx2
                               + coup[-1, a] + lvec[-1])
            rate = float(np.max(np.abs(bvec) * inv_dx + s2 * inv_dx2)) - float(q[a, a])
            max_rate = max(max_rate, rate)
        if best is None:
            best = cand
            best_u = np.full_like(cand, u)
        else:
            imp = cand < best
            best = np.where(imp, cand, best)
            best_u = np.where(imp, u, best_u)
    return best, best_u, max_rate


def _drift_rate(model, x, dx, t, u_vals):
    m = model.m
    q = model.gen.q
    rate = 0.0
    for u in u_vals:
        for a in range(m):
            bvec = _coeff_row(model.b, t, x, a, u)
            rate = max(rate, float(np.max(np.abs(bvec))) / dx - float(q[a, a]))
    return rate


def _implicit_step(model, x, dx, t_new, t_old, vs, dt, u_vals, pinned_upper):
    """One implicit-in-diffusion step: explicit upwind drift, coupling and
    cost at the known level, diffusion solved implicitly per control.

    Monotone without a diffusion CFL restriction: the explicit part needs
    dt * (|b|/dx + |q_aa|) <= 1 and the implicit matrix is an M-matrix.
    """
    m = model.m
    q = model.gen.q
    n1 = len(x)
    coup = vs @ q.T
    inv_dx = 1.0 / dx
    inv_dx2 = inv_dx * inv_dx
    g_new = _g_rows(model, t_new, x)
    best = None
    best_u = None
    max_rate = 0.0
    for u in u_vals:
        cand = np.empty_like(vs)
        for a in range(m):
            bvec = _coeff_row(model.b, t_old, x, a, u)
            svec = _coeff_row(model.sigma, t_old, x, a, u)
            lvec = _coeff_row(model.l, t_old, x, a, u)
            s2 = svec * svec
            v = vs[:, a]
            bp = np.maximum(bvec, 0.0)
            bm = np.maximum(-bvec, 0.0)
            rhs = np.empty(n1)
            adv = (bp[1:-1] * (v[2:] - v[1:-1])
                   - bm[1:-1] * (v[1:-1] - v[:-2])) * inv_dx
            rhs[1:-1] = v[1:-1] + dt * (adv + coup[1:-1, a] + lvec[1:-1])
            rhs[0] = g_new[0, a]
            theta = 0.5 * dt * s2 * inv_dx2
            # banded layout: ab[0, j] = A[j-1, j] (upper), ab[2, j] = A[j+1, j] (lower)
            ab = np.zeros((3, n1))
            ab[1, :] = 1.0 + 2.0 * theta
            ab[0, 2:] = -theta[1:-1]
            ab[2, :-2] = -theta[1:-1]
            ab[1, 0] = 1.0
            ab[0, 1] = 0.0
            if pinned_upper:
                ab[1, -1] = 1.0
                ab[2, -2] = 0.0
                rhs[-1] = g_new[-1, a]
            else:
                ab[1, -1] = 1.0 + theta[-1]
                ab[2, -2] = -theta[-1]
                adv_top = min(float(bvec[-1]), 0.0) * (v[-1] - v[-2]) * inv_dx
                rhs[-1] = v[-1] + dt * (adv_top + coup[-1, a] + lvec[-1])
            cand[:, a] = solve_banded((1, 1), ab, rhs)
            rate = float(np.max(np.abs(bvec))) * inv_dx - float(q[a, a])
            max_rate = max(max_rate, rate)
        if best is None:
            best = cand
            best_u = np.full_like(cand, u)
        else:
            imp = cand < best
            best = np.where(imp, cand, best)
            best_u = np.where(imp, u, best_u)
    return best, best_u, max_rate


def discrete_operator(model: ModelSpec, grid: GridSpec, t: float, x_idx: int,
                      alpha: int, u: float, values: NDArray[np.float64]) -> float:
    """Discrete generator at one interior node.

    Upwind first difference for the drift, central second difference for the
    diffusion, exact coupling through the generator row.  ``values`` is the
    (n_x+1, m) slice the stencil reads.
    """
    if not 1 <= x_idx <= grid.n_x - 1:
        raise ValueError("discrete_operator is defined at interior nodes")
    dx = grid.dx
    xi = x_idx * dx
    b = float(model.b(t, xi, alpha, u))
    s2 = float(model.sigma(t, xi, alpha, u)) ** 2
    v = values[:, alpha]
    fwd = (v[x_idx + 1] - v[x_idx]) / dx
    bwd = (v[x_idx] - v[x_idx - 1]) / dx
    d2 = (v[x_idx + 1] - 2.0 * v[x_idx] + v[x_idx - 1]) / dx**2
    coup = float(values[x_idx, :] @ model.gen.q[alpha, :])
    return max(b, 0.0) * fwd - max(-b, 0.0) * bwd + 0.5 * s2 * d2 + coup


def _sampled_required_dt(model, grid, x, u_vals, n_samples=129):
    t_samples = np.linspace(0.0, model.t_end, n_samples)
    worst = 0.0
    vs_dummy = np.zeros((len(x), model.m))
    for t in t_samples:
        if grid.scheme == "explicit":
            _, _, rate = _explicit_candidates(model, x, grid.dx, t, vs_dummy,
                                              u_vals, False)
        else:
            rate = _drift_rate(model, x, grid.dx, t, u_vals)
        worst = max(worst, rate)
    return (1.0 / worst if worst > 0 else np.inf), worst


def solve_hjb(model: ModelSpec, grid: GridSpec, *, check_model: bool = True
              ) -> tuple[ValueGrid, PolicyGrid]:
    """Solve the coupled system backward from the horizon.

    Explicit update per step:  V(t_n) = V(t_n+1) + dt * min_u [ L^u V(t_n+1)
    + running cost ], with the x = 0 row pinned to the boundary cost, the
    terminal slice to the terminal cost, and the argmin stored as the
    feedback policy (smallest-control tie-breaking).  Weight positivity is
    asserted at every marched step; a violation raises
    :class:`NonMonotoneSchemeError`.

    Raises :class:`CflViolationError` up front when a uniform ``n_t`` is too
    coarse for the sampled stability bound.
    """
    x = np.linspace(0.0, grid.x_max, grid.n_x + 1)
    dx = grid.dx
    u_vals = model.control_set.values(grid.n_u)
    pinned = model.upper_boundary is not None
    if pinned and abs(model.upper_boundary - grid.x_max) > 1e-12:
        raise GridMismatchError(
            f"model's absorbing upper boundary {model.upper_boundary} must "
            f"coincide with x_max = {grid.x_max}")
    if check_model:
        report = check_assumption_a1(model, x_range=(0.0, grid.x_max),
                                     n_pairs=200,
                                     rng=np.random.default_rng(0))
        if not report.passed:
            raise ValueError(
                "model fails the coefficient regularity probe on the grid "
                f"window: {report.worst_violation}")

    T = model.t_end
    info: dict = {"scheme": grid.scheme, "time_stepping": grid.time_stepping,
                  "pinned_upper": pinned,
                  "truncation": "one-sided upwind stencil, no Dirichlet data"
                                if not pinned else "absorbing boundary"}

    if grid.time_stepping == "uniform":
        required_dt, max_rate = _sampled_required_dt(model, grid, x, u_vals)
        n_t = grid.n_t
        if n_t is None:
            n_t = max(1, int(math.ceil(T / (grid.cfl_safety * required_dt))))
        dt = T / n_t
        if grid.scheme == "explicit" and dt > required_dt * (1 + 1e-12):
            raise CflViolationError(required_dt, dt)
        times = np.linspace(0.0, T, n_t + 1)
        info.update(required_dt=required_dt, sampled_max_rate=max_rate, dt=dt)
        values, controls, min_w = _march(model, grid, x, dx, times, u_vals, pinned)
    else:
        times, values, controls, min_w = _march_adaptive(
            model, grid, x, dx, u_vals, pinned)
        info.update(dt_cap=grid.dt_cap if grid.dt_cap is not None else T / 100.0,
                    n_steps=len(times) - 1)
    info["min_self_weight"] = min_w

    mh = model.model_hash()
    vg = ValueGrid(values=values, times=times, x=x, grid=grid,
                   model_hash=mh, info=info)
    pg = PolicyGrid(controls=controls, times=times, x=x, grid=grid, model_hash=mh)
    return vg, pg


def _march(model, grid, x, dx, times, u_vals, pinned):
    """Backward induction over a prescribed time grid."""
    m = model.m
    n_t = len(times) - 1
    values = np.empty((n_t + 1, len(x), m))
    controls = np.empty((n_t, len(x), m))
    values[n_t] = _g_rows(model, times[-1], x)
    min_w = np.inf
    for n in range(n_t - 1, -1, -1):
        t1 = float(times[n + 1])
        t0 = float(times[n])
        dt = t1 - t0
        vs = values[n + 1]
        if grid.scheme == "explicit":
            ham, best_u, rate = _explicit_candidates(model, x, dx, t1, vs,
                                                     u_vals, pinned)
            if dt * rate > 1.0 + 1e-9:
                raise NonMonotoneSchemeError(t1, dt, rate)
            min_w = min(min_w, 1.0 - dt * rate)
            vn = vs + dt * ham
        else:
            vn, best_u, rate = _implicit_step(model, x, dx, t0, t1, vs, dt,
                                              u_vals, pinned)
            if dt * rate > 1.0 + 1e-9:
                raise NonMonotoneSchemeError(t1, dt, rate)
            min_w = min(min_w, 1.0 - dt * rate)
        g0 = _g_rows(model, t0, x[:1])
        vn[0, :] = g0[0]
        if pinned:
            gN = _g_rows(model, t0, x[-1:])
            vn[-1, :] = gN[0]
        values[n] = vn
        controls[n] = best_u
    return values, controls, float(min_w)


def _march_adaptive(model, grid, x, dx, u_vals, pinned):
    """Backward induction with per-step CFL-maximal explicit steps."""
    T = model.t_end
    cap = grid.dt_cap if grid.dt_cap is not None else T / 100.0
    ts = [T]
    rows = [_g_rows(model, T, x)]
    pol_rows = []
    t1 = T
    v1 = rows[0]
    min_w = np.inf
    while t1 > 1e-12:
        ham, best_u, rate = _explicit_candidates(model, x, dx, t1, v1,
                                                 u_vals, pinned)
        dt = cap if rate <= 0 else min(cap, grid.cfl_safety / rate)
        dt = min(dt, t1)
        if dt * rate > 1.0 + 1e-9:
            raise NonMonotoneSchemeError(t1, dt, rate)
        min_w = min(min_w, 1.0 - dt * rate)
        t0 = t1 - dt
        if t0 < 1e-12:
            t0 = 0.0
            dt = t1
        vn = v1 + dt * ham
        g0 = _g_rows(model, t0, x[:1])
        vn[0, :] = g0[0]
        if pinned:
            gN = _g_rows(model, t0, x[-1:])
            vn[-1, :] = gN[0]
        ts.append(t0)
        rows.append(vn)
        pol_rows.append(best_u)
        t1, v1 = t0, vn
    times = np.asarray(ts[::-1])
    values = np.asarray(rows[::-1])
    controls = np.asarray(pol_rows[::-1])
    return times, values, controls, float(min_w)


def bellman_residual(vg: ValueGrid, model: ModelSpec) -> float:
    """Max discrete residual |dV/dt + min_u (L^u V + l)| over interior nodes.

    Recomputed with the solver's own stencils, so solver output satisfies it
    to round-off; an externally supplied candidate gets its violation of the
    discrete system measured.  For implicit-diffusion grids the step is
    re-solved and the mismatch against the stored slice reported instead.
    """
    if vg.model_hash != model.model_hash():
        raise GridMismatchError("value grid was produced for a different model")
    grid = vg.grid
    u_vals = model.control_set.values(grid.n_u)
    pinned = model.upper_boundary is not None
    worst = 0.0
    for n in range(vg.n_t):
        t1 = float(vg.times[n + 1])
        t0 = float(vg.times[n])
        dt = t1 - t0
        vs = vg.values[n + 1]
        if grid.scheme == "explicit":
            ham, _, _ = _explicit_candidates(model, vg.x, grid.dx, t1, vs,
                                             u_vals, pinned)
            res = (vs - vg.values[n]) / dt + ham
        else:
            vn_pred, _, _ = _implicit_step(model, vg.x, grid.dx, t0, t1, vs,
                                           dt, u_vals, pinned)
            res = (vn_pred - vg.values[n]) / dt
        worst = max(worst, float(np.abs(res[1:-1, :]).max()))
    return worst


def extract_policy(vg: ValueGrid, model: ModelSpec) -> PolicyGrid:
    """Argmin feedback control read off a value grid (explicit Hamiltonian)."""
    if vg.model_hash != model.model_hash():
        raise GridMismatchError("value grid was produced for a different model")
    grid = vg.grid
    u_vals = model.control_set.values(grid.n_u)
    pinned = model.upper_boundary is not None
    controls = np.empty((vg.n_t, len(vg.x), model.m))
    for n in range(vg.n_t):
        _, best_u, _ = _explicit_candidates(model, vg.x, grid.dx,
                                            float(vg.times[n + 1]),
                                            vg.values[n + 1], u_vals, pinned)
        controls[n] = best_u
    return PolicyGrid(controls=controls, times=vg.times, x=vg.x,
                      grid=grid, model_hash=vg.model_hash)


def feedback_policy(pg: PolicyGrid):
    """Turn a policy grid into a feedback map (t, x, alpha) -> u.

    Time lookup is piecewise-constant on [times[n], times[n+1]); space lookup
    snaps to the nearest node.  Accepts scalar or array x.
    """
    times = pg.times
    dx = pg.x[1] - pg.x[0]
    n_x = len(pg.x) - 1
    n_t = pg.controls.shape[0]

    def policy(t, xq, alpha):
        n = int(np.clip(np.searchsorted(times, t, side="right") - 1, 0, n_t - 1))
        xi = np.clip(np.rint(np.asarray(xq) / dx).astype(int), 0, n_x)
        out = pg.controls[n, xi, alpha]
        return float(out) if np.isscalar(xq) else out

    return policy


@dataclass(frozen=True)
class VerificationReport:
    """Comparison of a candidate value against simulation under its policy."""

    phi_value: float
    mc: McEstimate
    gap: float
    tol: float

    @property
    def flagged(self) -> bool:
        return abs(self.gap) > self.tol


def verify_candidate(vg: ValueGrid, model: ModelSpec, mc: dict) -> VerificationReport:
    """Simulate the feedback policy extracted from a candidate value grid and
    report the gap between its Monte Carlo cost and the candidate value.

    ``mc`` keys: s, x0, alpha0, n_paths, dt, rng, and optionally ``policy``
    (a PolicyGrid, else extracted by argmin) and ``gap_tol`` (default
    2*(dx + max step) + 2 standard errors).  For a genuine solution the gap
    sits inside discretization plus Monte Carlo noise; a candidate that is
    not a solution is flagged.
    """
    policy_grid = mc.get("policy")
    if policy_grid is None:
        policy_grid = extract_policy(vg, model)
    pol = feedback_policy(policy_grid)
    est = monte_carlo_value(model, pol, mc["s"], mc["x0"], mc["alpha0"],
                            mc["n_paths"], mc["dt"], mc["rng"])
    phi_val = vg.value_at(mc["s"], mc["x0"], mc["alpha0"])
    gap = est.mean - phi_val
    tol = mc.get("gap_tol")
    if tol is None:
        max_dt = float(np.max(np.diff(vg.times)))
        tol = 2.0 * (vg.grid.dx + max_dt) + 2.0 * est.std_error
    return VerificationReport(phi_value=phi_val, mc=est, gap=float(gap),
                              tol=float(tol))


@dataclass(frozen=True)
class WeightReport:
    """Nodewise monotonicity audit of the explicit scheme weights."""

    min_self_weight: float
    max_rate: float
    dt: float
    n_t_samples: int
    passed: bool


def check_monotone_weights(model: ModelSpec, grid: GridSpec,
                           n_t_samples: int = 201) -> WeightReport:
    """Assert non-negative transition weights over the whole lattice.

    Off-diagonal weights (upwind drift parts, half the diffusion, generator
    off-diagonals) are non-negative by construction, so the only thing that
    can fail is the self-weight 1 - dt * rate; this evaluates the rate at
    every space node and control over sampled time levels and reports the
    minimum self-weight for the grid's step size.
    """
    x = np.linspace(0.0, grid.x_max, grid.n_x + 1)
    u_vals = model.control_set.values(grid.n_u)
    required_dt, max_rate = _sampled_required_dt(model, grid, x, u_vals,
                                                 n_samples=n_t_samples)
    if grid.time_stepping == "adaptive":
        # adaptive steps satisfy dt*rate <= cfl_safety by construction
        min_w = 1.0 - grid.cfl_safety
        dt = float("nan")
    else:
        n_t = grid.n_t
        if n_t is None:
            n_t = max(1, int(math.ceil(model.t_end / (grid.cfl_safety * required_dt))))
        dt = model.t_end / n_t
        min_w = 1.0 - dt * max_rate
    return WeightReport(min_self_weight=float(min_w), max_rate=float(max_rate),
                        dt=dt, n_t_samples=n_t_samples,
                        passed=bool(min_w >= -1e-12))
