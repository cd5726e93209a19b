"""Controlled path simulation, first-exit detection and Monte Carlo costs.

The integrator is Euler-Maruyama with two refinements that matter for
exit-time accuracy:

* the regime path is sampled exactly first and an integration node is
  inserted at every regime jump, so coefficients never straddle a switch;
* drift, diffusion and policy are evaluated at the midpoint of each substep
  in time (the state stays at the left endpoint), which removes the leading
  O(dt) bias of left-endpoint evaluation for time-dependent coefficients
  while remaining a valid Ito scheme.

Exit from the domain is detected by sign change against the boundary with a
linearly interpolated crossing time; a path that comes within ``EXIT_TOL``
of a boundary while staying inside is treated as exiting at that node (this
resolves exits that touch the boundary tangentially, which no pure
sign-change test can see).  There is no Brownian-bridge correction for
intra-step excursions, a known O(sqrt(dt)) exit-probability bias for
diffusive models.

Two simulation modes exist.  The default truncates paths at the exit time.
The unstopped mode integrates through the boundary up to the horizon (the
penalty machinery integrates to the horizon with no stopping) while still
recording the first crossing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .dynamics import ModelSpec
from .markov_chain import RegimePath, sample_regime_path

__all__ = [
    "EXIT_TOL",
    "Path",
    "McEstimate",
    "BatchResult",
    "ConstantPolicy",
    "StepsizeTooLargeError",
    "NonFiniteStateError",
    "build_time_grid",
    "simulate_path",
    "simulate_batch",
    "evaluate_cost",
    "monte_carlo_value",
    "exit_time_lowerbound_probe",
    "ExitTimeProbe",
]

#: paths coming this close to a boundary (while still inside) count as exits
EXIT_TOL = 1e-9


class StepsizeTooLargeError(ValueError):
    def __init__(self, dt, window):
        super().__init__(f"dt = {dt} exceeds the simulation window {window}")


class NonFiniteStateError(FloatingPointError):
    def __init__(self, t, x):
        self.t, self.x = t, x
        super().__init__(f"state became non-finite at t = {t} (x = {x})")


class ConstantPolicy:
    """Feedback policy that always applies the same control."""

    def __init__(self, u: float):
        self.u = float(u)

    def __call__(self, t, x, alpha):
        return self.u

    def __repr__(self):
        return f"ConstantPolicy({self.u})"


@dataclass(frozen=True)
class Path:
    """One simulated trajectory with its exit annotation.

    ``times`` is the integration grid (uniform steps plus regime-jump nodes,
    truncated at the exit time in stopped mode).  ``regimes[k]`` is the
    regime holding at ``times[k]`` (right-continuous), ``controls[k]`` the
    control applied on the segment starting at ``times[k]`` (the final entry
    repeats the last segment's control).

    ``tau`` is min(first exit time, horizon); ``exited`` says whether the
    domain boundary was reached before the horizon; ``stopped`` says whether
    the stored grid was truncated at ``tau``; ``x_at_exit`` is the boundary
    value the path was clamped to (0 or the upper boundary).
    """

    times: NDArray[np.float64]
    x_values: NDArray[np.float64]
    regimes: NDArray[np.int64]
    controls: NDArray[np.float64]
    tau: float
    exited: bool
    stopped: bool
    s: float
    x0: float
    alpha0: int
    x_at_exit: float | None = None

    def __len__(self):
        return len(self.times)


@dataclass(frozen=True)
class McEstimate:
    """Sample mean with its standard error."""

    mean: float
    std_error: float
    n: int

    @property
    def ci95(self) -> tuple[float, float]:
        return (self.mean - 1.96 * self.std_error, self.mean + 1.96 * self.std_error)


def _mc_estimate(values) -> McEstimate:
    values = np.asarray(values, dtype=float)
    n = len(values)
    se = float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return McEstimate(mean=float(values.mean()), std_error=se, n=n)


def build_time_grid(s: float, t_end: float, dt: float,
                    regime_path: RegimePath | None = None) -> NDArray[np.float64]:
    """Uniform grid of step <= dt on [s, t_end] with regime-jump nodes merged in."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if dt > t_end - s:
        raise StepsizeTooLargeError(dt, (s, t_end))
    n = int(np.ceil((t_end - s) / dt - 1e-12))
    times = s + dt * np.arange(n + 1)
    times[-1] = t_end
    if regime_path is not None and regime_path.n_jumps > 0:
        times = np.union1d(times, regime_path.jump_times)
    return times


def _trivial_regime_path(alpha0, s, t_end):
    return RegimePath(s=s, t_end=t_end,
                      jump_times=np.empty(0), states=np.array([alpha0], dtype=np.int64))


def _segment_exit(x_old, x_new, t0, t1, lower, upper, tol):
    """Exit test on one segment: (crossed, crossing time, boundary value)."""
    if x_new <= lower:
        den = x_old - x_new
        frac = (x_old - lower) / den if den > 0 else 1.0
        return True, t0 + frac * (t1 - t0), lower
    if x_new <= lower + tol:
        return True, t1, lower
    if upper is not None:
        if x_new >= upper:
            den = x_new - x_old
            frac = (upper - x_old) / den if den > 0 else 1.0
            return True, t0 + frac * (t1 - t0), upper
        if x_new >= upper - tol:
            return True, t1, upper
    return False, 0.0, 0.0


def simulate_path(
    model: ModelSpec,
    policy,
    s: float,
    x0: float,
    alpha0: int,
    dt: float,
    rng: np.random.Generator | None = None,
    *,
    stop_on_exit: bool = True,
    regime_path: RegimePath | None = None,
    normals: NDArray[np.float64] | None = None,
    allow_boundary_start: bool = False,
    exit_tol: float = EXIT_TOL,
) -> Path:
    """Integrate one controlled path from (s, x0, alpha0).

    ``regime_path`` and ``normals`` may be supplied explicitly to couple
    several simulations through common random numbers (same regime path and
    one shared standard normal per grid segment).  ``normals`` must cover
    every segment of ``build_time_grid(s, model.t_end, dt, regime_path)``.

    With ``stop_on_exit`` the grid is truncated at the interpolated exit
    time and the final state is clamped onto the boundary; otherwise the
    path runs to the horizon and the first crossing is only recorded.
    ``allow_boundary_start`` admits x0 = 0, used by the boundary-regularity
    probe and the boundary-start continuity diagnostic.
    """
    t_end = model.t_end
    if not 0.0 <= s < t_end:
        raise ValueError(f"need 0 <= s < {t_end}, got s = {s}")
    if not (x0 > 0.0 or (allow_boundary_start and x0 >= 0.0)):
        raise ValueError(f"x0 = {x0} must be positive")
    if model.upper_boundary is not None and x0 >= model.upper_boundary:
        raise ValueError(f"x0 = {x0} not below the upper boundary")
    if not 0 <= alpha0 < model.m:
        raise ValueError(f"alpha0 = {alpha0} outside 0..{model.m - 1}")

    if regime_path is None:
        if model.gen.switching:
            if rng is None:
                raise ValueError("rng required to sample the regime path")
            regime_path = sample_regime_path(model.gen, alpha0, s, t_end, rng)
        else:
            regime_path = _trivial_regime_path(alpha0, s, t_end)
    elif regime_path.s != s or regime_path.t_end != t_end:
        raise ValueError("regime path window must match [s, t_end]")

    times = build_time_grid(s, t_end, dt, regime_path)
    regs = regime_path.states_at(times)
    n_seg = len(times) - 1
    if normals is not None and len(normals) < n_seg:
        raise ValueError(f"need {n_seg} normals, got {len(normals)}")

    upper = model.upper_boundary
    xs = np.empty(len(times))
    us = np.empty(len(times))
    xs[0] = x0
    x = float(x0)
    tau = t_end
    exited = False
    x_at_exit = None
    truncate_at = None

    for k in range(n_seg):
        t0, t1 = float(times[k]), float(times[k + 1])
        h = t1 - t0
        alpha = int(regs[k])
        if h <= 0.0:
            us[k] = us[k - 1] if k else model.control_set.lo
            xs[k + 1] = x
            continue
        tm = t0 + 0.5 * h
        u = float(policy(tm, x, alpha))
        us[k] = u
        bv = float(model.b(tm, x, alpha, u))
        sv = float(model.sigma(tm, x, alpha, u))
        dw = 0.0
        if normals is not None:
            dw = sv * math.sqrt(h) * float(normals[k])
        elif sv != 0.0:
            dw = sv * math.sqrt(h) * float(rng.standard_normal())
        x_new = x + bv * h + dw
        if not math.isfinite(x_new):
            raise NonFiniteStateError(t1, x_new)

        if not exited:
            crossed, t_cross, x_cross = _segment_exit(x, x_new, t0, t1, 0.0, upper, exit_tol)
            if crossed:
                tau, exited, x_at_exit = t_cross, True, float(x_cross)
                if stop_on_exit:
                    truncate_at = k
                    break
        xs[k + 1] = x_new
        x = x_new
    else:
        us[-1] = us[-2] if n_seg else model.control_set.lo

    if truncate_at is not None:
        k = truncate_at
        times = np.append(times[: k + 1], tau)
        regs = np.append(regs[: k + 1], regime_path.state_at(tau))
        xs = np.append(xs[: k + 1], x_at_exit)
        us = np.append(us[: k + 1], us[k])
    return Path(
        times=np.asarray(times, dtype=float),
        x_values=np.asarray(xs, dtype=float),
        regimes=np.asarray(regs, dtype=np.int64),
        controls=np.asarray(us, dtype=float),
        tau=float(tau),
        exited=exited,
        stopped=truncate_at is not None,
        s=float(s),
        x0=float(x0),
        alpha0=int(alpha0),
        x_at_exit=x_at_exit,
    )


def evaluate_cost(path: Path, model: ModelSpec, policy=None) -> float:
    """Exit-time cost of one path: trapezoidal running cost up to tau plus
    the terminal/boundary cost at (tau, X(tau), alpha(tau)).

    Works on stopped paths (grid ends at tau) and on unstopped paths
    (integration is cut at the recorded crossing, with the state clamped
    onto the boundary).  When ``policy`` is omitted the controls stored on
    the path are reused; a supplied policy is re-evaluated at the segment
    time midpoints, matching the simulator.
    """
    times, xs, regs = path.times, path.x_values, path.regimes
    if policy is None:
        us = path.controls
    else:
        us = np.empty(len(times))
        for k in range(len(times) - 1):
            h = times[k + 1] - times[k]
            us[k] = float(policy(times[k] + 0.5 * h, xs[k], int(regs[k])))
        us[-1] = us[-2] if len(times) > 1 else model.control_set.lo

    if path.exited and times[-1] > path.tau:
        k_end = int(np.searchsorted(times, path.tau, side="left"))
    else:
        k_end = len(times) - 1

    total = 0.0
    for k in range(k_end):
        t0, t1 = float(times[k]), float(times[k + 1])
        x1, a1 = float(xs[k + 1]), int(regs[k + 1])
        if path.exited and t1 >= path.tau:
            t1 = path.tau
            x1 = path.x_at_exit if path.x_at_exit is not None else 0.0
            a1 = int(regs[k])
        h = t1 - t0
        if h <= 0:
            continue
        u = float(us[k])
        left = float(model.l(t0, float(xs[k]), int(regs[k]), u))
        right = float(model.l(t1, x1, a1, u))
        total += 0.5 * h * (left + right)

    if path.exited:
        x_term = path.x_at_exit if path.x_at_exit is not None else 0.0
        a_term = int(regs[max(k_end - 1, 0)])
        total += float(model.g(path.tau, x_term, a_term))
    else:
        total += float(model.g(float(times[-1]), float(xs[-1]), int(regs[-1])))
    return total


# ---------------------------------------------------------------------------
# vectorized batch engine
# ---------------------------------------------------------------------------

@dataclass
class BatchResult:
    """Per-path outputs of :func:`simulate_batch`."""

    tau: NDArray[np.float64]
    exited: NDArray[np.bool_]
    exit_value: NDArray[np.float64]
    cost: NDArray[np.float64] | None
    aux_costs: dict | None                      # epsilon -> per-path value
    psi_integrals: NDArray[np.float64] | None   # (n_checkpoints, n_paths)
    x_final: NDArray[np.float64]
    times: NDArray[np.float64] | None = None
    x_record: NDArray[np.float64] | None = None
    regime_record: NDArray[np.int64] | None = None

    def cost_estimate(self) -> McEstimate:
        return _mc_estimate(self.cost)


def _eval_grouped(f, t, x, reg, u, m, with_u=True):
    """Evaluate a (t, x, alpha[, u]) coefficient map over mixed regimes."""
    if m == 1:
        out = f(t, x, 0, u) if with_u else f(t, x, 0)
        return np.asarray(out, dtype=float)
    out = np.empty_like(x)
    for r in range(m):
        msk = reg == r
        if not msk.any():
            continue
        if with_u:
            uu = u[msk] if isinstance(u, np.ndarray) else u
            out[msk] = f(t, x[msk], r, uu)
        else:
            out[msk] = f(t, x[msk], r)
    return out


def _eval_policy(policy, t, x, reg, m):
    u = np.empty_like(x)
    if m == 1:
        u[:] = policy(t, x, 0)
        return u
    for r in range(m):
        msk = reg == r
        if msk.any():
            u[msk] = policy(t, x[msk], r)
    return u


def _eval_psi(psi_plus, x, reg, m):
    if m == 1:
        return np.asarray(psi_plus(x, 0), dtype=float)
    out = np.empty_like(x)
    for r in range(m):
        msk = reg == r
        if msk.any():
            out[msk] = psi_plus(x[msk], r)
    return out


def _jump_schedules(gen, alpha0, s, t_end, rng, n_paths):
    """CSR-packed exact jump times/targets for every path."""
    jt, js, off = [], [], [0]
    for _ in range(n_paths):
        rp = sample_regime_path(gen, alpha0, s, t_end, rng)
        jt.extend(rp.jump_times.tolist())
        js.extend(rp.states[1:].tolist())
        off.append(len(jt))
    return (np.asarray(jt, dtype=float), np.asarray(js, dtype=np.int64),
            np.asarray(off, dtype=np.int64))


def _advance_with_jumps(model, policy, t0, t1, x, reg, path_id,
                        jt, js, off, ptr, njt, z_first, rng):
    """Advance one path across its regime jumps inside [t0, t1].

    Mirrors the scalar integrator: substeps at each jump, coefficients at
    substep time midpoints.  The pre-drawn normal feeds the first substep;
    later substeps draw fresh ones.
    """
    t = t0
    first = True
    while True:
        nxt = njt[path_id]
        t_stop = min(t1, nxt) if np.isfinite(nxt) else t1
        h = t_stop - t
        if h > 0:
            tm = t + 0.5 * h
            u = float(policy(tm, x, reg))
            bv = float(model.b(tm, x, reg, u))
            sv = float(model.sigma(tm, x, reg, u))
            z = z_first if first else float(rng.standard_normal())
            first = False
            x = x + bv * h + sv * math.sqrt(h) * z
        t = t_stop
        if t >= t1 - 1e-15:
            break
        p = int(ptr[path_id])
        reg = int(js[p])
        ptr[path_id] = p + 1
        njt[path_id] = jt[p + 1] if p + 1 < off[path_id + 1] else np.inf
    return x, reg


def simulate_batch(
    model: ModelSpec,
    policy,
    s: float,
    x0: float,
    alpha0: int,
    n_paths: int,
    dt: float,
    rng: np.random.Generator,
    *,
    stop_on_exit: bool = True,
    horizon: float | None = None,
    lower: float = 0.0,
    upper="model",
    psi_plus=None,
    epsilons: tuple[float, ...] = (),
    psi_checkpoints: tuple[float, ...] = (),
    compute_cost: bool = True,
    record: bool = False,
    allow_boundary_start: bool = False,
    exit_tol: float = EXIT_TOL,
) -> BatchResult:
    """Simulate ``n_paths`` independent paths on a common uniform grid.

    Same integrator, exit rule and quadratures as :func:`simulate_path`,
    advancing all live paths together.  Regime jumps stay exact: paths whose
    next jump falls inside the current step are advanced one by one over
    their jump substeps (the running-cost quadrature keeps its node-based
    trapezoid on the uniform grid, an O(dt) quadrature approximation on the
    rare jump-straddling steps).

    In unstopped mode the exit-truncated cost is still accumulated (frozen
    at the first crossing plus the boundary cost) so stopped and penalized
    costs compare on identical paths.  ``psi_plus`` with ``epsilons`` adds
    the exponentially discounted horizon cost per epsilon; ``psi_checkpoints``
    (times > s) snapshot the accumulated psi+ integral.

    ``lower``/``upper``/``horizon`` override the exit domain, which is how
    the small-ball exit probe reuses the engine.  Recording stores states at
    the uniform grid nodes and is refused for switching models.
    """
    t_end = float(horizon) if horizon is not None else model.t_end
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    if not 0.0 <= s < t_end:
        raise ValueError(f"need 0 <= s < horizon = {t_end}")
    upper_b = model.upper_boundary if isinstance(upper, str) else upper
    if not (x0 > lower or (allow_boundary_start and x0 >= lower)):
        raise ValueError(f"x0 = {x0} outside the domain ({lower}, {upper_b})")
    if upper_b is not None and x0 >= upper_b:
        raise ValueError(f"x0 = {x0} outside the domain ({lower}, {upper_b})")
    if not 0 <= alpha0 < model.m:
        raise ValueError(f"alpha0 = {alpha0} outside 0..{model.m - 1}")
    if dt > t_end - s:
        raise StepsizeTooLargeError(dt, (s, t_end))

    n = int(np.ceil((t_end - s) / dt - 1e-12))
    times = s + dt * np.arange(n + 1)
    times[-1] = t_end
    m = model.m
    switching = model.gen.switching
    eps = tuple(float(e) for e in epsilons)
    track_pen = psi_plus is not None and len(eps) > 0
    track_psi = psi_plus is not None and (track_pen or len(psi_checkpoints) > 0)

    if record:
        if switching:
            raise ValueError("recording is only supported for non-switching models")
        if n_paths * (n + 1) > 60_000_000:
            raise MemoryError("recording this batch would exceed the memory budget")

    if switching:
        jt, js, off = _jump_schedules(model.gen, alpha0, s, t_end, rng, n_paths)
        ptr = off[:-1].copy()
        njt = np.array([jt[ptr[i]] if ptr[i] < off[i + 1] else np.inf
                        for i in range(n_paths)])
    else:
        jt = js = off = ptr = njt = None

    # full-size per-path results, indexed by original path id
    tau = np.full(n_paths, t_end)
    exited = np.zeros(n_paths, dtype=bool)
    exit_value = np.full(n_paths, np.nan)
    cost = np.zeros(n_paths) if compute_cost else None
    live_cost = np.ones(n_paths, dtype=bool)
    aux = {e: np.zeros(n_paths) for e in eps} if track_pen else None
    n_cp = len(psi_checkpoints)
    psi_snap = np.zeros((n_cp, n_paths)) if (track_psi and n_cp) else None
    cp_steps = (np.clip(np.searchsorted(times, np.asarray(psi_checkpoints) - 1e-12), 1, n)
                if psi_snap is not None else None)
    x_final = np.full(n_paths, np.nan)

    x_rec = reg_rec = None
    if record:
        x_rec = np.full((n_paths, n + 1), np.nan)
        reg_rec = np.zeros((n_paths, n + 1), dtype=np.int64)
        x_rec[:, 0] = x0

    # live (compacted) state
    idx = np.arange(n_paths)
    x = np.full(n_paths, float(x0))
    reg = np.full(n_paths, int(alpha0), dtype=np.int64)
    A = np.zeros(n_paths) if track_psi else None
    gam = {e: np.ones(n_paths) for e in eps} if track_pen else None
    psi_prev = _eval_psi(psi_plus, x, reg, m) if track_psi else None

    for k in range(n):
        if len(idx) == 0:
            break
        t0, t1 = float(times[k]), float(times[k + 1])
        h = t1 - t0
        tm = t0 + 0.5 * h
        sq = math.sqrt(h)

        u = _eval_policy(policy, tm, x, reg, m)
        bv = _eval_grouped(model.b, tm, x, reg, u, m)
        sv = _eval_grouped(model.sigma, tm, x, reg, u, m)
        z = rng.standard_normal(len(x))
        x_new = x + bv * h + sv * sq * z
        reg_new = reg

        l_left = None
        if compute_cost or track_pen:
            l_left = _eval_grouped(model.l, t0, x, reg, u, m)

        if switching:
            jmask = njt[idx] < t1 - 1e-15
            if np.any(jmask):
                reg_new = reg.copy()
                for i in np.nonzero(jmask)[0]:
                    x_new[i], reg_new[i] = _advance_with_jumps(
                        model, policy, t0, t1, float(x[i]), int(reg[i]),
                        int(idx[i]), jt, js, off, ptr, njt, float(z[i]), rng)
        if not np.all(np.isfinite(x_new)):
            bad = int(np.argmin(np.isfinite(x_new)))
            raise NonFiniteStateError(t1, float(x_new[bad]))

        l_right = None
        if compute_cost or track_pen:
            l_right = _eval_grouped(model.l, t1, x_new, reg_new, u, m)

        # exit detection against the domain boundaries (first crossing only)
        cross_lo = x_new <= lower
        graze_lo = (~cross_lo) & (x_new <= lower + exit_tol)
        if upper_b is not None:
            cross_up = x_new >= upper_b
            graze_up = (~cross_up) & (x_new >= upper_b - exit_tol)
        else:
            cross_up = graze_up = np.zeros(len(x), dtype=bool)
        newly = (cross_lo | graze_lo | cross_up | graze_up) & ~exited[idx]

        if np.any(newly):
            t_hit = np.full(len(x), t1)
            with np.errstate(divide="ignore", invalid="ignore"):
                den_lo = x - x_new
                frac_lo = np.where(den_lo > 0, (x - lower) / den_lo, 1.0)
            sel = cross_lo & newly
            t_hit[sel] = t0 + np.clip(frac_lo[sel], 0.0, 1.0) * h
            if upper_b is not None:
                sel_up = cross_up & newly
                if np.any(sel_up):
                    with np.errstate(divide="ignore", invalid="ignore"):
                        den_up = x_new - x
                        frac_up = np.where(den_up > 0, (upper_b - x) / den_up, 1.0)
                    t_hit[sel_up] = t0 + np.clip(frac_up[sel_up], 0.0, 1.0) * h
            is_up = cross_up | graze_up
            gsel = np.nonzero(newly)[0]
            gidx = idx[gsel]
            tau[gidx] = t_hit[gsel]
            exited[gidx] = True
            exit_value[gidx] = np.where(is_up[gsel], upper_b if upper_b is not None else 0.0, lower)
            if compute_cost:
                for j in gsel:
                    pid = int(idx[j])
                    if not live_cost[pid]:
                        continue
                    th = float(t_hit[j])
                    xb = upper_b if is_up[j] else lower
                    a_j = int(reg_new[j])
                    le = float(model.l(th, xb, a_j, float(u[j])))
                    cost[pid] += 0.5 * (th - t0) * (float(l_left[j]) + le)
                    cost[pid] += float(model.g(th, xb, a_j))
                    live_cost[pid] = False

        if compute_cost:
            surv = live_cost[idx]
            if np.any(surv):
                cost[idx[surv]] += (0.5 * h * (l_left + l_right))[surv]

        if track_psi:
            psi_new = _eval_psi(psi_plus, x_new, reg_new, m)
            A_new = A + 0.5 * h * (psi_prev + psi_new)
            if track_pen:
                for e in eps:
                    g_new = np.exp(-A_new / e)
                    aux[e][idx] += 0.5 * h * (gam[e] * l_left + g_new * l_right)
                    gam[e] = g_new
            if psi_snap is not None:
                for ci in range(n_cp):
                    if cp_steps[ci] == k + 1:
                        psi_snap[ci, idx] = A_new
            A, psi_prev = A_new, psi_new

        x = x_new
        reg = reg_new
        if record:
            x_rec[idx, k + 1] = x
            reg_rec[idx, k + 1] = reg

        if stop_on_exit:
            keep = ~exited[idx]
            if not np.all(keep):
                idx, x, reg = idx[keep], x[keep], reg[keep]
                if track_psi:
                    A, psi_prev = A[keep], psi_prev[keep]
                if track_pen:
                    gam = {e: gam[e][keep] for e in eps}

    # horizon reached: terminal costs for whatever is still integrating
    if len(idx):
        x_final[idx] = x
        if compute_cost:
            liv = live_cost[idx]
            if np.any(liv):
                gv = np.asarray(_eval_grouped(model.g, t_end, x, reg, None, m, with_u=False),
                                dtype=float)
                cost[idx[liv]] += gv[liv]
        if track_pen:
            gv = np.asarray(_eval_grouped(model.g, t_end, x, reg, None, m, with_u=False),
                            dtype=float)
            for e in eps:
                aux[e][idx] += gam[e] * gv
    if stop_on_exit:
        x_final[exited] = exit_value[exited]

    return BatchResult(
        tau=tau, exited=exited, exit_value=exit_value, cost=cost,
        aux_costs=aux, psi_integrals=psi_snap, x_final=x_final,
        times=times if record else None, x_record=x_rec, regime_record=reg_rec,
    )


def monte_carlo_value(
    model: ModelSpec,
    policy,
    s: float,
    x0: float,
    alpha0: int,
    n_paths: int,
    dt: float,
    rng: np.random.Generator,
) -> McEstimate:
    """Monte Carlo estimate of the exit-time cost under a fixed policy."""
    if n_paths < 2:
        raise ValueError("n_paths must be >= 2")
    res = simulate_batch(model, policy, s, x0, alpha0, n_paths, dt, rng,
                         stop_on_exit=True)
    return _mc_estimate(res.cost)


@dataclass(frozen=True)
class ExitTimeProbe:
    """Per-control small-ball exit-time estimates and their minimum."""

    controls: tuple[float, ...]
    estimates: tuple[McEstimate, ...]
    kappa_hat: float
    h: float


def exit_time_lowerbound_probe(
    model: ModelSpec,
    s: float,
    x0: float,
    alpha0: int,
    h: float,
    controls,
    n_paths: int,
    rng: np.random.Generator,
    dt: float | None = None,
) -> ExitTimeProbe:
    """Estimate E[theta - s] / h^2 for the exit from the ball B(x0, h).

    ``theta`` is the first exit from (x0-h, x0+h) capped at s + h^2; the
    scaled expectation is estimated per constant control and the minimum
    over the sampled controls is reported as kappa_hat.
    """
    if not 0.0 < h < 1.0:
        raise ValueError("h must lie in (0, 1)")
    if x0 - h <= 0.0:
        raise ValueError("ball must stay inside the domain (0, inf)")
    if dt is None:
        dt = h * h / 400.0
    ests = []
    for u in controls:
        res = simulate_batch(
            model, ConstantPolicy(u), s, x0, alpha0, n_paths, dt, rng,
            stop_on_exit=True, horizon=s + h * h,
            lower=x0 - h, upper=x0 + h, compute_cost=False)
        ests.append(_mc_estimate((res.tau - s) / (h * h)))
    kappa = min(e.mean for e in ests)
    return ExitTimeProbe(controls=tuple(float(u) for u in controls),
                         estimates=tuple(ests), kappa_hat=float(kappa), h=float(h))
