"""Exponential penalty machinery behind the boundary-continuity diagnostic.

A penalty function psi (non-positive on the closed domain) induces the
pathwise discount

    Gamma(t) = exp( -(1/epsilon) * integral_s^t psi+(X(r), alpha(r)) dr ),

which is 1 while the path stays inside [0, inf) and decays once it spends
time outside.  Replacing the exit-stopped cost by the Gamma-discounted cost
over the full horizon defines an auxiliary control problem whose value is
continuous in the initial state; sending epsilon to zero recovers the
original value wherever the penalty accumulates immediately along
boundary-started paths.  The diagnostic below estimates exactly that
accumulation property.

Auxiliary costs integrate to the horizon with no exit stopping; feeding an
exit-truncated path to them is an error.  Estimated penalized values are
upper estimates: the infimum is taken over a supplied finite policy family,
never over all adapted controls.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from numpy.typing import NDArray

from .dynamics import ModelSpec
from .simulate import (
    ConstantPolicy,
    McEstimate,
    Path,
    _mc_estimate,
    simulate_batch,
)

__all__ = [
    "PenaltySpec",
    "RequiresUnstoppedPathError",
    "gamma_trajectory",
    "auxiliary_cost",
    "penalized_value_mc",
    "penalized_value_over_family",
    "FamilyValueReport",
    "a3_diagnostic",
    "A3Report",
    "check_gamma_coupling",
    "GammaCouplingReport",
]


class RequiresUnstoppedPathError(ValueError):
    """The auxiliary cost needs a path integrated to the horizon."""


@dataclass(frozen=True)
class PenaltySpec:
    """Penalty function psi(x, alpha), the Lipschitz constant of its positive
    part, and the penalty level epsilon."""

    psi: callable
    lipschitz_L: float
    epsilon: float

    def __post_init__(self):
        if not self.lipschitz_L > 0:
            raise ValueError("lipschitz_L must be positive")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")

    @classmethod
    def signed_distance(cls, epsilon: float) -> "PenaltySpec":
        """Default penalty: signed distance to the boundary point, psi = -x."""
        return cls(psi=lambda x, a: -np.asarray(x, dtype=float),
                   lipschitz_L=1.0, epsilon=float(epsilon))

    def with_epsilon(self, epsilon: float) -> "PenaltySpec":
        return replace(self, epsilon=float(epsilon))

    def psi_plus(self, x, alpha):
        return np.maximum(np.asarray(self.psi(x, alpha), dtype=float), 0.0)

    def check_lipschitz(self, m: int, x_lo=-5.0, x_hi=5.0, n=201, tol=1e-9):
        """Empirical Lipschitz check of psi+ on a probe grid; raises on failure."""
        xs = np.linspace(x_lo, x_hi, n)
        for a in range(m):
            p = self.psi_plus(xs, a)
            quot = np.abs(np.diff(p)) / np.diff(xs)
            worst = float(quot.max())
            if worst > self.lipschitz_L * (1.0 + 1e-9) + tol:
                raise ValueError(
                    f"psi+ difference quotient {worst} exceeds the declared "
                    f"Lipschitz constant {self.lipschitz_L} (regime {a})")

    def check_nonpositive_inside(self, m: int, x_hi=10.0, n=201, tol=1e-12):
        """psi must be <= 0 on [0, inf); probed on [0, x_hi]."""
        xs = np.linspace(0.0, x_hi, n)
        for a in range(m):
            vals = np.asarray(self.psi(xs, a), dtype=float)
            if np.any(vals > tol):
                j = int(np.argmax(vals))
                raise ValueError(
                    f"psi({xs[j]}, {a}) = {vals[j]} > 0; the diagnostic "
                    "requires psi <= 0 on [0, inf)")


def gamma_trajectory(path: Path, pen: PenaltySpec) -> NDArray[np.float64]:
    """Discount factor along the path grid.

    Trapezoidal quadrature of psi+ over the stored nodes, exponentiated.
    Starts at exactly 1, never increases, stays in (0, 1].
    """
    psip = np.array([float(pen.psi_plus(x, int(a)))
                     for x, a in zip(path.x_values, path.regimes)])
    h = np.diff(path.times)
    inc = 0.5 * h * (psip[:-1] + psip[1:])
    acc = np.concatenate(([0.0], np.cumsum(inc)))
    return np.exp(-acc / pen.epsilon)


def auxiliary_cost(path: Path, model: ModelSpec, pen: PenaltySpec,
                   policy=None) -> float:
    """Gamma-discounted running cost over [s, T] plus discounted terminal cost.

    The path must have been simulated without exit truncation (the auxiliary
    problem has no stopping); a truncated path raises
    :class:`RequiresUnstoppedPathError`.
    """
    if path.stopped:
        raise RequiresUnstoppedPathError(
            "auxiliary cost integrates to the horizon; simulate with "
            "stop_on_exit=False")
    gam = gamma_trajectory(path, pen)
    times, xs, regs = path.times, path.x_values, path.regimes
    us = path.controls if policy is None else None
    total = 0.0
    for k in range(len(times) - 1):
        h = float(times[k + 1] - times[k])
        if h <= 0:
            continue
        if us is None:
            u = float(policy(times[k] + 0.5 * h, xs[k], int(regs[k])))
        else:
            u = float(us[k])
        left = float(model.l(float(times[k]), float(xs[k]), int(regs[k]), u))
        right = float(model.l(float(times[k + 1]), float(xs[k + 1]), int(regs[k + 1]), u))
        total += 0.5 * h * (gam[k] * left + gam[k + 1] * right)
    total += float(gam[-1]) * float(model.g(float(times[-1]), float(xs[-1]), int(regs[-1])))
    return total


def penalized_value_mc(
    model: ModelSpec,
    policy,
    pen: PenaltySpec,
    s: float,
    x0: float,
    alpha0: int,
    n_paths: int,
    dt: float,
    rng: np.random.Generator,
    *,
    allow_boundary_start: bool = False,
) -> McEstimate:
    """Monte Carlo estimate of the penalized cost under a fixed policy."""
    if n_paths < 2:
        raise ValueError("n_paths must be >= 2")
    res = simulate_batch(
        model, policy, s, x0, alpha0, n_paths, dt, rng,
        stop_on_exit=False, psi_plus=pen.psi_plus, epsilons=(pen.epsilon,),
        compute_cost=False, allow_boundary_start=allow_boundary_start)
    return _mc_estimate(res.aux_costs[pen.epsilon])


@dataclass(frozen=True)
class FamilyValueReport:
    """Penalized-value estimates over a finite policy family.

    ``best`` upper-bounds the penalized value: the infimum over all adapted
    controls is approximated from above by the family minimum.
    """

    estimates: tuple[McEstimate, ...]
    best_index: int

    @property
    def best(self) -> McEstimate:
        return self.estimates[self.best_index]


def penalized_value_over_family(
    model: ModelSpec,
    policies,
    pen: PenaltySpec,
    s: float,
    x0: float,
    alpha0: int,
    n_paths: int,
    dt: float,
    rng: np.random.Generator,
    *,
    allow_boundary_start: bool = False,
) -> FamilyValueReport:
    """Upper estimate of the penalized value: minimum over a policy family."""
    ests = []
    for pol in policies:
        child = np.random.default_rng(rng.integers(2**63))
        ests.append(penalized_value_mc(
            model, pol, pen, s, x0, alpha0, n_paths, dt, child,
            allow_boundary_start=allow_boundary_start))
    best = int(np.argmin([e.mean for e in ests]))
    return FamilyValueReport(estimates=tuple(ests), best_index=best)


@dataclass(frozen=True)
class A3Report:
    """Empirical immediate-penalty-accumulation probabilities.

    ``fractions[i]`` estimates P{ integral_s^t psi+(X, alpha) dr > 0 } at
    checkpoint t = checkpoints[i] for paths started on the boundary.  The
    accumulation condition is plausible when every fraction equals 1 up to
    Monte Carlo resolution.
    """

    checkpoints: tuple[float, ...]
    fractions: NDArray[np.float64]
    n_paths: int
    u_const: float
    s: float
    alpha0: int


def a3_diagnostic(
    model: ModelSpec,
    pen: PenaltySpec,
    u_const: float,
    s: float,
    alpha0: int,
    n_paths: int,
    dt: float,
    rng: np.random.Generator,
    checkpoints=None,
) -> A3Report:
    """Check whether the penalty accumulates immediately from the boundary.

    Simulates unstopped paths from x0 = 0 under the constant control and
    reports, per checkpoint, the fraction of paths whose accumulated psi+
    integral is strictly positive.
    """
    pen.check_lipschitz(model.m)
    pen.check_nonpositive_inside(model.m)
    if checkpoints is None:
        w = model.t_end - s
        checkpoints = tuple(s + f * w for f in (0.25, 0.5, 0.75, 1.0))
    checkpoints = tuple(float(c) for c in checkpoints)
    if any(c <= s or c > model.t_end for c in checkpoints):
        raise ValueError("checkpoints must lie in (s, t_end]")
    res = simulate_batch(
        model, ConstantPolicy(u_const), s, 0.0, alpha0, n_paths, dt, rng,
        stop_on_exit=False, psi_plus=pen.psi_plus,
        psi_checkpoints=checkpoints, compute_cost=False,
        allow_boundary_start=True)
    fractions = (res.psi_integrals > 0.0).mean(axis=1)
    return A3Report(checkpoints=checkpoints, fractions=fractions,
                    n_paths=n_paths, u_const=float(u_const), s=float(s),
                    alpha0=int(alpha0))


@dataclass(frozen=True)
class GammaCouplingReport:
    """Pathwise check of the discount-coupling inequality.

    For two paths on the same grid driven by common random numbers the
    difference of their discount factors is bounded by
    (L / epsilon) * (t - s) * sup_{r <= t} |X1(r) - X2(r)|, with the sup
    taken over grid nodes.
    """

    max_excess: float
    n_violations: int
    n_checked: int

    @property
    def passed(self) -> bool:
        return self.n_violations == 0


def check_gamma_coupling(path1: Path, path2: Path, pen: PenaltySpec) -> GammaCouplingReport:
    """Verify the coupling bound on one pair of common-noise paths."""
    if len(path1) != len(path2) or not np.array_equal(path1.times, path2.times):
        raise ValueError("paths must share one time grid (common random numbers)")
    g1 = gamma_trajectory(path1, pen)
    g2 = gamma_trajectory(path2, pen)
    run_sup = np.maximum.accumulate(np.abs(path1.x_values - path2.x_values))
    bound = (pen.lipschitz_L / pen.epsilon) * (path1.times - path1.s) * run_sup
    excess = np.abs(g1 - g2) - bound
    return GammaCouplingReport(
        max_excess=float(excess.max()),
        n_violations=int(np.sum(excess > 0.0)),
        n_checked=len(excess),
    )
