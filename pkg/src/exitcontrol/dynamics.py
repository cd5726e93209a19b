"""Controlled regime-switching model definition and coefficient sanity probe.

A model bundles the regime generator, the drift/diffusion/cost coefficient
maps, the admissible control set, the horizon, and the exit domain.  The
state domain is the half-line (0, inf) with an absorbing boundary at 0; an
optional second absorbing boundary caps the domain from above.

Maximization problems are rewritten at construction time as minimization of
the negated running and terminal costs, so every downstream consumer
(simulation, Monte Carlo, HJB solver) minimizes.  The ``maximize`` flag only
records the original orientation for reporting.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .markov_chain import GeneratorMatrix, validate_generator

__all__ = [
    "ControlSet",
    "ModelSpec",
    "AssumptionReport",
    "NonFiniteCoefficientError",
    "check_assumption_a1",
]

Coefficient = Callable[..., float]


class NonFiniteCoefficientError(ValueError):
    """A coefficient map returned NaN or infinity."""

    def __init__(self, name: str, where: tuple):
        self.name, self.where = name, where
        super().__init__(f"{name}{where} is not finite")


@dataclass(frozen=True)
class ControlSet:
    """Compact control range: an interval [lo, hi] or an explicit finite set."""

    lo: float
    hi: float
    points: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.points is not None:
            object.__setattr__(self, "points", tuple(float(p) for p in self.points))
            if len(self.points) == 0:
                raise ValueError("explicit control set must be non-empty")
            object.__setattr__(self, "lo", min(self.points))
            object.__setattr__(self, "hi", max(self.points))
        if not np.isfinite(self.lo) or not np.isfinite(self.hi):
            raise ValueError("control bounds must be finite")
        if self.lo > self.hi:
            raise ValueError(f"empty control interval [{self.lo}, {self.hi}]")

    @classmethod
    def interval(cls, lo: float, hi: float) -> "ControlSet":
        return cls(lo=float(lo), hi=float(hi))

    @classmethod
    def finite(cls, points) -> "ControlSet":
        pts = tuple(float(p) for p in points)
        return cls(lo=min(pts), hi=max(pts), points=pts)

    @classmethod
    def singleton(cls, u: float = 0.0) -> "ControlSet":
        return cls(lo=float(u), hi=float(u))

    def values(self, n: int) -> np.ndarray:
        """Discretization used for exhaustive minimization, ascending."""
        if self.points is not None:
            return np.array(sorted(set(self.points)))
        if self.lo == self.hi or n <= 1:
            return np.array([self.lo])
        return np.linspace(self.lo, self.hi, n)

    def contains(self, u: float, tol: float = 1e-12) -> bool:
        if self.points is not None:
            return any(abs(u - p) <= tol for p in self.points)
        return self.lo - tol <= u <= self.hi + tol


def _vectorized_over_x(f, t, x2, alpha, u=None):
    try:
        out = f(t, x2, alpha) if u is None else f(t, x2, alpha, u)
    except Exception:
        return False
    return np.shape(out) == np.shape(x2)


@dataclass(frozen=True)
class ModelSpec:
    """Immutable description of one exit-time control problem.

    Coefficient signatures: ``b(t, x, alpha, u)``, ``sigma(t, x, alpha, u)``,
    ``l(t, x, alpha, u)`` (running cost rate), ``g(t, x, alpha)`` (terminal
    and boundary cost).  ``x`` may be an ndarray; scalar-only callables are
    wrapped with ``np.vectorize`` automatically at construction.  Maps must
    be pure (same inputs, same outputs).

    ``l`` and ``g`` are always minimization costs.  Builders of maximization
    problems negate their payoff before constructing the spec and set
    ``maximize=True`` so reports can restore the original sign.
    """

    gen: GeneratorMatrix
    b: Coefficient
    sigma: Coefficient
    l: Coefficient
    g: Coefficient
    control_set: ControlSet
    t_end: float
    upper_boundary: float | None = None
    maximize: bool = False
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "gen", validate_generator(self.gen))
        if not self.t_end > 0:
            raise ValueError("horizon t_end must be positive")
        if self.upper_boundary is not None and self.upper_boundary <= 0:
            raise ValueError("upper boundary must be positive")
        # wrap scalar-only coefficient maps so array x evaluation always works
        probe_x = np.array([0.5, 1.5])
        u0 = self.control_set.lo
        for attr in ("b", "sigma", "l"):
            f = getattr(self, attr)
            if not _vectorized_over_x(f, 0.0, probe_x, 0, u0):
                object.__setattr__(self, attr, np.vectorize(f, otypes=[float]))
        if not _vectorized_over_x(self.g, 0.0, probe_x, 0):
            object.__setattr__(self, "g", np.vectorize(self.g, otypes=[float]))

    @property
    def m(self) -> int:
        return self.gen.m

    def describe(self) -> dict:
        """JSON-able identity used in output metadata and grid hashes."""
        return {
            "name": self.name,
            "params": dict(self.params),
            "regimes": self.m,
            "t_end": self.t_end,
            "upper_boundary": self.upper_boundary,
            "maximize": self.maximize,
            "control_lo": self.control_set.lo,
            "control_hi": self.control_set.hi,
            "control_points": self.control_set.points,
        }

    def model_hash(self) -> str:
        blob = json.dumps(self.describe(), sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def with_costs(self, l=None, g=None, name=None) -> "ModelSpec":
        """Copy with replaced cost maps (used by comparison tests)."""
        return replace(
            self,
            l=l if l is not None else self.l,
            g=g if g is not None else self.g,
            name=name if name is not None else self.name,
        )


@dataclass(frozen=True)
class AssumptionReport:
    """Result of the empirical Lipschitz/growth probe.

    ``kappa0_hat`` is the largest observed ratio (Lipschitz difference
    quotients of b, sigma, l, g together with the linear-growth ratio of
    |b|+|sigma|); ``p_hat`` is the smallest integer exponent at which the
    polynomial-growth ratio of |l|+|g| stays under the cap.
    """

    kappa0_hat: float
    p_hat: float
    lipschitz_hat: float
    growth_hat: float
    worst_violation: dict
    passed: bool
    cap: float


def _probe_points(model, x_range, t_grid, n_pairs, rng):
    x_lo, x_hi = x_range
    xs_det = np.linspace(x_lo, x_hi, 9)
    if t_grid is None:
        t_grid = np.linspace(0.0, model.t_end, 7)
    t_grid = np.asarray(t_grid, dtype=float)
    us = model.control_set.values(5)
    # deterministic pairs: all adjacent grid pairs plus the extreme pair
    pairs = [(xs_det[i], xs_det[i + 1]) for i in range(len(xs_det) - 1)]
    pairs.append((x_lo, x_hi))
    det = [(t, x, y, a, u) for t in t_grid for (x, y) in pairs
           for a in range(model.m) for u in us]
    rand = []
    for _ in range(n_pairs):
        t = rng.uniform(0.0, model.t_end)
        x, y = rng.uniform(x_lo, x_hi, size=2)
        if x == y:
            continue
        a = int(rng.integers(model.m))
        u = float(rng.uniform(model.control_set.lo, model.control_set.hi))
        rand.append((t, x, y, a, u))
    return det + rand


def check_assumption_a1(
    model: ModelSpec,
    x_range: tuple[float, float] = (0.0, 10.0),
    t_grid=None,
    n_pairs: int = 2000,
    rng: np.random.Generator | None = None,
    cap: float = 50.0,
    p_max: int = 8,
) -> AssumptionReport:
    """Probe the coefficients for Lipschitz continuity and growth bounds.

    Samples deterministic and random (t, x, y, alpha, u) tuples over the
    window and reports the worst difference quotient of b, sigma, l and g,
    the worst ratio (|b|+|sigma|)/(1+|x|), and the polynomial growth
    exponent for |l|+|g|.  This is an empirical guardrail on a bounded
    window, not a proof; ``passed`` means every ratio is finite and at most
    ``cap``.

    Determinism: identical rng states give identical reports.  Enlarging
    ``x_range`` cannot decrease ``kappa0_hat`` because the probe always
    includes the window endpoints.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    pts = _probe_points(model, x_range, t_grid, n_pairs, rng)

    lip = 0.0
    growth = 0.0
    worst = {"ratio": -np.inf, "kind": None, "at": None}

    def _note(kind, ratio, at):
        nonlocal worst
        if ratio > worst["ratio"]:
            worst = {"ratio": float(ratio), "kind": kind, "at": at}

    coeffs = [("b", model.b, True), ("sigma", model.sigma, True),
              ("l", model.l, True), ("g", model.g, False)]
    for t, x, y, a, u in pts:
        vals = {}
        for cname, f, with_u in coeffs:
            fx = float(f(t, x, a, u)) if with_u else float(f(t, x, a))
            fy = float(f(t, y, a, u)) if with_u else float(f(t, y, a))
            if not (np.isfinite(fx) and np.isfinite(fy)):
                raise NonFiniteCoefficientError(cname, (t, x if np.isfinite(fx) else y, a, u))
            vals[cname] = (fx, fy)
            if x != y:
                qt = abs(fx - fy) / abs(x - y)
                lip = max(lip, qt)
                _note(f"lipschitz[{cname}]", qt, (t, x, y, a, u))
        for xx, k in ((x, 0), (y, 1)):
            gr = (abs(vals["b"][k]) + abs(vals["sigma"][k])) / (1.0 + abs(xx))
            growth = max(growth, gr)
            _note("linear_growth[b+sigma]", gr, (t, xx, a, u))
    # polynomial exponent: smallest integer p with (|l|+|g|)/(1+|x|^p) <= cap
    p_hat = float("inf")
    for p in range(p_max + 1):
        ok = True
        for t, x, y, a, u in pts:
            for xx in (x, y):
                lv = abs(float(model.l(t, xx, a, u))) + abs(float(model.g(t, xx, a)))
                if lv / (1.0 + abs(xx) ** p) > cap:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            p_hat = float(p)
            break

    kappa0 = max(lip, growth)
    passed = bool(np.isfinite(kappa0) and kappa0 <= cap and np.isfinite(p_hat))
    return AssumptionReport(
        kappa0_hat=float(kappa0),
        p_hat=p_hat,
        lipschitz_hat=float(lip),
        growth_hat=float(growth),
        worst_violation=worst,
        passed=passed,
        cap=float(cap),
    )
