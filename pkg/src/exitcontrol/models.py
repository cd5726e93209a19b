"""Built-in model registry.

Four named models cover the toolkit's cross-validation needs:

* ``parabola`` - uncontrolled deterministic drift 2(t-1) on [0, 2] with
  unit running cost; the state follows a parabola, the exit-time value has
  a closed form and is discontinuous across the curve x = (s-1)^2 (paths
  starting below it are dragged into the boundary, paths above escape).
* ``parabola-diffusive`` - same drift plus the degenerate diffusion
  (t - x)+; the boundary point is regular even though the plain boundary
  drift-sign test fails for t > 1, making it the reference case for the
  superharmonic certificate.
* ``reinsurance`` - two-regime surplus under proportional reinsurance
  (retention u in [0, 1]) with seasonal premium and volatility terms and a
  Markov-modulated investment drift; the objective maximizes expected
  discounted surplus until ruin, stored internally as a minimization of
  the negated payoff.  Horizon 100, discount rate r configurable.
* ``brownian-exit`` - standard Brownian motion on (0, 1) with absorbing
  ends and unit running cost; the expected exit time x(1-x) is the
  classical oracle for both the simulator and the solver.

Regimes are indexed 0..m-1 everywhere (files, arrays, reports).
"""

from __future__ import annotations

import numpy as np

from .dynamics import ControlSet, ModelSpec
from .markov_chain import validate_generator
from .regularity import TestFunction

__all__ = [
    "parabola",
    "parabola_diffusive",
    "reinsurance",
    "brownian_exit",
    "MODELS",
    "get_model",
    "model_names",
    "parabola_exit_time",
    "parabola_value",
    "brownian_exit_value",
    "boundary_certificate",
    "default_grid_hint",
]

_ZERO_GEN = [[0.0]]


def _const(c):
    def f(t, x, alpha, u):
        return c + 0.0 * np.asarray(x, dtype=float)
    return f


def _const_g(c):
    def g(t, x, alpha):
        return c + 0.0 * np.asarray(x, dtype=float)
    return g


def parabola() -> ModelSpec:
    """Deterministic tangency model: dX = 2(t-1) dt, cost = time to exit."""
    return ModelSpec(
        gen=validate_generator(_ZERO_GEN),
        b=lambda t, x, a, u: 2.0 * (t - 1.0) + 0.0 * np.asarray(x, dtype=float),
        sigma=_const(0.0),
        l=_const(1.0),
        g=_const_g(0.0),
        control_set=ControlSet.singleton(0.0),
        t_end=2.0,
        name="parabola",
    )


def parabola_diffusive() -> ModelSpec:
    """Tangency drift with the degenerate diffusion (t - x)+."""
    return ModelSpec(
        gen=validate_generator(_ZERO_GEN),
        b=lambda t, x, a, u: 2.0 * (t - 1.0) + 0.0 * np.asarray(x, dtype=float),
        sigma=lambda t, x, a, u: np.maximum(t - np.asarray(x, dtype=float), 0.0),
        l=_const(1.0),
        g=_const_g(0.0),
        control_set=ControlSet.singleton(0.0),
        t_end=2.0,
        name="parabola-diffusive",
    )


def reinsurance(r: float = 0.05) -> ModelSpec:
    """Two-regime reinsurance surplus, maximizing discounted surplus to ruin.

    The retention rate u is the fraction of risk kept; premiums,投資 drift
    and volatility switch with the regime and oscillate seasonally.  The
    stored running cost is the negated discounted payoff rate, so the spec
    minimizes like every other model; ``maximize`` records the original
    orientation.
    """
    q = validate_generator([[-3.0, 3.0], [4.0, -4.0]])

    def b(t, x, a, u):
        x = np.asarray(x, dtype=float)
        if a == 0:
            return np.sin(t) + x + 0.4 - 0.8 * (1.0 - u)
        return np.cos(t) + 3.0 * x + 1.0 - 2.0 * (1.0 - u)

    def sigma(t, x, a, u):
        x = np.asarray(x, dtype=float)
        if a == 0:
            return np.sin(t) + 0.5 * x + 0.5 * u
        return np.cos(t) + x + 2.0 * u

    def l(t, x, a, u):
        return -np.exp(-r * t) * np.asarray(x, dtype=float)

    return ModelSpec(
        gen=q,
        b=b,
        sigma=sigma,
        l=l,
        g=_const_g(0.0),
        control_set=ControlSet.interval(0.0, 1.0),
        t_end=100.0,
        maximize=True,
        name="reinsurance",
        params={"r": r},
    )


def brownian_exit() -> ModelSpec:
    """Brownian motion on (0, 1), absorbing ends, expected-exit-time cost."""
    return ModelSpec(
        gen=validate_generator(_ZERO_GEN),
        b=_const(0.0),
        sigma=_const(1.0),
        l=_const(1.0),
        g=_const_g(0.0),
        control_set=ControlSet.singleton(0.0),
        t_end=10.0,
        upper_boundary=1.0,
        name="brownian-exit",
    )


MODELS = {
    "parabola": parabola,
    "parabola-diffusive": parabola_diffusive,
    "reinsurance": reinsurance,
    "brownian-exit": brownian_exit,
}


def model_names() -> tuple[str, ...]:
    return tuple(sorted(MODELS))


def get_model(name: str, **params) -> ModelSpec:
    key = name.replace("_", "-")
    if key not in MODELS:
        raise KeyError(f"unknown model {name!r}; available: {', '.join(model_names())}")
    return MODELS[key](**params)


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------

def parabola_exit_time(s: float, x: float) -> float:
    """Exact exit-or-horizon time for the deterministic tangency model.

    The state (t-1)^2 + x - (s-1)^2 first hits 0 at 1 - sqrt((s-1)^2 - x)
    when that dip reaches the boundary (s <= 1, x <= (s-1)^2); otherwise
    the path survives to the horizon 2.
    """
    if s <= 1.0 and x <= (s - 1.0) ** 2:
        return 1.0 - np.sqrt((s - 1.0) ** 2 - x)
    return 2.0


def parabola_value(s: float, x: float) -> float:
    """Exit-time cost (unit running rate) of the tangency model; the x = 0
    row carries the boundary data 0."""
    if x <= 0.0:
        return 0.0
    return parabola_exit_time(s, x) - s


def brownian_exit_value(x: float) -> float:
    """Expected exit time of Brownian motion from (0, 1)."""
    return x * (1.0 - x)


# ---------------------------------------------------------------------------
# boundary-regularity certificates
# ---------------------------------------------------------------------------

def boundary_certificate(name: str) -> tuple[TestFunction, float]:
    """Superharmonic test function and constant control for a built-in model.

    Quadratics vanishing at the boundary with the slope tuned per regime;
    analytic derivatives.  The ``parabola`` entry intentionally fails the
    certificate for t > 1 (the boundary point is not regular there).
    """
    key = name.replace("_", "-")
    if key in ("parabola", "parabola-diffusive", "brownian-exit"):
        tf = TestFunction(
            phi=lambda x, a: np.asarray(x, dtype=float) * (1.0 - np.asarray(x, dtype=float)),
            dphi=lambda x, a: 1.0 - 2.0 * np.asarray(x, dtype=float),
            d2phi=lambda x, a: -2.0 + 0.0 * np.asarray(x, dtype=float),
            neighborhood=(-0.5, 0.5),
        )
        return tf, 0.0
    if key == "reinsurance":
        slopes = (0.5, 2.0)

        def phi(x, a):
            x = np.asarray(x, dtype=float)
            return slopes[a] * x - x * x

        def dphi(x, a):
            return slopes[a] - 2.0 * np.asarray(x, dtype=float)

        def d2phi(x, a):
            return -2.0 + 0.0 * np.asarray(x, dtype=float)

        tf = TestFunction(phi=phi, dphi=dphi, d2phi=d2phi,
                          neighborhood=(-0.25, 0.25))
        return tf, 0.5
    raise KeyError(f"no boundary certificate for model {name!r}")


def default_grid_hint(name: str) -> dict:
    """Solver grid defaults per model (overridable from the command line)."""
    key = name.replace("_", "-")
    hints = {
        "parabola": dict(x_max=4.0, n_x=400, n_u=1,
                         scheme="explicit", time_stepping="adaptive"),
        "parabola-diffusive": dict(x_max=4.0, n_x=200, n_u=1,
                                   scheme="explicit", time_stepping="adaptive"),
        "brownian-exit": dict(x_max=1.0, n_x=200, n_u=1,
                              scheme="explicit", time_stepping="uniform"),
        "reinsurance": dict(x_max=2.0, n_x=100, n_u=5,
                            scheme="implicit-diffusion", time_stepping="uniform"),
    }
    if key not in hints:
        raise KeyError(f"unknown model {name!r}")
    return hints[key]
