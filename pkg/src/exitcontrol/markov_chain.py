"""Finite-state continuous-time Markov chains described by a generator matrix.

The regime process jumps between states 0..m-1 at exponential rates read off
the generator (rate) matrix Q: off-diagonal entries are jump rates per unit
time, each diagonal entry is minus its row's off-diagonal sum.  Sampling is
exact (competing exponentials), never time-discretized.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

__all__ = [
    "GeneratorMatrix",
    "RegimePath",
    "NegativeOffDiagonalError",
    "RowSumError",
    "validate_generator",
    "sample_regime_path",
    "transition_matrix",
    "stationary_distribution",
]

#: absolute tolerance on generator row sums accepted by validation
ROW_SUM_TOL = 1e-9


class NegativeOffDiagonalError(ValueError):
    """An off-diagonal rate entry is negative."""

    def __init__(self, i: int, j: int, value: float):
        self.i, self.j, self.value = i, j, value
        super().__init__(f"rate q[{i}][{j}] = {value} must be >= 0")


class RowSumError(ValueError):
    """A generator row does not sum to zero."""

    def __init__(self, i: int, row_sum: float):
        self.i, self.row_sum = i, row_sum
        super().__init__(f"row {i} sums to {row_sum}, expected 0")


@dataclass(frozen=True)
class GeneratorMatrix:
    """Validated m x m transition-rate matrix.

    Construct through :func:`validate_generator`; the stored array is
    read-only, off-diagonal entries are non-negative and every row sums to
    zero to within 1e-12.
    """

    q: NDArray[np.float64]

    @property
    def m(self) -> int:
        """Number of regimes."""
        return self.q.shape[0]

    @property
    def switching(self) -> bool:
        """True if any state has a positive jump rate."""
        return bool(np.any(np.diag(self.q) < 0.0))

    def jump_rate(self, i: int) -> float:
        """Total rate of leaving state ``i``."""
        return -float(self.q[i, i])


@dataclass(frozen=True)
class RegimePath:
    """One realization of the regime process on a window [s, t_end].

    ``states[k]`` holds on the k-th inter-jump segment; ``jump_times`` are
    strictly increasing and lie in (s, t_end).
    """

    s: float
    t_end: float
    jump_times: NDArray[np.float64]
    states: NDArray[np.int64]

    def __post_init__(self):
        if len(self.states) != len(self.jump_times) + 1:
            raise ValueError("need exactly one state per inter-jump segment")
        if len(self.jump_times) > 0:
            if np.any(np.diff(self.jump_times) <= 0):
                raise ValueError("jump times must be strictly increasing")
            if self.jump_times[0] <= self.s or self.jump_times[-1] >= self.t_end:
                raise ValueError("jump times must lie inside (s, t_end)")
            if np.any(self.states[1:] == self.states[:-1]):
                raise ValueError("consecutive segments must differ in state")

    @property
    def n_jumps(self) -> int:
        return len(self.jump_times)

    def state_at(self, t: float) -> int:
        """Regime holding at time ``t`` (right-continuous)."""
        k = int(np.searchsorted(self.jump_times, t, side="right"))
        return int(self.states[k])

    def states_at(self, times: NDArray[np.float64]) -> NDArray[np.int64]:
        """Vectorized :meth:`state_at`."""
        idx = np.searchsorted(self.jump_times, times, side="right")
        return self.states[idx]

    def occupation_times(self) -> NDArray[np.float64]:
        """Total time spent in each visited state, indexed by segment state."""
        edges = np.concatenate(([self.s], self.jump_times, [self.t_end]))
        seg = np.diff(edges)
        out = np.zeros(int(self.states.max()) + 1)
        np.add.at(out, self.states, seg)
        return out


def validate_generator(q) -> GeneratorMatrix:
    """Validate a rate matrix and wrap it as a :class:`GeneratorMatrix`.

    Idempotent: passing an already-validated :class:`GeneratorMatrix`
    returns it unchanged.  The diagonal is re-centered so that each row sums
    to zero exactly (input rows may be off by at most ``ROW_SUM_TOL``).

    Raises
    ------
    NegativeOffDiagonalError
        If some rate q[i][j], i != j, is negative.
    RowSumError
        If some row sum exceeds ``ROW_SUM_TOL`` in magnitude.
    """
    if isinstance(q, GeneratorMatrix):
        return q
    arr = np.array(q, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
        raise ValueError(f"generator must be a square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("generator entries must be finite")
    m = arr.shape[0]
    off = ~np.eye(m, dtype=bool)
    neg = (arr < 0.0) & off
    if np.any(neg):
        i, j = map(int, np.argwhere(neg)[0])
        raise NegativeOffDiagonalError(i, j, float(arr[i, j]))
    sums = arr.sum(axis=1)
    if np.any(np.abs(sums) > ROW_SUM_TOL):
        i = int(np.argmax(np.abs(sums)))
        raise RowSumError(i, float(sums[i]))
    # re-center diagonal so rows sum to zero exactly
    arr[np.eye(m, dtype=bool)] = 0.0
    arr[np.eye(m, dtype=bool)] = -arr.sum(axis=1)
    arr.flags.writeable = False
    return GeneratorMatrix(q=arr)


def sample_regime_path(
    gen: GeneratorMatrix,
    alpha0: int,
    s: float,
    t_end: float,
    rng: np.random.Generator,
) -> RegimePath:
    """Sample the regime process exactly on [s, t_end].

    Holding times in state i are Exp(-q[i][i]); a state with zero jump rate
    is held until ``t_end``.  Jump targets are drawn proportionally to the
    off-diagonal rates of the current row.
    """
    gen = validate_generator(gen)
    if not s < t_end:
        raise ValueError(f"need s < t_end, got [{s}, {t_end}]")
    if not 0 <= alpha0 < gen.m:
        raise ValueError(f"alpha0 = {alpha0} outside 0..{gen.m - 1}")
    q = gen.q
    jump_times: list[float] = []
    states = [int(alpha0)]
    t = s
    state = int(alpha0)
    while True:
        rate = -q[state, state]
        if rate <= 0.0:
            break
        t = t + rng.exponential(1.0 / rate)
        if t >= t_end:
            break
        probs = np.maximum(q[state], 0.0)
        probs[state] = 0.0
        nxt = int(rng.choice(gen.m, p=probs / rate))
        jump_times.append(t)
        states.append(nxt)
        state = nxt
    return RegimePath(
        s=s,
        t_end=t_end,
        jump_times=np.asarray(jump_times, dtype=np.float64),
        states=np.asarray(states, dtype=np.int64),
    )


def transition_matrix(gen: GeneratorMatrix, t: float) -> NDArray[np.float64]:
    """Transition probabilities P(t) = exp(Q t).

    Scaling-and-squaring with a truncated series of order 10; intended as a
    test oracle, not for hot loops.  Rows sum to 1 within 1e-10.
    """
    gen = validate_generator(gen)
    if t < 0:
        raise ValueError("t must be >= 0")
    a = gen.q * t
    m = gen.m
    norm = float(np.linalg.norm(a, np.inf))
    n_sq = max(0, int(np.ceil(np.log2(norm / 0.5)))) if norm > 0.5 else 0
    b = a / (2.0**n_sq)
    p = np.eye(m)
    term = np.eye(m)
    for k in range(1, 11):
        term = term @ b / k
        p = p + term
    for _ in range(n_sq):
        p = p @ p
    p = np.clip(p, 0.0, 1.0)
    return p


def stationary_distribution(gen: GeneratorMatrix) -> NDArray[np.float64]:
    """Solve pi Q = 0 with sum(pi) = 1 by least squares."""
    gen = validate_generator(gen)
    a = np.vstack([gen.q.T, np.ones(gen.m)])
    rhs = np.zeros(gen.m + 1)
    rhs[-1] = 1.0
    pi, *_ = np.linalg.lstsq(a, rhs, rcond=None)
    return pi
