"""Explicit fixed-step Runge-Kutta integration.

States are float64 numpy arrays. The last axis is the state dimension; any
leading axes are treated as independent batch members, which lets a batch of
models with a vectorized right-hand side be advanced in one pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .errors import NonFiniteState

VectorField = Callable[[float, np.ndarray, Any], np.ndarray]

METHODS = ("euler", "rk4", "rk38")


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid of ``n_steps + 1`` points on ``[t0, t1]``."""

    t0: float
    t1: float
    n_steps: int

    def __post_init__(self):
        if not (math.isfinite(self.t0) and math.isfinite(self.t1)):
            raise ValueError("grid bounds must be finite")
        if not self.t1 > self.t0:
            raise ValueError(f"t1 ({self.t1}) must exceed t0 ({self.t0})")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps}")

    @property
    def h(self) -> float:
        return (self.t1 - self.t0) / self.n_steps

    @property
    def points(self) -> np.ndarray:
        # linspace hits t1 exactly and places interior points at t0 + i*h
        return np.linspace(self.t0, self.t1, self.n_steps + 1)

    @classmethod
    def from_step(cls, t0: float, t1: float, h: float) -> "TimeGrid":
        """Build a grid from a step size that divides ``t1 - t0``."""
        n = round((t1 - t0) / h)
        if n < 1 or abs(n * h - (t1 - t0)) > 1e-9 * max(1.0, abs(t1 - t0)):
            raise ValueError(f"step {h} does not divide [{t0}, {t1}]")
        return cls(t0, t1, n)

    def refined(self, factor: int) -> "TimeGrid":
        return TimeGrid(self.t0, self.t1, self.n_steps * factor)


@dataclass(frozen=True, eq=False)
class ButcherTableau:
    """Coefficients ``(a, b, c)`` of an explicit Runge-Kutta method."""

    name: str
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    order: int

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        c = np.asarray(self.c, dtype=float)
        s = b.shape[0]
        if a.shape != (s, s) or c.shape != (s,):
            raise ValueError("tableau shapes are inconsistent")
        if np.any(np.triu(a) != 0.0):
            raise ValueError("tableau is not explicit (a must be strictly lower triangular)")
        if abs(b.sum() - 1.0) > 1e-14:
            raise ValueError("weights b must sum to 1")
        if np.max(np.abs(a.sum(axis=1) - c)) > 1e-14:
            raise ValueError("nodes c must equal the row sums of a")
        for name, arr in (("a", a), ("b", b), ("c", c)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        # (j, h-free coefficient) pairs per stage, zeros skipped
        stage_terms = tuple(
            tuple((j, float(a[i, j])) for j in range(i) if a[i, j] != 0.0) for i in range(s)
        )
        object.__setattr__(self, "_stage_terms", stage_terms)
        object.__setattr__(self, "_c", tuple(float(v) for v in c))
        object.__setattr__(self, "_b", tuple(float(v) for v in b))

    @property
    def stages(self) -> int:
        return self.b.shape[0]


def make_tableau(method_name: str) -> ButcherTableau:
    """Return the standard tableau for ``euler``, ``rk4`` or ``rk38``."""
    if method_name == "euler":
        return ButcherTableau("euler", [[0.0]], [1.0], [0.0], order=1)
    if method_name == "rk4":
        a = [
            [0.0, 0.0, 0.0, 0.0],
            [0.5, 0.0, 0.0, 0.0],
            [0.0, 0.5, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
        ]
        return ButcherTableau("rk4", a, [1 / 6, 1 / 3, 1 / 3, 1 / 6], [0.0, 0.5, 0.5, 1.0], order=4)
    if method_name == "rk38":
        a = [
            [0.0, 0.0, 0.0, 0.0],
            [1 / 3, 0.0, 0.0, 0.0],
            [-1 / 3, 1.0, 0.0, 0.0],
            [1.0, -1.0, 1.0, 0.0],
        ]
        return ButcherTableau("rk38", a, [1 / 8, 3 / 8, 3 / 8, 1 / 8], [0.0, 1 / 3, 2 / 3, 1.0], order=4)
    raise ValueError(f"unknown method {method_name!r}; expected one of {METHODS}")


@dataclass(frozen=True, eq=False)
class IvpProblem:
    """``dy/dt = rhs(t, y, params)`` with ``y(grid.t0) = y0``."""

    rhs: VectorField
    y0: np.ndarray
    params: Any
    grid: TimeGrid

    def __post_init__(self):
        y0 = np.array(self.y0, dtype=float)
        if y0.ndim == 0:
            y0 = y0.reshape(1)
        if not np.all(np.isfinite(y0)):
            raise NonFiniteState("initial state is not finite", step_index=0)
        y0.setflags(write=False)
        object.__setattr__(self, "y0", y0)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States on a time grid.

    ``states[i]`` is the state at ``times[i]``. With ``stride > 1`` only every
    ``stride``-th grid point (always starting at ``t0``) is kept.
    """

    grid: TimeGrid
    states: np.ndarray
    stride: int = 1
    step_indices: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.step_indices is None:
            idx = np.arange(0, self.grid.n_steps + 1, self.stride)
            object.__setattr__(self, "step_indices", idx)

    @property
    def times(self) -> np.ndarray:
        return self.grid.points[self.step_indices]

    def __len__(self) -> int:
        return self.states.shape[0]


def rk_step(tableau: ButcherTableau, f: VectorField, t: float, y: np.ndarray, h: float, theta=None) -> np.ndarray:
    """Advance ``y`` by one explicit RK step of size ``h``.

    Raises:
        NonFiniteState: if a stage derivative or the new state is NaN/Inf.
    """
    ks = []
    for i, terms in enumerate(tableau._stage_terms):
        yi = y
        for j, aij in terms:
            yi = yi + (h * aij) * ks[j]
        ks.append(f(t + tableau._c[i] * h, yi, theta))
    b = tableau._b
    acc = b[0] * ks[0]
    for i in range(1, len(ks)):
        acc = acc + b[i] * ks[i]
    y_new = y + h * acc
    # a non-finite k_i with b_i != 0 always poisons y_new, so only zero-weight stages need their own check
    if not math.isfinite(y_new.sum()):
        raise NonFiniteState("step produced a non-finite state")
    for i, bi in enumerate(b):
        if bi == 0.0 and not math.isfinite(ks[i].sum()):
            raise NonFiniteState(f"stage {i} produced a non-finite derivative")
    return y_new


def integrate(tableau: ButcherTableau, problem: IvpProblem, stride: int = 1) -> Trajectory:
    """Solve ``problem`` on its grid by repeated :func:`rk_step`.

    Args:
        tableau: explicit method.
        problem: the initial value problem.
        stride: keep every ``stride``-th state (step 0 always kept).

    Raises:
        NonFiniteState: carrying the 1-based index of the failing step.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    grid = problem.grid
    ts = grid.points
    h = grid.h
    n_keep = grid.n_steps // stride + 1
    states = np.empty((n_keep,) + problem.y0.shape)
    y = problem.y0.copy()
    states[0] = y
    f, theta = problem.rhs, problem.params
    # blow-up is reported as NonFiniteState, so numpy's overflow warnings are noise
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(grid.n_steps):
            try:
                y = rk_step(tableau, f, float(ts[n]), y, h, theta)
            except NonFiniteState as exc:
                raise NonFiniteState(f"step {n + 1} (t={ts[n + 1]:.6g}): {exc}", step_index=n + 1) from None
            if (n + 1) % stride == 0:
                states[(n + 1) // stride] = y
    return Trajectory(grid, states, stride)
