"""Least-squares parameter estimation for ODE models.

Each outer iteration solves the model with forward sensitivities, forms the
residual against observations and the cost ``J = sum ||r_i||^2``, and takes
one optimizer step using ``grad J = -2 sum S(t_i)^T r_i``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import NonFiniteGradient, NonFiniteState, TimeMismatch
from .models import OdeModel
from .ode_core import ButcherTableau, IvpProblem, TimeGrid, Trajectory, integrate, make_tableau
from .optimize import AdamState, adam_step
from .sensitivity import SensitivityProblem, chain_rule_gradient, integrate_with_sensitivity

log = logging.getLogger(__name__)

# observation times closer than this fraction of a step to a grid point are on it
_TIME_MATCH_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class Observations:
    """Observed values of selected state components.

    ``values[i, j]`` is the observation of component ``components[j]`` at
    ``times[i]``.
    """

    times: np.ndarray
    values: np.ndarray
    components: tuple[int, ...]

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.atleast_2d(np.asarray(self.values, dtype=float))
        comps = tuple(int(c) for c in self.components)
        if times.ndim != 1 or times.size == 0:
            raise ValueError("times must be a non-empty 1-D sequence")
        if np.any(np.diff(times) <= 0):
            raise ValueError("observation times must be strictly increasing")
        if values.shape != (times.size, len(comps)):
            raise ValueError(f"values has shape {values.shape}, expected {(times.size, len(comps))}")
        if sorted(set(comps)) != list(comps):
            raise ValueError("components must be strictly increasing indices")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "components", comps)

    @classmethod
    def from_trajectory(cls, traj: Trajectory, times, components: Sequence[int]) -> "Observations":
        idx = grid_indices(traj, times)
        return cls(traj.times[idx], traj.states[idx][:, list(components)], tuple(components))


def grid_indices(traj: Trajectory, times) -> np.ndarray:
    """Indices of ``times`` in ``traj.times``.

    Raises:
        TimeMismatch: if a time is not a grid point.
    """
    grid_t = traj.times
    spacing = traj.grid.h * traj.stride
    idx = np.rint((np.asarray(times, dtype=float) - grid_t[0]) / spacing).astype(int)
    bad = (idx < 0) | (idx >= grid_t.size)
    if not bad.any():
        bad = np.abs(grid_t[idx] - times) > _TIME_MATCH_RTOL * spacing
    if bad.any():
        t_bad = np.asarray(times)[bad][0]
        raise TimeMismatch(f"observation time {t_bad!r} is not on the solver grid")
    return idx


def residual(obs: Observations, traj: Trajectory) -> np.ndarray:
    """``y_obs - x_pred`` stacked time-major, component-minor."""
    idx = grid_indices(traj, obs.times)
    pred = traj.states[idx][:, list(obs.components)]
    return (obs.values - pred).ravel()


def cost(r: np.ndarray) -> float:
    """Sum of squared residuals."""
    r = np.asarray(r, dtype=float)
    return float(r @ r)


@dataclass(frozen=True, eq=False)
class EstimationConfig:
    """Settings for :func:`estimate_parameters`.

    ``tol`` stops the loop once ``J < tol``; ``rel_tol`` stops it when the
    relative change of ``J`` between iterations falls below that value.
    With ``log_params`` the optimizer works on ``log(theta)``.
    """

    theta0: np.ndarray
    y0: np.ndarray
    grid: TimeGrid
    method: str = "rk38"
    optimizer: str = "adam"
    learning_rate: float = 0.01
    tol: float = 1e-6
    rel_tol: float = 1e-10
    max_outer_iters: int = 5000
    log_params: bool = False

    def __post_init__(self):
        object.__setattr__(self, "theta0", np.atleast_1d(np.array(self.theta0, dtype=float)))
        object.__setattr__(self, "y0", np.atleast_1d(np.array(self.y0, dtype=float)))
        if self.optimizer not in ("gd", "adam"):
            raise ValueError(f"optimizer must be 'gd' or 'adam', got {self.optimizer!r}")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.max_outer_iters < 0:
            raise ValueError("max_outer_iters must be >= 0")
        if self.log_params and np.any(self.theta0 <= 0):
            raise ValueError("log_params requires a positive theta0")

    @property
    def tableau(self) -> ButcherTableau:
        return make_tableau(self.method)


@dataclass
class EstimationResult:
    theta: np.ndarray
    cost: float
    iterations: int
    converged: bool
    reason: str
    log: list[tuple[int, float, list[float]]] = field(default_factory=list)


def _cost_and_gradient(model: OdeModel, obs: Observations, cfg: EstimationConfig, theta: np.ndarray):
    problem = SensitivityProblem(
        IvpProblem(model.rhs, cfg.y0, theta, cfg.grid),
        model.jac_y,
        model.jac_theta,
        theta.size,
        jacobians=model.jacobians,
    )
    st = integrate_with_sensitivity(cfg.tableau, problem)
    traj = st.trajectory
    idx = grid_indices(traj, obs.times)
    pred = traj.states[idx][:, list(obs.components)]
    r = obs.values - pred
    state_grads = np.zeros_like(traj.states)
    state_grads[np.ix_(idx, list(obs.components))] = -2.0 * r
    return cost(r.ravel()), chain_rule_gradient(st.sens, state_grads)


def pipeline_cost(model: OdeModel, obs: Observations, cfg: EstimationConfig, theta) -> float:
    """``J(theta)`` by a plain solve, without sensitivities."""
    theta = np.asarray(theta, dtype=float)
    traj = integrate(cfg.tableau, IvpProblem(model.rhs, cfg.y0, theta, cfg.grid))
    return cost(residual(obs, traj))


def pipeline_gradient(model: OdeModel, obs: Observations, cfg: EstimationConfig, theta) -> np.ndarray:
    return _cost_and_gradient(model, obs, cfg, np.asarray(theta, dtype=float))[1]


def estimate_parameters(model: OdeModel, obs: Observations, cfg: EstimationConfig) -> EstimationResult:
    """Fit ``theta`` to ``obs`` by iterated solve / residual / cost / update.

    The returned ``theta`` is the lowest-cost point visited, so its cost never
    exceeds the cost at ``cfg.theta0``. A run that exhausts
    ``max_outer_iters`` returns with ``converged=False`` rather than raising.

    Raises:
        NonFiniteState, NonFiniteGradient: with the offending theta in the message.
    """
    theta = cfg.theta0.copy()
    phi = np.log(theta) if cfg.log_params else theta
    adam = AdamState.init(phi, lr=cfg.learning_rate) if cfg.optimizer == "adam" else None
    best_theta, best_cost = theta, np.inf
    prev_cost = None
    history: list[tuple[int, float, list[float]]] = []
    reason = "max_iters"
    k = 0
    while True:
        try:
            J, grad = _cost_and_gradient(model, obs, cfg, theta)
        except NonFiniteState as exc:
            raise NonFiniteState(f"solve failed at theta={theta.tolist()}: {exc}", exc.step_index) from None
        if not np.all(np.isfinite(grad)):
            raise NonFiniteGradient(f"non-finite gradient at theta={theta.tolist()}", iteration=k)
        history.append((k, J, theta.tolist()))
        if J < best_cost:
            best_theta, best_cost = theta, J
        if J < cfg.tol:
            reason = "tol"
            break
        if prev_cost is not None and abs(prev_cost - J) <= cfg.rel_tol * max(prev_cost, J):
            reason = "stalled"
            break
        if k >= cfg.max_outer_iters:
            break
        prev_cost = J
        g_phi = grad * theta if cfg.log_params else grad
        if adam is not None:
            adam = adam_step(adam, g_phi)
            phi = adam.theta
        else:
            phi = phi - cfg.learning_rate * g_phi
        theta = np.exp(phi) if cfg.log_params else phi
        k += 1
    log.info("estimation stopped after %d iterations (%s), J=%.3e", k, reason, best_cost)
    return EstimationResult(best_theta, best_cost, k, reason in ("tol", "stalled"), reason, history)
