"""Forward sensitivities of fixed-step trajectories with respect to parameters.

The state is augmented with ``S = dy/dtheta`` and the pair is advanced with the
same tableau and grid, using ``dS/dt = (df/dy) S + df/dtheta``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .ode_core import ButcherTableau, IvpProblem, Trajectory, integrate

JacobianFn = Callable[[float, np.ndarray, object], np.ndarray]


@dataclass(frozen=True, eq=False)
class SensitivityProblem:
    """An IVP together with analytic Jacobians of its right-hand side.

    ``jac_y(t, y, theta)`` returns ``(dim, dim)`` and ``jac_theta(t, y, theta)``
    returns ``(dim, p)``. The initial state is taken as independent of theta.
    ``jacobians``, when given, returns both at once and is used instead.
    """

    base: IvpProblem
    jac_y: JacobianFn
    jac_theta: JacobianFn
    n_params: int
    jacobians: Optional[Callable] = None

    @property
    def dim(self) -> int:
        return self.base.y0.shape[-1]


@dataclass(frozen=True, eq=False)
class SensitivityTrajectory:
    trajectory: Trajectory
    sens: np.ndarray  # (n_points, dim, p)

    def __len__(self) -> int:
        return self.sens.shape[0]


def _augmented_rhs(problem: SensitivityProblem):
    f = problem.base.rhs
    d, p = problem.dim, problem.n_params
    jacobians = problem.jacobians
    if jacobians is None:
        jy, jp = problem.jac_y, problem.jac_theta

        def jacobians(t, y, theta):
            return jy(t, y, theta), jp(t, y, theta)

    def rhs(t, z, theta):
        y = z[:d]
        s = z[d:].reshape(d, p)
        a, b = jacobians(t, y, theta)
        out = np.empty_like(z)
        out[:d] = f(t, y, theta)
        out[d:] = (a @ s + b).ravel()
        return out

    return rhs


def integrate_with_sensitivity(tableau: ButcherTableau, problem: SensitivityProblem) -> SensitivityTrajectory:
    """Integrate a problem and its parameter sensitivities together.

    The RK arithmetic is elementwise, so the ``y`` block of the augmented
    solve is bit-identical to :func:`odekit.ode_core.integrate` on ``base``.
    """
    base = problem.base
    if base.y0.ndim != 1:
        raise ValueError("sensitivities require a single (unbatched) state vector")
    d, p = problem.dim, problem.n_params
    z0 = np.concatenate([base.y0, np.zeros(d * p)])
    aug = IvpProblem(_augmented_rhs(problem), z0, base.params, base.grid)
    traj = integrate(tableau, aug)
    states = traj.states[:, :d].copy()
    sens = traj.states[:, d:].reshape(-1, d, p)
    return SensitivityTrajectory(Trajectory(base.grid, states), sens)


def chain_rule_gradient(sens: np.ndarray, state_grads: np.ndarray) -> np.ndarray:
    """``sum_i S_i^T g_i`` for sensitivities ``(n, d, p)`` and gradients ``(n, d)``."""
    return np.einsum("idp,id->p", sens, state_grads)


def grad_scalar_loss(
    tableau: ButcherTableau,
    problem: SensitivityProblem,
    loss_grad: Callable[[Trajectory], np.ndarray],
) -> np.ndarray:
    """Gradient of a trajectory loss with respect to the parameters.

    Args:
        loss_grad: maps the solved trajectory to ``dL/dy(t_i)`` for every grid
            point, shape ``(n_steps + 1, dim)``.
    """
    st = integrate_with_sensitivity(tableau, problem)
    g = np.asarray(loss_grad(st.trajectory), dtype=float)
    if g.shape != st.trajectory.states.shape:
        raise ValueError(f"loss_grad returned shape {g.shape}, expected {st.trajectory.states.shape}")
    return chain_rule_gradient(st.sens, g)


def finite_difference_gradient(cost: Callable[[np.ndarray], float], theta, eps: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of ``cost`` at ``theta``."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    grad = np.empty_like(theta)
    for i in range(theta.size):
        up = theta.copy()
        dn = theta.copy()
        up[i] += eps
        dn[i] -= eps
        grad[i] = (cost(up) - cost(dn)) / (2.0 * eps)
    return grad
