"""Neural ODE: a tanh MLP vector field trained through the fixed-step solver.

Gradients come from forward sensitivities with the MLP's analytic Jacobians,
so no autodiff framework is involved.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteGradient
from .models import OscillatorParams, oscillator_rhs
from .ode_core import IvpProblem, TimeGrid, Trajectory, integrate, make_tableau
from .optimize import AdamState, adam_step
from .sensitivity import SensitivityProblem, chain_rule_gradient, integrate_with_sensitivity

log = logging.getLogger(__name__)

STATE_DIM = 2


@dataclass(frozen=True, eq=False)
class MlpParams:
    """Weights of ``W3 tanh(W2 tanh(W1 y + b1) + b2) + b3``.

    Flat order is ``W1, b1, W2, b2, W3, b3`` with row-major matrices.
    """

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    W3: np.ndarray
    b3: np.ndarray

    @property
    def hidden(self) -> int:
        return self.b1.shape[0]

    @property
    def size(self) -> int:
        return n_params(self.hidden)

    def flatten(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in (self.W1, self.b1, self.W2, self.b2, self.W3, self.b3)])

    @classmethod
    def unflatten(cls, theta: np.ndarray, hidden: int, dim: int = STATE_DIM) -> "MlpParams":
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (n_params(hidden, dim),):
            raise ValueError(f"expected {n_params(hidden, dim)} parameters, got {theta.shape}")
        shapes = [(hidden, dim), (hidden,), (hidden, hidden), (hidden,), (dim, hidden), (dim,)]
        parts, i = [], 0
        for shp in shapes:
            n = int(np.prod(shp))
            parts.append(theta[i : i + n].reshape(shp))
            i += n
        return cls(*parts)


def n_params(hidden: int, dim: int = STATE_DIM) -> int:
    return hidden * dim + hidden + hidden * hidden + hidden + dim * hidden + dim


def hidden_from_size(size: int, dim: int = STATE_DIM) -> int:
    for h in range(1, 4096):
        if n_params(h, dim) == size:
            return h
        if n_params(h, dim) > size:
            break
    raise ValueError(f"{size} is not a valid MLP parameter count")


def init_mlp(hidden: int, seed: int, dim: int = STATE_DIM) -> MlpParams:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for each layer's weights and biases."""
    rng = np.random.default_rng(seed)

    def layer(fan_in, fan_out):
        s = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-s, s, size=(fan_out, fan_in)), rng.uniform(-s, s, size=fan_out)

    W1, b1 = layer(dim, hidden)
    W2, b2 = layer(hidden, hidden)
    W3, b3 = layer(hidden, dim)
    return MlpParams(W1, b1, W2, b2, W3, b3)


def mlp_forward(p: MlpParams, y: np.ndarray) -> np.ndarray:
    """Evaluate the field at ``y`` (leading batch axes allowed)."""
    h1 = np.tanh(y @ p.W1.T + p.b1)
    h2 = np.tanh(h1 @ p.W2.T + p.b2)
    return h2 @ p.W3.T + p.b3


def mlp_jacobians(p: MlpParams, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``(df/dy, df/dtheta)`` at a single state; shapes ``(d, d)`` and ``(d, P)``."""
    d = y.shape[0]
    H = p.hidden
    h1 = np.tanh(p.W1 @ y + p.b1)
    h2 = np.tanh(p.W2 @ h1 + p.b2)
    s1 = 1.0 - h1 * h1
    s2 = 1.0 - h2 * h2
    M2 = p.W3 * s2  # df/db2, (d, H)
    M1 = (M2 @ p.W2) * s1  # df/db1, (d, H)
    jy = M1 @ p.W1
    dW3 = np.zeros((d, d, H))
    dW3[np.arange(d), np.arange(d)] = h2
    jp = np.concatenate(
        [
            (M1[:, :, None] * y[None, None, :]).reshape(d, H * d),
            M1,
            (M2[:, :, None] * h1[None, None, :]).reshape(d, H * H),
            M2,
            dW3.reshape(d, d * H),
            np.eye(d),
        ],
        axis=1,
    )
    return jy, jp


def _field(hidden: int):
    def rhs(t, y, theta):
        return mlp_forward(MlpParams.unflatten(theta, hidden), y)

    def jacobians(t, y, theta):
        return mlp_jacobians(MlpParams.unflatten(theta, hidden), y)

    return rhs, jacobians


@dataclass(frozen=True)
class NodeTrainConfig:
    learning_rate: float = 0.01
    epochs: int = 1000
    seed: int = 0
    method: str = "rk38"
    hidden: int = 32

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.hidden < 1:
            raise ValueError("hidden must be >= 1")
        make_tableau(self.method)


def solve_field(theta: np.ndarray, hidden: int, y0, grid: TimeGrid, method: str = "rk38") -> Trajectory:
    rhs, _ = _field(hidden)
    return integrate(make_tableau(method), IvpProblem(rhs, y0, np.asarray(theta, dtype=float), grid))


def loss_and_gradient(theta: np.ndarray, hidden: int, data: Trajectory, method: str = "rk38") -> tuple[float, np.ndarray]:
    """MSE between the field's solve and ``data`` and its parameter gradient."""
    rhs, jacobians = _field(hidden)
    theta = np.asarray(theta, dtype=float)
    problem = SensitivityProblem(
        IvpProblem(rhs, data.states[0], theta, data.grid),
        jac_y=lambda t, y, th: jacobians(t, y, th)[0],
        jac_theta=lambda t, y, th: jacobians(t, y, th)[1],
        n_params=theta.size,
        jacobians=jacobians,
    )
    st = integrate_with_sensitivity(make_tableau(method), problem)
    diff = st.trajectory.states - data.states
    loss = float(np.mean(diff * diff))
    return loss, chain_rule_gradient(st.sens, 2.0 * diff / diff.size)


def train_neural_ode(data: Trajectory, cfg: NodeTrainConfig = NodeTrainConfig(), init: MlpParams | None = None):
    """Full-batch Adam on the trajectory MSE.

    Returns:
        ``(params, loss_history)`` where ``loss_history[e]`` is the MSE at the
        parameters entering epoch ``e``.

    Raises:
        NonFiniteGradient: with the epoch index.
    """
    if data.stride != 1:
        raise ValueError("training data must hold every grid point")
    p0 = init if init is not None else init_mlp(cfg.hidden, cfg.seed, data.states.shape[1])
    state = AdamState.init(p0.flatten(), lr=cfg.learning_rate)
    history = []
    for epoch in range(cfg.epochs):
        loss, grad = loss_and_gradient(state.theta, p0.hidden, data, cfg.method)
        history.append(loss)
        if not np.all(np.isfinite(grad)):
            raise NonFiniteGradient(f"non-finite gradient at epoch {epoch}", iteration=epoch)
        state = adam_step(state, grad)
        if epoch % 100 == 0:
            log.debug("epoch %d loss %.3e", epoch, loss)
    return MlpParams.unflatten(state.theta, p0.hidden, data.states.shape[1]), history


def extrapolate(p: MlpParams, y0, grid: TimeGrid, method: str = "rk38") -> Trajectory:
    """Plain solve of the trained field on ``grid``."""
    return solve_field(p.flatten(), p.hidden, y0, grid, method)


def oscillator_data(
    params: OscillatorParams = OscillatorParams(1.0, 0.1),
    y0=(0.99, -0.99),
    grid: TimeGrid = TimeGrid(0.0, 30.0, 100),
    method: str = "rk38",
) -> Trajectory:
    """Simulated damped-oscillator trajectory used as Neural ODE training data."""
    rhs = lambda t, y, q: oscillator_rhs(q, t, y)  # noqa: E731
    return integrate(make_tableau(method), IvpProblem(rhs, y0, params, grid))


def mean_abs_error(a: Trajectory, b: Trajectory) -> float:
    return float(np.mean(np.abs(a.states - b.states)))
