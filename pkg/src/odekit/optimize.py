"""Gradient descent, Adam, and Anderson-accelerated fixed-point iteration."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, NamedTuple

import numpy as np

from .errors import NoConvergence, NonFiniteGradient

CostAndGrad = Callable[[np.ndarray], "tuple[float, np.ndarray]"]


def _as_vector(x) -> np.ndarray:
    return np.atleast_1d(np.array(x, dtype=float))


def _check_grad(g: np.ndarray, iteration: int) -> None:
    if not np.all(np.isfinite(g)):
        raise NonFiniteGradient(f"non-finite gradient at iteration {iteration}", iteration=iteration)


@dataclass(frozen=True)
class GdConfig:
    learning_rate: float = 0.01
    max_iters: int = 1000
    grad_tol: float = 1e-8

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")


def gd_minimize(cost_and_grad: CostAndGrad, theta0, cfg: GdConfig = GdConfig()):
    """Plain gradient descent ``theta <- theta - lr * grad``.

    Stops once the gradient norm drops below ``cfg.grad_tol`` or after
    ``cfg.max_iters`` updates.

    Returns:
        ``(theta_best, cost_best, iters)`` where ``iters`` counts the updates
        taken; the best-cost point seen is returned, not the last.
    """
    theta = _as_vector(theta0)
    best_theta, best_cost = theta, np.inf
    for k in range(cfg.max_iters + 1):
        cost, grad = cost_and_grad(theta)
        grad = _as_vector(grad)
        _check_grad(grad, k)
        if cost < best_cost:
            best_theta, best_cost = theta, float(cost)
        if np.linalg.norm(grad) < cfg.grad_tol or k == cfg.max_iters:
            return best_theta, best_cost, k
        theta = theta - cfg.learning_rate * grad
    raise AssertionError("unreachable")


@dataclass(frozen=True, eq=False)
class AdamState:
    """Immutable Adam optimizer state; :func:`adam_step` returns a new one."""

    theta: np.ndarray
    m: np.ndarray
    v: np.ndarray
    step_count: int = 0
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def init(cls, theta0, lr: float = 0.001, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        theta = _as_vector(theta0)
        if not lr > 0:
            raise ValueError("lr must be positive")
        if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
            raise ValueError("beta1 and beta2 must lie in [0, 1)")
        return cls(theta, np.zeros_like(theta), np.zeros_like(theta), 0, lr, beta1, beta2, eps)


def adam_step(state: AdamState, grad) -> AdamState:
    """One bias-corrected Adam update."""
    g = _as_vector(grad)
    if g.shape != state.theta.shape:
        raise ValueError(f"gradient shape {g.shape} does not match parameters {state.theta.shape}")
    _check_grad(g, state.step_count)
    t = state.step_count + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * g
    v = state.beta2 * state.v + (1.0 - state.beta2) * (g * g)
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    theta = state.theta - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return replace(state, theta=theta, m=m, v=v, step_count=t)


def adam_minimize(cost_and_grad: CostAndGrad, theta0, lr: float, epochs: int, **adam_kwargs):
    """Full-batch Adam for a fixed number of epochs.

    Returns:
        ``(theta_final, cost_history)``; ``cost_history[e]`` is the cost at
        the parameters used for epoch ``e``'s gradient.
    """
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    state = AdamState.init(theta0, lr=lr, **adam_kwargs)
    history = []
    for epoch in range(epochs):
        cost, grad = cost_and_grad(state.theta)
        history.append(float(cost))
        try:
            state = adam_step(state, grad)
        except NonFiniteGradient:
            raise NonFiniteGradient(f"non-finite gradient at epoch {epoch}", iteration=epoch) from None
    return state.theta, history


@dataclass(frozen=True)
class AndersonConfig:
    window: int = 5
    tol: float = 1e-10
    max_iters: int = 200
    mixing: float = 1.0

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not 0.0 < self.mixing <= 1.0:
            raise ValueError("mixing must lie in (0, 1]")


class FixedPointResult(NamedTuple):
    x: np.ndarray
    iters: int
    residual_norm: float


def fixed_point_iterate(G: Callable, x0, tol: float, max_iters: int) -> FixedPointResult:
    """Plain iteration ``x <- G(x)``; stops when ``||G(x) - x|| <= tol``.

    Never raises on budget exhaustion; the final iterate is returned.
    """
    x = _as_vector(x0)
    gx = _as_vector(G(x))
    res = float(np.linalg.norm(gx - x))
    k = 0
    while res > tol and k < max_iters:
        x = gx
        gx = _as_vector(G(x))
        res = float(np.linalg.norm(gx - x))
        k += 1
    return FixedPointResult(x, k, res)


# columns are dropped (oldest first) until the difference matrix is this well conditioned
_MAX_COND = 1e12


def _anderson_coefficients(dF: np.ndarray, f: np.ndarray) -> tuple[np.ndarray, int]:
    """Least-squares ``min ||f - dF @ alpha||``, truncating history on rank loss."""
    start = 0
    n_cols = dF.shape[1]
    while start < n_cols:
        cols = dF[:, start:]
        sv = np.linalg.svd(cols, compute_uv=False)
        if sv[0] > 0.0 and sv[-1] > sv[0] / _MAX_COND and sv.size == cols.shape[1]:
            alpha, *_ = np.linalg.lstsq(cols, f, rcond=None)
            return alpha, start
        start += 1
    return np.zeros(0), n_cols


def anderson_accelerate(G: Callable, x0, cfg: AndersonConfig = AndersonConfig()) -> FixedPointResult:
    """Type-II Anderson acceleration for ``x = G(x)``.

    With residuals ``f_i = G(x_i) - x_i`` over the last ``window`` iterates, the
    affine combination ``gamma`` minimising ``||sum gamma_i f_i||`` is found and
    ``x_{k+1} = sum gamma_i (x_i + mixing * f_i)``. If the residual differences
    are rank-deficient the oldest ones are dropped; with none left the step
    falls back to ``x_{k+1} = x_k + mixing * f_k``.

    Raises:
        NoConvergence: after ``cfg.max_iters`` updates, carrying the best iterate.
    """
    x = _as_vector(x0)
    g = _as_vector(G(x))
    if g.shape != x.shape:
        raise ValueError("G must preserve the dimension of x")
    f = g - x
    res = float(np.linalg.norm(f))
    best = FixedPointResult(x, 0, res)
    if res <= cfg.tol:
        return best
    xs, fs = [x], [f]
    beta = cfg.mixing
    for k in range(cfg.max_iters):
        m_k = min(cfg.window, len(xs) - 1)
        x_plain = x + beta * f
        if m_k == 0:
            x_new = x_plain
        else:
            X = np.stack(xs[-(m_k + 1):], axis=1)
            F = np.stack(fs[-(m_k + 1):], axis=1)
            dX, dF = np.diff(X, axis=1), np.diff(F, axis=1)
            alpha, dropped = _anderson_coefficients(dF, f)
            if alpha.size == 0:
                x_new = x_plain
            else:
                x_new = x_plain - (dX[:, dropped:] + beta * dF[:, dropped:]) @ alpha
        x = x_new
        g = _as_vector(G(x))
        f = g - x
        res = float(np.linalg.norm(f))
        if not np.isfinite(res):
            break
        if res < best.residual_norm:
            best = FixedPointResult(x, k + 1, res)
        if res <= cfg.tol:
            return FixedPointResult(x, k + 1, res)
        xs.append(x)
        fs.append(f)
        if len(xs) > cfg.window + 1:
            xs.pop(0)
            fs.pop(0)
    raise NoConvergence(
        f"Anderson acceleration did not reach tol={cfg.tol} in {cfg.max_iters} iterations",
        x=best.x,
        iters=cfg.max_iters,
        residual=best.residual_norm,
    )
