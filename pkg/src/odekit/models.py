"""Analytic model zoo: Lotka-Volterra, damped oscillator, mammillary compartments.

Every right-hand side broadcasts over leading batch axes of the state (and of
array-valued parameters), so a batch of models can be advanced at once.
Jacobians are for a single unbatched state.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class LotkaVolterraParams:
    alpha: float
    beta: float
    gamma: float
    delta: float

    names = ("alpha", "beta", "gamma", "delta")

    def to_vector(self) -> np.ndarray:
        return np.array([self.alpha, self.beta, self.gamma, self.delta], dtype=float)

    @classmethod
    def from_vector(cls, theta) -> "LotkaVolterraParams":
        theta = np.asarray(theta)
        if theta.ndim == 1:
            return cls(*theta.tolist())
        return cls(theta[..., 0], theta[..., 1], theta[..., 2], theta[..., 3])


# ground truth used for parameter-estimation reproduction
LV_GROUND_TRUTH = LotkaVolterraParams(1.1, 0.4, 0.1, 0.4)


def lv_rhs(p: LotkaVolterraParams, t: float, s: np.ndarray) -> np.ndarray:
    """Predator-prey field ``(alpha x - beta x y, gamma x y - delta y)``."""
    x = s[..., 0]
    y = s[..., 1]
    xy = x * y
    out = np.empty(np.broadcast_shapes(s.shape, np.shape(p.alpha) + (2,)))
    out[..., 0] = p.alpha * x - p.beta * xy
    out[..., 1] = p.gamma * xy - p.delta * y
    return out


def lv_jacobians(p: LotkaVolterraParams, t: float, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``(df/d(x, y), df/d(alpha, beta, gamma, delta))`` at a single state."""
    x, y = float(s[0]), float(s[1])
    jy = np.array([[p.alpha - p.beta * y, -p.beta * x], [p.gamma * y, p.gamma * x - p.delta]])
    jp = np.array([[x, -x * y, 0.0, 0.0], [0.0, 0.0, x * y, -y]])
    return jy, jp


def lv_invariant(p: LotkaVolterraParams, s: np.ndarray) -> np.ndarray:
    """First integral ``gamma x - delta ln x + beta y - alpha ln y``."""
    x = s[..., 0]
    y = s[..., 1]
    return p.gamma * x - p.delta * np.log(x) + p.beta * y - p.alpha * np.log(y)


@dataclass(frozen=True)
class OscillatorParams:
    k: float = 1.0
    b: float = 0.1

    names = ("k", "b")

    def to_vector(self) -> np.ndarray:
        return np.array([self.k, self.b], dtype=float)

    @classmethod
    def from_vector(cls, theta) -> "OscillatorParams":
        theta = np.asarray(theta)
        if theta.ndim == 1:
            return cls(*theta.tolist())
        return cls(theta[..., 0], theta[..., 1])


def oscillator_rhs(p: OscillatorParams, t: float, s: np.ndarray) -> np.ndarray:
    """Damped oscillator ``(v, -k x - b v)``."""
    x = s[..., 0]
    v = s[..., 1]
    out = np.empty(np.broadcast_shapes(s.shape, np.shape(p.k) + (2,)))
    out[..., 0] = v
    out[..., 1] = -p.k * x - p.b * v
    return out


def oscillator_jacobians(p: OscillatorParams, t: float, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x, v = float(s[0]), float(s[1])
    jy = np.array([[0.0, 1.0], [-p.k, -p.b]])
    jp = np.array([[0.0, 0.0], [-x, -v]])
    return jy, jp


@dataclass(frozen=True, eq=False)
class CompartmentParams:
    """Mammillary model: compartment 0 is central, 1..n-1 are peripheral.

    ``k_out[i]`` moves mass central -> peripheral ``i+1``, ``k_in[i]`` the
    reverse, and ``k_elim`` removes it from the central compartment. Arrays may
    carry leading batch axes, ``k_out``/``k_in`` with shape ``(..., n-1)``.
    """

    k_elim: np.ndarray
    k_out: np.ndarray
    k_in: np.ndarray

    def __post_init__(self):
        k_out = np.asarray(self.k_out, dtype=float)
        k_in = np.asarray(self.k_in, dtype=float)
        k_elim = np.asarray(self.k_elim, dtype=float)
        if k_out.shape != k_in.shape or k_out.ndim < 1 or k_out.shape[-1] < 1:
            raise ValueError("k_out and k_in must share a shape (..., n-1) with n >= 2")
        if k_elim.shape != k_out.shape[:-1]:
            raise ValueError("k_elim must match the batch shape of k_out")
        if np.any(k_out < 0) or np.any(k_in < 0) or np.any(k_elim < 0):
            raise ValueError("compartment rates must be non-negative")
        object.__setattr__(self, "k_out", k_out)
        object.__setattr__(self, "k_in", k_in)
        object.__setattr__(self, "k_elim", k_elim if k_elim.ndim else float(k_elim))

    @property
    def n(self) -> int:
        return self.k_out.shape[-1] + 1

    def to_vector(self) -> np.ndarray:
        """``(k_elim, k_out..., k_in...)``, length ``2n - 1``."""
        return np.concatenate([np.atleast_1d(self.k_elim), self.k_out, self.k_in])

    @classmethod
    def from_vector(cls, theta) -> "CompartmentParams":
        theta = np.asarray(theta, dtype=float)
        m = (theta.shape[-1] - 1) // 2
        return cls(theta[..., 0], theta[..., 1 : 1 + m], theta[..., 1 + m :])


def compartment_rhs(p: CompartmentParams, t: float, C: np.ndarray) -> np.ndarray:
    """Central/peripheral exchange with first-order elimination from the centre."""
    c1 = C[..., :1]
    periph = C[..., 1:]
    back = p.k_in * periph
    out = np.empty(np.broadcast_shapes(C.shape, p.k_out.shape[:-1] + (p.n,)))
    out[..., 0] = -(p.k_elim + p.k_out.sum(axis=-1)) * C[..., 0] + back.sum(axis=-1)
    out[..., 1:] = p.k_out * c1 - back
    return out


def compartment_jacobians(p: CompartmentParams, t: float, C: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``(df/dC, df/d(k_elim, k_out, k_in))``; shapes ``(n, n)`` and ``(n, 2n-1)``."""
    n = p.n
    m = n - 1
    jy = np.zeros((n, n))
    jy[0, 0] = -(p.k_elim + p.k_out.sum())
    jy[0, 1:] = p.k_in
    idx = np.arange(1, n)
    jy[idx, 0] = p.k_out
    jy[idx, idx] = -p.k_in
    c1 = float(C[0])
    periph = np.asarray(C[1:], dtype=float)
    jp = np.zeros((n, 2 * n - 1))
    jp[0, 0] = -c1
    jp[0, 1 : 1 + m] = -c1
    jp[0, 1 + m :] = periph
    jp[idx, idx] = c1
    jp[idx, m + idx] = -periph
    return jy, jp


def random_lv_batch(count: int, rng: np.random.Generator) -> tuple[LotkaVolterraParams, np.ndarray]:
    """Rates uniform in (0, 1); initial states uniform in [10, 15] x [5, 10]."""
    rates = rng.uniform(0.0, 1.0, size=(count, 4))
    x0 = rng.uniform(10.0, 15.0, size=count)
    y0 = rng.uniform(5.0, 10.0, size=count)
    return LotkaVolterraParams.from_vector(rates), np.stack([x0, y0], axis=-1)


def random_compartment_batch(n: int, count: int, rng: np.random.Generator) -> tuple[CompartmentParams, np.ndarray]:
    """Rates uniform in (0, 1); central compartment starts at 10, the rest empty."""
    rates = rng.uniform(0.0, 1.0, size=(count, 2 * n - 1))
    C0 = np.zeros((count, n))
    C0[:, 0] = 10.0
    return CompartmentParams.from_vector(rates), C0


@dataclass(frozen=True, eq=False)
class OdeModel:
    """A model in flat-parameter form, ready for sensitivity solves.

    ``rhs(t, y, theta)``, ``jac_y`` and ``jac_theta`` all take the flat
    parameter vector ``theta``.
    """

    name: str
    param_names: tuple[str, ...]
    rhs: Callable
    jac_y: Callable
    jac_theta: Callable
    jacobians: Callable  # (t, y, theta) -> (jac_y, jac_theta) in one evaluation


def _flat(params_cls, rhs, jac) -> tuple[Callable, Callable, Callable, Callable]:
    def f(t, y, theta):
        return rhs(params_cls.from_vector(theta), t, y)

    def both(t, y, theta):
        return jac(params_cls.from_vector(theta), t, y)

    def jy(t, y, theta):
        return both(t, y, theta)[0]

    def jp(t, y, theta):
        return both(t, y, theta)[1]

    return f, jy, jp, both


def lotka_volterra_model() -> OdeModel:
    return OdeModel("lotka_volterra", LotkaVolterraParams.names, *_flat(LotkaVolterraParams, lv_rhs, lv_jacobians))


def oscillator_model() -> OdeModel:
    return OdeModel("oscillator", OscillatorParams.names, *_flat(OscillatorParams, oscillator_rhs, oscillator_jacobians))


def compartment_model(n: int) -> OdeModel:
    if n < 2:
        raise ValueError("a compartment model needs n >= 2")
    names = ("k_elim",) + tuple(f"k_out_{i}" for i in range(1, n)) + tuple(f"k_in_{i}" for i in range(1, n))
    return OdeModel(f"compartment{n}", names, *_flat(CompartmentParams, compartment_rhs, compartment_jacobians))
