"""Broyden quasi-Newton root finders for ``F(x) = 0``."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

from .errors import NoConvergence, SingularUpdate

log = logging.getLogger(__name__)

# relative threshold below which the broyden2 update denominator is treated as zero
DEGENERATE_DENOMINATOR = 1e-14


@dataclass(frozen=True, eq=False)
class RootConfig:
    """Stopping rule and initial matrix.

    ``B0`` is a Jacobian approximation for :func:`broyden1` and an inverse
    Jacobian approximation for :func:`broyden2`. ``None`` means identity.
    """

    tol: float = 1e-10
    max_iters: int = 100
    B0: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")

    def initial_matrix(self, n: int) -> np.ndarray:
        if self.B0 is None:
            return np.eye(n)
        B = np.atleast_2d(np.array(self.B0, dtype=float))
        if B.shape != (n, n):
            raise ValueError(f"B0 has shape {B.shape}, expected {(n, n)}")
        return B


class RootResult(NamedTuple):
    x: np.ndarray
    iters: int
    fnorm: float


UpdateCallback = Callable[[int, np.ndarray, np.ndarray, np.ndarray], None]


def _evaluate(F, x, n):
    fx = np.atleast_1d(np.asarray(F(x), dtype=float))
    if fx.shape != (n,):
        raise ValueError(f"F returned shape {fx.shape}, expected {(n,)}")
    return fx


def broyden1(F: Callable, x0, cfg: RootConfig = RootConfig(), callback: UpdateCallback | None = None) -> RootResult:
    """Broyden's first ("good") method with a dense Jacobian approximation.

    Each iteration solves ``B s = -F(x)``, steps ``x += s`` and applies the
    rank-one update ``B += (y - B s) s^T / (s^T s)`` with ``y`` the change in F.

    Args:
        callback: called as ``callback(k, B_new, s, y)`` after every update.

    Raises:
        SingularUpdate: if ``B`` cannot be factorised.
        NoConvergence: after ``cfg.max_iters`` iterations (best iterate attached).
    """
    x = np.atleast_1d(np.array(x0, dtype=float))
    n = x.size
    B = cfg.initial_matrix(n)
    fx = _evaluate(F, x, n)
    fnorm = float(np.linalg.norm(fx))
    best = RootResult(x, 0, fnorm)
    if fnorm <= cfg.tol:
        return best
    for k in range(cfg.max_iters):
        try:
            s = np.linalg.solve(B, -fx)
        except np.linalg.LinAlgError as exc:
            raise SingularUpdate(f"Jacobian approximation is singular at iteration {k}") from exc
        x = x + s
        fx_new = _evaluate(F, x, n)
        y = fx_new - fx
        fx = fx_new
        fnorm = float(np.linalg.norm(fx))
        if fnorm < best.fnorm:
            best = RootResult(x, k + 1, fnorm)
        if fnorm <= cfg.tol:
            return RootResult(x, k + 1, fnorm)
        ss = float(s @ s)
        if ss == 0.0:
            raise SingularUpdate(f"zero step at iteration {k}")
        B = B + np.outer(y - B @ s, s) / ss
        if callback is not None:
            callback(k, B, s, y)
    raise NoConvergence(f"broyden1 did not converge in {cfg.max_iters} iterations", x=best.x, iters=cfg.max_iters, residual=best.fnorm)


def broyden2(F: Callable, x0, cfg: RootConfig = RootConfig(), callback: UpdateCallback | None = None) -> RootResult:
    """Broyden's second ("bad") method on an inverse-Jacobian approximation.

    Steps with ``s = -B F(x)`` and updates
    ``B += (s - B y) s^T B / (s^T B y)``. When the denominator is negligible
    relative to ``||s|| ||B y||`` the update is skipped and ``B`` kept.

    Raises:
        NoConvergence: after ``cfg.max_iters`` iterations (best iterate attached).
    """
    x = np.atleast_1d(np.array(x0, dtype=float))
    n = x.size
    B = cfg.initial_matrix(n)
    fx = _evaluate(F, x, n)
    fnorm = float(np.linalg.norm(fx))
    best = RootResult(x, 0, fnorm)
    if fnorm <= cfg.tol:
        return best
    for k in range(cfg.max_iters):
        s = -B @ fx
        x = x + s
        fx_new = _evaluate(F, x, n)
        y = fx_new - fx
        fx = fx_new
        fnorm = float(np.linalg.norm(fx))
        if not np.isfinite(fnorm):
            break
        if fnorm < best.fnorm:
            best = RootResult(x, k + 1, fnorm)
        if fnorm <= cfg.tol:
            return RootResult(x, k + 1, fnorm)
        By = B @ y
        sB = s @ B
        denom = float(s @ By)
        scale = float(np.linalg.norm(s) * np.linalg.norm(By))
        if abs(denom) <= DEGENERATE_DENOMINATOR * scale or scale == 0.0:
            log.debug("broyden2: degenerate denominator at iteration %d, update skipped", k)
            continue
        B = B + np.outer(s - By, sB) / denom
        if callback is not None:
            callback(k, B, s, y)
    raise NoConvergence(f"broyden2 did not converge in {cfg.max_iters} iterations", x=best.x, iters=cfg.max_iters, residual=best.fnorm)

