"""Projected limited-memory BFGS for box-constrained smooth minimization."""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

logger = logging.getLogger(__name__)


@dataclass
class TraceRecord:
    iteration: int
    objective: float
    grad_norm: float
    step: float


@dataclass
class OptimizeResult:
    """Outcome of :func:`lbfgs_minimize`.

    ``status`` is one of ``"converged"``, ``"max_iter"``, ``"max_evals"`` or
    ``"line-search-failed"``; in every case ``x`` is the best iterate seen.
    """

    x: np.ndarray
    fun: float
    grad: np.ndarray
    status: str
    n_iter: int
    n_evals: int
    trace: list = field(default_factory=list)

    @property
    def success(self) -> bool:
        return self.status == "converged"


def projected_gradient(x, g, lo, hi):
    """``x - P(x - g)``, zero exactly on components blocked by the box."""
    return x - np.clip(x - g, lo, hi)


def _two_loop(g, S, Y, rho):
    q = g.copy()
    alphas = []
    for s, y, r in zip(reversed(S), reversed(Y), reversed(rho)):
        a = r * np.dot(s, q)
        alphas.append(a)
        q -= a * y
    if S:
        s, y = S[-1], Y[-1]
        q *= np.dot(s, y) / np.dot(y, y)
    for (s, y, r), a in zip(zip(S, Y, rho), reversed(alphas)):
        b = r * np.dot(y, q)
        q += (a - b) * s
    return q


def lbfgs_minimize(fun_grad: Callable[[np.ndarray], tuple], x0, lo=-np.inf, hi=np.inf, mem: int = 10,
                   max_iter: int = 200, grad_tol: float = 1e-6, max_evals: int | None = None,
                   first_step: float = 1.0, c_armijo: float = 1e-4, min_step: float = 1e-12,
                   callback: Callable | None = None) -> OptimizeResult:
    """Minimize ``f`` over the box ``lo <= x <= hi``.

    Parameters
    ----------
    fun_grad : callable
        ``fun_grad(x) -> (f, g)`` with ``g`` the gradient, same shape as ``x``.
    x0 : array_like
        Starting point; it is projected onto the box.
    lo, hi : float or array_like
        Bounds.
    mem : int
        Number of stored correction pairs.
    max_iter : int
        Outer iteration limit.
    grad_tol : float
        Stop when the sup-norm of the projected gradient drops below this.
    max_evals : int, optional
        Limit on objective evaluations (line-search trials included).
    first_step : float
        Sup-norm length of the very first trial step, taken along the
        normalized negative gradient. Later iterations use the L-BFGS scaling.
    c_armijo : float
        Sufficient-decrease constant of the backtracking line search, which
        starts from a unit step and halves it.

    Returns
    -------
    OptimizeResult
        Best iterate, its objective and gradient, a stop status and the
        per-iteration trace ``(iteration, objective, grad_norm, step)``.
    """
    shape = np.shape(x0)
    lo_f = np.broadcast_to(np.asarray(lo, float), shape).ravel()
    hi_f = np.broadcast_to(np.asarray(hi, float), shape).ravel()
    if np.any(lo_f > hi_f):
        raise ValueError("empty box")

    n_evals = 0

    def fg(xf):
        nonlocal n_evals
        n_evals += 1
        f, g = fun_grad(xf.reshape(shape))
        return float(f), np.asarray(g, float).ravel().copy()

    x = np.clip(np.asarray(x0, float).ravel(), lo_f, hi_f)
    f, g = fg(x)
    S, Y, rho = deque(maxlen=mem), deque(maxlen=mem), deque(maxlen=mem)
    pg = projected_gradient(x, g, lo_f, hi_f)
    trace = [TraceRecord(0, f, float(np.max(np.abs(pg), initial=0.0)), 0.0)]
    if callback:
        callback(trace[-1], x.reshape(shape))
    status = "max_iter"
    it = 0
    for it in range(1, max_iter + 1):
        pg_norm = float(np.max(np.abs(pg), initial=0.0))
        if pg_norm <= grad_tol:
            status = "converged"
            it -= 1
            break
        # variables pinned at a bound with the gradient pushing outward stay fixed
        pinned = ((x <= lo_f) & (g > 0)) | ((x >= hi_f) & (g < 0))
        free = ~pinned
        if S:
            d = -_two_loop(np.where(free, g, 0.0), S, Y, rho)
            d[pinned] = 0.0
            if np.dot(d, g) >= 0:
                S.clear()
                Y.clear()
                rho.clear()
        if not S:
            gn = np.max(np.abs(np.where(free, g, 0.0)))
            d = -np.where(free, g, 0.0) * (first_step / gn if gn > 0 else 0.0)

        step = 1.0
        while True:
            x_new = np.clip(x + step * d, lo_f, hi_f)
            f_new, g_new = fg(x_new)
            if np.isfinite(f_new) and f_new <= f + c_armijo * np.dot(g, x_new - x):
                break
            step *= 0.5
            if step < min_step or (max_evals is not None and n_evals >= max_evals):
                f_new = None
                break
        if f_new is None:
            status = "line-search-failed" if step < min_step else "max_evals"
            logger.info("line search stopped (%s) at iteration %d", status, it)
            break

        s = x_new - x
        y = g_new - g
        sy = float(np.dot(s, y))
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            S.append(s)
            Y.append(y)
            rho.append(1.0 / sy)
        x, f, g = x_new, f_new, g_new
        pg = projected_gradient(x, g, lo_f, hi_f)
        trace.append(TraceRecord(it, f, float(np.max(np.abs(pg), initial=0.0)), step))
        if callback:
            callback(trace[-1], x.reshape(shape))
        if max_evals is not None and n_evals >= max_evals:
            status = "max_evals"
            break
    else:
        if float(np.max(np.abs(pg), initial=0.0)) <= grad_tol:
            status = "converged"
    return OptimizeResult(x.reshape(shape), f, g.reshape(shape), status, it, n_evals, trace)
