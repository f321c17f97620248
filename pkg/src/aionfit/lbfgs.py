"""Limited-memory BFGS with a strong-Wolfe line search.

The implementation follows the standard two-loop recursion with cubic
interpolation inside the line-search zoom phase. Only iterates that strictly
satisfy the Wolfe conditions (or at minimum sufficient decrease) are
accepted, so the trace of accepted objective values is non-increasing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InputError, NumericalError

Objective = Callable[[np.ndarray], tuple[float, np.ndarray]]


@dataclass(frozen=True)
class LbfgsOptions:
    """Tuning knobs; the defaults mirror the fitter's configuration."""

    step_scale: float = 1.0  # initial trial step of every line search
    history: int = 10
    grad_tol: float = 1e-7
    max_iterations: int = 100
    max_evals_per_iter: int = 20
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.9

    def __post_init__(self):
        if not self.step_scale > 0:
            raise InputError("step_scale must be positive")
        if self.history < 1 or self.max_iterations < 1 or self.max_evals_per_iter < 2:
            raise InputError("history, iterations and line-search budget must be positive")
        if not 0 < self.wolfe_c1 < self.wolfe_c2 < 1:
            raise InputError("Wolfe constants must satisfy 0 < c1 < c2 < 1")


@dataclass
class LbfgsResult:
    x: np.ndarray
    value: float
    gradient: np.ndarray
    trace: list[float]  # objective at x0 followed by each accepted iterate
    iterations: int
    converged: bool
    line_search_failed: bool
    num_evals: int


def lbfgs_minimize(fun: Objective, x0: np.ndarray, opts: LbfgsOptions = LbfgsOptions()) -> LbfgsResult:
    """Minimize fun, returning the best accepted iterate and the value trace."""
    x = np.asarray(x0, dtype=float).copy()
    f, g = fun(x)
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        raise InputError("objective is not finite at the starting point")
    trace = [f]
    evals = 1
    s_hist: list[np.ndarray] = []
    y_hist: list[np.ndarray] = []
    rho_hist: list[float] = []
    converged = bool(np.max(np.abs(g), initial=0.0) <= opts.grad_tol)
    line_search_failed = False
    iterations = 0

    while not converged and iterations < opts.max_iterations:
        direction = _two_loop(g, s_hist, y_hist, rho_hist)
        if float(g @ direction) >= 0.0:
            # Curvature memory is unusable; fall back to steepest descent.
            s_hist.clear()
            y_hist.clear()
            rho_hist.clear()
            direction = -g
        step = _line_search(fun, x, f, g, direction, opts)
        evals += step.evals
        if not step.ok:
            line_search_failed = True
            break
        s = step.alpha * direction
        y = step.g - g
        sy = float(s @ y)
        if sy > 1e-10 * float(np.linalg.norm(s)) * float(np.linalg.norm(y)):
            s_hist.append(s)
            y_hist.append(y)
            rho_hist.append(1.0 / sy)
            if len(s_hist) > opts.history:
                s_hist.pop(0)
                y_hist.pop(0)
                rho_hist.pop(0)
        x = x + s
        f, g = step.f, step.g
        trace.append(f)
        iterations += 1
        if np.max(np.abs(g)) <= opts.grad_tol:
            converged = True

    return LbfgsResult(
        x=x,
        value=f,
        gradient=g,
        trace=trace,
        iterations=iterations,
        converged=converged,
        line_search_failed=line_search_failed,
        num_evals=evals,
    )


def _two_loop(
    g: np.ndarray, s_hist: list[np.ndarray], y_hist: list[np.ndarray], rho_hist: list[float]
) -> np.ndarray:
    q = -g.copy()
    if not s_hist:
        return q
    alphas = np.empty(len(s_hist))
    for i in range(len(s_hist) - 1, -1, -1):
        alphas[i] = rho_hist[i] * float(s_hist[i] @ q)
        q -= alphas[i] * y_hist[i]
    y_last = y_hist[-1]
    gamma = float(s_hist[-1] @ y_last) / float(y_last @ y_last)
    q *= gamma
    for i in range(len(s_hist)):
        beta = rho_hist[i] * float(y_hist[i] @ q)
        q += (alphas[i] - beta) * s_hist[i]
    return q


@dataclass
class _StepResult:
    ok: bool
    alpha: float = 0.0
    f: float = np.inf
    g: np.ndarray | None = None
    evals: int = 0


def _line_search(
    fun: Objective, x: np.ndarray, f0: float, g0: np.ndarray, d: np.ndarray, opts: LbfgsOptions
) -> _StepResult:
    """Strong-Wolfe line search (bracket + zoom with cubic interpolation)."""
    d0 = float(g0 @ d)
    if d0 >= 0.0:
        return _StepResult(ok=False)
    budget = opts.max_evals_per_iter
    evals = 0

    def phi(alpha: float) -> tuple[float, np.ndarray, float]:
        nonlocal evals
        evals += 1
        f, g = fun(x + alpha * d)
        return f, g, float(g @ d)

    c1, c2 = opts.wolfe_c1, opts.wolfe_c2
    alpha_prev, f_prev, d_prev = 0.0, f0, d0
    alpha = opts.step_scale
    bracket = None
    while evals < budget:
        f_a, g_a, d_a = phi(alpha)
        if not np.isfinite(f_a):
            alpha *= 0.5
            continue
        if f_a > f0 + c1 * alpha * d0 or (evals > 1 and f_a >= f_prev):
            bracket = (alpha_prev, f_prev, d_prev, alpha, f_a, d_a)
            break
        if abs(d_a) <= -c2 * d0:
            return _StepResult(ok=True, alpha=alpha, f=f_a, g=g_a, evals=evals)
        if d_a >= 0.0:
            bracket = (alpha, f_a, d_a, alpha_prev, f_prev, d_prev)
            break
        alpha_prev, f_prev, d_prev = alpha, f_a, d_a
        alpha = min(2.0 * alpha, 1e10)
    if bracket is None:
        # Budget exhausted while still extending; accept the last point if it
        # at least achieved sufficient decrease.
        if evals and f_a <= f0 + c1 * alpha * d0 and np.isfinite(f_a):
            return _StepResult(ok=True, alpha=alpha, f=f_a, g=g_a, evals=evals)
        return _StepResult(ok=False, evals=evals)

    lo, f_lo, d_lo, hi, f_hi, d_hi = bracket
    best = None
    while evals < budget:
        alpha = _cubic_min(lo, f_lo, d_lo, hi, f_hi, d_hi)
        span = abs(hi - lo)
        if (
            not np.isfinite(alpha)
            or alpha <= min(lo, hi) + 0.1 * span
            or alpha >= max(lo, hi) - 0.1 * span
        ):
            alpha = 0.5 * (lo + hi)
        f_a, g_a, d_a = phi(alpha)
        if f_a > f0 + c1 * alpha * d0 or f_a >= f_lo:
            hi, f_hi, d_hi = alpha, f_a, d_a
        else:
            best = (alpha, f_a, g_a)
            if abs(d_a) <= -c2 * d0:
                return _StepResult(ok=True, alpha=alpha, f=f_a, g=g_a, evals=evals)
            if d_a * (hi - lo) >= 0.0:
                hi, f_hi, d_hi = lo, f_lo, d_lo
            lo, f_lo, d_lo = alpha, f_a, d_a
        if span < 1e-14:
            break
    if best is not None:
        # Sufficient decrease was achieved even though curvature was not;
        # accepting it preserves the monotone trace.
        alpha, f_a, g_a = best
        return _StepResult(ok=True, alpha=alpha, f=f_a, g=g_a, evals=evals)
    return _StepResult(ok=False, evals=evals)


def _cubic_min(a, fa, da, b, fb, db) -> float:
    """Minimizer of the cubic interpolant through two points with slopes."""
    d1 = da + db - 3.0 * (fa - fb) / (a - b)
    disc = d1 * d1 - da * db
    if disc < 0.0:
        return np.nan
    d2 = np.sqrt(disc) * np.sign(b - a)
    denom = db - da + 2.0 * d2
    if denom == 0.0:
        return np.nan
    return b - (b - a) * (db + d2 - d1) / denom
