"""Local and stochastic maximizers: BFGS, Fletcher-Reeves CG, Nelder-Mead, SANN.

Every method maximizes an :class:`Objective`. The gradient methods and
Nelder-Mead work internally on the negated objective; simulated annealing
works on the objective directly. Values at or below
:data:`~hetprobit.model.DEGENERATE_FLOOR` are never accepted as progress.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .model import DEGENERATE_FLOOR, Dataset, InputError, ParamVector, gradient_flat, loglik_value

METHODS = ("BFGS", "CG", "NelderMead", "SANN")
_ALIASES = {m.lower(): m for m in METHODS} | {"nelder-mead": "NelderMead", "nm": "NelderMead"}

CONVERGED = "converged"
MAX_ITER = "max_iter"
BUDGET = "budget"
DEGENERATE = "degenerate"


def canonical_method(name: str) -> str:
    try:
        return _ALIASES[name.lower()]
    except KeyError:
        raise ValueError(f"unknown method {name!r}; choose from {METHODS}") from None


@dataclass(frozen=True)
class SannSettings:
    initial_temp: float = 10.0
    proposal_scale: float = 1.0
    eval_budget: int = 10_000

    def __post_init__(self):
        if self.initial_temp < 0 or self.proposal_scale <= 0 or self.eval_budget < 1:
            raise ValueError("SANN needs initial_temp >= 0, proposal_scale > 0, eval_budget >= 1")


@dataclass(frozen=True)
class OptimizerSpec:
    method: str = "BFGS"
    max_iter: int | None = None
    f_tol: float = 1e-8
    g_tol: float = 1e-6
    sann: SannSettings = field(default_factory=SannSettings)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "method", canonical_method(self.method))
        if self.f_tol <= 0 or self.g_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iter is not None and self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")

    @property
    def iteration_cap(self) -> int:
        if self.max_iter is not None:
            return self.max_iter
        return 2000 if self.method == "NelderMead" else 500


@dataclass
class OptimResult:
    point: ParamVector
    value: float
    iterations: int
    evals: int
    grad_evals: int
    terminated: str
    trace: list | None = None


class Objective:
    """A function to maximize, with an optional analytic gradient.

    ``k1`` says how a flat point splits into ``(beta, gamma)`` when it is
    reported back as a :class:`ParamVector`.
    """

    def __init__(self, fun: Callable, grad: Callable | None = None, k1: int | None = None):
        self.fun = fun
        self.grad = grad
        self.k1 = k1

    def __call__(self, x) -> float:
        return float(self.fun(x))

    def gradient(self, x) -> np.ndarray:
        if self.grad is not None:
            return np.asarray(self.grad(x), dtype=float)
        return _central_difference(self.fun, x)


def _central_difference(fun, x, rel_step=1e-6):
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for j in range(x.size):
        h = rel_step * max(1.0, abs(x[j]))
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (fun(x + e) - fun(x - e)) / (2 * h)
    return g


def likelihood_objective(d: Dataset) -> Objective:
    """Log-likelihood of ``d`` as a function of the flat vector ``(beta, gamma)``."""
    k1 = d.k1

    def fun(x):
        return loglik_value(d, x[:k1], x[k1:])[0]

    def grad(x):
        return gradient_flat(d, x[:k1], x[k1:])

    return Objective(fun, grad, k1)


def is_degenerate(value: float) -> bool:
    return not (math.isfinite(value) and value > DEGENERATE_FLOOR)


class _Counter:
    """Minimization view of an objective that counts evaluations."""

    def __init__(self, objective: Objective, evals: int = 0):
        self.objective = objective
        self.evals = evals
        self.grad_evals = 0

    def f(self, x) -> float:
        self.evals += 1
        v = self.objective(x)
        return math.inf if is_degenerate(v) else -v

    def g(self, x) -> np.ndarray:
        self.grad_evals += 1
        return -self.objective.gradient(x)


# --------------------------------------------------------------------------
# line search


class LineSearchResult(NamedTuple):
    alpha: float
    f: float
    g: np.ndarray
    wolfe: bool


def wolfe_line_search(f, g, x, p, f0, g0, alpha0=1.0, c1=1e-4, c2=0.9, max_evals=40,
                      alpha_max=1e10):
    """Strong Wolfe line search for minimization (bracketing then zoom).

    Non-finite trial values are treated as too large. If the budget runs out
    the best point satisfying sufficient decrease is returned with
    ``wolfe=False``; ``None`` means no such point was found.
    """
    dphi0 = float(g0 @ p)
    if not dphi0 < 0:
        return None
    evals = 0
    best = None

    def phi(a):
        nonlocal evals, best
        evals += 1
        xa = x + a * p
        fa = f(xa)
        if not math.isfinite(fa):
            return math.inf, None, math.nan
        ga = g(xa)
        if not np.all(np.isfinite(ga)):
            return math.inf, None, math.nan
        with np.errstate(over="ignore", invalid="ignore"):
            da = float(ga @ p)
        if not math.isfinite(da):
            return math.inf, None, math.nan
        if fa <= f0 + c1 * a * dphi0 and (best is None or fa < best.f):
            best = LineSearchResult(a, fa, ga, False)
        return fa, ga, da

    def zoom(lo, f_lo, d_lo, hi, f_hi, d_hi):
        while evals < max_evals:
            width = hi - lo
            a = None
            if math.isfinite(f_hi):
                # quadratic through (lo, f_lo, d_lo) and f_hi
                denom = 2.0 * (f_hi - f_lo - d_lo * width)
                if denom > 0:
                    a = lo - d_lo * width * width / denom
            if a is None or not (min(lo, hi) + 0.1 * abs(width) <= a <= max(lo, hi) - 0.1 * abs(width)):
                a = lo + 0.5 * width
            if abs(a - lo) <= 1e-16 * max(1.0, abs(lo)):
                return None
            fa, ga, da = phi(a)
            if fa > f0 + c1 * a * dphi0 or fa >= f_lo:
                hi, f_hi, d_hi = a, fa, da
            else:
                if abs(da) <= -c2 * dphi0:
                    return LineSearchResult(a, fa, ga, True)
                if da * (hi - lo) >= 0:
                    hi, f_hi, d_hi = lo, f_lo, d_lo
                lo, f_lo, d_lo = a, fa, da
        return None

    a_prev, f_prev, d_prev = 0.0, f0, dphi0
    a = alpha0
    found = None
    for i in range(max_evals):
        fa, ga, da = phi(a)
        if fa > f0 + c1 * a * dphi0 or (i > 0 and fa >= f_prev):
            found = zoom(a_prev, f_prev, d_prev, a, fa, da)
            break
        if abs(da) <= -c2 * dphi0:
            found = LineSearchResult(a, fa, ga, True)
            break
        if da >= 0:
            found = zoom(a, fa, da, a_prev, f_prev, d_prev)
            break
        a_prev, f_prev, d_prev = a, fa, da
        a = min(2.0 * a, alpha_max)
        if evals >= max_evals:
            break
    return found if found is not None else best


# --------------------------------------------------------------------------
# iteration kernels


def bfgs_update(H: np.ndarray, s: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Inverse-Hessian BFGS update; returns ``H`` unchanged when ``s'y`` is not positive."""
    sy = float(s @ y)
    if not sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
        return H
    rho = 1.0 / sy
    Hy = H @ y
    return (H - rho * (np.outer(s, Hy) + np.outer(Hy, s))
            + (rho * rho * float(y @ Hy) + rho) * np.outer(s, s))


def bfgs_step(counter: _Counter, x, fx, gx, H, c1=1e-4, c2=0.9):
    """One BFGS iteration (minimization). Returns ``None`` after two line-search failures.

    The first trial step is always ``alpha = 1`` along ``-H g``, so with the
    identity start the first move has the length of the gradient.
    """
    p = -H @ gx
    steepest = False
    if not float(p @ gx) < 0:
        H, p, steepest = np.eye(x.size), -gx, True
    for _ in range(2):
        ls = wolfe_line_search(counter.f, counter.g, x, p, fx, gx, 1.0, c1, c2)
        if ls is not None:
            x_new = x + ls.alpha * p
            H = bfgs_update(H, x_new - x, ls.g - gx)
            return x_new, ls.f, ls.g, H
        if steepest:
            return None
        H, p, steepest = np.eye(x.size), -gx, True
    return None


def cg_direction(g_new, g_old, d_old, iteration: int, restart_every: int):
    """Fletcher-Reeves direction for minimization.

    Restarts with ``-g_new`` every ``restart_every`` iterations and whenever
    the update is not a descent direction. Returns ``(direction, restarted)``.
    """
    if iteration % restart_every == 0:
        return -g_new, True
    beta = float(g_new @ g_new) / float(g_old @ g_old)
    d = -g_new + beta * d_old
    if not float(d @ g_new) < 0:
        return -g_new, True
    return d, False


def cg_step(counter: _Counter, x, fx, gx, d, alpha_prev, c1=1e-4, c2=0.1):
    """Line search along ``d``; one retry along ``-g`` if it fails."""
    for _ in range(2):
        alpha0 = 1.0 if alpha_prev is None else alpha_prev
        ls = wolfe_line_search(counter.f, counter.g, x, d, fx, gx, alpha0, c1, c2)
        if ls is not None:
            return x + ls.alpha * d, ls.f, ls.g, d, ls.alpha
        if np.array_equal(d, -gx):
            return None
        d, alpha_prev = -gx, None
    return None


NM_REFLECT, NM_EXPAND, NM_CONTRACT, NM_SHRINK = 1.0, 2.0, 0.5, 0.5


def initial_simplex(x0: np.ndarray) -> np.ndarray:
    """``x0`` plus one vertex per coordinate offset by ``max(0.1, 0.1 |x0_j|)``."""
    simplex = np.tile(x0, (x0.size + 1, 1))
    for j in range(x0.size):
        simplex[j + 1, j] += max(0.1, 0.1 * abs(x0[j]))
    return simplex


def neldermead_step(f, simplex: np.ndarray, fvals: np.ndarray):
    """One Nelder-Mead iteration on a simplex sorted by ``fvals`` (minimization).

    Returns the new sorted ``(simplex, fvals, evals)``.
    """
    n = simplex.shape[1]
    centroid = simplex[:n].mean(axis=0)
    worst = simplex[n]
    xr = centroid + NM_REFLECT * (centroid - worst)
    fr = f(xr)
    evals = 1
    shrink = False
    if fvals[0] <= fr < fvals[n - 1]:
        simplex[n], fvals[n] = xr, fr
    elif fr < fvals[0]:
        xe = centroid + NM_EXPAND * (xr - centroid)
        fe = f(xe)
        evals += 1
        if fe < fr:
            simplex[n], fvals[n] = xe, fe
        else:
            simplex[n], fvals[n] = xr, fr
    elif fr < fvals[n]:
        xc = centroid + NM_CONTRACT * (xr - centroid)
        fc = f(xc)
        evals += 1
        if fc <= fr:
            simplex[n], fvals[n] = xc, fc
        else:
            shrink = True
    else:
        xc = centroid + NM_CONTRACT * (worst - centroid)
        fc = f(xc)
        evals += 1
        if fc < fvals[n]:
            simplex[n], fvals[n] = xc, fc
        else:
            shrink = True
    if shrink:
        for i in range(1, n + 1):
            simplex[i] = simplex[0] + NM_SHRINK * (simplex[i] - simplex[0])
            fvals[i] = f(simplex[i])
        evals += n
    order = np.argsort(fvals, kind="stable")
    return simplex[order], fvals[order], evals


def sann_temperature(j: int, initial_temp: float) -> float:
    return initial_temp / math.log(j + math.e)


def sann_step(objective, x, fx, temperature: float, scale: float, rng: np.random.Generator):
    """One Metropolis step of simulated annealing (maximization).

    Returns ``(x, fx, proposal, f_proposal)`` where ``(x, fx)`` is the walker
    after the accept/reject decision.
    """
    proposal = x + scale * rng.standard_normal(x.size)
    u = rng.random()
    fp = objective(proposal)
    if is_degenerate(fp):
        return x, fx, proposal, DEGENERATE_FLOOR
    delta = fp - fx
    if delta >= 0 or (temperature > 0 and u < math.exp(delta / temperature)):
        return proposal, fp, proposal, fp
    return x, fx, proposal, fp


# --------------------------------------------------------------------------
# drivers


def _relative_change_small(f_old, f_new, tol):
    return abs(f_old - f_new) <= tol * (abs(f_old) + tol)


def _run_bfgs(obj, spec, x0, f0, keep_trace):
    c = _Counter(obj, evals=1)
    x, fx, gx = x0, -f0, c.g(x0)
    H = np.eye(x.size)
    trace = [(0, -fx)] if keep_trace else None
    status = MAX_ITER
    it = 0
    for it in range(1, spec.iteration_cap + 1):
        if not np.all(np.isfinite(gx)):
            status = DEGENERATE
            break
        if np.max(np.abs(gx), initial=0.0) <= spec.g_tol:
            status, it = CONVERGED, it - 1
            break
        step = bfgs_step(c, x, fx, gx, H)
        if step is None:
            status = MAX_ITER
            break
        x_new, f_new, g_new, H = step
        done = _relative_change_small(fx, f_new, spec.f_tol)
        x, fx, gx = x_new, f_new, g_new
        if keep_trace:
            trace.append((it, -fx))
        if done:
            status = CONVERGED
            break
    return x, -fx, it, c, status, trace


def _run_cg(obj, spec, x0, f0, keep_trace):
    c = _Counter(obj, evals=1)
    x, fx, gx = x0, -f0, c.g(x0)
    restart_every = x.size
    d, alpha = -gx, None
    trace = [(0, -fx)] if keep_trace else None
    status = MAX_ITER
    it = 0
    for it in range(1, spec.iteration_cap + 1):
        if not np.all(np.isfinite(gx)):
            status = DEGENERATE
            break
        if np.max(np.abs(gx), initial=0.0) <= spec.g_tol:
            status, it = CONVERGED, it - 1
            break
        step = cg_step(c, x, fx, gx, d, alpha)
        if step is None:
            status = MAX_ITER
            break
        x_new, f_new, g_new, d_used, alpha_used = step
        done = _relative_change_small(fx, f_new, spec.f_tol)
        d, restarted = cg_direction(g_new, gx, d_used, it, restart_every)
        # next initial step: keep the predicted first-order decrease
        gd = float(g_new @ d)
        alpha = alpha_used * float(gx @ d_used) / gd if gd < 0 else None
        if alpha is not None and not (0 < alpha < 1e10):
            alpha = None
        x, fx, gx = x_new, f_new, g_new
        if keep_trace:
            trace.append((it, -fx))
        if done:
            status = CONVERGED
            break
    return x, -fx, it, c, status, trace


def _run_neldermead(obj, spec, x0, f0, keep_trace):
    c = _Counter(obj, evals=1)
    simplex = initial_simplex(x0)
    fvals = np.array([-f0] + [c.f(v) for v in simplex[1:]])
    order = np.argsort(fvals, kind="stable")
    simplex, fvals = simplex[order], fvals[order]
    trace = [(0, -fvals[0])] if keep_trace else None
    status = MAX_ITER
    it = 0
    for it in range(1, spec.iteration_cap + 1):
        if fvals[-1] - fvals[0] < spec.f_tol * (abs(fvals[0]) + 1.0):
            status, it = CONVERGED, it - 1
            break
        simplex, fvals, _ = neldermead_step(c.f, simplex, fvals)
        if keep_trace:
            trace.append((it, -fvals[0]))
    return simplex[0].copy(), -fvals[0], it, c, status, trace


def _run_sann(obj, spec, x0, f0, keep_trace):
    c = _Counter(obj, evals=1)
    settings = spec.sann
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed))

    def value(x):
        c.evals += 1
        v = obj(x)
        return DEGENERATE_FLOOR if is_degenerate(v) else v

    x, fx = x0, f0
    best_x, best_f = x, fx
    trace = [(0, best_f)] if keep_trace else None
    j = 0
    for j in range(1, settings.eval_budget):
        T = sann_temperature(j, settings.initial_temp)
        x, fx, xp, fp = sann_step(value, x, fx, T, settings.proposal_scale, rng)
        if fp > best_f:
            best_x, best_f = xp, fp
        if keep_trace:
            trace.append((j, best_f))
    return best_x, best_f, j, c, BUDGET, trace


_DRIVERS = {"BFGS": _run_bfgs, "CG": _run_cg, "NelderMead": _run_neldermead, "SANN": _run_sann}


def maximize(objective: Objective, spec: OptimizerSpec, start, *, keep_trace: bool = True) -> OptimResult:
    """Run ``spec.method`` from ``start`` and return the terminal point.

    ``start`` may be a :class:`ParamVector` or a flat array. A start at which
    the objective is degenerate returns immediately with
    ``terminated == "degenerate"``.
    """
    x0 = start.flat if isinstance(start, ParamVector) else np.array(start, dtype=float).reshape(-1)
    if not np.all(np.isfinite(x0)):
        raise InputError("start point must be finite")
    k1 = objective.k1 if objective.k1 is not None else x0.size
    if isinstance(start, ParamVector) and objective.k1 is not None and start.k1 != objective.k1:
        raise InputError(f"start has {start.k1} beta components, objective expects {objective.k1}")
    f0 = objective(x0)
    if is_degenerate(f0):
        return OptimResult(ParamVector.from_flat(x0, k1), DEGENERATE_FLOOR, 0, 1, 0, DEGENERATE,
                           [(0, DEGENERATE_FLOOR)] if keep_trace else None)
    x, value, iterations, counter, status, trace = _DRIVERS[spec.method](objective, spec, x0, f0, keep_trace)
    return OptimResult(ParamVector.from_flat(x, k1), float(value), iterations,
                       counter.evals, counter.grad_evals, status, trace)
