"""Small dense nonlinear least-squares solvers.

Two minimizers of f(x) = ||r(x)||^2 with optional per-coordinate box
constraints handled by projection:

* :func:`levenberg_marquardt` - damped Gauss-Newton, vectorized over a
  batch of independent problems that share the same residual shape.
* :func:`nonlinear_cg` - Polak-Ribiere conjugate gradient with a
  backtracking (Armijo) line search, single problem.

Both stop when the gradient norm of f drops below tol_grad or the step
norm below tol_step, whichever happens first, and report convergence
through a flag rather than an exception.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = ["SolveResult", "BatchSolveResult", "levenberg_marquardt", "nonlinear_cg"]


@dataclass
class SolveResult:
    x: np.ndarray
    cost: float
    grad_norm: float
    iterations: int
    converged: bool


@dataclass
class BatchSolveResult:
    x: np.ndarray          # (n, p)
    cost: np.ndarray       # (n,)
    grad_norm: np.ndarray  # (n,)
    iterations: np.ndarray  # (n,) int
    converged: np.ndarray   # (n,) bool


def _clip(x: np.ndarray, lower: np.ndarray | None, upper: np.ndarray | None) -> np.ndarray:
    if lower is None and upper is None:
        return x
    return np.clip(x, -np.inf if lower is None else lower, np.inf if upper is None else upper)


def levenberg_marquardt(
    residual: Callable[[np.ndarray], np.ndarray],
    jacobian: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    *,
    lower: np.ndarray | None = None,
    upper: np.ndarray | None = None,
    max_iters: int = 200,
    tol_grad: float = 1e-10,
    tol_step: float = 1e-12,
) -> BatchSolveResult:
    """Minimize a batch of independent least-squares problems.

    residual maps (n, p) parameters to (n, m) residuals and jacobian to
    (n, m, p); every row is an independent problem.  The damping factor
    is initialized relative to diag(J^T J), which keeps the iterates
    invariant under a uniform rescaling of the residuals.
    """
    x = _clip(np.array(x0, dtype=np.float64, copy=True), lower, upper)
    if x.ndim != 2:
        raise ValueError(f"x0 must be (n, p), got shape {x.shape}")
    n, p = x.shape
    eye = np.eye(p)

    # The closures always see the full batch; per-row arithmetic is
    # independent, so rows finished earlier are recomputed bit-identically
    # rather than sliced out.
    def evaluate(xs: np.ndarray, r: np.ndarray):
        jac = jacobian(xs)
        jtr = np.einsum("nmp,nm->np", jac, r)
        a = np.einsum("nmp,nmq->npq", jac, jac)
        return jtr, a

    r_cur = residual(x)
    cost = np.einsum("nm,nm->n", r_cur, r_cur)
    jtr, a = evaluate(x, r_cur)
    grad_norm = 2.0 * np.linalg.norm(jtr, axis=1)
    diag_max = np.maximum(np.einsum("npp->np", a).max(axis=1), 1e-12)
    mu = 1e-3 * diag_max
    mu_floor = 1e-18 * diag_max
    nu = np.full(n, 2.0)
    iterations = np.zeros(n, dtype=np.int64)
    converged = grad_norm < tol_grad
    active = ~converged

    for _ in range(max_iters):
        if not active.any():
            break
        iterations[active] += 1
        m = a + np.maximum(mu, mu_floor)[:, None, None] * eye
        d = np.linalg.solve(m, -jtr[..., None])[..., 0]
        x_new = _clip(x + d, lower, upper)
        step = x_new - x
        step_norm = np.linalg.norm(step, axis=1)
        r_new = residual(x_new)
        cost_new = np.einsum("nm,nm->n", r_new, r_new)
        accept = active & (cost_new < cost)
        stall = active & ~accept & (step_norm < tol_step)
        reject = active & ~accept & ~stall
        mu[reject] *= nu[reject]
        nu[reject] *= 2.0
        converged |= stall
        active &= ~stall
        if accept.any():
            # Gain ratio against the damped quadratic model; projection can
            # only shrink the step, so guard the predicted reduction.
            pred = np.einsum("np,np->n", step, mu[:, None] * step - jtr)
            rho = (cost - cost_new) / np.maximum(pred, 1e-300)
            factor = np.maximum(1.0 / 3.0, 1.0 - (2.0 * rho - 1.0) ** 3)
            mu[accept] *= factor[accept]
            nu[accept] = 2.0
            x[accept] = x_new[accept]
            cost[accept] = cost_new[accept]
            r_cur = np.where(accept[:, None], r_new, r_cur)
            jtr, a = evaluate(x, r_cur)
            grad_norm = 2.0 * np.linalg.norm(jtr, axis=1)
            done = accept & ((grad_norm < tol_grad) | (step_norm < tol_step))
            converged |= done
            active &= ~done

    return BatchSolveResult(x, cost, grad_norm, iterations, converged)


def nonlinear_cg(
    residual: Callable[[np.ndarray], np.ndarray],
    jacobian: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    *,
    lower: np.ndarray | None = None,
    upper: np.ndarray | None = None,
    max_iters: int = 200,
    tol_grad: float = 1e-10,
    tol_step: float = 1e-12,
    armijo_c: float = 1e-4,
    backtrack: float = 0.5,
    max_backtracks: int = 40,
) -> SolveResult:
    """Polak-Ribiere conjugate gradient on f(x) = ||r(x)||^2.

    residual maps (p,) to (m,), jacobian to (m, p).  The line search
    starts from the exact minimizer of the local Gauss-Newton quadratic
    along the search direction, then backtracks until the Armijo
    condition holds on the projected step.  The direction restarts to
    steepest descent whenever the projection clips the step, a
    non-descent direction appears, or beta goes negative (PR+).
    """
    x = _clip(np.asarray(x0, dtype=np.float64).copy(), lower, upper)

    def f_g_j(xs: np.ndarray):
        r = residual(xs)
        jac = jacobian(xs)
        return float(r @ r), 2.0 * (jac.T @ r), jac

    cost, g, jac = f_g_j(x)
    d = -g
    iterations = 0
    converged = bool(np.linalg.norm(g) < tol_grad)

    while iterations < max_iters and not converged:
        iterations += 1
        gd = float(g @ d)
        if gd >= 0.0:
            d = -g
            gd = -float(g @ g)
        jd = jac @ d
        curv = 2.0 * float(jd @ jd)
        alpha = -gd / curv if curv > 0.0 else 1.0
        x_new = x
        cost_new = cost
        accepted = False
        for _ in range(max_backtracks):
            cand = _clip(x + alpha * d, lower, upper)
            r_cand = residual(cand)
            cost_cand = float(r_cand @ r_cand)
            if cost_cand <= cost + armijo_c * float(g @ (cand - x)):
                x_new, cost_new, accepted = cand, cost_cand, True
                break
            alpha *= backtrack
        if not accepted:
            # Line search exhausted: the iterate is numerically stationary.
            converged = True
            break
        step = x_new - x
        step_norm = float(np.linalg.norm(step))
        clipped = bool(np.any(x_new != x + alpha * d))
        cost, g_new, jac = f_g_j(x_new)
        if clipped:
            beta = 0.0
        else:
            beta = max(0.0, float(g_new @ (g_new - g)) / max(float(g @ g), 1e-300))
        d = -g_new + beta * d
        g = g_new
        x = x_new
        if np.linalg.norm(g) < tol_grad or step_norm < tol_step:
            converged = True

    return SolveResult(x, cost, float(np.linalg.norm(g)), iterations, converged)
