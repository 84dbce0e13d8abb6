"""Small dense optimization kit used by the waveform designs.

Everything here is deterministic and dependency-free on purpose: exact
water-filling by sorting, a textbook working-set QP for one equality
constraint plus lower bounds, a quasi-Newton SQP loop over the probability
simplex, and the semi-unitary Procrustes step.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

__all__ = [
    "SolverError",
    "WaterfillResult",
    "waterfill",
    "SimplexQpProblem",
    "solve_simplex_qp",
    "solve_qp_active_set",
    "SqpState",
    "SqpResult",
    "sqp_minimize",
    "solve_opp",
    "write_sqp_trace",
]


class SolverError(RuntimeError):
    """An iterative solver exhausted its budget or met an ill-posed problem.

    ``best`` carries the lowest-objective feasible iterate observed before
    giving up, or None when no feasible point was ever produced.
    """

    def __init__(self, message: str, best: np.ndarray | None = None):
        super().__init__(message)
        self.best = best


# ---------------------------------------------------------------------------
# water-filling


@dataclass(frozen=True)
class WaterfillResult:
    powers: np.ndarray
    water_level: float


def waterfill(gains: np.ndarray, noise_var: float, budget: float) -> WaterfillResult:
    """Allocate ``budget`` over parallel channels maximizing sum log2(1 + g p / s2).

    Exact active-set-by-sorting solution p_i = max(0, mu - s2/g_i); zero-gain
    channels never receive power. When the budget is too small to activate a
    second channel, everything lands on the single best one.
    """
    gains = np.asarray(gains, dtype=float)
    if gains.ndim != 1 or gains.size == 0:
        raise ValueError("gains must be a nonempty vector")
    if np.any(gains < 0) or not np.all(np.isfinite(gains)):
        raise ValueError("gains must be finite and nonnegative")
    if noise_var <= 0:
        raise ValueError("noise_var must be positive")
    if budget <= 0:
        raise ValueError("budget must be positive")
    pos = gains > 0
    if not pos.any():
        raise ValueError("all channel gains are zero")
    powers = np.zeros_like(gains)
    inv = noise_var / gains[pos]
    inv_sorted = np.sort(inv)
    levels = (budget + np.cumsum(inv_sorted)) / np.arange(1, inv_sorted.size + 1)
    # active count = largest m whose water level clears the m-th inverse gain
    m = int(np.nonzero(levels > inv_sorted)[0].max()) + 1
    mu = float(levels[m - 1])
    powers[pos] = np.maximum(0.0, mu - inv)
    total = powers.sum()
    if total > 0:  # absorb accumulated round-off into the budget
        powers *= budget / total
    return WaterfillResult(powers=powers, water_level=mu)


# ---------------------------------------------------------------------------
# quadratic programming over { x : a^T x = b, x >= lower }


def _qp_value(quad: np.ndarray, lin: np.ndarray, x: np.ndarray) -> float:
    return float(0.5 * x @ quad @ x + lin @ x)


def _feasible_start(a: np.ndarray, b: float, lower: np.ndarray) -> np.ndarray:
    """Point of {a^T x = b, x >= lower} via bisection on a common level tau."""
    base = float(a @ lower)
    if base > b + 1e-9 * max(1.0, abs(b)):
        raise SolverError("infeasible: lower bounds exceed the equality budget")
    lo = float(lower.min())
    hi = float(lower.max()) + (b - base) / float(a.min()) + 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if a @ np.maximum(lower, mid) > b:
            hi = mid
        else:
            lo = mid
    x = np.maximum(lower, lo)
    free = x > lower + 1e-12
    if free.any():  # close the residual exactly on the free block
        x[free] += (b - a @ x) / a[free].sum()
        x = np.maximum(x, lower)
        x[free] += (b - a @ x) / a[free].sum()
    return x


def _kkt_step(
    quad: np.ndarray,
    lin: np.ndarray,
    a: np.ndarray,
    b: float,
    lower: np.ndarray,
    free: np.ndarray,
) -> tuple[np.ndarray, float]:
    """Solve the equality-constrained subproblem with the bound-active
    coordinates pinned at their lower bounds. Returns (x_free, nu)."""
    pinned = ~free
    q_ff = quad[np.ix_(free, free)]
    rhs_lin = lin[free] + quad[np.ix_(free, pinned)] @ lower[pinned]
    a_f = a[free]
    nf = int(free.sum())
    kkt = np.zeros((nf + 1, nf + 1))
    kkt[:nf, :nf] = q_ff
    kkt[:nf, nf] = a_f
    kkt[nf, :nf] = a_f
    rhs = np.concatenate([-rhs_lin, [b - float(a[pinned] @ lower[pinned])]])
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    if not np.all(np.isfinite(sol)):
        sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    return sol[:nf], float(sol[nf])


def solve_qp_active_set(
    hessian: np.ndarray,
    gradient: np.ndarray,
    eq: tuple[np.ndarray, float],
    bounds: np.ndarray | None = None,
    *,
    max_iterations: int = 500,
) -> np.ndarray:
    """Minimize 0.5 x^T Q x + g^T x subject to a^T x = b and x >= bounds.

    Primal working-set method for convex Q with positive equality
    coefficients ``eq = (a, b)``; ``bounds`` are per-coordinate lower bounds
    (zero by default). Raises SolverError (carrying the best feasible
    iterate) when the iteration budget runs out.
    """
    quad = np.asarray(hessian, dtype=float)
    quad = 0.5 * (quad + quad.T)
    lin = np.asarray(gradient, dtype=float)
    n = lin.size
    a_eq, b_eq = eq
    a = np.asarray(a_eq, dtype=float)
    b = float(b_eq)
    if a.shape != (n,) or np.any(a <= 0):
        raise ValueError("equality coefficients must be positive")
    lower = np.zeros(n) if bounds is None else np.asarray(bounds, dtype=float)

    x = _feasible_start(a, b, lower)
    scale = max(1.0, np.abs(quad).max(), np.abs(lin).max())
    work = x <= lower + 1e-11
    if work.all():  # the feasible set is a single point
        return lower.copy()
    best = x.copy()
    best_val = _qp_value(quad, lin, x)

    for _ in range(max_iterations):
        free = ~work
        xf, nu = _kkt_step(quad, lin, a, b, lower, free)
        target = lower.copy()
        target[free] = xf
        xf_scale = max(1.0, float(np.abs(xf).max()) if xf.size else 0.0)
        blocking = free & (target - x < -1e-15)
        if np.all(xf >= lower[free] - 1e-10 * xf_scale) or not blocking.any():
            x = np.maximum(target, lower)
            val = _qp_value(quad, lin, x)
            if val < best_val:
                best, best_val = x.copy(), val
            grad = quad @ x + lin
            lam = grad + nu * a
            active_idx = np.nonzero(work)[0]
            if active_idx.size == 0 or lam[active_idx].min() >= -1e-10 * scale:
                return x
            work[active_idx[np.argmin(lam[active_idx])]] = False
            continue
        # partial step toward the subproblem solution, up to the first bound
        d = target - x
        ratios = (lower[blocking] - x[blocking]) / d[blocking]
        alpha = float(min(1.0, ratios.min()))
        x = np.maximum(x + alpha * d, lower)
        hit = np.nonzero(blocking)[0][np.argmin(ratios)]
        work[hit] = True
        val = _qp_value(quad, lin, x)
        if val < best_val:
            best, best_val = x.copy(), val
    raise SolverError("active-set solver hit its iteration limit", best=best)


# ---------------------------------------------------------------------------
# black-box quadratic over the probability simplex


@dataclass(frozen=True)
class SimplexQpProblem:
    """Convex quadratic objective to be minimized over the probability simplex."""

    objective: Callable
    dimension: int


def _probe_quadratic(
    objective: Callable, dim: int
) -> tuple[np.ndarray, np.ndarray, float]:
    """Evaluate at 0, e_i, 2 e_i and e_i + e_j; this pins Q, c, d exactly
    for a quadratic objective 0.5 x^T Q x + c^T x + d."""
    f0 = float(objective(np.zeros(dim)))
    quad = np.zeros((dim, dim))
    lin = np.zeros(dim)
    f_unit = np.zeros(dim)
    for i in range(dim):
        e = np.zeros(dim)
        e[i] = 1.0
        f1 = float(objective(e))
        f2 = float(objective(2.0 * e))
        quad[i, i] = f2 - 2.0 * f1 + f0
        lin[i] = f1 - f0 - 0.5 * quad[i, i]
        f_unit[i] = f1
    for i in range(dim):
        ei = np.zeros(dim)
        ei[i] = 1.0
        for j in range(i + 1, dim):
            ej = np.zeros(dim)
            ej[j] = 1.0
            fij = float(objective(ei + ej))
            quad[i, j] = quad[j, i] = fij - f_unit[i] - f_unit[j] + f0
    return quad, lin, f0


def solve_simplex_qp(problem: SimplexQpProblem) -> np.ndarray:
    """Minimize a quadratic objective over { x >= 0, sum x = 1 }.

    The callable is reconstructed exactly by probing, checked for convexity,
    and the explicit problem goes to the working-set solver.
    """
    dim = problem.dimension
    if dim < 1:
        raise ValueError("dimension must be positive")
    quad, lin, _ = _probe_quadratic(problem.objective, dim)
    eigs = np.linalg.eigvalsh(quad)
    scale = max(1.0, float(np.abs(eigs).max()))
    if eigs.min() < -1e-8 * scale:
        raise SolverError("probed objective is not convex")
    return solve_qp_active_set(quad, lin, (np.ones(dim), 1.0))


# ---------------------------------------------------------------------------
# sequential quadratic programming over the simplex


@dataclass
class SqpState:
    iterate: np.ndarray
    hessian_approx: np.ndarray
    iteration: int
    last_step_norm: float


@dataclass(frozen=True)
class SqpResult:
    x: np.ndarray
    objective: float
    objective_trace: np.ndarray  # objective at iterates 0..m, non-increasing
    step_norms: np.ndarray  # ||x_{k+1} - x_k|| for each accepted step
    n_iterations: int
    converged: bool


def _simplex_violation(x: np.ndarray) -> float:
    return abs(float(x.sum()) - 1.0) - float(np.minimum(x, 0.0).sum())


def _fd_gradient(objective: Callable, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    grad = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        grad[i] = (float(objective(x + e)) - float(objective(x - e))) / (2.0 * h)
    return grad


def sqp_minimize(
    objective: Callable,
    dim: int,
    tol: float = 1e-6,
    max_iterations: int = 40,
    *,
    gradient: Callable | None = None,
    x0: np.ndarray | None = None,
    method: str = "bfgs",
    penalty: float = 10.0,
) -> SqpResult:
    """Quasi-Newton SQP for smooth minimization over the probability simplex.

    Each iteration minimizes the local quadratic model over the feasible set
    (so iterates stay on the simplex), backtracks with an Armijo test on the
    penalized merit, and updates the Hessian approximation by BFGS (default)
    or DFP, skipping updates without positive curvature. Stops when an
    accepted step is shorter than ``tol``. ``gradient`` defaults to central
    finite differences.
    """
    if method not in ("bfgs", "dfp"):
        raise ValueError("method must be 'bfgs' or 'dfp'")
    if dim < 1:
        raise ValueError("dim must be positive")
    if gradient is None:
        gradient = lambda w: _fd_gradient(objective, w)  # noqa: E731
    if x0 is None:
        x = np.full(dim, 1.0 / dim)
    else:
        x = np.asarray(x0, dtype=float).copy()
        if x.shape != (dim,) or x.min() < -1e-12 or abs(x.sum() - 1.0) > 1e-9:
            raise ValueError("x0 must lie on the probability simplex")
        x = np.maximum(x, 0.0)
        x /= x.sum()

    state = SqpState(
        iterate=x, hessian_approx=np.eye(dim), iteration=0, last_step_norm=np.inf
    )
    f = float(objective(x))
    if not np.isfinite(f):
        raise SolverError("objective is not finite at the start point")
    g = np.asarray(gradient(x), dtype=float)
    trace = [f]
    steps: list[float] = []
    converged = False

    while state.iteration < max_iterations:
        hess = state.hessian_approx
        lin = g - hess @ x  # model the QP directly in z = x + d
        try:
            z = solve_qp_active_set(hess, lin, (np.ones(dim), 1.0))
        except SolverError as err:
            if err.best is None:
                raise
            z = err.best
        d = z - x
        d_norm = float(np.linalg.norm(d))
        if d_norm <= tol:
            converged = True
            break
        slope = float(g @ d)
        if slope >= 0.0:  # model gives no descent; treat as a stall
            break
        merit0 = f + penalty * _simplex_violation(x)
        alpha = 1.0
        accepted = False
        for _ in range(30):
            x_new = x + alpha * d
            f_new = float(objective(x_new))
            if not np.isfinite(f_new):
                raise SolverError("objective is not finite", best=x)
            merit = f_new + penalty * _simplex_violation(x_new)
            if merit <= merit0 + 1e-4 * alpha * slope:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            x_new = x + alpha * d
            f_new = float(objective(x_new))
            if f_new > f:  # cannot certify progress at the smallest step
                break
        g_new = np.asarray(gradient(x_new), dtype=float)
        s = x_new - x
        y = g_new - g
        sy = float(s @ y)
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            if method == "bfgs":
                hs = hess @ s
                hess = hess - np.outer(hs, hs) / float(s @ hs) + np.outer(y, y) / sy
            else:
                left = np.eye(dim) - np.outer(y, s) / sy
                hess = left @ hess @ left.T + np.outer(y, y) / sy
            hess = 0.5 * (hess + hess.T)
        step = float(np.linalg.norm(s))
        state = SqpState(
            iterate=x_new,
            hessian_approx=hess,
            iteration=state.iteration + 1,
            last_step_norm=step,
        )
        x, f, g = x_new, f_new, g_new
        trace.append(f)
        steps.append(step)
        if step <= tol:
            converged = True
            break

    return SqpResult(
        x=x,
        objective=f,
        objective_trace=np.asarray(trace),
        step_norms=np.asarray(steps),
        n_iterations=len(steps),
        converged=converged,
    )


# ---------------------------------------------------------------------------
# semi-unitary Procrustes


def solve_opp(target: np.ndarray) -> np.ndarray:
    """Semi-unitary maximizer of Re tr(W^H target): U V^H from the thin SVD.

    For the residual ||M W - I||_F with target = M^H this recipe is the
    global minimizer whenever the largest singular value of M is at most 1.
    """
    target = np.asarray(target, dtype=complex)
    if target.ndim != 2 or target.shape[0] < target.shape[1]:
        raise ValueError("target must be a tall (or square) matrix")
    u, _, vh = np.linalg.svd(target, full_matrices=False)
    return u @ vh


def write_sqp_trace(result: SqpResult, path: Path | str) -> None:
    """CSV trace: iteration, objective, step_norm (zero for iteration 0)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "objective", "step_norm"])
        for i, obj in enumerate(result.objective_trace):
            step = 0.0 if i == 0 else float(result.step_norms[i - 1])
            writer.writerow([i, repr(float(obj)), repr(step)])
