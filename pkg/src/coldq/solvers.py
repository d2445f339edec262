"""Inner numerical solvers.

Two problems are solved here, both over a box:

* the per-round composite problem -- a linearized loss plus a proximal
  quadratic plus queue-weighted constraint hinges -- which is strongly convex
  but nonsmooth at the hinge kinks;
* the constrained benchmark problem ``min f subject to g <= 0``, used to
  build comparator sequences.

The composite problem is attacked with a projected subgradient phase
(warm-started at the plain gradient step, averaged over the tail) followed by
a deterministic polish: an exact dual scan when the round carries a single
separable capacity constraint, or a slack-variable SQP solve otherwise. The
returned point is always the best of all candidates under the true objective
and always lies in the box exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq, minimize

from .core import (
    Box,
    CapacityConstraint,
    ConfigurationError,
    RoundFunctions,
    Vector,
    as_vector,
    positive_part,
)
from .queues import DoublyBoundedQueue

SUBGRAD_ITER_CAP = 500
FEASIBILITY_SLACK = 1e-6
FEASIBILITY_MARGIN = 1e-9
_PENALTY_CAP = 1e14


class SolverError(RuntimeError):
    """Non-finite objective or irrecoverable inner-solver failure."""

    def __init__(self, message: str, iterates: Optional[list] = None):
        if iterates:
            message += "; last iterates: " + ", ".join(repr(x) for x in iterates[-3:])
        super().__init__(message)


class InfeasibleInstanceError(RuntimeError):
    """The penalty term failed to vanish: no feasible point was found."""


@dataclass(frozen=True)
class InnerSolverConfig:
    """Iteration and accuracy budget for the inner solvers."""

    max_iters: int = 200
    tolerance: float = 1e-8
    restarts: int = 0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ConfigurationError("max_iters must be >= 1")
        if not self.tolerance > 0:
            raise ConfigurationError("tolerance must be positive")
        if self.restarts < 0:
            raise ConfigurationError("restarts must be nonnegative")


def argmin_gradient_step(x_prev: Vector, grad: Vector, alpha: float, feasible: Box) -> Vector:
    """Projected gradient step x_prev - grad / (2 alpha)."""
    x_prev = as_vector(x_prev, feasible.dimension)
    grad = as_vector(grad, feasible.dimension)
    if not alpha > 0:
        raise ConfigurationError("alpha must be positive")
    return feasible.project(x_prev - grad / (2.0 * alpha))


def _composite_value(x, x_prev, grad_prev, alpha, qvals, rf: RoundFunctions) -> float:
    diff = x - x_prev
    pen = float(qvals @ positive_part(np.asarray(rf.constraint_values(x), dtype=np.float64)))
    return float(grad_prev @ diff) + alpha * float(diff @ diff) + pen


def _composite_subgrad(x, x_prev, grad_prev, alpha, qvals, rf: RoundFunctions) -> Vector:
    sg = grad_prev + 2.0 * alpha * (x - x_prev)
    if rf.affine is not None:
        g = rf.affine.matrix @ x - rf.affine.offset
        active = g > 0.0
        if np.any(active):
            sg = sg + rf.affine.matrix[active].T @ qvals[active]
        return sg
    g = np.asarray(rf.constraint_values(x), dtype=np.float64)
    for n in np.nonzero(g > 0.0)[0]:
        sg = sg + qvals[n] * np.asarray(rf.constraint_subgradient(x, int(n)), dtype=np.float64)
    return sg


def _affine_piece_exact(z, alpha, qvals, rf: RoundFunctions, feasible: Box):
    """Exact composite minimizer when a hinge activation piece is consistent.

    For a candidate active set S, the piece objective replaces each hinge in S
    by its linear part, which underestimates the true objective everywhere and
    matches it exactly on {g_n >= 0 for n in S, g_n <= 0 otherwise}. Its box
    minimizer is a separable clamp; if that point lands inside the matching
    region, it is the exact global minimizer of the composite problem.
    """
    a_mat, a_off = rf.affine.matrix, rf.affine.offset
    n = a_mat.shape[0]
    if n > 8:
        return None
    for mask in range(1 << n):
        active = np.array([(mask >> i) & 1 for i in range(n)], dtype=bool)
        shift = a_mat[active].T @ qvals[active] if np.any(active) else 0.0
        x = np.clip(z - shift / (2.0 * alpha), feasible.lower, feasible.upper)
        g = a_mat @ x - a_off
        if np.all(g[active] >= 0.0) and np.all(g[~active] <= 0.0):
            return x
    return None


def _monotone_pl_root(u, coef, row, lo, hi, offset, cap):
    """Root of v -> row @ clip(u - coef v, lo, hi) - offset on [0, cap].

    The map is piecewise linear and nonincreasing for v >= 0 (its slope is
    minus a sum of squares over unclamped coordinates), so the exact root is
    found by evaluating at the clamping breakpoints and interpolating on the
    bracketing segment. Returns ``cap`` when the slack stays positive up to a
    finite cap; raises when an uncapped constraint can never be met.
    """

    def phi(vs):
        x = np.clip(u[None, :] - np.outer(vs, coef), lo, hi)
        return x @ row - offset

    points = [0.0]
    nz = coef != 0.0
    for bound in (lo, hi):
        cand = (u[nz] - bound[nz]) / coef[nz]
        points.extend(cand[cand > 0.0])
    if np.isfinite(cap):
        points = [p for p in points if p < cap] + [cap]
    # Duplicate breakpoints are harmless: zero-length segments cannot bracket.
    points = np.sort(np.array(points, dtype=np.float64))
    values = phi(points)

    if values[0] <= 0.0:
        return 0.0
    below = np.nonzero(values <= 0.0)[0]
    if below.size:
        j = below[0]
        v1, v2 = points[j - 1], points[j]
        f1, f2 = values[j - 1], values[j]
        if f1 == f2:
            return v2
        return v1 + f1 * (v2 - v1) / (f1 - f2)
    # Positive at every breakpoint: either saturate a finite cap or extend the
    # final linear segment (constant slope from here on).
    if np.isfinite(cap):
        return cap
    v_last = points[-1]
    f_last = values[-1]
    step = max(1.0, abs(v_last))
    f_next = float(phi(np.array([v_last + step]))[0])
    slope = (f_next - f_last) / step
    if slope >= 0.0:
        raise InfeasibleInstanceError("constraint unreachable: dual slack never vanishes")
    return v_last + f_last / (-slope)


def _affine_dual_ascent(z, alpha, qvals, a_mat, a_off, feasible: Box, max_sweeps=100):
    """Exact affine composite minimizer via dual coordinate ascent.

    The Lagrangian dual over hinge multipliers theta in prod [0, Q_n] is
    concave and C1 with gradient g(x(theta)) at the clamped prox point
    ``x(theta) = clip(z - A^T theta / (2 alpha))``. Coordinate sections are
    monotone piecewise linear, so each coordinate is maximized exactly; at a
    dual optimum complementarity makes the prox point the exact primal
    minimizer. ``qvals`` entries of +inf turn hinges into hard constraints.
    """
    n = a_mat.shape[0]
    lower, upper = feasible.lower, feasible.upper
    inv = 1.0 / (2.0 * alpha)
    theta = np.zeros(n)
    shift = np.zeros_like(z)  # A^T theta, maintained incrementally

    def dual_value(theta_vec):
        x = np.clip(z - (a_mat.T @ theta_vec) * inv, lower, upper)
        return alpha * float(np.sum((x - z) ** 2)) + float(theta_vec @ (a_mat @ x - a_off))

    for sweep in range(1, max_sweeps + 1):
        theta_before = theta.copy()
        moved = 0.0
        for idx in range(n):
            row = a_mat[idx]
            rest = (shift - theta[idx] * row) * inv
            u = z - rest
            new = _monotone_pl_root(u, row * inv, row, lower, upper, a_off[idx], qvals[idx])
            if new != theta[idx]:
                shift = shift + (new - theta[idx]) * row
                moved = max(moved, abs(new - theta[idx]))
                theta[idx] = new
        if moved <= 1e-12 * (1.0 + float(np.max(np.abs(theta)))):
            break
        if sweep == 1:
            continue
        # Near-parallel active rows make cyclic ascent crawl along a flat
        # valley; extrapolate along the sweep direction while the dual value
        # keeps improving (ascent-safe, so convergence is unaffected).
        direction = theta - theta_before
        best_q = dual_value(theta)
        scale = 2.0
        improved = False
        while scale <= 1 << 20:
            trial = np.clip(theta_before + scale * direction, 0.0, qvals)
            q_trial = dual_value(trial)
            if q_trial <= best_q:
                break
            theta = trial
            best_q = q_trial
            improved = True
            scale *= 2.0
        if improved:
            shift = a_mat.T @ theta

    x = np.clip(z - shift * inv, lower, upper)
    # Complementarity audit: every multiplier must sit consistently with its
    # slack, otherwise the ascent stalled and the caller must fall back.
    g = a_mat @ x - a_off
    scale = 1.0 + float(np.max(np.abs(a_off))) + float(np.max(np.abs(g)))
    tol = 1e-9 * scale
    at_zero = theta <= 0.0
    at_cap = np.isfinite(qvals) & (theta >= qvals)
    interior = ~(at_zero | at_cap)
    ok = (
        np.all(g[at_zero] <= tol)
        and np.all(g[at_cap] >= -tol)
        and np.all(np.abs(g[interior]) <= tol)
    )
    if not ok:
        return None
    return x


def _subgradient_phase(x_start, x_prev, grad_prev, alpha, qvals, rf, feasible, iters):
    """Projected subgradient with the strongly-convex step rule 1/(alpha (k+1)).

    Returns the best iterate seen and the average of the second half.
    """
    x = np.array(x_start, dtype=np.float64)
    lower, upper = feasible.lower, feasible.upper
    best_x = x
    best_val = _composite_value(x, x_prev, grad_prev, alpha, qvals, rf)
    tail_start = iters // 2
    tail_sum = np.zeros_like(x)
    tail_count = 0
    for k in range(1, iters + 1):
        sg = _composite_subgrad(x, x_prev, grad_prev, alpha, qvals, rf)
        x = np.clip(x - sg / (alpha * (k + 1)), lower, upper)
        val = _composite_value(x, x_prev, grad_prev, alpha, qvals, rf)
        if not np.isfinite(val):
            raise SolverError("non-finite composite objective", iterates=[best_x, x])
        if val < best_val:
            best_val = val
            best_x = x
        if k > tail_start:
            tail_sum += x
            tail_count += 1
    avg = np.clip(tail_sum / max(tail_count, 1), lower, upper)
    return best_x, avg


def _hinge_qp_polish(x_start, x_prev, grad_prev, alpha, qvals, rf: RoundFunctions, feasible: Box):
    """Slack reformulation solved with SQP: min over (x, s) with s >= g(x), s >= 0."""
    p = feasible.dimension
    n = rf.n_constraints

    def fun(y):
        diff = y[:p] - x_prev
        return float(grad_prev @ diff) + alpha * float(diff @ diff) + float(qvals @ y[p:])

    def jac(y):
        return np.concatenate([grad_prev + 2.0 * alpha * (y[:p] - x_prev), qvals])

    if rf.affine is not None:
        a_mat, a_off = rf.affine.matrix, rf.affine.offset
        cons_fun = lambda y: y[p:] - (a_mat @ y[:p] - a_off)
        cons_jac = lambda y: np.hstack([-a_mat, np.eye(n)])
    else:
        def cons_fun(y):
            return y[p:] - np.asarray(rf.constraint_values(y[:p]), dtype=np.float64)

        def cons_jac(y):
            rows = np.vstack([
                np.asarray(rf.constraint_subgradient(y[:p], i), dtype=np.float64)
                for i in range(n)
            ])
            return np.hstack([-rows, np.eye(n)])

    s0 = positive_part(np.asarray(rf.constraint_values(x_start), dtype=np.float64))
    y0 = np.concatenate([x_start, s0])
    bounds = [(lo, hi) for lo, hi in zip(feasible.lower, feasible.upper)]
    bounds += [(0.0, None)] * n
    res = minimize(
        fun,
        y0,
        jac=jac,
        bounds=bounds,
        constraints=[{"type": "ineq", "fun": cons_fun, "jac": cons_jac}],
        method="SLSQP",
        options={"maxiter": 300, "ftol": 1e-12},
    )
    if not np.all(np.isfinite(res.x)):
        return None
    return feasible.project(res.x[:p])


def _capacity_coordinate_min(z, nu, cap: CapacityConstraint, feasible: Box) -> Vector:
    """Coordinatewise argmin of alpha-scaled prox plus nu * capacity term.

    Solves min_x (x - z)^2 * alpha_unit - (nu) * w log(1 + g x) per coordinate,
    where the alpha scaling is folded into nu by the caller.
    """
    g = cap.gain
    # Interior stationary point of (x - z)^2 - nu * w * log(1 + g x), nu >= 0.
    disc = (1.0 + g * z) ** 2 + 2.0 * nu * cap.weight * g * g
    x = (-(1.0 - g * z) + np.sqrt(disc)) / (2.0 * g)
    return np.clip(x, feasible.lower, feasible.upper)


def _capacity_prox(z, alpha, q_value, cap: CapacityConstraint, feasible: Box) -> Vector:
    """Exact minimizer of alpha ||x - z||^2 + q * [capacity gap]_+ over a box.

    The hinge makes this piecewise smooth with a single scalar kink surface,
    so the solution is either the clamped prox point (slack constraint), the
    fully penalized smooth minimizer (violated constraint), or the point on
    the constraint boundary located by a monotone scalar root find.
    """

    def gap(x):
        return cap.demand - float(np.sum(cap.weight * np.log1p(cap.gain * x)))

    x_free = np.clip(z, feasible.lower, feasible.upper)
    if gap(x_free) <= 0.0:
        return x_free

    def x_of(nu):
        return _capacity_coordinate_min(z, nu / alpha, cap, feasible)

    x_full = x_of(q_value)
    if gap(x_full) >= 0.0:
        return x_full
    nu_star = brentq(lambda nu: gap(x_of(nu)), 0.0, q_value, xtol=1e-14, rtol=8.9e-16)
    return x_of(nu_star)


def solve_pt(
    x_prev: Vector,
    grad_prev: Vector,
    alpha_prev: float,
    q: DoublyBoundedQueue,
    g_prev: RoundFunctions,
    feasible: Box,
    cfg: InnerSolverConfig,
    rng: Optional[np.random.Generator] = None,
) -> Vector:
    """Minimize the per-round composite objective over the box.

    The objective is ``<grad_prev, x - x_prev> + alpha ||x - x_prev||^2``
    plus the queue-weighted constraint hinges of the previous round. The
    previous decision and the plain gradient step always enter the candidate
    pool, so the result can never be worse than either.
    """
    if not alpha_prev > 0:
        raise ConfigurationError("alpha must be positive")
    x_prev = as_vector(x_prev, feasible.dimension)
    grad_prev = as_vector(grad_prev, feasible.dimension)
    qvals = q.values
    grad_step = argmin_gradient_step(x_prev, grad_prev, alpha_prev, feasible)
    candidates = [x_prev, grad_step]
    z = x_prev - grad_prev / (2.0 * alpha_prev)

    exact = None
    if g_prev.capacity is not None and g_prev.n_constraints == 1:
        exact = _capacity_prox(z, alpha_prev, float(qvals[0]), g_prev.capacity, feasible)
    elif g_prev.affine is not None:
        exact = _affine_piece_exact(z, alpha_prev, qvals, g_prev, feasible)
        if exact is None:
            exact = _affine_dual_ascent(
                z, alpha_prev, qvals, g_prev.affine.matrix, g_prev.affine.offset, feasible
            )
    if exact is not None:
        candidates.append(exact)
    else:
        iters = min(cfg.max_iters, SUBGRAD_ITER_CAP)
        best, avg = _subgradient_phase(
            grad_step, x_prev, grad_prev, alpha_prev, qvals, g_prev, feasible, iters
        )
        candidates += [best, avg]
        for _ in range(cfg.restarts):
            if rng is None:
                break
            jitter = 0.05 * (feasible.upper - feasible.lower) * rng.standard_normal(feasible.dimension)
            start = feasible.project(grad_step + jitter)
            b, a = _subgradient_phase(
                start, x_prev, grad_prev, alpha_prev, qvals, g_prev, feasible, iters
            )
            candidates += [b, a]
        polished = _hinge_qp_polish(best, x_prev, grad_prev, alpha_prev, qvals, g_prev, feasible)
        if polished is not None:
            candidates.append(polished)

    values = [
        _composite_value(c, x_prev, grad_prev, alpha_prev, qvals, g_prev) for c in candidates
    ]
    if not np.all(np.isfinite(values)):
        raise SolverError("non-finite composite objective across candidates", iterates=candidates)
    return candidates[int(np.argmin(values))]


def _capacity_linear_benchmark(cost, cap: CapacityConstraint, feasible: Box) -> Vector:
    """Exact solve of min <cost, x> subject to the capacity constraint on a box."""
    lo, hi = feasible.lower, feasible.upper
    g = cap.gain

    def x_of(nu):
        if nu == 0.0:
            return np.array(lo, dtype=np.float64)
        safe_cost = np.where(cost > 0.0, cost, 1.0)
        # Zero-cost coordinates only help the constraint: push them to the top.
        x = np.where(cost > 0.0, (nu * cap.weight * g / safe_cost - 1.0) / g, hi)
        return np.clip(x, lo, hi)

    def gap(x):
        return cap.demand - float(np.sum(cap.weight * np.log1p(g * x)))

    if gap(x_of(0.0)) <= 0.0:
        return x_of(0.0)
    if gap(np.asarray(hi, dtype=np.float64)) > 0.0:
        raise InfeasibleInstanceError("capacity demand exceeds total service capacity")
    nu_hi = 1.0
    while gap(x_of(nu_hi)) > 0.0:
        nu_hi *= 2.0
        if nu_hi > 1e18:
            raise InfeasibleInstanceError("capacity dual search failed to bracket")
    nu_star = brentq(lambda nu: gap(x_of(nu)), 0.0, nu_hi, xtol=1e-14, rtol=8.9e-16)
    return x_of(nu_star)


def _any_feasible(candidates, rf: RoundFunctions) -> bool:
    for c in candidates:
        g = np.asarray(rf.constraint_values(c), dtype=np.float64)
        if np.all(g <= FEASIBILITY_SLACK):
            return True
    return False


def _affine_linprog(rf: RoundFunctions, feasible: Box, margin: float):
    """Exact linear-cost solve over an affine polytope intersected with a box."""
    from scipy.optimize import linprog

    res = linprog(
        np.asarray(rf.loss_linear, dtype=np.float64),
        A_ub=rf.affine.matrix,
        b_ub=rf.affine.offset - margin,
        bounds=list(zip(feasible.lower, feasible.upper)),
        method="highs",
    )
    if not res.success:
        return None
    return feasible.project(res.x)


def _penalty_stage(x_start, rf: RoundFunctions, rho, feasible, iters):
    """Projected subgradient on f + rho * sum of constraint hinges."""
    x = np.array(x_start, dtype=np.float64)
    scale = max(feasible.diameter, 1.0)

    def value(pt):
        g = np.asarray(rf.constraint_values(pt), dtype=np.float64)
        return float(rf.loss_value(pt)) + rho * float(np.sum(positive_part(g)))

    best_x = x
    best_val = value(x)
    for k in range(1, iters + 1):
        sg = np.asarray(rf.loss_gradient(x), dtype=np.float64).copy()
        g = np.asarray(rf.constraint_values(x), dtype=np.float64)
        for n in np.nonzero(g > 0.0)[0]:
            sg += rho * np.asarray(rf.constraint_subgradient(x, int(n)), dtype=np.float64)
        norm = float(np.linalg.norm(sg))
        if norm == 0.0:
            break
        x = feasible.project(x - (scale / (norm * np.sqrt(k))) * sg)
        val = value(x)
        if val < best_val:
            best_val = val
            best_x = x
    return best_x


def _constrained_slsqp(rf: RoundFunctions, feasible: Box, start, margin):
    p = feasible.dimension
    n = rf.n_constraints

    def fun(x):
        return float(rf.loss_value(x))

    def jac(x):
        return np.asarray(rf.loss_gradient(x), dtype=np.float64)

    if rf.affine is not None:
        a_mat, a_off = rf.affine.matrix, rf.affine.offset
        cons = [{
            "type": "ineq",
            "fun": lambda x: (a_off - margin) - a_mat @ x,
            "jac": lambda x: -a_mat,
        }]
    else:
        def cons_fun(x):
            return -np.asarray(rf.constraint_values(x), dtype=np.float64) - margin

        def cons_jac(x):
            return -np.vstack([
                np.asarray(rf.constraint_subgradient(x, i), dtype=np.float64) for i in range(n)
            ])

        cons = [{"type": "ineq", "fun": cons_fun, "jac": cons_jac}]

    bounds = [(lo, hi) for lo, hi in zip(feasible.lower, feasible.upper)]
    res = minimize(
        fun,
        np.asarray(start, dtype=np.float64),
        jac=jac,
        bounds=bounds,
        constraints=cons,
        method="SLSQP",
        options={"maxiter": 400, "ftol": 1e-12},
    )
    if not np.all(np.isfinite(res.x)):
        return None
    return feasible.project(res.x)


def _dedupe_affine(rf: RoundFunctions) -> RoundFunctions:
    """Drop exactly repeated affine constraint rows (fixed-constraint streams)."""
    if rf.affine is None:
        return rf
    rows = np.hstack([rf.affine.matrix, rf.affine.offset[:, None]])
    unique = np.unique(rows, axis=0)
    if unique.shape[0] == rows.shape[0]:
        return rf
    from .core import AffineConstraints

    mat, off = unique[:, :-1], unique[:, -1]
    return RoundFunctions(
        loss_value=rf.loss_value,
        loss_gradient=rf.loss_gradient,
        constraint_values=lambda x, _m=mat, _o=off: _m @ x - _o,
        constraint_subgradient=lambda x, i, _m=mat: _m[i],
        n_constraints=mat.shape[0],
        affine=AffineConstraints(mat, off),
        loss_linear=rf.loss_linear,
        loss_prox=rf.loss_prox,
        feasible_anchor=rf.feasible_anchor,
    )


def _active_subset(rf: RoundFunctions, x, keep: int = 120, slack: float = 1e-3) -> RoundFunctions:
    """Restrict a large affine block to the rows near-active at x."""
    from .core import AffineConstraints

    g = rf.affine.matrix @ x - rf.affine.offset
    idx = np.nonzero(g >= -slack)[0]
    if idx.size < keep:
        order = np.argsort(g)[::-1]
        idx = np.union1d(idx, order[:keep])
    mat = rf.affine.matrix[idx]
    off = rf.affine.offset[idx]
    return RoundFunctions(
        loss_value=rf.loss_value,
        loss_gradient=rf.loss_gradient,
        constraint_values=lambda x, _m=mat, _o=off: _m @ x - _o,
        constraint_subgradient=lambda x, i, _m=mat: _m[i],
        n_constraints=mat.shape[0],
        affine=AffineConstraints(mat, off),
        loss_linear=rf.loss_linear,
        loss_prox=rf.loss_prox,
        feasible_anchor=rf.feasible_anchor,
    )


def _pull_feasible(x, rf: RoundFunctions, anchor) -> Vector:
    """Blend toward a strictly feasible anchor until every constraint is <= 0."""
    g = np.asarray(rf.constraint_values(x), dtype=np.float64)
    if np.all(g <= 0.0) or anchor is None:
        return x
    g_anchor = np.asarray(rf.constraint_values(anchor), dtype=np.float64)
    if np.any(g_anchor >= 0.0):
        return x
    violated = g > 0.0
    tau = float(np.max(g[violated] / (g[violated] - g_anchor[violated])))
    tau = min(1.0, tau * 1.000001 + 1e-15)
    blended = (1.0 - tau) * x + tau * np.asarray(anchor, dtype=np.float64)
    return blended


def solve_constrained(
    f: RoundFunctions,
    feasible: Box,
    cfg: InnerSolverConfig,
    anchor: Optional[Vector] = None,
) -> Vector:
    """Minimize a round's loss over the box subject to its constraints.

    Uses an exact dual scan for the linear-cost capacity case, a direct SQP
    solve otherwise (restricted to near-active rows when the constraint block
    is large), plus an exact-penalty subgradient loop with a doubling penalty
    weight as certificate and fallback. The result satisfies every constraint
    to within ``FEASIBILITY_SLACK`` and, whenever a strictly feasible anchor
    is available, exactly in floating point.
    """
    anchor = None if anchor is None else as_vector(anchor, feasible.dimension)
    if f.capacity is not None and f.n_constraints == 1 and f.loss_linear is not None:
        x = _capacity_linear_benchmark(np.asarray(f.loss_linear, dtype=np.float64), f.capacity, feasible)
        return feasible.project(_pull_feasible(x, f, anchor))

    rf = _dedupe_affine(f)
    candidates = []

    # Exact paths for structured instances.
    if rf.affine is not None and rf.loss_linear is not None:
        x = _affine_linprog(rf, feasible, FEASIBILITY_MARGIN)
        if x is not None:
            candidates.append(x)
    elif rf.affine is not None and rf.loss_prox is not None:
        _, z = rf.loss_prox
        caps = np.full(rf.n_constraints, np.inf)
        x = _affine_dual_ascent(
            np.asarray(z, dtype=np.float64),
            1.0,
            caps,
            rf.affine.matrix,
            rf.affine.offset - FEASIBILITY_MARGIN,
            feasible,
        )
        if x is not None:
            candidates.append(x)

    hinge_mass = np.inf
    large_block = rf.affine is not None and rf.n_constraints > 200
    if not _any_feasible(candidates, rf) and not large_block:
        starts = [feasible.center, feasible.lower]
        if anchor is not None:
            starts.append(anchor)
        for start in starts:
            x = _constrained_slsqp(rf, feasible, start, FEASIBILITY_MARGIN)
            if x is not None:
                candidates.append(x)

    if not _any_feasible(candidates, rf):
        # Exact-penalty fallback: double the weight until the hinge mass vanishes.
        grad0 = np.asarray(rf.loss_gradient(feasible.center), dtype=np.float64)
        rho = 10.0 * (1.0 + float(np.linalg.norm(grad0)))
        x_pen = np.array(feasible.center, dtype=np.float64)
        stage_iters = min(cfg.max_iters, SUBGRAD_ITER_CAP)
        while rho <= _PENALTY_CAP:
            x_pen = _penalty_stage(x_pen, rf, rho, feasible, stage_iters)
            hinge_mass = float(np.sum(positive_part(np.asarray(rf.constraint_values(x_pen)))))
            if hinge_mass < 1e-8:
                break
            rho *= 2.0
        candidates.append(feasible.project(x_pen))
        if large_block:
            sub = _active_subset(rf, x_pen)
            for _ in range(5):
                x = _constrained_slsqp(sub, feasible, x_pen, FEASIBILITY_MARGIN)
                if x is None:
                    break
                full_g = np.asarray(rf.constraint_values(x), dtype=np.float64)
                if np.all(full_g <= FEASIBILITY_SLACK):
                    candidates.append(x)
                    break
                sub = _active_subset(rf, x)
                x_pen = x

    repaired = []
    for c in candidates:
        c = feasible.project(_pull_feasible(c, rf, anchor))
        g = np.asarray(rf.constraint_values(c), dtype=np.float64)
        if np.all(g <= FEASIBILITY_SLACK):
            repaired.append(c)
    if not repaired:
        raise InfeasibleInstanceError(
            f"no candidate reached feasibility (best hinge mass {hinge_mass:.3e})"
        )
    values = [float(rf.loss_value(c)) for c in repaired]
    if not np.all(np.isfinite(values)):
        raise SolverError("non-finite loss at feasible candidates", iterates=repaired)
    return repaired[int(np.argmin(values))]
