"""Independent brute-force oracles used by the tests.

These deliberately avoid the library's solver code paths: grids enumerate,
finite differences differentiate, and vertex scans optimize, so agreement
with the solvers is evidence rather than tautology.
"""

import numpy as np


def grid_points(box_lower, box_upper, resolution):
    """All grid points of a 1-d or 2-d box at the given spacing."""
    axes = []
    for lo, hi in zip(box_lower, box_upper):
        n = int(round((hi - lo) / resolution)) + 1
        axes.append(np.linspace(lo, hi, n))
    if len(axes) == 1:
        return axes[0][:, None]
    xx, yy = np.meshgrid(axes[0], axes[1], indexing="ij")
    return np.stack([xx.ravel(), yy.ravel()], axis=1)


def grid_min_composite(points, x_prev, grad, alpha, a_mat, a_off, qvals):
    """Minimum of the per-round composite objective over grid points."""
    diff = points - x_prev
    lin = diff @ grad
    quad = alpha * np.sum(diff * diff, axis=1)
    pen = np.maximum(points @ a_mat.T - a_off, 0.0) @ qvals
    return float(np.min(lin + quad + pen))


def grid_min_constrained(points, loss_fn, a_mat, a_off):
    """Minimum loss over the grid points satisfying every constraint."""
    feasible = np.all(points @ a_mat.T - a_off <= 0.0, axis=1)
    pts = points[feasible]
    values = np.array([loss_fn(p) for p in pts])
    return float(np.min(values)), pts[int(np.argmin(values))]


def central_difference_gradient(fn, x, step=1e-6):
    """Central finite differences of a scalar function."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for j in range(x.size):
        h = step * max(1.0, abs(x[j]))
        e = np.zeros_like(x)
        e[j] = h
        grad[j] = (fn(x + e) - fn(x - e)) / (2.0 * h)
    return grad


def box_vertices(lower, upper):
    p = len(lower)
    bits = (np.arange(1 << p)[:, None] >> np.arange(p)) & 1
    return np.where(bits == 1, upper, lower).astype(np.float64)


def lp_vertex_min(cost, a_mat, a_off, lower, upper):
    """LP minimum by enumerating box vertices and constraint intersections.

    Valid for 2-d boxes with affine cuts: the optimum lies at a vertex of the
    polytope, each of which is the intersection of two active hyperplanes
    (box faces count).
    """
    rows = [np.array([1.0, 0.0]), np.array([0.0, 1.0])]
    offs = [upper[0], upper[1]]
    rows += [np.array([-1.0, 0.0]), np.array([0.0, -1.0])]
    offs += [-lower[0], -lower[1]]
    for r, o in zip(a_mat, a_off):
        rows.append(np.asarray(r, dtype=np.float64))
        offs.append(float(o))
    best = np.inf
    arg = None
    m = len(rows)
    for i in range(m):
        for j in range(i + 1, m):
            a = np.stack([rows[i], rows[j]])
            if abs(np.linalg.det(a)) < 1e-12:
                continue
            x = np.linalg.solve(a, np.array([offs[i], offs[j]]))
            if np.any(x < lower - 1e-9) or np.any(x > upper + 1e-9):
                continue
            if np.any(np.stack(rows) @ x - np.array(offs) > 1e-9):
                continue
            v = float(cost @ x)
            if v < best:
                best = v
                arg = x
    return best, arg
