"""Dense simplex for box-constrained equality LPs.

Solves ``maximize c @ x  subject to  A @ x = b,  0 <= x <= 1`` with a
two-phase bounded-variable simplex.  Selection problems have very few
equality rows (a budget plus one row per extra group), so the basis stays
tiny while the variable count is the pool size; a dense implementation
with explicit small solves is plenty.

Pivoting uses Bland's lowest-index rule throughout, which both prevents
cycling and makes every tie-break auditable: identical problems produce
identical optimal bases on every run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FEAS_TOL = 1e-9
PIVOT_TOL = 1e-11

_AT_LOWER, _AT_UPPER, _BASIC = 0, 1, 2


class LpError(ValueError):
    """Malformed linear program."""


class Infeasible(LpError):
    """No feasible point; ``certificate`` maps constraint row -> residual."""

    def __init__(self, message: str, certificate: dict[int, float] | None = None):
        super().__init__(message)
        self.certificate = certificate or {}


@dataclass(frozen=True)
class LpProblem:
    """Equality-constrained LP over the unit box."""

    objective: np.ndarray
    eq_matrix: np.ndarray
    eq_rhs: np.ndarray

    @classmethod
    def build(cls, objective, eq_matrix, eq_rhs) -> "LpProblem":
        c = np.asarray(objective, dtype=float)
        a = np.atleast_2d(np.asarray(eq_matrix, dtype=float))
        b = np.atleast_1d(np.asarray(eq_rhs, dtype=float))
        if c.ndim != 1:
            raise LpError("objective must be a vector")
        if a.shape != (len(b), len(c)):
            raise LpError(
                f"inconsistent dimensions: A is {a.shape}, expected ({len(b)}, {len(c)})"
            )
        if not (np.isfinite(c).all() and np.isfinite(a).all() and np.isfinite(b).all()):
            raise LpError("objective, matrix and rhs must be finite")
        return cls(c, a, b)

    @property
    def n_vars(self) -> int:
        return len(self.objective)


@dataclass(frozen=True)
class LpSolution:
    x: np.ndarray
    value: float
    duals: np.ndarray  # one multiplier per equality row


class _Tableau:
    """Mutable state of the bounded-variable simplex."""

    def __init__(self, a: np.ndarray, b: np.ndarray, ub: np.ndarray, basis: list[int]):
        self.a = a
        self.b = b
        self.ub = ub
        self.basis = basis
        self.status = np.full(a.shape[1], _AT_LOWER, dtype=np.int8)
        self.status[basis] = _BASIC

    def basic_values(self) -> np.ndarray:
        upper = np.flatnonzero(self.status == _AT_UPPER)
        rhs = self.b - self.a[:, upper] @ self.ub[upper]
        return np.linalg.solve(self.a[:, self.basis], rhs)

    def full_solution(self) -> np.ndarray:
        x = np.where(self.status == _AT_UPPER, self.ub, 0.0)
        x[self.basis] = np.clip(self.basic_values(), 0.0, self.ub[self.basis])
        return x


_SCAN_BLOCK = 2048


def _first_improving(tab: _Tableau, c: np.ndarray, lam: np.ndarray) -> int | None:
    """Lowest-index variable with an improving reduced cost (Bland's rule).

    Scanned in blocks so iterations that enter low indices stay cheap; a
    full pass only happens once, to prove optimality.
    """
    n = tab.a.shape[1]
    for start in range(0, n, _SCAN_BLOCK):
        end = min(start + _SCAN_BLOCK, n)
        reduced = c[start:end] - lam @ tab.a[:, start:end]
        status = tab.status[start:end]
        improving = ((status == _AT_LOWER) & (reduced > FEAS_TOL)) | (
            (status == _AT_UPPER) & (reduced < -FEAS_TOL)
        )
        idx = np.flatnonzero(improving)
        if idx.size:
            return start + int(idx[0])
    return None


def _run_simplex(tab: _Tableau, c: np.ndarray) -> np.ndarray:
    """Optimize in place; returns the final duals.

    Basic values are updated incrementally along each step and refreshed
    from scratch periodically to keep rounding drift in check.
    """
    a, ub = tab.a, tab.ub
    m = a.shape[0]
    x_b = tab.basic_values()
    since_refresh = 0
    while True:
        basis_mat = a[:, tab.basis]
        lam = np.linalg.solve(basis_mat.T, c[tab.basis])
        j = _first_improving(tab, c, lam)
        if j is None:
            return lam
        sigma = 1.0 if tab.status[j] == _AT_LOWER else -1.0
        direction = np.linalg.solve(basis_mat, a[:, j])

        # step length before the entering variable or a basic one hits a bound
        t_best = ub[j]
        leave_candidates = [(j, None)]
        for i in range(m):
            rate = -sigma * direction[i]
            bi = tab.basis[i]
            if rate < -PIVOT_TOL:
                t = max(x_b[i], 0.0) / (-rate)
                hits = _AT_LOWER
            elif rate > PIVOT_TOL:
                t = max(ub[bi] - x_b[i], 0.0) / rate
                hits = _AT_UPPER
            else:
                continue
            if t < t_best - FEAS_TOL:
                t_best = t
                leave_candidates = [(bi, (i, hits))]
            elif t <= t_best + FEAS_TOL:
                leave_candidates.append((bi, (i, hits)))

        leave_var, pivot = min(leave_candidates)  # Bland: lowest index leaves
        x_b -= sigma * t_best * direction
        if pivot is None:
            # bound flip: the entering variable crosses its whole range
            tab.status[j] = _AT_UPPER if sigma > 0 else _AT_LOWER
        else:
            row, hits = pivot
            tab.status[tab.basis[row]] = hits
            tab.basis[row] = j
            tab.status[j] = _BASIC
            start = 0.0 if sigma > 0 else ub[j]
            x_b[row] = start + sigma * t_best
        since_refresh += 1
        if since_refresh >= 512:
            x_b = tab.basic_values()
            since_refresh = 0


def _drive_out_artificials(tab: _Tableau, n_struct: int) -> list[int]:
    """Pivot zero-valued artificial variables out of the basis.

    Returns row indices whose constraints are redundant (no structural
    column can replace the artificial); callers drop those rows.
    """
    redundant: list[int] = []
    for row in range(tab.a.shape[0]):
        if tab.basis[row] < n_struct:
            continue
        basis_mat = tab.a[:, tab.basis]
        replaced = False
        for j in range(n_struct):
            if tab.status[j] == _BASIC:
                continue
            alpha = np.linalg.solve(basis_mat, tab.a[:, j])[row]
            if abs(alpha) > 1e-7:
                tab.status[tab.basis[row]] = _AT_LOWER
                tab.basis[row] = j
                tab.status[j] = _BASIC
                replaced = True
                break
        if not replaced:
            redundant.append(row)
    return redundant


def solve_lp(problem: LpProblem, start_at_upper: np.ndarray | None = None) -> LpSolution:
    """Two-phase bounded simplex; deterministic by Bland's rule.

    ``start_at_upper`` optionally names variables to start at their upper
    bound, a warm start that shortens phase 1 when the caller already
    knows a near-feasible selection; it never changes what is optimal.

    Raises :class:`Infeasible` with a per-row residual certificate when the
    equality system has no point inside the box.  Unboundedness cannot
    occur with box bounds and is treated as an internal error.
    """
    c = problem.objective
    a = problem.eq_matrix
    b = problem.eq_rhs
    m, n = a.shape
    if n == 0:
        raise LpError("problem has no variables")
    if m == 0:
        x = (c > 0).astype(float)
        return LpSolution(x, float(c @ x), np.zeros(0))

    residual = b.astype(float).copy()
    if start_at_upper is not None:
        start_at_upper = np.asarray(start_at_upper, dtype=np.int64)
        residual -= a[:, start_at_upper].sum(axis=1)
    signs = np.where(residual < 0, -1.0, 1.0)
    art = np.diag(signs)
    ext_a = np.hstack([a, art])
    ext_ub = np.concatenate([np.ones(n), np.abs(residual) + 1.0])
    tab = _Tableau(ext_a, b, ext_ub, basis=list(range(n, n + m)))
    if start_at_upper is not None:
        tab.status[start_at_upper] = _AT_UPPER

    phase1_c = np.concatenate([np.zeros(n), -np.ones(m)])
    _run_simplex(tab, phase1_c)
    x_ext = tab.full_solution()
    residuals = x_ext[n:]
    if residuals.sum() > 1e-7:
        certificate = {
            int(i): float(signs[i] * residuals[i])
            for i in range(m)
            if residuals[i] > FEAS_TOL
        }
        rows = ", ".join(f"row {i} (residual {r:+.3g})" for i, r in certificate.items())
        raise Infeasible(f"equality constraints cannot be met: {rows}", certificate)

    redundant = _drive_out_artificials(tab, n)
    if redundant:
        keep = [i for i in range(m) if i not in redundant]
        kept_basis = [tab.basis[i] for i in keep]
        new_tab = _Tableau(ext_a[keep][:, : n], b[keep], ext_ub[:n], basis=kept_basis)
        new_tab.status[: n] = tab.status[: n]
        new_tab.status[kept_basis] = _BASIC
        tab = new_tab
        phase2_c = c
        duals_rows = keep
    else:
        tab.ub[n:] = 0.0  # lock artificials
        phase2_c = np.concatenate([c, np.zeros(m)])
        duals_rows = list(range(m))

    lam = _run_simplex(tab, phase2_c)
    x_full = tab.full_solution()[:n]
    duals = np.zeros(m)
    duals[list(duals_rows)] = lam[: len(duals_rows)]
    return LpSolution(x=x_full, value=float(c @ x_full), duals=duals)
