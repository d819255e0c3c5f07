"""A small dense two-phase simplex solver

This is meant for the tiny, heavily degenerate programs that show up when
checking the delay-energy trade-off (a few dozen variables at most). It uses a
full tableau and Bland's rule, which never cycles, and it makes no attempt to be
fast.
"""

__all__ = ["LinearProgramResult", "linprog"]

from typing import Optional

import equinox as eqx
import numpy as np

from encrelay.types import Array


class LinearProgramResult(eqx.Module):
    """The outcome of :func:`linprog`

    Args:
        status: ``"optimal"``, ``"infeasible"`` or ``"unbounded"``
        x: The optimal point (``None`` unless optimal)
        objective: The optimal objective value (``None`` unless optimal)
        iterations: Number of pivots over both phases
    """

    status: str
    x: Optional[np.ndarray] = None
    objective: Optional[float] = None
    iterations: int = 0

    @property
    def success(self) -> bool:
        return self.status == "optimal"


def linprog(
    c: Array,
    A_ub: Optional[Array] = None,
    b_ub: Optional[Array] = None,
    A_eq: Optional[Array] = None,
    b_eq: Optional[Array] = None,
    *,
    tol: float = 1e-12,
    feasibility_tol: float = 1e-9,
    max_iter: int = 10_000,
) -> LinearProgramResult:
    """Minimize ``c @ x`` subject to ``A_ub @ x <= b_ub``, ``A_eq @ x == b_eq``,
    and ``x >= 0``

    Args:
        c: Objective coefficients, shape ``(n,)``
        A_ub, b_ub: Inequality constraints, shapes ``(m_ub, n)`` and ``(m_ub,)``
        A_eq, b_eq: Equality constraints, shapes ``(m_eq, n)`` and ``(m_eq,)``
        tol: Pivot and reduced-cost tolerance
        feasibility_tol: Largest phase-one objective still treated as feasible
        max_iter: Pivot limit per phase

    Returns:
        A :class:`LinearProgramResult`
    """
    c = np.asarray(c, dtype=np.float64).reshape(-1)
    n_orig = c.shape[0]
    A_ub = np.zeros((0, n_orig)) if A_ub is None else np.asarray(A_ub, dtype=float)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float)
    A_eq = np.zeros((0, n_orig)) if A_eq is None else np.asarray(A_eq, dtype=float)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float)
    A_ub = A_ub.reshape(-1, n_orig)
    A_eq = A_eq.reshape(-1, n_orig)
    if A_ub.shape[0] != b_ub.shape[0] or A_eq.shape[0] != b_eq.shape[0]:
        raise ValueError("Constraint matrices and right-hand sides do not match")

    # Equality form with one slack per inequality row
    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    m = m_ub + m_eq
    n = n_orig + m_ub
    A = np.zeros((m, n))
    A[:m_ub, :n_orig] = A_ub
    A[:m_ub, n_orig:] = np.eye(m_ub)
    A[m_ub:, :n_orig] = A_eq
    b = np.concatenate([b_ub, b_eq])
    flip = b < 0
    A[flip] *= -1
    b[flip] *= -1

    # Phase one: one artificial per row
    tableau = np.zeros((m, n + m + 1))
    tableau[:, :n] = A
    tableau[:, n : n + m] = np.eye(m)
    tableau[:, -1] = b
    basis = list(range(n, n + m))
    phase_one_cost = np.concatenate([np.zeros(n), np.ones(m)])

    status, it1 = _iterate(tableau, basis, phase_one_cost, n + m, tol, max_iter)
    if status != "optimal":  # pragma: no cover
        return LinearProgramResult(status=status, iterations=it1)
    infeasibility = sum(tableau[i, -1] for i, j in enumerate(basis) if j >= n)
    if infeasibility > feasibility_tol:
        return LinearProgramResult(status="infeasible", iterations=it1)

    # Drive artificials out of the basis, dropping redundant rows
    row = 0
    while row < len(basis):
        if basis[row] < n:
            row += 1
            continue
        candidates = np.flatnonzero(np.abs(tableau[row, :n]) > tol)
        if candidates.size:
            _pivot(tableau, basis, row, int(candidates[0]))
            row += 1
        else:
            tableau = np.delete(tableau, row, axis=0)
            del basis[row]
    tableau = np.delete(tableau, np.s_[n : n + m], axis=1)

    phase_two_cost = np.concatenate([c, np.zeros(m_ub)])
    status, it2 = _iterate(tableau, basis, phase_two_cost, n, tol, max_iter)
    if status != "optimal":
        return LinearProgramResult(status=status, iterations=it1 + it2)

    x = np.zeros(n)
    for i, j in enumerate(basis):
        x[j] = tableau[i, -1]
    x = x[:n_orig]
    return LinearProgramResult(
        status="optimal", x=x, objective=float(c @ x), iterations=it1 + it2
    )


def _iterate(
    tableau: np.ndarray,
    basis: list[int],
    cost: np.ndarray,
    n_cols: int,
    tol: float,
    max_iter: int,
) -> tuple[str, int]:
    for it in range(max_iter):
        reduced = cost[:n_cols] - cost[basis] @ tableau[:, :n_cols]
        entering = np.flatnonzero(reduced < -tol)
        if entering.size == 0:
            return "optimal", it
        col = int(entering[0])

        column = tableau[:, col]
        rows = np.flatnonzero(column > tol)
        if rows.size == 0:
            return "unbounded", it
        ratios = tableau[rows, -1] / column[rows]
        best = ratios.min()
        ties = rows[ratios <= best + tol]
        # Bland: leave on the smallest basic index among ties
        leaving = int(min(ties, key=lambda i: basis[i]))
        _pivot(tableau, basis, leaving, col)
    raise RuntimeError(f"Simplex did not converge in {max_iter} pivots")


def _pivot(tableau: np.ndarray, basis: list[int], row: int, col: int) -> None:
    tableau[row] /= tableau[row, col]
    for i in range(tableau.shape[0]):
        if i != row and tableau[i, col] != 0.0:
            tableau[i] -= tableau[i, col] * tableau[row]
    basis[row] = col
