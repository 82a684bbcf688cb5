"""Two-phase primal simplex over exact rationals with Bland's rule.

Small, dense and deliberately textbook: every entry is a
``fractions.Fraction``, Bland's smallest-index rule guarantees
termination, and the final basis is used to recover exact dual values,
so optimality of a solve is independently re-checkable.

Problems are given as ``minimize c.x`` subject to rows ``a.x >= b`` or
``a.x == b`` and ``x >= 0``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

ZERO = Fraction(0)
ONE = Fraction(1)


class SimplexError(Exception):
    pass


class InfeasibleError(SimplexError):
    pass


class UnboundedError(SimplexError):
    pass


@dataclass
class SimplexResult:
    x: list                 # structural variable values
    objective: Fraction
    duals: list             # one multiplier per input row
    basis: list             # basic column label per tableau row
    pivots: int


def solve_linear_system(matrix, rhs):
    """Exact Gaussian elimination; raises ``SimplexError`` when the
    matrix is singular."""
    n = len(matrix)
    aug = [[Fraction(v) for v in row] + [Fraction(rhs[i])]
           for i, row in enumerate(matrix)]
    perm = list(range(n))
    for col in range(n):
        piv = None
        for r in range(col, n):
            if aug[r][col] != 0:
                piv = r
                break
        if piv is None:
            raise SimplexError("singular linear system")
        aug[col], aug[piv] = aug[piv], aug[col]
        perm[col], perm[piv] = perm[piv], perm[col]
        prow = aug[col]
        inv = ONE / prow[col]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                f = aug[r][col] * inv
                row = aug[r]
                for k in range(col, n + 1):
                    row[k] -= f * prow[k]
    return [aug[i][n] / aug[i][i] for i in range(n)]


def solve(n_vars, rows, objective):
    """Minimize ``objective . x`` over ``x >= 0`` and the given rows.

    ``rows`` is a list of ``(coeffs, sense, rhs)`` with ``coeffs`` a
    dict column->Fraction and ``sense`` one of ``">="`` / ``"=="``.
    Returns a :class:`SimplexResult`; raises ``InfeasibleError`` or
    ``UnboundedError`` otherwise.
    """
    m = len(rows)
    nslack = sum(1 for (_, sense, _) in rows if sense == ">=")
    ncols = n_vars + nslack
    # standardized rows: A x - slack = b for ">=", A x = b for "=="
    A = []
    b = []
    negated = []
    slack_of_row = [None] * m
    si = 0
    for i, (coeffs, sense, rhs) in enumerate(rows):
        row = [ZERO] * ncols
        for j, v in coeffs.items():
            row[j] += Fraction(v)
        if sense == ">=":
            row[n_vars + si] = -ONE
            slack_of_row[i] = n_vars + si
            si += 1
        elif sense != "==":
            raise ValueError(f"bad sense {sense!r}")
        rhs = Fraction(rhs)
        if rhs < 0:
            row = [-v for v in row]
            rhs = -rhs
            negated.append(True)
        else:
            negated.append(False)
        A.append(row)
        b.append(rhs)

    # phase 1: artificial variables where no ready-made basic column exists
    basis = [None] * m
    art_cols = []
    for i in range(m):
        s = slack_of_row[i]
        if s is not None and A[i][s] == ONE and b[i] >= 0:
            basis[i] = s
    for i in range(m):
        if basis[i] is None:
            col = ncols + len(art_cols)
            art_cols.append(col)
            basis[i] = col
    total = ncols + len(art_cols)
    T = [row + [ZERO] * len(art_cols) + [b[i]] for i, row in enumerate(A)]
    for i in range(m):
        if basis[i] >= ncols:
            T[i][basis[i]] = ONE
    kept_rows = list(range(m))

    pivots = 0

    def run_phase(cost):
        nonlocal pivots
        obj = [Fraction(c) for c in cost] + [ZERO]
        for i in range(m):
            cb = cost[basis[i]]
            if cb:
                for k in range(total + 1):
                    obj[k] -= cb * T[i][k]
        while True:
            enter = -1
            for j in range(total):
                if obj[j] < 0:
                    enter = j
                    break
            if enter < 0:
                return -obj[total]
            leave = -1
            best = None
            for i in range(m):
                a = T[i][enter]
                if a > 0:
                    ratio = T[i][total] / a
                    if (best is None or ratio < best
                            or (ratio == best and basis[i] < basis[leave])):
                        best = ratio
                        leave = i
            if leave < 0:
                raise UnboundedError("objective unbounded below")
            pivots += 1
            prow = T[leave]
            inv = ONE / prow[enter]
            if inv != ONE:
                for k in range(total + 1):
                    prow[k] *= inv
            for i in range(m):
                if i != leave:
                    f = T[i][enter]
                    if f:
                        row = T[i]
                        for k in range(total + 1):
                            row[k] -= f * prow[k]
            f = obj[enter]
            if f:
                for k in range(total + 1):
                    obj[k] -= f * prow[k]
            basis[leave] = enter

    if art_cols:
        cost1 = [ZERO] * ncols + [ONE] * len(art_cols)
        feas = run_phase(cost1)
        if feas != 0:
            raise InfeasibleError(f"phase-1 optimum {feas} > 0")
        # drive leftover artificial variables out of the basis
        drop = []
        for i in range(m):
            if basis[i] >= ncols:
                enter = next((j for j in range(ncols) if T[i][j] != 0), None)
                if enter is None:
                    drop.append(i)
                    continue
                pivots += 1
                prow = T[i]
                inv = ONE / prow[enter]
                if inv != ONE:
                    for k in range(total + 1):
                        prow[k] *= inv
                for r in range(m):
                    if r != i and T[r][enter] != 0:
                        f = T[r][enter]
                        row = T[r]
                        for k in range(total + 1):
                            row[k] -= f * prow[k]
                basis[i] = enter
        for i in reversed(drop):
            del T[i]
            del basis[i]
            del kept_rows[i]
        m = len(T)
        for row in T:
            for col in reversed(art_cols):
                del row[col]
        total = ncols

    cost2 = [Fraction(objective.get(j, ZERO)) if isinstance(objective, dict)
             else Fraction(objective[j]) for j in range(n_vars)]
    cost2 += [ZERO] * (total - n_vars)
    objective_value = run_phase(cost2)

    x = [ZERO] * total
    for i in range(m):
        x[basis[i]] = T[i][total]

    # duals from the final basis: solve B^T ybar = c_B on the standardized
    # (sign-normalized) rows, then undo the row negations.
    duals = [ZERO] * len(rows)
    if m:
        bt = [[A[kept_rows[r]][basis[i]] for r in range(m)] for i in range(m)]
        ybar = solve_linear_system(bt, [cost2[basis[i]] for i in range(m)])
        for r in range(m):
            orig = kept_rows[r]
            duals[orig] = -ybar[r] if negated[orig] else ybar[r]
    return SimplexResult(x=x[:n_vars], objective=objective_value,
                         duals=duals, basis=list(basis), pivots=pivots)
