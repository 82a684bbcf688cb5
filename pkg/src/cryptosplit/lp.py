"""Linear programs over constraint sets and their certification.

``build_lp`` turns a constraint set into "minimize the root variable"
with one row per constraint; ``solve_exact`` answers with exact
rationals plus dual multipliers; ``emit_lp``/``parse_lp`` round-trip
the model through the lp_solve text dialect; ``verify_certificate``
re-derives everything a third party needs to accept a claimed bound:
constraint validity, primal feasibility and dual optimality.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction

from . import simplex
from .extract import (ConstraintSet, InvalidConstraintError, ScaleConstraint,
                      SplitConstraint, ZeroBitConstraint)
from .positions import format_position, mass, parse_position

ZERO = Fraction(0)


@dataclass
class LpRow:
    coeffs: dict            # variable index -> Fraction
    sense: str              # ">=" or "=="
    rhs: Fraction
    kind: str | None = None


@dataclass
class LpModel:
    variables: list         # canonical positions, lexicographic
    rows: list
    objective: int          # index of the root variable

    def var_index(self):
        return {p: i for i, p in enumerate(self.variables)}

    def root(self):
        return self.variables[self.objective]

    def __eq__(self, other):
        if not isinstance(other, LpModel):
            return NotImplemented
        return (self.variables == other.variables
                and self.objective == other.objective
                and [(sorted(r.coeffs.items()), r.sense, r.rhs)
                     for r in self.rows]
                == [(sorted(r.coeffs.items()), r.sense, r.rhs)
                    for r in other.rows])


@dataclass
class LpSolution:
    status: str                     # "optimal" | "infeasible" | "unbounded"
    objective: Fraction | None = None
    assignment: dict = field(default_factory=dict)
    duals: list = field(default_factory=list)
    basis: list = field(default_factory=list)
    pivots: int = 0

    def value(self, pos):
        return self.assignment[tuple(pos)]

    def to_json(self):
        return {
            "status": self.status,
            "objective": None if self.objective is None else str(self.objective),
            "assignment": {format_position(p): str(v)
                           for p, v in self.assignment.items()},
            "duals": [str(v) for v in self.duals],
            "basis": list(self.basis),
            "pivots": self.pivots,
        }

    @classmethod
    def from_json(cls, doc):
        return cls(
            status=doc["status"],
            objective=None if doc["objective"] is None
            else Fraction(doc["objective"]),
            assignment={parse_position(k): Fraction(v)
                        for k, v in doc["assignment"].items()},
            duals=[Fraction(v) for v in doc.get("duals", [])],
            basis=list(doc.get("basis", [])),
            pivots=doc.get("pivots", 0))


class UnclosedConstraintSetError(ValueError):
    pass


def build_lp(cs, all_equalities=False):
    """Model "minimize the root value subject to the constraint set".

    Variables are the canonical positions of the set in lexicographic
    order; rows follow the sorted constraint keys, so the model is a
    deterministic function of the set.  ``all_equalities`` turns every
    relation into an equation (used to evaluate protocol graphs, which
    have exactly one defining relation per position).
    """
    if not cs.is_closed():
        raise UnclosedConstraintSetError(
            "constraint set leaves positions ungrounded")
    variables = sorted(cs.positions())
    index = {p: i for i, p in enumerate(variables)}
    if cs.root not in index:
        raise UnclosedConstraintSetError("root position is unconstrained")
    ineq = "==" if all_equalities else ">="
    rows = []
    for con in sorted(cs.constraints, key=lambda c: repr(c.key())):
        if isinstance(con, SplitConstraint):
            coeffs = {index[con.parent]: Fraction(1)}
            for child in (con.left, con.right):
                j = index[child]
                coeffs[j] = coeffs.get(j, ZERO) - 1
            coeffs = {j: v for j, v in coeffs.items() if v != 0}
            rows.append(LpRow(coeffs, ineq, ZERO, "split"))
        elif isinstance(con, ScaleConstraint):
            coeffs = {index[con.base]: Fraction(con.factor)}
            j = index[con.scaled]
            coeffs[j] = coeffs.get(j, ZERO) - 1
            coeffs = {j: v for j, v in coeffs.items() if v != 0}
            rows.append(LpRow(coeffs, "==", ZERO, "scale"))
        elif isinstance(con, ZeroBitConstraint):
            rows.append(LpRow({index[con.position]: Fraction(1)}, ineq,
                              Fraction(con.constant), "zerobit"))
        else:
            raise InvalidConstraintError(f"unknown constraint {con!r}")
    return LpModel(variables, rows, index[cs.root])


def solve_exact(model):
    """Exact optimum of the model via the internal rational simplex."""
    rows = [(r.coeffs, ">=" if r.sense == ">=" else "==", r.rhs)
            for r in model.rows]
    try:
        res = simplex.solve(len(model.variables), rows,
                            {model.objective: Fraction(1)})
    except simplex.InfeasibleError:
        return LpSolution(status="infeasible")
    except simplex.UnboundedError:
        return LpSolution(status="unbounded")
    assignment = {p: res.x[i] for i, p in enumerate(model.variables)}
    return LpSolution(status="optimal", objective=res.objective,
                      assignment=assignment, duals=res.duals,
                      basis=res.basis, pivots=res.pivots)


@dataclass
class CertificateVerdict:
    ok: bool
    bound: Fraction | None
    normalized: Fraction | None
    failures: list
    checked_constraints: int

    def to_json(self):
        return {
            "verified": self.ok,
            "bound": None if self.bound is None else str(self.bound),
            "bound_decimal": None if self.bound is None else float(self.bound),
            "normalized": None if self.normalized is None
            else str(self.normalized),
            "normalized_decimal": None if self.normalized is None
            else float(self.normalized),
            "failures": list(self.failures),
            "checked_constraints": self.checked_constraints,
        }


def verify_certificate(cs, claimed, normalize=True):
    """Re-check a claimed optimal solution from scratch.

    Validates every constraint mathematically, then checks the claimed
    assignment for exact primal feasibility and the claimed duals for
    dual feasibility, complementary slackness and strong duality.
    Passing all checks certifies ``claimed.objective`` as a lower bound
    on the game value of the root (divided by the root mass when
    ``normalize`` is set).
    """
    failures = []
    for i, con in enumerate(cs.constraints):
        try:
            from .extract import validate_constraint
            validate_constraint(con)
        except InvalidConstraintError as exc:
            failures.append(f"constraint {i}: {exc}")
    if failures:
        return CertificateVerdict(False, None, None, failures,
                                  len(cs.constraints))
    model = build_lp(cs)
    if claimed.status != "optimal":
        return CertificateVerdict(False, None, None,
                                  [f"claimed status {claimed.status!r}"],
                                  len(cs.constraints))
    x = []
    for p in model.variables:
        if p not in claimed.assignment:
            failures.append(f"assignment misses variable {p}")
            return CertificateVerdict(False, None, None, failures,
                                      len(cs.constraints))
        v = Fraction(claimed.assignment[p])
        if v < 0:
            failures.append(f"negative value at {p}")
        x.append(v)
    slacks = []
    for i, row in enumerate(model.rows):
        lhs = sum(v * x[j] for j, v in row.coeffs.items())
        slack = lhs - row.rhs
        slacks.append(slack)
        if row.sense == "==" and slack != 0:
            failures.append(f"row {i} ({row.kind}) violated: {lhs} != {row.rhs}")
        if row.sense == ">=" and slack < 0:
            failures.append(f"row {i} ({row.kind}) violated: {lhs} < {row.rhs}")
    if claimed.objective != x[model.objective]:
        failures.append("claimed objective differs from root value")
    if len(claimed.duals) != len(model.rows):
        failures.append("dual vector length mismatch")
    if not failures:
        y = [Fraction(v) for v in claimed.duals]
        for i, row in enumerate(model.rows):
            if row.sense == ">=" and y[i] < 0:
                failures.append(f"dual {i} negative on an inequality row")
            if y[i] != 0 and slacks[i] != 0:
                failures.append(f"complementary slackness fails on row {i}")
        reduced = [Fraction(1) if j == model.objective else ZERO
                   for j in range(len(model.variables))]
        for i, row in enumerate(model.rows):
            if y[i]:
                for j, v in row.coeffs.items():
                    reduced[j] -= y[i] * v
        for j, r in enumerate(reduced):
            if r < 0:
                failures.append(f"reduced cost of {model.variables[j]} negative")
            elif r != 0 and x[j] != 0:
                failures.append(
                    f"complementary slackness fails at {model.variables[j]}")
        yb = sum(y[i] * row.rhs for i, row in enumerate(model.rows))
        if yb != claimed.objective:
            failures.append(f"duality gap: y.b = {yb} != {claimed.objective}")
    if failures:
        return CertificateVerdict(False, None, None, failures,
                                  len(cs.constraints))
    bound = claimed.objective
    normalized = bound / mass(model.root()) if normalize else None
    return CertificateVerdict(True, bound, normalized, [],
                              len(cs.constraints))


# -- lp_solve text dialect ------------------------------------------------


def _var_name(pos):
    parts = []
    for v in pos:
        f = Fraction(v)
        parts.append(str(f.numerator) if f.denominator == 1
                     else f"{f.numerator}r{f.denominator}")
    return "s_" + "_".join(parts)


def _parse_var(name):
    if not name.startswith("s_"):
        raise ValueError(f"bad variable name {name!r}")
    out = []
    for part in name[2:].split("_"):
        if "r" in part:
            num, den = part.split("r")
            out.append(Fraction(int(num), int(den)))
        else:
            out.append(int(part))
    return tuple(out)


def _render_number(v):
    v = Fraction(v)
    if v.denominator == 1:
        return str(v.numerator)
    dec = f"{float(v):.12g}"
    if Fraction(dec) == v:
        return dec
    return f"{dec} /* {v} */"


def emit_lp(model):
    """Serialize the model in the lp_solve LP-format dialect.

    Integer coefficients are written verbatim; other rationals get a
    12-significant-digit decimal plus an exact-fraction comment, so the
    file stays solver-compatible without losing exactness.
    """
    lines = [f"/* cryptosplit: {len(model.variables)} variables, "
             f"{len(model.rows)} constraints */",
             f"min: {_var_name(model.root())};"]
    for i, row in enumerate(model.rows):
        terms = []
        for j in sorted(row.coeffs):
            v = row.coeffs[j]
            sign = "-" if v < 0 else "+"
            mag = -v if v < 0 else v
            coeff = "" if mag == 1 else _render_number(mag) + " "
            term = f"{sign} {coeff}{_var_name(model.variables[j])}"
            terms.append(term)
        expr = " ".join(terms)
        if expr.startswith("+ "):
            expr = expr[2:]
        sense = ">=" if row.sense == ">=" else "="
        lines.append(f"c{i + 1}: {expr} {sense} {_render_number(row.rhs)};")
    return "\n".join(lines) + "\n"


_EXACT_COMMENT = re.compile(r"([0-9.eE+\-]+)\s*/\*\s*(-?\d+(?:/\d+)?)\s*\*/")
_COMMENT = re.compile(r"/\*.*?\*/", re.S)
_TERM = re.compile(r"([+-])?\s*([0-9.eE/]+(?![\w.]))?\s*(s_[0-9_r]+)")


def parse_lp(text):
    """Parse the dialect written by :func:`emit_lp` back into a model."""
    text = _EXACT_COMMENT.sub(lambda m: m.group(2), text)
    text = _COMMENT.sub(" ", text)
    objective = None
    rows = []
    variables = set()
    for stmt in text.split(";"):
        stmt = stmt.strip()
        if not stmt:
            continue
        label, _, body = stmt.partition(":")
        label = label.strip()
        body = body.strip()
        if label == "min":
            objective = _parse_var(body)
            variables.add(objective)
            continue
        m = re.search(r"(>=|<=|=)\s*([0-9.eE/+\-]+)\s*$", body)
        if not m:
            raise ValueError(f"cannot parse constraint {stmt!r}")
        sense = ">=" if m.group(1) == ">=" else "=="
        if m.group(1) == "<=":
            raise ValueError("<= rows are not produced by this package")
        rhs = Fraction(m.group(2))
        expr = body[:m.start()]
        coeffs = {}
        for sign, coeff, var in _TERM.findall(expr):
            v = Fraction(coeff) if coeff else Fraction(1)
            if sign == "-":
                v = -v
            pos = _parse_var(var)
            variables.add(pos)
            coeffs[pos] = coeffs.get(pos, ZERO) + v
        rows.append((coeffs, sense, rhs))
    if objective is None:
        raise ValueError("no objective line found")
    var_list = sorted(variables)
    index = {p: i for i, p in enumerate(var_list)}
    lp_rows = [LpRow({index[p]: v for p, v in coeffs.items() if v != 0},
                     sense, rhs) for coeffs, sense, rhs in rows]
    return LpModel(var_list, lp_rows, index[objective])
