"""Extraction of the sparse inequality set supporting a table value.

Every applied search update corresponds to a relation between game
values: a split gives ``value(D) >= value(D0) + value(D1)``, a scaling
gives ``factor * value(D) == value(factor * D)``, and the baseline gives
``value(D) >= zero_bit_value(D)``.  Walking the provenance of a table
value backwards collects the (deduplicated, closed) set of relations
that proves the bound; this set is the interchange object between the
search, the LP solver and third-party verification.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction

from .positions import (canonicalize, format_position, is_allowed_split,
                        mass, orbit, parse_position, scaled, zero_bit_value)


@dataclass(frozen=True)
class SplitConstraint:
    """value(parent) >= value(left) + value(right); positions canonical."""

    parent: tuple
    left: tuple
    right: tuple
    player: int

    def key(self):
        return ("split", self.parent, self.left, self.right, self.player)


@dataclass(frozen=True)
class ScaleConstraint:
    """factor * value(base) == value(scaled) with scaled == factor*base."""

    base: tuple
    factor: int
    scaled: tuple

    def key(self):
        return ("scale", self.base, self.factor, self.scaled)


@dataclass(frozen=True)
class ZeroBitConstraint:
    """value(position) >= constant, the zero-bit payoff."""

    position: tuple
    constant: object

    def key(self):
        return ("zerobit", self.position, Fraction(self.constant))


class InvalidConstraintError(ValueError):
    pass


def validate_constraint(con):
    """Re-derive the mathematical content of one constraint.

    Raises ``InvalidConstraintError`` with the reason when the relation
    is not a feasible scaling, split (exact or relaxed, up to symmetry
    images of the stored canonical children) or zero-bit bound.
    """
    if isinstance(con, ZeroBitConstraint):
        if Fraction(con.constant) != zero_bit_value(con.position):
            raise InvalidConstraintError(
                f"zero-bit constant {con.constant} != "
                f"{zero_bit_value(con.position)} at {con.position}")
        return
    if isinstance(con, ScaleConstraint):
        if con.factor < 2 or int(con.factor) != con.factor:
            raise InvalidConstraintError(f"scale factor {con.factor} not an "
                                         "integer >= 2")
        if tuple(con.scaled) != scaled(con.base, con.factor):
            raise InvalidConstraintError(
                f"{con.scaled} is not {con.factor} * {con.base}")
        return
    if isinstance(con, SplitConstraint):
        if con.player not in (1, 2):
            raise InvalidConstraintError(f"bad player {con.player}")
        parent = con.parent
        for left in orbit(con.left):
            for right in orbit(con.right):
                if is_allowed_split(parent, left, right, con.player):
                    return
                if _is_relaxed_pair(parent, left, right, con.player):
                    return
        raise InvalidConstraintError(
            f"no symmetry image of {con.left} + {con.right} is a "
            f"{con.player}-split of {parent}")
    raise InvalidConstraintError(f"unknown constraint {con!r}")


def _is_relaxed_pair(parent, left, right, player):
    """Relaxed-split test in a fixed frame: the sender's coordinates and
    one anchor coordinate of the other player partition exactly, the
    anchor's partner is floored to the proportional share."""
    if any(v != int(v) for p in (parent, left, right) for v in p):
        return False
    free = (0, 1) if player == 1 else (2, 3)
    anchored = (2, 3) if player == 1 else (0, 1)
    if any(left[i] + right[i] != parent[i] for i in free):
        return False
    for anc, flo in (anchored, anchored[::-1]):
        if parent[anc] == 0:
            continue
        if left[anc] + right[anc] != parent[anc]:
            continue
        ok = all(child[flo] == parent[flo] * child[anc] // parent[anc]
                 for child in (left, right))
        if ok:
            return True
    if parent[anchored[0]] == 0 and parent[anchored[1]] == 0:
        return all(child[i] == 0 for child in (left, right) for i in anchored)
    return False


class ConstraintSet:
    """Ordered, deduplicated constraints plus the root they support."""

    def __init__(self, constraints, root, metadata=None):
        self.constraints = []
        self._keys = set()
        for con in constraints:
            self.add(con)
        self.root = tuple(root)
        self.metadata = dict(metadata or {})

    def add(self, con):
        k = con.key()
        if k not in self._keys:
            self._keys.add(k)
            self.constraints.append(con)

    def __len__(self):
        return len(self.constraints)

    def __eq__(self, other):
        return (isinstance(other, ConstraintSet)
                and self.root == other.root
                and [c.key() for c in self.constraints]
                == [c.key() for c in other.constraints])

    def __iter__(self):
        return iter(self.constraints)

    def kinds(self):
        out = {"split": 0, "scale": 0, "zerobit": 0}
        for c in self.constraints:
            out[c.key()[0]] += 1
        return out

    def positions(self):
        seen = []
        seen_set = set()
        for c in self.constraints:
            if isinstance(c, SplitConstraint):
                ps = (c.parent, c.left, c.right)
            elif isinstance(c, ScaleConstraint):
                ps = (c.base, c.scaled)
            else:
                ps = (c.position,)
            for p in ps:
                if p not in seen_set:
                    seen_set.add(p)
                    seen.append(p)
        return seen

    def validate(self):
        for i, con in enumerate(self.constraints):
            try:
                validate_constraint(con)
            except InvalidConstraintError as exc:
                raise InvalidConstraintError(f"constraint {i}: {exc}") from exc

    def grounded_positions(self):
        """Positions carrying at least one lower-bounding constraint: a
        zero-bit bound, a split they are the parent of, or a scale
        relation on either side.  Split children with no constraint of
        their own are the dangling references this detects; cycles of
        mutually supporting splits count as grounded (their soundness
        rests on the contraction of every cycle, which the graph layer
        and the exact solve enforce)."""
        grounded = set()
        for c in self.constraints:
            if isinstance(c, ZeroBitConstraint):
                grounded.add(c.position)
            elif isinstance(c, SplitConstraint):
                grounded.add(c.parent)
            else:
                grounded.add(c.base)
                grounded.add(c.scaled)
        return grounded

    def is_closed(self):
        grounded = self.grounded_positions()
        return all(p in grounded for p in self.positions())

    # -- JSON interchange -------------------------------------------------

    def to_json(self):
        records = []
        for c in self.constraints:
            if isinstance(c, SplitConstraint):
                records.append({"kind": "split",
                                "parent": format_position(c.parent),
                                "left": format_position(c.left),
                                "right": format_position(c.right),
                                "player": c.player})
            elif isinstance(c, ScaleConstraint):
                records.append({"kind": "scale",
                                "base": format_position(c.base),
                                "factor": c.factor,
                                "scaled": format_position(c.scaled)})
            else:
                records.append({"kind": "zerobit",
                                "position": format_position(c.position),
                                "constant": str(Fraction(c.constant))})
        return {"constraints": records,
                "root": format_position(self.root),
                "metadata": self.metadata}

    @classmethod
    def from_json(cls, doc):
        cons = []
        for rec in doc["constraints"]:
            kind = rec["kind"]
            if kind == "split":
                cons.append(SplitConstraint(parse_position(rec["parent"]),
                                            parse_position(rec["left"]),
                                            parse_position(rec["right"]),
                                            int(rec["player"])))
            elif kind == "scale":
                cons.append(ScaleConstraint(parse_position(rec["base"]),
                                            int(rec["factor"]),
                                            parse_position(rec["scaled"])))
            elif kind == "zerobit":
                cons.append(ZeroBitConstraint(parse_position(rec["position"]),
                                              Fraction(rec["constant"])))
            else:
                raise ValueError(f"unknown constraint kind {kind!r}")
        return cls(cons, parse_position(doc["root"]),
                   doc.get("metadata", {}))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def extract(table, position=None, step=None):
    """Collect the constraints supporting a table value.

    Walks the provenance backwards from ``position`` (default: the
    lattice corner) at update step ``step`` (default: the last one),
    memoizing on (canonical position, its last update before the step
    under consideration).  Split children recurse at the step of the
    parent's update; scaled sources recurse one step earlier, matching
    what the ascending-order scaling pass actually read.
    """
    if position is None:
        position = table.root_position()
    root = canonicalize(position)[0]
    if step is None:
        step = table.steps
    out = ConstraintSet([], root, {
        "t": table.t, "steps": step, "numeric": table.numeric,
        "source": "search-provenance"})
    seen = set()
    stack = [(root, step)]
    while stack:
        pos, i = stack.pop()
        last = table.last_update(pos, i)
        key = (pos, last)
        if key in seen:
            continue
        seen.add(key)
        if last == 0:
            out.add(ZeroBitConstraint(pos, zero_bit_value(pos)))
            continue
        rec = table.record_at(pos, last)
        if rec.kind == "split":
            left = canonicalize(rec.left)[0]
            right = canonicalize(rec.right)[0]
            out.add(SplitConstraint(pos, left, right, rec.player))
            stack.append((left, last))
            stack.append((right, last))
        elif rec.upward:
            base = tuple(v // rec.factor for v in pos)
            out.add(ScaleConstraint(base, rec.factor, pos))
            stack.append((base, last))
        else:
            big = scaled(pos, rec.factor)
            out.add(ScaleConstraint(pos, rec.factor, big))
            stack.append((big, last - 1))
    return out


def sparsify(cs, solution):
    """Drop constraints that are slack in an LP solution.

    ``solution`` maps canonical positions to exact values and must be
    feasible for ``cs``.  Scale equalities are always kept; split and
    zero-bit constraints are kept only when tight.  Any referenced
    position left without a grounding chain gets its zero-bit bound
    back, so the result is closed again and the re-solved LP attains
    the same objective.
    """
    def val(p):
        if p not in solution:
            raise InvalidConstraintError(f"solution misses {p}")
        return Fraction(solution[p])

    kept = []
    for con in cs.constraints:
        if isinstance(con, SplitConstraint):
            slack = val(con.parent) - val(con.left) - val(con.right)
            if slack < 0:
                raise InvalidConstraintError(
                    f"solution violates split at {con.parent}")
            if slack == 0:
                kept.append(con)
        elif isinstance(con, ScaleConstraint):
            if con.factor * val(con.base) != val(con.scaled):
                raise InvalidConstraintError(
                    f"solution violates scaling at {con.base}")
            kept.append(con)
        else:
            slack = val(con.position) - Fraction(con.constant)
            if slack < 0:
                raise InvalidConstraintError(
                    f"solution violates zero-bit bound at {con.position}")
            if slack == 0:
                kept.append(con)
    out = ConstraintSet(kept, cs.root, dict(cs.metadata, sparsified=True))
    grounded = out.grounded_positions()
    for p in out.positions():
        if p not in grounded:
            out.add(ZeroBitConstraint(p, zero_bit_value(p)))
            grounded = out.grounded_positions()
    if cs.root not in out.positions():
        out.add(ZeroBitConstraint(cs.root, zero_bit_value(cs.root)))
    return out
