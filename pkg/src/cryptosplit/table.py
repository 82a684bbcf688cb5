"""Iterated splitting/scaling search over the discretized position set.

The search maintains a lower bound ``s(D)`` on the game value of every
canonical lattice position, initialized with the zero-bit payoff and
improved by alternating passes:

* a splitting pass visits positions in ascending total mass and raises
  ``s(D)`` to the best ``s(D0) + s(D1)`` over all relaxed splits;
* a scaling pass raises ``s(D)`` to ``s(lam*D)/lam`` for every integer
  multiple inside the lattice.

Update steps are numbered 1, 2, 3, ...; odd steps are splitting passes,
even steps scaling passes.  Every applied improvement is recorded, so a
table carries complete provenance: for any position and step one can ask
when it was last updated and by which move, and replay the arithmetic.

Improvements are only applied when they exceed ``min_gain`` (default
1e-12): geometric cycles improve forever in exact arithmetic, and the
threshold both terminates the float iteration and keeps positions whose
value is an exact closed form from absorbing sub-ulp float noise.
"""

from __future__ import annotations

import gzip
import itertools
import json
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .positions import (canonicalize, format_position, parse_position,
                        relaxed_splits, zero_bit_value)

TABLE_MAGIC = "CGTABLE/1"
DEFAULT_EPSILON = 1e-12
DEFAULT_MEMORY_BUDGET = 4 << 30


class MemoryBudgetError(MemoryError):
    pass


class NonConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class UpdateRecord:
    """One applied improvement (or the implicit zero-bit baseline).

    For ``kind == "split"`` the children are stored raw, in the frame of
    the canonical parent.  For ``kind == "scale"`` the value was pulled
    from ``factor * position`` (or pushed up from ``position / factor``
    when ``upward`` is set).
    """

    step: int
    kind: str
    value: object
    left: tuple | None = None
    right: tuple | None = None
    player: int | None = None
    pattern: int | None = None
    factor: int | None = None
    upward: bool = False


def canonical_positions(t):
    """All canonical positions of the lattice {0..t}^4, ascending by
    (total mass, lexicographic order)."""
    out = []
    for a in range(t + 1):
        for b in range(a + 1):
            for c in range(a + 1):
                for d in range(a + 1):
                    p = (a, b, c, d)
                    if canonicalize(p)[0] == p:
                        out.append((a + b + c + d, a, b, c, d))
    out.sort()
    return [(a, b, c, d) for (_, a, b, c, d) in out]


class ValueTable:
    """Best-known lower bounds with full update provenance."""

    def __init__(self, t, numeric="float", memory_budget=DEFAULT_MEMORY_BUDGET):
        if t < 0:
            raise ValueError("resolution must be non-negative")
        if numeric not in ("float", "rational"):
            raise ValueError(f"unknown numeric mode {numeric!r}")
        S = t + 1
        estimate = 24 * S**4 + 64 * (S**4 // 4 + 16)
        if memory_budget is not None and estimate > memory_budget:
            raise MemoryBudgetError(
                f"resolution {t} needs about {estimate / (1 << 20):.0f} MiB, "
                f"budget is {memory_budget / (1 << 20):.0f} MiB")
        self.t = t
        self.S = S
        self.numeric = numeric
        self.steps = 0
        self.rounds = 0
        self.converged = False
        canon = canonical_positions(t)
        self.canon = np.array(canon, dtype=np.int64).reshape(len(canon), 4)
        self._flat = (((self.canon[:, 0] * S + self.canon[:, 1]) * S
                       + self.canon[:, 2]) * S + self.canon[:, 3])
        self._orbit = np.empty((len(canon), 4), dtype=np.int64)
        for k, (f, sw) in enumerate(((0, 0), (1, 0), (0, 1), (1, 1))):
            img = self.canon.copy()
            if f:
                img = img[:, [1, 0, 3, 2]]
            if sw:
                img = img[:, [2, 3, 0, 1]]
            self._orbit[:, k] = ((img[:, 0] * S + img[:, 1]) * S
                                 + img[:, 2]) * S + img[:, 3]
        self._row_of_flat = np.full(S**4, -1, dtype=np.int64)
        self._row_of_flat[self._flat] = np.arange(len(canon))
        if numeric == "float":
            self._values = np.zeros(S**4, dtype=np.float64)
            from ._kernels import fill_zero_bit
            fill_zero_bit(S, self._values)
        else:
            self._values = [Fraction(0)] * S**4
            for p in itertools.product(range(S), repeat=4):
                self._values[self._flat_index(p)] = Fraction(zero_bit_value(p))
        # list of per-pass records, each ("split"|"scale", step, arrays...)
        self._passes = []

    # -- lookups ---------------------------------------------------------

    def _flat_index(self, pos):
        a, b, c, d = pos
        S = self.S
        return ((a * S + b) * S + c) * S + d

    def value(self, pos):
        pos = tuple(pos)
        if any(v < 0 or v > self.t for v in pos):
            raise KeyError(f"position {pos} outside lattice 0..{self.t}")
        return self._values[self._flat_index(pos)]

    def row(self, pos):
        r = self._row_of_flat[self._flat_index(canonicalize(pos)[0])]
        if r < 0:
            raise KeyError(f"no canonical row for {pos}")
        return int(r)

    def position(self, row):
        return tuple(int(v) for v in self.canon[row])

    def __len__(self):
        return len(self.canon)

    def items(self):
        for row in range(len(self.canon)):
            p = self.position(row)
            yield p, self._values[self._flat[row]]

    def root_position(self):
        return (self.t,) * 4

    def normalized_root(self):
        """The lower bound ``s(T,T,T,T) / 4T`` on the uniform success
        probability (0 for the empty lattice)."""
        if self.t == 0:
            return 0.0 if self.numeric == "float" else Fraction(0)
        return self.value(self.root_position()) / (4 * self.t)

    def zero_bit(self, pos):
        return zero_bit_value(pos)

    # -- provenance ------------------------------------------------------

    def _append_pass(self, kind, step, arrays):
        order = np.argsort(arrays[0], kind="stable")
        self._passes.append((kind, step) + tuple(a[order] for a in arrays))

    def last_update(self, pos, step=None):
        """Index of the last update step <= ``step`` that changed ``pos``
        (0 when the zero-bit baseline still stands)."""
        row = self.row(pos)
        if step is None:
            step = self.steps
        for rec in reversed(self._passes):
            if rec[1] > step:
                continue
            idx = rec[2]
            j = np.searchsorted(idx, row)
            if j < len(idx) and idx[j] == row:
                return rec[1]
        return 0

    def record_at(self, pos, step):
        """The move that set the value of ``pos`` at update step ``step``."""
        row = self.row(pos)
        if step == 0:
            p = self.position(row)
            val = zero_bit_value(p)
            return UpdateRecord(0, "zerobit", val)
        for rec in self._passes:
            if rec[1] != step:
                continue
            idx = rec[2]
            j = np.searchsorted(idx, row)
            if j >= len(idx) or idx[j] != row:
                break
            if rec[0] == "split":
                _, _, _, val, children, pattern = rec
                ch = children[j]
                return UpdateRecord(
                    step, "split", self._native(val[j]),
                    left=tuple(int(v) for v in ch[:4]),
                    right=tuple(int(v) for v in ch[4:]),
                    player=1 if pattern[j] in (0, 1) else 2,
                    pattern=int(pattern[j]))
            _, _, _, val, factor, up = rec
            return UpdateRecord(step, "scale", self._native(val[j]),
                                factor=int(factor[j]), upward=bool(up[j]))
        raise KeyError(f"{pos} was not updated at step {step}")

    def history(self, pos):
        out = [self.record_at(pos, 0)]
        row = self.row(pos)
        for rec in self._passes:
            idx = rec[2]
            j = np.searchsorted(idx, row)
            if j < len(idx) and idx[j] == row:
                out.append(self.record_at(pos, rec[1]))
        return out

    def _native(self, v):
        return float(v) if self.numeric == "float" else v

    def replay(self, pos, step=None):
        """Recompute the value of ``pos`` from its provenance chain.

        In float mode the replay reproduces the stored values
        bit-identically because every update was a single addition or
        division of previously stored values.
        """
        memo = {}

        def value_at(p, i):
            p = canonicalize(p)[0]
            last = self.last_update(p, i)
            key = (p, last)
            if key in memo:
                return memo[key]
            if last == 0:
                v = self._native(zero_bit_value(p)) if self.numeric == "float" \
                    else Fraction(zero_bit_value(p))
            else:
                rec = self.record_at(p, last)
                if rec.kind == "split":
                    v = value_at(rec.left, last) + value_at(rec.right, last)
                elif rec.upward:
                    src = tuple(x // rec.factor for x in p)
                    v = value_at(src, last) * rec.factor
                else:
                    src = tuple(x * rec.factor for x in p)
                    v = value_at(src, last - 1) / rec.factor
            memo[key] = v
            return v

        return value_at(tuple(pos), self.steps if step is None else step)

    # -- persistence -----------------------------------------------------

    def save(self, path):
        doc = {
            "magic": TABLE_MAGIC,
            "t": self.t,
            "numeric": self.numeric,
            "steps": self.steps,
            "rounds": self.rounds,
            "converged": self.converged,
            "values": [self._encode(self._values[f]) for f in self._flat],
            "passes": [self._encode_pass(rec) for rec in self._passes],
        }
        data = json.dumps(doc).encode()
        opener = gzip.open if str(path).endswith(".gz") else open
        with opener(path, "wb") as fh:
            fh.write(data)

    def _encode(self, v):
        return repr(float(v)) if self.numeric == "float" else str(Fraction(v))

    def _encode_pass(self, rec):
        if rec[0] == "split":
            kind, step, idx, val, children, pattern = rec
            return {"kind": kind, "step": step,
                    "rows": idx.tolist() if hasattr(idx, "tolist") else list(idx),
                    "values": [self._encode(v) for v in val],
                    "children": np.asarray(children).tolist(),
                    "pattern": np.asarray(pattern).tolist()}
        kind, step, idx, val, factor, up = rec
        return {"kind": kind, "step": step,
                "rows": idx.tolist() if hasattr(idx, "tolist") else list(idx),
                "values": [self._encode(v) for v in val],
                "factor": np.asarray(factor).tolist(),
                "upward": np.asarray(up).tolist()}

    @classmethod
    def load(cls, path, memory_budget=DEFAULT_MEMORY_BUDGET):
        opener = gzip.open if str(path).endswith(".gz") else open
        with opener(path, "rb") as fh:
            doc = json.loads(fh.read().decode())
        if doc.get("magic") != TABLE_MAGIC:
            raise ValueError(f"{path} is not a {TABLE_MAGIC} table dump")
        table = cls(doc["t"], doc["numeric"], memory_budget)
        decode = (lambda s: float(s)) if doc["numeric"] == "float" else Fraction
        for f, enc in zip(table._flat, doc["values"]):
            v = decode(enc)
            for img in table._orbit[table._row_of_flat[f]]:
                table._values[img] = v
        for rec in doc["passes"]:
            idx = np.array(rec["rows"], dtype=np.int64)
            val = np.array([decode(v) for v in rec["values"]],
                           dtype=np.float64 if doc["numeric"] == "float" else object)
            if rec["kind"] == "split":
                table._passes.append((
                    "split", rec["step"], idx, val,
                    np.array(rec["children"], dtype=np.int16).reshape(len(idx), 8),
                    np.array(rec["pattern"], dtype=np.int8)))
            else:
                table._passes.append((
                    "scale", rec["step"], idx, val,
                    np.array(rec["factor"], dtype=np.int32),
                    np.array(rec["upward"], dtype=np.bool_)))
        table.steps = doc["steps"]
        table.rounds = doc["rounds"]
        table.converged = doc["converged"]
        return table


def init_table(t, numeric="float", memory_budget=DEFAULT_MEMORY_BUDGET):
    """Fresh table over {0..t}^4 holding the zero-bit baseline."""
    return ValueTable(t, numeric, memory_budget)


def _order_array(table, order):
    n = len(table.canon)
    if order == "ascending":
        return np.arange(n, dtype=np.int64)
    if order == "descending":
        return np.arange(n - 1, -1, -1, dtype=np.int64)
    raise ValueError(f"unknown visiting order {order!r}")


def splitting_pass(table, min_gain=DEFAULT_EPSILON, order="ascending"):
    """Try all relaxed splits of every canonical position.

    Positions are visited in ascending total mass and read the live
    table, so improvements propagate within the pass.  Returns the
    number of improved positions.
    """
    table.steps += 1
    step = table.steps
    if table.numeric == "float":
        from . import _kernels
        n = len(table.canon)
        bufs = _kernels.make_record_buffers(n)
        count, _ = _kernels.split_pass(
            table.S, table._values, table.canon, table._orbit,
            _order_array(table, order), min_gain, *bufs)
        if count:
            table._append_pass("split", step, tuple(b[:count].copy() for b in bufs))
        return count
    return _splitting_pass_py(table, step, min_gain, order)


def scaling_pass(table, min_gain=DEFAULT_EPSILON, order="ascending",
                 upward=False):
    """Pull values down from every integer multiple in the lattice.

    Ascending order means the scaled source still holds its value from
    the previous step when a position reads it.  Returns the number of
    improved positions.
    """
    if upward and order != "ascending":
        raise ValueError("upward scaling requires ascending visiting order")
    table.steps += 1
    step = table.steps
    if table.numeric == "float":
        from . import _kernels
        n = len(table.canon)
        bufs = _kernels.make_scale_buffers(n)
        count, _ = _kernels.scale_pass(
            table.S, table._values, table.canon, table._orbit,
            _order_array(table, order), min_gain, upward, *bufs)
        if count:
            table._append_pass("scale", step, tuple(b[:count].copy() for b in bufs))
        return count
    return _scaling_pass_py(table, step, min_gain, order, upward)


def run_search(t, epsilon=DEFAULT_EPSILON, iterations=None, numeric="float",
               order="ascending", upward_scaling=False, max_rounds=1000,
               memory_budget=DEFAULT_MEMORY_BUDGET, progress=None):
    """Alternate splitting and scaling passes over a fresh table.

    Either run to convergence (no improvement larger than ``epsilon`` in
    a full round) or for exactly ``iterations`` rounds.  Fixed-iteration
    values depend on the visiting schedule; only converged values are
    schedule-independent.  Exceeding ``max_rounds`` raises a
    ``NonConvergenceWarning`` and returns the table as-is.
    """
    if iterations is not None and iterations < 0:
        raise ValueError("iteration count must be non-negative")
    table = init_table(t, numeric, memory_budget)
    if numeric == "rational":
        min_gain = Fraction(epsilon) if epsilon else Fraction(0)
    else:
        min_gain = float(epsilon)
    limit = iterations if iterations is not None else max_rounds
    converged = False
    r = 0
    while r < limit:
        r += 1
        n1 = splitting_pass(table, min_gain, order)
        n2 = scaling_pass(table, min_gain, order, upward_scaling)
        table.rounds = r
        if progress is not None:
            progress(r, n1, n2)
        if iterations is None and n1 + n2 == 0:
            converged = True
            break
    if iterations is None and not converged:
        warnings.warn(
            f"search at resolution {t} did not converge within {max_rounds} "
            f"rounds", NonConvergenceWarning)
    table.converged = converged or iterations is not None
    return table


# -- pure-python passes (rational mode) ---------------------------------


def _splitting_pass_py(table, step, min_gain, order):
    S = table.S
    vals = table._values
    rows, recs_val, recs_children, recs_pattern = [], [], [], []
    order_idx = _order_array(table, order)
    for i in order_idx:
        p = table.position(int(i))
        cur = vals[table._flat[i]]
        best = cur
        best_split = None
        for sp in relaxed_splits(p):
            cand = vals[table._flat_index(sp.left)] + vals[table._flat_index(sp.right)]
            if cand > best:
                best = cand
                best_split = sp
        if best_split is not None and best - cur > min_gain:
            rows.append(int(i))
            recs_val.append(best)
            recs_children.append(list(best_split.left) + list(best_split.right))
            pat = {(3, 2): 0, (2, 3): 1, (1, 0): 2, (0, 1): 3}.get(
                (best_split.floored, best_split.anchor),
                0 if best_split.player == 1 else 2)
            recs_pattern.append(pat)
            for img in table._orbit[i]:
                vals[img] = best
    if rows:
        table._append_pass("split", step, (
            np.array(rows, dtype=np.int64),
            np.array(recs_val, dtype=object),
            np.array(recs_children, dtype=np.int16).reshape(len(rows), 8),
            np.array(recs_pattern, dtype=np.int8)))
    return len(rows)


def _scaling_pass_py(table, step, min_gain, order, upward):
    vals = table._values
    t = table.t
    rows, recs_val, recs_factor, recs_up = [], [], [], []
    for i in _order_array(table, order):
        p = table.position(int(i))
        a = p[0]
        if a == 0:
            continue
        cur = vals[table._flat[i]]
        best = cur
        best_f, best_up = 0, False
        lam = 2
        while lam * a <= t:
            cand = vals[table._flat_index(tuple(x * lam for x in p))] / lam
            if cand > best:
                best, best_f, best_up = cand, lam, False
            lam += 1
        if upward:
            for lam in range(2, a + 1):
                if all(x % lam == 0 for x in p):
                    cand = vals[table._flat_index(tuple(x // lam for x in p))] * lam
                    if cand > best:
                        best, best_f, best_up = cand, lam, True
        if best_f and best - cur > min_gain:
            rows.append(int(i))
            recs_val.append(best)
            recs_factor.append(best_f)
            recs_up.append(best_up)
            for img in table._orbit[i]:
                vals[img] = best
    if rows:
        table._append_pass("scale", step, (
            np.array(rows, dtype=np.int64),
            np.array(recs_val, dtype=object),
            np.array(recs_factor, dtype=np.int32),
            np.array(recs_up, dtype=np.bool_)))
    return len(rows)
