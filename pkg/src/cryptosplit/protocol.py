"""Executable protocols: graphs of positions with split and scale moves.

A protocol graph assigns every canonical position it contains exactly
one move: an exact split (who sends, and the two successor positions in
this node's frame), a scaling edge to an integer multiple (a no-op on
the probability space, used to re-enter finer-grained positions and
allowed to close cycles as long as every cycle contracts), or a leaf
where the zero-bit strategy announces a bit and the adversary blames
the most likely owner.

Values of (possibly cyclic) graphs are computed exactly by handing the
induced equality constraints to the LP layer.  Monte-Carlo simulation
draws the secret, walks the graph sampling each sender's bit from its
conditional distribution, and scores the players' success against the
optimal adversary; relaxed splits have no sampling semantics and are
rejected by the simulator.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .extract import (ConstraintSet, ScaleConstraint, SplitConstraint,
                      ZeroBitConstraint, _is_relaxed_pair)
from .lp import build_lp, solve_exact
from .positions import (canonicalize, format_position, is_allowed_split,
                        mass, minsum_bound, parse_position, scaled,
                        transform_actor, zero_bit_value)


class InvalidGraphError(ValueError):
    pass


class RelaxedSplitError(ValueError):
    pass


@dataclass
class Node:
    pos: tuple
    kind: str                       # "split" | "scale" | "leaf"
    left: tuple | None = None       # raw children, in this node's frame
    right: tuple | None = None
    player: int | None = None
    relaxed: bool = False
    factor: int | None = None
    upward: bool = False

    def scale_target(self):
        if self.upward:
            return tuple(Fraction(v, self.factor) for v in self.pos)
        return scaled(self.pos, self.factor)


def _exact_entries(pos):
    return tuple(int(v) if Fraction(v).denominator == 1 else Fraction(v)
                 for v in pos)


class ProtocolGraph:
    def __init__(self, root, nodes):
        self.root = _exact_entries(root)
        self.nodes = {tuple(n.pos): n for n in nodes}
        if self.root not in self.nodes:
            raise InvalidGraphError("root position has no node")

    def __len__(self):
        return len(self.nodes)

    def node(self, pos):
        return self.nodes[tuple(pos)]

    def has_relaxed(self):
        return any(n.relaxed for n in self.nodes.values())

    def leaf_output(self, pos):
        """Zero-bit output bit at a position (ties announce 0)."""
        v0 = min(pos[0], pos[2])
        v1 = min(pos[1], pos[3])
        return 0 if v0 >= v1 else 1

    def blame_set(self, pos, out):
        """Players attaining the maximal posterior for the output bit."""
        shares = (pos[out], pos[2 + out])
        top = max(shares)
        return tuple(j for j, v in enumerate(shares, start=1) if v == top)

    # -- structure checks -------------------------------------------------

    def validate(self):
        """Check split validity, reachability of children and cycle
        contraction.  Cycle products are screened with float logs; the
        exact solve in :meth:`value` backstops the boundary cases."""
        for key, n in self.nodes.items():
            if n.kind == "split":
                if any(l + r > p for l, r, p in zip(n.left, n.right, n.pos)):
                    raise InvalidGraphError(f"children exceed parent at {key}")
                if n.relaxed:
                    if not _is_relaxed_pair(n.pos, n.left, n.right, n.player):
                        raise InvalidGraphError(
                            f"flagged relaxed split at {key} is not one")
                elif not is_allowed_split(n.pos, n.left, n.right, n.player):
                    raise InvalidGraphError(f"split at {key} is not allowed")
                for child in (n.left, n.right):
                    ckey = canonicalize(child)[0]
                    if ckey not in self.nodes:
                        raise InvalidGraphError(
                            f"missing node for child {ckey} of {key}")
            elif n.kind == "scale":
                tkey = _exact_entries(n.scale_target())
                if tkey not in self.nodes:
                    raise InvalidGraphError(
                        f"missing node for scale target {tkey} of {key}")
        self._check_contraction()
        return True

    def _edges(self):
        for key, n in self.nodes.items():
            if n.kind == "split":
                yield key, canonicalize(n.left)[0], 0.0
                yield key, canonicalize(n.right)[0], 0.0
            elif n.kind == "scale":
                w = math.log(n.factor) if n.upward else -math.log(n.factor)
                yield key, _exact_entries(n.scale_target()), w

    def _check_contraction(self):
        # Bellman-Ford relaxation for a non-negative-weight cycle in the
        # value-coefficient logs (split edges weigh 0, scalings +-log f).
        keys = list(self.nodes)
        dist = {k: 0.0 for k in keys}
        edges = list(self._edges())
        for it in range(len(keys) + 1):
            changed = False
            for u, v, w in edges:
                cand = dist[u] + w
                if cand > dist[v] + 1e-12:
                    dist[v] = cand
                    changed = True
            if not changed:
                return
        raise InvalidGraphError("graph has a non-contracting cycle")

    # -- exact value -------------------------------------------------------

    def to_constraint_set(self):
        cons = []
        for key, n in self.nodes.items():
            if n.kind == "split":
                cons.append(SplitConstraint(key, canonicalize(n.left)[0],
                                            canonicalize(n.right)[0],
                                            n.player))
            elif n.kind == "scale":
                tkey = _exact_entries(n.scale_target())
                if n.upward:
                    cons.append(ScaleConstraint(tkey, n.factor, key))
                else:
                    cons.append(ScaleConstraint(key, n.factor, tkey))
            else:
                cons.append(ZeroBitConstraint(key, zero_bit_value(key)))
        return ConstraintSet(cons, self.root, {"source": "protocol-graph"})

    def value(self):
        """Exact value of the root: the unique solution of the node
        equations, obtained from the LP layer with equality rows."""
        self.validate()
        model = build_lp(self.to_constraint_set(), all_equalities=True)
        sol = solve_exact(model)
        if sol.status != "optimal":
            raise InvalidGraphError(f"value system is {sol.status}")
        for key in self.nodes:
            v = sol.assignment[key]
            if v < 0 or v > minsum_bound(key):
                raise InvalidGraphError(
                    f"value {v} at {key} escapes [0, min-sum bound]")
        return sol.assignment[self.root]

    def normalized_value(self):
        return Fraction(self.value()) / Fraction(mass(self.root))

    # -- sampling semantics -------------------------------------------------

    def emission_probability(self, node, x, j):
        """Exact probability that the sender announces bit 0 given the
        secret cell (x in {0,1}, j in {1,2}), in the node's frame."""
        n = self.nodes[tuple(node)]
        idx = (j - 1) * 2 + x
        if j == n.player:
            if n.pos[idx] == 0:
                return Fraction(0)
            return Fraction(n.left[idx]) / Fraction(n.pos[idx])
        other = (2, 3) if n.player == 1 else (0, 1)
        for i in other:
            if n.pos[i] != 0:
                return Fraction(n.left[i]) / Fraction(n.pos[i])
        return Fraction(0)

    def check_branch_probabilities(self):
        """Assert, per split node, that the mixture of sender behaviours
        over the secret cells reproduces mass(left)/mass(parent)."""
        bad = []
        for key, n in self.nodes.items():
            if n.kind != "split":
                continue
            total = Fraction(mass(n.pos))
            mix = sum(Fraction(n.pos[(j - 1) * 2 + x]) / total
                      * self.emission_probability(key, x, j)
                      for x in (0, 1) for j in (1, 2))
            if mix != Fraction(mass(n.left)) / total:
                bad.append(key)
        return bad

    def check_posteriors(self, max_depth=8):
        """Walk every transcript up to ``max_depth`` propagating the
        outside observer's posterior exactly; it must equal the reached
        node's normalized position in that node's frame.  Returns the
        number of (path, node) checks performed."""
        if self.has_relaxed():
            raise RelaxedSplitError("posterior check needs exact splits")
        checked = 0

        def posterior_of(pos):
            m = Fraction(mass(pos))
            return tuple(Fraction(v) / m for v in pos)

        stack = [(self.root, posterior_of(self.root), 0)]
        while stack:
            key, post, depth = stack.pop()
            n = self.nodes[key]
            if posterior_of(n.pos) != post:
                raise InvalidGraphError(f"posterior mismatch at {key}")
            checked += 1
            if depth >= max_depth or n.kind == "leaf":
                continue
            if n.kind == "scale":
                stack.append((_exact_entries(n.scale_target()), post, depth))
                continue
            for child, bit in ((n.left, 0), (n.right, 1)):
                p_bit = Fraction(mass(child)) / Fraction(mass(n.pos))
                if p_bit == 0:
                    continue
                cells = []
                for j in (1, 2):
                    for x in (0, 1):
                        e = self.emission_probability(key, x, j)
                        if bit == 1:
                            e = 1 - e
                        cells.append(post[(j - 1) * 2 + x] * e / p_bit)
                ckey, (f, s) = canonicalize(child)
                cpost = tuple(cells)
                if f:
                    cpost = (cpost[1], cpost[0], cpost[3], cpost[2])
                if s:
                    cpost = (cpost[2], cpost[3], cpost[0], cpost[1])
                stack.append((ckey, cpost, depth + 1))
        return checked

    # -- JSON ---------------------------------------------------------------

    def to_json(self):
        nodes = []
        for key in sorted(self.nodes, key=repr):
            n = self.nodes[key]
            rec = {"position": format_position(key), "kind": n.kind}
            if n.kind == "split":
                rec.update(left=format_position(n.left),
                           right=format_position(n.right),
                           player=n.player, relaxed=n.relaxed)
            elif n.kind == "scale":
                rec.update(factor=n.factor, upward=n.upward)
            else:
                rec.update(output=self.leaf_output(key))
            nodes.append(rec)
        return {"root": format_position(self.root), "nodes": nodes}

    @classmethod
    def from_json(cls, doc):
        nodes = []
        for rec in doc["nodes"]:
            pos = parse_position(rec["position"])
            if rec["kind"] == "split":
                nodes.append(Node(pos, "split",
                                  left=parse_position(rec["left"]),
                                  right=parse_position(rec["right"]),
                                  player=int(rec["player"]),
                                  relaxed=bool(rec.get("relaxed", False))))
            elif rec["kind"] == "scale":
                nodes.append(Node(pos, "scale", factor=int(rec["factor"]),
                                  upward=bool(rec.get("upward", False))))
            else:
                nodes.append(Node(pos, "leaf"))
        return cls(parse_position(doc["root"]), nodes)

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def _install(nodes, raw, move):
    """Translate a move given in an arbitrary frame to the canonical
    frame of its position and install it, checking consistency when the
    canonical node already exists."""
    key, (f, s) = canonicalize(raw)
    kind = move[0]
    if kind == "split":
        _, left, right, player = move
        left = _exact_entries(apply(left, f, s))
        right = _exact_entries(apply(right, f, s))
        if s:
            player = 3 - player
        if left < right:
            left, right = right, left
        new = Node(key, "split", left=left, right=right, player=player)
        if not is_allowed_split(key, left, right, player):
            raise InvalidGraphError(f"{left} + {right} is not a "
                                    f"{player}-split of {key}")
    elif kind == "scale":
        new = Node(key, "scale", factor=move[1])
    else:
        new = Node(key, "leaf")
    old = nodes.get(key)
    if old is not None:
        if (old.kind, old.left, old.right, old.player, old.factor) != \
                (new.kind, new.left, new.right, new.player, new.factor):
            raise InvalidGraphError(f"conflicting moves for node {key}")
        return key
    nodes[key] = new
    return key


def apply(pos, f, s):
    from .positions import apply_symmetry
    return apply_symmetry(pos, f, s)


def _build_from_moves(root, moves):
    nodes = {}
    stack = [tuple(root)]
    visited = set()
    while stack:
        raw = stack.pop()
        key = canonicalize(raw)[0]
        if key in visited:
            continue
        visited.add(key)
        move = moves[tuple(raw)] if tuple(raw) in moves else None
        if move is None:
            # moves are keyed by the frames the protocol was written in;
            # look the orbit up
            for img in (raw, apply(raw, 1, 0), apply(raw, 0, 1), apply(raw, 1, 1)):
                if tuple(img) in moves:
                    raw = tuple(img)
                    move = moves[raw]
                    break
            else:
                raise KeyError(f"no move defined for {raw}")
        _install(nodes, raw, move)
        n = nodes[key]
        if n.kind == "split":
            stack.append(n.left)
            stack.append(n.right)
        elif n.kind == "scale":
            stack.append(_exact_entries(n.scale_target()))
    return ProtocolGraph(canonicalize(root)[0], list(nodes.values()))


_F = Fraction

_TWOBIT_MOVES = {
    (3, 3, 3, 3): ("split", (2, 2, 1, 1), (1, 1, 2, 2), 1),
    (2, 2, 1, 1): ("split", (1, 1, 1, 0), (1, 1, 0, 1), 2),
    (1, 1, 2, 2): ("split", (1, 0, 1, 1), (0, 1, 1, 1), 1),
    (1, 1, 1, 0): ("leaf",),
}

_THM29_MOVES = {
    (12, 12, 12, 12): ("split", (7, 7, 6, 4), (5, 5, 6, 8), 2),
    (5, 5, 6, 8): ("split", (2, 2, 0, 2), (3, 3, 6, 6), 2),
    (2, 2, 0, 2): ("leaf",),
    (3, 3, 6, 6): ("split", (3, 0, 3, 3), (0, 3, 3, 3), 1),
    (3, 0, 3, 3): ("leaf",),
    (7, 7, 6, 4): ("split", (4, 5, 3, 2), (3, 2, 3, 2), 1),
    (4, 5, 3, 2): ("scale", 2),
    (8, 10, 6, 4): ("split", (4, 5, 2, 4), (4, 5, 4, 0), 2),
    (4, 5, 4, 0): ("leaf",),
    (4, 5, 2, 4): ("split", (1, 2, 1, 2), (3, 3, 1, 2), 1),
    (3, 3, 1, 2): ("split", (1, 1, 1, 0), (2, 2, 0, 2), 2),
    (1, 1, 1, 0): ("leaf",),
    (1, 2, 1, 2): ("scale", 6),
    (6, 12, 6, 12): ("split", (5, 10, 3, 9), (1, 2, 3, 3), 2),
    (1, 2, 3, 3): ("split", (1, 0, 1, 1), (0, 2, 2, 2), 1),
    (1, 0, 1, 1): ("leaf",),
    (0, 2, 2, 2): ("leaf",),
    (5, 10, 3, 9): ("split", (0, 6, 2, 6), (5, 4, 1, 3), 1),
    (0, 6, 2, 6): ("leaf",),
    (5, 4, 1, 3): ("split", (1, _F(4, 5), 1, 0), (4, _F(16, 5), 0, 3), 2),
    (1, _F(4, 5), 1, 0): ("leaf",),
    (4, _F(16, 5), 0, 3): ("leaf",),
    (3, 2, 3, 2): ("scale", 3),
    (9, 6, 9, 6): ("split", (6, 3, 6, 4), (3, 3, 3, 2), 1),
    (6, 3, 6, 4): ("split", (3, 0, 3, 2), (3, 3, 3, 2), 1),
    (3, 0, 3, 2): ("leaf",),
    (3, 3, 3, 2): ("scale", 3),
    (9, 9, 9, 6): ("split", (7, 7, 6, 4), (2, 2, 3, 2), 2),
    (2, 2, 3, 2): ("split", (1, 1, 1, 0), (1, 1, 2, 2), 2),
    (1, 1, 2, 2): ("split", (1, 0, 1, 1), (0, 1, 1, 1), 1),
}


def builtin(name):
    """The two protocols shipped with the package.

    ``twobit`` is the classical two-round protocol of value 4 on the
    twelve-fold uniform position; ``thm29`` is the sixteen-round cyclic
    protocol of value 449/28 on (12, 12, 12, 12)."""
    if name == "twobit":
        return _build_from_moves((3, 3, 3, 3), _TWOBIT_MOVES)
    if name == "thm29":
        return _build_from_moves((12, 12, 12, 12), _THM29_MOVES)
    raise KeyError(f"unknown builtin protocol {name!r}")


def graph_from_provenance(table, position=None, step=None):
    """Protocol graph of the best strategy recorded in a table.

    Nodes are canonical positions; each uses its last update at (or
    before) ``step``.  Scale records become scale edges, possibly
    closing cycles; positions never updated become leaves.  Nodes whose
    supporting split lost lattice mass are flagged relaxed.
    """
    if position is None:
        position = table.root_position()
    root = canonicalize(position)[0]
    if step is None:
        step = table.steps
    nodes = {}
    stack = [root]
    while stack:
        key = stack.pop()
        if key in nodes:
            continue
        last = table.last_update(key, step)
        if last == 0:
            nodes[key] = Node(key, "leaf")
            continue
        rec = table.record_at(key, last)
        if rec.kind == "split":
            left, right = rec.left, rec.right
            if left < right:
                left, right = right, left
            relaxed = any(l + r < p for l, r, p in zip(left, right, key))
            nodes[key] = Node(key, "split", left=left, right=right,
                              player=rec.player, relaxed=relaxed)
            stack.append(canonicalize(left)[0])
            stack.append(canonicalize(right)[0])
        else:
            nodes[key] = Node(key, "scale", factor=rec.factor,
                              upward=rec.upward)
            stack.append(_exact_entries(nodes[key].scale_target()))
    return ProtocolGraph(root, list(nodes.values()))


@dataclass
class SimulationReport:
    samples: int
    successes: int
    seed: int
    depth_limit: int
    truncated: int
    leaf_hits: dict = field(default_factory=dict)

    @property
    def success_rate(self):
        return self.successes / self.samples

    @property
    def stderr(self):
        p = self.success_rate
        return math.sqrt(max(p * (1 - p), 0.0) / self.samples)

    @property
    def truncated_mass(self):
        return self.truncated / self.samples

    def to_json(self):
        return {
            "samples": self.samples,
            "successes": self.successes,
            "success_rate": self.success_rate,
            "stderr": self.stderr,
            "seed": self.seed,
            "depth_limit": self.depth_limit,
            "truncated": self.truncated,
            "truncated_mass": self.truncated_mass,
            "leaf_hits": {format_position(k): v
                          for k, v in sorted(self.leaf_hits.items(), key=repr)},
        }


def simulate(graph, samples, depth_limit=200, seed=0):
    """Monte-Carlo estimate of a protocol's success probability.

    Draws the (secret, owner) pair from the root distribution with a
    seeded PCG64 generator, then walks the graph: at a split the sender
    emits a bit from its conditional distribution, at a scale edge play
    re-enters the scaled node unchanged.  A walk that exceeds
    ``depth_limit`` split edges is resolved with the zero-bit strategy
    at its current node and counted as truncated.  Success means the
    announced bit equals the secret and the sampled adversary blame
    (uniform over the posterior argmax) misses the owner.
    """
    graph.validate()
    if graph.has_relaxed():
        raise RelaxedSplitError(
            "graph contains relaxed splits; only exact splits have "
            "sampling semantics")
    keys = sorted(graph.nodes, key=repr)
    index = {k: i for i, k in enumerate(keys)}
    kind = np.zeros(len(keys), dtype=np.int8)          # 0 leaf, 1 split, 2 scale
    p0 = np.zeros((len(keys), 2, 2))                   # [node, x, j-1]
    child = np.zeros((len(keys), 2), dtype=np.int64)
    child_flip = np.zeros((len(keys), 2), dtype=bool)
    child_swap = np.zeros((len(keys), 2), dtype=bool)
    out_bit = np.zeros(len(keys), dtype=np.int8)
    blame_mask = np.zeros((len(keys), 2), dtype=bool)  # player j blamed?
    for k, n in graph.nodes.items():
        i = index[k]
        # zero-bit resolution data for every node: leaves use it always,
        # other nodes only when a walk is truncated there
        ob = graph.leaf_output(k)
        out_bit[i] = ob
        for j in graph.blame_set(k, ob):
            blame_mask[i, j - 1] = True
        if n.kind == "split":
            kind[i] = 1
            for x in (0, 1):
                for j in (1, 2):
                    p0[i, x, j - 1] = float(graph.emission_probability(k, x, j))
            for slot, raw in enumerate((n.left, n.right)):
                ckey, (f, s) = canonicalize(raw)
                child[i, slot] = index[ckey]
                child_flip[i, slot] = f
                child_swap[i, slot] = s
        elif n.kind == "scale":
            kind[i] = 2
            child[i, 0] = index[_exact_entries(n.scale_target())]

    rng = np.random.Generator(np.random.PCG64(seed))
    rootp = np.array([float(v) for v in graph.root], dtype=np.float64)
    rootp /= rootp.sum()
    cells = rng.choice(4, size=samples, p=rootp)
    X = (cells % 2).astype(np.int8)
    J = (cells // 2).astype(np.int8)       # 0 = player 1, 1 = player 2
    node = np.full(samples, index[graph.root], dtype=np.int64)
    depth = np.zeros(samples, dtype=np.int64)
    alive = np.ones(samples, dtype=bool)
    success = np.zeros(samples, dtype=bool)
    truncated = np.zeros(samples, dtype=bool)
    leaf_hits = {}

    def resolve(mask, trunc):
        nodes_here = node[mask]
        xs = X[mask]
        js = J[mask]
        outs = out_bit[nodes_here]
        both = blame_mask[nodes_here, 0] & blame_mask[nodes_here, 1]
        hit_owner = blame_mask[nodes_here, js.astype(np.int64)]
        miss = ~hit_owner | (both & (rng.random(mask.sum()) < 0.5))
        success[mask] = (outs == xs) & miss
        alive[mask] = False
        truncated[mask] = trunc
        if not trunc:
            for i in np.unique(nodes_here):
                leaf_hits[keys[i]] = leaf_hits.get(keys[i], 0) + \
                    int((nodes_here == i).sum())

    guard = 0
    while alive.any():
        guard += 1
        if guard > 4 * depth_limit + 64:
            resolve(alive.copy(), True)
            break
        cur = node.copy()
        at_leaf = alive & (kind[cur] == 0)
        if at_leaf.any():
            resolve(at_leaf, False)
        at_limit = alive & (depth >= depth_limit)
        if at_limit.any():
            resolve(at_limit, True)
        at_scale = alive & (kind[cur] == 2)
        if at_scale.any():
            node[at_scale] = child[cur[at_scale], 0]
        at_split = alive & (kind[cur] == 1)
        if at_split.any():
            idx = np.flatnonzero(at_split)
            n_here = cur[idx]
            prob0 = p0[n_here, X[idx].astype(np.int64),
                       J[idx].astype(np.int64)]
            takes_left = rng.random(idx.size) < prob0
            slot = (~takes_left).astype(np.int64)
            f = child_flip[n_here, slot]
            s = child_swap[n_here, slot]
            X[idx] = np.where(f, 1 - X[idx], X[idx])
            J[idx] = np.where(s, 1 - J[idx], J[idx])
            node[idx] = child[n_here, slot]
            depth[idx] += 1
    return SimulationReport(samples=samples, successes=int(success.sum()),
                            seed=seed, depth_limit=depth_limit,
                            truncated=int(truncated.sum()),
                            leaf_hits=leaf_hits)
