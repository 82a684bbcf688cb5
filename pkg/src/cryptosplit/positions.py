"""Game positions of the vector-splitting game and their basic values.

A position is a vector of non-negative numbers indexed by (secret bit,
player).  For two players we store it as a plain tuple ``(a, b, c, d)``
where ``a, b`` belong to player 1 (secret 0 / secret 1) and ``c, d`` to
player 2.  Two numeric flavours are used throughout the package:

* lattice positions -- non-negative integers, the search space of the
  dynamic program;
* rational positions -- ``fractions.Fraction`` entries, used by the
  certification and simulation layers.

The value function of the game is invariant under flipping the secret
bit for all players simultaneously and under swapping the two players.
``canonicalize`` picks one representative per orbit of this 4-element
group (the lexicographically greatest image, which always satisfies
``a >= b, c, d``).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction


def zero_bit_value(pos):
    """Payoff of stopping immediately and announcing the better bit.

    For each candidate output bit the players keep the probability mass
    of that bit minus the largest single-player share (the adversary
    blames the most likely owner).  Works for any number of players;
    for two players this is ``max(min(a, c), min(b, d))``.
    """
    k2 = len(pos)
    if k2 < 2 or k2 % 2:
        raise ValueError("position length must be 2*k")
    best = 0
    for x in (0, 1):
        row = pos[x::2]
        val = sum(row) - max(row)
        if val > best:
            best = val
    return best


def minsum_bound(pos):
    """Superadditive upper bound ``min(a, c) + min(b, d)`` (two players)."""
    a, b, c, d = _as4(pos)
    return min(a, c) + min(b, d)


def closed_form_value(pos):
    """Exact game value when a closed form applies, else ``None``.

    Two families are recognised (in any symmetric orientation): positions
    with a zero entry, whose value is the minimum over players of the
    opposite-secret entries, and positions where one player's total mass
    is at most each entry of the other player, whose value is that total.
    """
    a, b, c, d = _as4(pos)
    if d == 0 or b == 0:
        return min(a, c)
    if c == 0 or a == 0:
        return min(b, d)
    if a + b <= min(c, d):
        return a + b
    if c + d <= min(a, b):
        return c + d
    return None


def apply_symmetry(pos, flip, swap):
    """Apply the secret-flip and/or player-swap symmetry to a position."""
    a, b, c, d = _as4(pos)
    if flip:
        a, b, c, d = b, a, d, c
    if swap:
        a, b, c, d = c, d, a, b
    return (a, b, c, d)


def transform_actor(x, j, flip, swap):
    """Carry a (secret bit, player) pair along with ``apply_symmetry``."""
    if flip:
        x = 1 - x
    if swap:
        j = 3 - j
    return x, j


def canonicalize(pos):
    """Canonical representative of the symmetry orbit of ``pos``.

    Returns ``(canonical, (flip, swap))`` where applying the returned
    group element to ``pos`` yields ``canonical``, the lexicographically
    greatest of the four orbit images.  The representative satisfies
    ``a >= b, c, d``.
    """
    pos = _as4(pos)
    best = pos
    best_g = (False, False)
    for flip in (False, True):
        for swap in (False, True):
            img = apply_symmetry(pos, flip, swap)
            if img > best:
                best = img
                best_g = (flip, swap)
    return best, best_g


def is_canonical(pos):
    pos = _as4(pos)
    return canonicalize(pos)[0] == pos


def orbit(pos):
    """The set of symmetry images of ``pos``."""
    return {apply_symmetry(pos, f, s) for f in (False, True) for s in (False, True)}


def is_allowed_split(parent, left, right, player):
    """Exact split test: ``left + right == parent`` and proportionality.

    The sender ``player`` (1 or 2) splits its own coordinates freely;
    the other player's coordinates of ``left`` must equal ``lam * parent``
    for a single ``lam`` in [0, 1].  Entries where the parent is zero
    force zeros in both children.  Arithmetic is exact, so integer and
    Fraction positions are both fine.
    """
    parent, left, right = _as4(parent), _as4(left), _as4(right)
    if player not in (1, 2):
        raise ValueError("player must be 1 or 2")
    if any(v < 0 for p in (left, right) for v in p):
        return False
    if any(left[i] + right[i] != parent[i] for i in range(4)):
        return False
    other = (2, 3) if player == 1 else (0, 1)
    lam = None
    for i in other:
        if parent[i] == 0:
            if left[i] != 0:
                return False
            continue
        r = Fraction(left[i]) / Fraction(parent[i])
        if lam is None:
            lam = r
        elif lam != r:
            return False
    if lam is not None and not (0 <= lam <= 1):
        return False
    return True


@dataclass(frozen=True)
class Split:
    """One move of the lattice game: ``parent`` splits into two children.

    ``kind`` is "exact" when no mass is lost (the split is an allowed
    split on the nose) and "relaxed" when one coordinate of each child
    was rounded down to stay on the integer lattice.  In the relaxed
    case ``floored`` names that coordinate (index into the 4-tuple) and
    ``anchor`` the partner coordinate whose ratio was used.
    """

    parent: tuple
    left: tuple
    right: tuple
    player: int
    kind: str
    floored: int | None = None
    anchor: int | None = None

    def mass_lost(self):
        return sum(p - l - r for p, l, r in zip(self.parent, self.left, self.right))

    def exact_lift(self):
        """Undo the rounding: children with the floored entries replaced
        by their exact proportional values.  The lifted pair is an
        allowed split of the parent and dominates the lattice children
        componentwise."""
        if self.kind == "exact":
            return self.left, self.right
        f, anc = self.floored, self.anchor
        ratio = Fraction(self.parent[f], self.parent[anc])
        lifted = []
        for child in (self.left, self.right):
            child = list(child)
            child[f] = ratio * child[anc]
            lifted.append(tuple(child))
        return tuple(lifted[0]), tuple(lifted[1])


# (floored coordinate, anchor coordinate, sender) for the four symmetric
# relaxation patterns; (3, 2, 1) is the pattern the others are images of.
RELAXATION_PATTERNS = ((3, 2, 1), (2, 3, 1), (1, 0, 2), (0, 1, 2))


def relaxed_splits(pos):
    """Enumerate every relaxed split of a lattice position.

    One designated pattern splits the sender's pair and one anchor
    coordinate freely and floors the anchor's partner; the other three
    patterns are its images under the symmetry group.  When an anchor
    pair is entirely zero the split degenerates to a free partition of
    the sender's coordinates (emitted once, under the designated
    pattern of that sender).  Children never exceed the parent, so they
    stay on the lattice.  Duplicate (left, right, player) triples
    arising from several patterns are emitted once.
    """
    pos = _as4(pos)
    if any(v < 0 or v != int(v) for v in pos):
        raise ValueError("relaxed splits are defined on the integer lattice")
    a, b, c, d = (int(v) for v in pos)
    pos = (a, b, c, d)
    seen = set()
    for f, anc, player in RELAXATION_PATTERNS:
        anchor_val = pos[anc]
        floor_val = pos[f]
        if anchor_val == 0:
            if floor_val != 0 or (f, anc) not in ((3, 2), (1, 0)):
                # ratio undefined: covered by the partner pattern when the
                # floored entry is positive; all-zero pairs are handled once.
                continue
        if player == 1:
            free0, free1 = 0, 1
        else:
            free0, free1 = 2, 3
        n0, n1 = pos[free0], pos[free1]
        for x0 in range(n0 + 1):
            for x1 in range(n1 + 1):
                for y in range(anchor_val + 1):
                    if anchor_val:
                        z0 = floor_val * y // anchor_val
                        z1 = floor_val * (anchor_val - y) // anchor_val
                    else:
                        z0 = z1 = 0
                    left = [0, 0, 0, 0]
                    right = [0, 0, 0, 0]
                    left[free0], right[free0] = x0, n0 - x0
                    left[free1], right[free1] = x1, n1 - x1
                    left[anc], right[anc] = y, anchor_val - y
                    left[f], right[f] = z0, z1
                    left, right = tuple(left), tuple(right)
                    key = (left, right, player)
                    if key in seen:
                        continue
                    seen.add(key)
                    lost = floor_val - z0 - z1
                    if lost == 0 and is_allowed_split(pos, left, right, player):
                        yield Split(pos, left, right, player, "exact")
                    else:
                        yield Split(pos, left, right, player, "relaxed",
                                    floored=f, anchor=anc)


def scaled(pos, factor):
    return tuple(v * factor for v in pos)


def mass(pos):
    return sum(pos)


def parse_position(text):
    """Parse the ``a,b,c,d`` text form (integers, decimals or p/q)."""
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 4:
        raise ValueError(f"expected 4 comma-separated entries, got {text!r}")
    out = []
    for p in parts:
        v = Fraction(p)
        if v < 0:
            raise ValueError(f"negative entry in position {text!r}")
        out.append(int(v) if v.denominator == 1 else v)
    return tuple(out)


def format_position(pos):
    """Inverse of :func:`parse_position`; exact for every entry."""
    out = []
    for v in pos:
        f = Fraction(v)
        if f.denominator == 1:
            out.append(str(f.numerator))
        else:
            # prefer an exact decimal when one exists
            den = f.denominator
            while den % 2 == 0:
                den //= 2
            while den % 5 == 0:
                den //= 5
            if den == 1:
                out.append(_exact_decimal(f))
            else:
                out.append(f"{f.numerator}/{f.denominator}")
    return ",".join(out)


def _exact_decimal(f):
    digits = 0
    den = f.denominator
    while den % 2 == 0:
        den //= 2
        digits += 1
    tens = 0
    while den % 5 == 0:
        den //= 5
        tens += 1
    digits = max(digits, tens)
    scaledv = f.numerator * 10**digits // f.denominator
    s = str(scaledv).rjust(digits + 1, "0")
    return s[:-digits] + "." + s[-digits:] if digits else s


def _as4(pos):
    t = tuple(pos)
    if len(t) != 4:
        raise ValueError("two-player positions have 4 entries")
    return t
