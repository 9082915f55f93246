"""Typed trees, offspring laws and the (unconditioned) Galton-Watson measure.

Types and levels follow one convention throughout the package: types are
``1..theta``, the root sits at level 0 and a tree grown from level ``l`` in a
model of total height ``k`` has height at most ``k - l``.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache
from itertools import permutations, product
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np
from scipy import stats

#: Upper-tail mass below which infinite-support laws are cut when their
#: support has to be enumerated.
TAIL_CUTOFF = 1e-12


class UnsupportedModelError(ValueError):
    """The requested operation needs a finite-support offspring law."""


class Tree(NamedTuple):
    """Finite ordered rooted tree whose nodes carry a type in ``1..theta``."""

    type: int
    children: tuple["Tree", ...] = ()

    def __str__(self) -> str:
        return format_tree(self)

    def __repr__(self) -> str:
        return f"Tree({format_tree(self)!r})"

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def height(self) -> int:
        return height(self)

    def count_children(self, theta: int) -> tuple[int, ...]:
        return count_children(self, theta)


def leaf(t: int) -> Tree:
    return Tree(t, ())


def height(tree: Tree) -> int:
    """0 for a leaf, otherwise one more than the highest child."""
    # explicit stack: sampled trees can be far deeper than the recursion limit
    best = 0
    stack = [(tree, 0)]
    while stack:
        node, depth = stack.pop()
        if depth > best:
            best = depth
        for child in node.children:
            stack.append((child, depth + 1))
    return best


def count_children(tree: Tree, theta: int) -> tuple[int, ...]:
    """Number of children of the root of each type, as a length-theta tuple."""
    counts = [0] * theta
    for child in tree.children:
        counts[child.type - 1] += 1
    return tuple(counts)


def generation_sizes(tree: Tree) -> list[int]:
    """Number of nodes at each depth ``0..height(tree)``."""
    sizes = []
    level = [tree]
    while level:
        sizes.append(len(level))
        level = [c for node in level for c in node.children]
    return sizes


def iter_nodes(tree: Tree) -> Iterator[tuple[Tree, int]]:
    """Yield ``(node, depth)`` in depth-first pre-order."""
    stack = [(tree, 0)]
    while stack:
        node, depth = stack.pop()
        yield node, depth
        for child in reversed(node.children):
            stack.append((child, depth + 1))


def multinomial_coefficient(x) -> int:
    """``(sum x)! / prod(x_i!)`` for a vector or matrix of nonnegative ints.

    A matrix is treated as the flat vector of its entries. Python ints are
    arbitrary precision, so large totals never overflow.
    """
    flat = [int(v) for v in np.asarray(x, dtype=object).ravel()]
    if any(v < 0 for v in flat):
        raise ValueError(f"negative entry in {x!r}")
    return _multinomial(tuple(sorted(flat)))


@lru_cache(maxsize=65536)
def _multinomial(flat: tuple[int, ...]) -> int:
    result = math.factorial(sum(flat))
    for v in flat:
        result //= math.factorial(v)
    return result


# -- tree text format ---------------------------------------------------------

def format_tree(tree: Tree, annotations: dict[int, int] | None = None) -> str:
    """Serialize as ``t`` / ``t(c1,c2,...)``; children keep their order.

    ``annotations`` optionally maps ``id(node)`` to a class id, rendered as
    ``t:i``.
    """
    out: list[str] = []
    stack: list = [tree]
    while stack:
        item = stack.pop()
        if isinstance(item, str):
            out.append(item)
            continue
        out.append(str(item.type))
        if annotations is not None and id(item) in annotations:
            out.append(f":{annotations[id(item)]}")
        if item.children:
            out.append("(")
            stack.append(")")
            for idx in range(len(item.children) - 1, -1, -1):
                stack.append(item.children[idx])
                if idx:
                    stack.append(",")
    return "".join(out)


def parse_tree(text: str) -> Tree:
    """Inverse of :func:`format_tree`; class annotations ``t:i`` are ignored."""
    s = text.strip()
    pos = 0

    def number() -> int:
        nonlocal pos
        start = pos
        while pos < len(s) and s[pos].isdigit():
            pos += 1
        if start == pos:
            raise ValueError(f"expected a type at offset {pos} in {text!r}")
        return int(s[start:pos])

    # iterative parse: frames are [type, children]
    root_holder: list[Tree] = []
    frames: list[list] = []
    while True:
        t = number()
        if t < 1:
            raise ValueError(f"types start at 1, got {t} in {text!r}")
        if pos < len(s) and s[pos] == ":":
            pos += 1
            number()
        if pos < len(s) and s[pos] == "(":
            pos += 1
            frames.append([t, []])
            continue
        node = Tree(t, ())
        while True:
            if frames:
                frames[-1][1].append(node)
            else:
                root_holder.append(node)
                break
            if pos >= len(s):
                raise ValueError(f"unbalanced parentheses in {text!r}")
            if s[pos] == ",":
                pos += 1
                break
            if s[pos] == ")":
                pos += 1
                ft, fc = frames.pop()
                node = Tree(ft, tuple(fc))
                continue
            raise ValueError(f"unexpected {s[pos]!r} at offset {pos} in {text!r}")
        if root_holder:
            break
    if pos != len(s):
        raise ValueError(f"trailing characters in {text!r}")
    return root_holder[0]


# -- offspring models ---------------------------------------------------------

Law = list[tuple[tuple[int, ...], object]]


class OffspringModel:
    """Per (type, level) law of the vector of children counts by type."""

    theta: int

    def law(self, t: int, level: int) -> Law:
        """Support points with masses; infinite laws come back truncated."""
        raise NotImplementedError

    def pmf(self, t: int, level: int, counts: Sequence[int]):
        raise NotImplementedError

    def sample(self, t: int, level: int, rng) -> tuple[int, ...]:
        raise NotImplementedError

    def truncation_error(self, t: int, level: int) -> float:
        """Mass dropped from :meth:`law` before renormalization."""
        return 0.0

    @property
    def finite_support(self) -> bool:
        raise NotImplementedError

    @property
    def is_exact(self) -> bool:
        """True when every mass is a :class:`~fractions.Fraction`."""
        return False

    def mean(self, t: int, level: int) -> np.ndarray:
        out = np.zeros(self.theta)
        for counts, mass in self.law(t, level):
            out += float(mass) * np.asarray(counts, dtype=float)
        return out


class ExplicitOffspring(OffspringModel):
    """Finite offspring tables, optionally overridden for some levels.

    ``laws[t]`` maps a count vector to its probability. ``level_laws`` maps
    ``(t, level)`` to a table that replaces ``laws[t]`` at that level.
    Masses may be floats or :class:`~fractions.Fraction` (exact mode).
    """

    def __init__(self, theta: int, laws, level_laws=None):
        if theta < 1:
            raise ValueError("theta must be at least 1")
        self.theta = theta
        self.laws = {t: self._check(t, table) for t, table in laws.items()}
        self.level_laws = {
            key: self._check(key[0], table) for key, table in (level_laws or {}).items()
        }
        missing = set(range(1, theta + 1)) - set(self.laws)
        if missing:
            raise ValueError(f"no offspring law for types {sorted(missing)}")
        self._cum: dict = {}

    def _check(self, t, table) -> Law:
        if not 1 <= t <= self.theta:
            raise ValueError(f"type {t} outside 1..{self.theta}")
        items = []
        for counts, mass in dict(table).items():
            counts = tuple(int(c) for c in counts)
            if len(counts) != self.theta or min(counts) < 0:
                raise ValueError(f"bad count vector {counts} for type {t}")
            if mass < 0:
                raise ValueError(f"negative mass {mass} for {counts}")
            if mass > 0:
                items.append((counts, mass))
        total = sum(m for _, m in items)
        exact = all(isinstance(m, (Fraction, int)) for _, m in items)
        if (total != 1) if exact else abs(total - 1) > 1e-12:
            raise ValueError(f"masses for type {t} sum to {total}, not 1")
        return sorted(items)

    def law(self, t, level):
        return self.level_laws.get((t, level), self.laws[t])

    def pmf(self, t, level, counts):
        for c, m in self.law(t, level):
            if c == tuple(counts):
                return m
        return 0

    def sample(self, t, level, rng):
        key = (t, level) if (t, level) in self.level_laws else t
        cached = self._cum.get(key)
        if cached is None:
            law = self.law(t, level)
            cached = ([c for c, _ in law], np.cumsum([float(m) for _, m in law]).tolist())
            self._cum[key] = cached
        support, cum = cached
        return support[rng.choose(cum)]

    @property
    def finite_support(self):
        return True

    @property
    def is_exact(self):
        tables = list(self.laws.values()) + list(self.level_laws.values())
        return all(isinstance(m, (Fraction, int)) for law in tables for _, m in law)

    def __eq__(self, other):
        return (
            isinstance(other, ExplicitOffspring)
            and self.theta == other.theta
            and self.laws == other.laws
            and self.level_laws == other.level_laws
        )


def _poisson_support(lam: float) -> tuple[list[float], float]:
    """Masses of Pois(lam) on 0..n with n the first point whose tail < cutoff."""
    if lam == 0:
        return [1.0], 0.0
    n = int(stats.poisson.isf(TAIL_CUTOFF, lam))
    while stats.poisson.sf(n, lam) >= TAIL_CUTOFF:
        n += 1
    while n > 0 and stats.poisson.sf(n - 1, lam) < TAIL_CUTOFF:
        n -= 1
    masses = stats.poisson.pmf(np.arange(n + 1), lam)
    dropped = float(stats.poisson.sf(n, lam))
    return (masses / masses.sum()).tolist(), dropped


class PoissonThinning(OffspringModel):
    """Two-type Poisson offspring with independent type marking.

    A type-``t`` node has Pois(mu[t]) children, each of type 1 with
    probability ``p[t]`` and of type 2 otherwise, so the counts are
    independent Pois(mu p) and Pois(mu (1 - p)).
    """

    theta = 2

    def __init__(self, mu: Sequence[float], p: Sequence[float]):
        if len(mu) != 2 or len(p) != 2:
            raise ValueError("PoissonThinning needs two rates and two marking probabilities")
        if any(m < 0 for m in mu) or any(not 0 <= q <= 1 for q in p):
            raise ValueError(f"invalid rates {mu} or probabilities {p}")
        self.mu = tuple(float(m) for m in mu)
        self.p = tuple(float(q) for q in p)
        self._laws: dict = {}

    def rates(self, t: int) -> tuple[float, float]:
        mu, p = self.mu[t - 1], self.p[t - 1]
        return mu * p, mu * (1 - p)

    def law(self, t, level):
        cached = self._laws.get(t)
        if cached is None:
            (m1, e1), (m2, e2) = (_poisson_support(r) for r in self.rates(t))
            law = [((a, b), x * y) for (a, x), (b, y) in product(enumerate(m1), enumerate(m2))]
            cached = (law, e1 + e2)
            self._laws[t] = cached
        return cached[0]

    def truncation_error(self, t, level):
        self.law(t, level)
        return self._laws[t][1]

    def pmf(self, t, level, counts):
        a, b = counts
        r1, r2 = self.rates(t)
        return float(stats.poisson.pmf(a, r1) * stats.poisson.pmf(b, r2))

    def sample(self, t, level, rng):
        r1, r2 = self.rates(t)
        return (rng.poisson(r1), rng.poisson(r2))

    def mean(self, t, level):
        return np.asarray(self.rates(t))

    @property
    def finite_support(self):
        return False

    def __eq__(self, other):
        return isinstance(other, PoissonThinning) and (self.mu, self.p) == (other.mu, other.p)


class LevelRanges(OffspringModel):
    """A default model overridden on half-open level ranges ``[lo, hi)``."""

    def __init__(self, default: OffspringModel, ranges: Iterable[tuple[int, int, OffspringModel]] = ()):
        self.default = default
        self.ranges = [(int(lo), int(hi), m) for lo, hi, m in ranges]
        self.theta = default.theta
        for lo, hi, m in self.ranges:
            if m.theta != self.theta:
                raise ValueError("all level ranges must share theta")
            if lo < 0 or hi <= lo:
                raise ValueError(f"bad level range [{lo}, {hi})")

    def _pick(self, level: int) -> OffspringModel:
        for lo, hi, m in self.ranges:
            if lo <= level < hi:
                return m
        return self.default

    def law(self, t, level):
        return self._pick(level).law(t, level)

    def pmf(self, t, level, counts):
        return self._pick(level).pmf(t, level, counts)

    def sample(self, t, level, rng):
        return self._pick(level).sample(t, level, rng)

    def truncation_error(self, t, level):
        return self._pick(level).truncation_error(t, level)

    def mean(self, t, level):
        return self._pick(level).mean(t, level)

    @property
    def finite_support(self):
        return all(m.finite_support for m in [self.default] + [r[2] for r in self.ranges])

    @property
    def is_exact(self):
        return all(m.is_exact for m in [self.default] + [r[2] for r in self.ranges])

    def __eq__(self, other):
        return isinstance(other, LevelRanges) and (self.default, self.ranges) == (
            other.default,
            other.ranges,
        )


# -- the Galton-Watson measure ------------------------------------------------

def gw_probability(tree: Tree, t: int, l: int, k: int, model: OffspringModel):
    """Mass of ``tree`` under the GW measure of a type-``t`` root at level ``l``.

    The tree is cut off at height ``k - l``; children orderings are equally
    likely, hence the division by the multinomial coefficient.
    """
    if tree.type != t:
        raise ValueError(f"root type {tree.type} does not match {t}")
    if not 0 <= l <= k:
        raise ValueError(f"level {l} outside 0..{k}")
    if height(tree) > k - l:
        raise ValueError(f"tree of height {height(tree)} exceeds {k - l}")
    return _gw(tree, l, k, model)


def _gw(tree: Tree, l: int, k: int, model: OffspringModel):
    if l == k:
        return 1
    n = count_children(tree, model.theta)
    mass = model.pmf(tree.type, l, n)
    if mass == 0:
        return mass
    mass = mass / multinomial_coefficient(n)
    for child in tree.children:
        mass = mass * _gw(child, l + 1, k, model)
    return mass


def ordered_arrangements(counts: Sequence[int]) -> list[tuple[int, ...]]:
    """All distinct orderings of the type multiset described by ``counts``."""
    labels = [j + 1 for j, c in enumerate(counts) for _ in range(c)]
    return sorted(set(permutations(labels)))


def enumerate_trees(
    t: int, l: int, k: int, model: OffspringModel, limit: int | None = 10**6
) -> list[tuple[Tree, object]]:
    """Every tree with positive mass under the GW measure at level ``l``.

    Masses are computed in whatever arithmetic the model uses, so a model
    with :class:`~fractions.Fraction` masses yields exact results.
    """
    if not model.finite_support:
        raise UnsupportedModelError("tree enumeration needs finite-support offspring laws")
    cache: dict = {}

    def rec(t: int, l: int) -> list[tuple[Tree, object]]:
        key = (t, l)
        if key in cache:
            return cache[key]
        if l == k:
            out = [(Tree(t, ()), 1)]
        else:
            out = []
            for n, mass in model.law(t, l):
                share = mass / multinomial_coefficient(n)
                for order in ordered_arrangements(n):
                    options = [rec(j, l + 1) for j in order]
                    total = math.prod(len(o) for o in options)
                    if limit is not None and len(out) + total > limit:
                        raise UnsupportedModelError(
                            f"enumeration exceeds {limit} trees (type {t}, level {l})"
                        )
                    for combo in product(*options):
                        m = share
                        for _, cm in combo:
                            m = m * cm
                        out.append((Tree(t, tuple(c for c, _ in combo)), m))
        cache[key] = out
        return out

    return rec(t, l)


def count_trees(t: int, l: int, k: int, model: OffspringModel) -> int:
    """Size of the positive-mass support, without building the trees."""
    if not model.finite_support:
        raise UnsupportedModelError("tree enumeration needs finite-support offspring laws")
    cache: dict = {}

    def rec(t, l):
        if l == k:
            return 1
        if (t, l) not in cache:
            total = 0
            for n, _ in model.law(t, l):
                total += multinomial_coefficient(n) * math.prod(
                    rec(j + 1, l + 1) ** c for j, c in enumerate(n)
                )
            cache[(t, l)] = total
        return cache[(t, l)]

    return rec(t, l)
