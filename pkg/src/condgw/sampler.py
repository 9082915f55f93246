"""Exact samplers for unconditioned and conditioned Galton-Watson trees.

The conditioned sampler grows the tree top-down: a node of type ``t`` at
level ``l`` known to lie in class ``i`` draws its count matrix from the
conditioned offspring law, places the labelled children (type, class) in a
uniformly random order, and each child repeats the procedure with its own
class. Nodes on the base layer draw a whole subtree from the conditioned
base law. Trees are built with explicit stacks, so depth is not limited by
the interpreter's recursion limit.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from bisect import bisect_right
from itertools import accumulate
from typing import Callable

from .core import OffspringModel, Tree
from .events import Event, ImpossibleEventError, RecursivePartition
from .probs import ClassProbTable, ConditionalOffspringTable, build_tables
from .rng import RngStream

#: Below this class probability the rejection sampler refuses to run.
REJECTION_FLOOR = 1e-6


class ClassMismatchError(AssertionError):
    """A conditioned draw landed outside its class (never expected)."""


@dataclass(eq=False)
class SamplerContext:
    partition: RecursivePartition
    k: int
    model: OffspringModel
    probs: ClassProbTable
    cond: ConditionalOffspringTable
    _draws: dict = field(default_factory=dict, repr=False)
    _base: dict = field(default_factory=dict, repr=False)
    _coins: dict = field(default_factory=dict, repr=False)

    @classmethod
    def build(cls, event: Event | RecursivePartition, model: OffspringModel, k: int | None = None):
        if isinstance(event, Event):
            k = event.k if k is None else k
            partition = event.partition
        else:
            partition = event
        probs, cond = build_tables(partition, k, model)
        return cls(partition, k, model, probs, cond)

    def __post_init__(self):
        theta = self.partition.theta
        for (t, l, i), law in self.cond.entries.items():
            labels = []
            for flat, _ in law:
                labels.append(
                    tuple(
                        (e % theta + 1, e // theta + 1)
                        for e, c in enumerate(flat)
                        for _ in range(c)
                    )
                )
            cum = list(accumulate(float(mass) for _, mass in law))
            self._draws[(t, l, i)] = (cum, labels, [flat for flat, _ in law])
        for (t, i), law in self.cond.base.items():
            cum = list(accumulate(float(mass) for _, mass in law))
            self._base[(t, i)] = (cum, [tree for tree, _ in law])
        for t in range(1, theta + 1):
            for l in self.probs.levels:
                row = [float(v) for v in self.probs.layer(l)[t - 1]]
                self._coins[(t, l)] = list(accumulate(row))

    @property
    def top(self) -> int:
        """Root level of the base layer."""
        return self.k - self.partition.k0

    def require(self, t: int, l: int, i: int):
        if not 0 <= l <= self.top:
            raise ValueError(f"level {l} outside 0..{self.top}")
        if not self.probs.prob(t, l, i):
            raise ImpossibleEventError(
                f"class {i} has probability 0 for a type-{t} root at level {l}"
            )


def _children_labels(ctx: SamplerContext, t: int, l: int, i: int, rng: RngStream) -> list:
    cum, labels, _ = ctx._draws[(t, l, i)]
    out = list(labels[rng.choose(cum)])
    rng.shuffle(out)
    return out


def _base_tree(ctx: SamplerContext, t: int, i: int, rng: RngStream) -> Tree:
    cum, trees = ctx._base[(t, i)]
    return trees[rng.choose(cum)]


def sample_conditioned_class(
    t: int, l: int, i: int, rng: RngStream, ctx: SamplerContext, check: bool = False
) -> Tree:
    """Tree of root type ``t`` at level ``l`` drawn from its class-``i`` law."""
    ctx.require(t, l, i)
    top = ctx.top
    if l == top:
        tree = _base_tree(ctx, t, i, rng)
    else:
        tree = _grow(t, l, i, rng, ctx)
    if check:
        got = ctx.partition.classify(tree, ctx.k - l)
        if got != i:
            raise ClassMismatchError(f"drew {tree} in class {got}, wanted {i}")
    return tree


def _grow(t, l, i, rng, ctx):
    # Same draws as _children_labels / _base_tree (rng.choose, rng.shuffle),
    # with the lookups hoisted out of the per-node loop.
    draws, base, top = ctx._draws, ctx._base, ctx.top
    rnd = rng.random

    def pick(cum):
        j = bisect_right(cum, rnd() * cum[-1])
        return j if j < len(cum) else len(cum) - 1

    def children(key):
        cum, labels, _ = draws[key]
        out = list(labels[pick(cum)])
        for a in range(len(out) - 1, 0, -1):
            b = int(rnd() * (a + 1))
            if b > a:
                b = a
            out[a], out[b] = out[b], out[a]
        return out

    labels = children((t, l, i))
    if not labels:
        return Tree(t, ())
    # frame: [type, level, labels, next position, built children]
    stack = [[t, l, labels, 0, []]]
    while True:
        fr = stack[-1]
        if fr[3] == len(fr[2]):
            stack.pop()
            node = Tree(fr[0], tuple(fr[4]))
            if not stack:
                return node
            stack[-1][4].append(node)
            continue
        j, ci = fr[2][fr[3]]
        fr[3] += 1
        cl = fr[1] + 1
        if cl == top:
            cum, trees = base[(j, ci)]
            fr[4].append(trees[pick(cum)])
            continue
        sub = children((j, cl, ci))
        if sub:
            stack.append([j, cl, sub, 0, []])
        else:
            fr[4].append(Tree(j, ()))


def draw_class(t: int, l: int, rng: RngStream, ctx: SamplerContext) -> int:
    """The m-sided coin: class ``i`` with probability ``p(t, l, i)``."""
    return rng.choose(ctx._coins[(t, l)]) + 1


def sample_tilde(t: int, l: int, rng: RngStream, ctx: SamplerContext) -> tuple[int, Tree]:
    """Class by the coin, then the tree from that class's conditioned law."""
    i = draw_class(t, l, rng, ctx)
    return i, sample_conditioned_class(t, l, i, rng, ctx)


def draw_wx_conditioned(t: int, l: int, i: int, rng: RngStream, ctx: SamplerContext):
    """Children-by-type vector and ``m x theta`` count matrix given class ``i``."""
    ctx.require(t, l, i)
    if l >= ctx.top:
        raise ValueError("the base layer has no offspring law; draw a base tree instead")
    cum, _, flats = ctx._draws[(t, l, i)]
    flat = flats[rng.choose(cum)]
    theta = ctx.partition.theta
    matrix = tuple(flat[r : r + theta] for r in range(0, len(flat), theta))
    w = tuple(sum(row[j] for row in matrix) for j in range(theta))
    return w, matrix


def draw_wx_rejection(
    t: int, l: int, i: int, rng: RngStream, ctx: SamplerContext, max_trials: int = 10**7
):
    """Same law as :func:`draw_wx_conditioned`, by rejection from the joint law.

    Offspring counts come from the untruncated model; each type's children
    are thrown into classes independently with the next layer's
    probabilities. Kept as an independent check of the tables.
    """
    ctx.require(t, l, i)
    p = float(ctx.probs.prob(t, l, i))
    if p < REJECTION_FLOOR:
        raise ValueError(f"class probability {p:.3g} too small for rejection sampling")
    m, theta = ctx.partition.m, ctx.partition.theta
    cums = [list(accumulate(float(v) for v in ctx.probs.layer(l + 1)[j])) for j in range(theta)]
    preds = ctx.partition.predicates_at(ctx.k - l)
    for _ in range(max_trials):
        w = ctx.model.sample(t, l, rng)
        flat = [0] * (m * theta)
        for j in range(theta):
            for _ in range(w[j]):
                flat[rng.choose(cums[j]) * theta + j] += 1
        if preds[i - 1](flat):
            matrix = tuple(tuple(flat[r : r + theta]) for r in range(0, len(flat), theta))
            return tuple(w), matrix
    raise RuntimeError(f"no acceptance in {max_trials} trials")


def sample_unconditioned(t: int, l: int, k: int, model: OffspringModel, rng: RngStream) -> Tree:
    """Plain GW tree from level ``l``, cut off at height ``k - l``."""
    if not 0 <= l <= k:
        raise ValueError(f"level {l} outside 0..{k}")
    theta = model.theta

    def labels(t, l):
        w = model.sample(t, l, rng)
        out = [j + 1 for j in range(theta) for _ in range(w[j])]
        rng.shuffle(out)
        return out

    if l == k:
        return Tree(t, ())
    first = labels(t, l)
    if not first:
        return Tree(t, ())
    stack = [[t, l, first, 0, []]]
    while True:
        fr = stack[-1]
        if fr[3] == len(fr[2]):
            stack.pop()
            node = Tree(fr[0], tuple(fr[4]))
            if not stack:
                return node
            stack[-1][4].append(node)
            continue
        j = fr[2][fr[3]]
        fr[3] += 1
        cl = fr[1] + 1
        sub = labels(j, cl) if cl < k else []
        if sub:
            stack.append([j, cl, sub, 0, []])
        else:
            fr[4].append(Tree(j, ()))


def sample_batch(
    draw: Callable[[RngStream], object], n: int, seed: int, threads: int = 1, offset: int = 0
) -> list:
    """``n`` draws, the ``r``-th using stream ``(seed, offset + r)``.

    Results do not depend on ``threads``.
    """
    if threads <= 1:
        return [draw(RngStream(seed, offset + r)) for r in range(n)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda r: draw(RngStream(seed, offset + r)), range(n)))
