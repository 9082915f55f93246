"""Class probabilities of subtrees and the conditioned offspring laws.

``p(t, l, i)`` is the probability that a type-``t`` subtree rooted at level
``l`` (cut off at total height ``k``) lies in class ``i`` at height index
``k - l``. Layers are filled from the base layer ``l = k - k0`` upwards: the
children of a node are thrown independently into classes with the previous
layer's probabilities, so the count matrix is a product of multinomials
mixed over the offspring law, and each resulting matrix lands in exactly one
class.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import (
    OffspringModel,
    PoissonThinning,
    Tree,
    UnsupportedModelError,
    enumerate_trees,
    multinomial_coefficient,
)
from .events import Event, ImpossibleEventError, RecursivePartition

TRUNCATION_WARN = 1e-9


class TruncationWarning(UserWarning):
    pass


@dataclass
class ClassProbTable:
    """``p[t-1][l][i-1]`` for root levels ``l = 0..k-k0``."""

    theta: int
    m: int
    k: int
    k0: int
    p: list
    truncation_error: float = 0.0

    def prob(self, t: int, l: int, i: int):
        return self.p[t - 1][l][i - 1]

    def layer(self, l: int) -> list[list]:
        return [self.p[t][l] for t in range(self.theta)]

    @property
    def levels(self) -> range:
        return range(self.k - self.k0 + 1)

    def as_array(self) -> np.ndarray:
        return np.asarray([[[float(v) for v in row] for row in per_t] for per_t in self.p])

    def rows(self):
        for t in range(1, self.theta + 1):
            for l in self.levels:
                for i in range(1, self.m + 1):
                    yield t, l, i, self.prob(t, l, i)

    def to_csv(self, fh=None) -> str | None:
        """Columns ``t,l,i,p``; returns the text when no file is given."""
        out = fh or io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["t", "l", "i", "p"])
        for t, l, i, p in self.rows():
            w.writerow([t, l, i, "%.12g" % float(p)])
        return None if fh else out.getvalue()


@dataclass
class ConditionalOffspringTable:
    """Law of the flat count matrix of a type-``t`` node at level ``l`` given class ``i``.

    ``entries[(t, l, i)]`` lists ``(flat matrix, conditional mass)`` pairs for
    ``l < k - k0``; ``base[(t, i)]`` lists ``(tree, conditional mass)`` on the
    base layer.
    """

    theta: int
    m: int
    k: int
    k0: int
    entries: dict = field(default_factory=dict)
    base: dict = field(default_factory=dict)

    def law(self, t: int, l: int, i: int) -> list[tuple[tuple[int, ...], object]]:
        return self.entries.get((t, l, i), [])

    def mean(self, t: int, l: int, i: int) -> np.ndarray:
        """Expected flat count matrix given class ``i``."""
        law = self.law(t, l, i)
        if not law:
            raise ImpossibleEventError(f"class {i} of a type-{t} node at level {l} has probability 0")
        out = np.zeros(self.m * self.theta)
        for flat, mass in law:
            out += float(mass) * np.asarray(flat, dtype=float)
        return out


def compositions(n: int, allowed: Sequence[bool]):
    """All ways to put ``n`` items into the allowed slots (others stay 0)."""
    slots = [i for i, ok in enumerate(allowed) if ok]
    size = len(allowed)
    if not slots:
        if n == 0:
            yield (0,) * size
        return

    def rec(idx, left, acc):
        if idx == len(slots) - 1:
            acc[slots[idx]] = left
            yield tuple(acc)
            acc[slots[idx]] = 0
            return
        for v in range(left, -1, -1):
            acc[slots[idx]] = v
            yield from rec(idx + 1, left - v, acc)
        acc[slots[idx]] = 0

    yield from rec(0, n, [0] * size)


def multinomial_pmf(counts: Sequence[int], q: Sequence) -> object:
    out = multinomial_coefficient(counts)
    for c, qi in zip(counts, q):
        if c:
            out = out * qi**c
    return out


def base_probs(partition: RecursivePartition, k: int, model: OffspringModel):
    """Base layer ``l = k - k0``: class probabilities and conditioned base laws."""
    m, theta, k0 = partition.m, partition.theta, partition.k0
    lb = k - k0
    layer = [[0] * m for _ in range(theta)]
    base: dict = {}
    for t in range(1, theta + 1):
        if k0 == 0:
            i = partition.leaf_classes[t - 1]
            layer[t - 1][i - 1] = 1
            base[(t, i)] = [(Tree(t, ()), 1)]
            continue
        if not model.finite_support:
            raise UnsupportedModelError("a base level above 0 needs finite-support offspring laws")
        grouped: dict[int, list] = {}
        for tree, mass in enumerate_trees(t, lb, k, model):
            i = partition.base_class(tree)
            layer[t - 1][i - 1] += mass
            grouped.setdefault(i, []).append((tree, mass))
        for i, items in grouped.items():
            total = layer[t - 1][i - 1]
            if total:
                base[(t, i)] = [(tree, mass / total) for tree, mass in items if mass]
    return layer, base


def class_probs_step(
    upper: Sequence[Sequence],
    partition: RecursivePartition,
    model: OffspringModel,
    l: int,
    k: int,
):
    """Layer ``l`` from layer ``l + 1``.

    Returns ``(layer, conditional laws keyed by (t, i), truncation error)``.
    """
    m, theta = partition.m, partition.theta
    level = k - l
    allowed = [[bool(q) for q in upper[j]] for j in range(theta)]
    col_cache: dict[tuple[int, int], list] = {}

    def column(j: int, n: int):
        key = (j, n)
        if key not in col_cache:
            col_cache[key] = [(c, multinomial_pmf(c, upper[j])) for c in compositions(n, allowed[j])]
        return col_cache[key]

    layer = [[0] * m for _ in range(theta)]
    cond: dict[tuple[int, int], list] = {}
    err = 0.0
    for t in range(1, theta + 1):
        err = max(err, model.truncation_error(t, l))
        joint: dict[int, list] = {}
        for n, wmass in model.law(t, l):
            partial = [((0,) * (m * theta), wmass)]
            for j in range(theta):
                nxt = []
                for flat, mass in partial:
                    for comp, pm in column(j, n[j]):
                        f = list(flat)
                        for i in range(m):
                            f[i * theta + j] = comp[i]
                        nxt.append((tuple(f), mass * pm))
                partial = nxt
            for flat, mass in partial:
                if not mass:
                    continue
                i = partition.class_of_matrix(flat, level)
                layer[t - 1][i - 1] += mass
                joint.setdefault(i, []).append((flat, mass))
        for i, items in joint.items():
            total = layer[t - 1][i - 1]
            cond[(t, i)] = [(flat, mass / total) for flat, mass in items]
    return layer, cond, err


def build_tables(
    partition: RecursivePartition | Event, k: int | None = None, model: OffspringModel | None = None
) -> tuple[ClassProbTable, ConditionalOffspringTable]:
    """Every layer of class probabilities and the conditioned offspring laws."""
    if isinstance(partition, Event):
        k = partition.k if k is None else k
        partition = partition.partition
    if k is None or model is None:
        raise TypeError("need a tree height and an offspring model")
    if model.theta != partition.theta:
        raise ValueError(f"model has {model.theta} types, partition {partition.theta}")
    if k < partition.k0:
        raise ValueError(f"height {k} below base level {partition.k0}")
    m, theta, k0 = partition.m, partition.theta, partition.k0
    top = k - k0
    p = [[None] * (top + 1) for _ in range(theta)]
    layer, base = base_probs(partition, k, model)
    for t in range(theta):
        p[t][top] = layer[t]
    cond = ConditionalOffspringTable(theta, m, k, k0, base=base)
    err = 0.0
    for l in range(top - 1, -1, -1):
        layer, laws, e = class_probs_step([p[t][l + 1] for t in range(theta)], partition, model, l, k)
        err = max(err, e)
        for t in range(theta):
            p[t][l] = layer[t]
        for (t, i), law in laws.items():
            cond.entries[(t, l, i)] = law
    if err > TRUNCATION_WARN:
        warnings.warn(f"offspring truncation dropped up to {err:.3g} mass", TruncationWarning)
    return ClassProbTable(theta, m, k, k0, p, err), cond


# -- closed forms for the two-type Poisson mutation model ----------------------

def closed_form_poisson_step(upper, mu1: float, mu2: float, p1: float, p2: float) -> list[list[float]]:
    """One layer of the mutant-at-generation-k probabilities, in closed form.

    ``upper[t-1][i-1]`` holds the next layer. Class 1 means "has a mutant in
    the target generation"; a node avoids it iff none of its Poisson children
    of either type is in class 1.
    """
    if len(upper) != 2 or any(len(row) != 2 for row in upper):
        raise ValueError("closed form needs a 2-type, 2-class layer")
    hit1, hit2 = upper[0][0], upper[1][0]
    out = []
    for mu, pt in ((mu1, p1), (mu2, p2)):
        miss = math.exp(-mu * (hit1 * pt + hit2 * (1 - pt)))
        out.append([1 - miss, miss])
    return out


def poisson_mutant_table(k: int, mu: Sequence[float], p: Sequence[float]) -> ClassProbTable:
    """Full table for the two-type Poisson model and the mutant event."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    layers = [None] * (k + 1)
    layers[k] = [[1.0, 0.0], [0.0, 1.0]]
    for l in range(k - 1, -1, -1):
        layers[l] = closed_form_poisson_step(layers[l + 1], mu[0], mu[1], p[0], p[1])
    table = [[layers[l][t] for l in range(k + 1)] for t in range(2)]
    return ClassProbTable(2, 2, k, 0, table)


def closed_form_table(event: Event, model: OffspringModel) -> ClassProbTable:
    if not isinstance(model, PoissonThinning):
        raise ValueError("closed form needs the two-type Poisson thinning model")
    if event.name != "mutant_at_generation_k":
        raise ValueError(f"closed form covers the mutant event, not {event.name!r}")
    return poisson_mutant_table(event.k, model.mu, model.p)


def mutant_curves(kmax: int, mu: Sequence[float], p: Sequence[float]) -> np.ndarray:
    """``out[k-1, t-1]`` = probability a type-t root has a mutant in generation k.

    Laws do not depend on the level, so ``p(t, 0)`` at height ``k`` is the
    ``k``-fold step applied to the terminal layer; one pass gives every k.
    """
    layer = [[1.0, 0.0], [0.0, 1.0]]
    out = np.empty((kmax, 2))
    for k in range(1, kmax + 1):
        layer = closed_form_poisson_step(layer, mu[0], mu[1], p[0], p[1])
        out[k - 1] = [layer[0][0], layer[1][0]]
    return out


def extinction_probability(mu: float, tol: float = 1e-13) -> float:
    """Smallest root of ``s = exp(mu (s - 1))`` for Poisson(mu) offspring.

    Newton's method from ``s = 0`` climbs monotonically to the smallest
    root because ``exp(mu (s - 1)) - s`` is convex and decreasing there.
    """
    if not mu > 0:
        raise ValueError("mu must be positive")
    if mu <= 1:
        return 1.0
    s = 0.0
    for _ in range(200):
        e = math.exp(mu * (s - 1))
        step = (e - s) / (mu * e - 1)
        s -= step
        if abs(step) < tol:
            break
    return s
