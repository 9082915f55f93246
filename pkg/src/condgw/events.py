"""Recursive partitions of tree space and the built-in conditioning events.

A partition has ``m`` classes. Trees of height at most ``k0`` are classified
directly by a base classifier; above ``k0`` the class of a tree at height
index ``l`` is the unique ``i`` whose level-``l`` predicate holds for the
tree's count matrix (children counted by class at ``l - 1`` and by type).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .core import Tree, height
from .predicates import TRUE, Not, Predicate, entry, linear, row_sum, saturation_bounds


class NotAPartitionError(ValueError):
    """A count matrix satisfies zero or several class predicates."""

    def __init__(self, matrix, holding, level):
        self.matrix = matrix
        self.holding = holding
        self.level = level
        super().__init__(
            f"count matrix {matrix} at level {level} satisfies classes {holding}; "
            "exactly one is required"
        )


class ImpossibleEventError(ValueError):
    """Conditioning on a class of probability zero."""


@dataclass(frozen=True)
class PartitionReport:
    counterexample: tuple[tuple[int, ...], ...] | None
    level: int | None = None
    holding: tuple[int, ...] = ()
    exhaustive: bool = False

    @property
    def ok(self) -> bool:
        return self.counterexample is None


_MEMO_SIZE = 1 << 16


@dataclass(frozen=True, eq=False)
class RecursivePartition:
    """Base classification on ``T_{k0}`` plus per-level count-matrix predicates.

    ``predicates`` applies at every level above ``k0`` unless ``level_predicates``
    overrides it. For ``k0 == 0`` the base classifier is simply ``leaf_classes``,
    the class of a leaf of each type.
    """

    m: int
    theta: int
    k0: int
    predicates: tuple[Predicate, ...]
    level_predicates: Mapping[int, tuple[Predicate, ...]] = field(default_factory=dict)
    leaf_classes: tuple[int, ...] | None = None
    base_classifier: Callable[[Tree], int] | None = None
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        if self.m < 1 or self.theta < 1 or self.k0 < 0:
            raise ValueError("need m >= 1, theta >= 1 and k0 >= 0")
        for preds in [self.predicates, *self.level_predicates.values()]:
            if len(preds) != self.m:
                raise ValueError(f"expected {self.m} predicates per level, got {len(preds)}")
        if self.k0 == 0:
            if self.leaf_classes is None or len(self.leaf_classes) != self.theta:
                raise ValueError("k0 = 0 needs a class for every leaf type")
            if any(not 1 <= c <= self.m for c in self.leaf_classes):
                raise ValueError(f"leaf classes {self.leaf_classes} outside 1..{self.m}")
        elif self.base_classifier is None:
            raise ValueError("k0 > 0 needs a base classifier")
        # class_of_matrix memo; few distinct count matrices occur in practice
        object.__setattr__(self, "_memo", {})

    def __eq__(self, other):
        if not isinstance(other, RecursivePartition):
            return NotImplemented
        return (
            self.m == other.m
            and self.theta == other.theta
            and self.k0 == other.k0
            and self.predicates == other.predicates
            and dict(self.level_predicates) == dict(other.level_predicates)
            and self.leaf_classes == other.leaf_classes
            and self.base_classifier is other.base_classifier
        )

    __hash__ = object.__hash__

    def predicates_at(self, level: int) -> tuple[Predicate, ...]:
        return self.level_predicates.get(level, self.predicates)

    def base_class(self, tree: Tree) -> int:
        if self.k0 == 0:
            if tree.children:
                raise ValueError("base classification at k0 = 0 only applies to leaves")
            return self.leaf_classes[tree.type - 1]
        return self.base_classifier(tree)

    def class_of_matrix(self, flat: Sequence[int], level: int) -> int:
        """The unique class whose predicate at ``level`` holds for ``flat``."""
        key = (level if level in self.level_predicates else None, tuple(flat))
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        found = 0
        holding = []
        for i, pred in enumerate(self.predicates_at(level), start=1):
            if pred(flat):
                holding.append(i)
                found = i
        if len(holding) != 1:
            raise NotAPartitionError(unflatten(flat, self.theta), tuple(holding), level)
        if len(self._memo) >= _MEMO_SIZE:
            self._memo.clear()
        self._memo[key] = found
        return found

    def classify(self, tree: Tree, level: int) -> int:
        return self.node_classes(tree, level)[(id(tree), level)]

    def node_classes(self, tree: Tree, level: int) -> dict[tuple[int, int], int]:
        """Classes of every node whose height index is at least ``k0``.

        Keys are ``(id(node), height index)``; nodes below the base layer are
        not classified (they are covered by their base-layer ancestor).
        """
        k0, theta, m = self.k0, self.theta, self.m
        out: dict[tuple[int, int], int] = {}
        stack: list = [(tree, level, False)]
        while stack:
            node, h, expanded = stack.pop()
            key = (id(node), h)
            if key in out:
                continue
            if h <= k0:
                out[key] = self.base_class(node)
                continue
            if not expanded:
                if not node.children:
                    out[key] = self.class_of_matrix((0,) * (m * theta), h)
                    continue
                stack.append((node, h, True))
                for child in node.children:
                    stack.append((child, h - 1, False))
                continue
            counts = [0] * (m * theta)
            for child in node.children:
                counts[(out[(id(child), h - 1)] - 1) * theta + child.type - 1] += 1
            out[key] = self.class_of_matrix(counts, h)
        return out

    def count_matrix(self, tree: Tree, level: int) -> tuple[tuple[int, ...], ...]:
        """``m x theta`` matrix: children by class at ``level - 1`` and by type."""
        if level <= self.k0:
            raise ValueError(f"count matrices are defined above the base level {self.k0}")
        if height(tree) > level:
            raise ValueError(f"tree of height {height(tree)} is not in T_{level}")
        flat = [0] * (self.m * self.theta)
        for child in tree.children:
            i = self.classify(child, level - 1)
            flat[(i - 1) * self.theta + child.type - 1] += 1
        return unflatten(flat, self.theta)

    def validate(self, probe_bound: int = 3, levels: Sequence[int] | None = None) -> PartitionReport:
        return validate_partition(self, probe_bound, levels)


def format_annotated(tree: Tree, partition: RecursivePartition, level: int) -> str:
    """Tree text with ``t:i`` on every node at or above the base layer."""
    classes = partition.node_classes(tree, level)
    out: list[str] = []
    stack: list = [(tree, level)]
    while stack:
        item = stack.pop()
        if isinstance(item, str):
            out.append(item)
            continue
        node, h = item
        out.append(str(node.type))
        if h >= partition.k0 and (id(node), h) in classes:
            out.append(f":{classes[(id(node), h)]}")
        if node.children:
            out.append("(")
            stack.append(")")
            for idx in range(len(node.children) - 1, -1, -1):
                stack.append((node.children[idx], h - 1))
                if idx:
                    stack.append(",")
    return "".join(out)


def unflatten(flat: Sequence[int], theta: int) -> tuple[tuple[int, ...], ...]:
    return tuple(tuple(int(v) for v in flat[r : r + theta]) for r in range(0, len(flat), theta))


def flatten(matrix) -> tuple[int, ...]:
    return tuple(int(v) for row in matrix for v in row)


_MAX_GRID = 4_000_000


def validate_partition(
    partition: RecursivePartition,
    probe_bound: int,
    levels: Sequence[int] | None = None,
    chunk: int = 1 << 18,
) -> PartitionReport:
    """Check that exactly one predicate holds on every probed count matrix.

    Entries range over ``0..probe_bound``. When all atoms have nonnegative
    coefficients each entry is additionally capped at its saturation bound
    (see :func:`~condgw.predicates.saturation_bounds`); if the caps all fit
    under ``probe_bound`` the check covers every count matrix and the report
    is marked exhaustive.
    """
    if probe_bound < 1:
        raise ValueError("probe_bound must be at least 1")
    size = partition.m * partition.theta
    sets = {}
    if levels is None:
        sets[partition.k0 + 1] = partition.predicates
        for lvl, preds in partition.level_predicates.items():
            sets[lvl] = preds
    else:
        for lvl in levels:
            sets[lvl] = partition.predicates_at(lvl)
    exhaustive_all = True
    for lvl, preds in sorted(sets.items()):
        caps = saturation_bounds(preds, size)
        if caps is None:
            bounds = [probe_bound] * size
            exhaustive = False
        else:
            bounds = [min(c, probe_bound) for c in caps]
            exhaustive = all(c <= probe_bound for c in caps)
        exhaustive_all &= exhaustive
        radices = np.asarray([b + 1 for b in bounds], dtype=np.int64)
        total = math.prod(int(r) for r in radices)
        if total > _MAX_GRID:
            raise ValueError(f"probe grid of {total} matrices is too large; lower probe_bound")
        for start in range(0, total, chunk):
            codes = np.arange(start, min(total, start + chunk), dtype=np.int64)
            X = np.empty((len(codes), size), dtype=np.int64)
            for e in range(size - 1, -1, -1):
                codes, X[:, e] = np.divmod(codes, radices[e])
            hits = np.zeros(len(X), dtype=np.int64)
            for pred in preds:
                hits += pred.evaluate_many(X)
            bad = np.flatnonzero(hits != 1)
            if len(bad):
                row = X[bad[0]]
                holding = tuple(i + 1 for i, p in enumerate(preds) if p(row))
                return PartitionReport(unflatten(row, partition.theta), lvl, holding, exhaustive)
    return PartitionReport(None, None, (), exhaustive_all)


# -- events -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Event:
    """A partition together with the tree height and the conditioning class."""

    name: str
    partition: RecursivePartition
    k: int
    target: int
    root_type: int = 1
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.k < self.partition.k0:
            raise ValueError(f"tree height {self.k} is below the base level {self.partition.k0}")
        if not 1 <= self.target <= self.partition.m:
            raise ValueError(f"target class {self.target} outside 1..{self.partition.m}")
        if not 1 <= self.root_type <= self.partition.theta:
            raise ValueError(f"root type {self.root_type} outside 1..{self.partition.theta}")

    @property
    def m(self) -> int:
        return self.partition.m

    @property
    def theta(self) -> int:
        return self.partition.theta

    def classify(self, tree: Tree, level: int | None = None) -> int:
        return self.partition.classify(tree, self.k if level is None else level)

    def occurs(self, tree: Tree) -> bool:
        return self.classify(tree) == self.target


def _validated(partition: RecursivePartition) -> RecursivePartition:
    report = partition.validate(probe_bound=4)
    if not report.ok:
        raise NotAPartitionError(report.counterexample, report.holding, report.level)
    return partition


def _need(cond: bool, msg: str):
    if not cond:
        raise ValueError(msg)


def trivial_event(k: int, theta: int = 1) -> Event:
    """One class containing every tree: conditioning on it changes nothing."""
    _need(k >= 0, "k must be nonnegative")
    part = RecursivePartition(1, theta, 0, (TRUE,), leaf_classes=(1,) * theta, labels=("all",))
    return Event("trivial", _validated(part), k, 1, params={"theta": theta})


def survival_event(k: int, theta: int = 1) -> Event:
    """Class 1: the tree has a node at depth equal to its height index."""
    _need(k >= 0, "k must be nonnegative")
    alive = row_sum(2, theta, 1, ">=", 1)
    part = RecursivePartition(
        2, theta, 0, (alive, Not(alive)), leaf_classes=(1,) * theta, labels=("alive", "extinct")
    )
    return Event("survival", _validated(part), k, 1, params={"theta": theta})


def _mutant_partition(first_row: Predicate) -> RecursivePartition:
    return _validated(
        RecursivePartition(
            2, 2, 0, (first_row, Not(first_row)), leaf_classes=(1, 2),
            labels=("mutant at level", "no mutant at level"),
        )
    )


def mutant_at_generation_k(k: int, root_type: int = 2) -> Event:
    """At least one type-1 (mutant) node in generation ``k``."""
    _need(k >= 0, "k must be nonnegative")
    part = _mutant_partition(row_sum(2, 2, 1, ">=", 1))
    return Event("mutant_at_generation_k", part, k, 1, root_type)


def root_lineage_mutant(k: int, root_type: int = 1) -> Event:
    """A mutant in generation ``k`` reached through an unbroken mutant line."""
    _need(k >= 0, "k must be nonnegative")
    part = _mutant_partition(entry(2, 2, 1, 1, ">=", 1))
    return Event("root_lineage_mutant", part, k, 1, root_type)


def spontaneous_mutation_4class(k: int) -> Event:
    """All mutants descend from the root's mutant line and one reaches generation ``k``.

    Classes: 1 target, 2 only type-2 descendants, 3 some type-2 descendant has
    a type-1 child, 4 everything else.
    """
    _need(k >= 0, "k must be nonnegative")
    m, th = 4, 2
    spont = linear(m, th, {(1, 2): 1, (3, 1): 1, (3, 2): 1, (4, 2): 1}, ">=", 1)
    no_spont = Not(spont)
    b1 = no_spont & entry(m, th, 1, 1, ">=", 1)
    b2 = no_spont & linear(m, th, {(1, 1): 1, (2, 1): 1, (4, 1): 1}, "==", 0)
    b4 = no_spont & entry(m, th, 1, 1, "==", 0) & linear(m, th, {(2, 1): 1, (4, 1): 1}, ">=", 1)
    part = RecursivePartition(
        m, th, 0, (b1, b2, spont, b4), leaf_classes=(1, 2),
        labels=("inherited mutant reaches level", "type 2 only", "spontaneous mutation", "other"),
    )
    return Event("spontaneous_mutation_4class", _validated(part), k, 1, 1)


def generation_size(G: int, k: int, theta: int = 1) -> Event:
    """Exactly ``G`` nodes in generation ``k``.

    Classes ``1..G+2`` stand for generation sizes ``0..G`` and "at least
    G+1"; internal class ``i`` is size ``i - 1``. A leaf is generation 0 of
    itself, so leaves start in the size-1 class (internal class 2).
    """
    _need(G >= 0 and k >= 0, "G and k must be nonnegative")
    m = G + 2
    weights = {(i, j): i - 1 for i in range(1, m + 1) for j in range(1, theta + 1)}
    preds = tuple(linear(m, theta, weights, "==", size) for size in range(G + 1))
    preds += (linear(m, theta, weights, ">=", G + 1),)
    labels = tuple(f"size {s}" for s in range(G + 1)) + (f"size >= {G + 1}",)
    part = RecursivePartition(m, theta, 0, preds, leaf_classes=(2,) * theta, labels=labels)
    return Event(
        "generation_size", _validated(part), k, G + 1,
        params={"G": G, "theta": theta, "class_offset": 1},
    )


def _height_class(tree: Tree) -> int:
    h = height(tree)
    if h > 2:
        raise ValueError(f"base classification needs height <= 2, got {h}")
    return (2, 1, 3)[h]


def exact_height(k: int, theta: int = 1) -> Event:
    """Height exactly ``k``, as trees cut off at height ``k + 1``.

    Base classes on ``T_2``: 1 height one, 2 a single node, 3 height two.
    """
    _need(k >= 1, "exact_height needs k >= 1")
    m = 3
    n1 = row_sum(m, theta, 1, ">=", 1)
    n1_zero = row_sum(m, theta, 1, "==", 0)
    n3_zero = row_sum(m, theta, 3, "==", 0)
    n3_pos = row_sum(m, theta, 3, ">=", 1)
    part = RecursivePartition(
        m, theta, 2, (n1 & n3_zero, n1_zero & n3_zero, n3_pos),
        base_classifier=_height_class, labels=("correct", "short", "long"),
    )
    return Event("exact_height", _validated(part), k + 1, 1, params={"height": k, "theta": theta})


BUILDERS = {
    "trivial": trivial_event,
    "survival": survival_event,
    "mutant_at_generation_k": mutant_at_generation_k,
    "root_lineage_mutant": root_lineage_mutant,
    "spontaneous_mutation_4class": spontaneous_mutation_4class,
    "generation_size": generation_size,
    "exact_height": exact_height,
}

