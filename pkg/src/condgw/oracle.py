"""Brute-force check that the class-by-class construction reproduces the GW law.

Two independent routes produce a distribution over the trees of one class:

* :func:`conditioned_bruteforce` enumerates every tree with its GW mass and
  renormalizes the ones in the class;
* :func:`tilde_exact` scores the same trees with the product formula built
  from the class-probability tables and the conditioned offspring laws.

With :class:`~fractions.Fraction` offspring masses both are exact, so the
total variation between them must be exactly zero.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction

from .core import (
    ExplicitOffspring,
    LevelRanges,
    OffspringModel,
    Tree,
    UnsupportedModelError,
    count_trees,
    enumerate_trees,
    format_tree,
    multinomial_coefficient,
)
from .events import (
    Event,
    ImpossibleEventError,
    exact_height,
    generation_size,
    mutant_at_generation_k,
    root_lineage_mutant,
    spontaneous_mutation_4class,
    survival_event,
)
from .probs import build_tables

#: Largest enumeration the oracle attempts.
ENUMERATION_GUARD = 10**6

DistributionOverTrees = dict  # canonical tree text -> probability


def total_variation(d1: dict, d2: dict):
    """Half the L1 distance over the union of supports."""
    keys = set(d1) | set(d2)
    return sum(abs(d1.get(key, 0) - d2.get(key, 0)) for key in keys) / 2


def _enumerate(t: int, event: Event, model: OffspringModel, guard: int):
    size = count_trees(t, 0, event.k, model)
    if size > guard:
        raise UnsupportedModelError(f"{size} trees exceed the enumeration guard of {guard}")
    return enumerate_trees(t, 0, event.k, model, limit=None)


def conditioned_bruteforce(
    t: int, event: Event, model: OffspringModel, cls: int | None = None, guard: int = ENUMERATION_GUARD
) -> DistributionOverTrees:
    """GW law of type-``t`` trees of height at most ``event.k``, given class ``cls``."""
    cls = event.target if cls is None else cls
    inside = [
        (tree, mass) for tree, mass in _enumerate(t, event, model, guard) if event.classify(tree) == cls
    ]
    total = sum(mass for _, mass in inside)
    if not total:
        raise ImpossibleEventError(f"class {cls} has probability 0 for a type-{t} root")
    return {format_tree(tree): mass / total for tree, mass in inside if mass}


class _TildeScorer:
    """Product-formula mass of a tree under the conditioned law of a class."""

    def __init__(self, event: Event, model: OffspringModel, tables=None):
        self.event = event
        self.partition = event.partition
        self.k = event.k
        self.top = event.k - event.partition.k0
        self.probs, cond = tables or build_tables(event.partition, event.k, model)
        self.laws = {key: dict(law) for key, law in cond.entries.items()}
        self.base = {key: dict(law) for key, law in cond.base.items()}

    def score(self, tree: Tree, cls: int, l: int = 0):
        classes = self.partition.node_classes(tree, self.k - l)
        return self._q(tree, l, cls, classes)

    def _q(self, tree: Tree, l: int, cls: int, classes):
        h = self.k - l
        if classes[(id(tree), h)] != cls:
            return 0
        if l == self.top:
            return self.base.get((tree.type, cls), {}).get(tree, 0)
        theta = self.partition.theta
        flat = [0] * (self.partition.m * theta)
        for child in tree.children:
            flat[(classes[(id(child), h - 1)] - 1) * theta + child.type - 1] += 1
        mass = self.laws.get((tree.type, l, cls), {}).get(tuple(flat), 0)
        if not mass:
            return 0
        mass = mass / multinomial_coefficient(flat)
        for child in tree.children:
            mass = mass * self._q(child, l + 1, classes[(id(child), h - 1)], classes)
            if not mass:
                return 0
        return mass


def tilde_exact(
    t: int,
    event: Event,
    model: OffspringModel,
    cls: int | None = None,
    guard: int = ENUMERATION_GUARD,
    tables=None,
) -> DistributionOverTrees:
    """Conditioned law of class ``cls`` evaluated tree by tree from the tables."""
    cls = event.target if cls is None else cls
    scorer = _TildeScorer(event, model, tables)
    if not scorer.probs.prob(t, 0, cls):
        raise ImpossibleEventError(f"class {cls} has probability 0 for a type-{t} root")
    out = {}
    for tree, _ in _enumerate(t, event, model, guard):
        mass = scorer.score(tree, cls)
        if mass:
            out[format_tree(tree)] = mass
    return out


def mixture_distance(t: int, event: Event, model: OffspringModel, guard: int = ENUMERATION_GUARD):
    """TV between the GW law and the coin-then-class mixture of conditioned laws."""
    scorer = _TildeScorer(event, model)
    truth, mixed = {}, {}
    for tree, mass in _enumerate(t, event, model, guard):
        key = format_tree(tree)
        truth[key] = mass
        i = event.classify(tree)
        mixed[key] = scorer.probs.prob(t, 0, i) * scorer.score(tree, i)
    return total_variation(truth, mixed)


# -- verification grid --------------------------------------------------------

@dataclass
class Instance:
    name: str
    event: Event
    model: OffspringModel
    root_types: tuple[int, ...]
    table_event: Event | None = None  # tables from a different event: fault injection


@dataclass
class InstanceResult:
    name: str
    status: str  # "pass", "fail" or "skip"
    tv: float = 0.0
    checked: int = 0
    note: str = ""
    seconds: float = field(default=0.0, repr=False)


F = Fraction


def _single_type_models():
    return {
        "binary": ExplicitOffspring(1, {1: {(0,): F(1, 2), (2,): F(1, 2)}}),
        "0-1-2": ExplicitOffspring(1, {1: {(0,): F(1, 4), (1,): F(1, 4), (2,): F(1, 2)}}),
        "level-dep": LevelRanges(
            ExplicitOffspring(1, {1: {(0,): F(1, 3), (1,): F(2, 3)}}),
            [(0, 1, ExplicitOffspring(1, {1: {(1,): F(1, 5), (2,): F(4, 5)}}))],
        ),
    }


def _two_type_models():
    return {
        "mut-a": ExplicitOffspring(
            2,
            {
                1: {(0, 0): F(1, 2), (1, 0): F(1, 4), (1, 1): F(1, 4)},
                2: {(0, 0): F(1, 3), (0, 2): F(1, 3), (1, 1): F(1, 3)},
            },
        ),
        "mut-b": LevelRanges(
            ExplicitOffspring(
                2,
                {
                    1: {(0, 0): F(1, 3), (2, 0): F(1, 3), (0, 1): F(1, 3)},
                    2: {(0, 0): F(1, 2), (0, 1): F(1, 4), (1, 0): F(1, 4)},
                },
            ),
            [
                (
                    1,
                    2,
                    ExplicitOffspring(
                        2,
                        {
                            1: {(1, 0): F(1, 2), (1, 1): F(1, 2)},
                            2: {(0, 0): F(1, 5), (0, 2): F(2, 5), (1, 0): F(2, 5)},
                        },
                    ),
                )
            ],
        ),
    }


def default_grid(preset: str = "full") -> list[Instance]:
    """Small exact instances covering every built-in event.

    ``preset="quick"`` keeps only ``k <= 2``.
    """
    ks = (1, 2) if preset == "quick" else (1, 2, 3)
    out = []
    for mname, model in _single_type_models().items():
        for k in ks:
            out.append(Instance(f"survival/{mname}/k={k}", survival_event(k), model, (1,)))
            for G in (0, 1, 2):
                out.append(Instance(f"gensize{G}/{mname}/k={k}", generation_size(G, k), model, (1,)))
            out.append(Instance(f"height/{mname}/k={k}", exact_height(k), model, (1,)))
    for mname, model in _two_type_models().items():
        for k in ks:
            out.append(Instance(f"survival2/{mname}/k={k}", survival_event(k, 2), model, (1, 2)))
            out.append(Instance(f"mutant/{mname}/k={k}", mutant_at_generation_k(k), model, (1, 2)))
            out.append(Instance(f"lineage/{mname}/k={k}", root_lineage_mutant(k), model, (1, 2)))
            out.append(
                Instance(f"spont4/{mname}/k={k}", spontaneous_mutation_4class(k), model, (1, 2))
            )
    return out


def faulty_instance() -> Instance:
    """Tables built with the lineage predicate while trees are classified by the
    any-mutant predicate; the check must fail."""
    model = _two_type_models()["mut-a"]
    return Instance(
        "injected-fault/mutant-vs-lineage/k=2",
        mutant_at_generation_k(2),
        model,
        (2,),
        table_event=root_lineage_mutant(2),
    )


def verify_instance(inst: Instance, guard: int = ENUMERATION_GUARD, tol: float = 1e-10) -> InstanceResult:
    """Compare brute force and construction for every root type and every class."""
    start = time.perf_counter()
    event = inst.event
    try:
        for t in inst.root_types:
            size = count_trees(t, 0, event.k, inst.model)
            if size > guard:
                return InstanceResult(
                    inst.name, "skip", note=f"{size} trees exceed guard {guard}",
                    seconds=time.perf_counter() - start,
                )
    except UnsupportedModelError as exc:
        return InstanceResult(inst.name, "skip", note=str(exc))
    table_src = inst.table_event or event
    tables = build_tables(table_src.partition, event.k, inst.model)
    scorer = _TildeScorer(event, inst.model, tables)
    worst = 0
    checked = 0
    for t in inst.root_types:
        brute: dict[int, dict] = {}
        built: dict[int, dict] = {}
        for tree, mass in enumerate_trees(t, 0, event.k, inst.model, limit=None):
            classes = event.partition.node_classes(tree, event.k)
            i = classes[(id(tree), event.k)]
            key = format_tree(tree)
            brute.setdefault(i, {})[key] = mass
            # the product formula vanishes off the root's class, so score only there
            q = scorer._q(tree, 0, i, classes)
            if q:
                built.setdefault(i, {})[key] = q
        for i in set(brute) | set(built):
            members = brute.get(i, {})
            total = sum(members.values())
            if not total:
                continue
            cond = {key: mass / total for key, mass in members.items() if mass}
            worst = max(worst, total_variation(cond, built.get(i, {})))
            checked += 1
    tv = float(worst)
    status = "pass" if tv < tol else "fail"
    return InstanceResult(inst.name, status, tv, checked, seconds=time.perf_counter() - start)


def run_grid(instances, guard: int = ENUMERATION_GUARD, tol: float = 1e-10) -> list[InstanceResult]:
    return [verify_instance(inst, guard, tol) for inst in instances]


def format_report(results: list[InstanceResult]) -> str:
    width = max([len(r.name) for r in results] + [8])
    lines = [f"{'instance':<{width}}  status  classes  max TV"]
    for r in results:
        tv = "-" if r.status == "skip" else f"{r.tv:.3g}"
        note = f"  ({r.note})" if r.note else ""
        lines.append(f"{r.name:<{width}}  {r.status.upper():<6}  {r.checked:>7}  {tv}{note}")
    ran = [r for r in results if r.status != "skip"]
    worst = max((r.tv for r in ran), default=0.0)
    failed = sum(r.status == "fail" for r in results)
    skipped = sum(r.status == "skip" for r in results)
    lines.append(
        f"{len(results)} instances: {len(ran) - failed} passed, {failed} failed, "
        f"{skipped} skipped; worst TV {worst:.3g}"
    )
    return "\n".join(lines)
