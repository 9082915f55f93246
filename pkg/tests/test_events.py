import pytest

from condgw.core import enumerate_trees, generation_sizes, height, iter_nodes, parse_tree
from condgw.events import (
    BUILDERS,
    NotAPartitionError,
    RecursivePartition,
    exact_height,
    format_annotated,
    generation_size,
    mutant_at_generation_k,
    root_lineage_mutant,
    spontaneous_mutation_4class,
    survival_event,
    trivial_event,
    validate_partition,
)
from condgw.predicates import entry, row_sum


def types_at(tree, depth):
    return [n.type for n, d in iter_nodes(tree) if d == depth]


def mutant_chain(tree, k):
    """A chain of type-1 nodes from depth 1 down to depth k.

    Class predicates only see the children, so the root's own type never
    matters; at k = 0 the leaf class is decided by the type.
    """
    if k == 0:
        return tree.type == 1

    def down(node, d):
        if node.type != 1:
            return False
        return d == k or any(down(c, d + 1) for c in node.children)

    return any(down(c, 1) for c in tree.children)


def strict_edges(tree):
    """(parent type, child type) for every parent below the root."""
    out = []
    stack = list(tree.children)
    while stack:
        node = stack.pop()
        for c in node.children:
            out.append((node.type, c.type))
            stack.append(c)
    return out




def test_builders_are_partitions():
    for name, ev in [
        ("trivial", trivial_event(3, 2)),
        ("survival", survival_event(3, 2)),
        ("mutant", mutant_at_generation_k(3)),
        ("lineage", root_lineage_mutant(3)),
        ("spont4", spontaneous_mutation_4class(3)),
        ("gensize", generation_size(3, 3, 2)),
        ("height", exact_height(3, 2)),
    ]:
        report = ev.partition.validate(probe_bound=6)
        assert report.ok and report.exhaustive, name
    assert set(BUILDERS) >= {
        "survival",
        "mutant_at_generation_k",
        "root_lineage_mutant",
        "spontaneous_mutation_4class",
        "generation_size",
        "exact_height",
    }


def test_overlapping_predicates_are_rejected():
    a = row_sum(2, 1, 1, ">=", 1)
    part = RecursivePartition(2, 1, 0, (a, entry(2, 1, 1, 1, "<=", 1)), leaf_classes=(1,))
    report = validate_partition(part, 3)
    assert not report.ok and len(report.holding) == 2
    gap = RecursivePartition(2, 1, 0, (a, entry(2, 1, 2, 1, ">=", 1)), leaf_classes=(1,))
    report = validate_partition(gap, 3)
    assert not report.ok and report.holding == ()
    with pytest.raises(NotAPartitionError):
        from condgw.events import _validated

        _validated(part)


@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_survival_matches_height(zero_one_two, k):
    ev = survival_event(k)
    for tree, _ in enumerate_trees(1, 0, k, zero_one_two):
        assert ev.occurs(tree) == (height(tree) == k)


@pytest.mark.parametrize("G", [0, 1, 2, 3])
@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_generation_size_matches_count(zero_one_two, G, k):
    ev = generation_size(G, k)
    for tree, _ in enumerate_trees(1, 0, k, zero_one_two):
        sizes = generation_sizes(tree) + [0] * (k + 1)
        size = sizes[k]
        assert ev.occurs(tree) == (size == G)
        assert ev.classify(tree) == min(size, G + 1) + 1


@pytest.mark.parametrize("k", [1, 2, 3])
def test_exact_height_matches_height(zero_one_two, k):
    ev = exact_height(k)
    assert ev.k == k + 1
    for tree, _ in enumerate_trees(1, 0, k + 1, zero_one_two):
        h = height(tree)
        assert ev.classify(tree) == (1 if h == k else 2 if h < k else 3)


def test_exact_height_needs_positive_k():
    with pytest.raises(ValueError):
        exact_height(0)


@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_mutant_events(two_type_leveled, k):
    mut, lin = mutant_at_generation_k(k), root_lineage_mutant(k)
    for t in (1, 2):
        for tree, _ in enumerate_trees(t, 0, k, two_type_leveled):
            assert mut.occurs(tree) == (1 in types_at(tree, k))
            assert lin.occurs(tree) == mutant_chain(tree, k)


@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_four_class_characterization(two_type_leveled, k):
    ev = spontaneous_mutation_4class(k)
    seen = set()
    for t in (1, 2):
        for tree, _ in enumerate_trees(t, 0, k, two_type_leveled):
            got = ev.classify(tree)
            seen.add(got)
            below = [n.type for n, d in iter_nodes(tree) if d >= 1]
            if k == 0:
                want = tree.type
            elif any(pt == 2 and ct == 1 for pt, ct in strict_edges(tree)):
                want = 3
            elif mutant_chain(tree, k):
                want = 1
            elif all(x == 2 for x in below):
                want = 2
            else:
                want = 4
            assert got == want, (tree, k)
    if k >= 2:
        assert seen == {1, 2, 3, 4}


def test_format_annotated():
    ev = mutant_at_generation_k(2)
    tree = parse_tree("2(1(1),2)")
    assert format_annotated(tree, ev.partition, 2) == "2:1(1:1(1:1),2:2)"


def test_event_checks():
    with pytest.raises(ValueError):
        survival_event(-1)
    with pytest.raises(ValueError):
        generation_size(-1, 2)
