import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from condgw.predicates import (
    FALSE,
    TRUE,
    Atom,
    PredicateSyntaxError,
    entry,
    linear,
    parse_predicate,
    row_sum,
    saturation_bounds,
)


def grid(m, theta, top=3):
    return [list(v) for v in itertools.product(range(top + 1), repeat=m * theta)]


def test_parse_simple_atoms():
    p = parse_predicate("c[1][1] + c[1][2] >= 1", 2, 2)
    assert p == row_sum(2, 2, 1, ">=", 1)
    assert str(p) == "c[1][1] + c[1][2] >= 1"
    assert p([0, 1, 0, 0]) and not p([0, 0, 3, 3])


def test_parse_sum_and_symbols():
    p = parse_predicate("sum(i=1..m, j=1..theta; c[i][j]) = 2", 2, 2)
    q = linear(2, 2, {(i, j): 1 for i in (1, 2) for j in (1, 2)}, "==", 2)
    for x in grid(2, 2, 2):
        assert p(x) == q(x)


def test_weighted_sum_matches_generation_size_weights():
    p = parse_predicate("sum(i=1..3; (i - 1) * c[i][1]) == 2", 3, 1)
    for x in grid(3, 1):
        assert p(x) == (x[1] + 2 * x[2] == 2)


@pytest.mark.parametrize(
    "text,fn",
    [
        ("c[1][1] < 2", lambda x: x[0] < 2),
        ("c[1][1] > 2", lambda x: x[0] > 2),
        ("c[1][1] != c[2][1]", lambda x: x[0] != x[1]),
        ("not c[1][1] = 0 and c[2][1] >= 1", lambda x: x[0] != 0 and x[1] >= 1),
        ("c[1][1] = 0 or c[2][1] = 0 and c[1][1] = 1", lambda x: x[0] == 0 or (x[1] == 0 and x[0] == 1)),
        ("(c[1][1] + 1) * 2 <= 4", lambda x: x[0] <= 1),
        ("2 * c[1][1] - c[2][1] >= 0", lambda x: 2 * x[0] - x[1] >= 0),
        ("true", lambda x: True),
        ("false or (c[1][1] = 3)", lambda x: x[0] == 3),
    ],
)
def test_semantics(text, fn):
    p = parse_predicate(text, 2, 1)
    for x in grid(2, 1, 4):
        assert p(x) == fn(x), (text, x)


@pytest.mark.parametrize(
    "text,fragment",
    [
        ("c[1][1] >= ", "end"),
        ("c[3][1] >= 1", "class index 3"),
        ("c[1][1] => 1", "'>'"),
        ("c[1][1] >= 1 andd c[1][1] = 0", "'andd'"),
        ("c[1][1] * c[1][1] = 1", "linear"),
        ("c[1][1]", "comparison"),
    ],
)
def test_syntax_errors_name_the_expression(text, fragment):
    with pytest.raises(PredicateSyntaxError) as exc:
        parse_predicate(text, 2, 1)
    msg = str(exc.value)
    assert text in msg and fragment in msg


@given(st.lists(st.integers(0, 5), min_size=4, max_size=4))
def test_str_roundtrip_preserves_meaning(x):
    preds = [
        parse_predicate("c[1][1] + 2 * c[2][2] >= 3 or not c[1][2] = c[2][1]", 2, 2),
        entry(2, 2, 1, 2, "==", 0) & ~row_sum(2, 2, 2, "<=", 1),
        TRUE,
        FALSE | entry(2, 2, 2, 2, ">=", 1),
    ]
    for p in preds:
        q = parse_predicate(str(p), 2, 2)
        assert q(x) == p(x)


@given(st.lists(st.lists(st.integers(0, 6), min_size=4, max_size=4), min_size=1, max_size=30))
def test_evaluate_many_agrees_with_call(rows):
    p = parse_predicate("(c[1][1] >= 1 and c[2][2] = 0) or c[1][2] - c[2][1] > 1", 2, 2)
    X = np.asarray(rows)
    assert p.evaluate_many(X).tolist() == [p(r) for r in rows]


def test_saturation_bounds():
    a = linear(2, 1, {(1, 1): 1, (2, 1): 2}, "==", 3)
    b = entry(2, 1, 2, 1, ">=", 1)
    assert saturation_bounds([a, b], 2) == [4, 4]
    neg = Atom((1, -1), "<=", 0, 1)
    assert saturation_bounds([neg], 2) is None


def test_atom_shape_checks():
    with pytest.raises(ValueError):
        Atom((1, 2), "<", 0, 1)
    with pytest.raises(ValueError):
        linear(2, 2, {(3, 1): 1}, ">=", 1)
