import math
import time
import warnings
from fractions import Fraction as F

import numpy as np
import pytest

from condgw.core import PoissonThinning, enumerate_trees
from condgw.events import (
    exact_height,
    generation_size,
    mutant_at_generation_k,
    root_lineage_mutant,
    spontaneous_mutation_4class,
    survival_event,
    trivial_event,
)
from condgw.probs import (
    TruncationWarning,
    build_tables,
    closed_form_poisson_step,
    closed_form_table,
    compositions,
    extinction_probability,
    multinomial_pmf,
    mutant_curves,
    poisson_mutant_table,
)


def enumerated_class_probs(event, model, t, l=0):
    out = {}
    for tree, mass in enumerate_trees(t, l, event.k, model):
        i = event.classify(tree, event.k - l)
        out[i] = out.get(i, 0) + mass
    return out


def test_survival_binary_k2(binary):
    probs, cond = build_tables(survival_event(2), model=binary)
    assert probs.prob(1, 0, 1) == F(3, 8)
    assert probs.prob(1, 1, 1) == F(1, 2)
    # a child survives one level with probability 1/2: two survivors 1/4,
    # exactly one 1/2, renormalized by 3/4
    law = dict(cond.law(1, 0, 1))
    assert law == {(2, 0): F(1, 3), (1, 1): F(2, 3)}


def test_survival_conditioned_trees_binary_k2(binary):
    from condgw.oracle import conditioned_bruteforce

    d = conditioned_bruteforce(1, survival_event(2), binary)
    assert d == {"1(1(1,1),1)": F(1, 3), "1(1,1(1,1))": F(1, 3), "1(1(1,1),1(1,1))": F(1, 3)}


EVENTS = [
    lambda k: survival_event(k, 2),
    mutant_at_generation_k,
    root_lineage_mutant,
    spontaneous_mutation_4class,
    lambda k: trivial_event(k, 2),
]


@pytest.mark.parametrize("make", EVENTS)
@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_class_probs_match_enumeration(two_type_leveled, make, k):
    ev = make(k)
    probs, _ = build_tables(ev, model=two_type_leveled)
    for t in (1, 2):
        for l in probs.levels:
            want = enumerated_class_probs(ev, two_type_leveled, t, l)
            got = {i: probs.prob(t, l, i) for i in range(1, ev.m + 1) if probs.prob(t, l, i)}
            assert got == want
            assert sum(probs.layer(l)[t - 1]) == 1


@pytest.mark.parametrize("G", [0, 1, 2])
@pytest.mark.parametrize("k", [1, 2, 3])
def test_single_type_tables(zero_one_two, G, k):
    for ev in (generation_size(G, k), exact_height(k)):
        probs, cond = build_tables(ev, model=zero_one_two)
        assert enumerated_class_probs(ev, zero_one_two, 1) == {
            i: probs.prob(1, 0, i) for i in range(1, ev.m + 1) if probs.prob(1, 0, i)
        }
        for (t, l, i), law in cond.entries.items():
            assert sum(mass for _, mass in law) == 1


def test_exact_height_base_law(zero_one_two):
    probs, cond = build_tables(exact_height(2), model=zero_one_two)
    for (t, i), law in cond.base.items():
        assert sum(mass for _, mass in law) == 1
    # base layer sits at level k - k0 = 1 of a height-3 tree
    assert list(probs.levels) == [0, 1]


def test_generic_matches_closed_form_poisson(mutation_model):
    ev = mutant_at_generation_k(8)
    generic, _ = build_tables(ev, model=mutation_model)
    closed = closed_form_table(ev, mutation_model)
    assert np.max(np.abs(generic.as_array() - closed.as_array())) < 1e-8


def test_generic_matches_closed_form_other_rates():
    model = PoissonThinning([0.8, 1.2], [0.3, 0.05])
    generic, _ = build_tables(mutant_at_generation_k(5), model=model)
    closed = poisson_mutant_table(5, model.mu, model.p)
    assert np.max(np.abs(generic.as_array() - closed.as_array())) < 1e-8


def test_closed_form_step_shape():
    with pytest.raises(ValueError):
        closed_form_poisson_step([[1.0, 0.0]], 1, 1, 1, 1)
    out = closed_form_poisson_step([[1.0, 0.0], [0.0, 1.0]], 1.0, 1.5, 1.0, 0.0)
    assert out[0][0] == pytest.approx(1 - math.exp(-1.0))
    assert out[1][0] == 0.0


def test_mutant_curves_agree_with_tables():
    mu, p = (1.0, 1.5), (1.0, 1e-9)
    curves = mutant_curves(12, mu, p)
    for k in (1, 5, 12):
        table = poisson_mutant_table(k, mu, p)
        assert curves[k - 1, 0] == pytest.approx(table.prob(1, 0, 1), abs=1e-15)
        assert curves[k - 1, 1] == pytest.approx(table.prob(2, 0, 1), abs=1e-15)


def test_critical_mutant_line_decays():
    # a type-1 root is a critical Poisson(1) process of mutants
    curves = mutant_curves(200, (1.0, 1.5), (1.0, 1e-9))
    assert np.all(np.diff(curves[:, 0]) < 0)
    assert curves[-1, 0] < 0.011


def test_extinction_probability():
    t0 = time.perf_counter()
    s = extinction_probability(1.5)
    assert time.perf_counter() - t0 < 1e-3
    assert s == pytest.approx(0.41718, abs=5e-5)
    assert s == pytest.approx(math.exp(1.5 * (s - 1)), abs=1e-12)
    assert extinction_probability(2.0) == pytest.approx(0.2031878699, abs=1e-9)
    assert extinction_probability(1.0) == 1.0
    assert extinction_probability(0.5) == 1.0
    with pytest.raises(ValueError):
        extinction_probability(0.0)


def test_compositions_and_multinomial():
    assert len(list(compositions(3, [True, True, True]))) == 10
    assert list(compositions(2, [True, False])) == [(2, 0)]
    assert list(compositions(1, [False, False])) == []
    assert list(compositions(0, [False, False])) == [(0, 0)]
    assert multinomial_pmf((1, 1), (F(1, 2), F(1, 2))) == F(1, 2)
    total = sum(multinomial_pmf(c, (0.2, 0.3, 0.5)) for c in compositions(4, [True] * 3))
    assert total == pytest.approx(1.0)


def test_csv_output(binary):
    probs, _ = build_tables(survival_event(2), model=binary)
    text = probs.to_csv()
    lines = text.splitlines()
    assert lines[0] == "t,l,i,p"
    assert "1,0,1,0.375" in lines
    assert len(lines) == 1 + 3 * 2


def test_trivial_event_all_ones(mutation_model):
    probs, _ = build_tables(trivial_event(4, 2), model=mutation_model)
    assert all(p == pytest.approx(1.0) for _, _, _, p in probs.rows())


def test_truncation_warning():
    heavy = PoissonThinning([1.0, 1.5], [0.5, 0.5])
    with warnings.catch_warnings():
        warnings.simplefilter("error", TruncationWarning)
        build_tables(mutant_at_generation_k(2), model=heavy)


def test_theta_mismatch(binary):
    with pytest.raises(ValueError):
        build_tables(mutant_at_generation_k(2), model=binary)
