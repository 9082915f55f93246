"""Mean matrices of conditioned trees and expected generation compositions.

A conditioned tree is again a multi-type GW tree whose "types" are
(class, type) pairs. States are ordered type-major: state
``(i, t)`` has index ``(t - 1) * m + (i - 1)``. For the two-class mutation
model this is the order mutant/class 1, mutant/class 2, non-mutant/class 1,
non-mutant/class 2.

Column ``s`` of the level-``l`` mean matrix is the expected number of
children in each state of a node in state ``s`` at level ``l``; expected
generation compositions are products of these matrices applied to the
root's indicator vector.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import yaml

from .core import PoissonThinning
from .events import ImpossibleEventError
from .predicates import Not, row_sum
from .probs import ClassProbTable, extinction_probability, mutant_curves, poisson_mutant_table
from .sampler import SamplerContext


def state_index(i: int, t: int, m: int) -> int:
    return (t - 1) * m + (i - 1)


def state_labels(m: int, theta: int) -> list[str]:
    return [f"class{i}/type{t}" for t in range(1, theta + 1) for i in range(1, m + 1)]


def _to_states(flat: np.ndarray, m: int, theta: int) -> np.ndarray:
    """Class-major count-matrix vector -> type-major state vector."""
    return np.asarray(flat, dtype=float).reshape(m, theta).T.reshape(-1)


@dataclass
class MeanMatrix:
    """``matrices[l]`` for root levels ``l = 0..L-1``; ``used[l]`` marks live states."""

    m: int
    theta: int
    matrices: list[np.ndarray]
    used: list[np.ndarray]

    @property
    def labels(self) -> list[str]:
        return state_labels(self.m, self.theta)

    def __len__(self) -> int:
        return len(self.matrices)


@dataclass
class GenerationExpectation:
    """``e[l]`` is the expected state vector of generation ``l``."""

    m: int
    theta: int
    e: np.ndarray

    def of_type(self, t: int) -> np.ndarray:
        lo = (t - 1) * self.m
        return self.e[:, lo : lo + self.m].sum(axis=1)

    def of_class(self, i: int) -> np.ndarray:
        return self.e[:, i - 1 :: self.m].sum(axis=1)

    def total(self) -> np.ndarray:
        return self.e.sum(axis=1)


# -- generic route, from the conditioned offspring tables ----------------------

def _is_mutant_poisson(ctx: SamplerContext) -> bool:
    part = ctx.partition
    if not isinstance(ctx.model, PoissonThinning) or part.m != 2 or part.k0 != 0:
        return False
    if part.leaf_classes != (1, 2) or part.level_predicates:
        return False
    first, second = part.predicates
    return first == row_sum(2, 2, 1, ">=", 1) and second == Not(first)


def conditional_offspring_mean(
    t: int, l: int, i: int, ctx: SamplerContext, method: str = "table"
) -> np.ndarray:
    """Expected children by state of a type-``t`` node at level ``l`` in class ``i``.

    ``method="table"`` averages the conditioned offspring law; ``"closed"``
    uses the Poisson identity for the mutant event (class 1 means at least
    one class-1 child, so class-1 child counts are inflated by ``1 / p`` and
    the independent class-2 counts keep their plain means).
    """
    if not ctx.probs.prob(t, l, i):
        raise ImpossibleEventError(f"class {i} has probability 0 for type {t} at level {l}")
    m, theta = ctx.partition.m, ctx.partition.theta
    if method == "table":
        return _to_states(ctx.cond.mean(t, l, i), m, theta)
    if method != "closed":
        raise ValueError(f"unknown method {method!r}")
    if not _is_mutant_poisson(ctx):
        raise ValueError("closed form needs the Poisson mutation model and the mutant event")
    return _poisson_mean(t, l, i, ctx.probs, ctx.model.mu, ctx.model.p)


def _poisson_mean(t, l, i, probs: ClassProbTable, mu, p) -> np.ndarray:
    rate = (mu[t - 1] * p[t - 1], mu[t - 1] * (1 - p[t - 1]))
    out = np.zeros(4)
    for j in (1, 2):
        plain1 = probs.prob(j, l + 1, 1) * rate[j - 1]
        plain2 = probs.prob(j, l + 1, 2) * rate[j - 1]
        out[state_index(1, j, 2)] = plain1 / probs.prob(t, l, 1) if i == 1 else 0.0
        out[state_index(2, j, 2)] = plain2
    return out


def build_mean_matrices(ctx: SamplerContext, method: str = "table") -> MeanMatrix:
    """One matrix per level above the base layer; impossible states get zero columns."""
    m, theta = ctx.partition.m, ctx.partition.theta
    size = m * theta
    mats, used = [], []
    for l in range(ctx.top):
        M = np.zeros((size, size))
        live = np.zeros(size, dtype=bool)
        for t in range(1, theta + 1):
            for i in range(1, m + 1):
                if ctx.probs.prob(t, l, i):
                    s = state_index(i, t, m)
                    M[:, s] = conditional_offspring_mean(t, l, i, ctx, method)
                    live[s] = True
        mats.append(M)
        used.append(live)
    return MeanMatrix(m, theta, mats, used)


def poisson_mutant_mean_matrices(
    k: int, mu: Sequence[float], p: Sequence[float], probs: ClassProbTable | None = None
) -> MeanMatrix:
    """Closed-form mean matrices for the mutant event, without any enumeration."""
    probs = probs or poisson_mutant_table(k, mu, p)
    mats, used = [], []
    for l in range(k):
        M = np.zeros((4, 4))
        live = np.zeros(4, dtype=bool)
        for t in (1, 2):
            for i in (1, 2):
                if probs.prob(t, l, i):
                    s = state_index(i, t, 2)
                    M[:, s] = _poisson_mean(t, l, i, probs, mu, p)
                    live[s] = True
        mats.append(M)
        used.append(live)
    return MeanMatrix(2, 2, mats, used)


def expected_counts(
    start: tuple[int, int], M: MeanMatrix, levels: int | None = None
) -> GenerationExpectation:
    """Expected state vectors of generations ``0..levels`` from a root in state
    ``start = (class, type)``."""
    i, t = start
    size = M.m * M.theta
    levels = len(M) if levels is None else levels
    if levels > len(M):
        raise ValueError(f"only {len(M)} mean matrices available")
    s = state_index(i, t, M.m)
    if len(M) and not M.used[0][s]:
        raise ImpossibleEventError(f"start state {start} has probability 0")
    e = np.zeros((levels + 1, size))
    e[0, s] = 1.0
    for l in range(levels):
        e[l + 1] = M.matrices[l] @ e[l]
    return GenerationExpectation(M.m, M.theta, e)


def unconditioned_expected_sizes(k: int, mu: Sequence[float], p: Sequence[float], root_type: int = 2):
    """Expected generation sizes of the plain two-type Poisson model."""
    A = np.array([[mu[0] * p[0], mu[1] * p[1]], [mu[0] * (1 - p[0]), mu[1] * (1 - p[1])]])
    v = np.zeros(2)
    v[root_type - 1] = 1.0
    out = [v.sum()]
    for _ in range(k):
        v = A @ v
        out.append(v.sum())
    return np.asarray(out)


# -- figure data --------------------------------------------------------------

def load_figure_params(path=None) -> dict:
    """Parameters of the mutation example; defaults to the bundled file."""
    if path is None:
        text = importlib.resources.files("condgw").joinpath("data/mutation_model.yaml").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    return yaml.safe_load(text)


def figure_data(figure_id: int, params: dict | None = None) -> dict[str, tuple[list[str], list[list]]]:
    """Series needed to redraw a figure, as ``{name: (header, rows)}``."""
    params = params or load_figure_params()
    mu, p = params["mu"], params["p"]
    if figure_id == 1:
        kmax = params["figure1"]["kmax"]
        curves = mutant_curves(kmax, mu, p)
        survive = 1 - extinction_probability(mu[1])
        rows = [[k, curves[k - 1, 0], curves[k - 1, 1], survive] for k in range(1, kmax + 1)]
        return {"figure1": (["k", "dashed_mutant_root", "solid_nonmutant_root", "dotted_survival"], rows)}
    if figure_id == 2:
        k = params["figure2"]["k"]
        M = poisson_mutant_mean_matrices(k, mu, p)
        solid = expected_counts((1, 2), M).of_type(1)
        dashed = expected_counts((1, 1), M).of_type(1)
        rows = [[l, solid[l], dashed[l]] for l in range(k + 1)]
        return {"figure2": (["generation", "solid_nonmutant_root", "dashed_mutant_root"], rows)}
    if figure_id == 3:
        out = {}
        for k in params["figure3"]["k"]:
            M = poisson_mutant_mean_matrices(k, mu, p)
            cond = expected_counts((2, 2), M).total()
            plain = unconditioned_expected_sizes(k, mu, p, root_type=2)
            rows = [[l, cond[l], plain[l]] for l in range(k + 1)]
            out[f"figure3_k{k}"] = (["generation", "conditioned_size", "unconditioned_size"], rows)
        return out
    raise ValueError(f"unknown figure {figure_id}")


def write_csv(path, header: list[str], rows: list[list]) -> None:
    """Comma-separated with ``%.12g`` numbers."""
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(v if isinstance(v, str) else "%.12g" % v for v in row) + "\n")
