"""Boolean combinations of integer-linear constraints on count matrices.

A count matrix with ``m`` classes and ``theta`` types is handled as the flat
row-major tuple of its entries, so entry ``c[i][j]`` (1-based) lives at
``(i - 1) * theta + (j - 1)``.

Text grammar (whitespace-insensitive)::

    pred    := conj ("or" conj)*
    conj    := neg ("and" neg)*
    neg     := "not" neg | "(" pred ")" | "true" | "false" | lin CMP lin
    CMP     := "<=" | ">=" | "=" | "==" | "<" | ">" | "!="
    lin     := ["-"] term (("+" | "-") term)*
    term    := factor ("*" factor)*
    factor  := INT | NAME | "c[" lin "][" lin "]" | "(" lin ")"
             | "sum(" NAME "=" lin ".." lin ("," NAME "=" lin ".." lin)* ";" lin ")"

``NAME`` is a summation variable or one of the constants ``m`` and
``theta``; products need one constant side, so every atom stays linear.
Example: ``sum(i=1..m; (i-1)*c[i][1]) = 3``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator

import numpy as np


class PredicateSyntaxError(ValueError):
    pass


class Predicate:
    def __call__(self, flat) -> bool:
        raise NotImplementedError

    def evaluate_many(self, X: np.ndarray) -> np.ndarray:
        """Vectorized evaluation over the rows of an ``(N, m*theta)`` array."""
        raise NotImplementedError

    def atoms(self) -> Iterator["Atom"]:
        raise NotImplementedError

    def __and__(self, other):
        return And((self, other))

    def __or__(self, other):
        return Or((self, other))

    def __invert__(self):
        return Not(self)


@dataclass(frozen=True)
class Atom(Predicate):
    """``sum(coeffs * entries) op const`` with ``op`` in ``<=``, ``>=``, ``==``."""

    coeffs: tuple[int, ...]
    op: str
    const: int
    theta: int

    def __post_init__(self):
        if self.op not in ("<=", ">=", "=="):
            raise ValueError(f"unknown comparison {self.op!r}")
        terms = tuple((e, w) for e, w in enumerate(self.coeffs) if w)
        object.__setattr__(self, "_terms", terms)

    def value(self, flat) -> int:
        return sum(w * flat[e] for e, w in self._terms)

    def __call__(self, flat):
        s = 0
        for e, w in self._terms:
            s += w * flat[e]
        if self.op == ">=":
            return s >= self.const
        if self.op == "<=":
            return s <= self.const
        return s == self.const

    def evaluate_many(self, X):
        s = X @ np.asarray(self.coeffs, dtype=np.int64)
        if self.op == ">=":
            return s >= self.const
        if self.op == "<=":
            return s <= self.const
        return s == self.const

    def atoms(self):
        yield self

    def __str__(self):
        parts = []
        for e, w in self._terms:
            i, j = divmod(e, self.theta)
            entry = f"c[{i + 1}][{j + 1}]"
            mag = abs(w)
            body = entry if mag == 1 else f"{mag}*{entry}"
            if not parts:
                parts.append(body if w > 0 else f"-{body}")
            else:
                parts.append(f"+ {body}" if w > 0 else f"- {body}")
        lhs = " ".join(parts) if parts else "0"
        op = "=" if self.op == "==" else self.op
        return f"{lhs} {op} {self.const}"


@dataclass(frozen=True)
class And(Predicate):
    parts: tuple[Predicate, ...]

    def __call__(self, flat):
        return all(p(flat) for p in self.parts)

    def evaluate_many(self, X):
        out = np.ones(len(X), dtype=bool)
        for p in self.parts:
            out &= p.evaluate_many(X)
        return out

    def atoms(self):
        for p in self.parts:
            yield from p.atoms()

    def __str__(self):
        return " and ".join(_wrap(p, (Or,)) for p in self.parts) if self.parts else "true"


@dataclass(frozen=True)
class Or(Predicate):
    parts: tuple[Predicate, ...]

    def __call__(self, flat):
        return any(p(flat) for p in self.parts)

    def evaluate_many(self, X):
        out = np.zeros(len(X), dtype=bool)
        for p in self.parts:
            out |= p.evaluate_many(X)
        return out

    def atoms(self):
        for p in self.parts:
            yield from p.atoms()

    def __str__(self):
        return " or ".join(_wrap(p, (And,)) for p in self.parts) if self.parts else "false"


@dataclass(frozen=True)
class Not(Predicate):
    inner: Predicate

    def __call__(self, flat):
        return not self.inner(flat)

    def evaluate_many(self, X):
        return ~self.inner.evaluate_many(X)

    def atoms(self):
        yield from self.inner.atoms()

    def __str__(self):
        return f"not {_wrap(self.inner, (And, Or, Atom))}"


@dataclass(frozen=True)
class Const(Predicate):
    value: bool

    def __call__(self, flat):
        return self.value

    def evaluate_many(self, X):
        return np.full(len(X), self.value, dtype=bool)

    def atoms(self):
        return iter(())

    def __str__(self):
        return "true" if self.value else "false"


TRUE = Const(True)
FALSE = Const(False)


def _wrap(p: Predicate, kinds) -> str:
    return f"({p})" if isinstance(p, kinds) else str(p)


def linear(m: int, theta: int, weights: dict[tuple[int, int], int], op: str, const: int) -> Atom:
    """Atom from ``{(i, j): weight}`` with 1-based class/type indices."""
    coeffs = [0] * (m * theta)
    for (i, j), w in weights.items():
        if not (1 <= i <= m and 1 <= j <= theta):
            raise ValueError(f"entry c[{i}][{j}] outside a {m}x{theta} matrix")
        coeffs[(i - 1) * theta + (j - 1)] += int(w)
    return Atom(tuple(coeffs), {"=": "==", "==": "=="}.get(op, op), int(const), theta)


def row_sum(m: int, theta: int, i: int, op: str, const: int) -> Atom:
    """Number of children in class ``i`` (any type) compared with ``const``."""
    return linear(m, theta, {(i, j): 1 for j in range(1, theta + 1)}, op, const)


def entry(m: int, theta: int, i: int, j: int, op: str, const: int) -> Atom:
    return linear(m, theta, {(i, j): 1}, op, const)


def saturation_bounds(preds, size: int) -> list[int] | None:
    """Per-entry caps beyond which no atom can change its truth value.

    Only available when every atom has nonnegative integer coefficients: then
    an entry with a positive coefficient that exceeds ``const`` already
    decides the atom, and clipping it at ``const + 1`` preserves every
    truth value. Entries absent from all atoms are irrelevant (cap 0).
    Returns None when some atom has a negative coefficient.
    """
    caps = [0] * size
    for pred in preds:
        for atom in pred.atoms():
            if any(w < 0 for w in atom.coeffs):
                return None
            for e, w in enumerate(atom.coeffs):
                if w > 0:
                    caps[e] = max(caps[e], atom.const + 1)
    return caps


# -- parser -------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>\.\.|<=|>=|==|!=|[-+*()\[\];,=<>]))"
)
_CMP = {"<=", ">=", "=", "==", "<", ">", "!="}
_KEYWORDS = {"and", "or", "not", "true", "false", "sum", "c"}


class _Lin:
    """Linear form: coefficients per flat entry plus a constant."""

    __slots__ = ("coef", "const")

    def __init__(self, coef=None, const=0):
        self.coef = coef or {}
        self.const = const

    def is_const(self):
        return not any(self.coef.values())

    def add(self, other, sign=1):
        coef = dict(self.coef)
        for e, w in other.coef.items():
            coef[e] = coef.get(e, 0) + sign * w
        return _Lin(coef, self.const + sign * other.const)

    def scale(self, s):
        return _Lin({e: w * s for e, w in self.coef.items()}, self.const * s)


class _Parser:
    def __init__(self, text: str, m: int, theta: int):
        self.text = text
        self.m = m
        self.theta = theta
        self.tokens: list[tuple[str, str, int]] = []
        pos = 0
        while pos < len(text):
            if text[pos:].strip() == "":
                break
            match = _TOKEN.match(text, pos)
            if not match:
                self.fail(f"unexpected character {text[pos:].lstrip()[:1]!r}", pos)
            kind = match.lastgroup
            self.tokens.append((kind, match.group(kind), match.start(kind)))
            pos = match.end()
        self.i = 0

    def fail(self, msg, pos=None):
        if pos is None:
            pos = self.tokens[self.i][2] if self.i < len(self.tokens) else len(self.text)
        raise PredicateSyntaxError(f"{msg} at offset {pos} in predicate {self.text!r}")

    def peek(self, off=0):
        j = self.i + off
        return self.tokens[j][1] if j < len(self.tokens) else None

    def take(self, expected=None):
        if self.i >= len(self.tokens):
            self.fail(f"expected {expected!r}" if expected else "unexpected end")
        tok = self.tokens[self.i][1]
        if expected is not None and tok != expected:
            self.fail(f"expected {expected!r}, found {tok!r}")
        self.i += 1
        return tok

    def parse(self) -> Predicate:
        if not self.tokens:
            self.fail("empty predicate")
        p = self.pred()
        if self.i != len(self.tokens):
            self.fail(f"unexpected {self.peek()!r}")
        return p

    def pred(self):
        parts = [self.conj()]
        while self.peek() == "or":
            self.take()
            parts.append(self.conj())
        return parts[0] if len(parts) == 1 else Or(tuple(parts))

    def conj(self):
        parts = [self.neg()]
        while self.peek() == "and":
            self.take()
            parts.append(self.neg())
        return parts[0] if len(parts) == 1 else And(tuple(parts))

    def neg(self):
        tok = self.peek()
        if tok == "not":
            self.take()
            return Not(self.neg())
        if tok in ("true", "false"):
            self.take()
            return TRUE if tok == "true" else FALSE
        if tok == "(":
            save = self.i
            try:
                self.take("(")
                p = self.pred()
                self.take(")")
                if self.peek() not in _CMP and self.peek() not in ("+", "-", "*"):
                    return p
            except PredicateSyntaxError:
                pass
            self.i = save
        return self.atom()

    def atom(self):
        lhs = self.lin({})
        op = self.peek()
        if op not in _CMP:
            self.fail(f"expected a comparison, found {op!r}")
        self.take()
        rhs = self.lin({})
        form = lhs.add(rhs, -1)
        coeffs = [0] * (self.m * self.theta)
        for e, w in form.coef.items():
            coeffs[e] += w
        const = -form.const
        mk = lambda o, c: Atom(tuple(coeffs), o, c, self.theta)
        if op in ("=", "=="):
            return mk("==", const)
        if op == "!=":
            return Not(mk("==", const))
        if op == "<":
            return mk("<=", const - 1)
        if op == ">":
            return mk(">=", const + 1)
        return mk(op, const)

    def lin(self, env):
        sign = 1
        if self.peek() == "-":
            self.take()
            sign = -1
        out = self.term(env).scale(sign)
        while self.peek() in ("+", "-"):
            s = 1 if self.take() == "+" else -1
            out = out.add(self.term(env), s)
        return out

    def term(self, env):
        out = self.factor(env)
        while self.peek() == "*":
            self.take()
            rhs = self.factor(env)
            if out.is_const():
                out = rhs.scale(out.const)
            elif rhs.is_const():
                out = out.scale(rhs.const)
            else:
                self.fail("product of two matrix entries is not linear")
        return out

    def index(self, env, bound, what):
        form = self.lin(env)
        if not form.is_const():
            self.fail(f"{what} index must be constant")
        if not 1 <= form.const <= bound:
            self.fail(f"{what} index {form.const} outside 1..{bound}")
        return form.const

    def factor(self, env):
        if self.i >= len(self.tokens):
            self.fail("unexpected end")
        kind, tok, _ = self.tokens[self.i]
        if kind == "num":
            self.take()
            return _Lin(const=int(tok))
        if tok == "(":
            self.take()
            out = self.lin(env)
            self.take(")")
            return out
        if tok == "c":
            self.take()
            self.take("[")
            i = self.index(env, self.m, "class")
            self.take("]")
            self.take("[")
            j = self.index(env, self.theta, "type")
            self.take("]")
            return _Lin({(i - 1) * self.theta + (j - 1): 1})
        if tok == "sum":
            return self.summation(env)
        if kind == "name" and tok not in _KEYWORDS:
            self.take()
            if tok in env:
                return _Lin(const=env[tok])
            if tok == "m":
                return _Lin(const=self.m)
            if tok == "theta":
                return _Lin(const=self.theta)
            self.fail(f"unknown name {tok!r}")
        self.fail(f"unexpected {tok!r}")

    def summation(self, env):
        self.take("sum")
        self.take("(")
        ranges = []
        while True:
            kind, name, _ = self.tokens[self.i] if self.i < len(self.tokens) else (None, None, 0)
            if kind != "name" or name in _KEYWORDS or name in ("m", "theta"):
                self.fail("expected a summation variable")
            self.take()
            self.take("=")
            lo = self.lin(env)
            self.take("..")
            hi = self.lin(env)
            if not (lo.is_const() and hi.is_const()):
                self.fail("summation bounds must be constant")
            ranges.append((name, lo.const, hi.const))
            if self.peek() == ",":
                self.take()
                continue
            self.take(";")
            break
        body_start = self.i
        total = _Lin()
        end = None

        def expand(depth, scope):
            nonlocal total, end
            if depth == len(ranges):
                self.i = body_start
                total = total.add(self.lin(scope))
                end = self.i
                return
            name, lo, hi = ranges[depth]
            for v in range(lo, hi + 1):
                expand(depth + 1, {**scope, name: v})

        expand(0, dict(env))
        if end is None:
            # empty range: parse the body once for syntax, discard the value
            self.i = body_start
            self.lin({**env, **{r[0]: r[1] for r in ranges}})
            end = self.i
        self.i = end
        self.take(")")
        return total


def parse_predicate(text: str, m: int, theta: int) -> Predicate:
    return _Parser(text, m, theta).parse()
