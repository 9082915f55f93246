"""YAML model/event configuration.

Example::

    theta: 2
    k: 8
    seed: 7
    root_type: 2
    offspring:
      default: {kind: poisson_thinning, mu: [1.0, 1.5], p: [1.0, 1.0e-9]}
      levels:                      # optional, half-open [from, to)
        - from: 0
          to: 2
          kind: explicit
          laws: {1: {"0,0": 1/2, "1,1": 1/2}, 2: {"0,0": 1}}
    event:
      builtin: mutant_at_generation_k      # or an explicit partition:
    # event:
    #   m: 2
    #   k0: 0
    #   leaf_classes: [1, 2]
    #   predicates: ["c[1][1] + c[1][2] >= 1", "c[1][1] + c[1][2] = 0"]
    #   level_predicates: {3: [..., ...]}
    #   target: 1

Probabilities written as ``a/b`` strings are read as exact fractions.
Predicates use the grammar of :mod:`condgw.predicates`. Built-in events
read their generation/height from ``k``; ``generation_size`` also needs
``G`` under ``event``.
"""

from __future__ import annotations

import dataclasses
from fractions import Fraction
from typing import Any

import yaml

from .core import ExplicitOffspring, LevelRanges, OffspringModel, PoissonThinning
from .events import (
    BUILDERS,
    Event,
    NotAPartitionError,
    RecursivePartition,
    exact_height,
    generation_size,
    survival_event,
    trivial_event,
)
from .predicates import PredicateSyntaxError, parse_predicate


class ConfigError(ValueError):
    pass


@dataclasses.dataclass
class ModelConfig:
    theta: int
    k: int
    model: OffspringModel
    event: Event
    seed: int = 0
    root_type: int = 1
    raw: dict = dataclasses.field(default_factory=dict, repr=False)

    def same_model(self, other: "ModelConfig") -> bool:
        a, b = self.event, other.event
        return (
            self.theta == other.theta
            and self.k == other.k
            and self.seed == other.seed
            and self.root_type == other.root_type
            and self.model == other.model
            and a.partition == b.partition
            and (a.k, a.target, a.root_type, a.name) == (b.k, b.target, b.root_type, b.name)
        )


def _line_map(node, path=(), out=None) -> dict:
    out = {} if out is None else out
    out[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for key, value in node.value:
            _line_map(value, path + (key.value,), out)
    elif isinstance(node, yaml.SequenceNode):
        for idx, value in enumerate(node.value):
            _line_map(value, path + (idx,), out)
    return out


class _Ctx:
    def __init__(self, source: str, lines: dict):
        self.source = source
        self.lines = lines

    def fail(self, path: tuple, msg: str):
        # the nearest recorded ancestor carries the line
        p = tuple(str(x) if not isinstance(x, int) else x for x in path)
        while p and p not in self.lines:
            p = p[:-1]
        line = self.lines.get(p, 1)
        where = ".".join(str(x) for x in path) or "<root>"
        raise ConfigError(f"{self.source}:{line}: {where}: {msg}")


def _prob(value, ctx, path):
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError):
            ctx.fail(path, f"not a probability: {value!r}")
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        ctx.fail(path, f"not a probability: {value!r}")
    return Fraction(value) if isinstance(value, int) else float(value)


def _model(block, theta, ctx, path) -> OffspringModel:
    if not isinstance(block, dict) or "kind" not in block:
        ctx.fail(path, "offspring block needs a 'kind'")
    kind = block["kind"]
    try:
        if kind == "poisson_thinning":
            if theta != 2:
                ctx.fail(path, "poisson_thinning is a two-type model")
            return PoissonThinning(block["mu"], block["p"])
        if kind == "explicit":
            laws = {}
            for t, table in (block.get("laws") or {}).items():
                if not isinstance(table, dict):
                    ctx.fail(path + ("laws", t), "law must map 'n1,n2,...' to a probability")
                law = {}
                for counts, mass in table.items():
                    vec = tuple(int(x) for x in str(counts).split(","))
                    law[vec] = _prob(mass, ctx, path + ("laws", t, counts))
                laws[int(t)] = law
            return ExplicitOffspring(theta, laws)
    except KeyError as exc:
        ctx.fail(path, f"missing field {exc}")
    except ConfigError:
        raise
    except ValueError as exc:
        ctx.fail(path, str(exc))
    ctx.fail(path + ("kind",), f"unknown offspring kind {kind!r}")


def _event(block, theta, k, root_type, ctx) -> Event:
    path = ("event",)
    if not isinstance(block, dict):
        ctx.fail(path, "event must be a mapping")
    if "builtin" in block:
        name = block["builtin"]
        if name not in BUILDERS:
            ctx.fail(path + ("builtin",), f"unknown event {name!r}; choose from {sorted(BUILDERS)}")
        try:
            if name == "generation_size":
                if "G" not in block:
                    ctx.fail(path, "generation_size needs G")
                ev = generation_size(int(block["G"]), k, theta)
            elif name in ("survival", "trivial", "exact_height"):
                ev = {"survival": survival_event, "trivial": trivial_event, "exact_height": exact_height}[
                    name
                ](k, theta)
            else:
                if theta != 2:
                    ctx.fail(path, f"{name} is a two-type event")
                ev = BUILDERS[name](k)
        except ConfigError:
            raise
        except ValueError as exc:
            ctx.fail(path, str(exc))
        if "target" in block:
            ev = _replace(ev, ctx, path, target=int(block["target"]))
        return _replace(ev, ctx, path, root_type=root_type)
    for key in ("m", "predicates"):
        if key not in block:
            ctx.fail(path, f"explicit event needs '{key}'")
    m = int(block["m"])
    k0 = int(block.get("k0", 0))
    if k0 != 0:
        ctx.fail(path + ("k0",), "explicit events support k0 = 0 only; use a builtin for deeper bases")

    def preds(texts, p):
        if not isinstance(texts, list) or len(texts) != m:
            ctx.fail(p, f"need a list of {m} predicates")
        out = []
        for idx, text in enumerate(texts):
            try:
                out.append(parse_predicate(str(text), m, theta))
            except PredicateSyntaxError as exc:
                ctx.fail(p + (idx,), str(exc))
        return tuple(out)

    default = preds(block["predicates"], path + ("predicates",))
    per_level = {
        int(lvl): preds(texts, path + ("level_predicates", lvl))
        for lvl, texts in (block.get("level_predicates") or {}).items()
    }
    leaf = tuple(int(c) for c in block.get("leaf_classes", [1] * theta))
    try:
        part = RecursivePartition(
            m, theta, 0, default, per_level, leaf_classes=leaf,
            labels=tuple(block.get("labels", ())),
        )
    except ValueError as exc:
        ctx.fail(path, str(exc))
    report = part.validate(probe_bound=int(block.get("probe_bound", 4)))
    if not report.ok:
        ctx.fail(
            path + ("predicates",),
            f"not a partition at level {report.level}: matrix {report.counterexample} "
            f"satisfies classes {list(report.holding)}",
        )
    try:
        return Event(
            str(block.get("name", "custom")), part, k, int(block.get("target", 1)), root_type,
        )
    except ValueError as exc:
        ctx.fail(path, str(exc))


def _replace(ev, ctx, path, **kw):
    try:
        return dataclasses.replace(ev, **kw)
    except ValueError as exc:
        ctx.fail(path, str(exc))


def loads(text: str, source: str = "<config>") -> ModelConfig:
    try:
        node = yaml.compose(text)
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark else 1
        raise ConfigError(f"{source}:{line}: invalid YAML: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}:1: config must be a mapping")
    ctx = _Ctx(source, _line_map(node) if node is not None else {})
    for key in ("theta", "k", "offspring", "event"):
        if key not in raw:
            ctx.fail((), f"missing '{key}'")
    theta, k = raw["theta"], raw["k"]
    if not isinstance(theta, int) or theta < 1:
        ctx.fail(("theta",), "theta must be a positive integer")
    if not isinstance(k, int) or k < 0:
        ctx.fail(("k",), "k must be a nonnegative integer")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or not 0 <= seed < 2**64:
        ctx.fail(("seed",), "seed must be an unsigned 64-bit integer")
    root_type = raw.get("root_type", 1)
    if not isinstance(root_type, int) or not 1 <= root_type <= theta:
        ctx.fail(("root_type",), f"root_type must be in 1..{theta}")
    off = raw["offspring"]
    if not isinstance(off, dict) or "default" not in off:
        ctx.fail(("offspring",), "offspring needs a 'default' law")
    model = _model(off["default"], theta, ctx, ("offspring", "default"))
    ranges = []
    for idx, block in enumerate(off.get("levels") or []):
        p = ("offspring", "levels", idx)
        if not isinstance(block, dict) or "from" not in block or "to" not in block:
            ctx.fail(p, "level range needs 'from' and 'to'")
        ranges.append((int(block["from"]), int(block["to"]), _model(block, theta, ctx, p)))
    if ranges:
        try:
            model = LevelRanges(model, ranges)
        except ValueError as exc:
            ctx.fail(("offspring", "levels"), str(exc))
    event = _event(raw["event"], theta, k, root_type, ctx)
    return ModelConfig(theta, k, model, event, seed, root_type, raw)


def load(path) -> ModelConfig:
    with open(path) as fh:
        return loads(fh.read(), str(path))


# -- dumping ------------------------------------------------------------------

def _dump_prob(v):
    if isinstance(v, Fraction):
        return str(v)
    return float(v)


def _dump_model(model: OffspringModel) -> dict:
    if isinstance(model, PoissonThinning):
        return {"kind": "poisson_thinning", "mu": list(model.mu), "p": list(model.p)}
    if isinstance(model, ExplicitOffspring):
        if model.level_laws:
            raise ValueError("per-level explicit tables are expressed as level ranges in configs")
        return {
            "kind": "explicit",
            "laws": {
                t: {",".join(map(str, c)): _dump_prob(v) for c, v in law}
                for t, law in model.laws.items()
            },
        }
    raise ValueError(f"cannot serialize {type(model).__name__}")


def to_dict(cfg: ModelConfig) -> dict[str, Any]:
    model = cfg.model
    off: dict[str, Any]
    if isinstance(model, LevelRanges):
        off = {"default": _dump_model(model.default)}
        off["levels"] = [{"from": lo, "to": hi, **_dump_model(m)} for lo, hi, m in model.ranges]
    else:
        off = {"default": _dump_model(model)}
    ev = cfg.event
    if ev.name in BUILDERS:
        event: dict[str, Any] = {"builtin": ev.name}
        if ev.name == "generation_size":
            event["G"] = ev.params["G"]
        event["target"] = ev.target
    else:
        part = ev.partition
        event = {
            "name": ev.name,
            "m": part.m,
            "k0": part.k0,
            "leaf_classes": list(part.leaf_classes),
            "predicates": [str(p) for p in part.predicates],
            "target": ev.target,
        }
        if part.level_predicates:
            event["level_predicates"] = {
                lvl: [str(p) for p in preds] for lvl, preds in part.level_predicates.items()
            }
        if part.labels:
            event["labels"] = list(part.labels)
    return {
        "theta": cfg.theta,
        "k": cfg.k,
        "seed": cfg.seed,
        "root_type": cfg.root_type,
        "offspring": off,
        "event": event,
    }


def dumps(cfg: ModelConfig) -> str:
    return yaml.safe_dump(to_dict(cfg), sort_keys=False, default_flow_style=None)


__all__ = ["ConfigError", "ModelConfig", "load", "loads", "dumps", "to_dict", "NotAPartitionError"]
