"""Command-line front end.

Subcommands::

    condgw probs   --config FILE [--out DIR] [--dump-config]
    condgw sample  --config FILE [--n N] [--class I] [--seed S] [--threads T]
                   [--annotate] [--check] [--out DIR] [--dump-config]
    condgw verify  [--preset full|quick] [--inject-fault] [--guard N]
    condgw figures [--figure 1|2|3|all] [--params FILE] [--out DIR]

Exit codes: 0 ok, 2 config error, 3 impossible event, 4 verification failure.

Config files are YAML; see :mod:`condgw.config` for the layout. Predicates
are written as text::

    pred := pred "or" pred | pred "and" pred | "not" pred | "(" pred ")"
          | "true" | "false" | expr OP expr
    OP   := "<=" | ">=" | "<" | ">" | "=" | "==" | "!="
    expr := term (("+" | "-") term)*
    term := [INT "*"] atom | INT
    atom := "c[" i "][" j "]" | "m" | "theta" | "(" expr ")"
          | "sum(" "i=" a ".." b ["," "j=" a ".." b] ";" expr ")"

``c[i][j]`` counts the children of type ``j`` in class ``i``. Example:
``sum(j=1..2; c[1][j]) >= 1``.

``sample`` writes one tree per line in the ``t(c1,c2,...)`` format; with
``--annotate`` each node carries its class as ``t:i``. Without ``--class``
the class of each draw comes from the class-probability coin first. Draw
``r`` always uses random stream ``(seed, r)``, so the output does not depend
on ``--threads``.
"""

from __future__ import annotations

import argparse
import os
import sys
import warnings
from functools import partial

from . import config as cfgmod
from .analysis import figure_data, load_figure_params, write_csv
from .core import UnsupportedModelError, format_tree
from .events import ImpossibleEventError, NotAPartitionError, format_annotated
from .oracle import ENUMERATION_GUARD, default_grid, faulty_instance, format_report, run_grid
from .probs import TruncationWarning, build_tables
from .sampler import SamplerContext, sample_batch, sample_conditioned_class, sample_tilde

EXIT_OK, EXIT_CONFIG, EXIT_IMPOSSIBLE, EXIT_VERIFY = 0, 2, 3, 4


def _out_stream(out_dir, name):
    if out_dir is None:
        return sys.stdout, False
    os.makedirs(out_dir, exist_ok=True)
    return open(os.path.join(out_dir, name), "w", newline="\n"), True


def _load(args):
    cfg = cfgmod.load(args.config)
    if args.dump_config:
        sys.stdout.write(cfgmod.dumps(cfg))
        return cfg, True
    return cfg, False


def cmd_probs(args) -> int:
    cfg, done = _load(args)
    if done:
        return EXIT_OK
    probs, _ = build_tables(cfg.event, model=cfg.model)
    fh, close = _out_stream(args.out, "probs.csv")
    try:
        probs.to_csv(fh)
    finally:
        if close:
            fh.close()
    return EXIT_OK


def _draw_one(rng, ctx, t, cls, annotate, check):
    if cls is None:
        _, tree = sample_tilde(t, 0, rng, ctx)
    else:
        tree = sample_conditioned_class(t, 0, cls, rng, ctx, check=check)
    if annotate:
        return format_annotated(tree, ctx.partition, ctx.k)
    return format_tree(tree)


def cmd_sample(args) -> int:
    cfg, done = _load(args)
    if done:
        return EXIT_OK
    seed = cfg.seed if args.seed is None else args.seed
    ctx = SamplerContext.build(cfg.event, cfg.model)
    t = cfg.root_type
    if args.cls is not None:
        if not 1 <= args.cls <= ctx.partition.m:
            raise cfgmod.ConfigError(f"--class {args.cls} outside 1..{ctx.partition.m}")
        ctx.require(t, 0, args.cls)
    draw = partial(_draw_one, ctx=ctx, t=t, cls=args.cls, annotate=args.annotate, check=args.check)
    lines = sample_batch(draw, args.n, seed, threads=args.threads)
    fh, close = _out_stream(args.out, "samples.txt")
    try:
        for line in lines:
            fh.write(line + "\n")
    finally:
        if close:
            fh.close()
    return EXIT_OK


def cmd_verify(args) -> int:
    instances = default_grid(args.preset)
    if args.inject_fault:
        instances.append(faulty_instance())
    results = run_grid(instances, guard=args.guard)
    print(format_report(results))
    return EXIT_VERIFY if any(r.status == "fail" for r in results) else EXIT_OK


def cmd_figures(args) -> int:
    params = load_figure_params(args.params)
    ids = (1, 2, 3) if args.figure == "all" else (int(args.figure),)
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    for fid in ids:
        for name, (header, rows) in figure_data(fid, params).items():
            path = os.path.join(out, f"{name}.csv")
            write_csv(path, header, rows)
            print(path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="condgw", description="Conditioned multi-type Galton-Watson trees")
    sub = ap.add_subparsers(dest="command", required=True)

    def with_config(p):
        p.add_argument("--config", required=True, help="YAML model/event file")
        p.add_argument("--out", help="output directory (default: stdout)")
        p.add_argument("--dump-config", action="store_true", help="print the normalized config and exit")

    p = sub.add_parser("probs", help="class-probability table as CSV")
    with_config(p)
    p.set_defaults(func=cmd_probs)

    p = sub.add_parser("sample", help="draw trees, one per line")
    with_config(p)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--class", dest="cls", type=int, help="condition on this class")
    p.add_argument("--seed", type=int, help="overrides the config seed")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--annotate", action="store_true", help="print node classes as t:i")
    p.add_argument("--check", action="store_true", help="re-classify every draw")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("verify", help="brute-force check of the construction")
    p.add_argument("--preset", choices=("full", "quick"), default="full")
    p.add_argument("--inject-fault", action="store_true", help="add an instance that must fail")
    p.add_argument("--guard", type=int, default=ENUMERATION_GUARD, help="largest enumeration attempted")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("figures", help="series data of the mutation example")
    p.add_argument("--figure", choices=("1", "2", "3", "all"), default="all")
    p.add_argument("--params", help="parameter YAML (default: bundled)")
    p.add_argument("--out", help="output directory (default: .)")
    p.set_defaults(func=cmd_figures)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "n", 1) < 0 or getattr(args, "threads", 1) < 1:
        print("error: --n must be >= 0 and --threads >= 1", file=sys.stderr)
        return EXIT_CONFIG
    seed = getattr(args, "seed", None)
    if seed is not None and not 0 <= seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always", TruncationWarning)
            return args.func(args)
    except (cfgmod.ConfigError, NotAPartitionError, UnsupportedModelError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ImpossibleEventError as exc:
        print(f"impossible event: {exc}", file=sys.stderr)
        return EXIT_IMPOSSIBLE


if __name__ == "__main__":
    sys.exit(main())
