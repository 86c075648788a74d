"""Command-line entry point ``mssp``."""

from __future__ import annotations

import argparse
import csv
import sys
import time

from . import instances as gen
from .autohit import Hyperparams, InitScheme, autohit, lp_baseline
from .coorhit import ProductTooLarge, coord_value, solve_coordinated
from .io import (
    coord_to_json,
    load_instance,
    load_json,
    load_profile,
    save_instance,
    save_json,
    save_profile,
)
from .lift import lift_instance, lift_mdp, lift_profile
from .mdp import InvalidModel, MsspInstance, Profile
from .montecarlo import SimConfig, simulate_profile, write_csv
from .profile_eval import evaluate, exact_mhit_product

BENCH_HEADER = ["instance", "k", "seed", "init", "val", "base", "ratio", "seconds"]


def fmt(x: float) -> str:
    return f"{x:.9g}"


def _csv_list(text: str, cast=int) -> list:
    return [cast(x) for x in text.split(",") if x.strip()]


def cmd_coorhit(args) -> None:
    inst = load_instance(args.instance)
    cs, value = solve_coordinated(inst)
    if args.strategy:
        save_json(coord_to_json(cs), args.strategy)
    if args.check:
        value = coord_value(inst, cs)
    print(fmt(value))


def _hyper(args) -> Hyperparams:
    return Hyperparams(steps=args.steps, epsilon=args.epsilon, gamma=args.gamma,
                       gamma_ratio=args.gamma_ratio, step_size=args.step_size, seed=args.seed)


def cmd_autohit(args) -> None:
    inst = load_instance(args.instance)
    run = autohit(inst, _hyper(args), InitScheme(args.init))
    if args.trace:
        with open(args.trace, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "objective"])
            for step, val in run.trace:
                w.writerow([step, fmt(val)])
    if args.profile:
        save_profile(inst, run.profile, args.profile)
    print(fmt(run.value))


def cmd_eval(args) -> None:
    inst = load_instance(args.instance)
    profile = load_profile(inst, args.profile)
    if args.exact:
        print(fmt(exact_mhit_product(inst, profile)))
        return
    if not profile.memoryless:
        inst, profile = lift_profile(inst, profile)
    print(fmt(evaluate(inst, profile, args.epsilon)))


def _corpus(name: str) -> MsspInstance:
    key, _, arg = name.partition(":")
    if key == "fig1":
        return gen.corpus_fig1()
    if key == "gadget":
        entries = arg.split(",") if arg else ["g0", "g1"]
        return gen.gadget_instance(*entries)
    if key == "randomized":
        return gen.corpus_randomized()
    if key == "memory":
        return gen.corpus_memory_hierarchy(int(arg or 1))[0]
    if key == "price":
        return gen.corpus_price_autonomy(float(arg or 2))
    raise InvalidModel(f"unknown corpus instance {name!r}")


def cmd_gen(args) -> None:
    if args.kind == "grid":
        inst = gen.gen_grid(gen.GridConfig(args.l, args.pc, args.seed, args.k))
    elif args.kind == "corpus":
        inst = _corpus(args.name)
        if args.name.startswith("memory") and args.strategy:
            n = int(args.name.partition(":")[2] or 1)
            _, pi = gen.corpus_memory_hierarchy(n)
            save_profile(inst, Profile((pi,) * inst.k), args.strategy)
    else:
        data = load_json(args.formula)
        formula = gen.OneInThreeFormula(int(data["n"]), tuple(map(tuple, data["clauses"])))
        inst, _ = gen.gen_1in3(formula)
    save_instance(inst, args.output)


def cmd_simulate(args) -> None:
    inst = load_instance(args.instance)
    profile = load_profile(inst, args.profile)
    cfg = SimConfig(args.runs, args.horizon, args.seed, args.confidence)
    res = simulate_profile(inst, profile, cfg)
    if args.csv:
        write_csv(res, args.csv)
    if not res.usable:
        raise InvalidModel("all runs censored: estimate unusable")
    print(f"{fmt(res.mean)} {fmt(res.half_width)} {res.censored}")


def cmd_lift(args) -> None:
    inst = load_instance(args.instance)
    lifted = lift_mdp(inst.mdp, args.mem)
    save_instance(lift_instance(inst, lifted), args.output)


def bench_rows(l_list, k_list, repeats, seed, pc=0.2, inits=("random", "rlp"), samples=5,
               hyper: Hyperparams = Hyperparams()):
    """Benchmark loop: per grid, the baseline value and averaged AutoHit values."""
    for l in l_list:
        for k in k_list:
            for rep in range(repeats):
                gseed = seed + rep
                inst = gen.gen_grid(gen.GridConfig(l, pc, gseed, k))
                base = evaluate(inst, lp_baseline(inst), hyper.epsilon)
                for init in inits:
                    t0 = time.perf_counter()
                    vals = []
                    for smp in range(samples):
                        h = Hyperparams(**{**hyper.__dict__, "seed": gseed * 1000 + smp})
                        vals.append(autohit(inst, h, InitScheme(init)).value)
                    val = sum(vals) / len(vals)
                    yield {"instance": f"grid_l{l}_pc{pc:g}", "k": k, "seed": gseed,
                           "init": init, "val": val, "base": base, "ratio": val / base,
                           "seconds": time.perf_counter() - t0}


def cmd_bench(args) -> None:
    hyper = Hyperparams(steps=args.steps, epsilon=args.epsilon, step_size=args.step_size)
    out = open(args.output, "w", newline="") if args.output else sys.stdout
    try:
        w = csv.writer(out)
        w.writerow(BENCH_HEADER)
        for row in bench_rows(_csv_list(args.l_list), _csv_list(args.k_list), args.repeats,
                              args.seed, args.pc, _csv_list(args.inits, str), args.samples,
                              hyper):
            w.writerow([row["instance"], row["k"], row["seed"], row["init"], fmt(row["val"]),
                        fmt(row["base"]), fmt(row["ratio"]), f"{row['seconds']:.3f}"])
            out.flush()
    finally:
        if out is not sys.stdout:
            out.close()


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mssp", description="Multiagent stochastic shortest path")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("coorhit", help="optimal coordinated strategy")
    c.add_argument("instance")
    c.add_argument("--strategy", help="write the product strategy as JSON")
    c.add_argument("--check", action="store_true", help="re-evaluate the extracted strategy")
    c.set_defaults(func=cmd_coorhit)

    a = sub.add_parser("autohit", help="gradient-based profile synthesis")
    a.add_argument("instance")
    a.add_argument("--init", choices=[s.value for s in InitScheme], default="random")
    a.add_argument("--steps", type=int, default=1000)
    g = a.add_mutually_exclusive_group()
    g.add_argument("--gamma", type=int)
    g.add_argument("--gamma-ratio", type=float)
    a.add_argument("--epsilon", type=float, default=1e-9)
    a.add_argument("--step-size", type=float, default=0.01)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--trace", help="CSV of the objective per step")
    a.add_argument("--profile", help="write the synthesized profile as JSON")
    a.set_defaults(func=cmd_autohit)

    e = sub.add_parser("eval", help="evaluate a profile")
    e.add_argument("instance")
    e.add_argument("--profile", required=True)
    e.add_argument("--epsilon", type=float, default=1e-9)
    e.add_argument("--exact", action="store_true", help="use the product-chain oracle")
    e.set_defaults(func=cmd_eval)

    gp = sub.add_parser("gen", help="generate instances")
    gsub = gp.add_subparsers(dest="kind", required=True)
    gg = gsub.add_parser("grid")
    gg.add_argument("--l", type=int, required=True)
    gg.add_argument("--pc", type=float, default=0.2)
    gg.add_argument("--k", type=int, default=1)
    gg.add_argument("--seed", type=int, default=0)
    gc = gsub.add_parser("corpus")
    gc.add_argument("--name", required=True,
                    help="fig1 | gadget[:g0,g1] | randomized | memory:N | price:RHO")
    gc.add_argument("--strategy", help="memory:N only: write the countdown profile")
    gs = gsub.add_parser("sat")
    gs.add_argument("--formula", required=True, help='JSON {"n": N, "clauses": [[i,j,k], ...]}')
    for q in (gg, gc, gs):
        q.add_argument("-o", "--output", required=True)
    gp.set_defaults(func=cmd_gen)

    s = sub.add_parser("simulate", help="Monte Carlo estimate of a profile's value")
    s.add_argument("instance")
    s.add_argument("--profile", required=True)
    s.add_argument("--runs", type=int, default=100_000)
    s.add_argument("--horizon", type=int, default=10_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--confidence", type=float, default=0.99)
    s.add_argument("--csv", help="per-run CSV output")
    s.set_defaults(func=cmd_simulate)

    lf = sub.add_parser("lift", help="fold a memory set into the states")
    lf.add_argument("instance")
    lf.add_argument("--mem", type=int, required=True)
    lf.add_argument("-o", "--output", required=True)
    lf.set_defaults(func=cmd_lift)

    b = sub.add_parser("bench", help="grid benchmark table")
    b.add_argument("--l-list", default="10")
    b.add_argument("--k-list", default="5")
    b.add_argument("--repeats", type=int, default=10)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--pc", type=float, default=0.2)
    b.add_argument("--inits", default="random,rlp")
    b.add_argument("--samples", type=int, default=5)
    b.add_argument("--steps", type=int, default=1000)
    b.add_argument("--epsilon", type=float, default=1e-9)
    b.add_argument("--step-size", type=float, default=0.01)
    b.add_argument("-o", "--output")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except ProductTooLarge as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (InvalidModel, ValueError, KeyError, OSError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"error: {msg}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
