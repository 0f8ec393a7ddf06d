"""Command-line driver.

Exit status: 0 success, 1 usage error, 2 data error, 3 numerical breakdown.
Location indices in every file are 0-based.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys

import numpy as np

from . import io
from .baselines import exhaustive_search, random_design, substream
from .basis import (ENERGY_PLAIN, ENERGY_SQUARED, SnapshotMatrix, assemble_instance,
                    fit_reduced_model)
from .errors import DataFormatError, InvalidInputError, MFSensorError, NumericalBreakdownError
from .evaluate import compare_designs, evaluate, reconstruct, relative_error, simulate_measurement
from .greedy import greedy_naive, greedy_sm
from .iterative import DEFAULT_MAX_ITERS, clamp_allocation, iterative_select, prune_allocations
from .model import DesignResult, FidelityClass, phi_d

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("mfsensor")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _fmt(x: float) -> str:
    return repr(float(x))


def _add_instance_args(p, model=True):
    if model:
        p.add_argument("--model", required=True, help="reduced model directory")
    p.add_argument("--cost-cheap", dest="cost_cheap", type=float)
    p.add_argument("--cost-exp", dest="cost_exp", type=float)
    p.add_argument("--sigma-cheap", dest="sigma_cheap", type=float)
    p.add_argument("--sigma-exp", dest="sigma_exp", type=float)
    p.add_argument("--budget", type=float)


def _require(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise UsageError(f"missing required option(s): {flags}")


def _fidelities(args):
    _require(args, "cost_cheap", "cost_exp", "sigma_cheap", "sigma_exp")
    return (FidelityClass(args.cost_cheap, args.sigma_cheap),
            FidelityClass(args.cost_exp, args.sigma_exp))


def _instance(args):
    _require(args, "budget")
    model = io.load_model(args.model)
    cheap, exp = _fidelities(args)
    return model, assemble_instance(model, cheap, exp, args.budget)


def _instance_from_design(model, doc):
    cheap, exp = io.design_fidelities(doc)
    return assemble_instance(model, cheap, exp, doc["budget"])


# -- subcommands ------------------------------------------------------------

def cmd_basis(args):
    snaps = io.load_snapshots(args.data, args.format)
    train, test = snaps.split(args.train_frac)
    train = SnapshotMatrix(train)
    cand_idx = None
    if args.candidate_mask:
        cand_idx = io.load_candidate_mask(args.candidate_mask, snaps.n_points)
    model = fit_reduced_model(train, lam=args.lam, energy=args.energy, center=args.center,
                              max_modes=args.max_modes, cand_idx=cand_idx,
                              mode=args.energy_mode)
    io.save_model(args.out, model, test=test)
    print(f"N={model.n_points} M={model.n_candidates} ell={model.n_modes} "
          f"p_train={train.n_snapshots} p_test={test.shape[1]}")
    return EXIT_OK


def cmd_design(args):
    model, inst = _instance(args)
    algo = args.algorithm
    if algo == "greedy":
        result = greedy_sm(inst)
    elif algo == "greedy-naive":
        result = greedy_naive(inst)
    elif algo == "iterative":
        rep = iterative_select(inst, args.max_iters, workers=args.threads)
        result = rep.winner
        result.meta["per_candidate"] = [
            {"k_ch": r.allocation.k_cheap, "k_exp": r.allocation.k_exp,
             "phi_d": r.phi_d, "refinements": r.refinements}
            for r in rep.per_candidate]
        if rep.skipped:
            result.meta["skipped"] = [msg for _, msg in rep.skipped]
    elif algo == "random":
        rng = substream(args.seed, "random-design")
        if args.k_cheap is None or args.k_exp is None:
            cands = prune_allocations(inst.cheap.cost, inst.exp.cost, inst.budget)
            fitted = [a for a in (clamp_allocation(c, inst.n_locations)
                                  for c in cands.allocations) if a is not None]
            if not fitted:
                k_ch = k_exp = 0
            else:
                pick = fitted[int(rng.integers(len(fitted)))]
                k_ch, k_exp = pick.k_cheap, pick.k_exp
        else:
            k_ch, k_exp = args.k_cheap, args.k_exp
        if k_ch * inst.cheap.cost + k_exp * inst.exp.cost > inst.budget * (1 + 1e-12):
            raise InvalidInputError(f"allocation ({k_ch}, {k_exp}) exceeds the budget")
        sel = random_design(k_ch, k_exp, inst.n_locations, rng)
        result = DesignResult("random", sel, phi_d(inst, sel), inst.spend(sel), inst.budget,
                              meta={"seed": args.seed})
    else:  # pragma: no cover - argparse restricts choices
        raise UsageError(f"unknown algorithm {algo}")
    io.write_design(args.out, result, inst, include_trace=not args.no_trace)
    line = (f"{result.algorithm} k_ch={result.selection.k_cheap} "
            f"k_exp={result.selection.k_exp} spend={_fmt(result.spend)} "
            f"phi_d={_fmt(result.phi_d)}")
    if algo == "iterative":
        line += (f" K={result.meta['n_candidates']} "
                 f"t={result.meta['total_refinements']}")
    print(line)
    return EXIT_OK


def _load_design_for(model, path):
    doc = io.read_design(path)
    inst = _instance_from_design(model, doc)
    io.check_fingerprint(doc, inst, path)
    return doc, inst, io.design_selection(doc)


def _test_matrix(args):
    if getattr(args, "test", None):
        return io.load_matrix(args.test)
    test = io.load_test_split(args.model)
    if test is None:
        raise DataFormatError("no test split in model directory; pass --test", args.model)
    return test


def cmd_reconstruct(args):
    model = io.load_model(args.model)
    doc, inst, sel = _load_design_for(model, args.design)
    if args.truth:
        u = io.load_matrix(args.truth).reshape(-1)
    else:
        test = _test_matrix(args)
        if not 0 <= args.snapshot_index < test.shape[1]:
            raise InvalidInputError(
                f"snapshot index {args.snapshot_index} outside test set of {test.shape[1]}")
        u = test[:, args.snapshot_index]
    if u.shape[0] != model.n_points:
        raise InvalidInputError(f"truth has {u.shape[0]} points, model has {model.n_points}")
    noise = (0.0, 0.0) if args.noise_free else (inst.cheap.sigma, inst.exp.sigma)
    meas = simulate_measurement(u, sel, model.cand_idx, noise,
                                rng=substream(args.seed, "noise", args.snapshot_index))
    u_hat, _ = reconstruct(model, sel, meas, inst.cheap, inst.exp)
    if args.out:
        io.save_matrix(args.out, u_hat)
    print(f"rel_err={_fmt(relative_error(u, u_hat)) if np.linalg.norm(u) > 0 else 'nan'}")
    return EXIT_OK


def cmd_evaluate(args):
    model = io.load_model(args.model)
    doc, inst, sel = _load_design_for(model, args.design)
    summary = evaluate(model, sel, _test_matrix(args), inst.cheap, inst.exp,
                       seed=args.seed, noise_free=args.noise_free)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["snapshot", "rel_err"])
            kept = [k for k in range(len(summary.per_snapshot_rel_err) + len(summary.skipped))
                    if k not in set(summary.skipped)]
            for k, e in zip(kept, summary.per_snapshot_rel_err):
                w.writerow([k, _fmt(e)])
    print(f"mean_rel_err={_fmt(summary.mean_rel_err)} phi_d={_fmt(summary.phi_d)} "
          f"k_ch={sel.k_cheap} k_exp={sel.k_exp}")
    return EXIT_OK


def cmd_prune(args):
    _require(args, "cost_cheap", "cost_exp", "budget")
    cands = prune_allocations(args.cost_cheap, args.cost_exp, args.budget)
    print(*cands.triple())
    if args.list:
        for a in cands.allocations:
            print(a.k_cheap, a.k_exp)
    return EXIT_OK


def cmd_compare(args):
    model = io.load_model(args.model)
    loaded = [_load_design_for(model, p) for p in args.designs]
    inst = loaded[0][1]
    fp = loaded[0][0]["fingerprint"]
    for (doc, _, _), path in zip(loaded, args.designs):
        if doc["fingerprint"] != fp:
            raise DataFormatError("designs were computed for different instances", path)
    names = args.names or [doc["algorithm"] for doc, _, _ in loaded]
    if len(names) != len(loaded):
        raise UsageError("--names must match the number of designs")
    designs = [DesignResult(doc["algorithm"], sel, doc.get("phi_d", 0.0),
                            doc.get("spend", 0.0), doc["budget"])
               for doc, _, sel in loaded]
    rel = None
    test = io.load_test_split(args.model) if not args.test else io.load_matrix(args.test)
    if test is not None and not args.skip_errors:
        rel = {n: evaluate(model, d.selection, test, inst.cheap, inst.exp, seed=args.seed,
                           noise_free=args.noise_free).mean_rel_err
               for n, d in zip(names, designs)}
    comp = compare_designs(inst, designs, samples=args.samples, seed=args.seed,
                           names=names, rel_errs=rel)
    with open(args.table, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["design", "k_ch", "k_exp", "spend", "phi_d", "mean_rel_err"])
        for r in comp.rows:
            w.writerow([r.name, r.k_cheap, r.k_exp, _fmt(r.spend), _fmt(r.phi_d),
                        "" if r.mean_rel_err is None else _fmt(r.mean_rel_err)])
    if args.hist:
        with open(args.hist, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["bin_lo", "bin_hi", "count"])
            for lo, hi, c in comp.histogram:
                w.writerow([_fmt(lo), _fmt(hi), c])
    if args.samples_out:
        with open(args.samples_out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k_ch", "k_exp", "phi_d"])
            for (kc, ke), v in zip(comp.random_alloc, comp.random_phi):
                w.writerow([kc, ke, _fmt(v)])
    for r in comp.rows:
        print(f"{r.name} phi_d={_fmt(r.phi_d)}")
    if comp.random_phi.size:
        print(f"random n={comp.random_phi.size} max_phi_d={_fmt(comp.random_phi.max())}")
    return EXIT_OK


def cmd_oracle(args):
    model, inst = _instance(args)
    result = exhaustive_search(inst, max_locations=args.max_locations)
    if args.out:
        io.write_design(args.out, result, inst)
    print(f"exhaustive k_ch={result.selection.k_cheap} k_exp={result.selection.k_exp} "
          f"spend={_fmt(result.spend)} phi_d={_fmt(result.phi_d)}")
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def build_parser():
    parser = _Parser(prog="mfsensor",
                     description="Budgeted multifidelity D-optimal sensor placement.")
    parser.add_argument("--config", help="key=value run config; flags override it")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("basis", help="build and persist the reduced model")
    p.add_argument("--data", required=True)
    p.add_argument("--format", choices=("csv", "mfsm"))
    p.add_argument("--out", required=True, help="output model directory")
    p.add_argument("--lambda", dest="lam", type=float, default=0.01)
    p.add_argument("--energy", type=float, default=0.99)
    p.add_argument("--energy-mode", dest="energy_mode", default=ENERGY_SQUARED,
                   choices=(ENERGY_SQUARED, ENERGY_PLAIN))
    p.add_argument("--train-frac", dest="train_frac", type=float, default=0.70)
    p.add_argument("--no-center", dest="center", action="store_false", default=True)
    p.add_argument("--max-modes", dest="max_modes", type=int)
    p.add_argument("--candidate-mask", dest="candidate_mask")
    p.set_defaults(func=cmd_basis)

    p = sub.add_parser("design", help="compute a sensor design")
    _add_instance_args(p)
    p.add_argument("--algorithm", default="greedy",
                   choices=("greedy", "greedy-naive", "iterative", "random"))
    p.add_argument("--max-iters", dest="max_iters", type=int, default=DEFAULT_MAX_ITERS)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k-cheap", dest="k_cheap", type=int)
    p.add_argument("--k-exp", dest="k_exp", type=int)
    p.add_argument("--no-trace", dest="no_trace", action="store_true")
    p.add_argument("--out", required=True, help="design JSON path")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("reconstruct", help="MAP reconstruction of one snapshot")
    p.add_argument("--model", required=True)
    p.add_argument("--design", required=True)
    p.add_argument("--snapshot-index", dest="snapshot_index", type=int, default=0)
    p.add_argument("--truth", help="field vector file; defaults to the model's test split")
    p.add_argument("--test")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise-free", dest="noise_free", action="store_true")
    p.add_argument("--out", help="estimate output (.csv or .mfsm)")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("evaluate", help="mean relative error over the test set")
    p.add_argument("--model", required=True)
    p.add_argument("--design", required=True)
    p.add_argument("--test")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise-free", dest="noise_free", action="store_true")
    p.add_argument("--out", help="per-snapshot error CSV")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("prune", help="print feasible count, |K| and bound")
    _add_instance_args(p, model=False)
    p.add_argument("--list", action="store_true", help="also list the kept allocations")
    p.set_defaults(func=cmd_prune)

    p = sub.add_parser("compare", help="compare designs against random placements")
    p.add_argument("--model", required=True)
    p.add_argument("--designs", nargs="+", required=True)
    p.add_argument("--names", nargs="+")
    p.add_argument("--samples", type=int, default=1000, help="random designs per allocation")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--test")
    p.add_argument("--noise-free", dest="noise_free", action="store_true")
    p.add_argument("--skip-errors", dest="skip_errors", action="store_true")
    p.add_argument("--table", required=True, help="comparison CSV")
    p.add_argument("--hist", help="histogram CSV")
    p.add_argument("--samples-out", dest="samples_out", help="raw random-sample CSV")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("oracle", help="exhaustive optimum for small M")
    _add_instance_args(p)
    p.add_argument("--max-locations", dest="max_locations", type=int, default=12)
    p.add_argument("--out")
    p.set_defaults(func=cmd_oracle)

    parser.subcommands = sub.choices
    return parser


_CONFIG_DEST = {"lambda": "lam", "candidate_mask": "candidate_mask"}


def _apply_config(parser, argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    cfg = io.read_config(known.config)
    for sp in parser.subcommands.values():
        dests = {a.dest for a in sp._actions}
        values = {}
        for key, val in cfg.items():
            dest = _CONFIG_DEST.get(key, key)
            if dest in dests:
                values[dest] = val
        sp.set_defaults(**values)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s: %(message)s")
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except NumericalBreakdownError as exc:
        print(f"numerical breakdown: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InvalidInputError, DataFormatError, MFSensorError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
