"""Command-line front end.

Subcommands: estimate (tau -> L, sigma, T table), verify (formula vs
enumeration), run (adaptive or fixed-tau), grid (tau sweep plus a
seed-matched adaptive run), synth (synthetic LIBSVM instances).

Exit codes: 0 success, 2 validation error, 3 divergence, 4 verification
failure. A flat `key = value` config file can seed any flag; explicit flags
win. Trace CSV schema: iter,epochs,rel_error,tau,gamma,sigma,L.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .data import (Dataset, ParseError, load_libsvm, make_partitioning,
                   make_synthetic, normalize_rows)
from .objectives import Objective, smoothness_profile, solve_reference
from .optimizer import DivergenceError, RunConfig, grid_search, run_adaptive, run_fixed
from .sampling import make_strategy
from .theory import (brute_force_optimal_tau, gradient_noise, expected_smoothness,
                     noise_aggregates_exact, optimal_tau, total_complexity,
                     verify_noise_formula)

TRACE_HEADER = "iter,epochs,rel_error,tau,gamma,sigma,L"
SAMPLING_ALIASES = {
    "nice": "nice",
    "independent": "independent",
    "pnice": "partition_nice",
    "pindependent": "partition_independent",
}

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DIVERGED = 3
EXIT_VERIFY_FAILED = 4


class CliError(Exception):
    """Validation failure surfaced as exit code 2."""


def load_config(path):
    out = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise CliError(f"{path}:{lineno}: expected 'key = value'")
            key, val = line.split("=", 1)
            out[key.strip().replace("-", "_")] = val.strip()
    return out


def _merged(args, key, default=None, cast=str):
    """Flag value, else config-file value, else default."""
    val = getattr(args, key, None)
    if val is None and args.config_values:
        raw = args.config_values.get(key)
        if raw is not None:
            val = cast(raw)
    return default if val is None else val


def _parse_int_list(text):
    return [int(t) for t in text.split(",") if t.strip()]


def _parse_float_list(text):
    return [float(t) for t in text.split(",") if t.strip()]


def build_instance(args):
    """Dataset + objective + partitioning from the resolved flags."""
    data_path = _merged(args, "data")
    synth_n = _merged(args, "synth_n", cast=int)
    if (data_path is None) == (synth_n is None):
        raise CliError("need exactly one data source: --data or --synth-n")
    if data_path is not None:
        ds = load_libsvm(data_path)
    else:
        ds, _ = make_synthetic(
            n=synth_n,
            d=_merged(args, "synth_d", 10, int),
            seed=_merged(args, "synth_seed", 0, int),
            noise=_merged(args, "synth_noise", 0.0, float),
            density=_merged(args, "synth_density", 1.0, float),
            x_scale=_merged(args, "synth_x_scale", 1.0, float),
        )
    if _merged(args, "normalize", False, bool):
        ds = normalize_rows(ds)
    kind = _merged(args, "objective", "ridge")
    lam = _merged(args, "lam", 0.1, float)
    obj = Objective(ds, kind, lam)

    part_spec = _merged(args, "partitions", "1")
    shuffle_seed = _merged(args, "partition_shuffle_seed", cast=int)
    q_text = _merged(args, "q")
    q = _parse_float_list(q_text) if q_text else None
    if "," in str(part_spec):
        part = make_partitioning(ds.n, sizes=_parse_int_list(str(part_spec)), q=q,
                                 shuffle_seed=shuffle_seed)
    else:
        part = make_partitioning(ds.n, k=int(part_spec), q=q, shuffle_seed=shuffle_seed)
    return ds, obj, part


def _sampling_variant(args):
    name = _merged(args, "sampling", "nice")
    if name not in SAMPLING_ALIASES:
        raise CliError(f"unknown sampling {name!r}; choose from {sorted(SAMPLING_ALIASES)}")
    return SAMPLING_ALIASES[name]


def _run_config(args, obj):
    return RunConfig(
        epsilon=_merged(args, "eps", 1e-3, float),
        cap=_merged(args, "cap", 0.0, float),
        seed=_merged(args, "seed", 0, int),
        max_epochs=_merged(args, "max_epochs", 50.0, float),
        target_rel_error=_merged(args, "target", cast=float),
        trace_every=_merged(args, "trace_every", 1, int),
    )


def write_trace_csv(path, trace):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(TRACE_HEADER + "\n")
        for r in trace:
            f.write(f"{r.iter},{r.epochs:.17g},{r.rel_error:.17g},{r.tau},"
                    f"{r.gamma:.17g},{r.sigma:.17g},{r.L:.17g}\n")


def write_summary(path, payload):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def _reference_solution(obj):
    return solve_reference(obj, tol=1e-12 if obj.kind == "ridge" else 1e-9)


def cmd_estimate(args):
    _, obj, part = build_instance(args)
    variant = _sampling_variant(args)
    eps = _merged(args, "eps", 1e-3, float)
    seed = _merged(args, "seed", 0, int)
    out_path = _merged(args, "out", "estimate.csv")
    profile = smoothness_profile(obj, part)
    x_star = _reference_solution(obj)
    agg = noise_aggregates_exact(obj, part, x_star)
    family = make_strategy(variant, 1, partitioning=part)
    tau_max = part.min_size
    taus_text = _merged(args, "taus")
    taus = _parse_int_list(taus_text) if taus_text else list(range(1, tau_max + 1))
    for t in taus:
        if not 1 <= t <= tau_max:
            raise CliError(f"tau={t} infeasible: outside [1, {tau_max}]")
    rng = np.random.default_rng(seed)
    x0 = rng.standard_normal(obj.d)
    x0_dist_sq = float(np.sum((x0 - x_star) ** 2))
    mu = profile.mu
    rows = []
    for t in taus:
        tc = total_complexity(family, t, profile, agg, eps, mu, x0_dist_sq)
        rows.append((t, expected_smoothness(family, t, profile),
                     gradient_noise(family, t, agg), tc.smoothness_branch,
                     tc.noise_branch, tc.value))
    tau_star = optimal_tau(family, profile, agg, eps, mu)
    binding = total_complexity(family, tau_star, profile, agg, eps, mu, x0_dist_sq).binding
    with open(out_path, "w", encoding="utf-8", newline="\n") as f:
        f.write("tau,L,sigma,tau_L,noise_branch,T\n")
        for t, L, s, tl, nb, T in rows:
            f.write(f"{t},{L:.17g},{s:.17g},{tl:.17g},{nb:.17g},{T:.17g}\n")
        f.write(f"# tau_star={tau_star} binding={binding}\n")
    print(f"wrote {out_path}: {len(rows)} rows, tau_star={tau_star} ({binding}-bound)")
    return EXIT_OK


def cmd_verify(args):
    _, obj, part = build_instance(args)
    seed = _merged(args, "seed", 0, int)
    n_checks = _merged(args, "checks", 3, int)
    tol_rel = 1e-9
    x_star = _reference_solution(obj)
    profile = smoothness_profile(obj, part)
    rng = np.random.default_rng(seed)
    points = [x_star] + [rng.standard_normal(obj.d) for _ in range(n_checks)]
    failures = 0
    for alias, variant in SAMPLING_ALIASES.items():
        if variant in ("nice", "independent") and part.K != 1:
            continue
        tau_max = part.min_size
        for tau in range(1, tau_max + 1):
            strategy = make_strategy(variant, tau, partitioning=part)
            worst = 0.0
            ok = True
            for x in points:
                rep = verify_noise_formula(strategy, tau, obj, x, x_star=x_star,
                                           profile=profile)
                worst = max(worst, rep.abs_diff / (1.0 + rep.sigma_enumerated))
                ok = ok and rep.sigma_ok(tol_rel) and rep.bound_ok
            status = "PASS" if ok else "FAIL"
            if not ok:
                failures += 1
            print(f"{status} {alias:13s} tau={tau:3d} max_rel_diff={worst:.3e}")
    if failures:
        print(f"{failures} (variant, tau) checks failed")
        return EXIT_VERIFY_FAILED
    print("all formula checks passed")
    return EXIT_OK


def _summary_base(args, obj, part, variant, cfg):
    return {
        "objective": obj.kind,
        "lambda": obj.lam,
        "n": obj.n,
        "d": obj.d,
        "partitions": [int(s) for s in part.sizes],
        "sampling": variant,
        "eps": cfg.epsilon,
        "cap": cfg.cap,
        "seed": cfg.seed,
        "max_epochs": cfg.max_epochs,
        "target_rel_error": cfg.target,
    }


def cmd_run(args):
    _, obj, part = build_instance(args)
    variant = _sampling_variant(args)
    cfg = _run_config(args, obj)
    out_path = _merged(args, "out", "trace.csv")
    tau = _merged(args, "tau", cast=int)
    profile = smoothness_profile(obj, part)
    x_star = _reference_solution(obj)
    agg_star = noise_aggregates_exact(obj, part, x_star)
    family = make_strategy(variant, 1, partitioning=part)
    tau_star = optimal_tau(family, profile, agg_star, cfg.epsilon, profile.mu)
    try:
        if tau is None:
            mode = "adaptive"
            res = run_adaptive(obj, part, variant, cfg, x_star, profile)
        else:
            mode = "fixed"
            if not 1 <= tau <= part.min_size:
                raise CliError(f"tau={tau} infeasible: outside [1, {part.min_size}]")
            strategy = make_strategy(variant, tau, partitioning=part)
            res = run_fixed(obj, part, strategy, cfg, x_star, agg_star, profile)
    except DivergenceError as exc:
        write_trace_csv(out_path, exc.trace)
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    write_trace_csv(out_path, res.trace)
    summary = _summary_base(args, obj, part, variant, cfg)
    summary.update({
        "mode": mode,
        "tau": tau,
        "tau_star_theory": tau_star,
        "iterations": res.iterations,
        "epochs": res.epochs,
        "epochs_to_target": res.epochs_to_target,
        "reached_target": res.reached_target,
        "final_rel_error": res.final_rel_error,
        "stop_reason": res.stop_reason,
        "gamma_min": res.gamma_min,
        "gamma_max": res.gamma_max,
    })
    summary_path = _merged(args, "summary", out_path + ".summary.json")
    write_summary(summary_path, summary)
    print(f"{mode}: {res.iterations} iterations, {res.epochs:.3f} epochs, "
          f"final rel_error {res.final_rel_error:.3e} -> {out_path}")
    return EXIT_OK


def cmd_grid(args):
    _, obj, part = build_instance(args)
    variant = _sampling_variant(args)
    cfg = _run_config(args, obj)
    out_path = _merged(args, "out", "grid.csv")
    profile = smoothness_profile(obj, part)
    x_star = _reference_solution(obj)
    agg_star = noise_aggregates_exact(obj, part, x_star)
    family = make_strategy(variant, 1, partitioning=part)
    tau_max = part.min_size
    taus_text = _merged(args, "taus")
    taus = _parse_int_list(taus_text) if taus_text else list(range(1, tau_max + 1))
    for t in taus:
        if not 1 <= t <= tau_max:
            raise CliError(f"tau={t} infeasible: outside [1, {tau_max}]")
    tau_star = optimal_tau(family, profile, agg_star, cfg.epsilon, profile.mu)
    try:
        grid = grid_search(obj, part, variant, taus, cfg, x_star, agg_star, profile)
        adaptive = run_adaptive(obj, part, variant, cfg, x_star, profile)
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    adaptive_epochs = (adaptive.epochs_to_target if adaptive.reached_target
                       else float(cfg.max_epochs))
    better = sum(1 for v in grid.values() if v < adaptive_epochs)
    percentile = 100.0 * better / len(grid)
    with open(out_path, "w", encoding="utf-8", newline="\n") as f:
        f.write("tau,epochs\n")
        for t in taus:
            f.write(f"{t},{grid[t]:.17g}\n")
    summary = _summary_base(args, obj, part, variant, cfg)
    summary.update({
        "mode": "grid",
        "tau_star_theory": tau_star,
        "grid": {str(t): grid[t] for t in taus},
        "adaptive_epochs": adaptive_epochs,
        "adaptive_reached_target": adaptive.reached_target,
        "percentile": percentile,
    })
    summary_path = _merged(args, "summary", out_path + ".summary.json")
    write_summary(summary_path, summary)
    print(f"grid over {len(taus)} batch sizes; adaptive {adaptive_epochs:.3f} epochs "
          f"beats all but {percentile:.1f}% (tau_star={tau_star}) -> {out_path}")
    return EXIT_OK


def cmd_synth(args):
    n = _merged(args, "n", cast=int)
    d = _merged(args, "d", cast=int)
    if n is None or d is None:
        raise CliError("synth needs --n and --d")
    seed = _merged(args, "seed", 0, int)
    noise = _merged(args, "noise", 0.0, float)
    density = _merged(args, "density", 1.0, float)
    out_path = _merged(args, "out", "synth.libsvm")
    ds, x_gen = make_synthetic(n, d, seed, noise=noise, density=density)
    with open(out_path, "w", encoding="utf-8", newline="\n") as f:
        f.write(ds.to_libsvm())
    meta = {"n": n, "d": d, "seed": seed, "noise": noise, "density": density,
            "x_gen": [float(v) for v in x_gen]}
    write_summary(out_path + ".meta.json", meta)
    print(f"wrote {out_path} (n={n}, d={d}, noise={noise})")
    return EXIT_OK


def _add_instance_flags(p):
    p.add_argument("--config", help="flat key = value config file; flags override")
    p.add_argument("--data", help="LIBSVM data file")
    p.add_argument("--synth-n", type=int, dest="synth_n", help="synthetic instance size")
    p.add_argument("--synth-d", type=int, dest="synth_d")
    p.add_argument("--synth-noise", type=float, dest="synth_noise")
    p.add_argument("--synth-density", type=float, dest="synth_density")
    p.add_argument("--synth-x-scale", type=float, dest="synth_x_scale")
    p.add_argument("--synth-seed", type=int, dest="synth_seed")
    p.add_argument("--normalize", action="store_const", const=True, default=None,
                   help="scale rows to unit norm")
    p.add_argument("--objective", choices=["ridge", "logistic"])
    p.add_argument("--lambda", type=float, dest="lam", help="regularization weight")
    p.add_argument("--partitions", help="partition count K or comma-separated sizes")
    p.add_argument("--q", help="comma-separated partition probabilities")
    p.add_argument("--partition-shuffle-seed", type=int, dest="partition_shuffle_seed")
    p.add_argument("--sampling", choices=sorted(SAMPLING_ALIASES))
    p.add_argument("--eps", type=float, help="target neighborhood epsilon")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output path")


def _add_run_flags(p):
    p.add_argument("--cap", type=float, help="variance cap C (0 disables)")
    p.add_argument("--max-epochs", type=float, dest="max_epochs")
    p.add_argument("--target", type=float, help="relative-error target (default eps/10)")
    p.add_argument("--trace-every", type=int, dest="trace_every")
    p.add_argument("--summary", help="summary JSON path (default <out>.summary.json)")


def build_parser():
    parser = argparse.ArgumentParser(prog="adabatch",
                                     description="Adaptive mini-batch SGD experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="print the tau -> (L, sigma, T) table")
    _add_instance_flags(p)
    p.add_argument("--taus", help="comma-separated tau grid (default all feasible)")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("verify", help="check noise/smoothness formulas by enumeration")
    _add_instance_flags(p)
    p.add_argument("--checks", type=int, help="number of random check points")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("run", help="adaptive (default) or fixed-tau run")
    _add_instance_flags(p)
    _add_run_flags(p)
    p.add_argument("--tau", type=int, help="fixed batch size (omit for adaptive)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("grid", help="tau sweep plus a seed-matched adaptive run")
    _add_instance_flags(p)
    _add_run_flags(p)
    p.add_argument("--taus", help="comma-separated tau grid (default all feasible)")
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("synth", help="generate a synthetic LIBSVM instance")
    p.add_argument("--config")
    p.add_argument("--n", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--noise", type=float)
    p.add_argument("--density", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.config_values = load_config(args.config) if args.config else {}
        return args.func(args)
    except (CliError, ParseError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
