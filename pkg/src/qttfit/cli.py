"""Command-line driver for the learning experiments.

Four subcommands, all emitting CSV for grids/series and JSON for
summaries (no plotting):

  sine-demo     noisy-sine three-step fit, incl. the no-compression ablation
  corr-learn    learn noisy correlation QTTs and compare against exact
  gs-energy     ground-state energy scan (proposed / qtci / mc)
  bonddim-scan  noise-free correlation bond dimensions + noisy-eps scan

Every command is deterministic given (config, seed): a master seed fans
out per-trial seeds through a splitmix64 derivation, and floats are
written with repr so re-runs are byte-identical.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import fitopt, pite, qsim, tci, ttcore
from .fitopt import FitPlan, fit_pipeline
from .pite import EnergyScan, KernelParams
from .qsim import ShotConfig, build_tfim, identity_observable
from .quantics import all_indices, decode_many, tensorize, uniform_grid
from .ttcore import TruncationSpec, evaluate_many


# chi-tilde / chi pairs per system size
DEFAULT_BONDS = {2: (4, 2), 4: (6, 4), 6: (10, 8)}


def splitmix64(x):
    """One step of the splitmix64 sequence; used to fan out trial seeds."""
    x = (x + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return z ^ (z >> 31)


def trial_seeds(master, n):
    out, x = [], int(master) & 0xFFFFFFFFFFFFFFFF
    for _ in range(n):
        x = (x + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
        out.append(splitmix64(x))
    return out


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def resolved(args, extra=None):
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    if extra:
        cfg.update(extra)
    return cfg


def kernel_params(args):
    return KernelParams(beta=args.beta, tau=args.tau, T=args.T)


def correlator(ham, observable, cfg):
    return lambda t, tp: qsim.correlation(ham, observable, t, tp, cfg)


# ---------------------------------------------------------------- sine-demo

def cmd_sine_demo(args):
    os.makedirs(args.out, exist_ok=True)
    grid = uniform_grid(args.R, 0.0, 1.0)
    xs = grid.grid_values()
    truth = np.sin(2 * np.pi * xs)
    plan = FitPlan(chi_tilde=args.chi_tilde, chi=args.chi, n_itr=args.iters,
                   tci_tolerance=args.tci_tol)
    plan_ab = FitPlan(chi_tilde=args.chi_tilde, chi=args.chi_tilde,
                      n_itr=args.iters, tci_tolerance=args.tci_tol)
    idx = all_indices(grid)
    trials = []
    for trial, seed in enumerate(trial_seeds(args.seed, args.trials)):
        rng = np.random.default_rng(seed)

        def f(x, rng=rng):
            return np.sin(2 * np.pi * x) * (1.0 + rng.normal(0.0, args.sigma))

        rep = fit_pipeline(f, grid, plan)
        # ablation: optimize at chi-tilde, skipping the SVD compression
        tt_ab, _, _ = fitopt.optimize(rep.tt_itpl, rep.ledger, plan_ab)
        series = {"itpl": rep.tt_itpl, "init": rep.tt_init,
                  "opt": rep.tt_opt, "nocompress": tt_ab}
        vals = {k: evaluate_many(tt, idx).real for k, tt in series.items()}
        errs = {k: float(np.mean(np.abs(v - truth)))
                for k, v in vals.items()}
        write_csv(os.path.join(args.out, f"sine_trial_{trial:02d}.csv"),
                  ["x", "truth"] + list(vals),
                  [[float(xs[i]), float(truth[i])]
                   + [float(vals[k][i]) for k in vals]
                   for i in range(len(xs))])
        trials.append({"trial": trial, "seed": seed,
                       "eps_tci": rep.eps_tci,
                       "final_cost": rep.final_cost,
                       "n_tci": len(rep.ledger),
                       "mean_abs_err": errs})
    summary = {"config": resolved(args),
               "trials": trials,
               "mean_eps_tci": float(np.mean([t["eps_tci"] for t in trials])),
               "mean_abs_err": {k: float(np.mean(
                   [t["mean_abs_err"][k] for t in trials]))
                   for k in ("itpl", "init", "opt", "nocompress")}}
    write_json(os.path.join(args.out, "sine_summary.json"), summary)
    print("sine-demo: mean abs err", summary["mean_abs_err"])
    return 0


# --------------------------------------------------------------- corr-learn

def cmd_corr_learn(args):
    os.makedirs(args.out, exist_ok=True)
    p = kernel_params(args)
    grid = pite.time_grid(p, args.R)
    ham = build_tfim(args.n_site, args.lam)
    chi_tilde, chi = DEFAULT_BONDS.get(args.n_site, (args.chi_tilde,
                                                     args.chi))
    if args.chi_tilde:
        chi_tilde = args.chi_tilde
    if args.chi:
        chi = args.chi
    plan = FitPlan(chi_tilde=chi_tilde, chi=chi, n_itr=args.iters,
                   tci_tolerance=args.tci_tol)
    idx = all_indices(grid)
    pts = decode_many(grid, idx)
    exact = {"num": np.array([qsim.exact_correlation(ham, ham, t, tp)
                              for t, tp in pts]),
             "den": np.array([qsim.exact_correlation(
                 ham, identity_observable(args.n_site), t, tp)
                 for t, tp in pts])}
    observables = {"num": ham, "den": identity_observable(args.n_site)}
    trials = []
    for trial, seed in enumerate(trial_seeds(args.seed, args.trials)):
        cfg = ShotConfig(shots=args.shots, trotter_steps=args.trotter_steps,
                         seed=seed)
        entry = {"trial": trial, "seed": seed}
        for tag, obs in observables.items():
            rep = fit_pipeline(correlator(ham, obs, cfg), grid, plan)
            err = {k: np.abs(evaluate_many(tt, idx) - exact[tag])
                   for k, tt in (("itpl", rep.tt_itpl), ("opt", rep.tt_opt))}
            step = max(1, args.downsample)
            write_csv(os.path.join(
                args.out, f"corr_{tag}_trial_{trial:02d}.csv"),
                ["t", "tp", "abs_err_itpl", "abs_err_opt"],
                [[float(pts[i, 0]), float(pts[i, 1]),
                  float(err["itpl"][i]), float(err["opt"][i])]
                 for i in range(0, len(idx), step)])
            entry[tag] = {
                "n_tci": len(rep.ledger),
                "eps_tci": rep.eps_tci,
                "mean_abs_err_itpl": float(np.mean(err["itpl"])),
                "mean_abs_err_opt": float(np.mean(err["opt"])),
                "opt_better_fraction": float(
                    np.mean(err["opt"] < err["itpl"])),
            }
        trials.append(entry)
    summary = {"config": resolved(args,
                                  {"chi_tilde": chi_tilde, "chi": chi}),
               "trials": trials}
    for tag in observables:
        summary[f"mean_abs_err_itpl_{tag}"] = float(np.mean(
            [t[tag]["mean_abs_err_itpl"] for t in trials]))
        summary[f"mean_abs_err_opt_{tag}"] = float(np.mean(
            [t[tag]["mean_abs_err_opt"] for t in trials]))
    write_json(os.path.join(args.out, "corr_summary.json"), summary)
    print("corr-learn: opt %.3e itpl %.3e (numerator means)"
          % (summary["mean_abs_err_opt_num"],
             summary["mean_abs_err_itpl_num"]))
    return 0


# ---------------------------------------------------------------- gs-energy

def cmd_gs_energy(args):
    os.makedirs(args.out, exist_ok=True)
    p = kernel_params(args)
    grid = pite.time_grid(p, args.R)
    ham = build_tfim(args.n_site, args.lam)
    eg = qsim.exact_ground_energy(ham)
    ident = identity_observable(args.n_site)
    chi_tilde, chi = DEFAULT_BONDS.get(args.n_site, (args.chi_tilde,
                                                     args.chi))
    if args.chi_tilde:
        chi_tilde = args.chi_tilde
    if args.chi:
        chi = args.chi
    plan = FitPlan(chi_tilde=chi_tilde, chi=chi, n_itr=args.iters,
                   tci_tolerance=args.tci_tol)
    ktt = pite.kernel_tt(grid, p, tci_tolerance=args.tci_tol)
    scan_cfg = EnergyScan(center=args.e_center if args.e_center is not None
                          else eg,
                          half_width=args.e_halfwidth, steps=args.e_steps)
    trials = []
    for trial, seed in enumerate(trial_seeds(args.seed, args.trials)):
        cfg = ShotConfig(shots=args.shots, trotter_steps=args.trotter_steps,
                         seed=seed)
        if args.method in ("proposed", "qtci"):
            rep_n = fit_pipeline(correlator(ham, ham, cfg), grid, plan)
            rep_d = fit_pipeline(correlator(ham, ident, cfg), grid, plan)
            ttn = rep_n.tt_opt if args.method == "proposed" else rep_n.tt_itpl
            ttd = rep_d.tt_opt if args.method == "proposed" else rep_d.tt_itpl
            res = pite.energy_scan(ttn, ttd, ktt, scan_cfg, grid)
            budget = (len(rep_n.ledger), len(rep_d.ledger))
        else:
            budget = (args.n_mc_num, args.n_mc_den)
            res = pite.mc_energy_scan(correlator(ham, ham, cfg),
                                      correlator(ham, ident, cfg),
                                      p, scan_cfg, budget[0], budget[1],
                                      seed=seed)
        write_csv(os.path.join(args.out,
                               f"scan_{args.method}_trial_{trial:02d}.csv"),
                  ["e0", "ratio_re", "ratio_im", "valid"],
                  [[float(pt.e0), float(pt.ratio.real), float(pt.ratio.imag),
                    int(pt.valid)] for pt in res.points])
        trials.append({"trial": trial, "seed": seed,
                       "estimate": res.estimate,
                       "relative_error": abs((res.estimate - eg) / eg),
                       "budget": list(budget)})
    rels = [t["relative_error"] for t in trials]
    summary = {"config": resolved(args,
                                  {"chi_tilde": chi_tilde, "chi": chi}),
               "exact_energy": eg,
               "trials": trials,
               "mean_relative_error": float(np.mean(rels)),
               "std_relative_error": float(np.std(rels))}
    write_json(os.path.join(args.out,
                            f"gs_energy_{args.method}.json"), summary)
    print("gs-energy[%s]: mean rel err %.4f (exact %.6f)"
          % (args.method, summary["mean_relative_error"], eg))
    return 0


# ------------------------------------------------------------- bonddim-scan

def cmd_bonddim_scan(args):
    os.makedirs(args.out, exist_ok=True)
    p = kernel_params(args)
    grid = pite.time_grid(p, args.R)
    idx = all_indices(grid)
    pts = decode_many(grid, idx)
    sizes = [int(s) for s in args.n_sites.split(",")]
    rows = []
    for n in sizes:
        ham = build_tfim(n, args.lam)
        ts = grid.grid_values(0)
        vals = qsim.exact_correlation_grid(ham, ham, ts, ts)
        dense = np.empty(grid.local_dims, dtype=np.complex128)
        dense[tuple(idx.T)] = np.array(
            [vals[int(round((t - ts[0]) / (ts[1] - ts[0]))),
                  int(round((tp - ts[0]) / (ts[1] - ts[0])))]
             for t, tp in pts])
        tt = ttcore.tt_from_dense(dense,
                                  TruncationSpec(tolerance=args.svd_tol))
        rows.append([n, max(tt.bond_dims)])
    write_csv(os.path.join(args.out, "bonddims.csv"),
              ["n_site", "max_bond"], rows)

    # eps_tci vs chi-tilde under shot noise (numerator correlator, n_site=2)
    ham = build_tfim(2, args.lam)
    cfg = ShotConfig(shots=args.shots, trotter_steps=args.trotter_steps,
                     seed=args.seed)
    target = tensorize(grid, correlator(ham, ham, cfg))
    scan_rows = []
    for chi_tilde in (1, 2, 3, 4, 6, 8):
        res = tci.cross_interpolate(target, grid.local_dims,
                                    tci.TciOptions(max_bond=chi_tilde,
                                                   tolerance=args.tci_tol))
        scan_rows.append([chi_tilde, float(res.error_estimate),
                          len(res.ledger)])
    write_csv(os.path.join(args.out, "eps_vs_chitilde.csv"),
              ["chi_tilde", "eps_tci", "n_tci"], scan_rows)
    print("bonddim-scan: max bonds", {r[0]: r[1] for r in rows})
    return 0


# ---------------------------------------------------------------- arg wiring

def add_common(sp):
    sp.add_argument("--lambda", dest="lam", type=float, default=1.2)
    sp.add_argument("--beta", type=float, default=1.0)
    sp.add_argument("--tau", type=float, default=2.0)
    sp.add_argument("--T", type=float, default=2.0)
    sp.add_argument("--R", type=int, default=8)
    sp.add_argument("--tci-tol", type=float, default=1e-5)
    sp.add_argument("--trotter-steps", type=int, default=100)
    sp.add_argument("--shots", type=int, default=15000)
    sp.add_argument("--iters", type=int, default=500)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--trials", type=int, default=20)
    sp.add_argument("--out", default="out")


def main(argv=None):
    parser = argparse.ArgumentParser(prog="qttfit")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("sine-demo", help="noisy sine three-step fit")
    add_common(sp)
    sp.set_defaults(R=12)
    sp.add_argument("--sigma", type=float, default=0.1)
    sp.add_argument("--chi-tilde", type=int, default=6)
    sp.add_argument("--chi", type=int, default=2)
    sp.set_defaults(func=cmd_sine_demo)

    sp = sub.add_parser("corr-learn", help="learn correlation QTTs")
    add_common(sp)
    sp.add_argument("--n-site", type=int, default=2)
    sp.add_argument("--chi-tilde", type=int, default=0)
    sp.add_argument("--chi", type=int, default=0)
    sp.add_argument("--downsample", type=int, default=50)
    sp.set_defaults(func=cmd_corr_learn)

    sp = sub.add_parser("gs-energy", help="ground-state energy scan")
    add_common(sp)
    sp.add_argument("--method", choices=("proposed", "qtci", "mc"),
                    default="proposed")
    sp.add_argument("--n-site", type=int, default=2)
    sp.add_argument("--chi-tilde", type=int, default=0)
    sp.add_argument("--chi", type=int, default=0)
    sp.add_argument("--e-center", type=float, default=None)
    sp.add_argument("--e-halfwidth", type=float, default=2.0)
    sp.add_argument("--e-steps", type=int, default=40)
    sp.add_argument("--n-mc-num", type=int, default=767)
    sp.add_argument("--n-mc-den", type=int, default=742)
    sp.set_defaults(func=cmd_gs_energy)

    sp = sub.add_parser("bonddim-scan",
                        help="correlation bond dimensions and eps scan")
    add_common(sp)
    sp.add_argument("--n-sites", default="2,4,6")
    sp.add_argument("--svd-tol", type=float, default=1e-10)
    sp.set_defaults(func=cmd_bonddim_scan)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
