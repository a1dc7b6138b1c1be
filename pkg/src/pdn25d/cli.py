"""Command-line entry point: model, ac, tran, opt, sweep-correlation, report."""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import BaselineConfig, optimize_layout
from .case import Case, load_case
from .errors import CaseFileError, PdnError, PreconditionError
from .floorplan import DecapLayout
from .freq import is_compliant, mask_violation, reward_from_excess
from .io import (file_digest, vvi_grid, write_cost_history, write_json, write_reward_curve,
                 write_rows, write_tensor_dump)
from .netlist import apply_decaps, assemble_hierarchy
from .problem import make_profiles, monitored_nodes
from .transient import transient_solve
from .vvi import vvi_report


def _load_layout(args, case: Case) -> DecapLayout:
    if not args.layout:
        return DecapLayout.empty(case.floorplan)
    layout = DecapLayout.load(args.layout)  # FileNotFoundError -> I/O error exit
    layout.validate(case.floorplan)
    return layout


def _nf(farads: float) -> float:
    return round(farads * 1e9, 9)


def _manifest(args, case: Case, extra: dict | None = None) -> dict:
    inputs = {"case": case.digest}
    if getattr(args, "layout", None):
        inputs["layout"] = file_digest(args.layout)
    cfg = {k: v for k, v in vars(args).items() if k not in ("func", "out_dir", "wall_time")}
    return {"tool": "pdn25d", "version": __version__, "command": args.command, "arguments": cfg,
            "case": case.resolved, "input_sha256": inputs, **(extra or {})}


def cmd_model(args) -> int:
    case = load_case(args.case)
    net = assemble_hierarchy(case.floorplan, case.params)
    fp = case.floorplan
    kinds = {k: net.count(k) for k in ("R", "L", "C", "G", "RL", "RC", "V")}
    print(f"case {case.name}")
    print(f"chiplets {len(fp.chiplets)}: " + ", ".join(f"{c.name}{list(c.dims)}@{list(c.origin)}" for c in fp.chiplets))
    print(f"interposer {fp.interposer_dims[0]}x{fp.interposer_dims[1]}, tsv sites {len(fp.tsv_sites)}")
    print(f"nodes {net.n_nodes} (incl. ground), branches {len(net.branches)}")
    print("branch counts " + " ".join(f"{k}={v}" for k, v in kinds.items() if v))
    print(f"decap slots: interposer {fp.n_intp}, chiplets {fp.n_chip}")
    print("ports " + " ".join(net.port_names))
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        net.write_listing(out / "netlist.txt")
        labels = sorted(((n, "_".join(map(str, lab))) for lab, n in net.labels.items()))
        write_rows(out / "labels.csv", ["node", "label"], labels)
        write_json(out / "manifest.json", _manifest(args, case))
    return 0


def cmd_ac(args) -> int:
    case = load_case(args.case)
    layout = _load_layout(args, case)
    problem = case.freq_problem()
    ac = problem.impedance(layout)
    excess = mask_violation(ac, case.target)
    k = int(np.argmax(excess))
    reward = reward_from_excess(excess, layout, case.opt.weights, case.floorplan)
    verdict = "compliant" if is_compliant(excess) else "non-compliant"
    print(f"verdict {verdict}")
    print(f"worst excess {excess[k]:.6g} ohm at {ac.frequencies[k]:.6g} Hz")
    print(f"reward {reward:.6g}")
    out = Path(args.out_dir)
    ac.to_csv(out / "impedance.csv", case.target)
    write_json(out / "ac_report.json", {
        "verdict": verdict, "worst_excess_ohm": float(excess[k]), "worst_frequency_hz": float(ac.frequencies[k]),
        "reward": reward, "total_mim_nf": _nf(layout.total_mim()), "total_mos_nf": _nf(layout.total_mos()),
    })
    write_json(out / "manifest.json", _manifest(args, case))
    return 0


def cmd_tran(args) -> int:
    case = load_case(args.case)
    layout = _load_layout(args, case)
    rho = case.time.train_rho if args.rho is None else args.rho
    seed = case.time.seed if args.seed is None else args.seed
    net = apply_decaps(assemble_hierarchy(case.floorplan, case.params), layout, case.params)
    profiles = make_profiles(net, case.floorplan, rho, case.time.i_ref, seed, case.time.currents)
    sources = [s for p in profiles for s in p.sources]
    sol = transient_solve(net, sources, case.time.dt, case.time.t_end,
                          monitored_nodes(net, case.floorplan), loss_frequency=case.time.loss_frequency)
    rep = vvi_report(sol, case.time.vvi)
    out = Path(args.out_dir)
    sol.to_csv(out / "waveforms.csv")
    rep.to_csv(out / "vvi.csv")
    write_json(out / "vvi_grid.json", vvi_grid(rep, case.floorplan))
    summary = {"rho": rho, "seed": seed, "total_vvi_vs": rep.total, "violation_nodes": rep.violation_count,
               "min_voltage_v": float(sol.voltages.min()), "max_voltage_v": float(sol.voltages.max())}
    write_json(out / "tran_report.json", summary)
    write_json(out / "manifest.json", _manifest(args, case))
    print(f"total VVI {rep.total:.6g} V*s, violation nodes {rep.violation_count}/{len(rep.labels)}")
    print(f"voltage range [{summary['min_voltage_v']:.6f}, {summary['max_voltage_v']:.6f}] V")
    return 0


def _run_dir(args, case: Case, phase: str, seed: int) -> Path:
    stamp = args.run_name or time.strftime("%Y%m%dT%H%M%S")
    path = Path(args.out_dir) / f"{case.name}_{phase}_s{seed}_{stamp}"
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_opt(args) -> int:
    from .rl.env import FreqEnv, TimeEnv
    from .rl.train import checkpoint_tensors, train

    case = load_case(args.case)
    seed = case.time.seed if args.seed is None else args.seed
    phase = args.phase
    if phase == "time" and not args.layout:
        raise PreconditionError("the time phase needs a phase-1 layout (--layout)")
    budget = args.budget or (case.opt.time_budget if phase == "time" else case.opt.budget)
    gamma = case.opt.gamma if args.gamma is None else args.gamma
    run = _run_dir(args, case, phase, seed)
    report: dict = {"phase": phase, "seed": seed, "budget": budget}

    if phase in ("freq", "time"):
        if phase == "freq":
            env = FreqEnv(case.freq_problem(), case.opt.ppo.max_steps,
                          stop_on_success=case.opt.stop_on_success)
        else:
            start = _load_layout(args, case)
            env = TimeEnv(case.time_problem(), start, gamma, case.opt.ppo.max_steps,
                          stop_on_success=case.opt.stop_on_success)
            report.update(gamma=gamma, initial_total_vvi=env.init.total,
                          initial_violation_nodes=env.init.violation_count)

        def on_improve(layout, reward, episode):
            layout.save(run / "best_layout.json")

        res = train(env, case.opt.ppo, seed, budget, on_improve)
        best = res.best_layout
        write_reward_curve(run / "reward_curve.csv", [
            (e.episode, e.reward, e.c_mos, e.c_mim, e.wall_s if args.wall_time else "")
            for e in res.episodes])
        write_rows(run / "best_so_far.csv", ["episode", "best_reward"],
                   [(e.episode, e.best) for e in res.episodes])
        write_tensor_dump(run / "checkpoint.txt", checkpoint_tensors(res.net))
        report.update(best_reward=res.best_reward, episodes=len(res.episodes), evaluations=res.steps)
        if phase == "time":
            final, rep = env.evaluate(best)
            report.update(total_vvi=rep.total, violation_nodes=rep.violation_count,
                          vvi_ratio=rep.total / env.init.total)
            rep.to_csv(run / "vvi.csv")
        else:
            reward, compliant = env.problem.evaluate(best)
            report.update(compliant=compliant, reevaluated_reward=reward)
    else:
        cfg = BaselineConfig(**{**case.opt.baseline.__dict__, "method": phase, "budget": budget, "seed": seed})
        problem = case.freq_problem()
        best, res = optimize_layout(problem, cfg)
        write_cost_history(run / "history.csv", res.history)
        reward, compliant = problem.evaluate(best)
        report.update(best_reward=-res.best_cost, reevaluated_reward=reward, compliant=compliant,
                      evaluations=res.evaluations)
    best.save(run / "best_layout.json")
    report.update(total_mim_nf=_nf(best.total_mim()), total_mos_nf=_nf(best.total_mos()))
    write_json(run / "report.json", report)
    write_json(run / "manifest.json", _manifest(args, case, {"budget": budget, "gamma": gamma}))
    print(f"run directory {run}")
    _print_report(report)
    return 0


def cmd_sweep_correlation(args) -> int:
    case = load_case(args.case)
    layout = _load_layout(args, case)
    rhos = args.rho_list or list(case.time.rho)
    n = args.profiles or case.time.profiles
    seed = case.time.seed if args.seed is None else args.seed
    rows = []
    for rho in rhos:
        prob = case.time_problem(rho, 1, seed)
        totals = []
        for k in range(n):
            prob.profile_sets = case.profile_sets(rho, 1, seed + k)
            totals.append(prob.report(layout).total)
        totals = np.asarray(totals)
        rows.append((float(rho), float(totals.mean()), float(totals.std()), len(totals)))
        print(f"rho {rho:g}: mean total VVI {totals.mean():.6g} V*s (std {totals.std():.3g}, n={len(totals)})")
    out = Path(args.out_dir)
    write_rows(out / "correlation_sweep.csv", ["rho", "mean_total_vvi_vs", "std_total_vvi_vs", "profiles"], rows)
    write_json(out / "manifest.json", _manifest(args, case))
    return 0


def _print_report(report: dict) -> None:
    for key in sorted(report):
        print(f"{key:24s} {report[key]}")


def cmd_report(args) -> int:
    run = Path(args.run_dir)
    report = json.loads((run / "report.json").read_text())
    layout = DecapLayout.load(run / "best_layout.json")
    report["layout_total_mim_nf"] = _nf(layout.total_mim())
    report["layout_total_mos_nf"] = _nf(layout.total_mos())
    _print_report(report)
    if args.out_dir:
        write_rows(Path(args.out_dir) / "summary.csv", ["key", "value"],
                   [(k, str(report[k])) for k in sorted(report)])
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pdn25d", description="2.5D PDN analysis and decap optimization")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, layout=True, out=True):
        sp.add_argument("--case", required=True, help="case YAML file or bundled case name")
        if layout:
            sp.add_argument("--layout", help="decap layout JSON (default: empty layout)")
        if out:
            sp.add_argument("--out-dir", default="runs", help="output directory")

    sp = sub.add_parser("model", help="build the PDN netlist and print a summary")
    common(sp, layout=False, out=False)
    sp.add_argument("--out-dir", help="also write netlist listing and label table here")
    sp.set_defaults(func=cmd_model)

    sp = sub.add_parser("ac", help="impedance sweep and mask compliance")
    common(sp)
    sp.set_defaults(func=cmd_ac)

    sp = sub.add_parser("tran", help="transient run under one generated load profile")
    common(sp)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--rho", type=float)
    sp.set_defaults(func=cmd_tran)

    sp = sub.add_parser("opt", help="optimize decaps (PPO phases or GA/DA baselines)")
    common(sp)
    sp.add_argument("--phase", required=True, choices=["freq", "time", "ga", "da"])
    sp.add_argument("--seed", type=int)
    sp.add_argument("--budget", type=int, help="number of reward evaluations")
    sp.add_argument("--gamma", type=float, help="VVI tolerance for the time phase")
    sp.add_argument("--run-name", help="run directory suffix (default: timestamp)")
    sp.add_argument("--wall-time", action="store_true", help="record wall time in the reward curve")
    sp.set_defaults(func=cmd_opt)

    sp = sub.add_parser("sweep-correlation", help="mean total VVI across I/O correlation values")
    common(sp)
    sp.add_argument("--rho", dest="rho_list", type=float, nargs="+")
    sp.add_argument("--profiles", type=int)
    sp.add_argument("--seed", type=int)
    sp.set_defaults(func=cmd_sweep_correlation)

    sp = sub.add_parser("report", help="summarize an optimization run directory")
    sp.add_argument("--run-dir", required=True)
    sp.add_argument("--out-dir")
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CaseFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3
    except PdnError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
