"""Command-line entry point: solve, simulate, verify.

Pipelines are deterministic end to end: all randomness is seeded from the
config, kernels are cached by content key, and every artifact embeds the
effective config hash and tool version.  CSV files use '.' decimals and
no locale; figures are rendered next to them unless --no-figures.

Exit codes: 0 success, 2 validation, 3 convergence, 4 certification
failure, 5 I/O.
"""

from __future__ import annotations

import argparse
import hashlib
import sys
from pathlib import Path

import numpy as np

from . import bellman, control, figures, kernel as kernel_mod, verify
from .config import TOOL_VERSION, RunConfig
from .entropic import holder_split
from .errors import ConvergenceError, DomainError, NumericalError
from .processes import DiffusionModel, derive_stream

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_CONVERGENCE = 3
EXIT_CERTIFICATION = 4
EXIT_IO = 5


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _write_csv(path: Path, comments: dict, columns: dict) -> None:
    names = list(columns)
    rows = len(next(iter(columns.values())))
    with open(path, "w", newline="\n") as fh:
        for key, val in comments.items():
            fh.write(f"# {key}={_fmt(val)}\n")
        fh.write(",".join(names) + "\n")
        for i in range(rows):
            fh.write(",".join(_fmt(columns[n][i]) for n in names) + "\n")


def _write_summary(path: Path, record: dict) -> None:
    with open(path, "w", newline="\n") as fh:
        for key, val in record.items():
            fh.write(f"{key}={_fmt(val)}\n")


def _read_csv(path: Path):
    comments, names, data = {}, None, []
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("# "):
                key, _, val = line[2:].partition("=")
                comments[key] = val
            elif names is None:
                names = line.split(",")
            elif line:
                data.append(line.split(","))
    cols = {n: np.array([row[i] for row in data], dtype=float)
            for i, n in enumerate(names)}
    return comments, cols


def _kernel_cache_key(cfg: RunConfig, grid) -> str:
    h = hashlib.sha256()
    h.update(cfg.model_tag().encode())
    h.update(cfg.reward_tag().encode())
    h.update(grid.content_hash().encode())
    h.update(f"{cfg.get('problem', 'delta')}:{cfg.get('kernel', 'n_samples')}:"
             f"{cfg.get('kernel', 'seed')}".encode())
    return h.hexdigest()[:16]


def _load_or_build_kernel(cfg: RunConfig, grid, out: Path, threads: int):
    key = _kernel_cache_key(cfg, grid)
    cache = out / f"kernel_{key}.bin"
    if cache.exists():
        return kernel_mod.load_kernel(cache)
    model = cfg.build_model()
    built = kernel_mod.build_kernel(
        model, grid, cfg.reward_function(),
        delta=cfg.getfloat("problem", "delta"),
        n_samples=cfg.getint("kernel", "n_samples"),
        seed=cfg.getint("kernel", "seed"),
        model_tag=cfg.model_tag(), reward_tag=cfg.reward_tag(),
        threads=threads,
    )
    kernel_mod.save_kernel(built, cache)
    return built


def cmd_solve(cfg: RunConfig, out: Path, threads: int, render: bool) -> int:
    grid = cfg.build_grid()
    problem = cfg.build_problem(grid)
    params = cfg.risk_params()
    frozen = _load_or_build_kernel(cfg, grid, out, threads)
    try:
        solution = bellman.solve_fixed_point(
            frozen, problem, params,
            tol=cfg.getfloat("solver", "tol"),
            max_iter=cfg.getint("solver", "max_iter"),
        )
    except ConvergenceError as err:
        print(f"solve: {err}", file=sys.stderr)
        return EXIT_CONVERGENCE
    policy = control.extract_policy(solution, frozen, problem, params)
    targets = np.where(policy.shift_flag.astype(bool),
                       grid.points[np.maximum(policy.target_index, 0)], np.nan)
    meta = {
        "tool_version": TOOL_VERSION,
        "config_hash": cfg.config_hash(),
        "gamma": solution.gamma,
        "delta": solution.delta,
        "lambda": solution.lam,
        "residual": solution.residual_span,
        "iterations": solution.iterations,
        "grid_hash": grid.content_hash(),
    }
    _write_csv(out / "solution.csv", meta, {
        "x": grid.points,
        "omega": grid.weight_values,
        "w": solution.w,
        "action_flag": policy.shift_flag.astype(int),
        "action_target": targets,
    })
    ess = min(
        kernel_mod.esscher_ess(frozen, i, solution.w, params)
        for i in range(grid.n)
    )
    _write_summary(out / "solve_summary.txt", {
        **meta,
        "beta": solution.beta,
        "anchor_index": solution.anchor_index,
        "clamp_fraction": frozen.clamp_fraction,
        "min_esscher_ess": ess,
        "shift_states": policy.n_shift_states,
    })
    if render:
        figures.solution_figure(out / "solution.png", grid, solution,
                                policy.shift_flag, targets)
    print(f"solve: lambda={solution.lam!r} residual={solution.residual_span:.3e} "
          f"iterations={solution.iterations}")
    return EXIT_OK


def _policy_from_artifact(comments, cols, cfg: RunConfig, grid):
    if comments.get("config_hash") != cfg.config_hash():
        raise DomainError(
            "policy artifact was produced under a different config "
            f"(artifact hash {comments.get('config_hash')}, "
            f"current {cfg.config_hash()}); re-run solve"
        )
    flags = cols["action_flag"].astype(int)
    target_index = np.full(grid.n, -1, dtype=int)
    for i, (flag, tv) in enumerate(zip(flags, cols["action_target"])):
        if flag:
            target_index[i] = grid.nearest_index(float(tv))
    return control.StationaryPolicy(
        grid=grid, shift_flag=flags.astype(np.int8), target_index=target_index
    )


def cmd_simulate(cfg: RunConfig, policy_path: Path, out: Path, render: bool) -> int:
    if not policy_path.exists():
        print(f"simulate: policy artifact not found: {policy_path}", file=sys.stderr)
        return EXIT_IO
    grid = cfg.build_grid()
    comments, cols = _read_csv(policy_path)
    policy = _policy_from_artifact(comments, cols, cfg, grid)
    problem = cfg.build_problem(grid)
    params = cfg.risk_params()
    model = cfg.build_model()
    lam = float(comments["lambda"])
    est = control.estimate_longrun_value(
        model, policy, problem,
        start=cfg.getfloat("simulate", "start"),
        n_steps=cfg.getint("simulate", "n_steps"),
        n_reps=cfg.getint("simulate", "n_reps"),
        params=params,
        seed=cfg.getint("simulate", "seed"),
    )
    lam_over_delta = lam / problem.delta
    gap = abs(lam_over_delta - est.J_hat)
    meta = {"tool_version": TOOL_VERSION, "config_hash": cfg.config_hash()}
    ks = np.arange(1, est.per_horizon.size + 1)
    _write_csv(out / "longrun.csv", meta, {
        "k": ks,
        "T_k": ks * problem.delta,
        "J_hat_k": est.per_horizon,
    })
    _write_summary(out / "simulate_summary.txt", {
        **meta,
        "J_hat": est.J_hat,
        "stderr": est.stderr,
        "lambda_over_delta": lam_over_delta,
        "gap": gap,
        "mean_shifts_per_step": est.mean_shifts_per_step,
    })
    if render:
        figures.longrun_figure(out / "longrun.png", ks * problem.delta,
                               est.per_horizon, lam_over_delta)
    print(f"simulate: J_hat={est.J_hat!r} lambda/delta={lam_over_delta!r} "
          f"gap={gap:.4f} (stderr {est.stderr:.4f})")
    return EXIT_OK


def _verify_drift(cfg: RunConfig, out: Path, threads: int, render: bool) -> int:
    model = cfg.build_model()
    gammas = sorted(set(cfg.getfloats("verify", "drift_gammas"))
                    | {0.0, cfg.getfloat("problem", "gamma")})
    est = verify.verify_drift(
        model, np.abs, gammas,
        test_states=cfg.drift_test_states(),
        delta=cfg.getfloat("problem", "delta"),
        n_samples=cfg.getint("verify", "drift_samples"),
        seed=cfg.getint("verify", "seed"),
    )
    meta = {"tool_version": TOOL_VERSION, "config_hash": cfg.config_hash()}
    rows_g, rows_x, rows_w, rows_mu, rows_bound = [], [], [], [], []
    wx = np.abs(est.test_states)
    for g in gammas:
        for i, x in enumerate(est.test_states):
            rows_g.append(g)
            rows_x.append(x)
            rows_w.append(wx[i])
            rows_mu.append(est.mu_end_hat[g][i])
            b = est.b1_hat if est.certified else 1.0
            rows_bound.append(b * wx[i] + est.M2_hat[g])
    _write_csv(out / "drift.csv", meta, {
        "gamma": rows_g, "state": rows_x, "omega": rows_w,
        "mu_hat": rows_mu, "bound": rows_bound,
    })
    record = {
        **meta,
        "certified": est.certified,
        "b1_hat": est.b1_hat,
        "n_samples": est.n_samples,
    }
    for g in gammas:
        record[f"M1_hat[{g}]"] = est.M1_hat[g]
        record[f"M2_hat[{g}]"] = est.M2_hat[g]
    if not est.certified:
        record["failure_reason"] = est.failure_reason
    _write_summary(out / "drift_summary.txt", record)
    if render:
        figures.drift_figure(out / "drift.png", est, gammas)
    print(f"verify drift: certified={est.certified} b1_hat={est.b1_hat}")
    return EXIT_OK if est.certified else EXIT_CERTIFICATION


def _verify_minorisation(cfg: RunConfig, out: Path, threads: int, render: bool) -> int:
    model = cfg.build_model()
    L = cfg.getfloat("grid", "L")
    est = verify.verify_minorisation(
        model, np.abs,
        radius_R=cfg.getfloat("verify", "radius_R"),
        delta=cfg.getfloat("problem", "delta"),
        histogram_bins=cfg.getint("verify", "bins"),
        n_samples=cfg.getint("verify", "minorisation_samples"),
        seed=cfg.getint("verify", "seed"),
        probe_states=cfg.minorisation_probes(),
        bin_range=(-L, L),
        shift_range=(cfg.getfloat("problem", "shift_low"),
                     cfg.getfloat("problem", "shift_high")),
    )
    meta = {"tool_version": TOOL_VERSION, "config_hash": cfg.config_hash()}
    _write_csv(out / "minorisation.csv", meta, {
        "bin_lo": est.bin_edges[:-1],
        "bin_hi": est.bin_edges[1:],
        "nu_hat": est.nu_hat,
    })
    _write_summary(out / "minorisation_summary.txt", {
        **meta,
        "certified": est.certified,
        "d_hat": est.d_hat,
        "overlap_on_U": est.overlap_on_U,
        "radius_R": est.radius_R,
        "bins": est.histogram_bins,
    })
    if render:
        figures.minorisation_figure(out / "minorisation.png", est)
    print(f"verify minorisation: d_hat={est.d_hat!r} overlap={est.overlap_on_U!r}")
    return EXIT_OK if est.certified and est.overlap_on_U > 0.0 else EXIT_CERTIFICATION


def _verify_holder(cfg: RunConfig, out: Path, threads: int, render: bool) -> int:
    n_inst = cfg.getint("verify", "holder_instances")
    seed = cfg.getint("verify", "seed")
    gammas = (-2.0, -0.5)
    ps = (1.5, 2.0, 4.0)
    gaps_super, gaps_sub = [], []
    violations = 0
    cols = {k: [] for k in ("instance", "gamma", "p", "lhs", "superadditive",
                            "subadditive", "ok")}
    for i in range(n_inst):
        rng = derive_stream(seed, i)
        m = int(rng.integers(2, 200))
        x = rng.standard_normal(m)
        y = 0.5 * x + rng.standard_normal(m)
        for g in gammas:
            for p in ps:
                split = holder_split(x, y, g, p)
                tol = 1e-9 * (1.0 + abs(split.lhs))
                ok = (split.lhs >= split.superadditive_bound - tol
                      and split.lhs <= split.subadditive_bound + tol)
                violations += not ok
                gaps_super.append(split.lhs - split.superadditive_bound)
                gaps_sub.append(split.subadditive_bound - split.lhs)
                for key, val in (("instance", i), ("gamma", g), ("p", p),
                                 ("lhs", split.lhs),
                                 ("superadditive", split.superadditive_bound),
                                 ("subadditive", split.subadditive_bound),
                                 ("ok", int(ok))):
                    cols[key].append(val)
    meta = {"tool_version": TOOL_VERSION, "config_hash": cfg.config_hash()}
    _write_csv(out / "holder.csv", meta, cols)
    _write_summary(out / "holder_summary.txt", {
        **meta,
        "instances": n_inst,
        "checks": len(cols["ok"]),
        "violations": violations,
    })
    if render:
        figures.holder_figure(out / "holder.png", gaps_super, gaps_sub)
    print(f"verify holder: {len(cols['ok'])} checks, {violations} violations")
    return EXIT_OK if violations == 0 else EXIT_CERTIFICATION


def _verify_contraction(cfg: RunConfig, out: Path, threads: int, render: bool) -> int:
    grid = cfg.build_grid()
    problem = cfg.build_problem(grid)
    frozen = _load_or_build_kernel(cfg, grid, out, threads)
    est = bellman.contraction_estimate(
        frozen, problem, cfg.risk_params(),
        span_bound=cfg.getfloat("verify", "contraction_span"),
        n_pairs=cfg.getint("verify", "contraction_pairs"),
        rng=derive_stream(cfg.getint("verify", "seed"), 31),
    )
    meta = {"tool_version": TOOL_VERSION, "config_hash": cfg.config_hash()}
    _write_csv(out / "contraction.csv", meta, {
        "pair": np.arange(est.ratios.size),
        "ratio": est.ratios,
    })
    _write_summary(out / "contraction_summary.txt", {
        **meta, "L_hat": est.L_hat, "pairs": est.ratios.size,
    })
    if render:
        figures.contraction_figure(out / "contraction.png", est)
    print(f"verify contraction: L_hat={est.L_hat!r} over {est.ratios.size} pairs")
    return EXIT_OK if est.L_hat < 1.0 else EXIT_CERTIFICATION


def _verify_sweep(cfg: RunConfig, out: Path, threads: int, render: bool) -> int:
    grid = cfg.build_grid()
    problem = cfg.build_problem(grid)
    result = verify.lambda_gamma_sweep(
        lambda: _load_or_build_kernel(cfg, grid, out, threads),
        problem,
        cfg.getfloats("verify", "gammas"),
        tol=cfg.getfloat("solver", "tol"),
        max_iter=cfg.getint("solver", "max_iter"),
    )
    meta = {"tool_version": TOOL_VERSION, "config_hash": cfg.config_hash()}
    _write_csv(out / "sweep.csv", meta, {
        "gamma": [g for g, _ in result.pairs],
        "lambda": [l for _, l in result.pairs],
    })
    gate_ok = result.max_adjacent_jump <= 0.5 * result.lambda_range or \
        result.lambda_range == 0.0
    _write_summary(out / "sweep_summary.txt", {
        **meta,
        "max_adjacent_jump": result.max_adjacent_jump,
        "lambda_range": result.lambda_range,
        "continuity_gate": gate_ok,
    })
    if render:
        figures.sweep_figure(out / "sweep.png", result.pairs)
    print(f"verify sweep: max jump={result.max_adjacent_jump!r} "
          f"range={result.lambda_range!r}")
    return EXIT_OK if gate_ok else EXIT_CERTIFICATION


def _verify_noise_bound(cfg: RunConfig, out: Path, threads: int, render: bool) -> int:
    if cfg.get("model", "kind") != "diffusion":
        print("verify noise-bound: requires a diffusion model", file=sys.stderr)
        return EXIT_VALIDATION
    sigma = cfg.getfloat("model", "sigma")
    alpha = cfg.getfloat("model", "alpha")
    substeps = cfg.getint("model", "substeps")
    t = cfg.getfloat("verify", "noise_t")
    n = cfg.getint("verify", "noise_samples")
    seed = cfg.getint("verify", "seed")
    rows = []
    all_ok = True
    for d in (1, 2):
        model = DiffusionModel.ornstein_uhlenbeck(alpha, sigma, dimension=d,
                                                  substeps=substeps)
        for g in (0.5, 1.0, 2.0):
            check = verify.verify_noise_bound_example1(model, g, t, n, seed)
            rows.append((d, g, check.empirical_mgf, check.analytic_bound,
                         check.rel_stderr, check.satisfied))
            all_ok &= check.satisfied
    meta = {"tool_version": TOOL_VERSION, "config_hash": cfg.config_hash()}
    _write_csv(out / "noise_bound.csv", meta, {
        "dimension": [r[0] for r in rows],
        "gamma": [r[1] for r in rows],
        "empirical_mgf": [r[2] for r in rows],
        "analytic_bound": [r[3] for r in rows],
        "rel_stderr": [r[4] for r in rows],
        "ok": [int(r[5]) for r in rows],
    })
    _write_summary(out / "noise_bound_summary.txt", {
        **meta, "checks": len(rows), "all_ok": all_ok,
    })
    if render:
        figures.noise_bound_figure(out / "noise_bound.png",
                                   [(r[0], r[1], r[2], r[3]) for r in rows])
    print(f"verify noise-bound: {len(rows)} checks, all_ok={all_ok}")
    return EXIT_OK if all_ok else EXIT_CERTIFICATION


_VERIFY_TARGETS = {
    "drift": _verify_drift,
    "minorisation": _verify_minorisation,
    "holder": _verify_holder,
    "contraction": _verify_contraction,
    "sweep": _verify_sweep,
    "noise-bound": _verify_noise_bound,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="riskimpulse",
        description="Long-run risk-sensitive impulse control solver and verifier",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="path to the INI config")
        p.add_argument("--out", default="out", help="artifact directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seeds")
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads for kernel construction")
        p.add_argument("--no-figures", action="store_true",
                       help="skip figure rendering")

    p_solve = sub.add_parser("solve", help="solve the Bellman fixed point")
    common(p_solve)
    p_sim = sub.add_parser("simulate", help="replay the policy on fresh noise")
    common(p_sim)
    p_sim.add_argument("--policy", required=True,
                       help="solution.csv produced by solve")
    p_ver = sub.add_parser("verify", help="run a certification report")
    p_ver.add_argument("which", choices=sorted(_VERIFY_TARGETS),
                       help="which certificate to run")
    common(p_ver)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("--threads must be >= 1", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        cfg = RunConfig.load(args.config, seed_override=args.seed)
    except FileNotFoundError as err:
        print(f"config: {err}", file=sys.stderr)
        return EXIT_IO
    except DomainError as err:
        print(str(err), file=sys.stderr)
        return EXIT_VALIDATION
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as err:
        print(f"out dir: {err}", file=sys.stderr)
        return EXIT_IO
    render = not args.no_figures
    try:
        if args.command == "solve":
            return cmd_solve(cfg, out, args.threads, render)
        if args.command == "simulate":
            return cmd_simulate(cfg, Path(args.policy), out, render)
        return _VERIFY_TARGETS[args.which](cfg, out, args.threads, render)
    except DomainError as err:
        print(str(err), file=sys.stderr)
        return EXIT_VALIDATION
    except ConvergenceError as err:
        print(str(err), file=sys.stderr)
        return EXIT_CONVERGENCE
    except NumericalError as err:
        print(str(err), file=sys.stderr)
        return EXIT_CONVERGENCE
    except OSError as err:
        print(str(err), file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
