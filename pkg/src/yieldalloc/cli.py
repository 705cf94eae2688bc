"""Command-line pipeline: generate -> drift -> solve-optimal -> run-baseline
-> train -> evaluate -> report.

Every subcommand writes under ``--out`` and takes its randomness from
``--seed``. ``--config`` points at a TOML file whose tables
(``[generator]``, ``[drift]``, ``[trainer]``, ``[pid]``) mirror the fields
of the corresponding dataclasses; flags given on the command line win.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np

from .errors import ConfigError, YieldAllocError

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

log = logging.getLogger("yieldalloc")

EXIT_USAGE = 2
EXIT_IO = 10

OPTIMAL_FILE = "optimal.json"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _load_config(path) -> dict:
    if path is None:
        return {}
    with open(path, "rb") as fh:
        try:
            return tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None


def _section(cfg: dict, name: str, cls) -> dict:
    values = dict(cfg.get(name, {}))
    known = {f.name for f in fields(cls)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"[{name}] has unknown keys: {', '.join(sorted(unknown))}")
    for k, v in values.items():
        if isinstance(v, list):
            values[k] = tuple(v)
    return values


def _overrides(args, names) -> dict:
    return {k: getattr(args, k) for k in names if getattr(args, k, None) is not None}


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _read_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _shifts(path) -> np.ndarray:
    """Shifts from an ``optimal.json`` written by ``solve-optimal``."""
    return np.asarray(_read_json(path)["alpha_star"], dtype=np.float64)


def _r_star(path) -> float:
    return float(_read_json(path)["r_star"])


def _report_dict(rep, method: str, scenario: str) -> dict:
    return {"method": method, "scenario": scenario, "r_gc": rep.r_gc, "r_rtb": rep.r_rtb, "q_gc": rep.q_gc,
            "yield": rep.yield_, "r_star": rep.r_star, "delivered": list(rep.delivered),
            "shortfall": list(rep.shortfall)}


# --
# subcommands


def cmd_generate(args, cfg):
    from .scenario import GeneratorSpec, generate_scenario, save_scenario

    values = _section(cfg, "generator", GeneratorSpec)
    values.update(_overrides(args, ("m", "n", "T")))
    for k in ("m", "n"):
        if k not in values:
            raise ConfigError(f"--{k} is required (flag or [generator] table)")
    s = generate_scenario(GeneratorSpec(**values), args.seed)
    path = _out(args) / args.name
    save_scenario(s, path)
    print(f"wrote {path} (m={s.m}, n={s.n}, T={s.T})")


def cmd_drift(args, cfg):
    from .scenario import DriftSpec, apply_drift, load_scenario, save_scenario

    values = _section(cfg, "drift", DriftSpec)
    values.update(_overrides(args, ("volume_factor", "price_factor", "quality_noise")))
    test = apply_drift(load_scenario(args.scenario), DriftSpec(**values), args.seed)
    path = _out(args) / args.name
    save_scenario(test, path)
    print(f"wrote {path} (n={test.n})")


def cmd_solve_optimal(args, cfg):
    from .allocator import assign
    from .oracle import solve_dual, verify_complementary_slackness
    from .scenario import load_scenario

    s = load_scenario(args.scenario)
    sol = solve_dual(s, tol=args.tol, max_iters=args.max_iters)
    cert = verify_complementary_slackness(s, assign(s, sol.alpha_star), sol)
    result = {
        "scenario": str(args.scenario),
        "alpha_star": sol.alpha_star.tolist(),
        "r_star": sol.dual_objective,
        "primal_yield": sol.primal_yield,
        "gap": sol.gap,
        "relative_gap": sol.relative_gap,
        "iterations": sol.iterations,
        "converged": sol.converged,
        "certified": cert.certified,
    }
    out = Path(args.out) if args.out else Path(args.scenario).parent
    out.mkdir(parents=True, exist_ok=True)
    path = out / (args.name or f"{Path(args.scenario).stem}.{OPTIMAL_FILE}")
    _write_json(path, result)
    print("alpha* = " + " ".join(f"{a:.4f}" for a in sol.alpha_star))
    print(f"R* = {sol.dual_objective:.2f}  primal = {sol.primal_yield:.2f}  "
          f"relative gap = {sol.relative_gap:.2e}  iterations = {sol.iterations}")
    print(f"wrote {path}")


def cmd_run_baseline(args, cfg):
    from .baselines import PidGains, run_contract_first, run_pid
    from .scenario import load_scenario

    s = load_scenario(args.scenario)
    alpha = _shifts(args.alpha)
    if args.baseline == "cf":
        rep = run_contract_first(s, alpha, **cfg.get("contract_first", {}))
    else:
        gains = PidGains(**_section(cfg, "pid", PidGains))
        rep, _ = run_pid(s, gains, alpha0=alpha)
    if args.r_star:
        rep = rep.with_oracle(_r_star(args.r_star))
    path = _out(args) / f"{args.baseline}.json"
    _write_json(path, _report_dict(rep, args.baseline, args.label or Path(args.scenario).stem))
    ratio = "" if rep.ratio is None else f"  R/R* = {rep.ratio:.2f}"
    print(f"{args.baseline}: yield = {rep.yield_:.2f}{ratio}")


def _trainer_config(args, cfg):
    from .learner import TrainerConfig

    values = _section(cfg, "trainer", TrainerConfig)
    values.update(_overrides(args, ("episodes", "time_budget")))
    values["seed"] = args.seed
    return TrainerConfig.from_mapping(values)


def cmd_train(args, cfg):
    from .learner import train_maddpg, train_mapolo
    from .marlenv import AllocationEnv
    from .report import emit_convergence_csv
    from .scenario import load_scenario

    config = _trainer_config(args, cfg)
    s = load_scenario(args.scenario)
    alpha = _shifts(args.alpha)
    r_star = _r_star(args.r_star)
    reference = _r_star(args.reference) if args.reference else None
    env = AllocationEnv(s, alpha)
    train = train_mapolo if args.method == "mapolo" else train_maddpg

    def progress(episode, elapsed, ratio):
        log.info("%s episode %d  %.1fs  R/R* %.4f", args.method, episode, elapsed, ratio)

    policy, curve = train(env, config, r_star=r_star, reference_yield=reference, alpha_init=alpha,
                          callback=progress)
    out = _out(args)
    policy.save(out / f"{args.method}.npz")
    emit_convergence_csv([curve], out / f"{args.method}_curve.csv")
    _write_json(out / f"{args.method}_config.json", asdict(config))
    print(f"{args.method}: final R/R* = {curve.ratios[-1]:.2f}  "
          f"mean episode time = {curve.mean_episode_seconds():.3f}s")


def cmd_evaluate(args, cfg):
    from .learner import PolicySet
    from .marlenv import AllocationEnv
    from .scenario import load_scenario

    policy = PolicySet.load(args.checkpoint)
    s = load_scenario(args.scenario)
    if policy.n_agents != s.m:
        raise ConfigError(f"checkpoint has {policy.n_agents} agents, scenario has {s.m} contracts")
    env = AllocationEnv(s, _shifts(args.alpha), action_bound=policy.action_bound)
    rep, _ = env.rollout(policy)
    rep = rep.with_oracle(_r_star(args.r_star))
    method = args.label or policy.method or "policy"
    path = _out(args) / f"{method}.json"
    _write_json(path, _report_dict(rep, method, args.scenario_label or Path(args.scenario).stem))
    print(f"{method}: yield = {rep.yield_:.2f}  R/R* = {rep.ratio:.2f}")


def cmd_report(args, cfg):
    from .report import YieldReport, render_yield_table, summarize

    entries = []
    for path in args.reports:
        p = Path(path)
        files = sorted(p.rglob("*.json")) if p.is_dir() else [p]
        for f in files:
            d = _read_json(f)
            if "method" not in d or "yield" not in d:
                continue
            rep = YieldReport(d["r_gc"], d["r_rtb"], d["q_gc"], d["yield"], tuple(d["delivered"]),
                              tuple(d["shortfall"]), d["r_star"])
            entries.append((d["method"], d["scenario"], rep))
    if not entries:
        raise ConfigError("no report files found")
    table = summarize(entries)
    print(table.render())
    if args.decomposition:
        print()
        print(render_yield_table([(f"{m}/{s}", r) for m, s, r in entries]))
    if args.out:
        out = _out(args)
        (out / "summary.csv").write_text(table.to_csv())
        (out / "summary.txt").write_text(table.render() + "\n")


# --


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=".")
    common.add_argument("--config", help="TOML file with [generator], [drift], [trainer], [pid] tables")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = _Parser(prog="yieldalloc", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", parents=[common], help="synthesize a training-day scenario")
    p.add_argument("--m", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--T", type=int)
    p.add_argument("--name", default="train.scn")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("drift", parents=[common], help="derive a test day from a training day")
    p.add_argument("scenario")
    p.add_argument("--volume-factor", dest="volume_factor", type=float)
    p.add_argument("--price-factor", dest="price_factor", type=float)
    p.add_argument("--quality-noise", dest="quality_noise", type=float)
    p.add_argument("--name", default="test.scn")
    p.set_defaults(func=cmd_drift)

    p = sub.add_parser("solve-optimal", parents=[common], help="dual solve: alpha*, R*, gap")
    p.add_argument("scenario")
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--max-iters", dest="max_iters", type=int, default=5000)
    p.add_argument("--name")
    p.set_defaults(func=cmd_solve_optimal, out=None)

    p = sub.add_parser("run-baseline", parents=[common], help="Contract-First or PID on a scenario")
    p.add_argument("baseline", choices=("cf", "pid"))
    p.add_argument("scenario")
    p.add_argument("--alpha", required=True, help="solve-optimal output whose alpha* seeds the shifts")
    p.add_argument("--r-star", dest="r_star", help="solve-optimal output of this scenario, for R/R*")
    p.add_argument("--label")
    p.set_defaults(func=cmd_run_baseline)

    p = sub.add_parser("train", parents=[common], help="train MAPOLO or MADDPG actors")
    p.add_argument("scenario")
    p.add_argument("--method", choices=("mapolo", "maddpg"), default="mapolo")
    p.add_argument("--alpha", required=True, help="solve-optimal output with the starting shifts")
    p.add_argument("--r-star", dest="r_star", required=True, help="solve-optimal output of this scenario")
    p.add_argument("--reference", help="solve-optimal output whose R* normalizes returns (default: --r-star)")
    p.add_argument("--episodes", type=int)
    p.add_argument("--time-budget", dest="time_budget", type=float)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", parents=[common], help="noise-free rollout of a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("scenario")
    p.add_argument("--alpha", required=True)
    p.add_argument("--r-star", dest="r_star", required=True)
    p.add_argument("--label")
    p.add_argument("--scenario-label", dest="scenario_label")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", parents=[common], help="R/R* table from report files")
    p.add_argument("reports", nargs="+", help="report JSON files or directories holding them")
    p.add_argument("--decomposition", action="store_true", help="also print the yield decomposition")
    p.set_defaults(func=cmd_report, out=None)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        args.func(args, _load_config(args.config))
    except YieldAllocError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        # malformed intermediate files or config values of the wrong type
        print(f"error: bad input: {exc}", file=sys.stderr)
        return ConfigError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
