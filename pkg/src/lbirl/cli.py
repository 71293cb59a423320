"""Pipeline commands: collect-demos, train-reward, train-policy, evaluate, report.

Artifacts land under out/<scenario>/<stage>/ with a manifest recording the
config hash and seed, so reruns with identical inputs are byte-identical.
Exit codes: 0 success, 2 config error, 3 missing upstream artifact.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig
from .env import LoadBalanceEnv, load_trajectory, rollout, save_trajectory
from .kpi import rank_demos, trajectory_return
from .policy import (AdaptiveRuleController, ActorCritic, FixedRuleController,
                     PolicyController, RandomController, evaluate_controller,
                     report_from_trajectories, train_policy,
                     write_learning_curve_csv)
from .reward import (DemoSet, RewardModel, extrapolation_report, train_reward,
                     write_scatter_csv, write_training_log_csv)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MISSING = 3


class MissingArtifactError(RuntimeError):
    def __init__(self, path, hint=""):
        msg = f"missing upstream artifact: {path}"
        if hint:
            msg += f" ({hint})"
        super().__init__(msg)
        self.path = path


def _dump_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(obj, f, sort_keys=True, separators=(",", ":"))
        f.write("\n")


def _load_json(path: Path):
    if not path.exists():
        raise MissingArtifactError(path)
    with open(path) as f:
        return json.load(f)


def _scenario_dir(cfg: RunConfig, sid: int) -> Path:
    return Path(cfg.out_dir) / f"s{sid}"


def _make_env(cfg: RunConfig, sid: int) -> LoadBalanceEnv:
    from .topology import build_topology

    return LoadBalanceEnv(
        scenario=cfg.scenario(sid),
        topology=build_topology(cfg.topology),
        radio=cfg.radio,
        sim_params=cfg.sim,
        controlled_sector=cfg.controlled_sector,
        horizon=cfg.demos.horizon,
    )


def _demo_seeds(cfg: RunConfig, sid: int, n: int) -> list[int]:
    ss = np.random.SeedSequence([cfg.seed, 0xD0, sid])
    return [int(v) for v in ss.generate_state(n)]


def _load_demo_set(cfg: RunConfig, sid: int) -> DemoSet:
    demo_dir = _scenario_dir(cfg, sid) / "demos"
    manifest = _load_json(demo_dir / "manifest.json")
    trajs = []
    for name in manifest["ranked_files"]:
        path = demo_dir / name
        if not path.exists():
            raise MissingArtifactError(path, "demo trajectory listed in manifest")
        trajs.append(load_trajectory(path))
    returns = np.array([trajectory_return(t, cfg.kpi) for t in trajs])
    return DemoSet(trajectories=trajs, returns=returns,
                   train_count=manifest["train_count"], kpi_config=cfg.kpi,
                   has_ties=manifest["has_ties"])


def cmd_collect_demos(cfg: RunConfig) -> int:
    for sid in cfg.scenarios:
        env = _make_env(cfg, sid)
        n = cfg.demos.count
        seeds = _demo_seeds(cfg, sid, n)
        trajs = []
        for i, seed in enumerate(seeds):
            controller = RandomController(seed=seed)
            trajs.append(rollout(env, controller, seed))
            print(f"[collect] scenario {sid}: trajectory {i + 1}/{n}", flush=True)
        ranked, ties = rank_demos(trajs, cfg.kpi)
        train_count = int(np.floor(cfg.demos.train_fraction * n))
        demo_dir = _scenario_dir(cfg, sid) / "demos"
        names = []
        for rank, traj in enumerate(ranked):
            name = f"traj_{rank:03d}.json"
            demo_dir.mkdir(parents=True, exist_ok=True)
            save_trajectory(traj, demo_dir / name)
            names.append(name)
        manifest = {
            "stage": "collect-demos",
            "config_hash": cfg.config_hash(),
            "seed": cfg.seed,
            "scenario": sid,
            "count": n,
            "train_count": train_count,
            "has_ties": ties,
            "ranked_files": names,
            "returns": [float(trajectory_return(t, cfg.kpi)) for t in ranked],
            "train_files": names[:train_count],
            "extrapolation_files": names[train_count:],
        }
        _dump_json(demo_dir / "manifest.json", manifest)
        print(f"[collect] scenario {sid}: wrote {n} trajectories "
              f"({train_count} train / {n - train_count} extrapolation)")
    return EXIT_OK


def cmd_train_reward(cfg: RunConfig, sampler: str | None = None) -> int:
    sampler = sampler or cfg.sampler
    for sid in cfg.scenarios:
        demos = _load_demo_set(cfg, sid)
        model, log = train_reward(demos, sampler, cfg.reward, cfg.seed)
        report = extrapolation_report(model, demos, cfg.kpi)
        rdir = _scenario_dir(cfg, sid) / "reward"
        rdir.mkdir(parents=True, exist_ok=True)
        model.save(rdir / f"model_{sampler}.json")
        write_training_log_csv(log, rdir / f"training_log_{sampler}.csv")
        write_scatter_csv(report, rdir / f"scatter_{sampler}.csv")
        manifest = {
            "stage": "train-reward",
            "config_hash": cfg.config_hash(),
            "seed": cfg.seed,
            "scenario": sid,
            "sampler": sampler,
            "pearson_train": report.pearson_train,
            "pearson_extrapolation": report.pearson_extrapolation,
            "final_loss": log[-1]["loss"] if log else None,
        }
        _dump_json(rdir / f"manifest_{sampler}.json", manifest)
        print(f"[train-reward] scenario {sid} sampler={sampler}: "
              f"pearson train={report.pearson_train:.3f} "
              f"extrapolation={report.pearson_extrapolation:.3f}")
    return EXIT_OK


def cmd_train_policy(cfg: RunConfig, sampler: str | None = None) -> int:
    sampler = sampler or cfg.sampler
    for sid in cfg.scenarios:
        rpath = _scenario_dir(cfg, sid) / "reward" / f"model_{sampler}.json"
        if not rpath.exists():
            raise MissingArtifactError(rpath, "run train-reward first")
        model = RewardModel.load(rpath)
        ac, curve = train_policy(lambda sid=sid: _make_env(cfg, sid), model,
                                 cfg.ppo, cfg.seed)
        pdir = _scenario_dir(cfg, sid) / "policy"
        pdir.mkdir(parents=True, exist_ok=True)
        ac.save(pdir / f"policy_{sampler}.json")
        write_learning_curve_csv(curve, pdir / f"learning_curve_{sampler}.csv")
        manifest = {
            "stage": "train-policy",
            "config_hash": cfg.config_hash(),
            "seed": cfg.seed,
            "scenario": sid,
            "sampler": sampler,
            "total_timesteps": cfg.ppo.total_timesteps,
            "final_mean_reward": curve[-1]["mean_reward"] if curve else None,
        }
        _dump_json(pdir / f"manifest_{sampler}.json", manifest)
        print(f"[train-policy] scenario {sid} sampler={sampler}: "
              f"{cfg.ppo.total_timesteps} steps")
    return EXIT_OK


def _method_controller(cfg: RunConfig, sid: int, method: str):
    if method == "fixed":
        return FixedRuleController()
    if method == "adaptive":
        return AdaptiveRuleController(gain=cfg.evaluation.adaptive_gain)
    if method in ("ours", "trex-contiguous"):
        sampler = "tcs" if method == "ours" else "contiguous"
        path = _scenario_dir(cfg, sid) / "policy" / f"policy_{sampler}.json"
        if not path.exists():
            raise MissingArtifactError(path, f"needed by method {method!r}")
        return PolicyController(ActorCritic.load(path), tag=method)
    raise ConfigError(f"unknown method {method!r}")


def cmd_evaluate(cfg: RunConfig) -> int:
    methods = cfg.evaluation.methods
    if not methods:
        print("[evaluate] warning: no methods configured, writing empty report")
    for sid in cfg.scenarios:
        edir = _scenario_dir(cfg, sid) / "eval"
        edir.mkdir(parents=True, exist_ok=True)
        rows = []
        for method in methods:
            if method == "demos":
                demos = _load_demo_set(cfg, sid)
                report = report_from_trajectories(
                    "demos", {sid: demos.trajectories}, cfg.kpi)
            else:
                controller = _method_controller(cfg, sid, method)
                report = evaluate_controller(
                    controller, lambda s: _make_env(cfg, s), [sid],
                    cfg.evaluation.seeds, cfg.kpi)
            report.write_timeseries_csv(sid, edir / f"kpi_{method}.csv")
            rows.extend(report.summary_rows())
            print(f"[evaluate] scenario {sid} method={method}: "
                  + ", ".join(f"{r['t_min_mean']:.3f}/{r['t_std_mean']:.3f}/"
                              f"{r['t_cc_mean']:.3f}" for r in report.summary_rows()))
        _write_summary_csv(edir / "report.csv", rows)
        manifest = {
            "stage": "evaluate",
            "config_hash": cfg.config_hash(),
            "seed": cfg.seed,
            "scenario": sid,
            "methods": list(methods),
            "eval_seeds": list(cfg.evaluation.seeds),
        }
        _dump_json(edir / "manifest.json", manifest)
    return EXIT_OK


def _write_summary_csv(path: Path, rows) -> None:
    cols = ["scenario", "method", "t_min_mean", "t_min_std", "t_std_mean",
            "t_std_std", "t_cc_mean", "t_cc_std", "status"]
    lines = [",".join(cols)]
    for r in rows:
        vals = []
        for c in cols:
            if c == "status":
                vals.append(r.get("status", "ok"))
            elif c in r:
                v = r[c]
                vals.append(repr(v) if isinstance(v, float) else str(v))
            else:
                vals.append("")
        lines.append(",".join(vals))
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def cmd_report(cfg: RunConfig) -> int:
    out = Path(cfg.out_dir) / "report"
    out.mkdir(parents=True, exist_ok=True)
    summary_rows = []
    for sid in cfg.scenarios:
        edir = _scenario_dir(cfg, sid) / "eval"
        for method in cfg.evaluation.methods:
            kpi_csv = edir / f"kpi_{method}.csv"
            if not kpi_csv.exists():
                summary_rows.append({"scenario": sid, "method": method,
                                     "status": "missing"})
                continue
            # per-seed weekly timeseries for plotting
            if method == "demos":
                demos = _load_demo_set(cfg, sid)
                report = report_from_trajectories("demos", {sid: demos.trajectories},
                                                  cfg.kpi)
            else:
                controller = _method_controller(cfg, sid, method)
                report = evaluate_controller(controller, lambda s: _make_env(cfg, s),
                                             [sid], cfg.evaluation.seeds, cfg.kpi)
            series = report.series[sid]
            for i, seed in enumerate(series.seeds):
                lines = ["hour,t_min,t_std,t_cc"]
                for h, row in enumerate(series.hourly[i]):
                    lines.append(f"{h},{row[0]!r},{row[1]!r},{row[2]!r}")
                tpath = out / f"timeseries_s{sid}_{method}_seed{seed}.csv"
                with open(tpath, "w") as f:
                    f.write("\n".join(lines) + "\n")
            summary_rows.extend(report.summary_rows())
        # copy reward scatter data when present
        for sampler in ("tcs", "contiguous"):
            spath = _scenario_dir(cfg, sid) / "reward" / f"scatter_{sampler}.csv"
            if spath.exists():
                (out / f"scatter_s{sid}_{sampler}.csv").write_bytes(spath.read_bytes())
    _write_summary_csv(out / "summary.csv", summary_rows)
    _dump_json(out / "manifest.json", {
        "stage": "report",
        "config_hash": cfg.config_hash(),
        "seed": cfg.seed,
        "scenarios": list(cfg.scenarios),
        "methods": list(cfg.evaluation.methods),
    })
    print(f"[report] wrote {out / 'summary.csv'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="lbirl",
        description="Load-balancing pipeline: demonstrations, reward learning, "
                    "policy training, evaluation.")
    p.add_argument("--config", type=str, default=None, help="JSON config file")
    p.add_argument("--seed", type=int, default=None, help="override the base seed")
    p.add_argument("--out", type=str, default=None, help="override the output directory")
    p.add_argument("--scenario", type=int, action="append", default=None,
                   help="restrict to a scenario id (repeatable)")
    p.add_argument("--sampler", choices=("tcs", "contiguous"), default=None,
                   help="sub-trajectory sampler for reward/policy stages")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("collect-demos", "train-reward", "train-policy", "evaluate", "report"):
        sub.add_parser(name)
    return p


def _effective_config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out_dir = args.out
    if args.scenario:
        cfg.scenarios = tuple(args.scenario)
    if args.sampler is not None:
        cfg.sampler = args.sampler
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _effective_config(args)
        if args.command == "collect-demos":
            return cmd_collect_demos(cfg)
        if args.command == "train-reward":
            return cmd_train_reward(cfg)
        if args.command == "train-policy":
            return cmd_train_policy(cfg)
        if args.command == "evaluate":
            return cmd_evaluate(cfg)
        if args.command == "report":
            return cmd_report(cfg)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingArtifactError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_MISSING


if __name__ == "__main__":
    sys.exit(main())
