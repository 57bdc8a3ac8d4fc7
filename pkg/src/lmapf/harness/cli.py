"""Command line: ``lmapf {generate,run,sweep,analyze,losses}``.

Any flag can also be set from ``--config FILE`` (JSON or YAML, keys are the
flag names with dashes or underscores); flags given on the command line win.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from ..corridors import analyze
from ..errors import LmapfError
from ..grid import MazeParams, bundled_map, generate_maze, load_map, serialize_movingai_map
from ..losses import LossConfig, Trajectory, evaluate, load_trajectories
from ..policies import make_policies
from ..simulator import run_episode, write_events
from .scenario import ScenarioFile, random_scenario
from .sweep import SweepSpec, default_workers, run_sweep


def _load_config(path) -> dict:
    text = Path(path).read_text()
    if str(path).endswith((".yaml", ".yml")):
        import yaml

        data = yaml.safe_load(text)
    else:
        data = json.loads(text)
    if not isinstance(data, dict):
        raise LmapfError(f"config {path} must hold a mapping")
    return {k.replace("-", "_"): v for k, v in data.items()}


def _add_map_args(p: argparse.ArgumentParser) -> None:
    src = p.add_argument_group("map source (one of)")
    src.add_argument("--map", help="movingai .map file")
    src.add_argument("--bundled", help="bundled map name, e.g. warehouse")
    src.add_argument("--size", type=int, help="generate a size x size maze")
    p.add_argument("--density", type=float, default=0.3)
    p.add_argument("--corridor-length", type=int, default=10)
    p.add_argument("--map-seed", type=int, default=0)


def _map_spec(args) -> dict:
    if args.map:
        return {"path": str(Path(args.map).resolve())}
    if args.bundled:
        return {"bundled": args.bundled}
    if args.size:
        return {"maze": {"size": args.size, "density": args.density,
                         "corridor_length": args.corridor_length, "seed": args.map_seed}}
    raise LmapfError("give one of --map, --bundled or --size")


def _grid(args):
    if args.map:
        return load_map(args.map)
    if args.bundled:
        return bundled_map(args.bundled)
    if args.size:
        return generate_maze(MazeParams(args.size, args.density, args.corridor_length, args.map_seed))
    raise LmapfError("give one of --map, --bundled or --size")


def _emit(data, out: Optional[str]) -> None:
    text = json.dumps(data, indent=1)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def cmd_generate(args) -> int:
    if args.what == "map":
        grid = _grid(args)
        text = serialize_movingai_map(grid)
        if args.out:
            Path(args.out).write_text(text)
        else:
            sys.stdout.write(text)
        return 0
    policy = {"name": args.policy, "params": {}}
    sc = random_scenario(_map_spec(args), args.agents, seed=args.seed, mode=args.mode,
                         min_goal_distance=args.min_goal_distance, policy=policy, horizon=args.horizon)
    _emit(sc.to_json(), args.out)
    return 0


def cmd_run(args) -> int:
    path = Path(args.scenario)
    sc = ScenarioFile.load(path)
    for key in ("mode", "horizon", "seed"):
        val = getattr(args, key)
        if val is not None:
            setattr(sc, key, val)
    if args.lenient:
        sc.strict = False
    if args.no_conventions:
        sc.conventions = False
    if args.policy:
        sc.policy = {"name": args.policy, "params": {}}
    record = bool(args.events)
    world = sc.build(path.parent, record=record)
    params = dict(sc.policy.get("params", {}))
    if record:
        params["return_distribution"] = True
    pols = make_policies(sc.policy["name"], sc.n_agents, sc.seed, **params)
    m = run_episode(world, pols)
    if args.events:
        with open(args.events, "w") as fh:
            write_events(m.trajectories, fh)
    steps = max(m.timesteps, 1)
    _emit({
        "mode": m.mode.value, "n_agents": m.n_agents, "timesteps": m.timesteps, "makespan": m.makespan,
        "goals_reached": m.goals_reached_total, "throughput": m.throughput, "valid_rate": m.valid_rate,
        "collisions": m.collisions, "agents_reached": m.agents_reached, "fallback_goals": m.fallback_goals,
        "timing": m.timing, "time_per_step": sum(m.timing.values()) / steps,
    }, args.out)
    return 0


_SWEEP_FIELDS = ("team_sizes", "world_sizes", "densities", "corridor_lengths", "episodes", "mode",
                 "policies", "horizon", "min_goal_distance", "strict", "seed", "planner_timeout")


def cmd_sweep(args) -> int:
    data = {}
    for f in _SWEEP_FIELDS:
        val = getattr(args, f, None)
        if val is not None:
            data[f] = val
    if isinstance(data.get("policies"), list):
        data["policies"] = [_policy_entry(p) for p in data["policies"]]
    spec = SweepSpec.from_json(data)

    def progress(row):
        if args.verbose:
            print(f"{row['policy']} ws={row['world_size']} n={row['n_agents']} ep={row['episode']} "
                  f"{row['status']}", file=sys.stderr)

    summary = run_sweep(spec, args.out, workers=args.workers or default_workers(), progress=progress)
    print(json.dumps({"cells": len(summary["cells"]), "skipped": len(summary["skipped"]), "out": args.out}))
    return 0


def _policy_entry(p):
    # "greedy", "greedy:noconv" or a {"name", "params", "conventions"} mapping
    if isinstance(p, dict):
        return p
    name, _, flag = str(p).partition(":")
    return {"name": name, "conventions": flag != "noconv"}


def cmd_analyze(args) -> int:
    topo = analyze(_grid(args))
    _emit(topo.to_json(), args.out)
    return 0


# hand-checkable reference cases
LOSS_FIXTURES = {
    "returns": dict(policy=[[0.2] * 5] * 3, actions=[4, 4, 0], rewards=[-0.3, -0.3, 5.0],
                    values=[0.0, 0.0, 0.0, 0.0], valid=[[1] * 5] * 3),
    "uniform_entropy": dict(policy=[[0.2] * 5], actions=[0], rewards=[0.0], values=[0.0, 0.0],
                            valid=[[1] * 5]),
    "valid_half": dict(policy=[[0.2] * 5], actions=[0], rewards=[0.0], values=[0.0, 0.0],
                       valid=[[1, 0, 0, 0, 0]], logits=[[0.0] * 5]),
    "bc_half": dict(policy=[[0.5, 0.5, 0, 0, 0]] * 2, actions=[0, 1], rewards=[0.0, 0.0],
                    values=[0.0, 0.0, 0.0], valid=[[1] * 5] * 2, expert=[0, 1]),
}


def cmd_losses(args) -> int:
    cfg = LossConfig(gamma=args.gamma, entropy_weight=args.entropy_weight, alpha=args.alpha,
                     beta=args.beta, zeta=args.zeta)
    if args.events:
        trajs = load_trajectories(args.events, args.side)
        per = {str(k): evaluate(t, cfg) for k, t in trajs.items()}
    else:
        per = {k: evaluate(Trajectory(**v), cfg) for k, v in LOSS_FIXTURES.items()}
    _emit(per, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lmapf", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON or YAML file with flag defaults")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a map or a random scenario")
    g.add_argument("what", choices=["map", "scenario"])
    _add_map_args(g)
    g.add_argument("--agents", type=int, default=8)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--mode", choices=["oneshot", "lifelong"], default="lifelong")
    g.add_argument("--horizon", type=int)
    g.add_argument("--min-goal-distance", type=float, default=2.0)
    g.add_argument("--policy", default="convention")
    g.add_argument("-o", "--out")
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("run", help="run one scenario file")
    r.add_argument("scenario")
    r.add_argument("--policy")
    r.add_argument("--mode", choices=["oneshot", "lifelong"])
    r.add_argument("--horizon", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--lenient", action="store_true", help="replace invalid actions by Stay")
    r.add_argument("--no-conventions", action="store_true")
    r.add_argument("--events", help="write JSON-lines events here")
    r.add_argument("-o", "--out")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="run the benchmark lattice")
    s.add_argument("--team-sizes", type=int, nargs="+")
    s.add_argument("--world-sizes", type=int, nargs="+")
    s.add_argument("--densities", type=float, nargs="+")
    s.add_argument("--corridor-lengths", type=int, nargs="+")
    s.add_argument("--episodes", type=int)
    s.add_argument("--mode", choices=["oneshot", "lifelong"])
    s.add_argument("--policies", nargs="+", help="names, optionally NAME:noconv")
    s.add_argument("--horizon", type=int)
    s.add_argument("--min-goal-distance", type=float)
    s.add_argument("--strict", action="store_true", default=None)
    s.add_argument("--seed", type=int)
    s.add_argument("--planner-timeout", type=float)
    s.add_argument("--workers", type=int)
    s.add_argument("--out", default="sweep-out")
    s.set_defaults(func=cmd_sweep)

    a = sub.add_parser("analyze", help="dump corridor topology as JSON")
    _add_map_args(a)
    a.add_argument("-o", "--out")
    a.set_defaults(func=cmd_analyze)

    lo = sub.add_parser("losses", help="evaluate losses on recorded or reference trajectories")
    lo.add_argument("--events", help="JSON-lines events with distributions")
    lo.add_argument("--side", help="JSON-lines side-file with values/validity/expert")
    lo.add_argument("--gamma", type=float, default=0.95)
    lo.add_argument("--entropy-weight", type=float, default=0.01)
    lo.add_argument("--alpha", type=float, default=0.5)
    lo.add_argument("--beta", type=float, default=1.0)
    lo.add_argument("--zeta", type=float, default=0.5)
    lo.add_argument("-o", "--out")
    lo.set_defaults(func=cmd_losses)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if not args.config:
        return args
    config = _load_config(args.config)
    # reparse with the config as defaults so explicit flags still win
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    sub.choices[args.command].set_defaults(**config)
    return parser.parse_args(argv)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = _apply_config(parser, list(sys.argv[1:] if argv is None else argv))
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except LmapfError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
