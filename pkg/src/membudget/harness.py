"""Experiment configuration, execution, aggregation and plotting.

Config files are INI files (``configparser``).  Recognised sections and
keys, all optional::

    [experiment]  kind = mcts-sweep | ptdqn-sweep | baseline
                  seeds, master_seed, jobs, out
    [budget]      total_memory, plan_grid (comma list), plan_units,
                  permanent_fractions (comma list), permanent_fraction,
                  buffer_capacity, hidden_widths (comma list)
    [datasets]    kinds (comma list, e.g. O0, Oa, Ra500, Ronly36)
    [mcts]        uct_c, iteration_factor
    [corridor]    see ``membudget.corridor_env.layout_from_section``
    [jellybean]   any ``WorldConfig`` field
    [agent]       any ``AgentConfig`` field, plus total_steps, trace_stride

Command-line flags override config values; the ``MEMBUDGET_SEED``
environment variable overrides the master seed.  Every (cell, seed) job
derives its own seeds from the master seed, so output files do not depend
on ``--jobs``.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from membudget.budgeted_mcts import (
    DEFAULT_ITERATION_FACTOR,
    DEFAULT_UCT_C,
    SweepRow,
    sweep_rows,
)
from membudget.core import derive_seed, make_rng, mean_and_se
from membudget.corridor_env import CorridorEnv, CorridorLayout, layout_from_section
from membudget.datasets import DatasetSpec, generate_list, write_csv
from membudget.jellybean_env import JellyBeanWorld, WorldConfig
from membudget.memory_ledger import (
    DEFAULT_BUFFER,
    DEFAULT_HIDDEN,
    DEFAULT_TOTAL,
    BudgetError,
    make_pt_split,
    verify_budget,
)
from membudget.ptdqn import AgentConfig, run_continual

KINDS = ("mcts-sweep", "ptdqn-sweep", "baseline")
DEFAULT_PLAN_GRID = (0, 10, 50, 100, 150, 250, 350, 450, 480, 500)
DEFAULT_DATASETS = ("O0", "O1", "O2", "O3", "Oa", "Ra100", "Ra500", "Ra1000", "Ra5000",
                    "Ronly36")
DEFAULT_FRACTIONS = (0.0, 0.1, 0.25, 0.5, 0.75)

MCTS_RAW_HEADER = ("dataset", "n_pi", "seed", "return", "steps", "goal")
MCTS_AGG_HEADER = ("dataset", "n_pi", "n", "mean", "se")
TRACE_HEADER = ("step", "seed", "permanent_fraction", "reward_smoothed")
TRACE_AGG_HEADER = ("permanent_fraction", "step", "n", "mean", "se")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    kind: str = "mcts-sweep"
    seeds: int = 20
    master_seed: int = 0
    jobs: int = 1
    out: str = "results"
    total_memory: int = DEFAULT_TOTAL
    plan_grid: tuple[int, ...] = DEFAULT_PLAN_GRID
    datasets: tuple[str, ...] = DEFAULT_DATASETS
    uct_c: float = DEFAULT_UCT_C
    iteration_factor: int = DEFAULT_ITERATION_FACTOR
    layout: CorridorLayout = field(default_factory=CorridorLayout)
    hidden_widths: tuple[int, ...] = DEFAULT_HIDDEN
    buffer_capacity: int = DEFAULT_BUFFER
    permanent_fractions: tuple[float, ...] = DEFAULT_FRACTIONS
    world: WorldConfig = field(default_factory=WorldConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    total_steps: int = 600_000
    trace_stride: int = 100

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if self.seeds < 1:
            raise ConfigError("seed count must be >= 1")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        for n_pi in self.plan_grid:
            if not 0 <= n_pi <= self.total_memory:
                raise ConfigError(f"plan grid value {n_pi} outside [0, {self.total_memory}]")
        for frac in self.permanent_fractions:
            if not 0.0 <= frac <= 1.0:
                raise ConfigError(f"permanent fraction {frac} outside [0, 1]")
        for name in self.datasets:
            DatasetSpec.parse(name)
        if self.total_steps < 1 or self.trace_stride < 1:
            raise ConfigError("total_steps and trace_stride must be >= 1")


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _typed_fields(cls, section) -> dict:
    out = {}
    for f in dataclasses.fields(cls):
        if f.name in section:
            typ = type(f.default)
            out[f.name] = typ(float(section[f.name])) if typ is int else typ(section[f.name])
    return out


def load_config(path=None, **overrides) -> ExperimentConfig:
    """Build an ``ExperimentConfig`` from an INI file plus keyword overrides."""
    cfg = ExperimentConfig()
    if path is not None:
        parser = configparser.ConfigParser()
        try:
            read = parser.read(path)
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        if not read:
            raise ConfigError(f"cannot read config file {path}")
        try:
            _apply_sections(cfg, parser)
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    for key, value in overrides.items():
        if value is not None:
            setattr(cfg, key, value)
    env_seed = os.environ.get("MEMBUDGET_SEED")
    if env_seed:
        cfg.master_seed = int(env_seed)
    cfg.validate()
    return cfg


def _apply_sections(cfg: ExperimentConfig, parser: configparser.ConfigParser) -> None:
    if parser.has_section("experiment"):
        s = parser["experiment"]
        cfg.kind = s.get("kind", cfg.kind)
        cfg.seeds = s.getint("seeds", cfg.seeds)
        cfg.master_seed = s.getint("master_seed", cfg.master_seed)
        cfg.jobs = s.getint("jobs", cfg.jobs)
        cfg.out = s.get("out", cfg.out)
    if parser.has_section("budget"):
        s = parser["budget"]
        cfg.total_memory = s.getint("total_memory", cfg.total_memory)
        if "plan_grid" in s:
            cfg.plan_grid = _ints(s["plan_grid"])
        if "plan_units" in s:
            cfg.plan_grid = (s.getint("plan_units"),)
        if "permanent_fractions" in s:
            cfg.permanent_fractions = _floats(s["permanent_fractions"])
        if "permanent_fraction" in s:
            cfg.permanent_fractions = (s.getfloat("permanent_fraction"),)
        cfg.buffer_capacity = s.getint("buffer_capacity", cfg.buffer_capacity)
        if "hidden_widths" in s:
            cfg.hidden_widths = _ints(s["hidden_widths"])
    if parser.has_section("datasets") and "kinds" in parser["datasets"]:
        cfg.datasets = tuple(v.strip() for v in parser["datasets"]["kinds"].split(",")
                             if v.strip())
    if parser.has_section("mcts"):
        s = parser["mcts"]
        cfg.uct_c = s.getfloat("uct_c", cfg.uct_c)
        cfg.iteration_factor = s.getint("iteration_factor", cfg.iteration_factor)
    if parser.has_section("corridor"):
        cfg.layout = layout_from_section(parser["corridor"])
    if parser.has_section("jellybean"):
        cfg.world = WorldConfig(**_typed_fields(WorldConfig, parser["jellybean"]))
    agent_kwargs = {}
    if parser.has_section("agent"):
        s = parser["agent"]
        agent_kwargs = _typed_fields(AgentConfig, s)
        cfg.total_steps = s.getint("total_steps", cfg.total_steps)
        cfg.trace_stride = s.getint("trace_stride", cfg.trace_stride)
    agent_kwargs.setdefault("consolidation_period", max(1, cfg.world.swap_period // 10))
    cfg.agent = AgentConfig(**agent_kwargs)


# -- raw results and aggregation ---------------------------------------------

def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_rows(path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def read_rows(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def aggregate(rows: Sequence[dict], keys: Sequence[str], value: str) -> list[dict]:
    """Mean and standard error of ``value`` per distinct ``keys`` tuple.

    Groups appear in first-seen order.  A group with one row has
    ``se = None``.
    """
    groups: dict[tuple, list[float]] = {}
    for row in rows:
        groups.setdefault(tuple(row[k] for k in keys), []).append(float(row[value]))
    out = []
    for key, values in groups.items():
        mean, se = mean_and_se(values)
        out.append({**dict(zip(keys, key)), "n": len(values), "mean": mean, "se": se})
    return out


def mcts_rows_as_dicts(rows: Sequence[SweepRow]) -> list[dict]:
    return [{"dataset": r.dataset, "n_pi": r.n_pi, "seed": r.seed, "return": r.ret,
             "steps": r.steps, "goal": r.goal or ""} for r in rows]


# -- experiments ------------------------------------------------------------------

def run_mcts_sweep(cfg: ExperimentConfig) -> list[SweepRow]:
    rows: list[SweepRow] = []
    for name in cfg.datasets:
        rows.extend(sweep_rows(DatasetSpec.parse(name), cfg.total_memory, cfg.plan_grid,
                               cfg.seeds, master_seed=cfg.master_seed, layout=cfg.layout,
                               uct_c=cfg.uct_c, iteration_factor=cfg.iteration_factor,
                               jobs=cfg.jobs))
    return rows


def _ptdqn_job(job):
    frac, seed_index, cfg, learn = job
    split = make_pt_split(cfg.hidden_widths, cfg.buffer_capacity, frac)
    world = JellyBeanWorld(cfg.world, seed=derive_seed(cfg.master_seed, "world", seed_index))
    result = run_continual(world, split, cfg.agent, cfg.total_steps,
                           seed=derive_seed(cfg.master_seed, "agent", seed_index), learn=learn)
    return frac, seed_index, result.rewards, result.smoothed, world.render_ascii()


def run_ptdqn_sweep(cfg: ExperimentConfig, baseline: bool = False):
    """Per-step reward traces; returns ``[(fraction, seed, rewards, smoothed, ascii)]``.

    ``baseline=True`` runs the uniform-random policy once per seed and
    labels it with fraction ``None``.
    """
    fractions = (None,) if baseline else cfg.permanent_fractions
    jobs = [(0.0 if f is None else f, i, cfg, not baseline) for f in fractions
            for i in range(cfg.seeds)]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_ptdqn_job, jobs))
    else:
        results = [_ptdqn_job(job) for job in jobs]
    if baseline:
        results = [(None, *r[1:]) for r in results]
    return results


def trace_rows(results, stride: int):
    for frac, seed, _, smoothed, _ in results:
        label = "random" if frac is None else frac
        for step in range(stride - 1, len(smoothed), stride):
            yield (step + 1, seed, label, float(smoothed[step]))


# -- plotting ---------------------------------------------------------------------

def plot(rows: Sequence[dict], kind: str, path) -> Path:
    """Line chart with standard-error bands, saved as SVG.

    ``kind="mcts"`` expects raw sweep rows; ``kind="ptdqn"`` expects trace rows.
    """
    if not rows:
        raise ConfigError("no results to plot")
    needed = {"mcts": MCTS_RAW_HEADER, "ptdqn": TRACE_HEADER}
    if kind not in needed:
        raise ConfigError(f"unknown plot kind {kind!r}")
    missing = set(needed[kind]) - set(rows[0])
    if missing:
        raise ConfigError(f"rows do not look like {kind} results (missing {sorted(missing)})")

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "membudget"
    fig, ax = plt.subplots(figsize=(7, 4))
    if kind == "mcts":
        series_key, x_key, y_key = "dataset", "n_pi", "return"
        ax.set_xlabel("plan units (tree nodes)")
        ax.set_ylabel("evaluation return")
    else:
        series_key, x_key, y_key = "permanent_fraction", "step", "reward_smoothed"
        ax.set_xlabel("step")
        ax.set_ylabel("smoothed reward per step")
    agg = aggregate(rows, (series_key, x_key), y_key)
    series: dict[str, list[dict]] = {}
    for row in agg:
        series.setdefault(row[series_key], []).append(row)
    for name, pts in series.items():
        pts.sort(key=lambda r: float(r[x_key]))
        x = np.array([float(r[x_key]) for r in pts])
        y = np.array([r["mean"] for r in pts])
        se = np.array([r["se"] or 0.0 for r in pts])
        label = name if kind == "mcts" or name == "random" else f"{float(name):.0%} permanent"
        (line,) = ax.plot(x, y, label=label)
        ax.fill_between(x, y - se, y + se, color=line.get_color(), alpha=0.2, linewidth=0)
    if len(series) > 1:
        ax.legend(fontsize="small", ncol=2)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


# -- self test -------------------------------------------------------------------

def selftest() -> list[tuple[str, bool]]:
    """Quick invariant checks; returns ``(name, passed)`` pairs."""
    from membudget.budgeted_mcts import build_tree, execute_plan, extract_plan
    from membudget.datasets import reservoir_select
    from membudget.jellybean_env import phase
    from membudget.memory_ledger import make_split
    from membudget.world_model import fit

    checks = []
    env = CorridorEnv()
    returns = []
    for goal in ("orange", "green", "blue", "pink"):
        state = env.reset()
        total = 0.0
        for a in env.shortest_path(state.agent_cell, goal):
            state, r, _ = env.step(state, a)
            total += r
        returns.append(round(total, 10))
    checks.append(("oracle returns", returns == [0.17, 0.33, 0.49, 0.65]))
    checks.append(("budget split", all(make_split(500, p).model_units + p == 500
                                       for p in range(501))))
    data = generate_list(DatasetSpec("Oa"), env)
    ok = True
    for n_pi in (0, 1, 16, 250, 480, 500):
        budget = make_split(500, n_pi)
        rng = make_rng(n_pi)
        model = fit(reservoir_select(iter(data), budget.model_units, rng), budget)
        tree = build_tree(model, 0, budget, rng=rng)
        ok &= tree.nodes_used <= n_pi and model.stored_transitions <= budget.model_units
    checks.append(("tree and model budgets", bool(ok)))
    model = fit(generate_list(DatasetSpec("O0"), env))
    plan = extract_plan(build_tree(model, 0, 32, rng=make_rng(1)))
    result = execute_plan(env, plan, make_rng(2))
    checks.append(("O0 plan reaches pink", abs(result.undiscounted_return - 0.65) < 1e-12))
    checks.append(("phase schedule", [phase(t) for t in (0, 149_999, 150_000, 300_000)]
                   == [(-1.0, 2.0), (-1.0, 2.0), (2.0, -1.0), (-1.0, 2.0)]))
    checks.append(("default PT budget", verify_budget(make_pt_split())))
    return checks


# -- command line -----------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="INI experiment config")
    common.add_argument("--seeds", type=int, help="number of seeds per cell")
    common.add_argument("--jobs", type=int, help="worker processes")
    common.add_argument("--out", help="output directory")
    common.add_argument("--master-seed", type=int)
    budget = _Parser(add_help=False)
    budget.add_argument("--total-memory", type=int)
    budget.add_argument("--plan-units", type=int)
    budget.add_argument("--permanent-fraction", type=float)
    budget.add_argument("--buffer-capacity", type=int)

    parser = _Parser(prog="membudget", description="Memory-budgeted RL experiments")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("gen-data", parents=[common], help="write corridor datasets as CSV")
    sub.add_parser("sweep-mcts", parents=[common, budget], help="model/plan allocation sweep")
    p = sub.add_parser("run-ptdqn", parents=[common, budget], help="PT-split DQN traces")
    p.add_argument("--baseline", action="store_true", help="uniform-random policy instead")
    p.add_argument("--total-steps", type=int)
    p.add_argument("--render-ascii", action="store_true",
                   help="print each run's final 11x11 window")
    p = sub.add_parser("plot", help="SVG chart from a raw CSV")
    p.add_argument("csv")
    p.add_argument("--kind", choices=("mcts", "ptdqn"), required=True)
    p.add_argument("--out", required=True, help="output SVG path")
    sub.add_parser("selftest", help="run quick invariant checks")
    return parser


def _config_from_args(args) -> ExperimentConfig:
    overrides = {
        "seeds": args.seeds,
        "jobs": args.jobs,
        "out": args.out,
        "master_seed": args.master_seed,
        "total_memory": getattr(args, "total_memory", None),
        "buffer_capacity": getattr(args, "buffer_capacity", None),
        "total_steps": getattr(args, "total_steps", None),
    }
    if getattr(args, "plan_units", None) is not None:
        overrides["plan_grid"] = (args.plan_units,)
    if getattr(args, "permanent_fraction", None) is not None:
        overrides["permanent_fractions"] = (args.permanent_fraction,)
    return load_config(args.config, **overrides)


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        if args.command == "selftest":
            checks = selftest()
            for name, ok in checks:
                print(f"{'PASS' if ok else 'FAIL'}  {name}")
            return 0 if all(ok for _, ok in checks) else 2
        if args.command == "plot":
            rows = read_rows(args.csv)
            print(plot(rows, args.kind, args.out))
            return 0
        cfg = _config_from_args(args)
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "gen-data":
            env = CorridorEnv(cfg.layout)
            for name in cfg.datasets:
                spec = DatasetSpec.parse(name)
                for i in range(cfg.seeds):
                    seed = derive_seed(cfg.master_seed, spec.label, "data", i)
                    write_csv(generate_list(spec, env, make_rng(seed)),
                              out / f"{spec.label}_seed{i}.csv")
            print(out)
        elif args.command == "sweep-mcts":
            rows = mcts_rows_as_dicts(run_mcts_sweep(cfg))
            write_rows(out / "mcts_raw.csv", MCTS_RAW_HEADER,
                       ([r[k] for k in MCTS_RAW_HEADER] for r in rows))
            agg = aggregate(rows, ("dataset", "n_pi"), "return")
            write_rows(out / "mcts_aggregate.csv", MCTS_AGG_HEADER,
                       ([r[k] for k in MCTS_AGG_HEADER] for r in agg))
            print(out / "mcts_raw.csv")
        elif args.command == "run-ptdqn":
            baseline = args.baseline or cfg.kind == "baseline"
            if not baseline:
                for frac in cfg.permanent_fractions:
                    split = make_pt_split(cfg.hidden_widths, cfg.buffer_capacity, frac)
                    if not verify_budget(split, cfg.total_memory):
                        raise BudgetError(f"hidden units + buffer = {split.units}, "
                                          f"budget is {cfg.total_memory}")
            results = run_ptdqn_sweep(cfg, baseline=baseline)
            name = "ptdqn_baseline.csv" if baseline else "ptdqn_traces.csv"
            rows = list(trace_rows(results, cfg.trace_stride))
            write_rows(out / name, TRACE_HEADER, rows)
            agg = aggregate([dict(zip(TRACE_HEADER, r)) for r in rows],
                            ("permanent_fraction", "step"), "reward_smoothed")
            write_rows(out / name.replace(".csv", "_aggregate.csv"), TRACE_AGG_HEADER,
                       ([r[k] for k in TRACE_AGG_HEADER] for r in agg))
            if args.render_ascii:
                for frac, seed, *_, ascii_map in results:
                    print(f"# fraction={frac} seed={seed}\n{ascii_map}")
            print(out / name)
        return 0
    except (ValueError, KeyError) as exc:
        print(f"membudget: error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"membudget: failed: {exc!r}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
