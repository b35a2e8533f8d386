"""``hems`` command line: data prep, training, month evaluation and cost tables.

Every subcommand computes all of its outputs in memory before touching the
filesystem, so a failed run leaves nothing behind. Exit codes: 0 ok,
2 validation failure, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime as dt
import io
import json
import logging
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from hems.data import dump_bundle, find_day, ingest, load_bundle, select_days, synth_generate
from hems.dqn import DqnConfig, train_dqn
from hems.env import ApplianceSpec, DayProfile, replay
from hems.errors import HemsError, NumericalError, ValidationError
from hems.goexplore import GoExploreConfig, run_phase1
from hems.nn import load_network, network_to_dict
from hems.oracle import solve_day
from hems.phase2 import Phase2Config, robustify, train_clone
from hems.ppo import PpoConfig, train_ppo
from hems.rl import Normalizer, TrainingEnv, greedy_rollout

log = logging.getLogger("hems")

SEED_ENV = "HEMS_SEED"


@dataclass
class RunConfig:
    seed: int | None = None
    appliance: ApplianceSpec = field(default_factory=ApplianceSpec)
    goexplore: GoExploreConfig = field(default_factory=GoExploreConfig)
    ppo: PpoConfig = field(default_factory=PpoConfig)
    dqn: DqnConfig = field(default_factory=DqnConfig)
    phase2: Phase2Config = field(default_factory=Phase2Config)

    SECTIONS = {
        "appliance": ApplianceSpec,
        "goexplore": GoExploreConfig,
        "ppo": PpoConfig,
        "dqn": DqnConfig,
        "phase2": Phase2Config,
    }

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        if not isinstance(raw, dict):
            raise ValidationError("config must be a JSON object")
        unknown = set(raw) - set(cls.SECTIONS) - {"seed"}
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        for name, typ in cls.SECTIONS.items():
            section = raw.get(name, {})
            if not isinstance(section, dict):
                raise ValidationError(f"config section {name!r} must be an object")
            allowed = {f.name for f in dataclasses.fields(typ)}
            bad = set(section) - allowed
            if bad:
                raise ValidationError(f"unknown keys in {name!r}: {sorted(bad)}")
            try:
                kwargs[name] = typ(**section)
            except TypeError as exc:
                raise ValidationError(f"bad {name!r} section: {exc}") from exc
        seed = raw.get("seed")
        if seed is not None and (not isinstance(seed, int) or isinstance(seed, bool) or seed < 0):
            raise ValidationError("seed must be a non-negative integer")
        return cls(seed=seed, **kwargs)

    @classmethod
    def load(cls, path: str | os.PathLike | None) -> "RunConfig":
        if path is None:
            return cls()
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        out: dict = {"seed": self.seed}
        for name in self.SECTIONS:
            d = dataclasses.asdict(getattr(self, name))
            out[name] = {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}
        return out


def resolve_seed(flag: int | None, config: RunConfig) -> int:
    """Explicit flag, then the config file, then ``HEMS_SEED``, then 0."""
    if flag is not None:
        return flag
    if config.seed is not None:
        return config.seed
    env = os.environ.get(SEED_ENV)
    if env is None:
        return 0
    try:
        seed = int(env)
    except ValueError as exc:
        raise ValidationError(f"{SEED_ENV}={env!r} is not an integer") from exc
    if seed < 0:
        raise ValidationError(f"{SEED_ENV} must be >= 0")
    return seed


def write_outputs(files: dict[Path, str]) -> None:
    """Write every file via a temp name and rename, after all content exists."""
    staged = []
    try:
        for path, text in files.items():
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(text)
            staged.append((tmp, path))
    except OSError as exc:
        for tmp, _ in staged:
            os.unlink(tmp)
        raise ValidationError(f"cannot write outputs: {exc}") from exc
    for tmp, path in staged:
        os.replace(tmp, path)


def _json(obj) -> str:
    return json.dumps(obj, indent=1) + "\n"


def _date(text: str) -> dt.date:
    try:
        return dt.date.fromisoformat(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not an ISO date: {text!r}") from exc


# --- evaluation and reporting -------------------------------------------


def costs_csv(rows: Sequence[tuple[str, float]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["date", "cost"])
    for date, cost in rows:
        w.writerow([date, repr(float(cost))])
    return buf.getvalue()


def read_costs(path: str | os.PathLike) -> list[tuple[str, float]]:
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != ["date", "cost"]:
                raise ValidationError(f"{path}: expected header date,cost")
            rows = [(r["date"], float(r["cost"])) for r in reader]
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise ValidationError(f"{path}: {exc}") from exc
    if len({d for d, _ in rows}) != len(rows):
        raise ValidationError(f"{path}: duplicate dates")
    return rows


def evaluate_policy(path, days: Sequence[DayProfile]) -> list[tuple[str, float]]:
    """Greedy daily costs of a saved policy or Q-network."""
    net, meta = load_network(path)
    try:
        spec = ApplianceSpec(**meta["appliance"])
        normalizer = Normalizer.from_dict(meta["normalizer"])
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"{path}: policy file lacks appliance/normalizer metadata") from exc
    return [(d.date, greedy_rollout(net, d, spec, normalizer).total_cost) for d in days]


def evaluate_actions(schedules: dict[str, list[int]], days: Sequence[DayProfile], spec: ApplianceSpec):
    """Daily costs of fixed action lists keyed by date (e.g. oracle output)."""
    rows = []
    for d in days:
        if d.date not in schedules:
            raise ValidationError(f"no schedule for {d.date}")
        rows.append((d.date, replay(d, spec, schedules[d.date]).total_cost))
    return rows


def savings(dqn_total: float, total: float) -> tuple[float, float]:
    saving = dqn_total - total
    pct = 100.0 * saving / dqn_total if dqn_total != 0 else 0.0
    return saving, pct


def build_report(reports: dict[str, list[tuple[str, float]]]) -> tuple[str, str]:
    """CSV and text tables of monthly totals and savings against DQN."""
    names = list(reports)
    dates = [d for d, _ in reports[names[0]]]
    for name in names[1:]:
        if sorted(d for d, _ in reports[name]) != sorted(dates):
            raise ValidationError(f"{name} report covers different days than {names[0]}")
    totals = {name: sum(c for _, c in rows) for name, rows in reports.items()}
    base = totals["dqn"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["agent", "days", "monthly_cost", "saving_vs_dqn", "saving_pct"])
    lines = [f"{'agent':<10} {'cost':>10} {'saving vs DQN':>22}"]
    for name in names:
        saving, pct = savings(base, totals[name])
        w.writerow([name, len(dates), f"{totals[name]:.2f}", f"{saving:.2f}", f"{pct:.2f}"])
        lines.append(f"{name:<10} {totals[name]:>10.2f} {saving:>+12.2f} ({pct:+.2f}%)")
    return buf.getvalue(), "\n".join(lines) + "\n"


# --- subcommands -----------------------------------------------------------


def cmd_gen_data(args, config: RunConfig) -> None:
    seed = resolve_seed(args.seed, config)
    days = synth_generate(seed, args.days, args.start)
    write_outputs({Path(args.out): dump_bundle(days) + "\n"})


def cmd_ingest(args, config: RunConfig) -> None:
    split = ingest(
        args.price, args.background, args.renewable,
        args.train_start, args.train_days, args.eval_start, args.eval_days,
        load_train_start=args.load_train_start, load_eval_start=args.load_eval_start,
    )
    write_outputs({Path(args.out): dump_bundle(split.all_days()) + "\n"})


def _eval_days(args) -> list[DayProfile]:
    return select_days(load_bundle(args.data), args.date_from, args.date_to)


def cmd_oracle(args, config: RunConfig) -> None:
    days = _eval_days(args)
    results = [solve_day(d, config.appliance).to_dict(d.date) for d in days]
    write_outputs({Path(args.out): _json(results)})


def _policy_meta(kind: str, train_day: DayProfile, normalizer: Normalizer, config: RunConfig, seed: int, **extra):
    return {
        "kind": kind,
        "train_day": train_day.date,
        "seed": seed,
        "appliance": dataclasses.asdict(config.appliance),
        "normalizer": normalizer.to_dict(),
        **extra,
    }


def cmd_train(args, config: RunConfig) -> None:
    seed = resolve_seed(args.seed, config)
    day = find_day(load_bundle(args.data), args.train_day)
    spec = config.appliance
    normalizer = Normalizer.fit([day], spec)
    out = Path(args.out_dir)
    files: dict[Path, str] = {}

    if args.agent == "go-explore":
        p1 = run_phase1(day, spec, seed, config.goexplore)
        demo = p1.demonstration
        files[out / "demo.json"] = demo.dumps() + "\n"
        files[out / "archive.json"] = _json(p1.archive.to_json())
        clone, clone_rep = train_clone(
            demo, day, spec, normalizer, config.ppo, seed,
            episodes=config.phase2.clone_episodes, attempt_episodes=config.phase2.clone_attempt_episodes,
            kl_stop_factor=config.phase2.clone_kl_stop_factor,
        )
        robust, robust_rep = robustify(
            clone, day, spec, normalizer, config.ppo, seed, episodes=config.phase2.robust_episodes
        )
        for name, net, rep in (("clone", clone, clone_rep), ("robust", robust, robust_rep)):
            meta = _policy_meta(name, day, normalizer, config, seed, warning=rep.warning)
            files[out / f"{name}.policy.json"] = _json(network_to_dict(net, **meta))
            files[out / f"{name}.report.csv"] = rep.to_csv()
        summary = {
            "train_day": day.date,
            "seed": seed,
            "phase1_iterations": p1.iterations,
            "phase1_cells": len(p1.archive),
            "demo_cost": demo.total_cost,
            "clone_cost": clone_rep.final_cost,
            "clone_warning": clone_rep.warning,
            "clone_episodes_used": len(clone_rep.returns),
            "clone_restarts": clone_rep.restarts,
            "robust_cost": robust_rep.final_cost,
        }
    else:
        env = TrainingEnv([day], spec, normalizer)
        if args.agent == "ppo":
            net, rep = train_ppo(env, config.ppo, seed)
        else:
            net, rep = train_dqn(env, config.dqn, seed)
        kind = args.agent
        files[out / f"{kind}.policy.json"] = _json(network_to_dict(net, **_policy_meta(kind, day, normalizer, config, seed)))
        files[out / f"{kind}.report.csv"] = rep.to_csv()
        summary = {"train_day": day.date, "seed": seed, f"{kind}_cost": rep.final_cost}
    summary["config"] = config.to_dict()
    files[out / f"{args.agent}.summary.json"] = _json(summary)
    write_outputs(files)


def cmd_evaluate(args, config: RunConfig) -> None:
    days = _eval_days(args)
    if args.oracle is not None:
        try:
            raw = json.loads(Path(args.oracle).read_text())
            schedules = {r["date"]: r["optimal_actions"] for r in raw}
        except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ValidationError(f"cannot read oracle file {args.oracle}: {exc}") from exc
        exclude = args.train_day
        rows_fn = lambda ds: evaluate_actions(schedules, ds, config.appliance)  # noqa: E731
    else:
        if not Path(args.policy).is_file():
            raise ValidationError(f"policy file not found: {args.policy}")
        _, meta = load_network(args.policy)
        exclude = args.train_day or meta.get("train_day")
        rows_fn = lambda ds: evaluate_policy(args.policy, ds)  # noqa: E731
    if args.exclude_train_day:
        if exclude is None:
            raise ValidationError("--exclude-train-day needs a known training day (use --train-day)")
        days = [d for d in days if d.date != exclude]
        if not days:
            raise ValidationError("no evaluation days left after excluding the training day")
    write_outputs({Path(args.out): costs_csv(rows_fn(days))})


def cmd_report(args, config: RunConfig) -> None:
    reports = {
        "dqn": read_costs(args.dqn),
        "ppo": read_costs(args.ppo),
        "clone": read_costs(args.clone),
        "robust": read_costs(args.robust),
    }
    table_csv, text = build_report(reports)
    write_outputs({Path(args.out): table_csv})
    sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hems", description="Appliance scheduling with Go-Explore, PPO and DQN.")
    p.add_argument("--config", help="JSON run config (unknown keys rejected)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="write a seeded synthetic profile bundle")
    g.add_argument("--seed", type=int)
    g.add_argument("--days", type=int, default=30)
    g.add_argument("--start", type=_date, default=dt.date(2021, 5, 1))
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_data)

    i = sub.add_parser("ingest", help="build a profile bundle from price/load/generation CSVs")
    for name in ("price", "background", "renewable"):
        i.add_argument(f"--{name}", required=True)
    i.add_argument("--train-start", type=_date, required=True)
    i.add_argument("--train-days", type=int, default=1)
    i.add_argument("--eval-start", type=_date, required=True)
    i.add_argument("--eval-days", type=int, default=30)
    i.add_argument("--load-train-start", type=_date, help="first load/generation day for training (if from another year)")
    i.add_argument("--load-eval-start", type=_date, help="first load/generation day for evaluation")
    i.add_argument("--out", required=True)
    i.set_defaults(func=cmd_ingest)

    def day_range(sp):
        sp.add_argument("--data", required=True)
        sp.add_argument("--from", dest="date_from")
        sp.add_argument("--to", dest="date_to")

    o = sub.add_parser("oracle", help="exact optimal schedules per day")
    day_range(o)
    o.add_argument("--out", required=True)
    o.set_defaults(func=cmd_oracle)

    t = sub.add_parser("train", help="train an agent on one day")
    t.add_argument("agent", choices=("go-explore", "ppo", "dqn"))
    t.add_argument("--data", required=True)
    t.add_argument("--train-day", required=True)
    t.add_argument("--seed", type=int)
    t.add_argument("--out-dir", required=True)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="greedy daily costs over a date range")
    src = e.add_mutually_exclusive_group(required=True)
    src.add_argument("--policy")
    src.add_argument("--oracle", help="replay the schedules of an 'oracle' output file")
    day_range(e)
    e.add_argument("--exclude-train-day", action="store_true")
    e.add_argument("--train-day", help="training day to exclude (default: read from the policy file)")
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_evaluate)

    r = sub.add_parser("report", help="monthly totals and savings against DQN")
    for name in ("dqn", "ppo", "clone", "robust"):
        r.add_argument(f"--{name}", required=True)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_report)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        config = RunConfig.load(args.config)
        args.func(args, config)
    except NumericalError as exc:
        print(f"hems: numerical failure: {exc}", file=sys.stderr)
        return 3
    except (ValidationError, HemsError) as exc:
        print(f"hems: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
