"""Phase 1: archive-based exploration until convergence.

Cells are ``(remaining task, hour)``. Each iteration samples a cell with
probability proportional to ``1 / visits``, restores the simulator to that
cell's snapshot, explores with uniform random actions until the end of the
day and merges every visited cell back into the archive. A cell's
trajectory is replaced only by a strictly cheaper one.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from hems import kernels
from hems.env import ApplianceSpec, DayProfile, EnvState, HomeEnergyEnv, Snapshot, observe, replay
from hems.errors import ValidationError


class Cell(NamedTuple):
    remaining_task: int
    hour: int


def cell_of(state: EnvState) -> Cell:
    return Cell(state.remaining_task, state.hour)


@dataclass
class CellEntry:
    cell: Cell
    trajectory: tuple[int, ...]  # effective actions from reset
    visits: int
    cost_to_reach: float
    snapshot: Snapshot


@dataclass
class Archive:
    entries: dict[Cell, CellEntry] = field(default_factory=dict)
    best_terminal: CellEntry | None = None

    def __len__(self):
        return len(self.entries)

    def to_json(self) -> list[dict]:
        return [
            {
                "remaining_task": e.cell.remaining_task,
                "hour": e.cell.hour,
                "visits": e.visits,
                "cost_to_reach": e.cost_to_reach,
                "trajectory": list(e.trajectory),
            }
            for e in self.entries.values()
        ]


class Visit(NamedTuple):
    cell: Cell
    trajectory: tuple[int, ...]
    cost_to_reach: float


@dataclass
class Demonstration:
    date: str
    actions: list[int]
    states: list[EnvState]
    total_cost: float

    def to_dict(self) -> dict:
        return {"date": self.date, "actions": list(self.actions), "total_cost": self.total_cost}

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, d: dict, day: DayProfile, spec: ApplianceSpec) -> "Demonstration":
        if d.get("date") != day.date:
            raise ValidationError(f"demonstration is for {d.get('date')}, not {day.date}")
        demo = demonstration_from_actions(day, spec, d["actions"])
        if demo.total_cost != d["total_cost"]:
            raise ValidationError("demonstration total_cost does not match its replay")
        return demo


def demonstration_from_actions(day: DayProfile, spec: ApplianceSpec, actions) -> Demonstration:
    run = replay(day, spec, list(actions))
    return Demonstration(day.date, run.actions, run.states, run.total_cost)


@dataclass
class GoExploreConfig:
    patience: int = 500
    max_iters: int = 20000

    def __post_init__(self):
        if self.patience < 1 or self.max_iters < 1:
            raise ValidationError("patience and max_iters must be >= 1")


def sampling_distribution(archive: Archive) -> tuple[list[Cell], np.ndarray]:
    if not archive.entries:
        raise ValidationError("cannot sample from an empty archive")
    cells = list(archive.entries)
    scores = np.array([1.0 / archive.entries[c].visits for c in cells])
    return cells, scores / scores.sum()


class Explorer:
    """Bundles a simulator registered with one day and its billed stage costs."""

    def __init__(self, day: DayProfile, spec: ApplianceSpec):
        self.day = day
        self.spec = spec
        self.env = HomeEnergyEnv(spec)
        self.env.register(day)
        self.cost_off, self.cost_on = day.stage_costs(spec)

    def initial_archive(self) -> Archive:
        state = self.env.reset(self.day)
        cell = cell_of(state)
        entry = CellEntry(cell, (), 1, 0.0, self.env.snapshot())
        return Archive({cell: entry})

    def explore_from(self, entry: CellEntry, rng: np.random.Generator) -> list[Visit]:
        """Random rollout from ``entry``'s snapshot to the end of the day."""
        state = self.env.restore(entry.snapshot)
        left = self.day.hours - state.hour
        if left <= 0:
            return []
        requested = rng.integers(0, 2, size=left, dtype=np.int8)
        eff, cum = kernels.rollout(
            self.cost_off, self.cost_on, state.hour, state.remaining_task, requested,
            self.env.accrued_cost,
        )
        visits = []
        traj = entry.trajectory
        r = state.remaining_task
        for i in range(left):
            a = int(eff[i])
            traj = traj + (a,)
            r -= a
            visits.append(Visit(Cell(r, state.hour + i + 1), traj, float(cum[i])))
        return visits

    def snapshot_for(self, visit: Visit) -> Snapshot:
        state = observe(self.day, visit.cell.hour, visit.cell.remaining_task)
        return Snapshot(state, self.day.date, visit.cost_to_reach)


def update_archive(archive: Archive, visited: list[Visit], explorer: Explorer) -> Archive:
    for v in visited:
        entry = archive.entries.get(v.cell)
        if entry is None:
            entry = CellEntry(v.cell, v.trajectory, 1, v.cost_to_reach, explorer.snapshot_for(v))
            archive.entries[v.cell] = entry
        else:
            entry.visits += 1
            if v.cost_to_reach < entry.cost_to_reach:
                entry.trajectory = v.trajectory
                entry.cost_to_reach = v.cost_to_reach
                entry.snapshot = explorer.snapshot_for(v)
        if v.cell.hour == explorer.day.hours:
            best = archive.best_terminal
            if best is None or v.cost_to_reach < best.cost_to_reach:
                archive.best_terminal = entry
    return archive


@dataclass
class Phase1Result:
    demonstration: Demonstration
    archive: Archive
    iterations: int
    best_cost_trace: list[float]


def run_phase1(
    day: DayProfile,
    spec: ApplianceSpec,
    rng: np.random.Generator | int,
    config: GoExploreConfig | None = None,
) -> Phase1Result:
    config = config or GoExploreConfig()
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    explorer = Explorer(day, spec)
    archive = explorer.initial_archive()
    best = float("inf")
    stale = 0
    trace = []
    it = 0
    while it < config.max_iters and stale < config.patience:
        it += 1
        cells, probs = sampling_distribution(archive)
        entry = archive.entries[cells[rng.choice(len(cells), p=probs)]]
        update_archive(archive, explorer.explore_from(entry, rng), explorer)
        cost = archive.best_terminal.cost_to_reach
        if cost < best:
            best, stale = cost, 0
        else:
            stale += 1
        trace.append(best)
    # the terminal cell's entry keeps the cheapest full-day trajectory
    demo = demonstration_from_actions(day, spec, archive.best_terminal.trajectory)
    return Phase1Result(demo, archive, it, trace)
