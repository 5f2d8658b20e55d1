"""Seeded simulation runs: population setup, the synchronous step loop and
trajectory recording.

Every agent owns a Philox stream keyed by ``(master_seed, agent_id)``. Its
initial state is drawn first, then wander noise in fixed blocks of
``NOISE_BLOCK`` steps, so an agent's draws never depend on how many other
agents exist or how the work is split across threads.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .dynamics import INFINITE, AgentState, DynamicsParams, step_range
from .space import BeliefSpace

NOISE_BLOCK = 256
SEED_LIMIT = 2**64


@dataclass(frozen=True)
class GroupSpec:
    name: str
    count: int
    sih: float

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name:
            raise ValueError("groups.name: must be a non-empty string")
        if any(ch in self.name for ch in ",\n\r\"/\\"):
            raise ValueError(f"groups.name: {self.name!r} contains a reserved character")
        if isinstance(self.count, bool) or not isinstance(self.count, int) or self.count < 1:
            raise ValueError(f"groups.count: must be an integer >= 1, got {self.count!r}")
        sih = self.sih
        if isinstance(sih, str):
            if sih.lower() not in ("inf", "infinite", "infinity"):
                raise ValueError(f"groups.sih: unrecognized value {sih!r}")
            sih = INFINITE
        if isinstance(sih, bool) or not isinstance(sih, (int, float)) or math.isnan(sih) or sih < 0:
            raise ValueError(f"groups.sih: must be >= 0 or 'inf', got {self.sih!r}")
        object.__setattr__(self, "sih", float(sih))


@dataclass(frozen=True)
class SimConfig:
    dims: int = 2
    half_extent: float = 10.0
    cells_per_axis: int = 20
    label_seed: int = 0
    dynamics: DynamicsParams = field(default_factory=DynamicsParams)
    groups: tuple[GroupSpec, ...] = (
        GroupSpec("nomad", 100, 0.0),
        GroupSpec("flock", 100, 2.0),
        GroupSpec("stampede", 100, INFINITE),
    )
    steps: int = 5000
    record_every: int = 10
    master_seed: int = 0
    isolate_groups: bool = True

    def __post_init__(self):
        for name in ("dims", "cells_per_axis", "steps", "record_every"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise ValueError(f"{name}: must be an integer >= 1, got {value!r}")
        for name in ("label_seed", "master_seed"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or not 0 <= value < SEED_LIMIT:
                raise ValueError(f"{name}: must be an integer in [0, 2**64), got {value!r}")
        he = self.half_extent
        if isinstance(he, bool) or not isinstance(he, (int, float)) or not (0 < he < math.inf):
            raise ValueError(f"half_extent: must be positive and finite, got {he!r}")
        object.__setattr__(self, "half_extent", float(he))
        groups = tuple(self.groups)
        if not groups:
            raise ValueError("groups: at least one group is required")
        names = [g.name for g in groups]
        if len(set(names)) != len(names):
            raise ValueError("groups: group names must be unique")
        object.__setattr__(self, "groups", groups)
        if self.dynamics.max_speed * self.dynamics.dt >= 2 * self.half_extent:
            raise ValueError("dynamics.max_speed: max_speed * dt must stay below 2 * half_extent")

    @property
    def n_agents(self) -> int:
        return sum(g.count for g in self.groups)

    @property
    def n_samples(self) -> int:
        return self.steps // self.record_every + 1

    @property
    def sample_time(self) -> float:
        """Simulated time represented by one recorded sample."""
        return self.record_every * self.dynamics.dt

    def space(self) -> BeliefSpace:
        return BeliefSpace(self.dims, self.half_extent, self.cells_per_axis, self.label_seed)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["groups"] = [
            {"name": g.name, "count": g.count, "sih": "inf" if math.isinf(g.sih) else g.sih}
            for g in self.groups
        ]
        return d

    def digest(self) -> str:
        """SHA-256 over the canonical JSON form of the configuration."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    @property
    def run_id(self) -> str:
        return self.digest()[:16]


@dataclass
class Trajectory:
    agent_id: int
    group: str
    sih: float
    steps: np.ndarray
    positions: np.ndarray
    labels: list[str]

    @property
    def samples(self):
        for step, pos, label in zip(self.steps.tolist(), self.positions, self.labels):
            yield step, pos, label

    def __len__(self):
        return len(self.labels)

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (
            self.agent_id == other.agent_id
            and self.group == other.group
            and (self.sih == other.sih)
            and np.array_equal(self.steps, other.steps)
            and self.positions.shape == other.positions.shape
            and self.positions.tobytes() == other.positions.tobytes()
            and self.labels == other.labels
        )


def agent_stream(master_seed: int, agent_id: int) -> np.random.Generator:
    """Counter-based stream for one agent, keyed by hashing (master_seed, agent_id)."""
    seq = np.random.SeedSequence(master_seed, spawn_key=(agent_id,))
    return np.random.Generator(np.random.Philox(seq))


def _agent_roster(config: SimConfig) -> list[tuple[int, GroupSpec]]:
    roster = []
    for g in config.groups:
        for _ in range(g.count):
            roster.append((len(roster), g))
    return roster


def _draw_initial(rng: np.random.Generator, config: SimConfig):
    dims = config.dims
    h = config.half_extent
    pos = rng.uniform(-h, h, dims)
    while True:
        v = rng.standard_normal(dims)
        norm = np.linalg.norm(v)
        if norm > 0:
            break
    speed = rng.uniform(0.0, config.dynamics.max_speed)
    return pos, v / norm, speed


def init_population(config: SimConfig, agent_ids=None) -> list[AgentState]:
    """Initial states: uniform positions, isotropic headings, uniform speeds."""
    return [state for state, _ in _init_with_streams(config, agent_ids)]


def _init_with_streams(config: SimConfig, agent_ids=None):
    roster = _agent_roster(config)
    if agent_ids is not None:
        wanted = sorted(set(int(a) for a in agent_ids))
        if not wanted or wanted[0] < 0 or wanted[-1] >= len(roster):
            raise ValueError(f"agent_ids must lie in [0, {len(roster)})")
        roster = [roster[a] for a in wanted]
    out = []
    for agent_id, g in roster:
        rng = agent_stream(config.master_seed, agent_id)
        pos, heading, speed = _draw_initial(rng, config)
        out.append((AgentState(agent_id, pos, heading, speed, g.sih, g.name), rng))
    return out


def run(config: SimConfig, *, workers: int = 1, agent_ids=None, observer=None) -> list[Trajectory]:
    """Simulate `config` and return one trajectory per agent.

    ``agent_ids`` restricts the run to a subset of the configured agents, each
    keeping its own stream, as if the others did not exist. ``observer``, if
    given, is called as ``observer(step, positions, headings, speeds)`` after
    step 0 and every recorded step.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    params = config.dynamics
    space = config.space()
    agents = _init_with_streams(config, agent_ids)
    n = len(agents)
    dims = config.dims

    pos = np.array([a.position for a, _ in agents]).reshape(n, dims)
    head = np.array([a.heading for a, _ in agents]).reshape(n, dims)
    speed = np.array([a.speed for a, _ in agents], dtype=float)
    sih = np.array([a.sih for a, _ in agents], dtype=float)
    streams = [rng for _, rng in agents]
    group_index = {g.name: k for k, g in enumerate(config.groups)}
    if config.isolate_groups:
        group_ids = np.array([group_index[a.group] for a, _ in agents], dtype=np.int64)
    else:
        group_ids = np.zeros(n, dtype=np.int64)

    new_pos = np.empty_like(pos)
    new_head = np.empty_like(head)
    new_speed = np.empty_like(speed)
    n_neighbors = np.zeros(n, dtype=np.int64)
    noise_dir = np.empty((n, NOISE_BLOCK, dims))
    noise_ang = np.empty((n, NOISE_BLOCK))

    n_samples = config.n_samples
    rec_pos = np.empty((n_samples, n, dims))
    rec_steps = np.empty(n_samples, dtype=np.int64)
    rec_pos[0] = pos
    rec_steps[0] = 0
    if observer is not None:
        observer(0, pos.copy(), head.copy(), speed.copy())

    chunks = _chunks(n, workers)
    pool = ThreadPoolExecutor(max_workers=workers) if len(chunks) > 1 else None
    scalars = (params.max_speed, params.max_turn, params.align_weight, params.cohere_weight,
               params.separate_weight, params.speed_relax, params.epsilon, params.dt,
               params.max_wander, space.half_extent)
    sample = 1
    try:
        for step in range(1, config.steps + 1):
            slot = (step - 1) % NOISE_BLOCK
            if slot == 0:
                for i, rng in enumerate(streams):
                    noise_dir[i] = rng.standard_normal((NOISE_BLOCK, dims))
                    noise_ang[i] = rng.random(NOISE_BLOCK)
            nd = noise_dir[:, slot, :]
            na = noise_ang[:, slot]
            nd = np.ascontiguousarray(nd)
            na = np.ascontiguousarray(na)
            args = (pos, head, speed, sih, group_ids, nd, na, *scalars, new_pos, new_head, new_speed, n_neighbors)
            if pool is None:
                step_range(0, n, *args)
            else:
                for fut in [pool.submit(step_range, lo, hi, *args) for lo, hi in chunks]:
                    fut.result()
            pos, new_pos = new_pos, pos
            head, new_head = new_head, head
            speed, new_speed = new_speed, speed
            if step % config.record_every == 0:
                rec_pos[sample] = pos
                rec_steps[sample] = step
                sample += 1
                if observer is not None:
                    observer(step, pos.copy(), head.copy(), speed.copy())
    finally:
        if pool is not None:
            pool.shutdown()

    trajectories = []
    for i, (agent, _) in enumerate(agents):
        positions = np.ascontiguousarray(rec_pos[:, i, :])
        trajectories.append(Trajectory(agent.id, agent.group, agent.sih, rec_steps.copy(),
                                       positions, space.labels_of(positions)))
    return trajectories


def _chunks(n: int, workers: int) -> list[tuple[int, int]]:
    workers = max(1, min(workers, n))
    bounds = np.linspace(0, n, workers + 1).round().astype(int)
    return [(int(lo), int(hi)) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
