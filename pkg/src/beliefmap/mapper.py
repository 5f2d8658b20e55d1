"""Belief maps: trajectory term graphs, force-directed layout and overlays."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from .engine import Trajectory


@dataclass
class BeliefGraph:
    """Shared-node graph of visited cells.

    ``visits[label][agent_id]`` counts recorded samples of that agent in that
    cell; dwell and visitor statistics derive from it. ``edges`` maps a
    sorted label pair to its traversal count.
    """

    visits: dict[str, Counter] = field(default_factory=dict)
    edges: Counter = field(default_factory=Counter)
    sample_time: float = 1.0
    layout: dict[str, tuple[float, float]] | None = None

    @property
    def nodes(self) -> list[str]:
        return sorted(self.visits)

    def dwell_samples(self, label: str) -> int:
        return sum(self.visits[label].values())

    def dwell_time(self, label: str) -> float:
        return self.dwell_samples(label) * self.sample_time

    def unique_visitors(self, label: str) -> int:
        return len(self.visits[label])

    def mean_dwell(self, label: str) -> float:
        return self.dwell_time(label) / self.unique_visitors(label)

    def agent_samples(self, agent_id: int) -> int:
        return sum(c.get(agent_id, 0) for c in self.visits.values())

    @property
    def agents(self) -> set[int]:
        out: set[int] = set()
        for c in self.visits.values():
            out.update(c)
        return out

    def merge(self, other: BeliefGraph) -> BeliefGraph:
        if self.sample_time != other.sample_time:
            raise ValueError("cannot merge graphs with different sample times")
        visits = {lab: Counter(c) for lab, c in self.visits.items()}
        for lab, c in other.visits.items():
            visits.setdefault(lab, Counter()).update(c)
        return BeliefGraph(visits, self.edges + other.edges, self.sample_time)

    def same_structure(self, other: BeliefGraph) -> bool:
        return (self.visits == other.visits and self.edges == other.edges
                and self.sample_time == other.sample_time)

    def to_dict(self) -> dict:
        nodes = []
        for lab in self.nodes:
            row = {
                "label": lab,
                "dwell_samples": self.dwell_samples(lab),
                "dwell_time": self.dwell_time(lab),
                "unique_visitors": self.unique_visitors(lab),
                "mean_dwell": self.mean_dwell(lab),
                "visits": {str(a): n for a, n in sorted(self.visits[lab].items())},
            }
            if self.layout is not None:
                row["x"], row["y"] = self.layout[lab]
            nodes.append(row)
        edges = [{"source": a, "target": b, "count": n} for (a, b), n in sorted(self.edges.items())]
        return {"sample_time": self.sample_time, "nodes": nodes, "edges": edges}

    @classmethod
    def from_dict(cls, d: dict) -> BeliefGraph:
        visits = {n["label"]: Counter({int(a): int(c) for a, c in n["visits"].items()}) for n in d["nodes"]}
        edges = Counter({tuple(sorted((e["source"], e["target"]))): int(e["count"]) for e in d["edges"]})
        layout = None
        if d["nodes"] and "x" in d["nodes"][0]:
            layout = {n["label"]: (float(n["x"]), float(n["y"])) for n in d["nodes"]}
        return cls(visits, edges, float(d["sample_time"]), layout)


def _trajectory_graph(traj: Trajectory, sample_time: float) -> BeliefGraph:
    visits: dict[str, Counter] = {}
    edges: Counter = Counter()
    prev = None
    for lab in traj.labels:
        visits.setdefault(lab, Counter())[traj.agent_id] += 1
        if prev is not None and lab != prev:
            edges[tuple(sorted((prev, lab)))] += 1
        prev = lab
    return BeliefGraph(visits, edges, sample_time)


def build_graph(trajectories, sample_time: float = 1.0) -> BeliefGraph:
    """Merge per-trajectory graphs: one node per visited cell, one edge per cell change.

    Consecutive samples in the same cell add dwell, not edges. Dwell times
    are sample counts times ``sample_time``.
    """
    trajectories = list(trajectories)
    if not trajectories:
        raise ValueError("build_graph needs at least one trajectory")
    graph = BeliefGraph(sample_time=float(sample_time))
    for traj in trajectories:
        graph = graph.merge(_trajectory_graph(traj, float(sample_time)))
    return graph


# ---------------------------------------------------------------- layout


@dataclass(frozen=True)
class FrParams:
    iterations: int = 500
    area: float = 100.0
    c: float = 1.0
    initial_temperature: float = 1.0
    cooling: float = 0.95
    layout_seed: int = 0

    def __post_init__(self):
        if isinstance(self.iterations, bool) or not isinstance(self.iterations, int) or self.iterations < 1:
            raise ValueError("iterations: must be an integer >= 1")
        for name in ("area", "c", "initial_temperature"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and 0 < v < math.inf):
                raise ValueError(f"{name}: must be positive and finite")
        if not 0 < self.cooling < 1:
            raise ValueError("cooling: must be in (0, 1)")


def _ideal_distance(n: int, params: FrParams) -> float:
    return params.c * math.sqrt(params.area / n)


def fr_positions(n: int, edges: np.ndarray, params: FrParams) -> tuple[np.ndarray, np.ndarray]:
    """Fruchterman-Reingold on nodes 0..n-1; returns (positions, per-iteration energy).

    Each iteration moves every node by exactly the current temperature along
    its net force (nodes with zero net force stay put). Energy is the sum of
    squared displacements of that iteration.
    """
    side = math.sqrt(params.area)
    rng = np.random.default_rng(params.layout_seed)
    pos = rng.uniform(-side / 2, side / 2, (n, 2))
    energy = np.zeros(params.iterations)
    if n == 1:
        return pos, energy
    k = _ideal_distance(n, params)
    tiny = 1e-9 * k
    pos = _separate_coincident(pos, tiny)
    # fixed per-pair fallback directions for pairs that coincide mid-run
    angles = (np.arange(n)[:, None] * 0.6180339887498949 + np.arange(n)[None, :] * 0.41421356237309503) * 2 * math.pi
    fallback = np.stack([np.cos(angles), np.sin(angles)], axis=-1)
    fallback = fallback - np.transpose(fallback, (1, 0, 2))
    fallback /= np.maximum(np.linalg.norm(fallback, axis=-1, keepdims=True), 1e-300)
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    t = params.initial_temperature
    for it in range(params.iterations):
        delta = pos[:, None, :] - pos[None, :, :]
        dist = np.linalg.norm(delta, axis=-1)
        close = dist < tiny
        np.fill_diagonal(close, False)
        if close.any():
            delta = np.where(close[..., None], fallback * tiny, delta)
            dist = np.where(close, tiny, dist)
        np.fill_diagonal(dist, 1.0)
        rep = (k * k) / (dist * dist)
        np.fill_diagonal(rep, 0.0)
        disp = np.einsum("ij,ijk->ik", rep, delta)
        if len(edges):
            d_e = delta[edges[:, 0], edges[:, 1]]
            l_e = dist[edges[:, 0], edges[:, 1]]
            pull = d_e * (l_e / k)[:, None]
            np.add.at(disp, edges[:, 0], -pull)
            np.add.at(disp, edges[:, 1], pull)
        length = np.linalg.norm(disp, axis=1)
        moving = length > 0
        step = np.zeros_like(disp)
        step[moving] = disp[moving] * (t / length[moving])[:, None]
        pos = pos + step
        energy[it] = float(np.sum(step * step))
        t *= params.cooling
    return pos, energy


def _separate_coincident(pos: np.ndarray, tiny: float) -> np.ndarray:
    pos = pos.copy()
    seen: dict[tuple[float, float], int] = {}
    for i in range(len(pos)):
        key = (float(pos[i, 0]), float(pos[i, 1]))
        if key in seen:
            seen[key] += 1
            a = seen[key] * 2.399963229728653
            pos[i] += tiny * seen[key] * np.array([math.cos(a), math.sin(a)])
        else:
            seen[key] = 0
    return pos


def fr_layout(graph: BeliefGraph, params: FrParams | None = None) -> dict[str, tuple[float, float]]:
    """Force-directed 2-D coordinates for every node, deterministic in layout_seed.

    Edge multiplicity does not change attraction; the unweighted force
    model is used.
    """
    params = params or FrParams()
    labels = graph.nodes
    if not labels:
        raise ValueError("fr_layout needs at least one node")
    index = {lab: i for i, lab in enumerate(labels)}
    edges = np.array([(index[a], index[b]) for (a, b) in sorted(graph.edges)], dtype=np.int64)
    pos, _ = fr_positions(len(labels), edges, params)
    return {lab: (float(pos[i, 0]), float(pos[i, 1])) for lab, i in index.items()}


# ---------------------------------------------------------------- overlay


@dataclass
class OverlayMap:
    """Base-graph coordinates with per-group (dwell_time, unique_visitors) channels."""

    base: BeliefGraph
    channels: dict[str, dict[str, tuple[float, int]]]
    base_group: str = "base"

    @property
    def groups(self) -> list[str]:
        return list(self.channels)

    def coords(self, label: str) -> tuple[float, float]:
        return self.base.layout[label]

    def centroid(self, group: str) -> np.ndarray:
        """Dwell-weighted mean position of a group over the base coordinates."""
        ch = self.channels[group]
        w = np.array([ch[lab][0] for lab in self.base.nodes])
        xy = np.array([self.base.layout[lab] for lab in self.base.nodes])
        if w.sum() == 0:
            raise ValueError(f"group {group!r} never visits the base map")
        return (w[:, None] * xy).sum(axis=0) / w.sum()

    def to_dict(self) -> dict:
        nodes = []
        for lab in self.base.nodes:
            x, y = self.base.layout[lab]
            row = {
                "label": lab, "x": x, "y": y,
                "dwell_time": self.base.dwell_time(lab),
                "unique_visitors": self.base.unique_visitors(lab),
                "mean_dwell": self.base.mean_dwell(lab),
            }
            for g, ch in self.channels.items():
                row[f"{g}_dwell_time"], row[f"{g}_unique_visitors"] = ch[lab]
            nodes.append(row)
        edges = [{"source": a, "target": b, "count": n} for (a, b), n in sorted(self.base.edges.items())]
        return {"base_group": self.base_group, "groups": self.groups, "nodes": nodes, "edges": edges}


def overlay_map(base: BeliefGraph, others, base_group: str = "base") -> OverlayMap:
    """Attach each other group's statistics to the base layout; unvisited nodes get zeros."""
    if base.layout is None:
        raise ValueError("overlay needs a base graph with a layout")
    channels = {}
    for name, g in others:
        ch = {}
        for lab in base.nodes:
            if lab in g.visits:
                ch[lab] = (g.dwell_time(lab), g.unique_visitors(lab))
            else:
                ch[lab] = (0.0, 0)
        channels[name] = ch
    return OverlayMap(base, channels, base_group)


# ---------------------------------------------------------------- export


def to_networkx(graph: BeliefGraph, overlay: OverlayMap | None = None) -> nx.Graph:
    G = nx.Graph()
    for lab in graph.nodes:
        attrs = {
            "label": lab,
            "dwell_time": graph.dwell_time(lab),
            "unique_visitors": graph.unique_visitors(lab),
            "mean_dwell": graph.mean_dwell(lab),
        }
        if graph.layout is not None:
            attrs["x"], attrs["y"] = graph.layout[lab]
        if overlay is not None:
            for g, ch in overlay.channels.items():
                attrs[f"{g}_dwell_time"], attrs[f"{g}_unique_visitors"] = ch[lab]
        G.add_node(lab, **attrs)
    for (a, b), n in sorted(graph.edges.items()):
        G.add_edge(a, b, count=n)
    return G


def write_graphml(path, graph: BeliefGraph, overlay: OverlayMap | None = None) -> None:
    nx.write_graphml(to_networkx(graph, overlay), str(path))


def write_json(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=1, sort_keys=False)
        fh.write("\n")
