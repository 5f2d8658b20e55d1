"""Command-line entry point: simulate, analyze, map, render.

Exit codes: 0 success, 1 usage or config error, 2 data error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import pairwise_profile, phase_labels, phase_summary
from .engine import run
from .mapper import FrParams, build_graph, fr_layout, overlay_map, write_graphml, write_json
from .records import (ConfigError, DataError, dump_config, load_config, read_trajectories,
                      space_from_meta, trajectory_meta, write_trajectories)
from .render import graph_svg, heatmap_svg, overlay_svg

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _write_text(path: Path, text: str):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _write_rows(path: Path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _fmt(x: float) -> str:
    return repr(float(x))


def _load_many(paths):
    trajectories, metas = [], []
    for p in paths:
        trajs, meta = read_trajectories(p)
        trajectories.extend(trajs)
        metas.append(meta)
    dims = {m["dims"] for m in metas}
    if len(dims) > 1:
        raise DataError(f"trajectory files disagree on dimensionality: {sorted(dims)}")
    return trajectories, metas


# ---------------------------------------------------------------- simulate


def cmd_simulate(args) -> int:
    config = load_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    trajectories = run(config, workers=args.workers)
    artifacts = []
    _write_text(out / "config.toml", dump_config(config))
    artifacts.append("config.toml")
    for g in config.groups:
        name = f"trajectories_{g.name}.csv"
        write_trajectories(out / name, [t for t in trajectories if t.group == g.name],
                           trajectory_meta(config, g.name))
        artifacts.append(name)
    manifest = {
        "run_id": config.run_id,
        "config_digest": config.digest(),
        "tool_version": __version__,
        "artifacts": sorted(artifacts),
    }
    write_json(out / "manifest.json", manifest)
    print(f"run {config.run_id}: {len(trajectories)} agents, {config.n_samples} samples each -> {out}")
    return EXIT_OK


# ---------------------------------------------------------------- analyze


def _parse_thresholds(text: str):
    if text == "auto":
        return "auto"
    try:
        low, high = (float(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"--thresholds must be 'auto' or 'LOW,HIGH', got {text!r}") from None
    if low > high:
        raise UsageError("--thresholds: LOW must not exceed HIGH")
    return low, high


def cmd_analyze(args) -> int:
    thresholds = _parse_thresholds(args.thresholds)
    trajectories, _ = _load_many(args.files)
    if len(trajectories) < 2:
        raise DataError("analysis needs at least 2 trajectories")
    try:
        profile = pairwise_profile(trajectories, window=args.window, normalize=args.normalize,
                                   comparison=args.comparison, keep_matrix=args.matrix,
                                   workers=args.workers)
        labels = phase_labels(profile.means, thresholds)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_rows(out / "profile.csv", ["agent_id", "group", "sih", "mean_dtw", "phase"],
                [[aid, g, _fmt(s), _fmt(m), lab.value]
                 for (aid, g, s, m), lab in zip(profile.rows(), labels)])
    summary = phase_summary(profile.groups, labels)
    phases = ["Nomadic", "Flocking", "Stampede"]
    _write_rows(out / "phase_summary.csv", ["group", *phases],
                [[g, *[counts[p] for p in phases]] for g, counts in summary.items()])
    if args.matrix:
        ids = profile.agent_ids.tolist()
        _write_rows(out / "matrix.csv", ["agent_id", *ids],
                    [[aid, *map(_fmt, row)] for aid, row in zip(ids, profile.matrix)])
    for g, counts in summary.items():
        print(f"{g}: " + ", ".join(f"{p}={counts[p]}" for p in phases))
    return EXIT_OK


# ---------------------------------------------------------------- map


def cmd_map(args) -> int:
    params = FrParams(iterations=args.iterations, area=args.area, c=args.c,
                      initial_temperature=args.temperature, cooling=args.cooling,
                      layout_seed=args.layout_seed)
    trajectories, metas = _load_many(args.files)
    sample_times = {m["dt"] * m["record_every"] for m in metas}
    if len(sample_times) > 1:
        raise DataError("trajectory files disagree on sample time (dt * record_every)")
    sample_time = sample_times.pop()
    by_group: dict[str, list] = {}
    for t in trajectories:
        by_group.setdefault(t.group, []).append(t)
    if args.base_group not in by_group:
        raise DataError(f"base group {args.base_group!r} not found; inputs contain {sorted(by_group)}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    graphs = {}
    for g, trajs in by_group.items():
        graph = build_graph(trajs, sample_time)
        graph.layout = fr_layout(graph, params)
        graphs[g] = graph
        write_graphml(out / f"graph_{g}.graphml", graph)
        write_json(out / f"graph_{g}.json", graph.to_dict())
    others = [(g, graphs[g]) for g in by_group if g != args.base_group]
    overlay = overlay_map(graphs[args.base_group], others, base_group=args.base_group)
    write_graphml(out / "overlay.graphml", overlay.base, overlay)
    payload = overlay.to_dict()
    write_json(out / "overlay.json", payload)
    _write_text(out / "overlay.svg", overlay_svg(payload))
    print(f"{len(graphs)} graph(s); overlay on {args.base_group!r} with channels {overlay.groups}")
    return EXIT_OK


# ---------------------------------------------------------------- render


def cmd_render(args) -> int:
    for p in args.artifacts:
        if not Path(p).is_file():
            raise DataError(f"artifact not found: {p}")
    if args.style == "heatmap":
        trajectories, metas = _load_many(args.artifacts)
        space = space_from_meta(metas[0])
        positions: dict[str, list] = {}
        for t in trajectories:
            hit = np.nonzero(t.steps == args.step)[0]
            if len(hit) == 0:
                raise DataError(f"step {args.step} was not recorded for agent {t.agent_id}")
            positions.setdefault(t.group, []).append(t.positions[hit[0]])
        svg = heatmap_svg(space, {g: np.array(p) for g, p in positions.items()},
                          title=f"step {args.step}")
    else:
        if len(args.artifacts) != 1:
            raise UsageError(f"style {args.style!r} renders exactly one artifact")
        try:
            payload = json.loads(Path(args.artifacts[0]).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise DataError(f"{args.artifacts[0]}: not JSON ({exc})") from None
        is_overlay = "groups" in payload
        if args.style == "overlay":
            if not is_overlay:
                raise DataError(f"{args.artifacts[0]} is not an overlay artifact")
            svg = overlay_svg(payload)
        else:
            if is_overlay:
                raise DataError(f"{args.artifacts[0]} is an overlay; use --style overlay")
            try:
                svg = graph_svg(payload, color=args.color or "#ffffff")
            except ValueError as exc:
                raise DataError(str(exc)) from None
    _write_text(Path(args.out), svg)
    return EXIT_OK


# ---------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="beliefmap", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"beliefmap {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="run a simulation from a TOML config")
    p.add_argument("config")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="DTW profiles and phase labels")
    p.add_argument("files", nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--window", type=int, default=None, help="Sakoe-Chiba band half-width")
    p.add_argument("--thresholds", default="auto", help="'auto' or LOW,HIGH on mean DTW")
    p.add_argument("--comparison", choices=("group", "population"), default="group")
    p.add_argument("--normalize", action="store_true", help="divide DTW by len(a) + len(b)")
    p.add_argument("--matrix", action="store_true", help="also write the full pairwise matrix")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("map", help="term graphs, layouts and the overlay belief map")
    p.add_argument("files", nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--base-group", default="nomad")
    defaults = FrParams()
    p.add_argument("--iterations", type=int, default=defaults.iterations)
    p.add_argument("--area", type=float, default=defaults.area)
    p.add_argument("--c", type=float, default=defaults.c)
    p.add_argument("--temperature", type=float, default=defaults.initial_temperature)
    p.add_argument("--cooling", type=float, default=defaults.cooling)
    p.add_argument("--layout-seed", type=int, default=defaults.layout_seed)
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("render", help="SVG heatmap, graph or overlay")
    p.add_argument("artifacts", nargs="+")
    p.add_argument("--style", choices=("heatmap", "graph", "overlay"), required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--step", type=int, default=0)
    p.add_argument("--color", default=None)
    p.set_defaults(func=cmd_render)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "workers", 1) < 1:
        parser.error("--workers must be >= 1")
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        # parameter validation from the library (e.g. FR settings)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
