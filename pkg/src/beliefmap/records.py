"""Config files and trajectory files.

Configs are TOML whose keys mirror :class:`SimConfig` exactly (``dynamics``
is a table, ``groups`` an array of tables). Trajectory files are CSV, one
sample per line, floats written with ``repr`` so they round-trip bit for
bit. Two ``#`` lines precede the column header: a format tag and a JSON
metadata record carrying the config digest and the space geometry.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from pathlib import Path

import numpy as np

from .dynamics import DynamicsParams
from .engine import GroupSpec, SimConfig, Trajectory
from .space import BeliefSpace

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

FORMAT_TAG = "# beliefmap-trajectories v1"


class ConfigError(ValueError):
    """Invalid configuration; ``key`` names the offending field."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


class DataError(ValueError):
    """Malformed or inconsistent trajectory data."""


_TOP_KEYS = {f.name for f in dataclasses.fields(SimConfig)}
_DYN_KEYS = {f.name for f in dataclasses.fields(DynamicsParams)}
_GROUP_KEYS = {f.name for f in dataclasses.fields(GroupSpec)}


def config_from_dict(raw: dict) -> SimConfig:
    for key in raw:
        if key not in _TOP_KEYS:
            raise ConfigError(key, "unknown key")
    kwargs = {k: v for k, v in raw.items() if k not in ("dynamics", "groups")}
    dyn = raw.get("dynamics", {})
    if not isinstance(dyn, dict):
        raise ConfigError("dynamics", "must be a table")
    for key in dyn:
        if key not in _DYN_KEYS:
            raise ConfigError(f"dynamics.{key}", "unknown key")
    try:
        kwargs["dynamics"] = DynamicsParams(**dyn)
    except ValueError as exc:
        raise ConfigError(f"dynamics.{_key_of(exc)}", _msg_of(exc)) from None
    if "groups" in raw:
        groups = raw["groups"]
        if not isinstance(groups, list):
            raise ConfigError("groups", "must be an array of tables")
        specs = []
        for g in groups:
            if not isinstance(g, dict):
                raise ConfigError("groups", "must be an array of tables")
            for key in g:
                if key not in _GROUP_KEYS:
                    raise ConfigError(f"groups.{key}", "unknown key")
            missing = _GROUP_KEYS - set(g)
            if missing:
                raise ConfigError(f"groups.{sorted(missing)[0]}", "missing")
            try:
                specs.append(GroupSpec(**g))
            except ValueError as exc:
                raise ConfigError(_key_of(exc), _msg_of(exc)) from None
        kwargs["groups"] = tuple(specs)
    try:
        return SimConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(_key_of(exc), _msg_of(exc)) from None


def _key_of(exc: ValueError) -> str:
    return str(exc).split(":", 1)[0]


def _msg_of(exc: ValueError) -> str:
    parts = str(exc).split(":", 1)
    return parts[1].strip() if len(parts) > 1 else parts[0]


def load_config(path) -> SimConfig:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("<file>", f"not valid TOML ({exc})") from None
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path} ({exc.strerror})") from None
    return config_from_dict(raw)


def dump_config(config: SimConfig) -> str:
    """TOML text that :func:`load_config` reads back to an equal config."""
    d = config.to_dict()
    lines = []
    for key, value in d.items():
        if key not in ("dynamics", "groups"):
            lines.append(f"{key} = {_toml_value(value)}")
    lines.append("")
    lines.append("[dynamics]")
    for key, value in d["dynamics"].items():
        lines.append(f"{key} = {_toml_value(value)}")
    for g in d["groups"]:
        lines.append("")
        lines.append("[[groups]]")
        for key, value in g.items():
            lines.append(f"{key} = {_toml_value(value)}")
    return "\n".join(lines) + "\n"


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, float):
        return "inf" if math.isinf(v) else repr(v)
    return str(v)


# ---------------------------------------------------------------- trajectories


def trajectory_meta(config: SimConfig, group: str) -> dict:
    return {
        "run_id": config.run_id,
        "config_digest": config.digest(),
        "group": group,
        "dims": config.dims,
        "half_extent": config.half_extent,
        "cells_per_axis": config.cells_per_axis,
        "label_seed": config.label_seed,
        "dt": config.dynamics.dt,
        "record_every": config.record_every,
    }


def _fmt_float(x: float) -> str:
    return "inf" if math.isinf(x) else repr(float(x))


def format_trajectories(trajectories, meta: dict) -> str:
    buf = io.StringIO()
    buf.write(FORMAT_TAG + "\n")
    buf.write("# meta " + json.dumps(meta, sort_keys=True, separators=(",", ":")) + "\n")
    dims = meta["dims"]
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["run_id", "agent_id", "group", "sih", "step", *[f"x{k}" for k in range(dims)], "label"])
    run_id = meta["run_id"]
    for t in trajectories:
        sih = _fmt_float(t.sih)
        for step, pos, label in t.samples:
            writer.writerow([run_id, t.agent_id, t.group, sih, step, *map(_fmt_float, pos.tolist()), label])
    return buf.getvalue()


def write_trajectories(path, trajectories, meta: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_trajectories(trajectories, meta))


def read_trajectories(path) -> tuple[list[Trajectory], dict]:
    """Parse a trajectory file; returns (trajectories in file order, metadata)."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"{path}: cannot read ({exc.strerror})") from None
    lines = text.split("\n")
    if len(lines) < 3 or lines[0] != FORMAT_TAG or not lines[1].startswith("# meta "):
        raise DataError(f"{path}: not a trajectory file")
    meta = json.loads(lines[1][len("# meta "):])
    dims = int(meta["dims"])
    reader = csv.reader(io.StringIO("\n".join(lines[2:])))
    header = next(reader)
    expected = ["run_id", "agent_id", "group", "sih", "step", *[f"x{k}" for k in range(dims)], "label"]
    if header != expected:
        raise DataError(f"{path}: unexpected columns {header}")
    rows: dict[int, dict] = {}
    for lineno, row in enumerate(reader, start=4):
        if not row:
            continue
        if len(row) != len(expected):
            raise DataError(f"{path}:{lineno}: expected {len(expected)} fields, got {len(row)}")
        try:
            aid = int(row[1])
            rec = rows.setdefault(aid, {"group": row[2], "sih": float(row[3]), "steps": [], "pos": [], "labels": []})
            rec["steps"].append(int(row[4]))
            rec["pos"].append([float(v) for v in row[5:5 + dims]])
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from None
        rec["labels"].append(row[5 + dims])
    out = []
    for aid, rec in rows.items():
        steps = np.array(rec["steps"], dtype=np.int64)
        if len(steps) > 1 and np.any(np.diff(steps) <= 0):
            raise DataError(f"{path}: steps of agent {aid} are not strictly increasing")
        out.append(Trajectory(aid, rec["group"], rec["sih"], steps,
                              np.array(rec["pos"], dtype=float).reshape(-1, dims), rec["labels"]))
    return out, meta


def space_from_meta(meta: dict) -> BeliefSpace:
    return BeliefSpace(int(meta["dims"]), float(meta["half_extent"]),
                       int(meta["cells_per_axis"]), int(meta["label_seed"]))
