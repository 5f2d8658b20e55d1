"""Per-step agent update: distance-weighted alignment and cohesion inside a
social influence horizon, rate-limited turning, and specular boundary
reflection in any number of dimensions.

The numerical work lives in small ``numba`` kernels. The public per-agent
functions and the engine's population step call the same kernels, so the two
paths agree bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from numba import njit

from .space import BeliefSpace

INFINITE = math.inf

# below this the perpendicular component of a rotation is treated as zero
_PARALLEL_TOL = 1e-12


@dataclass(frozen=True)
class AgentState:
    id: int
    position: np.ndarray
    heading: np.ndarray
    speed: float
    sih: float
    group: str = ""

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        object.__setattr__(self, "heading", np.asarray(self.heading, dtype=float))
        object.__setattr__(self, "speed", float(self.speed))
        object.__setattr__(self, "sih", float(self.sih))


@dataclass(frozen=True)
class DynamicsParams:
    max_speed: float = 1.0
    max_turn: float = 0.2
    align_weight: float = 1.0
    cohere_weight: float = 1.0
    separate_weight: float = 0.0
    speed_relax: float = 0.1
    epsilon: float = 1e-6
    dt: float = 0.1
    max_wander: float = 0.1

    def __post_init__(self):
        for name in ("max_speed", "max_turn", "align_weight", "cohere_weight", "separate_weight",
                     "speed_relax", "epsilon", "dt", "max_wander"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ValueError(f"{name}: must be a finite number, got {value!r}")
            object.__setattr__(self, name, float(value))
        if self.max_speed <= 0:
            raise ValueError("max_speed: must be > 0")
        if not 0 < self.max_turn <= math.pi:
            raise ValueError("max_turn: must be in (0, pi]")
        for name in ("align_weight", "cohere_weight", "separate_weight", "max_wander"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name}: must be >= 0")
        if not 0 <= self.speed_relax <= 1:
            raise ValueError("speed_relax: must be in [0, 1]")
        if self.epsilon <= 0:
            raise ValueError("epsilon: must be > 0")
        if self.dt <= 0:
            raise ValueError("dt: must be > 0")


# ---------------------------------------------------------------- kernels


@njit(cache=True, nogil=True)
def _distance(a, b):
    acc = 0.0
    for k in range(a.shape[0]):
        diff = b[k] - a[k]
        acc += diff * diff
    return math.sqrt(acc)


@njit(cache=True, nogil=True)
def _normalize_into(v, out):
    acc = 0.0
    for k in range(v.shape[0]):
        acc += v[k] * v[k]
    norm = math.sqrt(acc)
    for k in range(v.shape[0]):
        out[k] = v[k] / norm
    return norm


@njit(cache=True, nogil=True)
def _influence_kernel(pos_i, head_i, speed_i, nb_pos, nb_head, nb_speed, nb_dist, count,
                      align_w, cohere_w, separate_w, speed_relax, eps, max_speed, out_heading):
    """Write the desired heading into out_heading and return the desired speed."""
    dims = pos_i.shape[0]
    for k in range(dims):
        out_heading[k] = head_i[k]
    if count == 0:
        return speed_i
    direction = np.zeros(dims)
    w_sum = 0.0
    ws_sum = 0.0
    for j in range(count):
        d = nb_dist[j]
        w = 1.0 / (d + eps)
        w_sum += w
        ws_sum += w * nb_speed[j]
        # separation term is undefined for coincident agents; they contribute nothing
        sep = 0.0
        if d > 0.0:
            sep = separate_w * w / (d * d)
        for k in range(dims):
            offset = nb_pos[j, k] - pos_i[k]
            direction[k] += align_w * w * nb_head[j, k] + cohere_w * w * offset - sep * offset
    acc = 0.0
    for k in range(dims):
        acc += direction[k] * direction[k]
    if acc > 0.0 and math.isfinite(acc):
        _normalize_into(direction, out_heading)
    desired = (1.0 - speed_relax) * speed_i + speed_relax * (ws_sum / w_sum)
    return min(max(desired, 0.0), max_speed)


@njit(cache=True, nogil=True)
def _perpendicular(h, v, out):
    """Unit component of v orthogonal to unit h; returns its pre-normalization length."""
    dot = 0.0
    for k in range(h.shape[0]):
        dot += h[k] * v[k]
    for k in range(h.shape[0]):
        out[k] = v[k] - dot * h[k]
    acc = 0.0
    for k in range(h.shape[0]):
        acc += out[k] * out[k]
    norm = math.sqrt(acc)
    if norm > _PARALLEL_TOL:
        for k in range(h.shape[0]):
            out[k] /= norm
    return norm


@njit(cache=True, nogil=True)
def _rotate_toward(h, d, max_turn, out):
    """Turn unit heading h toward unit d by at most max_turn radians."""
    dims = h.shape[0]
    perp = np.empty(dims)
    sin_part = _perpendicular(h, d, perp)
    cos_part = 0.0
    for k in range(dims):
        cos_part += h[k] * d[k]
    angle = math.atan2(sin_part, cos_part)
    if sin_part <= _PARALLEL_TOL:
        if cos_part >= 0.0:
            for k in range(dims):
                out[k] = d[k]
            return
        # antiparallel: turn in the plane of h and the first axis not aligned with it
        found = False
        for axis in range(dims):
            e = np.zeros(dims)
            e[axis] = 1.0
            if _perpendicular(h, e, perp) > 0.5:
                found = True
                break
        if not found:
            # 1-D: no turning plane exists, only a full reversal
            for k in range(dims):
                out[k] = d[k] if max_turn >= math.pi else h[k]
            return
        angle = math.pi
    if angle <= max_turn:
        for k in range(dims):
            out[k] = d[k]
        return
    c = math.cos(max_turn)
    s = math.sin(max_turn)
    for k in range(dims):
        out[k] = c * h[k] + s * perp[k]
    _normalize_into(out, out)


@njit(cache=True, nogil=True)
def _wander(heading, normal_draw, uniform_draw, max_wander, out):
    """Rotate heading by uniform_draw*max_wander toward a random perpendicular direction."""
    dims = heading.shape[0]
    perp = np.empty(dims)
    if dims < 2 or _perpendicular(heading, normal_draw, perp) <= _PARALLEL_TOL:
        for k in range(dims):
            out[k] = heading[k]
        return
    angle = uniform_draw * max_wander
    c = math.cos(angle)
    s = math.sin(angle)
    for k in range(dims):
        out[k] = c * heading[k] + s * perp[k]
    _normalize_into(out, out)


@njit(cache=True, nogil=True)
def _advance(pos, heading, speed, dt, half_extent, out_pos, out_heading):
    """Move along heading, mirror off faces; returns number of reflections."""
    dims = pos.shape[0]
    bounces = 0
    for k in range(dims):
        out_heading[k] = heading[k]
    for k in range(dims):
        x = pos[k] + heading[k] * speed * dt
        while x > half_extent or x < -half_extent:
            if x > half_extent:
                x = 2.0 * half_extent - x
            else:
                x = -2.0 * half_extent - x
            out_heading[k] = -out_heading[k]
            bounces += 1
        out_pos[k] = x
    _normalize_into(out_heading, out_heading)
    return bounces


@njit(cache=True, nogil=True)
def _gather_neighbors(i, pos, sih_i, group_ids, nb_index, nb_dist):
    """Fill neighbor buffers in ascending agent order; returns the count.

    Agents only perceive others with the same group id; pass a constant array
    to let the whole population interact.
    """
    count = 0
    if sih_i <= 0.0:
        return 0
    for j in range(pos.shape[0]):
        if j == i or group_ids[j] != group_ids[i]:
            continue
        d = _distance(pos[i], pos[j])
        if d <= sih_i:
            nb_index[count] = j
            nb_dist[count] = d
            count += 1
    return count


@njit(cache=True, nogil=True)
def step_range(lo, hi, pos, head, speed, sih, group_ids, noise_dir, noise_ang,
               max_speed, max_turn, align_w, cohere_w, separate_w, speed_relax, eps, dt,
               max_wander, half_extent, new_pos, new_head, new_speed, n_neighbors):
    """Advance agents lo..hi-1 one step, reading generation t and writing t+1."""
    n, dims = pos.shape
    nb_index = np.empty(n, dtype=np.int64)
    nb_dist = np.empty(n)
    nb_pos = np.empty((n, dims))
    nb_head = np.empty((n, dims))
    nb_speed = np.empty(n)
    desired = np.empty(dims)
    wandered = np.empty(dims)
    turned = np.empty(dims)
    for i in range(lo, hi):
        count = _gather_neighbors(i, pos, sih[i], group_ids, nb_index, nb_dist)
        for m in range(count):
            j = nb_index[m]
            nb_speed[m] = speed[j]
            for k in range(dims):
                nb_pos[m, k] = pos[j, k]
                nb_head[m, k] = head[j, k]
        s = _influence_kernel(pos[i], head[i], speed[i], nb_pos, nb_head, nb_speed, nb_dist, count,
                              align_w, cohere_w, separate_w, speed_relax, eps, max_speed, desired)
        if count == 0:
            _wander(desired, noise_dir[i], noise_ang[i], max_wander, wandered)
        else:
            for k in range(dims):
                wandered[k] = desired[k]
        _rotate_toward(head[i], wandered, max_turn, turned)
        _advance(pos[i], turned, s, dt, half_extent, new_pos[i], new_head[i])
        new_speed[i] = s
        n_neighbors[i] = count


# ---------------------------------------------------------------- public API


def neighbors_within(agent: AgentState, population, space: BeliefSpace | None = None):
    """Agents other than `agent` inside its closed influence ball, in population order.

    A zero horizon never interacts, even with a coincident agent.
    """
    if agent.sih <= 0:
        return []
    out = []
    for other in population:
        if other.id == agent.id:
            continue
        d = _distance(agent.position, other.position)
        if d <= agent.sih:
            out.append((other, d))
    return out


def influence(agent: AgentState, neighbors, params: DynamicsParams) -> tuple[np.ndarray, float]:
    """Desired (unit heading, speed) from weighted neighbor headings, offsets and speeds.

    Each neighbor at distance d carries weight 1/(d + epsilon). The desired
    direction is the normalized sum of alignment, cohesion and (negated)
    separation terms. The desired speed relaxes toward the weighted mean
    neighbor speed.
    """
    dims = agent.position.shape[0]
    count = len(neighbors)
    nb_pos = np.empty((count, dims))
    nb_head = np.empty((count, dims))
    nb_speed = np.empty(count)
    nb_dist = np.empty(count)
    for m, (other, d) in enumerate(neighbors):
        nb_pos[m] = other.position
        nb_head[m] = other.heading
        nb_speed[m] = other.speed
        nb_dist[m] = d
    out = np.empty(dims)
    speed = _influence_kernel(agent.position, agent.heading, agent.speed, nb_pos, nb_head, nb_speed,
                              nb_dist, count, params.align_weight, params.cohere_weight,
                              params.separate_weight, params.speed_relax, params.epsilon,
                              params.max_speed, out)
    return out, float(speed)


def wander(heading: np.ndarray, normal_draw: np.ndarray, uniform_draw: float, max_wander: float) -> np.ndarray:
    out = np.empty_like(np.asarray(heading, dtype=float))
    _wander(np.asarray(heading, dtype=float), np.asarray(normal_draw, dtype=float),
            float(uniform_draw), float(max_wander), out)
    return out


def rotate_toward(heading: np.ndarray, desired: np.ndarray, max_turn: float) -> np.ndarray:
    out = np.empty_like(np.asarray(heading, dtype=float))
    _rotate_toward(np.asarray(heading, dtype=float), np.asarray(desired, dtype=float), float(max_turn), out)
    return out


def step_agent(agent: AgentState, desired_heading, desired_speed: float,
               params: DynamicsParams, space: BeliefSpace) -> AgentState:
    """Turn toward the desired heading (slew limited), move, and reflect off faces."""
    turned = rotate_toward(agent.heading, desired_heading, params.max_turn)
    new_pos = np.empty_like(agent.position)
    new_head = np.empty_like(agent.position)
    _advance(agent.position, turned, float(desired_speed), params.dt, space.half_extent, new_pos, new_head)
    return replace(agent, position=new_pos, heading=new_head, speed=float(desired_speed))


def angle_between(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    cross = np.linalg.norm(b - np.dot(a, b) * a)
    return math.atan2(cross, float(np.dot(a, b)))
