"""Trajectory similarity and phase classification.

DTW here is the plain symmetric recurrence with Euclidean ground cost and
unit step weights, returning the total accumulated cost. An optional
Sakoe-Chiba band restricts cells to ``|i - j| <= window``.
"""

from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numba import njit

from .engine import Trajectory


class PhaseLabel(str, Enum):
    NOMADIC = "Nomadic"
    FLOCKING = "Flocking"
    STAMPEDE = "Stampede"


@njit(cache=True, nogil=True)
def _dtw_kernel(a, b, window):
    n = a.shape[0]
    m = b.shape[0]
    dims = a.shape[1]
    prev = np.full(m + 1, np.inf)
    cur = np.full(m + 1, np.inf)
    prev[0] = 0.0
    for i in range(1, n + 1):
        for j in range(m + 1):
            cur[j] = np.inf
        lo = 1
        hi = m
        if window >= 0:
            lo = max(1, i - window)
            hi = min(m, i + window)
        for j in range(lo, hi + 1):
            acc = 0.0
            for k in range(dims):
                diff = a[i - 1, k] - b[j - 1, k]
                acc += diff * diff
            best = prev[j - 1]
            if prev[j] < best:
                best = prev[j]
            if cur[j - 1] < best:
                best = cur[j - 1]
            cur[j] = math.sqrt(acc) + best
        prev, cur = cur, prev
    return prev[m]


@njit(cache=True, nogil=True)
def _dtw_codes_kernel(a, b, window):
    # 0/1 mismatch cost on integer codes
    n = a.shape[0]
    m = b.shape[0]
    prev = np.full(m + 1, np.inf)
    cur = np.full(m + 1, np.inf)
    prev[0] = 0.0
    for i in range(1, n + 1):
        for j in range(m + 1):
            cur[j] = np.inf
        lo = 1
        hi = m
        if window >= 0:
            lo = max(1, i - window)
            hi = min(m, i + window)
        for j in range(lo, hi + 1):
            best = min(prev[j - 1], prev[j], cur[j - 1])
            cur[j] = (0.0 if a[i - 1] == b[j - 1] else 1.0) + best
        prev, cur = cur, prev
    return prev[m]


@njit(cache=True, nogil=True)
def _pairs_kernel(data, lengths, pairs, lo, hi, window, out):
    for p in range(lo, hi):
        i = pairs[p, 0]
        j = pairs[p, 1]
        out[p] = _dtw_kernel(data[i, : lengths[i]], data[j, : lengths[j]], window)


@njit(cache=True, nogil=True)
def _pairs_codes_kernel(data, lengths, pairs, lo, hi, window, out):
    for p in range(lo, hi):
        i = pairs[p, 0]
        j = pairs[p, 1]
        out[p] = _dtw_codes_kernel(data[i, : lengths[i]], data[j, : lengths[j]], window)


def _check_window(n: int, m: int, window):
    if window is None:
        return -1
    if isinstance(window, bool) or int(window) != window or window < 1:
        raise ValueError(f"window must be a positive integer, got {window!r}")
    if window < abs(n - m):
        raise ValueError(
            f"window {window} is narrower than the length difference {abs(n - m)}; "
            "the band cannot reach the end of both sequences"
        )
    return int(window)


def dtw_distance(seq_a, seq_b, window: int | None = None, normalize: bool = False) -> float:
    """Minimum total Euclidean cost over monotone alignments of two sequences.

    Sequences are arrays of shape (length,) or (length, dims). With
    ``normalize`` the total is divided by ``len(a) + len(b)``.
    """
    a = np.asarray(seq_a, dtype=float)
    b = np.asarray(seq_b, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if b.ndim == 1:
        b = b[:, None]
    if len(a) == 0 or len(b) == 0:
        raise ValueError("DTW needs non-empty sequences")
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    w = _check_window(len(a), len(b), window)
    total = float(_dtw_kernel(np.ascontiguousarray(a), np.ascontiguousarray(b), w))
    return total / (len(a) + len(b)) if normalize else total


@dataclass
class DtwProfile:
    agent_ids: np.ndarray
    groups: list[str]
    sihs: np.ndarray
    means: np.ndarray
    matrix: np.ndarray | None = None

    def __len__(self):
        return len(self.agent_ids)

    def rows(self):
        for aid, g, s, m in zip(self.agent_ids.tolist(), self.groups, self.sihs.tolist(), self.means.tolist()):
            yield aid, g, s, m

    def by_group(self) -> dict[str, np.ndarray]:
        out: dict[str, list[float]] = {}
        for _, g, _, m in self.rows():
            out.setdefault(g, []).append(m)
        return {g: np.array(v) for g, v in out.items()}


def _pair_list(groups: list[str], within_group: bool) -> np.ndarray:
    n = len(groups)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)
             if not within_group or groups[i] == groups[j]]
    return np.array(pairs, dtype=np.int64).reshape(-1, 2)


def _dtw_pairs(trajectories: list[Trajectory], pairs: np.ndarray, position_based: bool,
               window: int | None, workers: int) -> np.ndarray:
    n = len(trajectories)
    lengths = np.array([len(t) for t in trajectories], dtype=np.int64)
    max_len = int(lengths.max())
    win = -1
    if window is not None:
        # one band width has to serve every pair
        win = _check_window(int(lengths.min()), max_len, window)
    if position_based:
        dims = {t.positions.shape[1] for t in trajectories}
        if len(dims) != 1:
            raise ValueError(f"trajectories have mixed dimensionality {sorted(dims)}")
        data = np.zeros((n, max_len, dims.pop()))
        for i, t in enumerate(trajectories):
            data[i, : len(t)] = t.positions
        kernel = _pairs_kernel
    else:
        codes: dict[str, int] = {}
        data = np.full((n, max_len), -1, dtype=np.int64)
        for i, t in enumerate(trajectories):
            data[i, : len(t)] = [codes.setdefault(lab, len(codes)) for lab in t.labels]
        kernel = _pairs_codes_kernel
    out = np.zeros(len(pairs))
    bounds = np.linspace(0, len(pairs), max(1, workers) + 1).round().astype(int)
    spans = [(int(lo), int(hi)) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
    if len(spans) == 1:
        kernel(data, lengths, pairs, 0, len(pairs), win, out)
    elif spans:
        with ThreadPoolExecutor(max_workers=len(spans)) as pool:
            for fut in [pool.submit(kernel, data, lengths, pairs, lo, hi, win, out) for lo, hi in spans]:
                fut.result()
    return out


def pairwise_matrix(trajectories: list[Trajectory], position_based: bool = True,
                    window: int | None = None, workers: int = 1) -> np.ndarray:
    """Symmetric all-pairs DTW matrix with a zero diagonal."""
    trajectories = list(trajectories)
    n = len(trajectories)
    pairs = _pair_list([t.group for t in trajectories], within_group=False)
    out = _dtw_pairs(trajectories, pairs, position_based, window, workers)
    matrix = np.zeros((n, n))
    matrix[pairs[:, 0], pairs[:, 1]] = out
    matrix[pairs[:, 1], pairs[:, 0]] = out
    return matrix


def pairwise_profile(trajectories: list[Trajectory], position_based: bool = True,
                     window: int | None = None, normalize: bool = False,
                     comparison: str = "group", keep_matrix: bool = False,
                     workers: int = 1) -> DtwProfile:
    """Per-agent mean DTW distance to every other agent in its comparison set.

    ``comparison="group"`` compares each agent with the other members of its
    own group (one SIH population); ``"population"`` compares it with every
    other agent. ``position_based=False`` compares cell-label sequences with
    a 0/1 mismatch cost instead of positions. With ``keep_matrix`` the full
    all-pairs matrix is computed and attached.
    """
    trajectories = list(trajectories)
    if len(trajectories) < 2:
        raise ValueError("pairwise profile needs at least 2 trajectories")
    if comparison not in ("group", "population"):
        raise ValueError(f"unknown comparison set {comparison!r}")
    strides = {int(t.steps[1] - t.steps[0]) for t in trajectories if len(t) > 1}
    if len(strides) > 1:
        raise ValueError(f"trajectories have different sampling strides {sorted(strides)}")
    groups = [t.group for t in trajectories]
    within = comparison == "group"
    if within:
        sizes = Counter(groups)
        lonely = sorted(g for g, c in sizes.items() if c < 2)
        if lonely:
            raise ValueError(f"group(s) {lonely} have a single agent; nothing to compare within the group")

    n = len(trajectories)
    pairs = _pair_list(groups, within_group=within and not keep_matrix)
    out = _dtw_pairs(trajectories, pairs, position_based, window, workers)
    matrix = np.zeros((n, n))
    matrix[pairs[:, 0], pairs[:, 1]] = out
    matrix[pairs[:, 1], pairs[:, 0]] = out
    if normalize:
        lengths = np.array([len(t) for t in trajectories], dtype=float)
        matrix = matrix / (lengths[:, None] + lengths[None, :])

    garr = np.array(groups, dtype=object)
    means = np.empty(n)
    for i in range(n):
        row = matrix[i][garr == groups[i]] if within else matrix[i]
        means[i] = row.sum() / (len(row) - 1)
    return DtwProfile(
        agent_ids=np.array([t.agent_id for t in trajectories], dtype=np.int64),
        groups=groups,
        sihs=np.array([t.sih for t in trajectories], dtype=float),
        means=means,
        matrix=matrix if keep_matrix else None,
    )


def polarization(headings) -> float:
    """Norm of the mean heading: 1 for perfect alignment, near 0 when dispersed."""
    h = np.asarray(headings, dtype=float)
    if h.ndim == 1:
        h = h[None, :]
    if len(h) == 0:
        raise ValueError("polarization needs at least one agent")
    return float(np.linalg.norm(h.mean(axis=0)))


def three_means_1d(values, max_iter: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Lloyd's 3-means in one dimension, seeded at min / median / max.

    Returns (assignment, centroids) with cluster 0 the lowest. Ties go to
    the lowest cluster.
    """
    x = np.asarray(values, dtype=float)
    if len(x) < 3:
        raise ValueError("3-means needs at least 3 values")
    centroids = np.array([x.min(), np.median(x), x.max()])
    for _ in range(max_iter):
        # argmin returns the first minimum, i.e. the lowest cluster on ties
        assign = np.argmin(np.abs(x[:, None] - centroids[None, :]), axis=1)
        updated = centroids.copy()
        for k in range(3):
            members = x[assign == k]
            if len(members):
                updated[k] = members.mean()
        # an emptied cluster keeps a stale centroid; sorting keeps index order = value order
        updated = np.sort(updated)
        if np.array_equal(updated, centroids):
            break
        centroids = updated
    assign = np.argmin(np.abs(x[:, None] - centroids[None, :]), axis=1)
    return assign, centroids


def phase_labels(means, thresholds="auto") -> list[PhaseLabel]:
    """One phase per mean DTW value, in input order.

    ``thresholds`` is either ``"auto"`` or a ``(low, high)`` pair: means
    below ``low`` are Stampede, above ``high`` Nomadic, the rest Flocking.
    Auto mode clusters the means into three groups, highest = Nomadic.
    """
    means = np.asarray(means, dtype=float)
    if isinstance(thresholds, str):
        if thresholds != "auto":
            raise ValueError(f"unknown threshold mode {thresholds!r}")
        assign, _ = three_means_1d(means)
        names = (PhaseLabel.STAMPEDE, PhaseLabel.FLOCKING, PhaseLabel.NOMADIC)
        return [names[k] for k in assign.tolist()]
    low, high = (float(v) for v in thresholds)
    if low > high:
        raise ValueError(f"thresholds must satisfy low <= high, got ({low}, {high})")
    out = []
    for m in means.tolist():
        if m < low:
            out.append(PhaseLabel.STAMPEDE)
        elif m > high:
            out.append(PhaseLabel.NOMADIC)
        else:
            out.append(PhaseLabel.FLOCKING)
    return out


def classify_phases(profile: DtwProfile, thresholds="auto") -> dict[int, PhaseLabel]:
    """Map agent_id -> phase from the profile's per-agent mean DTW."""
    return dict(zip(profile.agent_ids.tolist(), phase_labels(profile.means, thresholds)))


def phase_summary(groups, labels) -> dict[str, dict[str, int]]:
    """Per-group count of agents in each phase; groups and labels are parallel sequences."""
    summary: dict[str, dict[str, int]] = {}
    for g, lab in zip(groups, labels):
        counts = summary.setdefault(g, {p.value: 0 for p in PhaseLabel})
        counts[PhaseLabel(lab).value] += 1
    return summary
