import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beliefmap.analysis import (PhaseLabel, classify_phases, dtw_distance, pairwise_matrix,
                                pairwise_profile, phase_labels, phase_summary, polarization,
                                three_means_1d)
from beliefmap.engine import Trajectory

from oracles import brute_force_dtw, warping_paths


def traj(aid, positions, group="g", sih=0.0, stride=10):
    positions = np.asarray(positions, dtype=float)
    if positions.ndim == 1:
        positions = positions[:, None]
    steps = np.arange(len(positions), dtype=np.int64) * stride
    return Trajectory(aid, group, sih, steps, positions, ["x"] * len(positions))


def seqs(max_len=6, dims=None):
    d = st.integers(1, 3) if dims is None else st.just(dims)
    return d.flatmap(lambda k: st.tuples(
        st.lists(st.lists(st.floats(-10, 10), min_size=k, max_size=k), min_size=1, max_size=max_len),
        st.lists(st.lists(st.floats(-10, 10), min_size=k, max_size=k), min_size=1, max_size=max_len)))


# ---------------------------------------------------------------- DTW


def test_path_enumeration_counts():
    # Delannoy numbers
    assert len(list(warping_paths(3, 3))) == 13
    assert len(list(warping_paths(4, 4))) == 63
    assert len(list(warping_paths(1, 5))) == 1


@pytest.mark.parametrize("a, b, expected", [([0, 3], [0, 0, 3], 0.0), ([0, 2], [1], 2.0),
                                            ([1, 2, 3], [1, 2, 3], 0.0)])
def test_dtw_examples(a, b, expected):
    assert dtw_distance(a, b) == expected
    assert brute_force_dtw(a, b) == expected


@settings(max_examples=300, deadline=None)
@given(pair=seqs())
def test_dtw_equals_oracle(pair):
    a, b = pair
    assert dtw_distance(a, b) == pytest.approx(brute_force_dtw(a, b), abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(pair=seqs(), w=st.integers(0, 6))
def test_windowed_dtw(pair, w):
    a, b = pair
    w = max(w, abs(len(a) - len(b)), 1)
    banded = dtw_distance(a, b, window=w)
    assert banded == pytest.approx(brute_force_dtw(a, b, window=w), abs=1e-9)
    assert banded >= dtw_distance(a, b) - 1e-9
    assert dtw_distance(a, b, window=max(len(a), len(b))) == dtw_distance(a, b)


@settings(max_examples=200, deadline=None)
@given(pair=seqs(max_len=12), c=st.floats(1e-3, 1e3))
def test_dtw_symmetry_identity_scaling(pair, c):
    a, b = (np.array(x) for x in pair)
    d = dtw_distance(a, b)
    assert d >= 0
    assert dtw_distance(b, a) == pytest.approx(d, rel=1e-12, abs=1e-12)
    assert dtw_distance(a, a) == 0.0
    assert dtw_distance(c * a, c * b) == pytest.approx(c * d, rel=1e-9, abs=1e-9)


def test_dtw_normalize_and_errors():
    assert dtw_distance([0, 2], [1], normalize=True) == pytest.approx(2 / 3)
    with pytest.raises(ValueError, match="band"):
        dtw_distance([0, 1, 2, 3, 4], [0, 1], window=2)
    with pytest.raises(ValueError):
        dtw_distance([], [1.0])
    with pytest.raises(ValueError):
        dtw_distance([[0.0, 1.0]], [[0.0]])


# ---------------------------------------------------------------- profiles


def test_identical_trajectories_profile_zero():
    p = pairwise_profile([traj(0, [0, 1, 2]), traj(1, [0, 1, 2])])
    assert p.means.tolist() == [0.0, 0.0]


def test_matrix_matches_pairwise_calls():
    ts = [traj(0, [[0, 0], [1, 0], [2, 1]]), traj(1, [[0, 1], [0, 2], [1, 2]]),
          traj(2, [[3, 3], [2, 2], [1, 1]])]
    m = pairwise_matrix(ts)
    for i in range(3):
        assert m[i, i] == 0
        for j in range(3):
            assert m[i, j] == pytest.approx(dtw_distance(ts[i].positions, ts[j].positions), abs=1e-12)
    p = pairwise_profile(ts, comparison="population", keep_matrix=True)
    assert np.array_equal(p.matrix, p.matrix.T)
    assert p.means == pytest.approx(m.sum(axis=1) / 2)


def test_group_comparison_ignores_other_groups():
    ts = [traj(0, [0, 1], "a"), traj(1, [0, 1], "a"), traj(2, [5, 9], "b"), traj(3, [6, 9], "b")]
    p = pairwise_profile(ts, comparison="group")
    assert p.means.tolist() == [0.0, 0.0, 1.0, 1.0]
    q = pairwise_profile(ts, comparison="group", keep_matrix=True)
    assert q.means.tolist() == p.means.tolist()


def test_label_based_profile():
    a = Trajectory(0, "g", 0.0, np.arange(3), np.zeros((3, 1)), ["A", "B", "B"])
    b = Trajectory(1, "g", 0.0, np.arange(3), np.zeros((3, 1)), ["A", "C", "C"])
    p = pairwise_profile([a, b], position_based=False)
    assert p.means.tolist() == [2.0, 2.0]


def test_profile_workers_agree():
    rng = np.random.default_rng(0)
    ts = [traj(i, rng.normal(size=(40, 2)), group="ab"[i % 2]) for i in range(12)]
    a = pairwise_profile(ts, workers=1, keep_matrix=True)
    b = pairwise_profile(ts, workers=5, keep_matrix=True)
    assert a.means.tobytes() == b.means.tobytes()
    assert a.matrix.tobytes() == b.matrix.tobytes()


def test_profile_errors():
    with pytest.raises(ValueError):
        pairwise_profile([traj(0, [0, 1])])
    with pytest.raises(ValueError, match="stride"):
        pairwise_profile([traj(0, [0, 1]), traj(1, [0, 1], stride=5)])
    with pytest.raises(ValueError, match="single agent"):
        pairwise_profile([traj(0, [0, 1], "a"), traj(1, [0, 1], "b")])
    with pytest.raises(ValueError):
        pairwise_profile([traj(0, [0, 1]), traj(1, [0, 1])], comparison="other")


# ---------------------------------------------------------------- polarization


def test_polarization_examples():
    assert polarization([[1.0, 0.0]] * 4) == pytest.approx(1.0)
    assert polarization([[1.0, 0.0], [-1.0, 0.0]]) == 0.0
    assert polarization([[1.0, 0.0], [0.0, 1.0]]) == pytest.approx(math.sqrt(2) / 2)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 20), dims=st.integers(2, 5))
def test_polarization_rotation_invariant(seed, n, dims):
    rng = np.random.default_rng(seed)
    h = rng.standard_normal((n, dims))
    h /= np.linalg.norm(h, axis=1, keepdims=True)
    q, _ = np.linalg.qr(rng.standard_normal((dims, dims)))
    p = polarization(h)
    assert 0.0 <= p <= 1.0 + 1e-12
    assert polarization(h @ q.T) == pytest.approx(p, abs=1e-12)


# ---------------------------------------------------------------- phases


def test_explicit_thresholds():
    labels = phase_labels([150.0, 50.0, 5.0], (10, 100))
    assert labels == [PhaseLabel.NOMADIC, PhaseLabel.FLOCKING, PhaseLabel.STAMPEDE]


def test_auto_ties_go_to_stampede():
    assert set(phase_labels([7.0] * 6)) == {PhaseLabel.STAMPEDE}


def test_auto_orders_clusters():
    means = [1.0, 1.2, 0.9, 50.0, 52.0, 500.0, 480.0, 510.0]
    labels = phase_labels(means)
    assert labels[:3] == [PhaseLabel.STAMPEDE] * 3
    assert labels[3:5] == [PhaseLabel.FLOCKING] * 2
    assert labels[5:] == [PhaseLabel.NOMADIC] * 3


def test_auto_needs_three_agents():
    with pytest.raises(ValueError):
        phase_labels([1.0, 2.0])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 1e4), min_size=3, max_size=60))
def test_three_means_is_total_and_ordered(values):
    assign, cent = three_means_1d(values)
    assert len(assign) == len(values)
    assert set(assign.tolist()) <= {0, 1, 2}
    # every point sits with its nearest centroid, ties to the lowest
    x = np.asarray(values)
    assert np.array_equal(assign, np.argmin(np.abs(x[:, None] - cent[None, :]), axis=1))
    used = sorted(set(assign.tolist()))
    assert all(cent[a] <= cent[b] for a, b in zip(used, used[1:]))


def test_classify_and_summary():
    ts = [traj(i, [0, i], "g") for i in range(4)]
    p = pairwise_profile(ts)
    labels = classify_phases(p, thresholds=(0.0, 1e9))
    assert set(labels) == {0, 1, 2, 3}
    assert set(labels.values()) == {PhaseLabel.FLOCKING}
    s = phase_summary(["a", "a", "b"], [PhaseLabel.NOMADIC, PhaseLabel.STAMPEDE, PhaseLabel.STAMPEDE])
    assert s == {"a": {"Nomadic": 1, "Flocking": 0, "Stampede": 1},
                 "b": {"Nomadic": 0, "Flocking": 0, "Stampede": 1}}
