"""Data layer: files, resampling, windows, normalization, DTW, splits."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from duet.data import (
    ACTIONS,
    AgentStream,
    InteractionTrial,
    WindowSpec,
    apply_normalizer,
    default_synth_config,
    dtw_align,
    dtw_distance,
    dtw_path,
    extract_windows,
    fit_normalizer,
    invert_normalizer,
    load_dataset,
    resample,
    save_dataset,
    split_trials,
    synth_generate_hhi,
)


def _human(frames, rate=40.0):
    return AgentStream("human", frames, rate)


def _trial(tid="t0", action="hand_shake", T=50, dims=6, seed=0):
    rng = np.random.default_rng(seed)
    return InteractionTrial(
        trial_id=tid,
        action=action,
        pair_type="HHI",
        a1=_human(rng.standard_normal((T, dims))),
        a2=_human(rng.standard_normal((T, dims))),
    )


# ---------------------------------------------------------------- types


def test_trial_length_mismatch_rejected():
    with pytest.raises(ValueError):
        InteractionTrial("x", "rocket", "HHI", _human(np.zeros((5, 3))), _human(np.zeros((6, 3))))


def test_hri_requires_robot_second_agent():
    with pytest.raises(ValueError):
        InteractionTrial("x", "rocket", "HRI", _human(np.zeros((5, 3))), _human(np.zeros((5, 3))))


def test_robot_angles_bounded():
    with pytest.raises(ValueError):
        AgentStream("robot", np.full((3, 7), 4.0))


def test_nonfinite_frames_rejected():
    frames = np.zeros((4, 3))
    frames[1, 2] = np.nan
    with pytest.raises(ValueError):
        AgentStream("human", frames)


# ---------------------------------------------------------------- io


def test_dataset_round_trip_bit_exact(tmp_path):
    cfg = default_synth_config(seed=5, joint_set="arm8", counts_hhi={a: 0 for a in ACTIONS} | {"hand_shake": 38})
    trials = synth_generate_hhi(cfg)
    assert len(trials) == 38
    path = tmp_path / "ds.jsonl"
    save_dataset(trials, path)
    loaded = load_dataset(path)
    assert len(loaded) == 38
    for a, b in zip(trials, loaded):
        assert a.trial_id == b.trial_id and a.action == b.action and a.pair_type == b.pair_type
        assert a.leader_role == b.leader_role
        assert np.array_equal(a.a1.frames, b.a1.frames)
        assert np.array_equal(a.a2.frames, b.a2.frames)


def test_empty_dataset_file(tmp_path):
    path = tmp_path / "empty.jsonl"
    save_dataset([], path)
    assert load_dataset(path) == []


def test_missing_action_field_names_line(tmp_path):
    trials = [_trial("a"), _trial("b"), _trial("c")]
    path = tmp_path / "ds.jsonl"
    save_dataset(trials, path)
    lines = path.read_text().splitlines()
    import json

    bad = json.loads(lines[1])
    del bad["action"]
    lines[1] = json.dumps(bad)
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(ValueError, match=r"line 2: missing field 'action'"):
        load_dataset(path)


def test_invalid_json_names_line(tmp_path):
    path = tmp_path / "ds.jsonl"
    path.write_text("{not json}\n")
    with pytest.raises(ValueError, match=r"line 1"):
        load_dataset(path)


# ---------------------------------------------------------------- resample


def test_resample_ramp_100_to_40():
    stream = _human(np.array([[0.0], [1.0], [2.0], [3.0], [4.0]]), rate=100.0)
    out = resample(stream, 40.0)
    assert out.rate_hz == 40.0
    np.testing.assert_allclose(out.frames[:, 0], [0.0, 2.5], atol=1e-12)


def test_resample_identity():
    stream = _human(np.random.default_rng(0).standard_normal((30, 4)))
    out = resample(stream, 40.0)
    assert np.array_equal(out.frames, stream.frames)


def test_resample_sine_oracle():
    t_in = np.arange(0, 2.0, 1 / 100)
    stream = _human(np.sin(2 * np.pi * 2.0 * t_in)[:, None], rate=100.0)
    out = resample(stream, 40.0)
    t_out = np.arange(out.length) / 40.0
    # Linear-interp error bound for a 2 Hz sine on a 100 Hz grid is
    # (4*pi)^2 * h^2 / 8 = 1.97e-3 at targets landing mid-interval.
    assert np.max(np.abs(out.frames[:, 0] - np.sin(2 * np.pi * 2.0 * t_out))) < 2.5e-3


def test_resample_too_short_raises():
    with pytest.raises(ValueError):
        resample(_human(np.zeros((1, 2)), rate=100.0), 40.0)


# ---------------------------------------------------------------- windows


def test_window_count_100_40_1():
    starts, windows = extract_windows(np.zeros((100, 2)), WindowSpec(40, 1))
    assert len(starts) == 61 and windows.shape == (61, 80)


def test_window_exact_length():
    frames = np.random.default_rng(1).standard_normal((40, 3))
    starts, windows = extract_windows(frames, WindowSpec(40, 1))
    assert len(starts) == 1
    np.testing.assert_array_equal(windows[0], frames.reshape(-1))


def test_window_at_t5_matches_frames():
    frames = np.random.default_rng(2).standard_normal((60, 2))
    starts, windows = extract_windows(frames, WindowSpec(10, 1))
    np.testing.assert_array_equal(windows[5], frames[5:15].reshape(-1))


@given(T=st.integers(1, 200), w=st.integers(1, 50), stride=st.integers(1, 7))
@settings(max_examples=80, deadline=None)
def test_window_count_formula(T, w, stride):
    if T < w:
        with pytest.raises(ValueError):
            extract_windows(np.zeros((T, 1)), WindowSpec(w, stride))
        return
    starts, windows = extract_windows(np.zeros((T, 1)), WindowSpec(w, stride))
    assert len(starts) == (T - w) // stride + 1
    assert starts[-1] + w <= T


# ---------------------------------------------------------------- normalizer


def test_normalizer_binary_values():
    frames = np.array([[0.0], [2.0]])
    trial = InteractionTrial("x", "rocket", "HHI", _human(frames), _human(frames))
    norm = fit_normalizer([trial], "human")
    assert norm.mean[0] == 1.0 and norm.std[0] == 1.0
    assert apply_normalizer(norm, np.array([[2.0]]))[0, 0] == 1.0


def test_normalizer_constant_dim_shift_only():
    frames = np.full((10, 2), 3.0)
    trial = InteractionTrial("x", "rocket", "HHI", _human(frames), _human(frames))
    norm = fit_normalizer([trial], "human")
    assert np.all(norm.std == 1.0)
    np.testing.assert_array_equal(apply_normalizer(norm, frames), np.zeros_like(frames))


def test_normalizer_round_trip():
    rng = np.random.default_rng(3)
    trial = _trial(seed=3)
    norm = fit_normalizer([trial], "human")
    x = rng.standard_normal((20, trial.a1.dims))
    back = invert_normalizer(norm, apply_normalizer(norm, x))
    np.testing.assert_allclose(back, x, atol=1e-12)


def test_robot_normalizer_records_range_and_round_trips():
    rng = np.random.default_rng(4)
    angles = rng.uniform(-1.0, 1.0, (30, 7))
    trial = InteractionTrial(
        "x", "rocket", "HRI", _human(rng.standard_normal((30, 6))), AgentStream("robot", angles)
    )
    norm = fit_normalizer([trial], "robot")
    np.testing.assert_array_equal(norm.j_min, angles.min(axis=0))
    np.testing.assert_array_equal(norm.j_max, angles.max(axis=0))
    scaled = apply_normalizer(norm, angles)
    assert scaled.min() >= -1.0 - 1e-12 and scaled.max() <= 1.0 + 1e-12
    np.testing.assert_allclose(invert_normalizer(norm, scaled), angles, atol=1e-12)


# ---------------------------------------------------------------- dtw


def test_dtw_identical_sequences():
    s = np.array([0.0, 1.0, 0.5, -0.2])
    dist, path = dtw_path(s, s)
    assert dist == 0.0
    assert path == [(i, i) for i in range(len(s))]
    t_dtw, aligned = dtw_align([s, s.copy()])
    assert t_dtw == len(s)
    for a in aligned:
        np.testing.assert_array_equal(a, s)


def test_dtw_distance_hand_example():
    assert dtw_distance([1.0, 2.0, 3.0], [1.0, 3.0]) == 1.0


def _brute_force_dtw(a, b):
    best = [np.inf]

    def walk(i, j, total):
        total += abs(a[i] - b[j])
        if total >= best[0]:
            return
        if i == len(a) - 1 and j == len(b) - 1:
            best[0] = total
            return
        if i + 1 < len(a) and j + 1 < len(b):
            walk(i + 1, j + 1, total)
        if i + 1 < len(a):
            walk(i + 1, j, total)
        if j + 1 < len(b):
            walk(i, j + 1, total)

    walk(0, 0, 0.0)
    return best[0]


@pytest.mark.parametrize("seed", range(6))
def test_dtw_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal(rng.integers(2, 7))
    b = rng.standard_normal(rng.integers(2, 7))
    assert dtw_distance(a, b) == pytest.approx(_brute_force_dtw(a, b), abs=1e-12)
    assert dtw_distance(a, b) == pytest.approx(dtw_distance(b, a), abs=1e-12)


def test_dtw_time_dilated_alignment():
    rng = np.random.default_rng(9)
    s = np.cumsum(rng.standard_normal(30)) * 0.1
    dilated = np.repeat(s, 2)
    t_dtw, aligned = dtw_align([dilated, s])
    assert t_dtw == len(s)
    np.testing.assert_allclose(aligned[0], s, atol=1e-9)


def test_dtw_align_median_reference():
    seqs = [np.zeros(5), np.zeros(9), np.zeros(7)]
    t_dtw, aligned = dtw_align(seqs)
    assert t_dtw == 7
    assert all(len(a) == 7 for a in aligned)


# ---------------------------------------------------------------- split


def test_split_ten_per_action():
    trials = [_trial(f"{a}-{i}", action=a, seed=i) for a in ACTIONS for i in range(10)]
    train, test = split_trials(trials, 0.2, seed=0)
    for action in ACTIONS:
        assert sum(t.action == action for t in train) == 8
        assert sum(t.action == action for t in test) == 2


def test_split_deterministic():
    trials = [_trial(f"{a}-{i}", action=a, seed=i) for a in ACTIONS for i in range(7)]
    s1 = split_trials(trials, 0.2, seed=3)
    s2 = split_trials(trials, 0.2, seed=3)
    assert [t.trial_id for t in s1[0]] == [t.trial_id for t in s2[0]]
    assert [t.trial_id for t in s1[1]] == [t.trial_id for t in s2[1]]


def test_split_is_partition():
    trials = [_trial(f"{a}-{i}", action=a, seed=i) for a in ACTIONS for i in range(9)]
    train, test = split_trials(trials, 0.25, seed=1)
    train_ids = {t.trial_id for t in train}
    test_ids = {t.trial_id for t in test}
    assert train_ids | test_ids == {t.trial_id for t in trials}
    assert not (train_ids & test_ids)


def test_dtw_multivariate_alignment():
    rng = np.random.default_rng(3)
    s = np.cumsum(rng.standard_normal((12, 4)), axis=0) * 0.1
    dilated = np.repeat(s, 2, axis=0)
    t_dtw, aligned = dtw_align([dilated, s])
    assert t_dtw == 12
    assert aligned[0].shape == (12, 4)
    np.testing.assert_allclose(aligned[0], s, atol=1e-9)
    np.testing.assert_array_equal(aligned[1], s)
