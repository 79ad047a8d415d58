"""Synthetic two-agent gesture trials and the human-to-robot embodiment map.

Each trial is rest -> minimum-jerk reach ramp -> oscillation (cycle count
drawn from the configured range, partner phase offset by a jitter draw) ->
retract -> rest, on the right arm of each agent; remaining joints idle near
the rest pose apart from observation noise. Both agents live in their own
body-centric frame: x lateral (right positive), y toward the partner,
z up, origin at the pelvis.

Robot trials reuse the human pair and replace agent 2 with a 7-angle arm:
the wrist path is projected onto the (y, z) plane and solved by a 3-link
planar analytic IK (links 0.30 / 0.25 / 0.15 m); the four remaining angles
are smooth functions of the wrist position, so a constant human stream maps
to a constant robot stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .types import ACTIONS, AgentStream, InteractionTrial

FULL_JOINTS = (
    "pelvis", "spine", "chest", "neck", "head",
    "r_shoulder", "r_elbow", "r_wrist", "r_hand",
    "l_shoulder", "l_elbow", "l_wrist", "l_hand",
    "r_hip", "r_knee", "r_ankle", "l_hip", "l_knee", "l_ankle",
)
ARM_JOINTS = ("pelvis", "spine", "chest", "neck", "r_shoulder", "r_elbow", "r_wrist", "r_hand")

_REST = {
    "pelvis": (0.00, 0.00, 0.00),
    "spine": (0.00, 0.00, 0.18),
    "chest": (0.00, 0.01, 0.36),
    "neck": (0.00, 0.01, 0.52),
    "head": (0.00, 0.02, 0.66),
    "r_shoulder": (0.20, 0.00, 0.50),
    "r_elbow": (0.22, 0.01, 0.22),
    "r_wrist": (0.24, 0.04, -0.04),
    "r_hand": (0.25, 0.06, -0.12),
    "l_shoulder": (-0.20, 0.00, 0.50),
    "l_elbow": (-0.22, 0.01, 0.22),
    "l_wrist": (-0.24, 0.04, -0.04),
    "l_hand": (-0.25, 0.06, -0.12),
    "r_hip": (0.09, 0.00, -0.02),
    "r_knee": (0.10, 0.02, -0.44),
    "r_ankle": (0.11, 0.01, -0.84),
    "l_hip": (-0.09, 0.00, -0.02),
    "l_knee": (-0.10, 0.02, -0.44),
    "l_ankle": (-0.11, 0.01, -0.84),
}

JOINT_SETS = {"full": FULL_JOINTS, "arm8": ARM_JOINTS}

# Robot arm: planar 3-link chain anchored at the shoulder's (y, z) position.
ROBOT_LINKS = (0.30, 0.25, 0.15)
_PLANAR_BASE = np.array([_REST["r_shoulder"][1], _REST["r_shoulder"][2]])
_ELBOW_BEND = np.array([0.05, -0.04, -0.10])


def _unit(v):
    v = np.asarray(v, dtype=np.float64)
    return v / np.linalg.norm(v)


_GESTURES = {
    # reach_dir: unit displacement of the wrist during the ramp;
    # osc_axis: unit axis of the oscillation (kept orthogonal to reach_dir's
    # dominant component so spectra separate cleanly).
    "hand_shake": {"reach_dir": _unit((0.0, 1.0, 0.45)), "osc_axis": np.array([0.0, 0.0, 1.0])},
    "hand_wave": {"reach_dir": _unit((0.05, 0.25, 1.0)), "osc_axis": np.array([1.0, 0.0, 0.0])},
    "parachute": {"reach_dir": _unit((-0.10, 0.35, 1.0)), "osc_axis": np.array([1.0, 0.0, 0.0])},
    "rocket": {"reach_dir": _unit((0.0, 0.75, 0.66)), "osc_axis": np.array([1.0, 0.0, 0.0])},
}


@dataclass(frozen=True)
class ActionParams:
    count_hhi: int
    duration_hhi: tuple
    count_hri: int
    duration_hri: tuple
    freq_range: tuple
    amplitude: float
    reach_gain: float = 3.0
    cycle_range: tuple = (3.0, 6.0)
    phase_jitter: float = 0.3
    ramp_s: float = 1.2
    noise_std: float = 0.004


@dataclass(frozen=True)
class SynthConfig:
    actions: dict
    seed: int = 0
    rate_hz: float = 40.0
    joint_set: str = "full"

    def __post_init__(self):
        if self.joint_set not in JOINT_SETS:
            raise ValueError(f"unknown joint_set {self.joint_set!r}")
        for name in self.actions:
            if name not in ACTIONS:
                raise ValueError(f"unknown action {name!r}")


def default_synth_config(seed=0, joint_set="full", counts_hhi=None, counts_hri=None) -> SynthConfig:
    """Dataset-shaped defaults: per-action counts and duration ranges."""
    # Frequency bands are deliberately tight: within one action people
    # oscillate at near-identical rates, and wide bands would make the far
    # end of a one-second prediction window unknowable from the observed
    # prefix (phase error grows linearly with the frequency spread).
    base = {
        "hand_shake": ActionParams(38, (8.5, 12.5), 10, (10.4, 14.5), (1.15, 1.35), 0.12),
        "hand_wave": ActionParams(31, (8.5, 17.5), 10, (12.7, 17.4), (1.1, 1.3), 0.18, reach_gain=2.8),
        "parachute": ActionParams(49, (7.0, 12.0), 11, (11.0, 14.3), (1.45, 1.65), 0.15, reach_gain=3.2),
        "rocket": ActionParams(70, (3.0, 6.0), 10, (11.1, 13.8), (3.6, 3.8), 0.10, ramp_s=0.6),
    }
    actions = {}
    for name, params in base.items():
        changes = {}
        if counts_hhi is not None:
            changes["count_hhi"] = counts_hhi.get(name, params.count_hhi)
        if counts_hri is not None:
            changes["count_hri"] = counts_hri.get(name, params.count_hri)
        actions[name] = replace(params, **changes) if changes else params
    return SynthConfig(actions=actions, seed=seed, joint_set=joint_set)


def _min_jerk(tau):
    tau = np.clip(tau, 0.0, 1.0)
    return 10.0 * tau**3 - 15.0 * tau**4 + 6.0 * tau**5


def rest_frame(joint_set: str) -> np.ndarray:
    joints = JOINT_SETS[joint_set]
    return np.array([_REST[j] for j in joints], dtype=np.float64).reshape(-1)


def _arm_positions(wrist: np.ndarray):
    """Elbow and hand positions implied by a wrist path (T, 3)."""
    s = np.asarray(_REST["r_shoulder"])
    elbow = s + 0.45 * (wrist - s) + _ELBOW_BEND
    fore = wrist - elbow
    fore = fore / np.linalg.norm(fore, axis=-1, keepdims=True)
    hand = wrist + 0.09 * fore
    return elbow, hand


def _self_consistent_rest():
    """Pin rest elbow/hand to the arm model so a resting wrist is a fixpoint."""
    elbow, hand = _arm_positions(np.array([_REST["r_wrist"]]))
    _REST["r_elbow"] = tuple(elbow[0])
    _REST["r_hand"] = tuple(hand[0])
    _REST["l_elbow"] = (-elbow[0][0], elbow[0][1], elbow[0][2])
    _REST["l_hand"] = (-hand[0][0], hand[0][1], hand[0][2])


def _assemble_frames(wrist: np.ndarray, joint_set: str) -> np.ndarray:
    """Full frames (T, dims) with the right arm following the wrist path."""
    joints = JOINT_SETS[joint_set]
    T = wrist.shape[0]
    elbow, hand = _arm_positions(wrist)
    frames = np.tile(rest_frame(joint_set), (T, 1)).reshape(T, len(joints), 3)
    moving = {"r_wrist": wrist, "r_elbow": elbow, "r_hand": hand}
    for name, path in moving.items():
        if name in joints:
            frames[:, joints.index(name), :] = path
    return frames.reshape(T, len(joints) * 3)


_self_consistent_rest()


def human_pose_from_wrist(wrist_yz, joint_set="arm8") -> np.ndarray:
    """Deterministic lift of a planar wrist point to a full human frame."""
    wrist_yz = np.asarray(wrist_yz, dtype=np.float64)
    wrist = np.array([[_REST["r_wrist"][0], wrist_yz[0], wrist_yz[1]]])
    return _assemble_frames(wrist, joint_set)[0]


def _wrist_trajectory(t, params, seg, freq, phase, gesture):
    """Wrist path (T, 3) for one agent: ramp, enveloped oscillation, retract."""
    t0, t1, t2, t3 = seg
    rest = np.asarray(_REST["r_wrist"])
    reach = gesture["reach_dir"] * params.amplitude * params.reach_gain

    ramp = np.clip((t - t0) / max(t1 - t0, 1e-9), 0.0, 1.0)
    retract = np.clip((t - t2) / max(t3 - t2, 1e-9), 0.0, 1.0)
    profile = _min_jerk(ramp) * (1.0 - _min_jerk(retract))

    half_period = 0.5 / freq
    rise = _min_jerk((t - t1) / half_period)
    fall = 1.0 - _min_jerk((t - (t2 - half_period)) / half_period)
    envelope = np.where((t >= t1) & (t <= t2), rise * fall, 0.0)
    osc = params.amplitude * envelope * np.sin(2.0 * math.pi * freq * (t - t1) + phase)

    return rest + profile[:, None] * reach + osc[:, None] * gesture["osc_axis"]


def _synth_pair(action, params, dur_range, rng, rate_hz, joint_set):
    """Both agents' human frames plus the noiseless agent-2 wrist path."""
    lo, hi = dur_range
    duration = rng.uniform(lo + 1.0 / rate_hz, hi)
    T = int(math.floor(duration * rate_hz))
    # Guard band keeps the realized cycle count measurably inside the range.
    cycles = rng.uniform(params.cycle_range[0] + 0.75, params.cycle_range[1] - 0.75)
    freq = rng.uniform(*params.freq_range)
    jitter = rng.uniform(-params.phase_jitter, params.phase_jitter)

    osc_dur = cycles / freq
    required = params.ramp_s + osc_dur + params.ramp_s
    slack = T / rate_hz - required
    if slack < 0:
        raise ValueError(
            f"infeasible synth config for {action}: ramp+oscillation {required:.2f}s exceeds duration {T / rate_hz:.2f}s"
        )
    t0 = slack * rng.uniform(0.35, 0.65)
    seg = (t0, t0 + params.ramp_s, t0 + params.ramp_s + osc_dur, t0 + required)

    t = np.arange(T) / rate_hz
    gesture = _GESTURES[action]
    frames = []
    wrists = []
    for phase in (0.0, jitter):
        wrist = _wrist_trajectory(t, params, seg, freq, phase, gesture)
        wrists.append(wrist)
        clean = _assemble_frames(wrist, joint_set)
        noise = rng.normal(0.0, params.noise_std, clean.shape) if params.noise_std > 0 else 0.0
        frames.append(clean + noise)
    return T, frames[0], frames[1], wrists[1]


def synth_generate_hhi(config: SynthConfig):
    """All configured HHI trials; deterministic given config (incl. seed)."""
    trials = []
    index = 0
    for action in ACTIONS:
        if action not in config.actions:
            continue
        params = config.actions[action]
        for i in range(params.count_hhi):
            # Per-trial seed material: independent streams, parallelizable.
            rng = np.random.default_rng([config.seed, index])
            _, f1, f2, _ = _synth_pair(action, params, params.duration_hhi, rng, config.rate_hz, config.joint_set)
            trials.append(
                InteractionTrial(
                    trial_id=f"{action}-hhi-{i:03d}",
                    action=action,
                    pair_type="HHI",
                    a1=AgentStream("human", f1, config.rate_hz),
                    a2=AgentStream("human", f2, config.rate_hz),
                    leader_role="a1",
                )
            )
            index += 1
    return trials


# ---------------------------------------------------------------- embodiment


def planar_arm_ik(target_yz):
    """Joint angles (…, 3) reaching planar targets (…, 2) relative to base.

    The end link points along the base-to-target direction; out-of-range
    targets are clipped radially into the reachable annulus.
    """
    target = np.asarray(target_yz, dtype=np.float64)
    l1, l2, l3 = ROBOT_LINKS
    r = np.linalg.norm(target, axis=-1)
    r_safe = np.where(r < 1e-9, 1e-9, r)
    direction = target / r_safe[..., None]
    direction = np.where(r[..., None] < 1e-9, np.array([1.0, 0.0]), direction)
    r_clipped = np.clip(r, abs(l1 - l2) + l3 + 0.02, l1 + l2 + l3 - 0.02)
    phi_e = np.arctan2(direction[..., 1], direction[..., 0])
    q = (r_clipped - l3)[..., None] * direction
    d2 = np.sum(q * q, axis=-1)
    cos_t2 = np.clip((d2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2), -1.0, 1.0)
    t2 = -np.arccos(cos_t2)
    t1 = np.arctan2(q[..., 1], q[..., 0]) - np.arctan2(l2 * np.sin(t2), l1 + l2 * np.cos(t2))
    t3 = phi_e - t1 - t2
    return np.stack([t1, t2, t3], axis=-1)


def planar_arm_fk(angles):
    """Joint positions (…, 4, 2) of the planar chain, base first."""
    angles = np.asarray(angles, dtype=np.float64)
    t1 = angles[..., 0]
    t12 = t1 + angles[..., 1]
    t123 = t12 + angles[..., 2]
    base = np.zeros(angles.shape[:-1] + (2,))
    p1 = base + ROBOT_LINKS[0] * np.stack([np.cos(t1), np.sin(t1)], axis=-1)
    p2 = p1 + ROBOT_LINKS[1] * np.stack([np.cos(t12), np.sin(t12)], axis=-1)
    p3 = p2 + ROBOT_LINKS[2] * np.stack([np.cos(t123), np.sin(t123)], axis=-1)
    return np.stack([base, p1, p2, p3], axis=-2)


def robot_angles_from_wrist_path(wrist_yz):
    """7-angle robot frames from an absolute planar wrist path (T, 2)."""
    wrist_yz = np.asarray(wrist_yz, dtype=np.float64)
    arm = planar_arm_ik(wrist_yz - _PLANAR_BASE)
    wy = wrist_yz[..., 0]
    wz = wrist_yz[..., 1]
    u = np.tanh(2.0 * (wz - 0.2))
    v = np.tanh(2.0 * (wy - 0.2))
    rest4 = np.stack([0.6 * u, 0.4 * v - 0.2, 0.3 * u * v, 0.25 * (u - v)], axis=-1)
    return np.clip(np.concatenate([arm, rest4], axis=-1), -math.pi, math.pi)


def embodiment_map(human: AgentStream, joint_set: str) -> AgentStream:
    """Deterministic human-to-robot retarget via the planar wrist path."""
    joints = JOINT_SETS[joint_set]
    if "r_wrist" not in joints:
        raise ValueError("joint set lacks a right wrist")
    k = joints.index("r_wrist")
    wrist = human.frames.reshape(human.length, len(joints), 3)[:, k, :]
    angles = robot_angles_from_wrist_path(wrist[:, 1:3])
    return AgentStream("robot", angles, human.rate_hz)


def synth_generate_hri(config: SynthConfig, embodiment: Optional[Callable] = None):
    """All configured HRI trials: human pair with agent 2 re-embodied."""
    retarget = embodiment if embodiment is not None else embodiment_map
    trials = []
    index = 0
    for action in ACTIONS:
        if action not in config.actions:
            continue
        params = config.actions[action]
        for i in range(params.count_hri):
            rng = np.random.default_rng([config.seed, 100_000 + index])
            _, f1, f2, _ = _synth_pair(action, params, params.duration_hri, rng, config.rate_hz, config.joint_set)
            human2 = AgentStream("human", f2, config.rate_hz)
            trials.append(
                InteractionTrial(
                    trial_id=f"{action}-hri-{i:03d}",
                    action=action,
                    pair_type="HRI",
                    a1=AgentStream("human", f1, config.rate_hz),
                    a2=retarget(human2, config.joint_set),
                    leader_role="a1",
                )
            )
            index += 1
    return trials
