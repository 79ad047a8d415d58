"""Core data model: agent streams, paired-interaction trials, windows."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

ACTIONS = ("hand_shake", "hand_wave", "parachute", "rocket")
PAIR_TYPES = ("HHI", "HRI")
AGENT_KINDS = ("human", "robot")
CANONICAL_RATE_HZ = 40.0
ROBOT_DIMS = 7


@dataclass
class AgentStream:
    """One agent's motion: humans as joint positions (meters, J joints x 3),
    robots as 7 joint angles (radians). frames is (T, dims) float64."""

    agent_kind: str
    frames: np.ndarray
    rate_hz: float = CANONICAL_RATE_HZ

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 2:
            raise ValueError(f"frames must be (T, dims), got shape {self.frames.shape}")
        self.validate()

    @property
    def dims(self) -> int:
        return self.frames.shape[1]

    @property
    def length(self) -> int:
        return self.frames.shape[0]

    def validate(self):
        if self.agent_kind not in AGENT_KINDS:
            raise ValueError(f"unknown agent_kind {self.agent_kind!r}")
        if self.frames.shape[0] < 1:
            raise ValueError("stream must have at least one frame")
        if not np.all(np.isfinite(self.frames)):
            raise ValueError("stream contains non-finite frames")
        if self.rate_hz <= 0:
            raise ValueError("rate_hz must be positive")
        if self.agent_kind == "robot":
            if self.dims != ROBOT_DIMS:
                raise ValueError(f"robot stream must have {ROBOT_DIMS} dims, got {self.dims}")
            if np.any(np.abs(self.frames) > math.pi + 1e-9):
                raise ValueError("robot angles must lie within [-pi, pi]")

    def copy(self) -> "AgentStream":
        return AgentStream(self.agent_kind, self.frames.copy(), self.rate_hz)


@dataclass
class InteractionTrial:
    """A paired recording of two agents with equal frame counts."""

    trial_id: str
    action: str
    pair_type: str
    a1: AgentStream
    a2: AgentStream
    leader_role: Optional[str] = None

    def __post_init__(self):
        self.validate()

    @property
    def length(self) -> int:
        return self.a1.length

    def validate(self):
        if self.action not in ACTIONS:
            raise ValueError(f"unknown action {self.action!r}")
        if self.pair_type not in PAIR_TYPES:
            raise ValueError(f"unknown pair_type {self.pair_type!r}")
        if self.a1.length != self.a2.length:
            raise ValueError(f"agents disagree on length: {self.a1.length} vs {self.a2.length}")
        if self.pair_type == "HRI" and self.a2.agent_kind != "robot":
            raise ValueError("HRI trials must have a robot as agent 2")
        if self.pair_type == "HHI" and (self.a1.agent_kind != "human" or self.a2.agent_kind != "human"):
            raise ValueError("HHI trials must pair two humans")
        if self.leader_role not in (None, "a1", "a2"):
            raise ValueError(f"leader_role must be a1/a2/None, got {self.leader_role!r}")


@dataclass(frozen=True)
class WindowSpec:
    """Sliding-window layout: w frames per window, advanced by stride."""

    w: int = 40
    stride: int = 1

    def __post_init__(self):
        if self.w < 1 or self.stride < 1:
            raise ValueError("window size and stride must be positive")


@dataclass
class Normalizer:
    """Per-dim frame normalization fitted on the training split.

    Humans standardize to zero mean / unit std. Robots map the recorded
    training range [j_min, j_max] onto [-1, 1]; the raw range is kept for
    range-normalized error metrics.
    """

    agent_kind: str
    mean: np.ndarray = field(default=None)
    std: np.ndarray = field(default=None)
    j_min: np.ndarray = field(default=None)
    j_max: np.ndarray = field(default=None)

    def to_dict(self) -> dict:
        out = {"agent_kind": self.agent_kind}
        for name in ("mean", "std", "j_min", "j_max"):
            v = getattr(self, name)
            out[name] = None if v is None else np.asarray(v).tolist()
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "Normalizer":
        def arr(v):
            return None if v is None else np.asarray(v, dtype=np.float64)

        return cls(
            agent_kind=d["agent_kind"],
            mean=arr(d.get("mean")),
            std=arr(d.get("std")),
            j_min=arr(d.get("j_min")),
            j_max=arr(d.get("j_max")),
        )
