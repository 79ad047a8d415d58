from .types import (
    ACTIONS,
    AgentStream,
    InteractionTrial,
    Normalizer,
    WindowSpec,
)
from .io import load_dataset, save_dataset, atomic_write_text
from .ops import (
    apply_normalizer,
    extract_windows,
    fit_normalizer,
    invert_normalizer,
    resample,
    split_trials,
)
from .dtw import dtw_align, dtw_distance, dtw_path
from .synth import (
    ARM_JOINTS,
    FULL_JOINTS,
    JOINT_SETS,
    ROBOT_LINKS,
    ActionParams,
    SynthConfig,
    default_synth_config,
    embodiment_map,
    human_pose_from_wrist,
    planar_arm_fk,
    planar_arm_ik,
    rest_frame,
    robot_angles_from_wrist_path,
    synth_generate_hhi,
    synth_generate_hri,
)

__all__ = [
    "ACTIONS",
    "AgentStream",
    "InteractionTrial",
    "Normalizer",
    "WindowSpec",
    "load_dataset",
    "save_dataset",
    "atomic_write_text",
    "apply_normalizer",
    "extract_windows",
    "fit_normalizer",
    "invert_normalizer",
    "resample",
    "split_trials",
    "dtw_align",
    "dtw_distance",
    "dtw_path",
    "ARM_JOINTS",
    "FULL_JOINTS",
    "JOINT_SETS",
    "ROBOT_LINKS",
    "ActionParams",
    "SynthConfig",
    "default_synth_config",
    "embodiment_map",
    "human_pose_from_wrist",
    "planar_arm_fk",
    "planar_arm_ik",
    "rest_frame",
    "robot_angles_from_wrist_path",
    "synth_generate_hhi",
    "synth_generate_hri",
]
