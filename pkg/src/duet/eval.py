"""Prediction metrics, factor-analysis entrainment, and the benchmark driver.

The benchmark replays held-out trials in alternating blocks: a short observed
phase (both streams ground truth) followed by a prediction phase where every
model runs on its own output. One mean window is decoded per block at the
observation end; those windows provide both the horizon error curve and the
per-joint range-normalized error.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

from .baselines import GaussianTrajectoryModel, baseline_trajectory_for_trial
from .data.io import atomic_write_text
from .data.ops import apply_normalizer, invert_normalizer
from .dynamics import advance, extract_dynamics_means
from .generation import _decode_human_window, _tick, init_state
from .nn import gaussian_head

log = logging.getLogger(__name__)

OBS_FRAMES = 10
PRED_FRAMES = 30


# ---- error metrics ---------------------------------------------------------


def mspe_curve(pred_windows, true_windows):
    """Prediction error per horizon offset 1..w.

    RMS over windows and dims at each offset, in the input's units (meters
    for raw human motion); the curve keeps the conventional MSPE name.
    """
    pred = np.asarray(pred_windows, dtype=np.float64)
    true = np.asarray(true_windows, dtype=np.float64)
    if pred.shape != true.shape or pred.ndim != 3:
        raise ValueError(f"window stacks must match, got {pred.shape} vs {true.shape}")
    return np.sqrt(((pred - true) ** 2).mean(axis=(0, 2)))


def nrmsd_per_joint(pred_trials, true_trials, j_min, j_max):
    """Range-normalized deviation per joint, averaged over trials.

    Per trial and joint: sqrt( sum_t (x - xhat)^2 / (T * (j_max - j_min)) ),
    with the joint range taken from the recorded training data.
    """
    j_min = np.asarray(j_min, dtype=np.float64)
    j_max = np.asarray(j_max, dtype=np.float64)
    span = j_max - j_min
    if np.any(span <= 0):
        raise ValueError("joint ranges must be positive")
    per_trial = []
    for pred, true in zip(pred_trials, true_trials):
        pred = np.asarray(pred, dtype=np.float64)
        true = np.asarray(true, dtype=np.float64)
        if pred.shape != true.shape:
            raise ValueError(f"prediction shape {pred.shape} != truth {true.shape}")
        T = pred.shape[0]
        if T == 0:
            continue
        per_trial.append(np.sqrt(((pred - true) ** 2).sum(axis=0) / (T * span)))
    if not per_trial:
        raise ValueError("no scored frames")
    return np.asarray(per_trial).mean(axis=0)


# ---- factor analysis -------------------------------------------------------


@dataclass
class FactorAnalysisResult:
    loadings: np.ndarray  # (dims, k), ordered by explained variance
    scores: np.ndarray  # (T, k) regression-method factor scores
    noise_var: np.ndarray  # (dims,)
    explained: np.ndarray  # (k,) sum of squared loadings per factor
    loglik: list


def factor_analysis(data, n_factors=2, max_iter=500, tol=1e-8):
    """Maximum-likelihood factor analysis via EM on standardized columns.

    Stops after max_iter iterations or when the per-sample log-likelihood
    improves by less than tol. Factors come back ordered by explained
    variance (sum of squared loadings), largest first.
    """
    X = np.asarray(data, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] <= n_factors:
        raise ValueError(f"need (T, dims) data with T > {n_factors}")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std < 1e-12, 1.0, std)
    X = (X - mean) / std
    T, D = X.shape
    S = X.T @ X / T

    eigval, eigvec = np.linalg.eigh(S)
    top = np.argsort(eigval)[::-1][:n_factors]
    lam = eigvec[:, top] * np.sqrt(np.maximum(eigval[top], 1e-12))
    psi = np.maximum(np.diag(S) - (lam**2).sum(axis=1), 1e-6)

    loglik = []
    for _ in range(max_iter):
        sigma = lam @ lam.T + np.diag(psi)
        sigma_inv = np.linalg.inv(sigma)
        beta = lam.T @ sigma_inv  # (k, D)
        s_beta_t = S @ beta.T  # (D, k)
        e_zz = np.eye(n_factors) - beta @ lam + beta @ s_beta_t
        lam = s_beta_t @ np.linalg.inv(e_zz)
        psi = np.maximum(np.diag(S - lam @ (beta @ S)), 1e-6)
        sign, logdet = np.linalg.slogdet(sigma)
        ll = -0.5 * (D * np.log(2.0 * np.pi) + logdet + np.trace(sigma_inv @ S))
        loglik.append(float(ll))
        if len(loglik) > 1 and abs(loglik[-1] - loglik[-2]) < tol:
            break

    sigma = lam @ lam.T + np.diag(psi)
    scores = X @ np.linalg.inv(sigma) @ lam
    explained = (lam**2).sum(axis=0)
    order = np.argsort(explained)[::-1]
    return FactorAnalysisResult(
        loadings=lam[:, order],
        scores=scores[:, order],
        noise_var=psi,
        explained=explained[order],
        loglik=loglik,
    )


def max_crosscorr(x, y, max_lag=20):
    """(|corr|, lag) of the strongest normalized cross-correlation.

    Lag tau aligns x[t] with y[t + tau]; a positive lag means y trails x.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = min(x.shape[0], y.shape[0])
    best_corr, best_lag = 0.0, 0
    for lag in range(-max_lag, max_lag + 1):
        t0 = max(0, -lag)
        t1 = min(n, n - lag)
        if t1 - t0 < 3:
            continue
        a = x[t0:t1]
        b = y[t0 + lag : t1 + lag]
        if a.std() < 1e-12 or b.std() < 1e-12:
            continue
        c = float(np.corrcoef(a, b)[0, 1])
        if abs(c) > best_corr:
            best_corr, best_lag = abs(c), lag
    return best_corr, best_lag


def entrainment_score(human_d_sequence, robot_z_sequence, max_lag=20):
    """Per-factor coupling between two latent streams.

    Factor analysis runs independently on each sequence; matching factors
    (ordered by explained variance) are compared by their strongest
    cross-correlation within +-max_lag frames. Invariant to sign flips and
    affine rescaling of either stream because both FA inputs standardize.
    """
    fa_h = factor_analysis(human_d_sequence)
    fa_r = factor_analysis(robot_z_sequence)
    out = {}
    for k in range(2):
        corr, lag = max_crosscorr(fa_h.scores[:, k], fa_r.scores[:, k], max_lag)
        out[f"factor{k + 1}_corr"] = corr
        out[f"factor{k + 1}_lag"] = lag
    return out


def permutation_threshold(human_d_sequence, robot_z_sequence, n_shuffles=1000, max_lag=20, seed=0, factor=1):
    """(observed, 95th-percentile null) for the chosen factor (0-indexed).

    The null shuffles one factor-score series in time, destroying temporal
    alignment while preserving its marginal distribution.
    """
    fa_h = factor_analysis(human_d_sequence)
    fa_r = factor_analysis(robot_z_sequence)
    a = fa_h.scores[:, factor]
    b = fa_r.scores[:, factor]
    observed, _ = max_crosscorr(a, b, max_lag)
    rng = np.random.default_rng(seed)
    null = np.empty(n_shuffles)
    for i in range(n_shuffles):
        null[i] = max_crosscorr(a, rng.permutation(b), max_lag)[0]
    return observed, float(np.percentile(null, 95.0))


# ---- benchmark driver ------------------------------------------------------


def _replay_trial(model, trial, obs_frames=OBS_FRAMES, pred_frames=PRED_FRAMES):
    """Block-structured replay of one held-out trial.

    Returns (pred_windows, true_windows, pred_frames_list, true_frames_list,
    robot_z_means): windows decoded at each observation end, frames scored
    over prediction-phase ticks, and the per-tick robot latent means.
    """
    human = trial.a1.frames
    robot = trial.a2.frames
    T = robot.shape[0]
    w = model.robot_embedding.window_spec.w
    block = obs_frames + pred_frames
    robot_norm_obs = apply_normalizer(model.robot_embedding.normalizer, robot)
    human_norm_obs = None
    if model.variant != "raw_r":
        human_norm_obs = apply_normalizer(model.human_normalizer, human)

    state = init_state(model, robot[0])

    def inv(frames):
        return invert_normalizer(model.robot_embedding.normalizer, frames)

    pred_windows, true_windows = [], []
    pred_frames_acc, true_frames_acc = [], []
    z_means = np.empty((T, model.robot_embedding.latent_dim))
    for t in range(T):
        in_obs = (t % block) < obs_frames
        if in_obs:
            human_in = None if human_norm_obs is None else human_norm_obs[t]
            robot_in = robot_norm_obs[t]
        else:
            human_in = None
            robot_in = None
            pred_frames_acc.append(inv(state.robot_window[state.cursor]))
            true_frames_acc.append(robot[t])
        refresh = (t % block) == obs_frames - 1
        state = _tick(state, model, human_in, robot_in, do_refresh=refresh)
        z_means[t] = gaussian_head(model.params, "zrhead", state.h_r, len(model.hidden)).mean
        if refresh and t + 1 + w <= T:
            pred_windows.append(inv(state.robot_window))
            true_windows.append(robot[t + 1 : t + 1 + w])
    return pred_windows, true_windows, pred_frames_acc, true_frames_acc, z_means


def _replay_human_trial(dynamics, frames, obs_frames=OBS_FRAMES, pred_frames=PRED_FRAMES):
    """Same block protocol for the human-side model alone; returns windows."""
    norm = dynamics.embedding.normalizer
    w = dynamics.embedding.window_spec.w
    block = obs_frames + pred_frames
    frames = np.asarray(frames, dtype=np.float64)
    T = frames.shape[0]
    frames_norm = apply_normalizer(norm, frames)
    h = dynamics.initial_state()
    window, cursor = None, 0
    pred_windows, true_windows = [], []
    for t in range(T):
        in_obs = (t % block) < obs_frames
        if not in_obs and cursor >= w:
            window = _decode_human_window(dynamics, h)
            cursor = 0
        x = frames_norm[t] if in_obs else window[cursor]
        h, _ = advance(dynamics, h, x)
        cursor += 1
        if (t % block) == obs_frames - 1:
            window = _decode_human_window(dynamics, h)
            cursor = 0
            if t + 1 + w <= T:
                pred_windows.append(invert_normalizer(norm, window))
                true_windows.append(frames[t + 1 : t + 1 + w])
    return pred_windows, true_windows


def human_mspe_curve(dynamics, trials, obs_frames=OBS_FRAMES, pred_frames=PRED_FRAMES):
    """MSPE horizon curve for human-motion prediction over both partners."""
    pred, true = [], []
    for trial in trials:
        for stream in (trial.a1, trial.a2):
            if stream.agent_kind != "human":
                continue
            p, t = _replay_human_trial(dynamics, stream.frames, obs_frames, pred_frames)
            pred.extend(p)
            true.extend(t)
    if not pred:
        raise ValueError("no windows scored; trials too short for the protocol")
    return mspe_curve(pred, true)


def run_benchmark(models, baseline, hri_test_trials, j_min, j_max, seed=0, config_hash=None, series_out=None):
    """Score every method on held-out paired trials.

    `models` maps method name -> RobotInteractionModel; the Gaussian
    baseline samples one trajectory per trial from a per-trial seeded rng.
    Entrainment compares factor scores of the ground-truth human task state
    against the main model's predicted robot latents, per action. When
    series_out is a dict it receives action -> (human factor-2 scores,
    robot factor-2 scores) for each action's first trial, for plotting.
    """
    report = {"seed": seed, "config_hash": config_hash, "methods": {}, "entrainment": {"per_action": {}}}
    z_by_action = {}
    d_by_action = {}
    for name, model in models.items():
        all_pred_w, all_true_w = [], []
        per_trial_pred, per_trial_true = [], []
        for idx, trial in enumerate(hri_test_trials):
            pw, tw, pf, tf, z_means = _replay_trial(model, trial)
            all_pred_w.extend(pw)
            all_true_w.extend(tw)
            per_trial_pred.append(np.asarray(pf))
            per_trial_true.append(np.asarray(tf))
            if name == "hme":
                human_norm = apply_normalizer(model.human_normalizer, trial.a1.frames)
                d_by_action.setdefault(trial.action, []).append(
                    extract_dynamics_means(model.dynamics, human_norm)
                )
                z_by_action.setdefault(trial.action, []).append(z_means)
        per_joint = nrmsd_per_joint(per_trial_pred, per_trial_true, j_min, j_max)
        report["methods"][name] = {
            "nrmsd_per_joint": per_joint.tolist(),
            "nrmsd_avg": float(per_joint.mean()),
            "mspe_curve": mspe_curve(all_pred_w, all_true_w).tolist(),
        }

    if baseline is not None:
        per_trial_pred, per_trial_true = [], []
        all_pred_w, all_true_w = [], []
        w = next(iter(models.values())).robot_embedding.window_spec.w if models else 40
        block = OBS_FRAMES + PRED_FRAMES
        for idx, trial in enumerate(hri_test_trials):
            rng = np.random.default_rng([seed, idx])
            robot = trial.a2.frames
            T = robot.shape[0]
            traj = baseline_trajectory_for_trial(baseline, trial.action, T + w, rng)
            mask = np.array([(t % block) >= OBS_FRAMES for t in range(T)])
            per_trial_pred.append(traj[:T][mask])
            per_trial_true.append(robot[mask])
            for t in range(T):
                if (t % block) == OBS_FRAMES - 1 and t + 1 + w <= T:
                    all_pred_w.append(traj[t + 1 : t + 1 + w])
                    all_true_w.append(robot[t + 1 : t + 1 + w])
        per_joint = nrmsd_per_joint(per_trial_pred, per_trial_true, j_min, j_max)
        report["methods"]["gaussian"] = {
            "nrmsd_per_joint": per_joint.tolist(),
            "nrmsd_avg": float(per_joint.mean()),
            "mspe_curve": mspe_curve(all_pred_w, all_true_w).tolist(),
        }

    for action in sorted(z_by_action):
        corrs, lags, thresholds = [], [], []
        for d_seq, z_seq in zip(d_by_action[action], z_by_action[action]):
            score = entrainment_score(d_seq, z_seq)
            corrs.append(score["factor2_corr"])
            lags.append(score["factor2_lag"])
            _, thr = permutation_threshold(d_seq, z_seq, n_shuffles=1000, seed=seed, factor=1)
            thresholds.append(thr)
        report["entrainment"]["per_action"][action] = {
            "factor2_corr": float(np.mean(corrs)),
            "lag": int(np.median(lags)),
            "permutation95": float(np.mean(thresholds)),
        }
        if series_out is not None:
            fa_h = factor_analysis(d_by_action[action][0])
            fa_r = factor_analysis(z_by_action[action][0])
            series_out[action] = (fa_h.scores[:, 1], fa_r.scores[:, 1])
    return report


def validate_report(report):
    """Raise jsonschema.ValidationError unless the report matches the schema."""
    import importlib.resources

    import jsonschema

    schema = json.loads(
        importlib.resources.files("duet.protocol").joinpath("report.schema.json").read_text()
    )
    jsonschema.Draft202012Validator(schema).validate(report)


def write_report(report, json_path, csv_path):
    """Persist the benchmark report as JSON plus a flat CSV for plotting."""
    validate_report(report)
    atomic_write_text(json_path, json.dumps(report, indent=2) + "\n")
    rows = [("section", "name", "key", "index", "value")]
    for method, metrics in sorted(report.get("methods", {}).items()):
        rows.append(("methods", method, "nrmsd_avg", "", repr(metrics["nrmsd_avg"])))
        for j, v in enumerate(metrics["nrmsd_per_joint"]):
            rows.append(("methods", method, "nrmsd_per_joint", str(j), repr(v)))
        for k, v in enumerate(metrics["mspe_curve"]):
            rows.append(("methods", method, "mspe_curve", str(k + 1), repr(v)))
    for action, score in sorted(report.get("entrainment", {}).get("per_action", {}).items()):
        rows.append(("entrainment", action, "factor2_corr", "", repr(score["factor2_corr"])))
        rows.append(("entrainment", action, "lag", "", repr(score["lag"])))
        if "permutation95" in score:
            rows.append(("entrainment", action, "permutation95", "", repr(score["permutation95"])))
    lines = []
    for row in rows:
        out = [str(c) for c in row]
        lines.append(",".join(out))
    atomic_write_text(csv_path, "\n".join(lines) + "\n")
