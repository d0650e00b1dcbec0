"""Clipped-surrogate PPO over separate policy and value MLPs, plus generation."""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .constraints import ConstraintSet, is_valid, parse_constraint_set
from .environment import (
    EnvSpec,
    EpisodeTrace,
    GraphEnv,
    Representation,
    n_actions,
    observation_shape,
)
from .errors import ConfigurationError, TrainingError
from .graph_model import GraphConfig, GraphState
from .mlp import MLP, Adam, clip_grad_norm

log = logging.getLogger(__name__)

HIDDEN = (128, 256, 128)
FORMAT_VERSION = 1
MAGIC = b"GRAPHPCG"


class PolicyModel:
    """Policy MLP (logits) and value MLP (scalar), both ``obs -> 128 -> 256 -> 128``."""

    def __init__(self, env_spec: EnvSpec, representation: Representation | str, seed: int = 0,
                 hidden: Sequence[int] = HIDDEN, dtype=np.float32, _init: bool = True):
        self.env_spec = env_spec
        self.representation = Representation(representation)
        self.hidden = tuple(hidden)
        self.obs_shape = observation_shape(
            self.representation, env_spec.max_size, env_spec.constraint_set.alphabet.n_symbols
        )
        self.obs_dim = int(np.prod(self.obs_shape))
        self.n_actions = n_actions(self.representation, env_spec.max_size)
        rng = np.random.default_rng(seed) if _init else None
        self.policy = MLP((self.obs_dim, *self.hidden, self.n_actions), rng, out_gain=0.01, dtype=dtype)
        self.value = MLP((self.obs_dim, *self.hidden, 1), rng, out_gain=1.0, dtype=dtype)
        self.metadata: dict = {"steps_trained": 0, "seed": seed, "spec_hash": spec_hash(env_spec, self.representation)}
        self.train_spec: dict | None = None

    @property
    def params(self) -> list[np.ndarray]:
        return self.policy.params + self.value.params

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.params)

    def astype(self, dtype) -> "PolicyModel":
        out = PolicyModel(self.env_spec, self.representation, hidden=self.hidden, _init=False)
        out.policy = self.policy.copy(dtype)
        out.value = self.value.copy(dtype)
        out.metadata = dict(self.metadata)
        out.train_spec = self.train_spec
        return out

    def flat_obs(self, obs: np.ndarray) -> np.ndarray:
        obs = np.asarray(obs)
        if obs.shape == self.obs_shape:
            return obs.reshape(1, -1)
        if obs.shape[1:] == self.obs_shape:
            return obs.reshape(obs.shape[0], -1)
        if obs.ndim == 2 and obs.shape[1] == self.obs_dim:
            return obs
        raise ValueError(f"observation shape {obs.shape} does not match model input {self.obs_shape}")

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(model_to_bytes(self))

    @classmethod
    def load(cls, path: str | Path) -> "PolicyModel":
        return model_from_bytes(Path(path).read_bytes())


def spec_hash(env_spec: EnvSpec, representation) -> str:
    payload = json.dumps(
        {"env": env_spec.to_dict(representation), "constraints": env_spec.constraint_set.to_dict()},
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


@dataclass
class ActionDistribution:
    log_probs: np.ndarray  # (B, A)

    @property
    def probs(self) -> np.ndarray:
        return np.exp(self.log_probs)

    def entropy(self) -> np.ndarray:
        return -(self.probs * self.log_probs).sum(axis=-1)

    def mode(self) -> np.ndarray:
        return self.log_probs.argmax(axis=-1)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        cdf = np.cumsum(self.probs, axis=-1)
        u = rng.random(cdf.shape[0])[:, None] * cdf[:, -1:]
        return np.minimum((cdf <= u).sum(axis=-1), cdf.shape[1] - 1)

    def log_prob(self, actions: np.ndarray) -> np.ndarray:
        return self.log_probs[np.arange(len(actions)), actions]


def policy_forward(model: PolicyModel, obs: np.ndarray) -> tuple[ActionDistribution, np.ndarray]:
    """Action distribution and value estimate for one observation or a batch."""
    x = model.flat_obs(obs)
    logits = model.policy.predict(x)
    values = model.value.predict(x)[:, 0]
    return ActionDistribution(log_softmax(logits.astype(np.float64))), values


@dataclass
class TrainSpec:
    env_spec: EnvSpec
    representation: Representation | str
    total_steps: int
    rollout_length: int = 1250
    learning_rate: float = 1e-3
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_range: float = 0.2
    ent_coef: float = 0.01
    vf_coef: float = 0.5
    n_epochs: int = 4
    minibatch_size: int = 125
    max_grad_norm: float = 0.5
    seed: int = 0
    n_envs: int = 10
    lr_schedule: str = "constant"  # or "linear": decays to zero over training

    def __post_init__(self):
        self.representation = Representation(self.representation)
        if self.lr_schedule not in ("constant", "linear"):
            raise ValueError(f"unknown learning-rate schedule {self.lr_schedule!r}")
        if self.total_steps <= 0 or self.total_steps % self.rollout_length:
            raise ValueError(
                f"total steps {self.total_steps} must be a positive multiple of the "
                f"rollout length {self.rollout_length}"
            )
        if self.rollout_length % self.n_envs:
            raise ValueError(f"rollout length {self.rollout_length} must be divisible by n_envs {self.n_envs}")
        if self.rollout_length % self.minibatch_size:
            raise ValueError("rollout length must be divisible by the minibatch size")

    @property
    def n_updates(self) -> int:
        return self.total_steps // self.rollout_length

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k != "env_spec"}
        d["representation"] = str(self.representation)
        d["env_spec"] = self.env_spec.to_dict(self.representation)
        return d


@dataclass
class RolloutBuffer:
    """Transitions laid out ``(steps, n_envs)``; ``dones[t]`` marks that the
    episode ended with step ``t``."""

    obs: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    rewards: np.ndarray
    values: np.ndarray
    dones: np.ndarray
    last_values: np.ndarray
    episode_returns: list = field(default_factory=list)
    episode_valid: list = field(default_factory=list)
    episode_iterations: list = field(default_factory=list)

    def __len__(self) -> int:
        return self.rewards.size

    @classmethod
    def empty(cls, steps: int, n_envs: int, obs_dim: int) -> "RolloutBuffer":
        return cls(
            obs=np.zeros((steps, n_envs, obs_dim), dtype=np.float32),
            actions=np.zeros((steps, n_envs), dtype=np.int64),
            log_probs=np.zeros((steps, n_envs)),
            rewards=np.zeros((steps, n_envs)),
            values=np.zeros((steps, n_envs)),
            dones=np.zeros((steps, n_envs), dtype=bool),
            last_values=np.zeros(n_envs),
        )


def collect_rollout(envs: GraphEnv | Sequence[GraphEnv], model: PolicyModel, length: int,
                    rng: np.random.Generator) -> RolloutBuffer:
    """Run ``length`` transitions spread evenly over ``envs``.

    Environments without a running episode are reset with a freshly sampled
    configuration; running episodes continue across calls.
    """
    if isinstance(envs, GraphEnv):
        envs = [envs]
    n_envs = len(envs)
    if length % n_envs:
        raise ValueError(f"length {length} not divisible by {n_envs} environments")
    steps = length // n_envs
    buf = RolloutBuffer.empty(steps, n_envs, model.obs_dim)
    obs = np.empty((n_envs, model.obs_dim), dtype=np.float32)
    for e, env in enumerate(envs):
        if env.done:
            env.reset()
        obs[e] = env.observe().reshape(-1)
    for t in range(steps):
        dist, values = policy_forward(model, obs)
        actions = dist.sample(rng)
        buf.obs[t] = obs
        buf.actions[t] = actions
        buf.log_probs[t] = dist.log_prob(actions)
        buf.values[t] = values
        for e, env in enumerate(envs):
            out = env.step(int(actions[e]))
            buf.rewards[t, e] = out.reward
            if out.done:
                buf.dones[t, e] = True
                buf.episode_returns.append(env.episode_return)
                buf.episode_valid.append(bool(out.info["valid"]))
                buf.episode_iterations.append(out.info["iterations"])
                env.reset()
            obs[e] = env.observe().reshape(-1)
    _, buf.last_values = policy_forward(model, obs)
    return buf


def gae(buffer: RolloutBuffer, gamma: float = 0.99, lam: float = 0.95, normalize: bool = False):
    """Generalized advantage estimates and returns, reset at episode ends.

    Returns ``(advantages, returns)`` with ``returns = advantages + values``
    (computed before any normalisation).
    """
    rewards, values, dones = buffer.rewards, buffer.values, buffer.dones
    steps = rewards.shape[0]
    adv = np.zeros_like(rewards, dtype=np.float64)
    last = np.zeros(rewards.shape[1:])
    for t in reversed(range(steps)):
        next_values = buffer.last_values if t == steps - 1 else values[t + 1]
        nonterminal = 1.0 - dones[t]
        delta = rewards[t] + gamma * next_values * nonterminal - values[t]
        last = delta + gamma * lam * nonterminal * last
        adv[t] = last
    returns = adv + values
    if normalize:
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)
    return adv, returns


@dataclass
class Batch:
    obs: np.ndarray
    actions: np.ndarray
    old_log_probs: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray


def surrogate_loss(model: PolicyModel, batch: Batch, clip_range=0.2, ent_coef=0.01, vf_coef=0.5,
                   with_grad: bool = True):
    """PPO loss ``-clipped_surrogate - ent_coef * entropy + vf_coef * mse`` on a
    minibatch; returns ``(loss, grads, stats)`` (``grads`` is None without
    ``with_grad``).  Gradients follow the parameter order of ``model.params``."""
    B = len(batch.actions)
    x = batch.obs
    logits, pacts = model.policy.forward(x)
    values, vacts = model.value.forward(x)
    values = values[:, 0].astype(np.float64)
    logp_all = log_softmax(logits.astype(np.float64))
    p = np.exp(logp_all)
    idx = np.arange(B)
    logp = logp_all[idx, batch.actions]
    ratio = np.exp(logp - batch.old_log_probs)
    adv = batch.advantages
    clipped = np.clip(ratio, 1 - clip_range, 1 + clip_range)
    unclipped_obj = ratio * adv
    clipped_obj = clipped * adv
    pg_loss = -np.mean(np.minimum(unclipped_obj, clipped_obj))
    entropy_each = -(p * logp_all).sum(axis=1)
    entropy = entropy_each.mean()
    v_err = values - batch.returns
    v_loss = np.mean(v_err ** 2)
    loss = pg_loss - ent_coef * entropy + vf_coef * v_loss
    stats = {
        "loss": float(loss),
        "pg_loss": float(pg_loss),
        "value_loss": float(v_loss),
        "entropy": float(entropy),
        "clip_fraction": float(np.mean(np.abs(ratio - 1) > clip_range)),
        "approx_kl": float(np.mean((ratio - 1) - (logp - batch.old_log_probs))),
    }
    if not with_grad:
        return loss, None, stats

    active = unclipped_obj <= clipped_obj
    g_logp = np.where(active, -ratio * adv, 0.0) / B
    onehot = np.zeros_like(p)
    onehot[idx, batch.actions] = 1.0
    d_logits = g_logp[:, None] * (onehot - p)
    # dH/dz_i = -p_i (log p_i + H)
    d_logits += (ent_coef / B) * p * (logp_all + entropy_each[:, None])
    d_values = (vf_coef * 2.0 / B) * v_err
    dtype = model.policy.params[0].dtype
    grads = model.policy.backward(pacts, d_logits.astype(dtype))
    grads += model.value.backward(vacts, d_values[:, None].astype(dtype))
    return loss, grads, stats


class PPOTrainer:
    """Owns the optimiser and sampling RNG across updates."""

    def __init__(self, model: PolicyModel, spec: TrainSpec, rng: np.random.Generator | None = None):
        self.model = model
        self.spec = spec
        self.rng = rng if rng is not None else np.random.default_rng(spec.seed)
        self.optimizer = Adam(model.params, lr=spec.learning_rate)

    def update(self, buffer: RolloutBuffer) -> dict:
        spec = self.spec
        adv, returns = gae(buffer, spec.gamma, spec.gae_lambda)
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)
        obs = buffer.obs.reshape(-1, buffer.obs.shape[-1])
        flat = Batch(
            obs,
            buffer.actions.reshape(-1),
            buffer.log_probs.reshape(-1),
            adv.reshape(-1),
            returns.reshape(-1),
        )
        n = len(flat.actions)
        history = []
        for _ in range(spec.n_epochs):
            order = self.rng.permutation(n)
            for start in range(0, n, spec.minibatch_size):
                sel = order[start:start + spec.minibatch_size]
                mb = Batch(flat.obs[sel], flat.actions[sel], flat.old_log_probs[sel],
                           flat.advantages[sel], flat.returns[sel])
                loss, grads, stats = surrogate_loss(
                    self.model, mb, spec.clip_range, spec.ent_coef, spec.vf_coef
                )
                if not math.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads):
                    raise TrainingError(f"non-finite loss or gradient: {stats}")
                stats["grad_norm"] = clip_grad_norm(grads, spec.max_grad_norm)
                self.optimizer.step(self.model.params, grads)
                history.append(stats)
        return {k: float(np.mean([h[k] for h in history])) for k in history[0]}


def ppo_update(model: PolicyModel, buffer: RolloutBuffer, spec: TrainSpec,
               trainer: PPOTrainer | None = None) -> tuple[PolicyModel, dict]:
    trainer = trainer or PPOTrainer(model, spec)
    return model, trainer.update(buffer)


LOG_FIELDS = ("update", "steps", "mean_reward", "validity_rate", "entropy")


def make_envs(spec: TrainSpec) -> list[GraphEnv]:
    seeds = np.random.SeedSequence(spec.seed).spawn(spec.n_envs)
    return [GraphEnv(spec.env_spec, spec.representation, seed=s) for s in seeds]


def train(spec: TrainSpec, callback: Callable[[dict], None] | None = None,
          log_path: str | Path | None = None) -> tuple[PolicyModel, list[dict]]:
    """Alternate rollouts and PPO updates until ``spec.total_steps``.

    Returns the model and one log row per update.  ``callback`` receives
    each row as it is produced.
    """
    model = PolicyModel(spec.env_spec, spec.representation, seed=spec.seed)
    model.train_spec = spec.to_dict()
    envs = make_envs(spec)
    trainer = PPOTrainer(model, spec, np.random.default_rng(np.random.SeedSequence(spec.seed).spawn(spec.n_envs + 1)[-1]))
    rows = []
    steps = 0
    for update in range(1, spec.n_updates + 1):
        if spec.lr_schedule == "linear":
            trainer.optimizer.lr = spec.learning_rate * (1.0 - (update - 1) / spec.n_updates)
        buffer = collect_rollout(envs, model, spec.rollout_length, trainer.rng)
        steps += spec.rollout_length
        stats = trainer.update(buffer)
        n_ep = len(buffer.episode_returns)
        row = {
            "update": update,
            "steps": steps,
            "mean_reward": float(np.mean(buffer.episode_returns)) if n_ep else float("nan"),
            "validity_rate": float(np.mean(buffer.episode_valid)) if n_ep else float("nan"),
            "entropy": stats["entropy"],
        }
        rows.append(row)
        log.debug("update %d: %s", update, row)
        if callback is not None:
            callback(row)
    model.metadata["steps_trained"] = steps
    if log_path is not None:
        write_training_log(rows, log_path)
    return model, rows


def write_training_log(rows: list[dict], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=LOG_FIELDS, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: (f"{row[k]:.6f}" if isinstance(row[k], float) else row[k]) for k in LOG_FIELDS})


def generate(model: PolicyModel, config: GraphConfig | None = None, seed=None, greedy: bool = True,
             record_observations: bool = False, env: GraphEnv | None = None) -> tuple[GraphState, EpisodeTrace]:
    """Run one episode from random noise with the model's policy.

    ``config=None`` samples a configuration as during training.  Greedy
    (argmax) actions by default; ``greedy=False`` samples from the policy.
    A starting graph that is already valid ends the episode at once.
    """
    env = env or GraphEnv(model.env_spec, model.representation)
    rng = np.random.default_rng(seed)
    env.rng = rng
    if config is not None:
        model.env_spec.constraint_set.check_feasible(config, model.env_spec.max_size)
    state, obs = env.reset(config)
    trace = EpisodeTrace(config=env.config)
    if env.valid:
        trace.termination_cause = "valid"
        trace.valid = True
        return state, trace
    while True:
        # inference needs the policy head only
        dist = ActionDistribution(log_softmax(model.policy.predict(model.flat_obs(obs)).astype(np.float64)))
        action = int(dist.mode()[0]) if greedy else int(dist.sample(rng)[0])
        if record_observations:
            trace.observations.append(obs)
        out = env.step(action)
        trace.actions.append(action)
        trace.rewards.append(out.reward)
        trace.changed.append(out.info["changed"])
        obs = out.observation
        if out.done:
            break
    trace.termination_cause = out.info["termination_cause"]
    trace.valid = bool(out.info["valid"])
    trace.iterations = env.iterations
    trace.changes = env.changes
    return env.state, trace


def model_to_bytes(model: PolicyModel) -> bytes:
    params = [p.astype("<f4") for p in model.params]
    header = {
        "format_version": FORMAT_VERSION,
        "representation": str(model.representation),
        "hidden": list(model.hidden),
        "obs_shape": list(model.obs_shape),
        "n_actions": model.n_actions,
        "layer_shapes": [list(p.shape) for p in params],
        "env_spec": model.env_spec.to_dict(model.representation),
        "constraints": model.env_spec.constraint_set.to_dict(),
        "train_spec": model.train_spec,
        "metadata": model.metadata,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    body = b"".join(p.tobytes() for p in params)
    return MAGIC + struct.pack("<II", FORMAT_VERSION, len(blob)) + blob + body


def model_from_bytes(data: bytes) -> PolicyModel:
    if data[:len(MAGIC)] != MAGIC:
        raise ValueError("not a model artifact")
    off = len(MAGIC)
    version, hlen = struct.unpack_from("<II", data, off)
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {version}")
    off += 8
    header = json.loads(data[off:off + hlen].decode("utf-8"))
    off += hlen
    cs: ConstraintSet = parse_constraint_set(
        json.dumps(header["constraints"]), source=header["env_spec"].get("constraints_path")
    )
    env_spec = EnvSpec.from_dict(header["env_spec"], cs)
    model = PolicyModel(env_spec, header["representation"], hidden=header["hidden"], _init=False)
    params = []
    for shape in header["layer_shapes"]:
        count = int(np.prod(shape))
        arr = np.frombuffer(data, dtype="<f4", count=count, offset=off).reshape(shape)
        params.append(arr.astype(np.float32))
        off += 4 * count
    if off != len(data):
        raise ValueError("trailing bytes in model artifact")
    n_policy = 2 * model.policy.n_layers
    model.policy.params = params[:n_policy]
    model.value.params = params[n_policy:]
    model.metadata = header["metadata"]
    model.train_spec = header["train_spec"]
    return model


def load_model(path: str | Path) -> PolicyModel:
    return PolicyModel.load(path)


def check_config(model: PolicyModel, config: GraphConfig) -> None:
    if config.size > model.env_spec.max_size:
        raise ConfigurationError(
            f"configuration size {config.size} exceeds the model's max size {model.env_spec.max_size}"
        )
    model.env_spec.constraint_set.check_feasible(config)

