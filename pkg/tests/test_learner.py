import io
import math

import numpy as np
import pytest

from graphpcg.environment import EnvSpec, GraphEnv
from graphpcg.errors import ConfigurationError
from graphpcg.learner import (
    LOG_FIELDS,
    ActionDistribution,
    Batch,
    PolicyModel,
    RolloutBuffer,
    TrainSpec,
    check_config,
    collect_rollout,
    gae,
    generate,
    log_softmax,
    model_from_bytes,
    model_to_bytes,
    policy_forward,
    surrogate_loss,
    train,
    write_training_log,
)
from graphpcg.mlp import MLP, Adam, clip_grad_norm


@pytest.fixture(scope="module")
def spec1(sets):
    return EnvSpec(5, sets["set1"])


def flat(params):
    return np.concatenate([p.ravel() for p in params])


def set_flat(model, vec):
    off = 0
    for p in model.params:
        p[...] = vec[off:off + p.size].reshape(p.shape)
        off += p.size


def ten_transition_batch(model, seed=0):
    env = GraphEnv(model.env_spec, model.representation, seed=seed)
    buf = collect_rollout([env], model, 10, np.random.default_rng(seed))
    adv, returns = gae(buf, 0.99, 0.95)
    rng = np.random.default_rng(seed + 1)
    adv = rng.standard_normal(10)
    old = buf.log_probs.reshape(-1).copy()
    # push some ratios out of the clip range, with both advantage signs
    old[:4] += np.array([0.5, -0.5, 0.5, -0.5])
    adv[:4] = np.array([1.0, 1.0, -1.0, -1.0])
    return Batch(buf.obs.reshape(10, -1).astype(np.float64), buf.actions.reshape(-1), old, adv,
                 returns.reshape(-1) + rng.standard_normal(10))


def test_gradient_check(spec1):
    model = PolicyModel(spec1, "graph_wide", seed=3, dtype=np.float64)
    batch = ten_transition_batch(model)
    loss, grads, stats = surrogate_loss(model, batch, 0.2, 0.01, 0.5)
    assert stats["clip_fraction"] > 0
    g = flat(grads)
    theta = flat(model.params)

    def f(vec):
        set_flat(model, vec)
        return surrogate_loss(model, batch, 0.2, 0.01, 0.5, with_grad=False)[0]

    rng = np.random.default_rng(0)
    h = 1e-6
    for _ in range(8):
        d = rng.standard_normal(theta.size)
        d /= np.linalg.norm(d)
        numeric = (f(theta + h * d) - f(theta - h * d)) / (2 * h)
        analytic = g @ d
        assert abs(numeric - analytic) <= 1e-4 * max(abs(numeric), abs(analytic))
    for i in np.argsort(-np.abs(g))[:40]:
        e = np.zeros_like(theta)
        e[i] = h
        numeric = (f(theta + e) - f(theta - e)) / (2 * h)
        assert abs(numeric - g[i]) <= 1e-4 * max(abs(numeric), abs(g[i]))
    set_flat(model, theta)


def test_gradient_check_narrow(sets):
    model = PolicyModel(EnvSpec(4, sets["set2"]), "graph_narrow", seed=5, dtype=np.float64)
    batch = ten_transition_batch(model, seed=4)
    _, grads, _ = surrogate_loss(model, batch, 0.2, 0.01, 0.5)
    g, theta = flat(grads), flat(model.params)

    def f(vec):
        set_flat(model, vec)
        return surrogate_loss(model, batch, 0.2, 0.01, 0.5, with_grad=False)[0]

    d = np.random.default_rng(1).standard_normal(theta.size)
    d /= np.linalg.norm(d)
    numeric = (f(theta + 1e-6 * d) - f(theta - 1e-6 * d)) / 2e-6
    assert abs(numeric - g @ d) <= 1e-4 * abs(numeric)


def gae_oracle(rewards, values, dones, last_values, gamma, lam):
    """Direct sum of discounted TD errors up to the episode end."""
    steps, n_envs = rewards.shape
    out = np.zeros_like(rewards)
    for e in range(n_envs):
        for t in range(steps):
            total, weight = 0.0, 1.0
            for k in range(t, steps):
                nxt = last_values[e] if k == steps - 1 else values[k + 1, e]
                delta = rewards[k, e] + (0.0 if dones[k, e] else gamma * nxt) - values[k, e]
                total += weight * delta
                if dones[k, e]:
                    break
                weight *= gamma * lam
            out[t, e] = total
    return out


def random_buffer(rng, steps=12, n_envs=3):
    buf = RolloutBuffer.empty(steps, n_envs, 4)
    buf.rewards[:] = rng.integers(-4, 10, size=(steps, n_envs))
    buf.values[:] = rng.standard_normal((steps, n_envs))
    buf.dones[:] = rng.random((steps, n_envs)) < 0.25
    buf.last_values[:] = rng.standard_normal(n_envs)
    return buf


@pytest.mark.parametrize("lam", [0.0, 0.95, 1.0])
def test_gae_matches_oracle(rng, lam):
    buf = random_buffer(rng)
    adv, returns = gae(buf, 0.99, lam)
    expected = gae_oracle(buf.rewards, buf.values, buf.dones, buf.last_values, 0.99, lam)
    np.testing.assert_allclose(adv, expected, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(returns, adv + buf.values)


def test_gae_lambda_one_is_monte_carlo(rng):
    buf = random_buffer(rng, steps=8, n_envs=1)
    buf.dones[:] = False
    buf.dones[-1] = True
    _, returns = gae(buf, 0.9, 1.0)
    r = buf.rewards[:, 0]
    mc = [sum(0.9 ** (k - t) * r[k] for k in range(t, 8)) for t in range(8)]
    np.testing.assert_allclose(returns[:, 0], mc)


def test_gae_normalize(rng):
    adv, _ = gae(random_buffer(rng), normalize=True)
    assert abs(adv.mean()) < 1e-9
    assert adv.std() == pytest.approx(1.0, rel=1e-6)


@pytest.mark.parametrize("rep, support", [("graph_narrow", 2), ("graph_wide", 20), ("pcgrl_wide", 50)])
def test_distribution_support(spec1, rep, support):
    model = PolicyModel(spec1, rep, seed=0)
    env = GraphEnv(spec1, rep, seed=0)
    _, obs = env.reset()
    dist, values = policy_forward(model, obs)
    assert dist.log_probs.shape == (1, support)
    assert dist.probs.sum() == pytest.approx(1.0, abs=1e-12)
    assert values.shape == (1,)
    assert 0 < dist.entropy()[0] <= math.log(support) + 1e-9


def test_sample_frequencies():
    logits = np.log(np.array([[0.1, 0.6, 0.3]]))
    dist = ActionDistribution(log_softmax(np.repeat(logits, 20000, axis=0)))
    draws = dist.sample(np.random.default_rng(0))
    freq = np.bincount(draws, minlength=3) / len(draws)
    np.testing.assert_allclose(freq, [0.1, 0.6, 0.3], atol=0.015)
    assert dist.mode()[0] == 1
    np.testing.assert_allclose(dist.log_prob(np.array([2] * 20000)), np.log(0.3))


def test_initialisation(spec1):
    model = PolicyModel(spec1, "graph_wide", seed=0)
    assert model.policy.sizes == (model.obs_dim, 128, 256, 128, 20)
    assert model.value.sizes == (model.obs_dim, 128, 256, 128, 1)
    w = model.policy.params[2].astype(np.float64)
    assert w.shape == (128, 256)
    np.testing.assert_allclose(w @ w.T, 2.0 * np.eye(128), atol=1e-4)
    assert np.abs(model.policy.params[-2]).max() < 0.05
    assert all(p.dtype == np.float32 for p in model.params)


def test_mlp_backward_linear_case():
    rng = np.random.default_rng(0)
    mlp = MLP((3, 2), rng, dtype=np.float64)
    x = rng.standard_normal((5, 3))
    out, acts = mlp.forward(x)
    gw, gb = mlp.backward(acts, np.ones_like(out))
    np.testing.assert_allclose(gw, x.sum(axis=0)[:, None].repeat(2, axis=1))
    np.testing.assert_allclose(gb, [5.0, 5.0])


def test_adam_first_step_is_lr_sign():
    p = [np.array([1.0, -2.0, 3.0])]
    opt = Adam(p, lr=0.1, eps=1e-12)
    opt.step(p, [np.array([0.5, -4.0, 0.0])])
    np.testing.assert_allclose(p[0], [0.9, -1.9, 3.0])


def test_clip_grad_norm():
    grads = [np.array([3.0, 0.0]), np.array([[4.0]])]
    assert clip_grad_norm(grads, 1.0) == pytest.approx(5.0)
    assert np.sqrt(sum((g ** 2).sum() for g in grads)) == pytest.approx(1.0, rel=1e-5)
    small = [np.array([0.1])]
    clip_grad_norm(small, 1.0)
    assert small[0][0] == 0.1


def test_train_spec_arithmetic(spec1):
    assert TrainSpec(spec1, "graph_narrow", 500_000).n_updates == 400
    assert TrainSpec(spec1, "graph_wide", 1_500_000).n_updates == 1200
    with pytest.raises(ValueError, match="multiple"):
        TrainSpec(spec1, "graph_wide", 1000)
    with pytest.raises(ValueError):
        TrainSpec(spec1, "graph_wide", 2500, lr_schedule="cosine")


def test_collect_rollout_layout(spec1):
    model = PolicyModel(spec1, "graph_wide", seed=0)
    envs = [GraphEnv(spec1, "graph_wide", seed=s) for s in range(5)]
    buf = collect_rollout(envs, model, 50, np.random.default_rng(0))
    assert buf.obs.shape == (10, 5, model.obs_dim)
    assert len(buf) == 50
    assert len(buf.episode_returns) == int(buf.dones.sum())
    with pytest.raises(ValueError):
        collect_rollout(envs, model, 52, np.random.default_rng(0))


def test_training_is_deterministic_and_logged(spec1, tmp_path):
    spec = TrainSpec(spec1, "graph_wide", 2500, seed=4)
    m1, rows = train(spec, log_path=tmp_path / "log.csv")
    m2, _ = train(spec)
    assert model_to_bytes(m1) == model_to_bytes(m2)
    assert [r["update"] for r in rows] == [1, 2]
    header = (tmp_path / "log.csv").read_text().splitlines()[0]
    assert header.split(",") == list(LOG_FIELDS)
    assert m1.metadata["steps_trained"] == 2500
    m3, _ = train(TrainSpec(spec1, "graph_wide", 2500, seed=5))
    assert model_to_bytes(m3) != model_to_bytes(m1)


def test_training_changes_parameters(spec1):
    spec = TrainSpec(spec1, "graph_narrow", 1250, seed=0)
    trained, rows = train(spec)
    fresh = PolicyModel(spec1, "graph_narrow", seed=0)
    assert not np.array_equal(flat(trained.params), flat(fresh.params))
    assert np.isfinite(rows[0]["entropy"])


def test_artifact_round_trip(spec1, tmp_path):
    model = PolicyModel(spec1, "pcgrl_wide", seed=2)
    path = tmp_path / "m.gpcg"
    model.save(path)
    again = PolicyModel.load(path)
    assert again.representation == model.representation
    assert again.env_spec.to_dict() == spec1.to_dict()
    assert again.env_spec.constraint_set == spec1.constraint_set
    for a, b in zip(model.params, again.params):
        assert np.array_equal(a, b)
    assert model_to_bytes(again) == path.read_bytes()
    assert again.metadata["spec_hash"] == model.metadata["spec_hash"]


def test_artifact_rejects_garbage(spec1):
    data = model_to_bytes(PolicyModel(spec1, "graph_wide"))
    with pytest.raises(ValueError):
        model_from_bytes(b"NOTAMODEL" + data)
    with pytest.raises(ValueError):
        model_from_bytes(data + b"\0")


def test_generate_respects_config(spec1):
    model = PolicyModel(spec1, "graph_wide", seed=0)
    cfg = spec1.constraint_set.config("U=2,V=2,W=1")
    state, trace = generate(model, cfg, seed=0)
    counts = np.bincount(state.diagonal, minlength=4)
    assert counts.tolist() == [2, 2, 1, 0]
    assert trace.iterations <= spec1.max_iterations
    assert trace.termination_cause in ("valid", "max_changes", "max_iterations")
    state2, trace2 = generate(model, cfg, seed=0)
    assert state2 == state and trace2.actions == trace.actions


def test_generate_oversized_config(spec1):
    model = PolicyModel(spec1, "graph_wide", seed=0)
    with pytest.raises(ConfigurationError):
        check_config(model, spec1.constraint_set.config("U=7"))
    with pytest.raises(ConfigurationError):
        generate(model, spec1.constraint_set.config("U=4,V=1,W=1"))


def test_write_training_log_columns(tmp_path):
    write_training_log([{"update": 1, "steps": 1250, "mean_reward": 1.5, "validity_rate": 0.5, "entropy": 2.0}],
                       tmp_path / "x.csv")
    lines = (tmp_path / "x.csv").read_text().splitlines()
    assert lines[1].split(",")[:2] == ["1", "1250"]
