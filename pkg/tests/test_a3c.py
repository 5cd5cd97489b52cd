import csv
import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from trafficrl.a3c import (
    GREEN_CHOICES,
    BanditEnv,
    GreenPlan,
    SharedParameterStore,
    SignalEnv,
    TrainConfig,
    action_to_plan,
    clip_by_global_norm,
    compute_returns_advantages,
    plan_violation,
    train,
)
from trafficrl.a3c.actions import plan_to_action
from trafficrl.errors import ArgumentError, ConfigError
from trafficrl.nn import softmax

SMALL = dict(hidden=8, channels=2, episode_duration=600, window=90)


def small(**kw):
    return TrainConfig(**{**SMALL, **kw})


# ------------------------------------------------------------------ actions
@pytest.mark.parametrize("idx, greens", [([0, 0, 0, 0], (20, 20, 20, 20)), ([8, 8, 8, 8], (60, 60, 60, 60)),
                                         ([2, 4, 6, 8], (30, 40, 50, 60))])
def test_action_to_plan(idx, greens):
    plan = action_to_plan(idx)
    assert plan.greens == greens
    assert plan_to_action(greens) == idx


@pytest.mark.parametrize("idx", [[9, 0, 0, 0], [-1, 0, 0, 0], [0, 0, 0]])
def test_action_out_of_range(idx):
    with pytest.raises(ArgumentError):
        action_to_plan(idx)


def test_plan_invariants():
    assert GreenPlan((60, 60, 60, 60)).cycle == 240
    assert plan_violation((65, 20, 20, 20)) is not None
    assert plan_violation((60, 60, 60, 60), threshold=200) is not None
    with pytest.raises(ArgumentError):
        GreenPlan((22, 20, 20, 20))


@given(st.lists(st.integers(0, 8), min_size=4, max_size=4))
def test_every_action_is_a_valid_plan(idx):
    plan = action_to_plan(idx)
    assert all(g in GREEN_CHOICES for g in plan.greens) and sum(plan.greens) <= 240


# ------------------------------------------------------------------ returns
def direct_returns(rewards, gamma, bootstrap):
    n = len(rewards)
    return [sum(gamma ** (k - i) * rewards[k] for k in range(i, n)) + gamma ** (n - i) * bootstrap for i in range(n)]


def test_return_examples():
    r, a = compute_returns_advantages([1.0], [0.0], 0.9, 0.0)
    assert r.tolist() == [1.0] and a.tolist() == [1.0]
    r, a = compute_returns_advantages([1.0, 1.0], [0.0, 0.0], 0.5, 1.0)
    assert r.tolist() == [1.75, 1.5] and a.tolist() == [1.75, 1.5]


def test_returns_match_direct_sum_on_random_segments():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        n = int(rng.integers(1, 12))
        rewards = rng.normal(size=n)
        values = rng.normal(size=n)
        gamma = float(rng.uniform(0.01, 1.0))
        boot = float(rng.normal())
        r, a = compute_returns_advantages(rewards, values, gamma, boot)
        oracle = np.array(direct_returns(rewards.tolist(), gamma, boot))
        assert np.abs(r - oracle).max() <= 1e-12
        assert np.abs(a - (oracle - values)).max() <= 1e-12


def test_empty_segment_rejected():
    with pytest.raises(ArgumentError):
        compute_returns_advantages([], [], 0.9, 0.0)


# ------------------------------------------------------------------ store
@given(st.floats(0.1, 100))
def test_clip_by_global_norm(max_norm):
    rng = np.random.default_rng(int(max_norm * 1000))
    grads = {"a": rng.normal(size=(3, 4)) * 50, "b": rng.normal(size=5)}
    clipped, norm = clip_by_global_norm(grads, max_norm)
    new = np.sqrt(sum((g ** 2).sum() for g in clipped.values()))
    assert new <= max_norm * (1 + 1e-12) or np.isclose(new, norm)
    scale = clipped["a"].ravel()[0] / grads["a"].ravel()[0]
    assert np.allclose(clipped["b"], grads["b"] * scale)


def test_store_counts_and_copies():
    store = SharedParameterStore({"w": np.ones(3)}, learning_rate=0.1)
    params, n = store.snapshot()
    params["w"][:] = 99
    assert store.snapshot()[0]["w"].tolist() == [1, 1, 1] and n == 0
    store.apply({"w": np.ones(3)}, worker_id=2)
    store.apply({"w": -np.ones(3)}, worker_id=5)
    assert store.updates == 2
    assert dict(store.submitted) == {2: 1, 5: 1}


# ------------------------------------------------------------------ config
def test_config_nested_and_errors():
    cfg = TrainConfig.from_mapping({"reward": {"aggregate": "sum", "global_fusion": "on"},
                                    "nn": {"shared_trunk": False}, "gamma": 0.9}, seed=4)
    assert (cfg.reward_aggregate, cfg.coordination, cfg.shared_trunk, cfg.gamma, cfg.seed) == ("sum", True, False,
                                                                                              0.9, 4)
    with pytest.raises(ConfigError, match="unknown"):
        TrainConfig.from_mapping({"gama": 0.9})
    for bad in (dict(gamma=0), dict(t_max=0), dict(regime="dqn"), dict(coordination="maybe"), dict(value_coeff=0)):
        with pytest.raises(ConfigError):
            TrainConfig(**bad)


# ------------------------------------------------------------------ training
def test_single_worker_is_deterministic():
    cfg = small(seed=3, total_epochs=40)
    a = [r.key() for r in train("single-asym", cfg).records]
    b = [r.key() for r in train("single-asym", cfg).records]
    assert a and a == b


def test_single_writes_one_checkpoint(tmp_path):
    res = train("single", small(total_epochs=12), out_dir=tmp_path)
    assert [p.name for p in tmp_path.glob("*.ckpt")] == ["agent.ckpt"]
    with open(tmp_path / "metrics.csv") as fh:
        header = next(csv.reader(fh))
    assert header[:3] == ["t_sec", "avg_delay_s_per_km", "avg_density_veh_per_km"]
    assert header[-7:] == ["policy_loss", "value_loss", "entropy", "mean_reward", "worker", "node", "update"]
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["config"]["seed"] == 0 and manifest["networks"]["agent"]["param_count"] > 0
    assert res.plan_violations == []


def test_inrl_subset_writes_four_checkpoints(tmp_path):
    cfg = small(regime="inrl", subset=["A", "B", "C", "D"], total_epochs=3)
    res = train("bengaluru6", cfg, out_dir=tmp_path)
    assert sorted(p.name for p in tmp_path.glob("*.ckpt")) == [f"agent_{n}.ckpt" for n in "ABCD"]
    assert len(res.stores) == 4


def test_shared_async_one_checkpoint_four_workers(tmp_path):
    cfg = small(regime="shared_async", total_epochs=10)
    res = train("corridor4", cfg, out_dir=tmp_path)
    assert [p.name for p in tmp_path.glob("*.ckpt")] == ["agent.ckpt"]
    assert len(res.workers) == 4
    store = res.stores["agent"]
    assert store.updates == sum(store.submitted.values()) == len(res.records)
    assert {r.worker_id for r in res.records} == {0, 1, 2, 3}


def test_round_robin_shared_async_is_reproducible():
    cfg = small(regime="shared_async", total_epochs=10, async_mode="round_robin", seed=2)
    a = [r.key() for r in train("corridor4", cfg).records]
    b = [r.key() for r in train("corridor4", cfg).records]
    assert a == b


def test_regime_scenario_mismatch():
    with pytest.raises(ConfigError):
        train("corridor4", small(regime="single"))
    with pytest.raises(ConfigError):
        train("single", small(regime="inrl"))


class FlakyEnv(SignalEnv):
    def advance(self, plans):
        if self.sim.t > 200:
            raise RuntimeError("detector failure")
        return super().advance(plans)


def test_failing_worker_does_not_stop_others():
    cfg = small(regime="shared_async", total_epochs=10)

    def factory(w):
        kind = FlakyEnv if w == 1 else SignalEnv
        return kind("corridor4", observation="multi", seed=w, episode_duration=600)

    res = train("corridor4", cfg, env_factory=factory)
    assert "detector failure" in res.manifest["worker_errors"][1]
    assert {0, 2, 3} <= {r.worker_id for r in res.records}


def test_coordination_reward_is_fused():
    env = SignalEnv("corridor4", observation="multi", coordination=True, seed=1, episode_duration=900)
    env.reset()
    seen = 0
    decisions = env.advance({n: (20, 20, 20, 20) for n in env.controlled})
    while not decisions[0].done:
        latest = [env._latest[n] for n in env.controlled]
        g = sum(latest) / len(latest)
        for d in decisions:
            assert d.reward.raw == pytest.approx(0.5 * g + 0.5 * d.individual.clipped)
            assert d.reward.clipped in (-1, 0, 1)
            if len(set(latest)) == 1:
                assert d.reward.clipped == d.individual.clipped
            seen += 1
        decisions = env.advance({d.node: (30, 30, 30, 30) for d in decisions})
    assert seen > 0


def _bandit_entropy(entropy_coeff, seed):
    cfg = TrainConfig(seed=seed, learning_rate=3e-4, total_epochs=800, entropy_coeff=entropy_coeff)
    res = train("single", cfg, env_factory=lambda w: BanditEnv())
    net = res.nets["agent"]
    logits, _, _ = net.forward(BanditEnv().reset()[0].observation, net.initial_state())
    p = softmax(logits)
    return float(-(p * np.log(p)).sum(axis=1).mean())


def test_entropy_bonus_keeps_policy_broader():
    high = [_bandit_entropy(0.5, s) for s in range(5)]
    none = [_bandit_entropy(0.0, s) for s in range(5)]
    assert np.mean(high) > np.mean(none)
    assert sum(h > n for h, n in zip(high, none)) >= 4
