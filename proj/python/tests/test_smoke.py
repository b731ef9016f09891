import math

import numpy as np
import pytest

import rtidp


def test_schedule_arrays():
    s = rtidp.make_schedule("squared_cosine", 100)
    assert s.total_steps == 100
    abar = np.asarray(s.alpha_bars)
    alphas = np.asarray(s.alphas)
    assert abar[0] == 1.0
    np.testing.assert_allclose(abar[1:], np.cumprod(alphas[1:]), rtol=0, atol=1e-12)
    assert np.all(np.diff(abar) < 0)


def test_ck_reduces_to_one_without_lipschitz():
    s = rtidp.make_schedule("linear", 50)
    assert all(rtidp.compute_ck(s, 0.0, k) == 1.0 for k in range(1, 51))
    c = [rtidp.compute_ck(s, 2.0, k) for k in (1, 2, 3)]
    assert rtidp.compute_c(s, 2.0, 3) == pytest.approx(math.prod(c), rel=1e-12)
    with pytest.raises(ValueError):
        rtidp.compute_ck(s, 1.0, 0)


def test_env_and_expert_round():
    env = rtidp.make_env("reach2d_bimodal")
    env.reset(3)
    for _ in range(env.episode_cap):
        env.step(env.expert_action())
    assert env.score() == 1.0
    with pytest.raises(ValueError):
        rtidp.make_env("no_such_env")


def test_dataset_roundtrip():
    data = rtidp.generate_demos("pick_discrete", 3, seed=1)
    blob = data.serialize()
    again = rtidp.deserialize_dataset(blob)
    assert again.serialize() == blob
    assert again.num_pairs() == data.num_pairs()
    bad = b"X" + blob[1:]
    with pytest.raises(ValueError):
        rtidp.deserialize_dataset(bad)


def test_train_sample_and_rollout():
    data = rtidp.generate_demos("reach2d_bimodal", 8, seed=2)
    policy = rtidp.train_policy(data, hidden=[32, 32], epochs=2, total_steps=20)
    blob = policy.serialize()
    assert rtidp.deserialize_checkpoint(blob).serialize() == blob
    assert len(rtidp.git_blob_hash(blob)) == 40

    cond = np.zeros(policy.cond_dim)
    a = policy.full_denoise(cond, seed=5)
    assert a.shape == (policy.horizon, policy.action_dim)
    b = policy.truncated_denoise(cond, np.zeros_like(a), list(range(20, 0, -1)), seed=5)
    assert np.isfinite(b).all()

    env = rtidp.make_env("reach2d_bimodal")
    env.reset(11)
    r = rtidp.rti_rollout(env, policy, steps=[3, 2, 1], seed=1, episode_cap=10)
    assert r["n_predictions"] == 10
    assert r["env_steps"] == 10
    assert 0.0 <= r["score"] <= 1.0


def test_shift_guess_repeats_last_row():
    chunk = np.arange(8.0).reshape(4, 2)
    shifted = rtidp.shift_guess(chunk)
    np.testing.assert_array_equal(shifted[:3], chunk[1:])
    np.testing.assert_array_equal(shifted[3], chunk[3])


def test_config_keys_cover_sections():
    keys = rtidp.config_keys()
    sections = {k.split(".")[0] for k in keys if "." in k}
    assert sections == {"env", "model", "schedule", "sampler", "train", "bench", "contract"}
    assert "seed" in keys
