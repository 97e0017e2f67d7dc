"""Replay buffer contracts: eviction, symmetric sampling, demo seeding."""

import numpy as np
import pytest
from scipy import stats

from distillab.collect import Episode
from distillab.rl import (
    AppendBuffer,
    BufferError,
    ReplayBuffers,
    RingBuffer,
    SOURCE_CODE,
    episode_to_transitions,
    sample_batch,
    seed_demo_buffer,
)
from distillab.seeding import derive_rng


def _obs(v, dim=4):
    x = np.zeros(dim, dtype=np.float32)
    x[0] = v
    return x


def _episode(length=40, success=True, tags=None, variant="block", task="insertion"):
    rewards = np.zeros(length, dtype=np.float32)
    if success:
        rewards[-1] = 1.0
    return Episode(
        task_kind=task,
        variant_id=variant,
        provenance="demo",
        seed=0,
        observations=np.arange((length + 1) * 18, dtype=np.float32).reshape(length + 1, 18),
        actions=np.tile(np.linspace(-1, 1, 7).astype(np.float32), (length, 1)),
        rewards=rewards,
        stages=np.zeros(length, dtype=np.uint8),
        success=success,
        control_hz=10.0,
        tags=tags or {},
    )


def test_ring_buffer_evicts_oldest():
    buf = RingBuffer(5, 4, 2)
    for i in range(8):
        buf.add(_obs(i), np.zeros(2), 0.0, _obs(i + 100), False)
    assert len(buf) == 5
    kept = sorted(buf.obs[:5, 0].tolist())
    assert kept == [3.0, 4.0, 5.0, 6.0, 7.0]


def test_append_buffer_grows_and_never_evicts():
    buf = AppendBuffer(4, 2, initial_capacity=4)
    sizes = []
    for i in range(50):
        buf.add(_obs(i), np.zeros(2), 0.0, _obs(i), False)
        sizes.append(len(buf))
    assert len(buf) == 50
    assert sizes == sorted(sizes)
    assert buf.obs[:50, 0].tolist() == [float(i) for i in range(50)]


def test_reward_must_be_sparse():
    buf = RingBuffer(5, 4, 2)
    with pytest.raises(BufferError, match="sparse"):
        buf.add(_obs(0), np.zeros(2), 0.5, _obs(1), False)


def test_symmetric_split_exact():
    bufs = ReplayBuffers.create(4, 2, agent_capacity=64)
    rng = derive_rng(0, "split")
    for i in range(10):
        bufs.agent_buffer.add(_obs(i), np.zeros(2), 0.0, _obs(i), False, source="agent")
    for i in range(30):
        bufs.demo_buffer.add(_obs(i), np.zeros(2), 0.0, _obs(i), False, source="demo")
    for size in (2, 8, 256):
        batch = sample_batch(bufs, size, rng)
        assert (batch.sources == SOURCE_CODE["agent"]).sum() == size // 2
        assert (batch.sources == SOURCE_CODE["demo"]).sum() == size // 2


def test_batch_two_returns_both_singletons():
    bufs = ReplayBuffers.create(4, 2, agent_capacity=4)
    bufs.agent_buffer.add(_obs(7), np.zeros(2), 0.0, _obs(7), False, source="agent")
    bufs.demo_buffer.add(_obs(9), np.zeros(2), 0.0, _obs(9), False, source="demo")
    batch = sample_batch(bufs, 2, derive_rng(0, "two"))
    assert sorted(batch.observations[:, 0].tolist()) == [7.0, 9.0]


def test_sample_batch_rejects_odd_and_empty():
    bufs = ReplayBuffers.create(4, 2, agent_capacity=4)
    rng = derive_rng(0, "err")
    bufs.agent_buffer.add(_obs(0), np.zeros(2), 0.0, _obs(0), False)
    with pytest.raises(BufferError, match="even"):
        sample_batch(bufs, 3, rng)
    with pytest.raises(BufferError, match="non-empty"):
        sample_batch(bufs, 2, rng)


def test_sampling_marginals_uniform():
    # buffers of size 100 and 900; each stored transition should be drawn
    # uniformly within its buffer
    bufs = ReplayBuffers.create(4, 2, agent_capacity=128)
    for i in range(100):
        bufs.agent_buffer.add(_obs(i), np.zeros(2), 0.0, _obs(i), False, source="agent")
    for i in range(900):
        bufs.demo_buffer.add(_obs(i), np.zeros(2), 0.0, _obs(i), False, source="demo")
    rng = derive_rng(0, "marginal")
    agent_counts = np.zeros(100)
    demo_counts = np.zeros(900)
    for _ in range(500):
        batch = sample_batch(bufs, 20, rng)
        agent_ids = batch.observations[batch.sources == SOURCE_CODE["agent"], 0].astype(int)
        demo_ids = batch.observations[batch.sources == SOURCE_CODE["demo"], 0].astype(int)
        np.add.at(agent_counts, agent_ids, 1)
        np.add.at(demo_counts, demo_ids, 1)
    assert stats.chisquare(agent_counts).pvalue > 0.01
    assert stats.chisquare(demo_counts).pvalue > 0.01


def test_seed_demo_buffer_sizes_and_sources():
    bufs = ReplayBuffers.create(18, 4, agent_capacity=16)
    episodes = [_episode(length=40) for _ in range(20)]
    seed_demo_buffer(bufs, episodes)
    assert len(bufs.demo_buffer) == 800
    assert np.all(bufs.demo_buffer.sources == SOURCE_CODE["demo"])
    assert len(bufs.agent_buffer) == 0


def test_seed_demo_buffer_empty_warns():
    bufs = ReplayBuffers.create(18, 4, agent_capacity=16)
    with pytest.warns(UserWarning, match="zero episodes"):
        seed_demo_buffer(bufs, [])
    assert len(bufs.demo_buffer) == 0


def test_seed_demo_buffer_rejects_mixed_tasks():
    bufs = ReplayBuffers.create(18, 4, agent_capacity=16)
    eps = [_episode(variant="block"), _episode(variant="usb", task="connector")]
    with pytest.raises(BufferError, match="multiple tasks"):
        seed_demo_buffer(bufs, eps)


def test_episode_transition_actions_use_native_columns():
    ep = _episode(length=3)
    trs = list(episode_to_transitions(ep, act_dim=4))
    assert len(trs) == 3
    expected = ep.actions[0][[0, 1, 2, 5]]
    np.testing.assert_array_equal(trs[0].action, expected)
    trs5 = list(episode_to_transitions(ep, act_dim=5))
    np.testing.assert_array_equal(trs5[0].action, ep.actions[0][[0, 1, 2, 5, 6]])


def test_episode_transition_done_semantics():
    # success: final transition rewarded and done
    trs = list(episode_to_transitions(_episode(success=True), act_dim=4))
    assert trs[-1].done and trs[-1].reward == 1.0
    assert not any(t.done for t in trs[:-1])
    # timeout: episode ends but the value keeps bootstrapping
    trs = list(episode_to_transitions(_episode(success=False, tags={"timeout": 1}), act_dim=4))
    assert not trs[-1].done
    # fatal non-timeout failure is absorbing
    trs = list(episode_to_transitions(_episode(success=False, tags={"failed": 1}), act_dim=4))
    assert trs[-1].done and trs[-1].reward == 0.0


def test_nstep_view_aggregates_windows():
    # length-5 success segment, n=3, gamma=0.5: hand-computed window returns
    from distillab.rl import Transition

    gamma, n, T = 0.5, 3, 5
    buf = AppendBuffer(2, 1, discount=gamma, nstep=n)
    trs = [
        Transition(
            observation=np.array([t, 0], dtype=np.float32),
            action=np.zeros(1, dtype=np.float32),
            reward=1.0 if t == T - 1 else 0.0,
            next_observation=np.array([t + 1, 0], dtype=np.float32),
            done=t == T - 1,
        )
        for t in range(T)
    ]
    buf.add_segment(trs)
    # raw columns keep the one-step sparse rewards
    np.testing.assert_array_equal(buf.rew[:T], [0, 0, 0, 0, 1])
    # windows: t=0 covers 0..2 (no reward), t=2 covers 2..4 (reward at lag 2)
    np.testing.assert_allclose(buf.v_ret[:T], [0, 0, gamma**2, gamma, 1.0])
    np.testing.assert_allclose(buf.v_disc[:T], [gamma**3, gamma**3, gamma**3, gamma**2, gamma])
    np.testing.assert_array_equal(buf.v_done[:T], [0, 0, 1, 1, 1])
    np.testing.assert_array_equal(buf.v_next[:T, 0], [3, 4, 5, 5, 5])


def test_nstep_window_truncates_at_mid_segment_done():
    from distillab.rl import Transition

    buf = AppendBuffer(1, 1, discount=0.5, nstep=4)
    trs = [
        Transition(np.zeros(1), np.zeros(1), 0.0, np.ones(1), False),
        Transition(np.zeros(1), np.zeros(1), 1.0, np.ones(1), True),
        Transition(np.zeros(1), np.zeros(1), 0.0, np.ones(1), False),
    ]
    buf.add_segment(trs)
    # window starting at 0 stops at the done in position 1
    assert buf.v_ret[0] == pytest.approx(0.5)
    assert buf.v_done[0] == 1.0
    # the post-done transition starts a fresh truncated window
    assert buf.v_ret[2] == 0.0 and buf.v_done[2] == 0.0


def test_single_adds_keep_one_step_view():
    buf = AppendBuffer(2, 1, discount=0.9, nstep=5)
    buf.add(_obs(1, 2), np.zeros(1), 1.0, _obs(2, 2), True)
    assert buf.v_ret[0] == 1.0 and buf.v_disc[0] == np.float32(0.9)
    np.testing.assert_array_equal(buf.v_next[0], buf.next_obs[0])


def test_episode_transitions_reward_fn_overrides_env_reward():
    # the learner's reward comes from the provided function, not the stored flags
    ep = _episode(success=True)
    reward_fn = lambda obs: 1.0 if obs[0] % 2 == 0 else 0.0
    trs = list(episode_to_transitions(ep, act_dim=4, reward_fn=reward_fn))
    for t in trs:
        assert t.reward == reward_fn(t.next_observation)
